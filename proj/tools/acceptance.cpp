#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "msm/errors.hpp"
#include "msm/estimate.hpp"
#include "msm/fracgauss.hpp"
#include "msm/harness.hpp"
#include "msm/lowerbound.hpp"
#include "msm/rng.hpp"
#include "msm/simulate.hpp"

namespace fs = std::filesystem;
using namespace msm;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(4);
    os << x;
    return os.str();
}

std::vector<double> h_grid17() {
    std::vector<double> hs;
    for (int i = 0; i < 17; ++i) {
        const double h = 0.05 + 0.05625 * i;  // 0.05 .. 0.95
        hs.push_back(std::abs(h - 0.5) < 1e-9 ? 0.49 : h);
    }
    return hs;
}

Verdict identities() {
    double e_a = 0, e_ap = 0, e_phi = 0, e_ab = 0, e_k = 0, e_g = 0;
    for (double h : h_grid17()) {
        const Eigen::VectorXd g = gamma_vec(h, 64), p = phi_vec(h, 64);
        for (long r = 2; r <= 64; r += 2) {
            const Eigen::VectorXd a = weight_a(r, 64), ap = weight_a_prime(r, 64);
            const double rg = std::pow(double(r), 2 * h), rp = std::pow(double(r), h + 0.5) * phi0(h);
            e_a = std::max({e_a, std::abs(a.dot(g) / rg - 1), std::abs(a.dot(p) / rp - 1)});
            const double rg2 = rg * (1 - std::pow(2.0, 1 - 2 * h)), rp2 = rp * (1 - std::pow(2.0, 0.5 - h));
            e_ap = std::max({e_ap, std::abs(ap.dot(g) - rg2) / std::max(rg, 1.0),
                             std::abs(ap.dot(p) - rp2) / std::max(std::abs(rp), 1.0)});
        }
        // explicit second difference of r^{H+1/2} against Phi_0 Gamma^{Hbar}_r
        const double c = 1 / (k_h(h) * (h + 0.5));
        for (long r = 1; r <= 64; ++r) {
            const double b = h + 0.5;
            const double direct = c * (std::pow(r + 1.0, b) - 2 * std::pow(double(r), b) + std::pow(r - 1.0, b));
            e_phi = std::max(e_phi, std::abs(phi_h(h, r) - direct) / std::max(1.0, std::abs(direct)));
        }
        e_k = std::max(e_k, std::abs(k_h(h) - k_h_integral(h)));
        for (auto [k, l] : {std::pair{1L, 2L}, {1L, 3L}, {2L, 5L}}) {
            const double gm = gamma_h(h, l - k);
            e_g = std::max(e_g, std::abs(g_increment_inner(h, k, l) / gm - 1));
        }
    }
    Rng rng(11);
    for (Regime reg : {Regime::rough, Regime::smooth})
        for (int k = 0; k <= 4; ++k)
            for (int t = 0; t < 20; ++t) {
                std::vector<double> x(k + 1);
                for (auto& xi : x) xi = reg == Regime::rough ? 0.01 + 0.48 * rng.uniform() : 0.51 + 0.48 * rng.uniform();
                const ACoeffs a = a_coeffs(k, x, reg);
                e_ab = std::max(e_ab, (a.closed - a.recursive).cwiseAbs().maxCoeff());
            }
    const bool ok = e_a <= 1e-10 && e_ap <= 1e-10 && e_phi <= 1e-12 && e_ab <= 1e-12 && e_k <= 1e-8 && e_g <= 1e-6;
    return {ok, "a " + fmt(e_a) + ", a' " + fmt(e_ap) + ", Phi " + fmt(e_phi) + ", A " + fmt(e_ab) + ", K_H " +
                    fmt(e_k) + ", kernel quadrature " + fmt(e_g)};
}

Verdict variance_forms() {
    double worst = 0;
    std::string detail;
    for (double h : {0.1, 0.2, 0.3, 0.4}) {
        try {
            const VarHResult v = var_h_both(h, 10000);
            // the quadratic form once more through the explicit matrix entries
            const int n = n_of_h(h);
            const long r = ladder_base(n, Regime::rough);
            const Eigen::VectorXd u = ladder_vector(h, n, r, Regime::rough) / std::pow(0.5 * double(r), 2 * h);
            const double explicit_q = u.dot(lag_cov_matrix(h, r, 10000).entries * u);
            const double rel = std::max(std::abs(v.series - v.quadratic), std::abs(v.series - explicit_q)) /
                               std::abs(v.series);
            worst = std::max(worst, rel);
            detail += "H=" + fmt(h) + ": " + fmt(rel) + "  ";
        } catch (const ConsistencyError& e) {
            return {false, std::string("H=") + fmt(h) + ": " + e.what()};
        }
    }
    return {worst <= 1e-6, "max relative gap " + fmt(worst) + " (" + detail + ")"};
}

// Largest entrywise deviation of the sample covariance from sigma, in Gaussian MC standard errors.
double worst_se(const std::function<Eigen::VectorXd(std::uint64_t)>& draw, const Eigen::MatrixXd& sigma, long m) {
    const long n = sigma.rows();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    for (long i = 0; i < m; ++i) {
        const Eigen::VectorXd x = draw(static_cast<std::uint64_t>(i));
        acc.selfadjointView<Eigen::Lower>().rankUpdate(x);
    }
    acc = acc.selfadjointView<Eigen::Lower>();
    acc /= double(m);
    double worst = 0;
    for (long i = 0; i < n; ++i)
        for (long j = 0; j <= i; ++j) {
            const double se = std::sqrt((sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / double(m));
            worst = std::max(worst, std::abs(acc(i, j) - sigma(i, j)) / se);
        }
    return worst;
}

Verdict simulation_exactness() {
    const long n = 64, m = 10000;
    bool ok = true;
    std::string detail;
    for (const ModelTheta& th : {ModelTheta{0.3, 1, 0.5, 1}, ModelTheta{0.7, 1, 0.4, 1}}) {
        const double delta = 1.0 / double(n);
        const Eigen::MatrixXd sigma = mixed_cov(th, n, delta);
        const MfbmSampler sampler(th, n, delta);
        const double w1 = worst_se([&](std::uint64_t s) { return sampler.sample(substream_seed(101, s)).increments; },
                                   sigma, m);
        const double w2 = worst_se(
            [&](std::uint64_t s) { return sample_three_process(th, n, delta, substream_seed(202, s)).increments; }, sigma,
            m);
        ok = ok && w1 <= 4 && w2 <= 4;
        detail += "H=" + fmt(th.h) + ": mfbm " + fmt(w1) + " SE, three-process " + fmt(w2) + " SE; ";
    }
    return {ok, detail + "limit 4 SE"};
}

void require_grid(const ExperimentConfig& c, const std::vector<long>& grid, long reps, const std::string& name) {
    if (c.n_grid != grid) throw DomainError(name + ": n grid differs from the required one");
    if (reps > 0 && c.replications != reps) throw DomainError(name + ": replication count differs from " + std::to_string(reps));
}

std::vector<long> pow2_grid(int lo, int hi) {
    std::vector<long> g;
    for (int e = lo; e <= hi; ++e) g.push_back(1L << e);
    return g;
}

struct Runner {
    fs::path configs;
    fs::path out;
    std::map<std::string, ExperimentConfig> used;  // config name -> config with the output redirected

    ExperimentConfig load(const std::string& name) {
        ExperimentConfig c = load_config((configs / (name + ".json")).string());
        c.output = (out / "run1" / name).string();
        used[name] = c;
        return c;
    }
};

Verdict rates(Runner& rn) {
    struct Want {
        std::string config, param;
        double tol;
    };
    const std::vector<Want> wants{{"rates_rough", "h", 0.1},
                                  {"rates_smooth", "h", 0.1},
                                  {"rates_rough", "lambda", 0.1},
                                  {"rates_smooth_pi", "pi", 0.15},
                                  {"rates_smooth", "c", 0.1}};
    std::map<std::string, nlohmann::ordered_json> summaries;
    for (const auto& name : {"rates_rough", "rates_smooth", "rates_smooth_pi"}) {
        const ExperimentConfig c = rn.load(name);
        require_grid(c, pow2_grid(10, 14), 500, name);
        const ExperimentOutcome o = run_experiment(c);
        write_outcome(o, c);
        summaries[name] = o.summary;
    }
    bool ok = true;
    std::string detail;
    for (const auto& w : wants) {
        const auto& sm = summaries.at(w.config);
        std::optional<nlohmann::ordered_json> fit;
        for (const auto& f : sm["slopes"])
            if (f["param"] == w.param) fit = f;
        const bool avail = fit && (*fit)["available"].get<bool>();
        const double slope = avail ? (*fit)["slope"].get<double>() : NAN;
        const double target = fit ? (*fit)["target"].get<double>() : NAN;
        const bool pass = avail && std::abs(slope - target) <= w.tol;
        ok = ok && pass;
        long fails = 0;
        for (long f : sm["failures"].get<std::vector<long>>()) fails += f;
        detail += w.param + "@" + w.config.substr(6) + " " + (avail ? fmt(slope) : std::string("n/a")) + " vs " +
                  fmt(target) + "+/-" + fmt(w.tol) + " (failed reps " + std::to_string(fails) + "/2500); ";
    }
    return {ok, detail};
}

Verdict coverage(Runner& rn) {
    const ExperimentConfig c = rn.load("coverage_rough");
    require_grid(c, {16384}, 1000, "coverage_rough");
    if (c.theta->h != 0.3 || c.level != 0.95) throw DomainError("coverage_rough: unexpected theta or level");
    const ExperimentOutcome o = run_experiment(c);
    write_outcome(o, c);
    std::optional<nlohmann::ordered_json> row;
    for (const auto& r : o.summary["coverage"])
        if (r["param"] == "h") row = r;
    if (!row) return {false, "no coverage row for h"};
    const long used = (*row)["used"], failures = (*row)["failures"];
    const double cond = (*row)["coverage"];
    // replications that produced no interval count as misses
    const double freq = cond * double(used) / double(c.replications);
    const bool ok = freq >= 0.90 && freq <= 0.985;
    return {ok, "coverage " + fmt(freq) + " over " + std::to_string(c.replications) + " replications (" +
                    std::to_string(failures) + " failed; " + fmt(cond) + " among the " + std::to_string(used) +
                    " that produced an interval), required [0.90, 0.985]"};
}

Verdict debiasing(Runner& rn) {
    const ExperimentConfig c = rn.load("bias_rough");
    require_grid(c, {4096}, 500, "bias_rough");
    const ExperimentOutcome o = run_experiment(c);
    write_outcome(o, c);
    const auto& r = o.summary["bias"].at(0);
    const double pb = r["pilot_bias"], ps = r["pilot_se"], db = r["debiased_bias"], dse = r["debiased_se"];
    const long used = r["used"], failures = r["failures"];
    const bool smaller = std::abs(db) < std::abs(pb);
    const bool biased = std::abs(pb) > 5 * ps;
    return {smaller && biased, "debiased bias " + fmt(db) + " (se " + fmt(dse) + "), pilot bias " + fmt(pb) + " (se " +
                                   fmt(ps) + ", " + fmt(std::abs(pb) / ps) + " SE), " + std::to_string(used) +
                                   " used, " + std::to_string(failures) + " failed"};
}

Verdict kl_bound(Runner& rn) {
    bool ok = true;
    std::string detail;
    for (const auto& name : {"kl_h03", "kl_h07"}) {
        const ExperimentConfig c = rn.load(name);
        require_grid(c, pow2_grid(6, 11), 0, name);
        if (c.r0 || !c.kl_control) throw DomainError(std::string(name) + ": r0 must be bisected with the control scan on");
        const ExperimentOutcome o = run_experiment(c);
        write_outcome(o, c);
        const auto kl = o.summary["scan"]["kl"].get<std::vector<double>>();
        const auto ctl = o.summary["control"]["kl"].get<std::vector<double>>();
        const double r0 = o.summary["scan"]["r0"];
        const double maxkl = *std::max_element(kl.begin(), kl.end());
        const double growth = ctl.back() / ctl.front();
        const bool pass = r0 > 0 && o.summary["scan"]["all_ok"].get<bool>() && growth >= 10;
        ok = ok && pass;
        detail += "H=" + fmt(c.theta->h) + ": r0 " + fmt(r0) + ", max KL " + fmt(maxkl) + " (bound " +
                  fmt(kKLBound) + "), control growth " + fmt(growth) + "x; ";
    }
    return {ok, detail};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Verdict determinism(Runner& rn) {
    // series artifacts, twice each
    const fs::path d1 = rn.out / "run1", d2 = rn.out / "run2";
    fs::create_directories(d2);
    for (const fs::path& d : {d1, d2}) {
        const auto s = sample_mfbm(ModelTheta{0.3, 1, 0.5, 1}, 4096, 1.0 / 4096, 42);
        write_series(s, (d / "series.csv").string());
        write_series(s, (d / "series.bin").string());
        const auto sv = sample_mfbm(ModelTheta{0.7, 1, 0.4, 1}, 4096, 1.0 / 4096, 43, SimMethod::cholesky);
        write_series(sv, (d / "series_chol.csv").string());
    }
    // experiment artifacts: rerun every config used above into run2
    for (auto [name, c] : rn.used) {
        c.output = (d2 / name).string();
        write_outcome(run_experiment(c), c);
    }
    long compared = 0;
    std::vector<std::string> diffs;
    for (const auto& e : fs::directory_iterator(d1)) {
        const fs::path other = d2 / e.path().filename();
        ++compared;
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) diffs.push_back(e.path().filename().string());
    }
    std::string detail = std::to_string(compared) + " files compared";
    if (!diffs.empty()) {
        detail += "; differing:";
        for (const auto& d : diffs) detail += " " + d;
    }
    return {diffs.empty() && compared > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance run: one PASS/FAIL line per criterion"};
    std::string configs = MSM_CONFIG_DIR;
    std::string out = "out/acceptance";
    std::vector<int> only;
    app.add_option("--configs", configs, "directory with the experiment configs");
    app.add_option("--out", out, "artifact directory");
    app.add_option("--only", only, "run only these criteria (8 needs the artifacts of the others)")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    Runner rn{configs, out, {}};
    fs::create_directories(rn.out / "run1");

    struct Criterion {
        int id;
        std::string name;
        double limit_s;  // 0: no runtime limit
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> all{
        {1, "identity suite", 10, identities},
        {2, "variance representations", 30, variance_forms},
        {3, "simulation exactness", 120, simulation_exactness},
        {4, "rates of convergence", 900, [&] { return rates(rn); }},
        {5, "coverage", 600, [&] { return coverage(rn); }},
        {6, "debiasing", 0, [&] { return debiasing(rn); }},
        {7, "KL boundedness", 300, [&] { return kl_bound(rn); }},
        {8, "determinism", 0, [&] { return determinism(rn); }},
    };
    const std::set<int> pick(only.begin(), only.end());
    bool all_pass = true;
    for (const auto& c : all) {
        if (!pick.empty() && !pick.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_s > 0 && secs > c.limit_s) {
            v.pass = false;
            v.detail += " [runtime over the " + fmt(c.limit_s) + " s limit]";
        }
        all_pass = all_pass && v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << v.detail << " [" << fmt(secs)
                  << " s]" << std::endl;
    }
    return all_pass ? 0 : 1;
}
