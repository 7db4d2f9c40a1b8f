#include "msm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <map>
#include <thread>

#include "msm/errors.hpp"
#include "msm/fracgauss.hpp"

namespace msm {

namespace {

std::string num(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double mean_of(const std::vector<double>& v) { return v.empty() ? NAN : pairwise_sum(v.data(), v.size()) / double(v.size()); }

ProcessSpec process_from_json(const nlohmann::json& j) {
    if (j.is_number()) return ProcessSpec::constant(j.get<double>());
    const std::string kind = j.value("kind", "constant");
    if (kind == "constant") return ProcessSpec::constant(j.at("value").get<double>());
    if (kind == "ou")
        return ProcessSpec::ou(j.at("x0").get<double>(), j.at("mean").get<double>(), j.at("kappa").get<double>(),
                               j.at("vol").get<double>());
    throw DomainError("unknown process kind '" + kind + "'");
}

nlohmann::ordered_json process_to_json(const ProcessSpec& p) {
    nlohmann::ordered_json j;
    if (p.kind == ProcessSpec::Kind::constant) {
        j["kind"] = "constant";
        j["value"] = p.x0;
    } else {
        j["kind"] = "ou";
        j["x0"] = p.x0;
        j["mean"] = p.mean;
        j["kappa"] = p.kappa;
        j["vol"] = p.vol;
    }
    return j;
}

double true_h(const ExperimentConfig& cfg) { return cfg.theta ? cfg.theta->h : cfg.stochvol->h; }

std::string regime_for(const ExperimentConfig& cfg) {
    if (cfg.regime != "truth") return cfg.regime;
    return true_h(cfg) < 0.5 ? "rough" : "smooth";
}

bool is_replication_failure(const std::exception& e) {
    return dynamic_cast<const NonPositiveStatistic*>(&e) || dynamic_cast<const DegenerateDenominator*>(&e) ||
           dynamic_cast<const DomainError*>(&e);
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["experiment"] = to_string(c.experiment);
    if (c.theta) j["theta"] = to_json(*c.theta);
    if (c.stochvol) {
        const auto& s = *c.stochvol;
        j["stochvol"] = {{"h", s.h},
                         {"drift", process_to_json(s.drift)},
                         {"sigma", process_to_json(s.sigma_proc)},
                         {"rho", process_to_json(s.rho_proc)},
                         {"rho_prime", process_to_json(s.rho_prime_proc)},
                         {"oversample", s.oversample}};
    }
    j["n_grid"] = c.n_grid;
    j["replications"] = c.replications;
    j["seed"] = c.seed;
    j["level"] = c.level;
    j["regime"] = c.regime;
    j["method"] = to_string(c.method);
    j["estimator"] = {{"pilot_r", c.est.pilot_r}, {"n_cap", c.est.n_cap}, {"eps", c.est.eps},
                      {"margin", c.est.margin}, {"k_max", c.est.k_max}};
    return j;
}

nlohmann::ordered_json assertions_json(const std::vector<Assertion>& as) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& a : as) arr.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
    return arr;
}

void failure_assertions(const ExperimentConfig& cfg, const std::vector<long>& failures, std::vector<Assertion>& out) {
    for (std::size_t k = 0; k < failures.size(); ++k) {
        const double rate = double(failures[k]) / double(cfg.replications);
        out.push_back({"failure rate n=" + std::to_string(cfg.n_grid[k]), rate <= cfg.max_failure_rate,
                       std::to_string(failures[k]) + " of " + std::to_string(cfg.replications) + " replications failed"});
    }
}

const ParamEstimate& param_of(const EstimateReport& r, const std::string& p) {
    if (p == "h") return r.h;
    if (p == "c") return r.c;
    if (p == "lambda") return r.lambda;
    if (p == "pi") return r.pi;
    throw DomainError("unknown parameter '" + p + "'");
}

}  // namespace

Experiment parse_experiment(const std::string& s) {
    if (s == "rates") return Experiment::rates;
    if (s == "coverage") return Experiment::coverage;
    if (s == "bias") return Experiment::bias;
    if (s == "kl") return Experiment::kl;
    throw DomainError("unknown experiment '" + s + "'");
}

std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::rates: return "rates";
        case Experiment::coverage: return "coverage";
        case Experiment::bias: return "bias";
        case Experiment::kl: return "kl";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    if (!theta && !stochvol) throw DomainError("config needs theta or stochvol");
    if (theta && stochvol) throw DomainError("config takes theta or stochvol, not both");
    if (experiment == Experiment::kl && !theta) throw DomainError("kl experiments need theta");
    if (n_grid.empty()) throw DomainError("n_grid is empty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        const long n = n_grid[i];
        if (n < 2 || (n & (n - 1)) != 0) throw DomainError("grid sizes must be powers of two");
        if (i > 0 && n <= n_grid[i - 1]) throw DomainError("n_grid must be strictly increasing");
    }
    if (experiment != Experiment::kl && replications < 2) throw DomainError("replications must be at least 2");
    if (!(level > 0 && level < 1)) throw DomainError("level must lie in (0,1)");
    if (regime != "truth" && regime != "auto" && regime != "rough" && regime != "smooth")
        throw DomainError("regime must be truth, auto, rough or smooth");
    if (theta) theta->validate();
    if (stochvol) stochvol->validate();
    for (const auto& p : params) (void)Truth{}.get(p);
    if (experiment == Experiment::bias && true_h(*this) >= 0.5) throw RegimeError("bias comparison needs H < 1/2");
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        c.experiment = parse_experiment(j.at("experiment").get<std::string>());
        if (j.contains("theta")) c.theta = theta_from_json(j["theta"]);
        if (j.contains("stochvol")) {
            const auto& s = j["stochvol"];
            StochVolSpec sv;
            sv.h = s.at("h").get<double>();
            if (s.contains("drift")) sv.drift = process_from_json(s["drift"]);
            if (s.contains("sigma")) sv.sigma_proc = process_from_json(s["sigma"]);
            if (s.contains("rho")) sv.rho_proc = process_from_json(s["rho"]);
            if (s.contains("rho_prime")) sv.rho_prime_proc = process_from_json(s["rho_prime"]);
            sv.oversample = s.value("oversample", sv.oversample);
            c.stochvol = sv;
        }
        c.n_grid = j.at("n_grid").get<std::vector<long>>();
        c.replications = j.value("replications", c.replications);
        c.seed = j.value("seed", c.seed);
        c.output = j.value("output", c.output);
        c.level = j.value("level", c.level);
        c.regime = j.value("regime", c.regime);
        if (j.contains("method")) c.method = parse_method(j["method"].get<std::string>());
        c.threads = j.value("threads", c.threads);
        c.max_failure_rate = j.value("max_failure_rate", c.max_failure_rate);
        if (j.contains("params")) c.params = j["params"].get<std::vector<std::string>>();
        if (j.contains("estimator")) {
            const auto& e = j["estimator"];
            c.est.pilot_r = e.value("pilot_r", c.est.pilot_r);
            c.est.n_cap = e.value("n_cap", c.est.n_cap);
            c.est.eps = e.value("eps", c.est.eps);
            c.est.margin = e.value("margin", c.est.margin);
            c.est.k_max = e.value("k_max", c.est.k_max);
        }
        if (j.contains("assert")) {
            const auto& a = j["assert"];
            if (a.contains("slopes"))
                for (const auto& s : a["slopes"]) c.rate_asserts.push_back({s.at("param"), s.value("tol", 0.1)});
            if (a.contains("coverage"))
                for (const auto& s : a["coverage"])
                    c.coverage_asserts.push_back(
                        {s.value("param", "h"), s.value("n", 0L), s.value("lo", 0.90), s.value("hi", 0.985)});
            c.coverage_trend = a.value("coverage_trend", false);
            c.bias_assert = a.value("debiasing", false);
            c.pilot_bias_min_se = a.value("pilot_bias_min_se", c.pilot_bias_min_se);
            c.control_min_growth = a.value("control_min_growth", c.control_min_growth);
        }
        if (j.contains("r0")) c.r0 = j["r0"].get<double>();
        c.r0_hi = j.value("r0_hi", c.r0_hi);
        c.r0_rel_tol = j.value("r0_rel_tol", c.r0_rel_tol);
        c.kl_control = j.value("control", c.kl_control);
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DomainError("cannot open config " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DomainError("config " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

double Truth::get(const std::string& p) const {
    if (p == "h") return h;
    if (p == "c") return c;
    if (p == "lambda") return lambda;
    if (p == "pi") return pi;
    throw DomainError("unknown parameter '" + p + "'");
}

Truth truth_of(const ModelTheta& t) {
    return {t.h, t.sigma_sq, t.lambda_cov * b_coef(t.h) / phi0(t.h), t.pi_total};
}

std::uint64_t replication_seed(std::uint64_t base, std::size_t grid_index, long replication) {
    return substream_seed(substream_seed(base, grid_index), static_cast<std::uint64_t>(replication));
}

std::vector<Replication> run_replications(const ExperimentConfig& cfg, std::size_t k) {
    const long n = cfg.n_grid.at(k);
    const double delta = 1.0 / double(n);
    ReportOptions ropt;
    ropt.regime = regime_for(cfg);
    ropt.level = cfg.level;
    ropt.est = cfg.est;

    std::optional<MfbmSampler> sampler;
    if (cfg.theta) sampler.emplace(*cfg.theta, n, delta, cfg.method);
    const Truth fixed = cfg.theta ? truth_of(*cfg.theta) : Truth{};

    std::vector<Replication> out(static_cast<std::size_t>(cfg.replications));
    std::atomic<long> next{0};
    auto worker = [&] {
        for (long i = next++; i < cfg.replications; i = next++) {
            Replication& rep = out[static_cast<std::size_t>(i)];
            const std::uint64_t seed = replication_seed(cfg.seed, k, i);
            IncrementSeries s;
            if (sampler) {
                s = sampler->sample(seed);
                rep.truth = fixed;
            } else {
                SvSample sv = sample_mixed_sm(*cfg.stochvol, n, delta, seed);
                s = std::move(sv.series);
                rep.truth = {cfg.stochvol->h, sv.truth.c_t, sv.truth.lambda_t, sv.truth.pi_t};
            }
            try {
                rep.report = full_report(s, ropt);
                rep.ok = true;
            } catch (const std::exception& e) {
                if (!is_replication_failure(e)) throw;
                rep.error = e.what();
            }
        }
    };
    unsigned nt = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    nt = static_cast<unsigned>(std::min<long>(nt, cfg.replications));
    if (nt <= 1) {
        worker();
    } else {
        std::vector<std::exception_ptr> errs(nt);
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nt; ++t)
            pool.emplace_back([&, t] {
                try {
                    worker();
                } catch (...) {
                    errs[t] = std::current_exception();
                    next = cfg.replications;
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }
    return out;
}

double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

std::pair<double, double> ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t m = x.size();
    if (m < 2 || y.size() != m) throw DomainError("slope fit needs at least two points");
    const double mx = mean_of(x), my = mean_of(y);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double b = sxy / sxx;
    if (m < 3) return {b, NAN};
    double rss = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double e = y[i] - my - b * (x[i] - mx);
        rss += e * e;
    }
    return {b, std::sqrt(rss / double(m - 2) / sxx)};
}

std::optional<std::pair<double, bool>> rate_target(const std::string& p, double h) {
    if (h < 0.5) {
        if (p == "h") return std::pair{0.5, false};
        if (p == "c") return h > 0.25 ? std::optional(std::pair{2 * h - 0.5, false}) : std::nullopt;
        if (p == "lambda") return std::pair{h, false};
        if (p == "pi") return std::pair{0.5, true};
    } else {
        if (p == "h") return std::pair{1 - h, false};
        if (p == "c") return std::pair{0.5, false};
        if (p == "lambda") return std::pair{1 - h, true};
        if (p == "pi") return h < 0.75 ? std::optional(std::pair{1.5 - 2 * h, false}) : std::nullopt;
    }
    throw DomainError("unknown parameter '" + p + "'");
}

RateTable run_rates(const ExperimentConfig& cfg) {
    RateTable t;
    std::map<std::string, std::vector<std::pair<double, double>>> pts;  // param -> (log delta, log rmse)
    for (std::size_t k = 0; k < cfg.n_grid.size(); ++k) {
        const auto reps = run_replications(cfg, k);
        const long n = cfg.n_grid[k];
        const double delta = 1.0 / double(n);
        long fails = 0;
        for (const auto& r : reps) fails += r.ok ? 0 : 1;
        t.failures.push_back(fails);
        for (const auto& p : cfg.params) {
            std::vector<double> est, err, tru;
            for (const auto& r : reps) {
                if (!r.ok) continue;
                const ParamEstimate& e = param_of(r.report, p);
                if (!e.identifiable || !std::isfinite(e.value)) continue;
                est.push_back(e.value);
                tru.push_back(r.truth.get(p));
                err.push_back(e.value - r.truth.get(p));
            }
            RateRow row;
            row.param = p;
            row.n = n;
            row.delta = delta;
            row.used = static_cast<long>(est.size());
            row.failures = fails;
            row.truth = mean_of(tru);
            row.mean = mean_of(est);
            row.bias = mean_of(err);
            std::vector<double> sq(err.size()), dev(err.size());
            for (std::size_t i = 0; i < err.size(); ++i) {
                sq[i] = err[i] * err[i];
                dev[i] = (err[i] - row.bias) * (err[i] - row.bias);
            }
            row.rmse = std::sqrt(mean_of(sq));
            row.sd = std::sqrt(mean_of(dev));
            t.rows.push_back(row);
            const auto target = rate_target(p, true_h(cfg));
            if (target && row.used > 0 && row.rmse > 0) {
                double y = std::log(row.rmse);
                if (target->second) y -= std::log(std::abs(std::log(delta)));
                pts[p].push_back({std::log(delta), y});
            }
        }
    }
    for (const auto& p : cfg.params) {
        SlopeFit f;
        f.param = p;
        const auto target = rate_target(p, true_h(cfg));
        if (target) {
            f.target = target->first;
            f.log_factor = target->second;
        }
        if (target && pts[p].size() >= 2) {
            std::vector<double> x, y;
            for (auto [a, b] : pts[p]) {
                x.push_back(a);
                y.push_back(b);
            }
            std::tie(f.slope, f.se) = ols_slope(x, y);
            f.available = true;
        }
        t.slopes.push_back(f);
    }
    failure_assertions(cfg, t.failures, t.assertions);
    for (const auto& a : cfg.rate_asserts) {
        const auto it = std::find_if(t.slopes.begin(), t.slopes.end(), [&](const SlopeFit& f) { return f.param == a.param; });
        Assertion out{"slope " + a.param, false, "parameter not fitted"};
        if (it != t.slopes.end() && it->available) {
            out.passed = std::abs(it->slope - it->target) <= a.tol;
            out.detail = "slope " + num(it->slope) + " (se " + num(it->se) + "), target " + num(it->target) + " +/- " +
                         num(a.tol);
        }
        t.assertions.push_back(out);
    }
    return t;
}

CoverageTable run_coverage(const ExperimentConfig& cfg) {
    CoverageTable t;
    for (std::size_t k = 0; k < cfg.n_grid.size(); ++k) {
        const auto reps = run_replications(cfg, k);
        long fails = 0;
        for (const auto& r : reps) fails += r.ok ? 0 : 1;
        t.failures.push_back(fails);
        for (const auto& p : cfg.params) {
            std::vector<double> hit;
            for (const auto& r : reps) {
                if (!r.ok) continue;
                const ParamEstimate& e = param_of(r.report, p);
                if (!e.identifiable) continue;
                const double truth = r.truth.get(p);
                // a missing interval counts as a miss
                hit.push_back(std::isfinite(e.lo) && e.lo <= truth && truth <= e.hi ? 1.0 : 0.0);
            }
            CoverageRow row;
            row.param = p;
            row.n = cfg.n_grid[k];
            row.used = static_cast<long>(hit.size());
            row.failures = fails;
            row.coverage = mean_of(hit);
            row.se = std::sqrt(row.coverage * (1 - row.coverage) / double(std::max<long>(row.used, 1)));
            t.rows.push_back(row);
        }
    }
    failure_assertions(cfg, t.failures, t.assertions);
    for (const auto& a : cfg.coverage_asserts) {
        const long n = a.n ? a.n : cfg.n_grid.back();
        const auto it = std::find_if(t.rows.begin(), t.rows.end(),
                                     [&](const CoverageRow& r) { return r.param == a.param && r.n == n; });
        Assertion out{"coverage " + a.param + " n=" + std::to_string(n), false, "no such row"};
        if (it != t.rows.end()) {
            out.passed = it->coverage >= a.lo && it->coverage <= a.hi;
            out.detail = "coverage " + num(it->coverage) + " (se " + num(it->se) + "), required [" + num(a.lo) + ", " +
                         num(a.hi) + "]";
        }
        t.assertions.push_back(out);
    }
    if (cfg.coverage_trend) {
        for (const auto& p : cfg.params) {
            std::vector<const CoverageRow*> rows;
            for (const auto& r : t.rows)
                if (r.param == p) rows.push_back(&r);
            if (rows.size() < 2) continue;
            const double d0 = std::abs(rows.front()->coverage - cfg.level);
            const double d1 = std::abs(rows.back()->coverage - cfg.level);
            const double slack = 2 * std::hypot(rows.front()->se, rows.back()->se);
            t.assertions.push_back({"coverage trend " + p, d1 <= d0 + slack,
                                    "distance to level " + num(d0) + " -> " + num(d1) + ", slack " + num(slack)});
        }
    }
    return t;
}

BiasTable run_bias_comparison(const ExperimentConfig& cfg) {
    BiasTable t;
    for (std::size_t k = 0; k < cfg.n_grid.size(); ++k) {
        const auto reps = run_replications(cfg, k);
        long fails = 0;
        std::vector<double> pe, de;
        for (const auto& r : reps) {
            if (!r.ok) {
                ++fails;
                continue;
            }
            pe.push_back(r.report.h_pilot - r.truth.h);
            de.push_back(r.report.h.value - r.truth.h);
        }
        t.failures.push_back(fails);
        auto se_of = [](const std::vector<double>& v, double m) {
            std::vector<double> d(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - m) * (v[i] - m);
            if (v.size() < 2) return double(NAN);
            return std::sqrt(pairwise_sum(d.data(), d.size()) / double(v.size() - 1) / double(v.size()));
        };
        BiasRow row;
        row.n = cfg.n_grid[k];
        row.used = static_cast<long>(pe.size());
        row.failures = fails;
        row.pilot_bias = mean_of(pe);
        row.pilot_se = se_of(pe, row.pilot_bias);
        row.debiased_bias = mean_of(de);
        row.debiased_se = se_of(de, row.debiased_bias);
        t.rows.push_back(row);
    }
    failure_assertions(cfg, t.failures, t.assertions);
    if (cfg.bias_assert && !t.rows.empty()) {
        const BiasRow& r = t.rows.back();
        t.assertions.push_back({"debiased bias below pilot bias n=" + std::to_string(r.n),
                                std::abs(r.debiased_bias) < std::abs(r.pilot_bias),
                                "|bias| debiased " + num(std::abs(r.debiased_bias)) + " (se " + num(r.debiased_se) +
                                    ") vs pilot " + num(std::abs(r.pilot_bias)) + " (se " + num(r.pilot_se) + ")"});
        t.assertions.push_back({"pilot bias detectable n=" + std::to_string(r.n),
                                std::abs(r.pilot_bias) > cfg.pilot_bias_min_se * r.pilot_se,
                                "pilot bias / se = " + num(std::abs(r.pilot_bias) / r.pilot_se) + ", required > " +
                                    num(cfg.pilot_bias_min_se)});
    }
    return t;
}

KLExperiment run_kl(const ExperimentConfig& cfg) {
    KLExperiment out;
    const KLScanner scanner(*cfg.theta, cfg.n_grid);
    double r0;
    if (cfg.r0) {
        r0 = *cfg.r0;
    } else {
        r0 = scanner.bisect_r0(cfg.r0_hi, cfg.r0_rel_tol);
        out.bisected = true;
    }
    out.scan = scanner.scan(r0);
    out.assertions.push_back({"kl within 1/9", out.scan.all_ok(), "r0 " + num(r0) + ", max kl " +
                                                                      num(*std::max_element(out.scan.kl.begin(), out.scan.kl.end()))});
    if (cfg.kl_control) {
        out.control = scanner.scan(r0, true);
        const double first = out.control->kl.front(), last = out.control->kl.back();
        const double growth = first > 0 ? last / first : INFINITY;
        bool monotone = true;
        for (std::size_t i = 1; i < out.control->kl.size(); ++i) monotone = monotone && out.control->kl[i] >= out.control->kl[i - 1];
        out.assertions.push_back({"control scan diverges", monotone && growth >= cfg.control_min_growth,
                                  "growth " + num(growth) + (monotone ? ", monotone" : ", not monotone") +
                                      ", required >= " + num(cfg.control_min_growth)});
    }
    return out;
}

bool ExperimentOutcome::passed() const {
    for (const auto& a : assertions)
        if (!a.passed) return false;
    return true;
}

std::string to_csv(const RateTable& t) {
    std::ostringstream os;
    os << "param,n,delta,used,failures,truth,mean,bias,sd,rmse\n";
    for (const auto& r : t.rows)
        os << r.param << "," << r.n << "," << num(r.delta) << "," << r.used << "," << r.failures << "," << num(r.truth)
           << "," << num(r.mean) << "," << num(r.bias) << "," << num(r.sd) << "," << num(r.rmse) << "\n";
    return os.str();
}

std::string to_csv(const CoverageTable& t) {
    std::ostringstream os;
    os << "param,n,used,failures,coverage,se\n";
    for (const auto& r : t.rows)
        os << r.param << "," << r.n << "," << r.used << "," << r.failures << "," << num(r.coverage) << "," << num(r.se)
           << "\n";
    return os.str();
}

std::string to_csv(const BiasTable& t) {
    std::ostringstream os;
    os << "n,used,failures,pilot_bias,pilot_se,debiased_bias,debiased_se\n";
    for (const auto& r : t.rows)
        os << r.n << "," << r.used << "," << r.failures << "," << num(r.pilot_bias) << "," << num(r.pilot_se) << ","
           << num(r.debiased_bias) << "," << num(r.debiased_se) << "\n";
    return os.str();
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentOutcome o;
    o.experiment = cfg.experiment;
    o.summary["config"] = config_to_json(cfg);
    switch (cfg.experiment) {
        case Experiment::rates: {
            const RateTable t = run_rates(cfg);
            o.csv = to_csv(t);
            auto arr = nlohmann::ordered_json::array();
            for (const auto& f : t.slopes)
                arr.push_back({{"param", f.param},
                               {"available", f.available},
                               {"slope", f.slope},
                               {"se", f.se},
                               {"target", f.target},
                               {"log_factor", f.log_factor}});
            o.summary["slopes"] = arr;
            o.summary["failures"] = t.failures;
            o.assertions = t.assertions;
            break;
        }
        case Experiment::coverage: {
            const CoverageTable t = run_coverage(cfg);
            o.csv = to_csv(t);
            auto arr = nlohmann::ordered_json::array();
            for (const auto& r : t.rows)
                arr.push_back({{"param", r.param},
                               {"n", r.n},
                               {"used", r.used},
                               {"failures", r.failures},
                               {"coverage", r.coverage},
                               {"se", r.se}});
            o.summary["coverage"] = arr;
            o.summary["failures"] = t.failures;
            o.assertions = t.assertions;
            break;
        }
        case Experiment::bias: {
            const BiasTable t = run_bias_comparison(cfg);
            o.csv = to_csv(t);
            auto arr = nlohmann::ordered_json::array();
            for (const auto& r : t.rows)
                arr.push_back({{"n", r.n},
                               {"used", r.used},
                               {"failures", r.failures},
                               {"pilot_bias", r.pilot_bias},
                               {"pilot_se", r.pilot_se},
                               {"debiased_bias", r.debiased_bias},
                               {"debiased_se", r.debiased_se}});
            o.summary["bias"] = arr;
            o.summary["failures"] = t.failures;
            o.assertions = t.assertions;
            break;
        }
        case Experiment::kl: {
            const KLExperiment k = run_kl(cfg);
            std::ostringstream os;
            write_kl_csv(k.scan, os);
            o.csv = os.str();
            o.summary["bisected"] = k.bisected;
            o.summary["scan"] = to_json(k.scan);
            if (k.control) o.summary["control"] = to_json(*k.control);
            o.assertions = k.assertions;
            break;
        }
    }
    o.summary["assertions"] = assertions_json(o.assertions);
    o.summary["passed"] = o.passed();
    return o;
}

void write_outcome(const ExperimentOutcome& o, const ExperimentConfig& cfg) {
    if (cfg.output.empty()) return;
    auto write = [](const std::string& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw DomainError("cannot write " + path);
        f << text;
    };
    write(cfg.output + ".csv", o.csv);
    write(cfg.output + ".json", o.summary.dump(2) + "\n");
    if (o.summary.contains("control")) {
        KLScanResult c;
        const auto& j = o.summary["control"];
        c.ns = j["ns"].get<std::vector<long>>();
        c.kl = j["kl"].get<std::vector<double>>();
        for (int b : j["bound_ok"].get<std::vector<int>>()) c.bound_ok.push_back(b != 0);
        std::ostringstream os;
        write_kl_csv(c, os);
        write(cfg.output + "_control.csv", os.str());
    }
}

}  // namespace msm
