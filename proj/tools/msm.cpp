#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "msm/errors.hpp"
#include "msm/estimate.hpp"
#include "msm/fracgauss.hpp"
#include "msm/harness.hpp"
#include "msm/simulate.hpp"

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;
constexpr int kExitAssertion = 3;

msm::ModelTheta parse_theta(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            v.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--theta", "cannot parse '" + item + "'");
        }
    }
    if (v.size() != 4) throw CLI::ValidationError("--theta", "expects H,sigma2,Lambda,Pi");
    msm::ModelTheta t{v[0], v[1], v[2], v[3]};
    t.validate();
    return t;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw msm::DomainError("cannot write " + path);
    f << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and estimation for mixed fractional Brownian motion"};
    app.require_subcommand(1);

    std::string theta_s, method_s = "circulant", out;
    long n = 1024;
    double delta = 0;
    std::uint64_t seed = 1;
    auto* sim = app.add_subcommand("simulate", "simulate an increment series");
    sim->add_option("--theta", theta_s, "H,sigma2,Lambda,Pi")->required();
    sim->add_option("--n", n, "number of increments")->check(CLI::Range(2L, 1L << 26));
    sim->add_option("--delta", delta, "step (default 1/n)");
    sim->add_option("--seed", seed);
    sim->add_option("--method", method_s)->check(CLI::IsMember({"circulant", "cholesky"}));
    sim->add_option("--out", out, "output path (.bin for the binary frame, CSV otherwise)");

    std::string in, regime = "auto", format = "json";
    double level = 0.95;
    auto* est = app.add_subcommand("estimate", "estimate H, C, Lambda, Pi with confidence intervals");
    est->add_option("--in", in)->required();
    est->add_option("--regime", regime)->check(CLI::IsMember({"auto", "rough", "smooth"}));
    est->add_option("--level", level)->check(CLI::Range(0.0, 1.0));
    est->add_option("--out", out, "report path (stdout when absent)");
    est->add_option("--format", format)->check(CLI::IsMember({"json", "table"}));

    std::string config;
    std::vector<CLI::App*> experiments;
    for (const char* name : {"rates", "coverage", "bias", "kl"}) {
        auto* sc = app.add_subcommand(name, std::string("run the ") + name + " experiment");
        sc->add_option("--config", config)->required();
        experiments.push_back(sc);
    }

    double h = 0.3;
    long lags = 16;
    auto* ker = app.add_subcommand("kernels", "dump Gamma, Phi and rho kernels");
    ker->set_help_flag("--help", "print this help message and exit");
    ker->add_option("--h", h)->required();
    ker->add_option("--lags", lags)->check(CLI::Range(1L, 1L << 20));
    ker->add_option("--out", out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*sim) {
            const msm::ModelTheta theta = parse_theta(theta_s);
            const double d = delta > 0 ? delta : 1.0 / double(n);
            const auto s = msm::sample_mfbm(theta, n, d, seed, msm::parse_method(method_s));
            if (out.empty()) {
                msm::write_series_csv(s, std::cout);
            } else {
                msm::write_series(s, out);
            }
        } else if (*est) {
            const auto s = msm::read_series(in);
            msm::ReportOptions o;
            o.regime = regime;
            o.level = level;
            const auto rep = msm::full_report(s, o);
            emit(out, format == "json" ? msm::to_json(rep).dump(2) + "\n" : msm::to_table(rep));
        } else if (*ker) {
            emit(out, msm::to_json(msm::kernel_table(h, lags)).dump(2) + "\n");
        } else {
            for (auto* sc : experiments) {
                if (!*sc) continue;
                const auto cfg = msm::load_config(config);
                if (cfg.experiment != msm::parse_experiment(sc->get_name()))
                    throw msm::DomainError("config describes a " + msm::to_string(cfg.experiment) + " experiment");
                const auto o = msm::run_experiment(cfg);
                msm::write_outcome(o, cfg);
                if (cfg.output.empty()) std::cout << o.csv;
                for (const auto& a : o.assertions)
                    std::cerr << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << a.detail << "\n";
                return o.passed() ? 0 : kExitAssertion;
            }
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return 0;
}
