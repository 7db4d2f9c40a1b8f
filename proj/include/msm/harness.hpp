#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msm/estimate.hpp"
#include "msm/lowerbound.hpp"
#include "msm/model.hpp"
#include "msm/simulate.hpp"

namespace msm {

enum class Experiment { rates, coverage, bias, kl };

Experiment parse_experiment(const std::string& s);
std::string to_string(Experiment e);

struct RateAssertion {
    std::string param;
    double tol = 0.1;
};

struct CoverageAssertion {
    std::string param = "h";
    long n = 0;  // 0 means the largest n of the grid
    double lo = 0.90, hi = 0.985;
};

struct ExperimentConfig {
    Experiment experiment = Experiment::rates;
    std::optional<ModelTheta> theta;
    std::optional<StochVolSpec> stochvol;
    std::vector<long> n_grid;
    long replications = 100;
    std::uint64_t seed = 1;
    std::string output;  // path prefix; ".csv" and ".json" are appended
    double level = 0.95;
    std::string regime = "truth";  // truth | auto | rough | smooth
    SimMethod method = SimMethod::circulant;
    unsigned threads = 0;          // 0: hardware concurrency
    double max_failure_rate = 0.05;
    EstimateOptions est;
    std::vector<std::string> params{"h", "c", "lambda", "pi"};

    std::vector<RateAssertion> rate_asserts;
    std::vector<CoverageAssertion> coverage_asserts;
    bool coverage_trend = false;
    bool bias_assert = false;
    double pilot_bias_min_se = 5;  // pilot bias must exceed this many MC SE
    // kl
    std::optional<double> r0;  // fixed r0; bisected when absent
    double r0_hi = 1.0;
    double r0_rel_tol = 1e-2;
    bool kl_control = false;
    double control_min_growth = 10;

    void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// The quantity each estimator converges to: H, sigma^2, Lambda b(H)/Phi_0(H), Pi for the
// constant-coefficient model; the path integrals for stochastic coefficients.
struct Truth {
    double h = 0, c = 0, lambda = 0, pi = 0;
    double get(const std::string& param) const;
};
Truth truth_of(const ModelTheta& theta);

struct Replication {
    bool ok = false;
    std::string error;
    EstimateReport report;
    Truth truth;
};

// Replication i at grid index k uses substream_seed(substream_seed(seed, k), i).
std::uint64_t replication_seed(std::uint64_t base, std::size_t grid_index, long replication);

std::vector<Replication> run_replications(const ExperimentConfig& cfg, std::size_t grid_index);

struct Assertion {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct RateRow {
    std::string param;
    long n = 0;
    double delta = 0;
    long used = 0;
    long failures = 0;
    double truth = 0;  // mean truth (varies per replication under stochastic coefficients)
    double mean = 0, bias = 0, sd = 0, rmse = 0;
};

struct SlopeFit {
    std::string param;
    double slope = 0, se = 0;
    double target = 0;
    bool log_factor = false;
    bool available = false;
};

struct RateTable {
    std::vector<RateRow> rows;
    std::vector<SlopeFit> slopes;
    std::vector<long> failures;  // per n
    std::vector<Assertion> assertions;
};

struct CoverageRow {
    std::string param;
    long n = 0;
    long used = 0;
    long failures = 0;
    double coverage = 0, se = 0;
};

struct CoverageTable {
    std::vector<CoverageRow> rows;
    std::vector<long> failures;
    std::vector<Assertion> assertions;
};

struct BiasRow {
    long n = 0;
    long used = 0;
    long failures = 0;
    double pilot_bias = 0, pilot_se = 0;
    double debiased_bias = 0, debiased_se = 0;
};

struct BiasTable {
    std::vector<BiasRow> rows;
    std::vector<long> failures;
    std::vector<Assertion> assertions;
};

struct KLExperiment {
    KLScanResult scan;
    std::optional<KLScanResult> control;
    bool bisected = false;
    std::vector<Assertion> assertions;
};

// Target convergence exponent in Delta and whether it carries a |log Delta| factor; nullopt
// when the parameter is not identifiable at this H.
std::optional<std::pair<double, bool>> rate_target(const std::string& param, double h);

// Ordinary least squares of y on x: slope and its standard error.
std::pair<double, double> ols_slope(const std::vector<double>& x, const std::vector<double>& y);

// Pairwise summation, independent of thread scheduling.
double pairwise_sum(const double* x, std::size_t n);

RateTable run_rates(const ExperimentConfig& cfg);
CoverageTable run_coverage(const ExperimentConfig& cfg);
BiasTable run_bias_comparison(const ExperimentConfig& cfg);
KLExperiment run_kl(const ExperimentConfig& cfg);

struct ExperimentOutcome {
    Experiment experiment = Experiment::rates;
    std::string csv;
    nlohmann::ordered_json summary;
    std::vector<Assertion> assertions;
    bool passed() const;
};

std::string to_csv(const RateTable& t);
std::string to_csv(const CoverageTable& t);
std::string to_csv(const BiasTable& t);

ExperimentOutcome run_experiment(const ExperimentConfig& cfg);
// Writes <output>.csv and <output>.json (and <output>_control.csv for a KL control scan).
void write_outcome(const ExperimentOutcome& o, const ExperimentConfig& cfg);

}  // namespace msm
