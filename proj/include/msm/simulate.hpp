#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "msm/model.hpp"
#include "msm/rng.hpp"

namespace msm {

enum class SimMethod { cholesky, circulant };

SimMethod parse_method(const std::string& s);
std::string to_string(SimMethod m);

struct SeriesMeta {
    std::uint64_t seed = 0;
    std::string method;
    nlohmann::ordered_json model;
};

struct IncrementSeries {
    Eigen::VectorXd increments;
    double delta = 0;
    double t_end = 0;
    SeriesMeta meta;

    long n() const { return static_cast<long>(increments.size()); }
    void validate() const;
};

inline constexpr long kCholeskyMaxN = 1L << 13;

// Exact sampler of a stationary Gaussian sequence given its autocovariance function.
class StationarySampler {
public:
    StationarySampler(std::function<double(long)> acov, long n, SimMethod method);

    Eigen::VectorXd draw(Rng& rng) const;
    long n() const { return n_; }
    SimMethod method_used() const { return used_; }
    bool fell_back() const { return fell_back_; }
    long embedding_size() const { return m_; }
    double min_embedding_eigenvalue() const { return min_eig_; }

private:
    long n_ = 0;
    long m_ = 0;
    SimMethod used_ = SimMethod::circulant;
    bool fell_back_ = false;
    double min_eig_ = 0;
    Eigen::VectorXd sqrt_eig_;
    Eigen::MatrixXd chol_;
};

class MfbmSampler {
public:
    MfbmSampler(const ModelTheta& theta, long n, double delta, SimMethod method = SimMethod::circulant);
    IncrementSeries sample(std::uint64_t seed) const;
    const StationarySampler& core() const { return core_; }

private:
    ModelTheta theta_;
    double delta_;
    StationarySampler core_;
};

IncrementSeries sample_mfbm(const ModelTheta& theta, long n, double delta, std::uint64_t seed,
                            SimMethod method = SimMethod::circulant);

IncrementSeries sample_three_process(const ModelTheta& theta, long n, double delta, std::uint64_t seed);

// sigma^2 h + Pi h^{2H} + Lambda b(H) h^{2 Hbar}
double increment_variance(const ModelTheta& theta, double h);

struct ProcessSpec {
    enum class Kind { constant, ou } kind = Kind::constant;
    double x0 = 0;     // constant value, or OU start
    double mean = 0;   // OU long-run level
    double kappa = 0;  // OU mean reversion
    double vol = 0;    // OU volatility

    static ProcessSpec constant(double v) { return {Kind::constant, v, v, 0, 0}; }
    static ProcessSpec ou(double x0, double mean, double kappa, double vol) { return {Kind::ou, x0, mean, kappa, vol}; }
    void validate() const;
};

struct StochVolSpec {
    double h = 0.3;
    ProcessSpec drift = ProcessSpec::constant(0);
    ProcessSpec sigma_proc = ProcessSpec::constant(1);
    ProcessSpec rho_proc = ProcessSpec::constant(0);
    ProcessSpec rho_prime_proc = ProcessSpec::constant(0);
    int oversample = 8;
    void validate() const;
};

// Integrated quantities along the simulated volatility paths (left-point sums on the fine grid).
struct SvTruth {
    double c_t = 0;          // int sigma^2
    double lambda_t = 0;     // int sigma rho
    double pi_t = 0;         // int rho^2 + rho'^2
    double sigma4_t = 0;     // int sigma^4
    double pi2_t = 0;        // int (rho^2 + rho'^2)^2
};

struct SvSample {
    IncrementSeries series;
    SvTruth truth;
};

// Kernel weights of the fine cells at distance 1..count: root-mean-square weight for the
// cell touching the singularity, cell-mean weight for the others.
Eigen::VectorXd hybrid_weights(double h, long count, double dt);

SvSample sample_mixed_sm(const StochVolSpec& spec, long n, double delta, std::uint64_t seed);

// Exact variance of the simulator's increment i (1-based) for constant coefficients.
double hybrid_increment_variance(double h, double sigma, double rho, double rho_prime, long i, double delta,
                                 int oversample);

// Exact variance of increment i (1-based) of the Riemann-Liouville model started at 0.
double rl_increment_variance(double h, double sigma, double rho, double rho_prime, long i, double delta);

// Serialization
void write_series_csv(const IncrementSeries& s, std::ostream& os);
void write_series_csv(const IncrementSeries& s, const std::string& path);
IncrementSeries read_series_csv(std::istream& is);
void write_series_binary(const IncrementSeries& s, std::ostream& os);
IncrementSeries read_series_binary(std::istream& is);
// Detects the format from the magic bytes.
IncrementSeries read_series(const std::string& path);
void write_series(const IncrementSeries& s, const std::string& path);

}  // namespace msm
