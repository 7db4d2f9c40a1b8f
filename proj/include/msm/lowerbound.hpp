#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msm/model.hpp"

namespace msm {

// 0.5 {tr(S0^-1 S1) - n + log det S0 - log det S1} through Cholesky factors.
double kl_gaussian(const Eigen::MatrixXd& sigma1, const Eigen::MatrixXd& sigma0);

// Lower Cholesky factor; throws NotPositiveDefinite with the first failing pivot.
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a);

struct RateExponents {
    // nullopt means the perturbation component is identically zero
    std::array<std::optional<double>, 4> alpha;
    bool boundary = false;  // H sits on 1/4 or 3/4 and borrowed the adjacent column
};

RateExponents rate_exponents(double h);

struct PerturbationPath {
    ModelTheta theta0;
    double r0 = 0;
    RateExponents rates;
    bool constant_r1 = false;
    std::map<long, ModelTheta> thetas;
};

// theta_n along the perturbation path; constant_r1 replaces r_{1,n} by r0 (control scan).
ModelTheta perturbed_theta(const ModelTheta& theta0, long n, double r0, bool constant_r1 = false);
PerturbationPath perturbation_path(const ModelTheta& theta0, const std::vector<long>& ns, double r0,
                                   bool constant_r1 = false);

inline constexpr long kKLMaxN = 1L << 11;
inline constexpr double kKLBound = 1.0 / 9.0;

struct KLScanResult {
    ModelTheta theta0;
    double r0 = 0;
    bool constant_r1 = false;
    bool boundary = false;
    std::vector<long> ns;
    std::vector<double> kl;
    std::vector<bool> bound_ok;

    bool all_ok() const;
};

// Caches the baseline factors so repeated scans (bisection) only factor the perturbed side.
class KLScanner {
public:
    KLScanner(const ModelTheta& theta0, std::vector<long> ns);

    KLScanResult scan(double r0, bool constant_r1 = false) const;
    // Largest r0 in [0, hi] (to relative tolerance) with every n within the bound.
    double bisect_r0(double hi = 1.0, double rel_tol = 1e-2, bool constant_r1 = false) const;

private:
    bool all_within(double r0, bool constant_r1) const;
    double kl_at(std::size_t idx, const ModelTheta& theta) const;

    ModelTheta theta0_;
    std::vector<long> ns_;
    std::vector<Eigen::MatrixXd> chol0_;
    std::vector<double> logdet0_;
};

KLScanResult kl_scan(const ModelTheta& theta0, const std::vector<long>& ns, double r0, bool constant_r1 = false);
double bisect_r0(const ModelTheta& theta0, const std::vector<long>& ns, double hi = 1.0, double rel_tol = 1e-2);

void write_kl_csv(const KLScanResult& r, std::ostream& os);
KLScanResult read_kl_csv(std::istream& is);
nlohmann::ordered_json to_json(const KLScanResult& r);

}  // namespace msm
