#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include "msm/model.hpp"

namespace msm {

inline constexpr long kDefaultKMax = 10000;
inline constexpr long kDefaultSpectralTerms = 1000;

double k_h(double h);
// Quadrature evaluation of sqrt(1/(2H) + int_1^inf (r^{H-1/2} - (r-1)^{H-1/2})^2 dr).
double k_h_integral(double h);

double gamma_h(double h, long r);
double phi0(double h);
double phi_h(double h, long r);
double rho_hr(double h, long r, long k);

Eigen::VectorXd gamma_vec(double h, long len);
Eigen::VectorXd phi_vec(double h, long len);

// a_r = (r, 2(r-1), ..., 2), a_1 = (1); zero padded to len (len = 0 keeps the natural length).
Eigen::VectorXd weight_a(long r, long len = 0);
// a'_r = a_r - 2 a_{r/2}, r even.
Eigen::VectorXd weight_a_prime(long r, long len = 0);

// floor(1/|2H-1|)
int n_of_h(double h);
// True when 1/|2H-1| sits within tol of an integer.
bool n_of_h_boundary(double h, double tol = 1e-9);

struct KernelTable {
    double h = 0;
    long lags = 0;
    Eigen::VectorXd gamma;
    Eigen::VectorXd phi;
    double k_h = 0;
    long series_cutoff = kDefaultKMax;
};

KernelTable kernel_table(double h, long lags, long k_max = kDefaultKMax);
nlohmann::ordered_json to_json(const KernelTable& t);

struct LagCovMatrix {
    Eigen::MatrixXd entries;
    Eigen::MatrixXd compact;
    double h = 0;
    long series_cutoff = 0;
    double tail_bound = 0;
};

LagCovMatrix lag_cov_matrix(double h, long r, long k_max = kDefaultKMax);

Eigen::MatrixXd fgn_toeplitz(double h, long n);

// f_H(lambda); +infinity at lambda = 0 when H > 1/2.
double spectral_density(double h, double lambda, long k_terms = kDefaultSpectralTerms);

// First row of the stationary covariance of the increments of step delta.
Eigen::VectorXd increment_acov(const ModelTheta& theta, long n, double delta);
// Unit horizon: delta = 1/n.
Eigen::MatrixXd mixed_cov(const ModelTheta& theta, long n);
Eigen::MatrixXd mixed_cov(const ModelTheta& theta, long n, double delta);

// int Delta_k g(t) Delta_l g(t) dt over the real line for the power kernel, unit step, k < l.
double g_increment_inner(double h, long k, long l);
// int_0^k (Delta_k g)^2 for the kernel started at 0 (unit step).
double g_increment_sq(double h, long k);
// int_0^1 Delta_{r+1} g(s) ds (unit step).
double g_increment_first_cell(double h, long r);

}  // namespace msm
