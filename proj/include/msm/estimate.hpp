#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "msm/fracgauss.hpp"
#include "msm/simulate.hpp"

namespace msm {

enum class Regime { rough, smooth };

std::string to_string(Regime r);
Regime parse_regime(const std::string& s);

struct LaggedQV {
    Eigen::VectorXd raw;  // raw[j] = sum_{i=1}^{n-j} X_i X_{i+j}
    double delta = 0;
    double t_end = 0;
    long r = 0;

    // Delta^{1-2H} raw, the normalization of the rough regime.
    Eigen::VectorXd normalized(double h) const;
};

LaggedQV lagged_qv(const Eigen::VectorXd& increments, double delta, long r);
LaggedQV lagged_qv(const IncrementSeries& series, long r);

// Ratio of weighted inner products turned into an H estimate; works on raw or normalized V.
double pilot_h(const Eigen::VectorXd& v, long r, Regime regime);
double pilot_h(const LaggedQV& qv, long r, Regime regime);

struct ACoeffs {
    int k = 0;
    Regime regime = Regime::rough;
    Eigen::VectorXd closed;     // closed[l] = A_{k,l}(x_1..x_{l+1}) from the multinomial sum
    Eigen::VectorXd recursive;  // same from the recursion
};

double a_coeff_closed(int k, int l, const std::vector<double>& x, Regime regime);
double a_coeff_recursive(int k, int l, const std::vector<double>& x, Regime regime);
ACoeffs a_coeffs(int k, const std::vector<double>& x, Regime regime);
// sum_l (-1)^l A_{k,l}(h, ..., h)
double a_alternating_sum(int k, double h, Regime regime);

struct EstimateOptions {
    long pilot_r = 4;
    int n_cap = 4;
    double eps = 0.01;     // pilot and final clamp distance from the regime boundary
    double margin = 0.01;  // identifiability margin around 1/4 and 3/4
    long v_lag = 1;        // filter v = e_{v_lag + 1}
    long w_lag = 2;        // filter w = e_{w_lag + 1}
    long k_max = kDefaultKMax;
};

// Dyadic ladder base: 2^{N+1} for rough, 2^{N+2} for smooth.
long ladder_base(int n, Regime regime);
// Lags needed by estimate_h under the options (ladder at the cap and the pilot).
long required_lags(const EstimateOptions& opts, Regime regime);

struct HEstimate {
    double h_hat = 0;
    double h_pilot = 0;
    double h_bar = 0;  // clamped pilot
    int n_used = 0;
    long r = 0;
    std::vector<double> ladder;
    double ratio = 0;
    bool pilot_clamped = false;
    bool h_clamped = false;
    bool cap_binding = false;
    bool n_boundary = false;
};

HEstimate estimate_h(const Eigen::VectorXd& v, Regime regime, const EstimateOptions& opts = {});
HEstimate estimate_h(const LaggedQV& qv, Regime regime, const EstimateOptions& opts = {});

// Weight vector u_{r,H} (rough) or the unnormalized u'_{r,H} (smooth) of the debiased ladder.
Eigen::VectorXd ladder_vector(double h, int n, long r, Regime regime, long len = 0);

// u^T C u for the lag covariance matrix C at H < 1/2, via the outer-product form.
double lag_cov_quad(double h, const Eigen::VectorXd& u, long k_max = kDefaultKMax);

struct VarHResult {
    double series = 0;
    double quadratic = 0;
    double tolerance = 0;
};

// Rough: both representations of Var_H; throws ConsistencyError if they disagree beyond tolerance.
VarHResult var_h_both(double h, long k_max = kDefaultKMax, int n = -1);
double var_h(double h, long k_max = kDefaultKMax, int n = -1);
double var_h_prime(double h, int n = -1);

struct Filters {
    Eigen::VectorXd theta_bar;
    Eigen::VectorXd vartheta_bar;
};

Filters filters(double h, long len, long v_lag = 1, long w_lag = 2);

struct UVectors {
    Regime regime = Regime::rough;
    int n = 0;
    long r = 0;
    double a_sum = 0;
    double d = 0;             // derivative constant 2^{1+2H} log2 * sum (rough), 2^{H+1/2} log2 * sum (smooth)
    Eigen::VectorXd u;        // ladder vector
    Eigen::VectorXd u_tilde;  // ladder vector over the inner product of its base weight with the kernel
    Eigen::VectorXd u_pi, u_lambda, u_c;
    Eigen::VectorXd theta_bar, vartheta_bar;
};

UVectors u_vectors(double h, Regime regime, int n = -1, const EstimateOptions& opts = {});

struct Integrals {
    double c_hat = 0, lambda_hat = 0, pi_hat = 0;
    bool c_identifiable = true, lambda_identifiable = true, pi_identifiable = true;
};

Integrals estimate_integrals(const LaggedQV& qv, double h_hat, Regime regime, const EstimateOptions& opts = {});

// Fourth-power sum with the Gaussian factor 3 removed.
double quarticity(const Eigen::VectorXd& increments, double delta, double h_hat, Regime regime);
double quarticity(const IncrementSeries& series, double h_hat, Regime regime);

struct ParamEstimate {
    double value = 0;
    bool identifiable = true;
    double sd = 0;
    double lo = 0, hi = 0;
};

struct Diagnostics {
    std::string regime_source;
    double auto_statistic = 0;
    int n_used = 0;
    long r = 0;
    bool pilot_clamped = false;
    bool h_clamped = false;
    bool cap_binding = false;
    bool n_boundary = false;
    std::vector<double> ladder;
    std::vector<std::string> notes;
};

struct EstimateReport {
    Regime regime = Regime::rough;
    long n = 0;
    double delta = 0;
    double t_end = 0;
    double level = 0.95;
    double h_pilot = 0;
    ParamEstimate h, c, lambda, pi;
    double quarticity = 0;
    Diagnostics diagnostics;
};

struct ReportOptions {
    std::string regime = "auto";  // rough | smooth | auto
    double level = 0.95;
    EstimateOptions est;
};

// log2 V0(2 Delta) - log2 V0(Delta): negative for rough paths, positive for smooth ones.
double regime_statistic(const Eigen::VectorXd& increments);
Regime auto_regime(const Eigen::VectorXd& increments);

// Fills sd/lo/hi of every identifiable parameter from the plug-in asymptotic variances.
void confidence_intervals(EstimateReport& report, const EstimateOptions& opts = {});

EstimateReport full_report(const IncrementSeries& series, const ReportOptions& opts = {});

nlohmann::ordered_json to_json(const EstimateReport& r);
std::string to_table(const EstimateReport& r);

}  // namespace msm
