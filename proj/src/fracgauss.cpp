#include "msm/fracgauss.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "msm/errors.hpp"

namespace msm {

namespace {

void check_hurst(double h) {
    if (!(h > 0 && h < 1)) throw DomainError("H must lie in (0,1), got " + std::to_string(h));
}

// (x + d)^a - x^a without cancellation for large x.
double pow_diff(double x, double d, double a) {
    if (x <= 0) return std::pow(d, a);
    return std::pow(x, a) * std::expm1(a * std::log1p(d / x));
}

struct Kahan {
    double sum = 0, c = 0;
    void add(double v) {
        const double y = v - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

constexpr double kQuadTol = 1e-12;

template <class F>
double tanh_sinh_checked(F f, double a, double b, double rel_target) {
    boost::math::quadrature::tanh_sinh<double> integ;
    double err = 0, l1 = 0;
    const double v = integ.integrate(f, a, b, kQuadTol, &err, &l1);
    if (err > rel_target * std::max(l1, 1e-300)) throw QuadratureError("tanh-sinh quadrature did not converge", err);
    return v;
}

template <class F>
double exp_sinh_checked(F f, double a, double rel_target) {
    boost::math::quadrature::exp_sinh<double> integ;
    double err = 0, l1 = 0;
    const double v = integ.integrate(f, a, std::numeric_limits<double>::infinity(), kQuadTol, &err, &l1);
    if (err > rel_target * std::max(l1, 1e-300)) throw QuadratureError("exp-sinh quadrature did not converge", err);
    return v;
}

// int_0^inf ((t+1)^{H-1/2} - t^{H-1/2})^2 dt. The tail decays like t^{2H-3} and is slow for H near 1,
// so its leading term a^2 (t+1/2)^{2a-2} is integrated in closed form.
double kernel_tail_integral(double h) {
    const double a = h - 0.5;
    auto f = [a](double t) {
        const double d = pow_diff(t, 1.0, a);
        return d * d;
    };
    auto lead = [a](double t) { return a * a * std::pow(t + 0.5, 2 * a - 2); };
    const double head = tanh_sinh_checked(f, 0.0, 1.0, 1e-10);
    const double tail = exp_sinh_checked([&](double t) { return f(t) - lead(t); }, 1.0, 1e-9);
    return head + tail + a * a * std::pow(1.5, 2 * a - 1) / (1 - 2 * a);
}

}  // namespace

double k_h(double h) {
    check_hurst(h);
    return std::tgamma(h + 0.5) / std::sqrt(2 * h * std::sin(std::numbers::pi * h) * std::tgamma(2 * h));
}

double k_h_integral(double h) {
    check_hurst(h);
    return std::sqrt(1.0 / (2 * h) + kernel_tail_integral(h));
}

double gamma_h(double h, long r) {
    check_hurst(h);
    if (r < 0) r = -r;
    if (r == 0) return 1.0;
    const double x = 1.0 / static_cast<double>(r);
    const double a = 2 * h;
    return 0.5 * std::pow(static_cast<double>(r), a) * (std::expm1(a * std::log1p(x)) + std::expm1(a * std::log1p(-x)));
}

double phi0(double h) { return 2.0 / (k_h(h) * (h + 0.5)); }

double phi_h(double h, long r) { return phi0(h) * gamma_h(hbar(h), r); }

double rho_hr(double h, long r, long k) {
    check_hurst(h);
    if (r < 1 || k < 1) throw DomainError("rho_{H,r}(k) needs r >= 1 and k >= 1");
    const double a = 2 * h;
    return std::pow(double(k + r), a) - 2 * std::pow(double(k), a) + std::pow(std::abs(double(k - r)), a);
}

Eigen::VectorXd gamma_vec(double h, long len) {
    Eigen::VectorXd v(len);
    for (long i = 0; i < len; ++i) v[i] = gamma_h(h, i);
    return v;
}

Eigen::VectorXd phi_vec(double h, long len) { return phi0(h) * gamma_vec(hbar(h), len); }

Eigen::VectorXd weight_a(long r, long len) {
    if (r < 1) throw DomainError("a_r needs r >= 1, got " + std::to_string(r));
    if (len == 0) len = r;
    if (len < r) throw DomainError("weight vector longer than requested length");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(len);
    if (r == 1) {
        v[0] = 1;
        return v;
    }
    v[0] = double(r);
    for (long j = 1; j < r; ++j) v[j] = 2.0 * double(r - j);
    return v;
}

Eigen::VectorXd weight_a_prime(long r, long len) {
    if (r < 2 || r % 2 != 0) throw DomainError("a'_r needs an even r, got " + std::to_string(r));
    if (len == 0) len = r;
    return weight_a(r, len) - 2.0 * weight_a(r / 2, len);
}

int n_of_h(double h) {
    check_hurst(h);
    if (h == 0.5) throw DomainError("N(H) is undefined at H = 1/2");
    return static_cast<int>(std::floor(1.0 / std::abs(2 * h - 1)));
}

bool n_of_h_boundary(double h, double tol) {
    const double x = 1.0 / std::abs(2 * h - 1);
    return std::abs(x - std::round(x)) < tol;
}

KernelTable kernel_table(double h, long lags, long k_max) {
    if (lags < 1) throw DomainError("lag count must be positive");
    KernelTable t;
    t.h = h;
    t.lags = lags;
    t.gamma = gamma_vec(h, lags);
    t.phi = phi_vec(h, lags);
    t.k_h = k_h(h);
    t.series_cutoff = k_max;
    return t;
}

nlohmann::ordered_json to_json(const KernelTable& t) {
    nlohmann::ordered_json j;
    j["h"] = t.h;
    j["lags"] = t.lags;
    j["k_h"] = t.k_h;
    j["series_cutoff"] = t.series_cutoff;
    j["gamma"] = std::vector<double>(t.gamma.data(), t.gamma.data() + t.gamma.size());
    j["phi"] = std::vector<double>(t.phi.data(), t.phi.data() + t.phi.size());
    return j;
}

LagCovMatrix lag_cov_matrix(double h, long r, long k_max) {
    check_hurst(h);
    if (!(h < 0.5)) throw RegimeError("the lag covariance matrix is defined for H < 1/2");
    if (k_max < 1 || r < 1) throw DomainError("lag_cov_matrix needs r >= 1 and k_max >= 1");
    const Eigen::VectorXd g = gamma_vec(h, k_max + 2 * r + 2);
    auto G = [&g](long i) { return g[i < 0 ? -i : i]; };

    LagCovMatrix out;
    out.h = h;
    out.series_cutoff = k_max;
    out.entries.resize(r, r);
    out.compact.resize(r, r);
    for (long i = 0; i < r; ++i) {
        for (long j = i; j < r; ++j) {
            Kahan s, c;
            for (long k = 1; k <= k_max; ++k) {
                s.add(G(k) * G(i - j + k) + G(k - j) * G(i + k) + G(k) * G(j - i + k) + G(k - i) * G(j + k));
                c.add((G(k + i) + G(k - i)) * (G(k + j) + G(k - j)));
            }
            out.entries(i, j) = out.entries(j, i) = G(i - j) + G(i) * G(j) + s.sum;
            out.compact(i, j) = out.compact(j, i) = 2 * G(i) * G(j) + c.sum;
        }
    }
    // |Gamma_k| <= H|2H-1| (k-1)^{2H-2}; the neglected terms are products of two such factors
    // with indices shifted by at most r.
    const double cst = h * std::abs(2 * h - 1);
    const double kk = std::max(1.0, double(k_max - r - 1));
    out.tail_bound = 8 * cst * cst * std::pow(kk, 4 * h - 3) / (3 - 4 * h);
    return out;
}

Eigen::MatrixXd fgn_toeplitz(double h, long n) {
    if (n < 1) throw DomainError("matrix size must be positive");
    const Eigen::VectorXd g = gamma_vec(h, n);
    Eigen::MatrixXd m(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) m(i, j) = g[std::abs(i - j)];
    return m;
}

double spectral_density(double h, double lambda, long k_terms) {
    check_hurst(h);
    if (!(std::abs(lambda) <= std::numbers::pi)) throw DomainError("lambda must lie in [-pi, pi]");
    if (k_terms < 1) throw DomainError("k_terms must be positive");
    const double s = 2 * h + 1;
    const double two_pi = 2 * std::numbers::pi;
    const double pre = std::tgamma(2 * h + 1) * std::sin(std::numbers::pi * h) / std::numbers::pi;
    const double lam = std::abs(lambda);
    if (lam == 0) return h > 0.5 ? std::numeric_limits<double>::infinity() : (h == 0.5 ? pre / 2 : 0.0);
    Kahan sum;
    for (long k = k_terms; k >= 1; --k) {
        sum.add(std::pow(two_pi * k + lam, -s));
        sum.add(std::pow(two_pi * k - lam, -s));
    }
    sum.add(std::pow(lam, -s));
    // midpoint-rule remainder of both truncated tails
    const double x = two_pi * (k_terms + 0.5);
    sum.add((std::pow(x + lam, 1 - s) + std::pow(x - lam, 1 - s)) / (two_pi * (s - 1)));
    return pre * (1 - std::cos(lam)) * sum.sum;
}

Eigen::VectorXd increment_acov(const ModelTheta& theta, long n, double delta) {
    theta.validate();
    if (!(delta > 0)) throw DomainError("step must be positive");
    if (n < 1) throw DomainError("length must be positive");
    const double h = theta.h, hb = hbar(h);
    const double cp = theta.pi_total * std::pow(delta, 2 * h);
    const double cl = theta.lambda_cov * b_coef(h) * std::pow(delta, 2 * hb);
    Eigen::VectorXd g(n);
    for (long k = 0; k < n; ++k) g[k] = cp * gamma_h(h, k) + cl * gamma_h(hb, k);
    g[0] += theta.sigma_sq * delta;
    return g;
}

Eigen::MatrixXd mixed_cov(const ModelTheta& theta, long n, double delta) {
    const Eigen::VectorXd g = increment_acov(theta, n, delta);
    Eigen::MatrixXd m(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) m(i, j) = g[std::abs(i - j)];
    return m;
}

Eigen::MatrixXd mixed_cov(const ModelTheta& theta, long n) { return mixed_cov(theta, n, 1.0 / double(n)); }

double g_increment_inner(double h, long k, long l) {
    check_hurst(h);
    if (!(k < l) || k < 1) throw DomainError("g_increment_inner needs 1 <= k < l");
    const double a = h - 0.5;
    const double kinv = 1.0 / k_h(h);
    const double d = double(l - k);
    auto g = [a](double u) { return u > 0 ? std::pow(u, a) : 0.0; };
    // cell (k-1, k], written in u = k - s in [0, 1); for adjacent cells the second product is u^{2a},
    // too singular near 0 for the quadrature when H is small, and integrates to 1/(2a+1)
    auto near_hi = [&](double u) { return g(u) * g(u + d); };
    auto near_lo = [&](double u) { return g(u) * g(u + d - 1); };
    const double near = tanh_sinh_checked(near_hi, 0.0, 1.0, 1e-10) -
                        (d == 1 ? 1 / (2 * a + 1) : tanh_sinh_checked(near_lo, 0.0, 1.0, 1e-10));
    // s < k - 1, written in u = k - 1 - s > 0
    auto far = [&](double u) { return pow_diff(u, 1.0, a) * pow_diff(u + d, 1.0, a); };
    const double v = near + tanh_sinh_checked(far, 0.0, 1.0, 1e-9) + exp_sinh_checked(far, 1.0, 1e-9);
    return kinv * kinv * v;
}

double g_increment_sq(double h, long k) {
    check_hurst(h);
    if (k < 1) throw DomainError("g_increment_sq needs k >= 1");
    const double a = h - 0.5;
    const double kinv = 1.0 / k_h(h);
    double v = 1 / (2 * a + 1);  // last cell: int_0^1 u^{2a} du
    if (k > 1) {
        auto body = [a](double u) {
            const double d = pow_diff(u, 1.0, a);
            return d * d;
        };
        v += tanh_sinh_checked(body, 0.0, double(k - 1), 1e-9);
    }
    return kinv * kinv * v;
}

double g_increment_first_cell(double h, long r) {
    check_hurst(h);
    if (r < 0) throw DomainError("g_increment_first_cell needs r >= 0");
    const double a = h - 0.5;
    const double kinv = 1.0 / k_h(h);
    auto f = [a, r](double s) {
        const double u = double(r) - s;  // (r+1-s) - 1
        return u > 0 ? pow_diff(u, 1.0, a) : std::pow(u + 1, a);
    };
    return kinv * tanh_sinh_checked(f, 0.0, 1.0, 1e-9);
}

}  // namespace msm
