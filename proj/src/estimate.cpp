#include "msm/estimate.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "msm/errors.hpp"

namespace msm {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kDerivStep = 1e-5;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

double ipow2(int e) { return std::ldexp(1.0, e); }

void check_regime(double h, Regime regime) {
    if (!(h > 0 && h < 1)) throw DomainError("H must lie in (0,1)");
    if (regime == Regime::rough && !(h < 0.5)) throw RegimeError("rough regime needs H < 1/2");
    if (regime == Regime::smooth && !(h > 0.5)) throw RegimeError("smooth regime needs H > 1/2");
}

// q(x) of the ladder: 2^{2x} (rough) or 2^{x+1/2} (smooth)
double ladder_base_power(double x, Regime regime) {
    return regime == Regime::rough ? std::exp2(2 * x) : std::exp2(x + 0.5);
}

Eigen::VectorXd base_weight(long r, long len, Regime regime) {
    return regime == Regime::rough ? weight_a(r, len) : weight_a_prime(r, len);
}

double ratio_to_h(double ratio, Regime regime) {
    return regime == Regime::rough ? 0.5 * std::log2(ratio) : -0.5 + std::log2(ratio);
}

std::pair<double, double> regime_interval(Regime regime, double eps) {
    return regime == Regime::rough ? std::pair{eps, 0.5 - eps} : std::pair{0.5 + eps, 1 - eps};
}

void compositions(int total, int parts, std::vector<int>& cur, const std::function<void(const std::vector<int>&)>& f) {
    if (parts == 1) {
        cur.push_back(total);
        f(cur);
        cur.pop_back();
        return;
    }
    for (int a = 0; a <= total; ++a) {
        cur.push_back(a);
        compositions(total - a, parts - 1, cur, f);
        cur.pop_back();
    }
}

Eigen::VectorXd central_diff(const std::function<Eigen::VectorXd(double)>& f, double h, double step) {
    return (f(h + step) - f(h - step)) / (2 * step);
}

}  // namespace

std::string to_string(Regime r) { return r == Regime::rough ? "rough" : "smooth"; }

Regime parse_regime(const std::string& s) {
    if (s == "rough") return Regime::rough;
    if (s == "smooth") return Regime::smooth;
    throw DomainError("unknown regime '" + s + "' (expected rough or smooth)");
}

Eigen::VectorXd LaggedQV::normalized(double h) const { return std::pow(delta, 1 - 2 * h) * raw; }

LaggedQV lagged_qv(const Eigen::VectorXd& x, double delta, long r) {
    const long n = x.size();
    if (r < 1) throw DomainError("lag count must be positive");
    if (!(2 * r < n)) throw DomainError("lag count " + std::to_string(r) + " too large for n = " + std::to_string(n));
    LaggedQV q;
    q.raw.resize(r);
    for (long j = 0; j < r; ++j) q.raw[j] = x.head(n - j).dot(x.tail(n - j));
    q.delta = delta;
    q.t_end = double(n) * delta;
    q.r = r;
    return q;
}

LaggedQV lagged_qv(const IncrementSeries& s, long r) { return lagged_qv(s.increments, s.delta, r); }

double pilot_h(const Eigen::VectorXd& v, long r, Regime regime) {
    if (r < 2 || r % 2 != 0) throw DomainError("pilot lag must be even");
    if (regime == Regime::smooth && r < 4) throw DomainError("smooth pilot lag must be a multiple of 4");
    if (v.size() < r) throw DomainError("not enough lags for the pilot");
    const long len = v.size();
    const double num = base_weight(r, len, regime).dot(v);
    const double den = base_weight(r / 2, len, regime).dot(v);
    if (!(num > 0) || !(den > 0))
        throw NonPositiveStatistic("pilot inner products must be positive (r = " + std::to_string(r) + ")");
    return ratio_to_h(num / den, regime);
}

double pilot_h(const LaggedQV& qv, long r, Regime regime) { return pilot_h(qv.raw, r, regime); }

double a_coeff_recursive(int k, int l, const std::vector<double>& x, Regime regime) {
    if (l < 0 || l > k) throw DomainError("A_{k,l} needs 0 <= l <= k");
    if (static_cast<int>(x.size()) < l + 1) throw DomainError("A_{k,l} needs l + 1 arguments");
    const double s = regime == Regime::rough ? 0.5 - x[0] : x[0] - 0.5;
    if (l == k) return 1.0;
    if (l == 0) return std::exp2(-0.5 * s * k * (k + 1));
    const std::vector<double> tail(x.begin() + 1, x.end());
    return std::exp2(-s * k) * a_coeff_recursive(k - 1, l, x, regime) + a_coeff_recursive(k - 1, l - 1, tail, regime);
}

double a_coeff_closed(int k, int l, const std::vector<double>& x, Regime regime) {
    if (l < 0 || l > k) throw DomainError("A_{k,l} needs 0 <= l <= k");
    if (static_cast<int>(x.size()) < l + 1) throw DomainError("A_{k,l} needs l + 1 arguments");
    const double sign = regime == Regime::rough ? 1.0 : -1.0;
    double total = 0;
    std::vector<int> cur;
    compositions(k - l, l + 1, cur, [&](const std::vector<int>& nu) {
        double log2_term = 0;
        int before = 0;
        for (int j = 1; j <= l + 1; ++j) {
            double c = 0;
            for (int i = 0; i < nu[j - 1]; ++i) c += k - before - j + 1 - i;
            c *= sign / 2;
            // 2^{-c} (2^{2 x_j})^{c}
            log2_term += c * (2 * x[j - 1] - 1);
            before += nu[j - 1];
        }
        total += std::exp2(log2_term);
    });
    return total;
}

ACoeffs a_coeffs(int k, const std::vector<double>& x, Regime regime) {
    if (k < 0) throw DomainError("order must be nonnegative");
    ACoeffs a;
    a.k = k;
    a.regime = regime;
    a.closed.resize(k + 1);
    a.recursive.resize(k + 1);
    for (int l = 0; l <= k; ++l) {
        a.closed[l] = a_coeff_closed(k, l, x, regime);
        a.recursive[l] = a_coeff_recursive(k, l, x, regime);
    }
    return a;
}

double a_alternating_sum(int k, double h, Regime regime) {
    const std::vector<double> x(k + 1, h);
    double s = 0;
    for (int l = 0; l <= k; ++l) s += (l % 2 ? -1.0 : 1.0) * a_coeff_recursive(k, l, x, regime);
    return s;
}

long ladder_base(int n, Regime regime) { return 1L << (regime == Regime::rough ? n + 1 : n + 2); }

long required_lags(const EstimateOptions& opts, Regime regime) {
    return std::max(opts.pilot_r, ladder_base(opts.n_cap, regime));
}

HEstimate estimate_h(const Eigen::VectorXd& v, Regime regime, const EstimateOptions& opts) {
    HEstimate out;
    out.h_pilot = pilot_h(v, opts.pilot_r, regime);
    const auto [lo, hi] = regime_interval(regime, opts.eps);
    out.h_bar = std::clamp(out.h_pilot, lo, hi);
    out.pilot_clamped = out.h_bar != out.h_pilot;
    const int n_full = n_of_h(out.h_bar);
    out.n_used = std::min(n_full, opts.n_cap);
    out.cap_binding = n_full > opts.n_cap;
    out.n_boundary = n_of_h_boundary(out.h_bar, 1e-6);
    out.r = ladder_base(out.n_used, regime);
    if (v.size() < out.r)
        throw DomainError("estimate_h needs " + std::to_string(out.r) + " lags, got " + std::to_string(v.size()));

    for (int l = 0; l <= out.n_used; ++l) out.ladder.push_back(pilot_h(v, out.r >> l, regime));
    double num = 0, den = 0;
    for (int l = 0; l <= out.n_used; ++l) {
        const std::vector<double> x(out.ladder.begin(), out.ladder.begin() + l + 1);
        const double a = (l % 2 ? -1.0 : 1.0) * a_coeff_recursive(out.n_used, l, x, regime);
        num += ladder_base_power(out.ladder[l], regime) * a;
        den += a;
    }
    if (std::abs(den) < 1e-12) throw DegenerateDenominator("alternating A-sum vanishes");
    out.ratio = num / den;
    if (!(out.ratio > 0)) throw NonPositiveStatistic("debiased ratio is not positive");
    const double raw = ratio_to_h(out.ratio, regime);
    out.h_hat = std::clamp(raw, lo, hi);
    out.h_clamped = out.h_hat != raw;
    return out;
}

HEstimate estimate_h(const LaggedQV& qv, Regime regime, const EstimateOptions& opts) {
    return estimate_h(qv.raw, regime, opts);
}

Eigen::VectorXd ladder_vector(double h, int n, long r, Regime regime, long len) {
    if (len == 0) len = r;
    const double q = ladder_base_power(h, regime);
    const std::vector<double> x(n + 1, h);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(len);
    for (int l = 0; l <= n; ++l) {
        const long rl = r >> l;
        u += std::pow(-q, l) * a_coeff_recursive(n, l, x, regime) *
             (base_weight(rl, len, regime) - q * base_weight(rl / 2, len, regime));
    }
    return u;
}

double lag_cov_quad(double h, const Eigen::VectorXd& u, long k_max) {
    if (!(h < 0.5)) throw RegimeError("the lag covariance matrix is defined for H < 1/2");
    const long r = u.size();
    const Eigen::VectorXd g = gamma_vec(h, k_max + r + 1);
    double s0 = 0;
    for (long i = 0; i < r; ++i) s0 += u[i] * g[i];
    double sum = 2 * s0 * s0, c = 0;
    for (long k = 1; k <= k_max; ++k) {
        double p = 0;
        for (long i = 0; i < r; ++i) p += u[i] * (g[k + i] + g[std::abs(k - i)]);
        const double y = p * p - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    return sum;
}

VarHResult var_h_both(double h, long k_max, int n) {
    check_regime(h, Regime::rough);
    if (n < 0) n = n_of_h(h);
    const long r = ladder_base(n, Regime::rough);
    const double q = std::exp2(2 * h);
    const std::vector<double> x(n + 1, h);
    std::vector<double> a(n + 1);
    for (int l = 0; l <= n; ++l) a[l] = a_coeff_recursive(n, l, x, Regime::rough);

    auto term = [&](long k) {
        double t = a[0] * rho_hr(h, ipow2(n + 1), k) + std::pow(-q, n + 1) * rho_hr(h, 1, k);
        for (int l = 1; l <= n; ++l) t += std::pow(-q, l) * (a[l] + a[l - 1]) * rho_hr(h, ipow2(n - l + 1), k);
        return t * t;
    };
    double sum = 0, c = 0;
    for (long k = 1; k <= k_max; ++k) {
        const double y = term(k) - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    VarHResult out;
    const double norm = std::pow(0.5 * double(r), 4 * h);
    out.series = sum / norm;
    const Eigen::VectorXd u = ladder_vector(h, n, r, Regime::rough);
    out.quadratic = lag_cov_quad(h, u, k_max) / norm;
    // both truncated sums have summands decaying like k^{4H-4}
    const double last = term(k_max) / norm;
    const double series_tail = last * double(k_max) / (3 - 4 * h);
    const double cst = h * std::abs(2 * h - 1);
    const double l1 = u.lpNorm<1>();
    const double quad_tail =
        8 * cst * cst * std::pow(std::max(1.0, double(k_max - r - 1)), 4 * h - 3) / (3 - 4 * h) * l1 * l1 / norm;
    out.tolerance = series_tail + quad_tail + 1e-9 * std::abs(out.series);
    if (std::abs(out.series - out.quadratic) > out.tolerance)
        throw ConsistencyError("Var_H representations disagree beyond their truncation bounds");
    return out;
}

double var_h(double h, long k_max, int n) { return var_h_both(h, k_max, n).series; }

double var_h_prime(double h, int n) {
    check_regime(h, Regime::smooth);
    if (n < 0) n = n_of_h(h);
    const long r = ladder_base(n, Regime::smooth);
    const Eigen::VectorXd u = ladder_vector(h, n, r, Regime::smooth);
    const double kappa = std::pow(0.5 * double(r), h + 0.5) * phi0(h) * (1 - std::exp2(0.5 - h));
    const Eigen::VectorXd ut = u / kappa;
    return 2 * ut[0] * ut[0] + ut.tail(ut.size() - 1).squaredNorm();
}

Filters filters(double h, long len, long v_lag, long w_lag) {
    if (v_lag < 1 || w_lag < 1 || v_lag == w_lag || v_lag >= len || w_lag >= len)
        throw DomainError("filters need distinct lags in [1, len)");
    const Eigen::VectorXd g = gamma_vec(h, len);
    const Eigen::VectorXd p = phi_vec(h, len);
    if (std::abs(p[v_lag] / g[v_lag] - p[w_lag] / g[w_lag]) < 1e-10)
        throw DomainError("filter condition fails: <v,Phi>/<v,Gamma> equals <w,Phi>/<w,Gamma>");
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(len), vartheta = Eigen::VectorXd::Zero(len);
    theta[v_lag] = 1 / p[v_lag];
    theta[w_lag] = -1 / p[w_lag];
    vartheta[v_lag] = 1 / g[v_lag];
    vartheta[w_lag] = -1 / g[w_lag];
    return {theta / theta.dot(g), vartheta / vartheta.dot(p)};
}

UVectors u_vectors(double h, Regime regime, int n, const EstimateOptions& opts) {
    check_regime(h, regime);
    UVectors out;
    out.regime = regime;
    out.n = n < 0 ? std::min(n_of_h(h), opts.n_cap) : n;
    out.r = ladder_base(out.n, regime);
    const long len = std::max(out.r, std::max(opts.v_lag, opts.w_lag) + 1);
    out.a_sum = a_alternating_sum(out.n, h, regime);
    out.u = ladder_vector(h, out.n, out.r, regime, len);
    double kappa;
    if (regime == Regime::rough) {
        out.d = std::exp2(1 + 2 * h) * kLn2 * out.a_sum;
        kappa = std::pow(0.5 * double(out.r), 2 * h);
    } else {
        out.d = std::exp2(h + 0.5) * kLn2 * out.a_sum;
        kappa = std::pow(0.5 * double(out.r), h + 0.5) * phi0(h) * (1 - std::exp2(0.5 - h));
    }
    out.u_tilde = out.u / kappa;

    const Filters f = filters(h, len, opts.v_lag, opts.w_lag);
    out.theta_bar = f.theta_bar;
    out.vartheta_bar = f.vartheta_bar;
    auto theta_of = [&](double x) { return filters(x, len, opts.v_lag, opts.w_lag).theta_bar; };
    auto lam_of = [&](double x) { return Eigen::VectorXd(phi0(x) * filters(x, len, opts.v_lag, opts.w_lag).vartheta_bar); };
    const Eigen::VectorXd d_theta = central_diff(theta_of, h, kDerivStep);
    const Eigen::VectorXd d_lam = central_diff(lam_of, h, kDerivStep);
    const Eigen::VectorXd kern = regime == Regime::rough ? gamma_vec(h, len) : phi_vec(h, len);

    out.u_pi = out.theta_bar + d_theta.dot(kern) / out.d * out.u_tilde;
    out.u_lambda = phi0(h) * out.vartheta_bar + d_lam.dot(kern) / out.d * out.u_tilde;
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(len);
    e1[0] = 1;
    out.u_c = e1 - out.u_pi - out.u_lambda;
    return out;
}

Integrals estimate_integrals(const LaggedQV& qv, double h_hat, Regime regime, const EstimateOptions& opts) {
    check_regime(h_hat, regime);
    const long len = qv.raw.size();
    const Filters f = filters(h_hat, len, opts.v_lag, opts.w_lag);
    const double d = qv.delta;
    Integrals out;
    out.pi_hat = std::pow(d, 1 - 2 * h_hat) * f.theta_bar.dot(qv.raw);
    out.lambda_hat = std::pow(d, 0.5 - h_hat) * f.vartheta_bar.dot(qv.raw);
    out.c_hat = qv.raw[0] - f.theta_bar.dot(qv.raw) - phi0(h_hat) * f.vartheta_bar.dot(qv.raw);
    if (regime == Regime::rough)
        out.c_identifiable = h_hat > 0.25 + opts.margin;
    else
        out.pi_identifiable = h_hat < 0.75 - opts.margin;
    return out;
}

double quarticity(const Eigen::VectorXd& x, double delta, double h_hat, Regime regime) {
    const double s4 = x.array().square().square().sum() / 3.0;
    return regime == Regime::rough ? std::pow(delta, 1 - 4 * h_hat) * s4 : s4 / delta;
}

double quarticity(const IncrementSeries& s, double h_hat, Regime regime) {
    return quarticity(s.increments, s.delta, h_hat, regime);
}

double regime_statistic(const Eigen::VectorXd& x) {
    const long half = x.size() / 2;
    if (half < 1) throw DomainError("series too short for the regime statistic");
    double fine = 0, coarse = 0;
    for (long i = 0; i < half; ++i) {
        const double y = x[2 * i] + x[2 * i + 1];
        coarse += y * y;
        fine += x[2 * i] * x[2 * i] + x[2 * i + 1] * x[2 * i + 1];
    }
    if (!(fine > 0) || !(coarse > 0)) throw NonPositiveStatistic("regime statistic needs a non-degenerate path");
    return std::log2(coarse) - std::log2(fine);
}

Regime auto_regime(const Eigen::VectorXd& x) { return regime_statistic(x) < 0 ? Regime::rough : Regime::smooth; }

void confidence_intervals(EstimateReport& rep, const EstimateOptions& opts) {
    const double h = rep.h.value;
    const double d = rep.delta;
    const double q = rep.quarticity;
    const double ld = std::abs(std::log(d));
    const UVectors uv = u_vectors(h, rep.regime, rep.diagnostics.n_used, opts);
    const double z = boost::math::quantile(boost::math::normal(), 0.5 + rep.level / 2);

    auto quad = [&](const Eigen::VectorXd& u) {
        if (rep.regime == Regime::rough) return lag_cov_quad(h, u, opts.k_max);
        return 2 * u[0] * u[0] + u.tail(u.size() - 1).squaredNorm();
    };
    const double var_ladder = quad(uv.u_tilde);
    const double ad = std::abs(uv.d);

    if (rep.regime == Regime::rough) {
        rep.h.sd = std::sqrt(d * var_ladder * q) / (ad * rep.pi.value);
        rep.pi.sd = std::sqrt(d) * ld * 2 * std::sqrt(var_ladder * q) / ad;
        rep.lambda.sd = std::pow(d, h) * std::sqrt(quad(uv.u_lambda) * q) / phi0(h);
        rep.c.sd = std::pow(d, 2 * h - 0.5) * std::sqrt(quad(uv.u_c) * q);
        if (!(rep.pi.value > 0)) rep.diagnostics.notes.push_back("pi_hat is not positive; no interval for H");
    } else {
        rep.h.sd = std::pow(d, 1 - h) * std::sqrt(var_ladder * q) / (ad * std::abs(rep.lambda.value));
        rep.lambda.sd = std::pow(d, 1 - h) * ld * std::sqrt(var_ladder * q) / ad;
        rep.pi.sd = std::pow(d, 1.5 - 2 * h) * std::sqrt(quad(uv.u_pi) * q);
        rep.c.sd = std::sqrt(d * quad(uv.u_c) * q);
    }
    for (ParamEstimate* p : {&rep.h, &rep.c, &rep.lambda, &rep.pi}) {
        if (!p->identifiable || !(p->sd > 0) || !std::isfinite(p->sd)) {
            p->sd = p->identifiable && std::isfinite(p->sd) && p->sd > 0 ? p->sd : nan();
            p->lo = p->hi = nan();
            continue;
        }
        p->lo = p->value - z * p->sd;
        p->hi = p->value + z * p->sd;
    }
}

EstimateReport full_report(const IncrementSeries& series, const ReportOptions& opts) {
    series.validate();
    if (!(opts.level > 0 && opts.level < 1)) throw DomainError("level must lie in (0,1)");
    EstimateReport rep;
    rep.n = series.n();
    rep.delta = series.delta;
    rep.t_end = series.t_end;
    rep.level = opts.level;
    if (opts.regime == "auto") {
        rep.diagnostics.auto_statistic = regime_statistic(series.increments);
        rep.regime = rep.diagnostics.auto_statistic < 0 ? Regime::rough : Regime::smooth;
        rep.diagnostics.regime_source = "auto";
    } else {
        rep.regime = parse_regime(opts.regime);
        rep.diagnostics.regime_source = "explicit";
    }
    const long lags = required_lags(opts.est, rep.regime);
    const LaggedQV qv = lagged_qv(series, lags);

    HEstimate he;
    try {
        he = estimate_h(qv, rep.regime, opts.est);
    } catch (const NonPositiveStatistic& e) {
        throw NonPositiveStatistic(std::string("estimate_h: ") + e.what());
    } catch (const DegenerateDenominator& e) {
        throw DegenerateDenominator(std::string("estimate_h: ") + e.what());
    }
    rep.h_pilot = he.h_pilot;
    rep.h.value = he.h_hat;
    auto& dg = rep.diagnostics;
    dg.n_used = he.n_used;
    dg.r = he.r;
    dg.pilot_clamped = he.pilot_clamped;
    dg.h_clamped = he.h_clamped;
    dg.cap_binding = he.cap_binding;
    dg.n_boundary = he.n_boundary;
    dg.ladder = he.ladder;
    if (he.pilot_clamped) dg.notes.push_back("pilot clamped to the regime interval");
    if (he.h_clamped) dg.notes.push_back("debiased H clamped to the regime interval");
    if (he.cap_binding) dg.notes.push_back("N(H) cap is binding");

    const Integrals in = estimate_integrals(qv, he.h_hat, rep.regime, opts.est);
    rep.c = {in.c_hat, in.c_identifiable};
    rep.lambda = {in.lambda_hat, in.lambda_identifiable};
    rep.pi = {in.pi_hat, in.pi_identifiable};
    if (!in.c_identifiable) dg.notes.push_back("C not identifiable for H <= 1/4");
    if (!in.pi_identifiable) dg.notes.push_back("Pi not identifiable for H >= 3/4");
    rep.quarticity = quarticity(series, he.h_hat, rep.regime);
    confidence_intervals(rep, opts.est);
    return rep;
}

namespace {

nlohmann::ordered_json param_json(const ParamEstimate& p) {
    const auto num = [](double x) { return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(); };
    nlohmann::ordered_json j;
    j["value"] = p.identifiable ? num(p.value) : nlohmann::ordered_json();
    j["identifiable"] = p.identifiable;
    j["sd"] = num(p.sd);
    j["ci"] = std::isfinite(p.lo) && std::isfinite(p.hi) ? nlohmann::ordered_json{p.lo, p.hi} : nlohmann::ordered_json();
    return j;
}

}  // namespace

nlohmann::ordered_json to_json(const EstimateReport& r) {
    nlohmann::ordered_json j;
    j["regime"] = to_string(r.regime);
    j["n"] = r.n;
    j["delta"] = r.delta;
    j["t_end"] = r.t_end;
    j["level"] = r.level;
    j["h_pilot"] = r.h_pilot;
    j["h_hat"] = r.h.value;
    j["estimates"]["h"] = param_json(r.h);
    j["estimates"]["c"] = param_json(r.c);
    j["estimates"]["lambda"] = param_json(r.lambda);
    j["estimates"]["pi"] = param_json(r.pi);
    j["quarticity"] = r.quarticity;
    const auto& d = r.diagnostics;
    nlohmann::ordered_json dj;
    dj["regime_source"] = d.regime_source;
    dj["auto_statistic"] = d.auto_statistic;
    dj["n_used"] = d.n_used;
    dj["ladder_r"] = d.r;
    dj["pilot_clamped"] = d.pilot_clamped;
    dj["h_clamped"] = d.h_clamped;
    dj["n_cap_binding"] = d.cap_binding;
    dj["n_boundary"] = d.n_boundary;
    dj["ladder"] = d.ladder;
    dj["notes"] = d.notes;
    j["diagnostics"] = dj;
    return j;
}

std::string to_table(const EstimateReport& r) {
    std::ostringstream os;
    os << "regime " << to_string(r.regime) << "  n " << r.n << "  delta " << r.delta << "  level " << r.level << "\n";
    os << std::left << std::setw(10) << "param" << std::right << std::setw(14) << "estimate" << std::setw(14) << "sd"
       << std::setw(14) << "ci_lo" << std::setw(14) << "ci_hi" << "\n";
    auto row = [&](const char* name, const ParamEstimate& p) {
        os << std::left << std::setw(10) << name << std::right << std::setprecision(6);
        if (!p.identifiable) {
            os << std::setw(14) << "n/a" << "  (not identifiable)\n";
            return;
        }
        os << std::setw(14) << p.value << std::setw(14) << p.sd << std::setw(14) << p.lo << std::setw(14) << p.hi
           << "\n";
    };
    row("H", r.h);
    row("C", r.c);
    row("Lambda", r.lambda);
    row("Pi", r.pi);
    os << "pilot H " << r.h_pilot << "  N " << r.diagnostics.n_used << "  ladder r " << r.diagnostics.r << "\n";
    for (const auto& note : r.diagnostics.notes) os << "note: " << note << "\n";
    return os.str();
}

}  // namespace msm
