#include "msm/lowerbound.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "msm/errors.hpp"
#include "msm/fracgauss.hpp"

namespace msm {

namespace {

std::string shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double log_det_from_chol(const Eigen::MatrixXd& l) { return 2 * l.diagonal().array().log().sum(); }

void check_grid(const std::vector<long>& ns) {
    if (ns.empty()) throw DomainError("empty n grid");
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (ns[i] < 1) throw DomainError("grid sizes must be positive");
        if (ns[i] > kKLMaxN) throw DomainError("KL scan is dense; n must not exceed " + std::to_string(kKLMaxN));
        if (i > 0 && ns[i] <= ns[i - 1]) throw DomainError("n grid must be strictly increasing");
    }
}

}  // namespace

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw DomainError("matrix must be square");
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
        Eigen::MatrixXd l = llt.matrixL();
        if ((l.diagonal().array() > 0).all()) return l;
    }
    // locate the pivot with a plain column-wise factorization
    const long n = a.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (long j = 0; j < n; ++j) {
        const double d = a(j, j) - l.row(j).head(j).squaredNorm();
        if (!(d > 0)) throw NotPositiveDefinite("Cholesky factorization failed", j);
        l(j, j) = std::sqrt(d);
        for (long i = j + 1; i < n; ++i) l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
    return l;
}

double kl_gaussian(const Eigen::MatrixXd& sigma1, const Eigen::MatrixXd& sigma0) {
    if (sigma1.rows() != sigma0.rows() || sigma1.cols() != sigma0.cols())
        throw DomainError("covariance matrices differ in size");
    const Eigen::MatrixXd l1 = cholesky_lower(sigma1);
    const Eigen::MatrixXd l0 = cholesky_lower(sigma0);
    const Eigen::MatrixXd m = l0.triangularView<Eigen::Lower>().solve(l1);
    const double n = double(sigma0.rows());
    return 0.5 * (m.squaredNorm() - n + log_det_from_chol(l0) - log_det_from_chol(l1));
}

RateExponents rate_exponents(double h) {
    if (!(h > 0 && h < 1) || h == 0.5) throw RegimeError("perturbation rates need H in (0,1) without 1/2");
    const double hb = hbar(h);
    RateExponents r;
    r.boundary = h == 0.25 || h == 0.75;
    if (h < 0.5) {
        r.alpha[0] = -0.5;
        if (h > 0.25) r.alpha[1] = 0.5 - 2 * h;
        r.alpha[2] = 2 * (hb - h) - 0.5;
        r.alpha[3] = -0.5;
    } else {
        r.alpha[0] = 2 * hb - 1.5;
        r.alpha[1] = -0.5;
        r.alpha[2] = 2 * hb - 1.5;
        if (h < 0.75) r.alpha[3] = 2 * h - 1.5;
    }
    return r;
}

ModelTheta perturbed_theta(const ModelTheta& theta0, long n, double r0, bool constant_r1) {
    if (!theta0.in_parameter_set()) throw DomainError("theta0 is outside the parameter set");
    if (n < 1) throw DomainError("n must be positive");
    const RateExponents ex = rate_exponents(theta0.h);
    std::array<double, 4> r{};
    for (int i = 0; i < 4; ++i)
        if (ex.alpha[i]) r[i] = r0 * std::pow(double(n), *ex.alpha[i]);
    if (constant_r1) r[0] = r0;
    const double nd = double(n);
    ModelTheta t;
    t.h = theta0.h + r[0];
    t.sigma_sq = theta0.sigma_sq + r[1];
    if (!(t.h > 0 && t.h < 1)) throw DomainError("perturbed H leaves (0,1); r0 too large for n = " + std::to_string(n));
    t.lambda_cov = theta0.lambda_cov * b_coef(theta0.h) / b_coef(t.h) * std::pow(nd, r[0]) * (1 + r[2]);
    t.pi_total = theta0.pi_total * std::pow(nd, 2 * r[0]) * (1 + r[3]);
    if (!t.in_parameter_set())
        throw DomainError("perturbed theta leaves the parameter set; r0 too large for n = " + std::to_string(n));
    return t;
}

PerturbationPath perturbation_path(const ModelTheta& theta0, const std::vector<long>& ns, double r0,
                                   bool constant_r1) {
    PerturbationPath p;
    p.theta0 = theta0;
    p.r0 = r0;
    p.rates = rate_exponents(theta0.h);
    p.constant_r1 = constant_r1;
    for (long n : ns) p.thetas[n] = perturbed_theta(theta0, n, r0, constant_r1);
    return p;
}

bool KLScanResult::all_ok() const {
    for (bool b : bound_ok)
        if (!b) return false;
    return !bound_ok.empty();
}

KLScanner::KLScanner(const ModelTheta& theta0, std::vector<long> ns) : theta0_(theta0), ns_(std::move(ns)) {
    check_grid(ns_);
    if (!theta0_.in_parameter_set()) throw DomainError("theta0 is outside the parameter set");
    for (long n : ns_) {
        chol0_.push_back(cholesky_lower(mixed_cov(theta0_, n)));
        logdet0_.push_back(log_det_from_chol(chol0_.back()));
    }
}

double KLScanner::kl_at(std::size_t idx, const ModelTheta& theta) const {
    const Eigen::MatrixXd l1 = cholesky_lower(mixed_cov(theta, ns_[idx]));
    const Eigen::MatrixXd m = chol0_[idx].triangularView<Eigen::Lower>().solve(l1);
    const double kl = 0.5 * (m.squaredNorm() - double(ns_[idx]) + logdet0_[idx] - log_det_from_chol(l1));
    // rounding can leave a tiny negative value when theta equals theta0
    return std::max(kl, 0.0);
}

KLScanResult KLScanner::scan(double r0, bool constant_r1) const {
    if (!(r0 >= 0)) throw DomainError("r0 must be nonnegative");
    KLScanResult out;
    out.theta0 = theta0_;
    out.r0 = r0;
    out.constant_r1 = constant_r1;
    out.boundary = rate_exponents(theta0_.h).boundary;
    out.ns = ns_;
    for (std::size_t i = 0; i < ns_.size(); ++i) {
        const double kl = kl_at(i, perturbed_theta(theta0_, ns_[i], r0, constant_r1));
        out.kl.push_back(kl);
        out.bound_ok.push_back(kl <= kKLBound);
    }
    return out;
}

bool KLScanner::all_within(double r0, bool constant_r1) const {
    for (std::size_t i = 0; i < ns_.size(); ++i) {
        try {
            if (kl_at(i, perturbed_theta(theta0_, ns_[i], r0, constant_r1)) > kKLBound) return false;
        } catch (const DomainError&) {
            return false;
        } catch (const NotPositiveDefinite&) {
            return false;
        }
    }
    return true;
}

double KLScanner::bisect_r0(double hi, double rel_tol, bool constant_r1) const {
    if (!(hi > 0)) throw DomainError("bisection upper end must be positive");
    if (all_within(hi, constant_r1)) return hi;
    double lo = 0;
    while (hi - lo > rel_tol * std::max(lo, 1e-12 * hi)) {
        const double mid = 0.5 * (lo + hi);
        (all_within(mid, constant_r1) ? lo : hi) = mid;
        if (lo == 0 && hi < 1e-12) break;
    }
    return lo;
}

KLScanResult kl_scan(const ModelTheta& theta0, const std::vector<long>& ns, double r0, bool constant_r1) {
    return KLScanner(theta0, ns).scan(r0, constant_r1);
}

double bisect_r0(const ModelTheta& theta0, const std::vector<long>& ns, double hi, double rel_tol) {
    return KLScanner(theta0, ns).bisect_r0(hi, rel_tol);
}

void write_kl_csv(const KLScanResult& r, std::ostream& os) {
    os << "n,kl,bound_ok\n";
    for (std::size_t i = 0; i < r.ns.size(); ++i)
        os << r.ns[i] << "," << shortest(r.kl[i]) << "," << (r.bound_ok[i] ? 1 : 0) << "\n";
}

KLScanResult read_kl_csv(std::istream& is) {
    KLScanResult r;
    std::string line;
    if (!std::getline(is, line) || line.rfind("n,kl,bound_ok", 0) != 0) throw FormatError("missing KL CSV header");
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) throw FormatError("bad KL CSV row: " + line);
        long n = 0;
        double kl = 0;
        int ok = 0;
        const char* b = line.data();
        if (std::from_chars(b, b + c1, n).ec != std::errc() ||
            std::from_chars(b + c1 + 1, b + c2, kl).ec != std::errc() ||
            std::from_chars(b + c2 + 1, b + line.size(), ok).ec != std::errc())
            throw FormatError("bad KL CSV row: " + line);
        r.ns.push_back(n);
        r.kl.push_back(kl);
        r.bound_ok.push_back(ok != 0);
    }
    return r;
}

nlohmann::ordered_json to_json(const KLScanResult& r) {
    nlohmann::ordered_json j;
    j["theta0"] = to_json(r.theta0);
    j["r0"] = r.r0;
    j["constant_r1"] = r.constant_r1;
    j["boundary_column"] = r.boundary;
    j["bound"] = kKLBound;
    j["ns"] = r.ns;
    j["kl"] = r.kl;
    std::vector<int> ok;
    for (bool b : r.bound_ok) ok.push_back(b ? 1 : 0);
    j["bound_ok"] = ok;
    j["all_ok"] = r.all_ok();
    return j;
}

}  // namespace msm
