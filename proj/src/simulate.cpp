#include "msm/simulate.hpp"

#include <unsupported/Eigen/FFT>
#include <cmath>
#include <iostream>

#include "msm/errors.hpp"
#include "msm/fracgauss.hpp"

namespace msm {

namespace {

constexpr double kNegEigTol = 1e-10;

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("covariance is not positive definite", -1);
    return llt.matrixL();
}

long checked_length(const ModelTheta& theta, long n) {
    theta.validate();
    return n;
}

long next_pow2(long x) {
    long p = 1;
    while (p < x) p <<= 1;
    return p;
}

}  // namespace

SimMethod parse_method(const std::string& s) {
    if (s == "cholesky") return SimMethod::cholesky;
    if (s == "circulant") return SimMethod::circulant;
    throw DomainError("unknown simulation method '" + s + "' (expected cholesky or circulant)");
}

std::string to_string(SimMethod m) { return m == SimMethod::cholesky ? "cholesky" : "circulant"; }

void IncrementSeries::validate() const {
    if (n() < 2) throw DomainError("a series needs at least 2 increments");
    if (!(delta > 0)) throw DomainError("series step must be positive");
    if (std::abs(t_end - double(n()) * delta) > 1e-12 * std::max(1.0, t_end))
        throw DomainError("series horizon must equal n * delta");
    if (!increments.allFinite()) throw DomainError("series contains non-finite increments");
}

StationarySampler::StationarySampler(std::function<double(long)> acov, long n, SimMethod method) : n_(n) {
    if (n < 1) throw DomainError("sampler length must be positive");
    if (method == SimMethod::circulant && n >= 2) {
        const long base = next_pow2(n - 1);
        for (long half = base; half <= 4 * base; half *= 2) {
            const long m = 2 * half;
            std::vector<double> c(m);
            for (long k = 0; k <= half; ++k) c[k] = acov(k);
            for (long k = half + 1; k < m; ++k) c[k] = c[m - k];
            Eigen::FFT<double> fft;
            std::vector<std::complex<double>> spec;
            fft.fwd(spec, c);
            double lmax = 0, lmin = 0;
            for (const auto& z : spec) {
                lmax = std::max(lmax, z.real());
                lmin = std::min(lmin, z.real());
            }
            min_eig_ = lmin;
            if (lmin >= -kNegEigTol * std::max(lmax, 1e-300)) {
                m_ = m;
                sqrt_eig_.resize(m);
                for (long j = 0; j < m; ++j) sqrt_eig_[j] = std::sqrt(std::max(spec[j].real(), 0.0) / double(m));
                used_ = SimMethod::circulant;
                return;
            }
        }
        if (n > kCholeskyMaxN)
            throw NotPositiveDefinite("circulant embedding failed and n exceeds the Cholesky limit", -1);
        std::clog << "warning: circulant embedding has negative eigenvalues; falling back to Cholesky\n";
        fell_back_ = true;
    } else if (method == SimMethod::cholesky && n > kCholeskyMaxN) {
        throw DomainError("cholesky sampling is limited to n <= " + std::to_string(kCholeskyMaxN));
    }
    Eigen::MatrixXd cov(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) cov(i, j) = acov(std::abs(i - j));
    chol_ = cholesky_factor(cov);
    used_ = SimMethod::cholesky;
}

Eigen::VectorXd StationarySampler::draw(Rng& rng) const {
    if (used_ == SimMethod::cholesky) {
        Eigen::VectorXd z(n_);
        for (long i = 0; i < n_; ++i) z[i] = rng.normal();
        return chol_.triangularView<Eigen::Lower>() * z;
    }
    std::vector<std::complex<double>> w(m_), out;
    for (long j = 0; j < m_; ++j) {
        const double re = rng.normal();
        const double im = rng.normal();
        w[j] = sqrt_eig_[j] * std::complex<double>(re, im);
    }
    Eigen::FFT<double> fft;
    fft.fwd(out, w);
    Eigen::VectorXd x(n_);
    for (long i = 0; i < n_; ++i) x[i] = out[i].real();
    return x;
}

MfbmSampler::MfbmSampler(const ModelTheta& theta, long n, double delta, SimMethod method)
    : theta_(theta),
      delta_(delta),
      core_(
          [theta, delta](long k) {
              const double hb = hbar(theta.h);
              double v = theta.pi_total * std::pow(delta, 2 * theta.h) * gamma_h(theta.h, k) +
                         theta.lambda_cov * b_coef(theta.h) * std::pow(delta, 2 * hb) * gamma_h(hb, k);
              if (k == 0) v += theta.sigma_sq * delta;
              return v;
          },
          checked_length(theta, n), method) {
    if (!(delta > 0)) throw DomainError("step must be positive");
    if (n < 2) throw DomainError("a series needs at least 2 increments");
}

IncrementSeries MfbmSampler::sample(std::uint64_t seed) const {
    Rng rng(seed);
    IncrementSeries s;
    s.increments = core_.draw(rng);
    s.delta = delta_;
    s.t_end = double(core_.n()) * delta_;
    s.meta.seed = seed;
    s.meta.method = to_string(core_.method_used());
    s.meta.model = to_json(theta_);
    return s;
}

IncrementSeries sample_mfbm(const ModelTheta& theta, long n, double delta, std::uint64_t seed, SimMethod method) {
    return MfbmSampler(theta, n, delta, method).sample(seed);
}

IncrementSeries sample_three_process(const ModelTheta& theta, long n, double delta, std::uint64_t seed) {
    theta.validate();
    if (!(delta > 0)) throw DomainError("step must be positive");
    if (n < 2) throw DomainError("a series needs at least 2 increments");
    if (theta.lambda_corr() < 0)
        throw DomainError("the three-process representation needs lambda >= 0; use sample_mfbm instead");
    const double h = theta.h, hb = hbar(h);
    auto fgn = [](double hh, double scale) {
        return [hh, scale](long k) { return scale * gamma_h(hh, k); };
    };
    const double c_mid = 2 * theta.lambda_corr() * theta.rho() * theta.sigma() / std::tgamma(h + 1.5);
    const StationarySampler frac_h(fgn(h, std::pow(delta, 2 * h)), n, SimMethod::circulant);
    const StationarySampler frac_hb(fgn(hb, std::pow(delta, 2 * hb)), n, SimMethod::circulant);

    Rng r_bm(substream_seed(seed, 0)), r_mid(substream_seed(seed, 1)), r_rho(substream_seed(seed, 2)),
        r_rhop(substream_seed(seed, 3));
    Eigen::VectorXd x(n);
    const double sd_bm = theta.sigma() * std::sqrt(delta);
    for (long i = 0; i < n; ++i) x[i] = sd_bm * r_bm.normal();
    x += std::sqrt(c_mid) * frac_hb.draw(r_mid);
    x += theta.rho() * frac_h.draw(r_rho);
    x += theta.rho_prime() * frac_h.draw(r_rhop);

    IncrementSeries s;
    s.increments = std::move(x);
    s.delta = delta;
    s.t_end = double(n) * delta;
    s.meta.seed = seed;
    s.meta.method = "three_process";
    s.meta.model = to_json(theta);
    return s;
}

double increment_variance(const ModelTheta& theta, double h) {
    theta.validate();
    if (!(h > 0)) throw DomainError("step must be positive");
    return theta.sigma_sq * h + theta.pi_total * std::pow(h, 2 * theta.h) +
           theta.lambda_cov * b_coef(theta.h) * std::pow(h, 2 * hbar(theta.h));
}

void ProcessSpec::validate() const {
    if (!std::isfinite(x0) || !std::isfinite(mean) || !std::isfinite(kappa) || !std::isfinite(vol))
        throw DomainError("process parameters must be finite");
    if (kind == Kind::ou && (kappa < 0 || vol < 0)) throw DomainError("OU needs kappa >= 0 and vol >= 0");
}

void StochVolSpec::validate() const {
    if (!(h > 0 && h < 1) || h == 0.5) throw DomainError("H must lie in (0,1) without 1/2");
    if (oversample < 1) throw DomainError("oversample must be >= 1");
    drift.validate();
    sigma_proc.validate();
    rho_proc.validate();
    rho_prime_proc.validate();
}

Eigen::VectorXd hybrid_weights(double h, long count, double dt) {
    const double kinv = 1.0 / k_h(h);
    const double scale = kinv * std::pow(dt, h - 0.5);
    const double p = h + 0.5;
    Eigen::VectorXd w(count);
    for (long k = 1; k <= count; ++k) {
        if (k == 1)
            w[0] = scale / std::sqrt(2 * h);
        else
            w[k - 1] = scale * (std::pow(double(k), p) - std::pow(double(k - 1), p)) / p;
    }
    return w;
}

namespace {

// Left-point Euler path of a process spec on nf fine steps (values at the left ends).
Eigen::VectorXd process_path(const ProcessSpec& p, long nf, double dt, Rng& rng) {
    Eigen::VectorXd x(nf);
    double v = p.x0;
    const double sdt = std::sqrt(dt);
    for (long j = 0; j < nf; ++j) {
        x[j] = v;
        if (p.kind == ProcessSpec::Kind::ou) v += p.kappa * (p.mean - v) * dt + p.vol * sdt * rng.normal();
    }
    return x;
}

// Linear convolution out[i] = sum_{j < i} w[i - j - 1] z[j], i = 0..len (out[0] = 0).
Eigen::VectorXd causal_convolution(const Eigen::VectorXd& w, const Eigen::VectorXd& z) {
    const long len = z.size();
    const long m = next_pow2(2 * len);
    std::vector<double> a(m, 0.0), b(m, 0.0);
    for (long i = 0; i < len; ++i) {
        a[i] = w[i];
        b[i] = z[i];
    }
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> fa, fb;
    fft.fwd(fa, a);
    fft.fwd(fb, b);
    for (long i = 0; i < m; ++i) fa[i] *= fb[i];
    std::vector<double> c;
    fft.inv(c, fa);
    Eigen::VectorXd out(len + 1);
    out[0] = 0;
    for (long i = 1; i <= len; ++i) out[i] = c[i - 1];
    return out;
}

}  // namespace

SvSample sample_mixed_sm(const StochVolSpec& spec, long n, double delta, std::uint64_t seed) {
    spec.validate();
    if (n < 2) throw DomainError("a series needs at least 2 increments");
    if (!(delta > 0)) throw DomainError("step must be positive");
    const long m = spec.oversample;
    const long nf = n * m;
    const double dt = delta / double(m);
    const double sdt = std::sqrt(dt);

    Rng r_b(substream_seed(seed, 0)), r_bp(substream_seed(seed, 1)), r_a(substream_seed(seed, 2)),
        r_s(substream_seed(seed, 3)), r_r(substream_seed(seed, 4)), r_rp(substream_seed(seed, 5));
    Eigen::VectorXd db(nf), dbp(nf);
    for (long j = 0; j < nf; ++j) db[j] = sdt * r_b.normal();
    for (long j = 0; j < nf; ++j) dbp[j] = sdt * r_bp.normal();
    const Eigen::VectorXd a = process_path(spec.drift, nf, dt, r_a);
    const Eigen::VectorXd sig = process_path(spec.sigma_proc, nf, dt, r_s);
    const Eigen::VectorXd rho = process_path(spec.rho_proc, nf, dt, r_r);
    const Eigen::VectorXd rhop = process_path(spec.rho_prime_proc, nf, dt, r_rp);

    const Eigen::VectorXd z = rho.cwiseProduct(db) + rhop.cwiseProduct(dbp);
    const Eigen::VectorXd frac = causal_convolution(hybrid_weights(spec.h, nf, dt), z);

    SvSample out;
    Eigen::VectorXd x(n);
    for (long i = 0; i < n; ++i) {
        double mart = 0;
        for (long j = i * m; j < (i + 1) * m; ++j) mart += a[j] * dt + sig[j] * db[j];
        x[i] = mart + frac[(i + 1) * m] - frac[i * m];
    }
    for (long j = 0; j < nf; ++j) {
        const double s2 = sig[j] * sig[j];
        const double p = rho[j] * rho[j] + rhop[j] * rhop[j];
        out.truth.c_t += s2 * dt;
        out.truth.lambda_t += sig[j] * rho[j] * dt;
        out.truth.pi_t += p * dt;
        out.truth.sigma4_t += s2 * s2 * dt;
        out.truth.pi2_t += p * p * dt;
    }
    out.series.increments = std::move(x);
    out.series.delta = delta;
    out.series.t_end = double(n) * delta;
    out.series.meta.seed = seed;
    out.series.meta.method = "hybrid";
    nlohmann::ordered_json model;
    model["h"] = spec.h;
    model["oversample"] = spec.oversample;
    out.series.meta.model = model;
    return out;
}

double hybrid_increment_variance(double h, double sigma, double rho, double rho_prime, long i, double delta,
                                 int oversample) {
    if (i < 1) throw DomainError("increment index is 1-based");
    const long m = oversample;
    const double dt = delta / double(m);
    const long hi = i * m, lo = (i - 1) * m;
    const Eigen::VectorXd w = hybrid_weights(h, hi, dt);
    double vb = 0, vbp = 0;
    for (long j = 0; j < hi; ++j) {
        double kern = w[hi - j - 1];
        if (j < lo) kern -= w[lo - j - 1];
        const double cb = (j >= lo ? sigma : 0.0) + rho * kern;
        vb += cb * cb;
        vbp += rho_prime * rho_prime * kern * kern;
    }
    return (vb + vbp) * dt;
}

double rl_increment_variance(double h, double sigma, double rho, double rho_prime, long i, double delta) {
    const double p = rho * rho + rho_prime * rho_prime;
    const double cross = std::pow(delta, h + 0.5) / (k_h(h) * (h + 0.5));
    return sigma * sigma * delta + 2 * sigma * rho * cross + p * std::pow(delta, 2 * h) * g_increment_sq(h, i);
}

}  // namespace msm
