#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "msm/errors.hpp"
#include "msm/fracgauss.hpp"
#include "msm/simulate.hpp"

using namespace msm;

namespace {

std::vector<double> h_grid() {
    std::vector<double> hs;
    for (int i = 1; i <= 17; ++i) {
        const double h = 0.05 * i + 0.025;
        if (h < 0.96) hs.push_back(h);
    }
    return hs;
}

}  // namespace

TEST_CASE("K_H special values and integral form") {
    CHECK(k_h(0.5) == doctest::Approx(1.0).epsilon(1e-14));
    // reciprocal of sqrt(1.5 sin(0.75 pi) Gamma(1.5)) / Gamma(1.25)
    const double ref = std::tgamma(1.25) / std::sqrt(1.5 * std::sin(0.75 * std::numbers::pi) * std::tgamma(1.5));
    CHECK(k_h(0.75) == doctest::Approx(ref).epsilon(1e-14));
    CHECK(k_h(0.75) == doctest::Approx(0.9348899318978893).epsilon(1e-12));
    for (double h : {0.05, 0.1, 0.3, 0.45, 0.55, 0.7, 0.75, 0.9, 0.97})
        CHECK(std::abs(k_h(h) - k_h_integral(h)) < 1e-8);
}

TEST_CASE("Gamma kernel values") {
    CHECK(std::abs(gamma_h(0.5, 3)) < 1e-15);
    for (double h : {0.1, 0.3, 0.8}) CHECK(gamma_h(h, 0) == 1.0);
    CHECK(gamma_h(0.3, 1) == doctest::Approx(0.5 * (std::pow(2.0, 0.6) - 2)).epsilon(1e-14));
    CHECK(gamma_h(0.3, 1) == doctest::Approx(-0.24214171674480095).epsilon(1e-13));
    // stable form agrees with the naive second difference at moderate lags
    for (long r : {2L, 10L, 100L}) {
        const double naive = 0.5 * (std::pow(r + 1.0, 1.4) - 2 * std::pow(double(r), 1.4) + std::pow(r - 1.0, 1.4));
        CHECK(gamma_h(0.7, r) == doctest::Approx(naive).epsilon(1e-10));
    }
}

TEST_CASE("Phi kernel values") {
    CHECK(phi_h(0.5, 0) == doctest::Approx(2.0).epsilon(1e-14));
    for (long r : {1L, 2L, 7L}) CHECK(std::abs(phi_h(0.5, r)) < 1e-14);
    CHECK(phi_h(0.3, 2) == doctest::Approx(phi0(0.3) * gamma_h(0.4, 2)).epsilon(1e-12));
    for (double h : h_grid())
        for (long r = 0; r <= 64; ++r)
            CHECK(std::abs(phi_h(h, r) - phi0(h) * gamma_h(hbar(h), r)) <= 1e-12 * std::max(1.0, std::abs(phi_h(h, r))));
}

TEST_CASE("rho_{H,r}") {
    CHECK(std::abs(rho_hr(0.5, 2, 5)) < 1e-12);
    for (long k : {1L, 3L, 9L}) CHECK(rho_hr(0.3, 1, k) == doctest::Approx(2 * gamma_h(0.3, k)).epsilon(1e-12));
    // brute-force inner product of a_4 with the shifted kernel Gamma^{H,1}
    const Eigen::VectorXd a = weight_a(4);
    double s = 0;
    for (long i = 0; i < 4; ++i) s += a[i] * (gamma_h(0.3, 1 + i) + gamma_h(0.3, std::abs(1 - i)));
    CHECK(rho_hr(0.3, 4, 1) == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("weight vectors") {
    const Eigen::VectorXd a4 = weight_a(4);
    REQUIRE(a4.size() == 4);
    CHECK(a4[0] == 4);
    CHECK(a4[1] == 6);
    CHECK(a4[2] == 4);
    CHECK(a4[3] == 2);
    CHECK(weight_a(1).size() == 1);
    CHECK(weight_a_prime(4)[0] == 0);
    CHECK(weight_a(4, 8).size() == 8);
    CHECK(weight_a(3) == Eigen::Vector3d(3, 4, 2));
    CHECK_THROWS_AS(weight_a(0), DomainError);
    CHECK_THROWS_AS(weight_a_prime(3), DomainError);
    CHECK(weight_a(4).dot(gamma_vec(0.3, 4)) == doctest::Approx(std::pow(4.0, 0.6)).epsilon(1e-12));
    CHECK(std::pow(4.0, 0.6) == doctest::Approx(2.2973967099940698).epsilon(1e-14));
}

TEST_CASE("self-similar identities of a_r and a'_r") {
    for (double h : h_grid()) {
        const Eigen::VectorXd g = gamma_vec(h, 64);
        const Eigen::VectorXd p = phi_vec(h, 64);
        for (long r = 2; r <= 64; r += 2) {
            const Eigen::VectorXd a = weight_a(r, 64);
            const double rg = std::pow(double(r), 2 * h), rp = std::pow(double(r), h + 0.5) * phi0(h);
            CHECK(std::abs(a.dot(g) - rg) <= 1e-10 * rg);
            CHECK(std::abs(a.dot(p) - rp) <= 1e-10 * std::abs(rp));
            // differenced weights: factors 1 - 2^{1-2H} and 1 - 2^{1/2-H}
            const Eigen::VectorXd ap = weight_a_prime(r, 64);
            const double rg2 = rg * (1 - std::pow(2.0, 1 - 2 * h));
            const double rp2 = rp * (1 - std::pow(2.0, 0.5 - h));
            CHECK(std::abs(ap.dot(g) - rg2) <= 1e-10 * std::max(rg, 1.0));
            CHECK(std::abs(ap.dot(p) - rp2) <= 1e-10 * std::max(std::abs(rp), 1.0));
        }
    }
}

TEST_CASE("N(H)") {
    CHECK(n_of_h(0.3) == 2);
    CHECK(n_of_h(0.1) == 1);
    CHECK(n_of_h(0.45) == 10);
    CHECK(n_of_h(0.7) == 2);
    CHECK(n_of_h(0.65) == 3);
    CHECK(n_of_h_boundary(0.25));
    CHECK(n_of_h_boundary(0.75));
    CHECK_FALSE(n_of_h_boundary(0.3));
    CHECK_THROWS_AS(n_of_h(0.5), DomainError);
}

TEST_CASE("lag covariance matrix") {
    const LagCovMatrix c = lag_cov_matrix(0.3, 8);
    CHECK((c.entries - c.entries.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((c.entries - c.compact).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(c.tail_bound > 0);
    CHECK(c.tail_bound < 1e-6);
    const LagCovMatrix near = lag_cov_matrix(0.4999999, 2);
    CHECK(near.entries(0, 0) == doctest::Approx(2.0).epsilon(1e-5));
    CHECK_THROWS_AS(lag_cov_matrix(0.6, 4), RegimeError);
}

TEST_CASE("lag covariance matrix against simulated fGn" * doctest::timeout(120)) {
    // covariance of sqrt(n)-scaled lagged sums of unit fGn
    const double h = 0.3;
    const long n = 4096, r = 4, m = 20000;
    const LagCovMatrix c = lag_cov_matrix(h, r);
    const StationarySampler s([h](long k) { return gamma_h(h, k); }, n, SimMethod::circulant);
    Eigen::MatrixXd samples(m, r);
    for (long i = 0; i < m; ++i) {
        Rng rng(substream_seed(77, i));
        const Eigen::VectorXd x = s.draw(rng);
        for (long j = 0; j < r; ++j) samples(i, j) = x.head(n - j).dot(x.tail(n - j)) / std::sqrt(double(n));
    }
    const Eigen::RowVectorXd mean = samples.colwise().mean();
    const Eigen::MatrixXd centered = samples.rowwise() - mean;
    for (long i = 0; i < r; ++i)
        for (long j = 0; j < r; ++j) {
            const Eigen::ArrayXd prod = centered.col(i).array() * centered.col(j).array();
            const double cov = prod.mean();
            const double se = std::sqrt((prod - cov).square().mean() / double(m));
            CHECK(std::abs(cov - c.entries(i, j)) < 4 * se);
        }
}

TEST_CASE("fGn Toeplitz matrix") {
    CHECK((fgn_toeplitz(0.5, 6) - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(fgn_toeplitz(0.7, 2)(0, 1) == doctest::Approx(0.5 * (std::pow(2.0, 1.4) - 2)).epsilon(1e-14));
    for (int i = 1; i <= 9; ++i) {
        Eigen::LLT<Eigen::MatrixXd> llt(fgn_toeplitz(0.1 * i, 256));
        CHECK(llt.info() == Eigen::Success);
    }
}

TEST_CASE("spectral density") {
    for (double h : {0.2, 0.7})
        for (double l : {0.1, 1.0, 3.0}) CHECK(spectral_density(h, l) == doctest::Approx(spectral_density(h, -l)).epsilon(1e-14));
    for (double l : {0.3, 1.5, 2.9})
        CHECK(spectral_density(0.5, l) == doctest::Approx(1 / (2 * std::numbers::pi)).epsilon(1e-4));
    CHECK(std::isinf(spectral_density(0.7, 0.0)));
    CHECK(spectral_density(0.3, 0.0) == 0.0);
    // Fourier coefficients reproduce the autocovariance
    using boost::math::quadrature::gauss_kronrod;
    for (double h : {0.3, 0.7})
        for (long r : {0L, 1L, 3L}) {
            auto f = [&](double l) { return 2 * spectral_density(h, l) * std::cos(l * double(r)); };
            const double val = gauss_kronrod<double, 61>::integrate(f, 0.0, std::numbers::pi, 15, 1e-11);
            CHECK(std::abs(val - gamma_h(h, r)) < 1e-4);
        }
}

TEST_CASE("mixed covariance") {
    const ModelTheta th{0.3, 1, 0.5, 1};
    const Eigen::MatrixXd s = mixed_cov(th, 4);
    const double h = 0.25;
    const double direct = 1.0 * h + 1.0 * std::pow(h, 0.6) + 0.5 * (2 / std::tgamma(1.8)) * std::pow(h, 0.8);
    CHECK(s(0, 0) == doctest::Approx(direct).epsilon(1e-13));
    CHECK(s(0, 0) == doctest::Approx(increment_variance(th, h)).epsilon(1e-13));
    CHECK(direct == doctest::Approx(1.0394547165613863).epsilon(1e-12));
    const Eigen::MatrixXd z = mixed_cov(ModelTheta{0.3, 2, 0, 0}, 5);
    CHECK((z - 0.4 * Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(mixed_cov(ModelTheta{0.3, 1, 2, 1}, 4), DomainError);
}

TEST_CASE("kernel integral identities") {
    for (double h : {0.2, 0.3, 0.7}) {
        CHECK(std::abs(g_increment_inner(h, 1, 2) / gamma_h(h, 1) - 1) < 1e-6);
        CHECK(std::abs(g_increment_inner(h, 1, 4) / gamma_h(h, 3) - 1) < 1e-6);
        const double k = k_h(h);
        CHECK(g_increment_sq(h, 1) == doctest::Approx(1 / (k * k * 2 * h)).epsilon(1e-8));
    }
    CHECK(std::abs(g_increment_inner(0.5, 1, 3)) < 1e-8);
}

TEST_CASE("kernel table") {
    const KernelTable t = kernel_table(0.3, 5);
    CHECK(t.gamma.size() == 5);
    CHECK(t.phi[0] == doctest::Approx(phi0(0.3)));
    const auto j = to_json(t);
    CHECK(j["gamma"].size() == 5);
    CHECK_THROWS_AS(kernel_table(1.2, 5), DomainError);
}
