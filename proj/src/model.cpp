#include "msm/model.hpp"

#include <cmath>

#include "msm/errors.hpp"

namespace msm {

double ModelTheta::sigma() const { return std::sqrt(sigma_sq); }

double ModelTheta::rho() const { return std::abs(lambda_cov) / sigma(); }

double ModelTheta::rho_prime() const {
    const double r = rho();
    return std::sqrt(std::max(pi_total - r * r, 0.0));
}

double ModelTheta::lambda_corr() const {
    if (lambda_cov > 0) return 1.0;
    if (lambda_cov < 0) return -1.0;
    return 0.0;
}

ModelTheta ModelTheta::from_factors(double h, double sigma, double rho, double rho_prime, double lambda_corr) {
    if (!(sigma > 0)) throw DomainError("sigma must be positive");
    if (lambda_corr < -1 || lambda_corr > 1) throw DomainError("lambda must lie in [-1, 1]");
    ModelTheta t{h, sigma * sigma, lambda_corr * rho * sigma, rho * rho + rho_prime * rho_prime};
    t.validate();
    return t;
}

void ModelTheta::validate() const {
    if (!(h > 0 && h < 1)) throw DomainError("H must lie in (0,1), got " + std::to_string(h));
    if (!(sigma_sq > 0) || !std::isfinite(sigma_sq)) throw DomainError("sigma^2 must be positive");
    if (!(pi_total >= 0) || !std::isfinite(pi_total)) throw DomainError("Pi must be nonnegative");
    if (!std::isfinite(lambda_cov)) throw DomainError("Lambda must be finite");
    if (lambda_cov != 0 && !(lambda_cov * lambda_cov <= sigma_sq * pi_total))
        throw DomainError("parameter set violated: Lambda^2 must not exceed sigma^2 * Pi");
}

bool ModelTheta::in_parameter_set() const {
    return h > 0 && h < 1 && h != 0.5 && sigma_sq > 0 && lambda_cov != 0 && pi_total > 0 &&
           lambda_cov * lambda_cov < sigma_sq * pi_total && std::isfinite(sigma_sq) && std::isfinite(pi_total);
}

double hbar(double h) { return 0.5 * (h + 0.5); }

double b_coef(double h) { return 2.0 / std::tgamma(h + 1.5); }

nlohmann::ordered_json to_json(const ModelTheta& t) {
    nlohmann::ordered_json j;
    j["h"] = t.h;
    j["sigma_sq"] = t.sigma_sq;
    j["lambda"] = t.lambda_cov;
    j["pi"] = t.pi_total;
    return j;
}

ModelTheta theta_from_json(const nlohmann::json& j) {
    ModelTheta t;
    if (j.is_array()) {
        if (j.size() != 4) throw DomainError("theta array must have 4 entries (H, sigma^2, Lambda, Pi)");
        t = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    } else {
        t = {j.at("h").get<double>(), j.at("sigma_sq").get<double>(), j.at("lambda").get<double>(),
             j.at("pi").get<double>()};
    }
    t.validate();
    return t;
}

}  // namespace msm
