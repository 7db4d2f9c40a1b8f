#pragma once

#include <json.hpp>

namespace msm {

// theta = (H, sigma^2, Lambda, Pi) of the correlated mixed fractional Brownian motion.
struct ModelTheta {
    double h = 0.3;
    double sigma_sq = 1.0;
    double lambda_cov = 0.0;
    double pi_total = 0.0;

    double sigma() const;
    // rho >= 0 carries the magnitude of the covolatility, lambda_corr its sign.
    double rho() const;
    double rho_prime() const;
    double lambda_corr() const;

    static ModelTheta from_factors(double h, double sigma, double rho, double rho_prime, double lambda_corr);

    // Accepts the closure cases Lambda = 0 and Pi = 0 used by the samplers.
    void validate() const;
    // Strict open parameter set: H != 1/2, Lambda != 0, Pi > 0, Lambda^2 < sigma^2 Pi.
    bool in_parameter_set() const;
};

double hbar(double h);
// b(H) = 2 / Gamma(H + 3/2)
double b_coef(double h);

nlohmann::ordered_json to_json(const ModelTheta& t);
ModelTheta theta_from_json(const nlohmann::json& j);

}  // namespace msm
