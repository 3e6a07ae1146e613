#pragma once

#include <functional>
#include <string>
#include <vector>

namespace entropic {

enum class ModelKind { bsm, heston, sabr, custom };

std::string to_string(ModelKind kind);

/// Coefficient evaluator over (t, s, sigma). Models are expressed in the
/// dimensionless ratio coordinates s = p/q, with a single volatility state.
using Coefficient = std::function<double(double t, double s, double sigma)>;

/// One atom of the (j_s, j_sigma) jump catalogue; sizes and rate may
/// depend on the state.
struct StateJump {
    Coefficient size_s;     ///< absolute jump in s
    Coefficient size_sigma; ///< absolute jump in sigma
    Coefficient rate;       ///< arrival rate, >= 0
};

/// Two-state stochastic-volatility dynamics under the economic measure.
struct StochVolModel {
    ModelKind kind = ModelKind::custom;
    Coefficient mu_s, nu_s;       ///< drift and variance rates of ds
    Coefficient mu_sigma, nu_sigma; ///< drift and variance rates of dsigma
    Coefficient nu_s_sigma;       ///< covariance rate of (ds, dsigma)
    std::vector<StateJump> jumps;
    bool has_sigma_state = true;  ///< false collapses the PIDE to one dimension

    /// Lognormal price diffusion with constant volatility and relative
    /// jumps j (s moves to s(1+j)); sigma is not a state.
    static StochVolModel bsm(double mu, double sigma,
                             std::vector<std::pair<double, double>> relative_jumps = {});

    /// Square-root variance process correlated with the price.
    static StochVolModel heston(double mu, double kappa, double theta, double xi, double rho);

    /// Constant elasticity of variance with lognormal volatility.
    static StochVolModel sabr(double alpha_vol, double beta_cev, double rho);

    /// PSD of the instantaneous joint covariance at one state, plus
    /// finiteness of all coefficients; used to spot-check parametrizations.
    void check_state(double t, double s, double sigma) const;
};

struct AlphaSolve {
    double alpha = 0.0;
    int iterations = 0;
    double residual = 0.0;
};

/// Solves the scalar calibration constraint at one state:
/// 0 = mu_s - alpha nu_s + sum j_s exp(-alpha j_s) rate.
/// With a continuous price diffusion the root is mu_s / nu_s exactly.
AlphaSolve calibration_alpha(const StochVolModel& model, double t, double s, double sigma,
                             double tol = 1e-12, int max_iter = 100);

} // namespace entropic
