#pragma once

#include <Eigen/Dense>

#include "entropic/market.hpp"
#include "entropic/moments.hpp"
#include "entropic/scenario.hpp"

namespace entropic {

/// Forecast/empirical measure pair over a universal scenario measure z.
///
/// The forecast measure has kernel A against z; the empirical measure has
/// kernel A + eps * D with D = S * A + B, where S rescales anticipated
/// events and B appends unanticipated ones (A B = 0 pointwise). Scenarios
/// with A = 0 but B != 0 are the black-swan paths: present empirically,
/// assigned zero forecast mass.
struct HedgeErrorModel {
    ScenarioMeasure universal;     ///< z
    Eigen::VectorXd forecast_kernel;   ///< A >= 0, E_z[A] = 1
    double epsilon = 0.0;              ///< deviation scale
    Eigen::VectorXd anticipated;       ///< S, supported where A > 0
    Eigen::VectorXd unanticipated;     ///< B, with A B = 0 pointwise

    Eigen::VectorXd deviation() const; ///< D = S A + B
    Eigen::VectorXd forecast_weights() const;  ///< z A
    Eigen::VectorXd empirical_weights() const; ///< z (A + eps D)

    /// E_z[A] = 1, E_z[A + eps D] = 1, A + eps D >= 0, A B = 0, all within 1e-12.
    void validate() const;
};

struct HedgePair {
    HedgeResult forecast;
    HedgeResult empirical;
};

/// Minimum-variance hedges under the forecast and empirical measures.
HedgePair forecast_and_empirical_hedges(const HedgeErrorModel& model, const MarketSlice& slice,
                                        const Eigen::VectorXd& derivative_end,
                                        double derivative_start);

struct EmpiricalPerformance {
    double market_mean = 0.0;  ///< M_a^e - V_p^e^{-1} M_p^e . C_pa^e
    double model_mean = 0.0;   ///< (beta^e - beta) . M_p^e
    double market_variance = 0.0; ///< V_a^e - V_p^e^{-1} C_pa^e . C_pa^e
    double model_variance = 0.0;  ///< (beta^e - beta) . V_p^e (beta^e - beta)
    double total_mean() const { return market_mean + model_mean; }
    double total_variance() const { return market_variance + model_variance; }
};

/// Empirical mean/variance of the executed hedge, split into the market
/// component (optimal in hindsight) and the model component charged to the
/// sub-optimality of the executed weights.
EmpiricalPerformance empirical_performance(const HedgeErrorModel& model, const MarketSlice& slice,
                                           const Eigen::VectorXd& derivative_end,
                                           double derivative_start,
                                           const Eigen::VectorXd& executed_beta);

struct HedgeErrorExpansion {
    Eigen::VectorXd omega;    ///< z . eps D (R_p - E_s[R_p]) (R_a - beta_s . R_p)
    Eigen::VectorXd omega_a;  ///< anticipated part, under the forecast measure
    Eigen::VectorXd omega_b;  ///< unanticipated part, masked to B != 0
    Eigen::VectorXd predicted_difference; ///< V_p^s^{-1} Omega
    Eigen::VectorXd exact_difference;     ///< beta^e - beta^s
};

/// First-order expansion of the hedge gap: beta^e - beta^s =
/// V_p^s^{-1} Omega + O(eps^2), with the exact split Omega = Omega_a + Omega_b.
HedgeErrorExpansion first_order_hedge_error(const HedgeErrorModel& model, const MarketSlice& slice,
                                            const Eigen::VectorXd& derivative_end,
                                            double derivative_start);

} // namespace entropic
