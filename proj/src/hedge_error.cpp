#include "entropic/hedge_error.hpp"

#include <cmath>
#include <string>

#include "entropic/errors.hpp"

namespace entropic {

namespace {

constexpr double kKernelTol = 1e-12;

ReturnMoments moments_under(const Eigen::VectorXd& weights, const HedgeErrorModel& model,
                            const MarketSlice& slice, const Eigen::VectorXd& a1, double a0,
                            const char* which) {
    try {
        return moments_from_measure(model.universal.reweighted(weights), slice, a1, a0);
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("under the ") + which + " measure: " + e.what());
    }
}

HedgeResult hedge_under(const Eigen::VectorXd& weights, const HedgeErrorModel& model,
                        const MarketSlice& slice, const Eigen::VectorXd& a1, double a0,
                        const char* which) {
    try {
        return hedge_weights(moments_under(weights, model, slice, a1, a0, which));
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("under the ") + which + " measure: " + e.what());
    }
}

} // namespace

Eigen::VectorXd HedgeErrorModel::deviation() const {
    return anticipated.cwiseProduct(forecast_kernel) + unanticipated;
}

Eigen::VectorXd HedgeErrorModel::forecast_weights() const {
    return universal.weights().cwiseProduct(forecast_kernel);
}

Eigen::VectorXd HedgeErrorModel::empirical_weights() const {
    return universal.weights().cwiseProduct(forecast_kernel + epsilon * deviation());
}

void HedgeErrorModel::validate() const {
    const int n = universal.size();
    if (forecast_kernel.size() != n || anticipated.size() != n || unanticipated.size() != n) {
        throw_input("HedgeErrorModel: kernel vectors must have one value per scenario");
    }
    if (forecast_kernel.minCoeff() < 0.0) throw_input("HedgeErrorModel: forecast kernel negative");
    const double ea = universal.expect(forecast_kernel);
    if (std::abs(ea - 1.0) > kKernelTol) {
        throw_input("HedgeErrorModel: E_z[A] = " + std::to_string(ea) + ", expected 1");
    }
    const Eigen::VectorXd empirical = forecast_kernel + epsilon * deviation();
    const double ee = universal.expect(empirical);
    if (std::abs(ee - 1.0) > kKernelTol) {
        throw_input("HedgeErrorModel: E_z[A + eps D] = " + std::to_string(ee) + ", expected 1");
    }
    if (empirical.minCoeff() < -kKernelTol) {
        throw_input("HedgeErrorModel: empirical kernel A + eps D has negative values");
    }
    for (int i = 0; i < n; ++i) {
        if (forecast_kernel[i] * unanticipated[i] != 0.0) {
            throw_input("HedgeErrorModel: A B != 0 at scenario '" + universal.ids()[i] + "'");
        }
    }
}

HedgePair forecast_and_empirical_hedges(const HedgeErrorModel& model, const MarketSlice& slice,
                                        const Eigen::VectorXd& derivative_end,
                                        double derivative_start) {
    model.validate();
    HedgePair pair;
    pair.forecast = hedge_under(model.forecast_weights(), model, slice, derivative_end,
                                derivative_start, "forecast");
    pair.empirical = hedge_under(model.empirical_weights(), model, slice, derivative_end,
                                 derivative_start, "empirical");
    return pair;
}

EmpiricalPerformance empirical_performance(const HedgeErrorModel& model, const MarketSlice& slice,
                                           const Eigen::VectorXd& derivative_end,
                                           double derivative_start,
                                           const Eigen::VectorXd& executed_beta) {
    model.validate();
    const ReturnMoments empirical = moments_under(model.empirical_weights(), model, slice,
                                                  derivative_end, derivative_start, "empirical");
    const HedgeResult optimal = hedge_weights(empirical);
    const Eigen::VectorXd gap = optimal.beta - executed_beta;

    EmpiricalPerformance perf;
    perf.market_mean = optimal.residual_mean;
    perf.model_mean = gap.dot(empirical.mean_p);
    perf.market_variance = optimal.residual_variance;
    perf.model_variance = gap.dot(empirical.cov_p * gap);
    return perf;
}

HedgeErrorExpansion first_order_hedge_error(const HedgeErrorModel& model, const MarketSlice& slice,
                                            const Eigen::VectorXd& derivative_end,
                                            double derivative_start) {
    model.validate();
    const HedgePair hedges =
        forecast_and_empirical_hedges(model, slice, derivative_end, derivative_start);

    const Eigen::MatrixXd rp = normalized_return(slice);
    const Eigen::VectorXd ra = derivative_return(slice, derivative_start, derivative_end);
    const Eigen::VectorXd& z = model.universal.weights();
    const Eigen::VectorXd forecast = model.forecast_weights();

    const Eigen::VectorXd mean_s = rp.transpose() * forecast; // E_s[R_p]
    const Eigen::VectorXd residual = ra - rp * hedges.forecast.beta;

    const int n_assets = slice.assets();
    HedgeErrorExpansion expansion;
    expansion.omega = Eigen::VectorXd::Zero(n_assets);
    expansion.omega_a = Eigen::VectorXd::Zero(n_assets);
    expansion.omega_b = Eigen::VectorXd::Zero(n_assets);

    const Eigen::VectorXd deviation = model.deviation();
    for (int i = 0; i < model.universal.size(); ++i) {
        const Eigen::VectorXd centered = rp.row(i).transpose() - mean_s;
        const Eigen::VectorXd term = centered * residual[i];
        expansion.omega += z[i] * model.epsilon * deviation[i] * term;
        expansion.omega_a +=
            z[i] * model.forecast_kernel[i] * model.epsilon * model.anticipated[i] * term;
        if (model.unanticipated[i] != 0.0) {
            // On B != 0 the forecast kernel vanishes, so the empirical
            // kernel reduces to eps B there.
            expansion.omega_b +=
                z[i] * (model.forecast_kernel[i] + model.epsilon * deviation[i]) * term;
        }
    }

    const ReturnMoments forecast_moments = moments_under(forecast, model, slice, derivative_end,
                                                         derivative_start, "forecast");
    Eigen::LDLT<Eigen::MatrixXd> ldlt(forecast_moments.cov_p);
    expansion.predicted_difference = ldlt.solve(expansion.omega);
    expansion.exact_difference = hedges.empirical.beta - hedges.forecast.beta;
    return expansion;
}

} // namespace entropic
