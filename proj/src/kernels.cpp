#include "entropic/kernels.hpp"

#include <cmath>
#include <random>
#include <string>

#include "entropic/errors.hpp"
#include "entropic/moments.hpp"

namespace entropic {

namespace {

constexpr double kExpBound = 700.0;

/// Mean and covariance of the underlying returns under tilted weights.
void tilted_moments(const Eigen::MatrixXd& rp, const Eigen::VectorXd& weights,
                    Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
    const int n = static_cast<int>(rp.cols());
    mean = rp.transpose() * weights;
    cov = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < rp.rows(); ++i) {
        const Eigen::VectorXd d = rp.row(i).transpose() - mean;
        cov += weights[i] * d * d.transpose();
    }
    cov = (0.5 * (cov + cov.transpose())).eval();
}

Eigen::VectorXd exponential_values(const ScenarioMeasure& measure, const Eigen::MatrixXd& rp,
                                   const Eigen::VectorXd& alpha) {
    Eigen::VectorXd exponent = -(rp * alpha);
    if (exponent.cwiseAbs().maxCoeff() > kExpBound) {
        throw_numeric("exponential_kernel: |alpha . R_p| exceeds 700; rescale the returns "
                      "or reduce alpha");
    }
    const double shift = exponent.maxCoeff();
    Eigen::VectorXd w = (exponent.array() - shift).exp();
    const double norm = measure.weights().dot(w);
    if (!(norm > 0.0)) throw_numeric("exponential_kernel: degenerate normalization");
    return w / norm;
}

} // namespace

Eigen::VectorXd TiltKernel::tilted_weights(const ScenarioMeasure& measure) const {
    return measure.weights().cwiseProduct(values);
}

double TiltKernel::relative_entropy(const ScenarioMeasure& measure) const {
    return kl_divergence(tilted_weights(measure), measure.weights());
}

TiltKernel linear_kernel(const ScenarioMeasure& measure, const MarketSlice& slice,
                         const Eigen::VectorXd& alpha) {
    const Eigen::MatrixXd rp = normalized_return(slice);
    if (alpha.size() != rp.cols()) throw_input("linear_kernel: alpha has wrong dimension");
    if (measure.size() != slice.scenarios()) {
        throw_input("linear_kernel: measure and slice scenario counts differ");
    }
    const Eigen::VectorXd mean = rp.transpose() * measure.weights();
    TiltKernel kernel;
    kernel.kind = KernelKind::linear;
    kernel.alpha = alpha;
    kernel.values = Eigen::VectorXd::Ones(measure.size()) - (rp.rowwise() - mean.transpose()) * alpha;
    kernel.has_negative = kernel.values.minCoeff() < 0.0;
    return kernel;
}

TiltKernel exponential_kernel(const ScenarioMeasure& measure, const MarketSlice& slice,
                              const Eigen::VectorXd& alpha) {
    const Eigen::MatrixXd rp = normalized_return(slice);
    if (alpha.size() != rp.cols()) throw_input("exponential_kernel: alpha has wrong dimension");
    if (measure.size() != slice.scenarios()) {
        throw_input("exponential_kernel: measure and slice scenario counts differ");
    }
    TiltKernel kernel;
    kernel.kind = KernelKind::exponential;
    kernel.alpha = alpha;
    kernel.values = exponential_values(measure, rp, alpha);
    kernel.has_negative = false;
    return kernel;
}

CalibrationResult calibrate(const ScenarioMeasure& measure, const MarketSlice& slice,
                            const CalibrationControls& controls) {
    const Eigen::MatrixXd rp = normalized_return(slice);
    const int n = static_cast<int>(rp.cols());

    {
        const Eigen::VectorXd a0 = Eigen::VectorXd::Zero(slice.scenarios());
        ReturnMoments base = moments_from_measure(measure, slice, a0, 0.0);
        const ArbitrageCheck arb = check_no_arbitrage(base);
        if (!arb.pass) {
            throw_numeric("calibrate: economic measure admits arbitrage (zero-variance "
                          "portfolio with nonzero mean); calibration constraint infeasible");
        }
    }

    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    CalibrationResult result;

    auto weights_for = [&](const Eigen::VectorXd& a) -> Eigen::VectorXd {
        return measure.weights().cwiseProduct(exponential_values(measure, rp, a));
    };

    Eigen::VectorXd w = weights_for(alpha);
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    tilted_moments(rp, w, mean, cov);
    double norm = mean.norm();
    result.residual_history.push_back(norm);

    int iter = 0;
    while (norm > controls.tol && iter < controls.max_iter) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
        if (ldlt.info() != Eigen::Success || ldlt.isNegative() ||
            (ldlt.vectorD().array().abs() < 1e-300).any()) {
            throw_numeric("calibrate: tilted covariance V_p[alpha] singular at iteration " +
                          std::to_string(iter));
        }
        const Eigen::VectorXd step = ldlt.solve(mean);

        // Step halving keeps the iteration inside the Newton basin.
        double scale = 1.0;
        Eigen::VectorXd next_alpha;
        Eigen::VectorXd next_w;
        Eigen::VectorXd next_mean;
        Eigen::MatrixXd next_cov;
        double next_norm = norm;
        for (int halving = 0; halving <= 20; ++halving) {
            next_alpha = alpha + scale * step;
            next_w = weights_for(next_alpha);
            tilted_moments(rp, next_w, next_mean, next_cov);
            next_norm = next_mean.norm();
            if (next_norm < norm || halving == 20) break;
            scale *= 0.5;
        }
        if (!(next_norm < norm)) {
            throw_numeric("calibrate: no descent after 20 step halvings; gradient norm " +
                          std::to_string(norm));
        }
        alpha = next_alpha;
        w = next_w;
        mean = next_mean;
        cov = next_cov;
        norm = next_norm;
        result.residual_history.push_back(norm);
        ++iter;
    }

    if (norm > controls.tol) {
        throw_numeric("calibrate: Newton did not converge in " + std::to_string(controls.max_iter) +
                      " iterations; final gradient norm " + std::to_string(norm));
    }

    result.kernel = exponential_kernel(measure, slice, alpha);
    result.iterations = iter;
    result.residual_norm = norm;
    result.kl = result.kernel.relative_entropy(measure);
    return result;
}

double fair_price_one_period(const ScenarioMeasure& measure, const MarketSlice& slice,
                             const Eigen::VectorXd& derivative_end, const TiltKernel& kernel,
                             double calibration_tol) {
    const Eigen::MatrixXd rp = normalized_return(slice);
    const Eigen::VectorXd tilted = kernel.tilted_weights(measure);
    const double drift = (rp.transpose() * tilted).norm();
    if (drift > calibration_tol) {
        throw_numeric("fair_price_one_period: kernel not calibrated (tilted underlying mean " +
                      std::to_string(drift) + " exceeds " + std::to_string(calibration_tol) + ")");
    }
    if (derivative_end.size() != slice.scenarios()) {
        throw_input("fair_price_one_period: derivative values must be per scenario");
    }
    double numer = 0.0;
    double denom = 0.0;
    for (int i = 0; i < slice.scenarios(); ++i) {
        const double funding_kernel = tilted[i] * slice.b1[i] / slice.u1[i];
        numer += funding_kernel * derivative_end[i] / slice.b1[i];
        denom += funding_kernel;
    }
    if (!(denom > 0.0)) throw_numeric("fair_price_one_period: degenerate funding kernel");
    return slice.b0 * numer / denom;
}

EntropyCertificate max_entropy_certificate(const ScenarioMeasure& measure,
                                           const MarketSlice& slice, const TiltKernel& kernel,
                                           int trials, std::uint64_t seed) {
    const Eigen::MatrixXd rp = normalized_return(slice);
    const int n_scen = measure.size();
    const int n_assets = static_cast<int>(rp.cols());
    const Eigen::VectorXd& z = measure.weights();

    EntropyCertificate cert;
    cert.kernel_kl = kernel.relative_entropy(measure);
    cert.trials = trials;

    // Stationarity: log W + const + alpha . R_p vanishes pointwise. The
    // constant is the entropy-normalization multiplier; estimate it as the
    // weighted mean and check the residual spread.
    {
        Eigen::VectorXd residual(n_scen);
        for (int i = 0; i < n_scen; ++i) {
            residual[i] = std::log(kernel.values[i]) + kernel.alpha.dot(rp.row(i));
        }
        const double constant = z.dot(residual);
        cert.stationarity_residual = (residual.array() - constant).abs().maxCoeff();
    }

    // Constraint gradients in kernel coordinates: rows of [z; z * R_p].
    Eigen::MatrixXd constraints(n_assets + 1, n_scen);
    constraints.row(0) = z.transpose();
    for (int a = 0; a < n_assets; ++a) {
        constraints.row(a + 1) = z.cwiseProduct(rp.col(a)).transpose();
    }
    const Eigen::MatrixXd gram = constraints * constraints.transpose();
    Eigen::LDLT<Eigen::MatrixXd> gram_ldlt(gram);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double steps[] = {1e-2, 1e-3};

    cert.worst_improvement = 0.0;
    for (int t = 0; t < trials; ++t) {
        Eigen::VectorXd direction(n_scen);
        for (int i = 0; i < n_scen; ++i) direction[i] = gauss(rng);
        // Orthogonal projection onto the tangent space of the affine
        // constraint set.
        const Eigen::VectorXd coeffs = gram_ldlt.solve(constraints * direction);
        direction -= constraints.transpose() * coeffs;
        const double dnorm = direction.norm();
        if (dnorm < 1e-14) continue;
        direction /= dnorm;

        for (double step : steps) {
            const Eigen::VectorXd perturbed = kernel.values + step * direction;
            if (perturbed.minCoeff() <= 0.0) continue; // outside the feasible cone
            const double kl = kl_divergence(z.cwiseProduct(perturbed), z);
            const double improvement = cert.kernel_kl - kl;
            if (improvement > cert.worst_improvement) {
                cert.worst_improvement = improvement;
                cert.counterexample = perturbed;
            }
        }
    }

    cert.pass = cert.worst_improvement <= 1e-12 && cert.stationarity_residual <= 1e-9;
    return cert;
}

} // namespace entropic
