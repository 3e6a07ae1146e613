#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "entropic/market.hpp"
#include "entropic/scenario.hpp"

namespace entropic {

enum class KernelKind { linear, exponential };

/// Radon-Nikodym kernel of a tilted measure relative to the economic
/// measure: per-scenario values W with E[W] = 1.
struct TiltKernel {
    Eigen::VectorXd alpha;      ///< tilt weights, one per underlying
    Eigen::VectorXd values;     ///< W per scenario
    KernelKind kind = KernelKind::exponential;
    bool has_negative = false;  ///< linear kernels only; exponential is positive

    /// Tilted scenario weights z_i W_i (sum to one by normalization of W).
    Eigen::VectorXd tilted_weights(const ScenarioMeasure& measure) const;

    /// Relative entropy E_z[W log W] of the tilted measure from `measure`.
    double relative_entropy(const ScenarioMeasure& measure) const;
};

/// Linear kernel W = 1 - alpha . (R_p - E[R_p]). Normalized exactly by
/// construction but not positive: large moves can push W below zero, and
/// the negativity flag records that.
TiltKernel linear_kernel(const ScenarioMeasure& measure, const MarketSlice& slice,
                         const Eigen::VectorXd& alpha);

/// Exponential kernel W = exp(-alpha . R_p) / E[exp(-alpha . R_p)],
/// strictly positive. Exponents are shifted by their maximum before
/// exponentiation; |alpha . R_p| beyond 700 is rejected as a magnitude
/// error suggesting rescaled inputs.
TiltKernel exponential_kernel(const ScenarioMeasure& measure, const MarketSlice& slice,
                              const Eigen::VectorXd& alpha);

struct CalibrationControls {
    int max_iter = 50;
    double tol = 1e-10;
};

struct CalibrationResult {
    TiltKernel kernel;
    int iterations = 0;
    double residual_norm = 0.0;            ///< ||E_tilted[R_p]|| at exit
    double kl = 0.0;                       ///< relative entropy of the calibrated measure
    std::vector<double> residual_history;  ///< gradient norms per iterate
};

/// Newton-Raphson mark-to-market calibration of the exponential kernel:
/// alpha <- alpha + V_p[alpha]^{-1} M_p[alpha], starting from alpha = 0,
/// with step halving (up to 20 times) whenever a full step increases the
/// gradient norm.
CalibrationResult calibrate(const ScenarioMeasure& measure, const MarketSlice& slice,
                            const CalibrationControls& controls = {});

/// Fair derivative start price under a calibrated kernel:
/// a0/b0 = E[W (b1/u1)(a1/b1)] / E[W (b1/u1)].
double fair_price_one_period(const ScenarioMeasure& measure, const MarketSlice& slice,
                             const Eigen::VectorXd& derivative_end, const TiltKernel& kernel,
                             double calibration_tol = 1e-8);

struct EntropyCertificate {
    bool pass = false;
    double kernel_kl = 0.0;
    double worst_improvement = 0.0;      ///< most negative perturbed-KL minus kernel-KL
    double stationarity_residual = 0.0;  ///< max | log W + const + alpha . R_p |
    int trials = 0;
    std::optional<Eigen::VectorXd> counterexample; ///< perturbed weights that beat the kernel
};

/// Randomized minimality certificate: perturbations of the kernel projected
/// onto the calibration constraint set {E[W]=1, E[W R_p]=0} must not reduce
/// the relative entropy (within 1e-12), and the stationarity identity
/// log W + const + alpha . R_p = 0 must hold pointwise within 1e-9.
EntropyCertificate max_entropy_certificate(const ScenarioMeasure& measure,
                                           const MarketSlice& slice, const TiltKernel& kernel,
                                           int trials, std::uint64_t seed);

} // namespace entropic
