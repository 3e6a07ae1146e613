#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

namespace entropic {

/// One atom of a finite jump catalogue: jump vector and arrival rate.
struct JumpEntry {
    Eigen::VectorXd jump;
    double rate = 0.0;
};

/// Levy-Khintchine volatility parameters (mu, nu, phi) with the jump
/// measure restricted to a finite catalogue (compound-Poisson class), so
/// every integral is an exact finite sum.
struct LevyTriple {
    Eigen::VectorXd drift;          ///< mu, per unit time
    Eigen::MatrixXd covariance;     ///< nu, symmetric PSD, per unit time
    std::vector<JumpEntry> jumps;   ///< phi

    int dim() const { return static_cast<int>(drift.size()); }
    void validate() const;

    double total_frequency() const;   ///< Phi
    double max_jump_magnitude() const; ///< J, sup-norm over the catalogue

    /// Mean rate of the increment, drift plus the jump first moment.
    Eigen::VectorXd mean_rate() const;
    /// Covariance rate of the increment, nu plus the jump second moment.
    Eigen::MatrixXd covariance_rate() const;
};

/// log E[exp(k . ds)] / dt = k.mu + (1/2) k.nu k + sum (e^{k.j} - 1) phi[j].
double characteristic_exponent(const LevyTriple& triple, const Eigen::VectorXd& k);

/// Local data of a C^2 function f[t, s] needed by the Ito lemma: time
/// derivative, gradient, Hessian, and the jump difference f[s+j] - f[s].
struct FunctionJet {
    double time_derivative = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
    std::function<double(const Eigen::VectorXd& jump)> jump_difference;
};

/// Ito lemma in Levy-Khintchine form: the characteristic exponent of the
/// derived process df[t, s] at conjugate value k.
double ito_exponent(const LevyTriple& triple, const FunctionJet& jet, double k);

/// Joint dynamics of the funding ratio f, underlying price ratios s, and
/// derivative price ratio c under common funding q = b = f u.
struct ConvexityModel {
    double funding_ratio = 1.0; ///< f

    double mu_f = 0.0;
    Eigen::VectorXd mu_s;
    double mu_c = 0.0;

    double nu_f = 0.0;          ///< var rate of df/f
    Eigen::VectorXd nu_fs;      ///< cov rate of df/f with ds
    double nu_fc = 0.0;         ///< cov rate of df/f with dc
    Eigen::MatrixXd nu_s;       ///< cov rate of ds
    Eigen::VectorXd nu_sc;      ///< cov rate of ds with dc
    double nu_c = 0.0;          ///< var rate of dc

    struct Jump {
        double jf = 0.0;
        Eigen::VectorXd js;
        double jc = 0.0;
        double rate = 0.0;
    };
    std::vector<Jump> jumps;

    int assets() const { return static_cast<int>(mu_s.size()); }
    void validate() const;

    /// The full (1 + n + 1)-dimensional LevyTriple over (df/f, ds, dc).
    LevyTriple joint_triple() const;
};

/// Measure-tilt adjustment of the volatility parameters:
/// mu_s[a] = mu_s - nu_s f a, mu_c[a] = mu_c - f a . nu_sc,
/// phi[a] = exp(-f (1+jf) a . js) phi. Covariances are unchanged.
struct TiltedParameters {
    Eigen::VectorXd mu_s;
    double mu_c = 0.0;
    std::vector<ConvexityModel::Jump> jumps;
};
TiltedParameters tilt_parameters(const ConvexityModel& model, const Eigen::VectorXd& alpha);

/// Mean, variance and covariance rates of the normalized returns in the
/// tilted measure.
struct MomentRates {
    Eigen::VectorXd mean_s;  ///< Mdot_s[a]
    double mean_c = 0.0;     ///< Mdot_c[a]
    Eigen::MatrixXd var_s;   ///< Vdot_s[a]
    double var_c = 0.0;      ///< Vdot_c[a]
    Eigen::VectorXd cov_sc;  ///< Cdot_sc[a]
};
MomentRates moment_rates(const ConvexityModel& model, const Eigen::VectorXd& alpha);

struct HedgeRate {
    Eigen::VectorXd beta;                ///< Vdot_s[a]^{-1} Cdot_sc[a]
    double residual_variance_rate = 0.0; ///< f^2 (Vdot_c - Vdot_s^{-1} Cdot_sc . Cdot_sc)
};
HedgeRate optimal_hedge_rate(const ConvexityModel& model, const Eigen::VectorXd& alpha);

/// Small-jump expansion of the optimal hedge: the continuous delta
/// nu_s^{-1} nu_sc and the jump correction gamma, accurate to O((J^2 Phi)^2).
struct DeltaGamma {
    Eigen::VectorXd delta;
    Eigen::VectorXd gamma;
};
DeltaGamma hedge_expansion(const ConvexityModel& model, const Eigen::VectorXd& alpha);

/// Residuals of the continuous-settlement fair-pricing system at given alpha.
struct DriftResiduals {
    Eigen::VectorXd mean_s;
    double mean_c = 0.0;
};
DriftResiduals drift_residuals(const ConvexityModel& model, const Eigen::VectorXd& alpha);

struct DriftSolution {
    Eigen::VectorXd alpha;        ///< root of Mdot_s[alpha] = 0
    double pricing_residual = 0.0;///< Mdot_c[alpha], the reported pricing condition
    int iterations = 0;
    double residual_norm = 0.0;
};

struct DriftSolveControls {
    int max_iter = 50;
    double tol = 1e-12;
};

/// Solves the calibration constraint Mdot_s[alpha] = 0 by dampened Newton
/// (exact Jacobian -f Vdot_s[alpha]) and reports the derivative drift
/// Mdot_c[alpha] at the root.
DriftSolution solve_drift_conditions(const ConvexityModel& model,
                                     const DriftSolveControls& controls = {});

/// Simulated increment statistics from the Euler + compound-Poisson scheme.
struct IncrementStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    Eigen::VectorXd mean_std_error;
    long paths = 0;
};

/// Monte Carlo sampler of one-step increments over dt. Per-path streams are
/// derived from the root seed, and partial sums reduce in fixed chunk
/// order, so results are bit-identical for any thread count.
IncrementStats simulate_increments(const LevyTriple& triple, double dt, long paths,
                                   std::uint64_t seed, int threads = 1);

} // namespace entropic
