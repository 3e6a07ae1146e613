#include "entropic/levy.hpp"

#include <cmath>
#include <string>

#include "entropic/errors.hpp"
#include "entropic/rng.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace entropic {

namespace {

constexpr double kExpBound = 700.0;
constexpr double kPsdTol = -1e-10;

void check_symmetric_psd(const Eigen::MatrixXd& m, const std::string& what) {
    if (m.rows() != m.cols()) throw_input(what + " must be square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw_input(what + " must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < kPsdTol * scale) {
        throw_input(what + " is not positive semidefinite");
    }
}

double guarded_exp(double x, const char* where) {
    if (x > kExpBound) {
        throw_numeric(std::string(where) + ": exponent " + std::to_string(x) +
                      " exceeds 700; rescale the inputs");
    }
    return std::exp(x);
}

/// PSD square root factor L with L L^t = m.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * roots.asDiagonal();
}

} // namespace

void LevyTriple::validate() const {
    if (dim() == 0) throw_input("LevyTriple: empty drift");
    if (covariance.rows() != dim() || covariance.cols() != dim()) {
        throw_input("LevyTriple: covariance dimension mismatch");
    }
    check_symmetric_psd(covariance, "LevyTriple covariance");
    double total = 0.0;
    for (const auto& entry : jumps) {
        if (entry.jump.size() != dim()) throw_input("LevyTriple: jump dimension mismatch");
        if (!(entry.rate >= 0.0) || !std::isfinite(entry.rate)) {
            throw_input("LevyTriple: jump rates must be nonnegative and finite");
        }
        total += entry.rate;
    }
    if (!std::isfinite(total)) throw_input("LevyTriple: total jump frequency must be finite");
}

double LevyTriple::total_frequency() const {
    double total = 0.0;
    for (const auto& entry : jumps) total += entry.rate;
    return total;
}

double LevyTriple::max_jump_magnitude() const {
    double mag = 0.0;
    for (const auto& entry : jumps) {
        if (entry.rate > 0.0) mag = std::max(mag, entry.jump.cwiseAbs().maxCoeff());
    }
    return mag;
}

Eigen::VectorXd LevyTriple::mean_rate() const {
    Eigen::VectorXd rate = drift;
    for (const auto& entry : jumps) rate += entry.rate * entry.jump;
    return rate;
}

Eigen::MatrixXd LevyTriple::covariance_rate() const {
    Eigen::MatrixXd rate = covariance;
    for (const auto& entry : jumps) rate += entry.rate * entry.jump * entry.jump.transpose();
    return rate;
}

double characteristic_exponent(const LevyTriple& triple, const Eigen::VectorXd& k) {
    triple.validate();
    if (k.size() != triple.dim()) throw_input("characteristic_exponent: k dimension mismatch");
    double value = k.dot(triple.drift) + 0.5 * k.dot(triple.covariance * k);
    for (const auto& entry : triple.jumps) {
        value += (guarded_exp(k.dot(entry.jump), "characteristic_exponent") - 1.0) * entry.rate;
    }
    return value;
}

double ito_exponent(const LevyTriple& triple, const FunctionJet& jet, double k) {
    triple.validate();
    if (jet.gradient.size() != triple.dim() || jet.hessian.rows() != triple.dim() ||
        jet.hessian.cols() != triple.dim()) {
        throw_input("ito_exponent: jet dimensions do not match the triple");
    }
    const double drift_part = jet.time_derivative + jet.gradient.dot(triple.drift) +
                              0.5 * (jet.hessian * triple.covariance).trace();
    const double diffusion_part = jet.gradient.dot(triple.covariance * jet.gradient);
    double value = k * drift_part + 0.5 * k * k * diffusion_part;
    for (const auto& entry : triple.jumps) {
        if (!jet.jump_difference) throw_input("ito_exponent: jump evaluator missing");
        const double df = jet.jump_difference(entry.jump);
        value += (guarded_exp(k * df, "ito_exponent") - 1.0) * entry.rate;
    }
    return value;
}

void ConvexityModel::validate() const {
    if (assets() == 0) throw_input("ConvexityModel: empty underlying block");
    if (!(funding_ratio > 0.0)) throw_input("ConvexityModel: funding ratio must be positive");
    if (nu_fs.size() != assets() || nu_sc.size() != assets()) {
        throw_input("ConvexityModel: cross-covariance block dimension mismatch");
    }
    check_symmetric_psd(joint_triple().covariance, "ConvexityModel joint covariance");
    for (const auto& jump : jumps) {
        if (jump.js.size() != assets()) throw_input("ConvexityModel: jump dimension mismatch");
        if (!(jump.rate >= 0.0)) throw_input("ConvexityModel: jump rates must be nonnegative");
    }
}

LevyTriple ConvexityModel::joint_triple() const {
    const int n = assets();
    LevyTriple triple;
    triple.drift.resize(n + 2);
    triple.drift[0] = mu_f;
    triple.drift.segment(1, n) = mu_s;
    triple.drift[n + 1] = mu_c;

    triple.covariance = Eigen::MatrixXd::Zero(n + 2, n + 2);
    triple.covariance(0, 0) = nu_f;
    triple.covariance.block(1, 0, n, 1) = nu_fs;
    triple.covariance.block(0, 1, 1, n) = nu_fs.transpose();
    triple.covariance(n + 1, 0) = nu_fc;
    triple.covariance(0, n + 1) = nu_fc;
    triple.covariance.block(1, 1, n, n) = nu_s;
    triple.covariance.block(1, n + 1, n, 1) = nu_sc;
    triple.covariance.block(n + 1, 1, 1, n) = nu_sc.transpose();
    triple.covariance(n + 1, n + 1) = nu_c;

    for (const auto& jump : jumps) {
        JumpEntry entry;
        entry.jump.resize(n + 2);
        entry.jump[0] = jump.jf;
        entry.jump.segment(1, n) = jump.js;
        entry.jump[n + 1] = jump.jc;
        entry.rate = jump.rate;
        triple.jumps.push_back(std::move(entry));
    }
    return triple;
}

TiltedParameters tilt_parameters(const ConvexityModel& model, const Eigen::VectorXd& alpha) {
    model.validate();
    if (alpha.size() != model.assets()) throw_input("tilt_parameters: alpha dimension mismatch");
    const double f = model.funding_ratio;
    TiltedParameters tilted;
    tilted.mu_s = model.mu_s - model.nu_s * (f * alpha);
    tilted.mu_c = model.mu_c - f * alpha.dot(model.nu_sc);
    tilted.jumps = model.jumps;
    for (auto& jump : tilted.jumps) {
        jump.rate *= guarded_exp(-f * (1.0 + jump.jf) * alpha.dot(jump.js), "tilt_parameters");
    }
    return tilted;
}

MomentRates moment_rates(const ConvexityModel& model, const Eigen::VectorXd& alpha) {
    const TiltedParameters tilted = tilt_parameters(model, alpha);

    MomentRates rates;
    rates.mean_s = tilted.mu_s + model.nu_fs;
    rates.mean_c = tilted.mu_c + model.nu_fc;
    rates.var_s = model.nu_s;
    rates.var_c = model.nu_c;
    rates.cov_sc = model.nu_sc;
    for (const auto& jump : tilted.jumps) {
        const double lever = 1.0 + jump.jf;
        rates.mean_s += lever * jump.js * jump.rate;
        rates.mean_c += lever * jump.jc * jump.rate;
        rates.var_s += lever * lever * jump.js * jump.js.transpose() * jump.rate;
        rates.var_c += lever * lever * jump.jc * jump.jc * jump.rate;
        rates.cov_sc += lever * lever * jump.jc * jump.js * jump.rate;
    }
    rates.var_s = (0.5 * (rates.var_s + rates.var_s.transpose())).eval();
    return rates;
}

HedgeRate optimal_hedge_rate(const ConvexityModel& model, const Eigen::VectorXd& alpha) {
    const MomentRates rates = moment_rates(model, alpha);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(rates.var_s);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any()) {
        throw_numeric("optimal_hedge_rate: variance rate Vdot_s[alpha] is singular");
    }
    HedgeRate hedge;
    hedge.beta = ldlt.solve(rates.cov_sc);
    const double f2 = model.funding_ratio * model.funding_ratio;
    hedge.residual_variance_rate = f2 * (rates.var_c - hedge.beta.dot(rates.cov_sc));
    if (hedge.residual_variance_rate < -1e-12) {
        throw_numeric("optimal_hedge_rate: negative residual variance rate " +
                      std::to_string(hedge.residual_variance_rate));
    }
    return hedge;
}

DeltaGamma hedge_expansion(const ConvexityModel& model, const Eigen::VectorXd& alpha) {
    model.validate();
    Eigen::LDLT<Eigen::MatrixXd> nu_s(model.nu_s);
    if (nu_s.info() != Eigen::Success || (nu_s.vectorD().array() <= 0.0).any()) {
        throw_numeric("hedge_expansion: continuous covariance nu_s is singular");
    }
    DeltaGamma result;
    result.delta = nu_s.solve(model.nu_sc);

    const TiltedParameters tilted = tilt_parameters(model, alpha);
    result.gamma = Eigen::VectorXd::Zero(model.assets());
    for (const auto& jump : tilted.jumps) {
        const double lever = 1.0 + jump.jf;
        const double deviation = jump.jc - result.delta.dot(jump.js);
        result.gamma += lever * lever * deviation * nu_s.solve(jump.js) * jump.rate;
    }
    return result;
}

DriftResiduals drift_residuals(const ConvexityModel& model, const Eigen::VectorXd& alpha) {
    const MomentRates rates = moment_rates(model, alpha);
    return DriftResiduals{rates.mean_s, rates.mean_c};
}

DriftSolution solve_drift_conditions(const ConvexityModel& model,
                                     const DriftSolveControls& controls) {
    model.validate();
    const double f = model.funding_ratio;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(model.assets());

    MomentRates rates = moment_rates(model, alpha);
    double norm = rates.mean_s.norm();
    int iter = 0;
    while (norm > controls.tol && iter < controls.max_iter) {
        Eigen::LDLT<Eigen::MatrixXd> jac(rates.var_s);
        if (jac.info() != Eigen::Success || (jac.vectorD().array() <= 0.0).any()) {
            throw_numeric("solve_drift_conditions: Jacobian -f Vdot_s[alpha] singular at "
                          "iteration " + std::to_string(iter));
        }
        const Eigen::VectorXd step = jac.solve(rates.mean_s) / f;

        double scale = 1.0;
        Eigen::VectorXd next_alpha;
        MomentRates next_rates;
        double next_norm = norm;
        for (int halving = 0; halving <= 20; ++halving) {
            next_alpha = alpha + scale * step;
            next_rates = moment_rates(model, next_alpha);
            next_norm = next_rates.mean_s.norm();
            if (next_norm < norm || halving == 20) break;
            scale *= 0.5;
        }
        if (!(next_norm < norm)) {
            throw_numeric("solve_drift_conditions: no descent after 20 step halvings; "
                          "residual " + std::to_string(norm));
        }
        alpha = next_alpha;
        rates = next_rates;
        norm = next_norm;
        ++iter;
    }
    if (norm > controls.tol) {
        throw_numeric("solve_drift_conditions: Newton did not converge in " +
                      std::to_string(controls.max_iter) + " iterations; residual " +
                      std::to_string(norm));
    }

    DriftSolution solution;
    solution.alpha = alpha;
    solution.pricing_residual = rates.mean_c;
    solution.iterations = iter;
    solution.residual_norm = norm;
    return solution;
}

IncrementStats simulate_increments(const LevyTriple& triple, double dt, long paths,
                                   std::uint64_t seed, int threads) {
    triple.validate();
    if (!(dt > 0.0)) throw_input("simulate_increments: dt must be positive");
    if (paths <= 1) throw_input("simulate_increments: need at least two paths");

    const int dim = triple.dim();
    const Eigen::MatrixXd factor = psd_factor(triple.covariance) * std::sqrt(dt);
    const Eigen::VectorXd drift_dt = triple.drift * dt;

    constexpr long kChunk = 8192;
    const long chunks = (paths + kChunk - 1) / kChunk;

    std::vector<Eigen::VectorXd> chunk_sum(chunks, Eigen::VectorXd::Zero(dim));
    std::vector<Eigen::MatrixXd> chunk_outer(chunks, Eigen::MatrixXd::Zero(dim, dim));

#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, threads)) if (threads > 1)
#endif
    for (long c = 0; c < chunks; ++c) {
        const long begin = c * kChunk;
        const long end = std::min(paths, begin + kChunk);
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
        Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::VectorXd normals(dim);
        for (long p = begin; p < end; ++p) {
            std::mt19937_64 rng = path_stream(seed, static_cast<std::uint64_t>(p));
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (int d = 0; d < dim; ++d) normals[d] = gauss(rng);
            Eigen::VectorXd increment = drift_dt + factor * normals;
            for (const auto& entry : triple.jumps) {
                if (entry.rate <= 0.0) continue;
                std::poisson_distribution<int> poisson(entry.rate * dt);
                const int count = poisson(rng);
                if (count > 0) increment += count * entry.jump;
            }
            sum += increment;
            outer += increment * increment.transpose();
        }
        chunk_sum[c] = sum;
        chunk_outer[c] = outer;
    }

    // Fixed-order reduction keeps the result independent of scheduling.
    Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd total_outer = Eigen::MatrixXd::Zero(dim, dim);
    for (long c = 0; c < chunks; ++c) {
        total += chunk_sum[c];
        total_outer += chunk_outer[c];
    }

    IncrementStats stats;
    stats.paths = paths;
    stats.mean = total / static_cast<double>(paths);
    stats.covariance = (total_outer - paths * stats.mean * stats.mean.transpose()) /
                       static_cast<double>(paths - 1);
    stats.mean_std_error =
        (stats.covariance.diagonal() / static_cast<double>(paths)).cwiseMax(0.0).cwiseSqrt();
    return stats;
}

} // namespace entropic
