#pragma once

#include <Eigen/Dense>
#include <optional>

#include "entropic/market.hpp"
#include "entropic/scenario.hpp"

namespace entropic {

/// Second-sector moment blocks for two-sector hedging.
struct SectorMoments {
    Eigen::MatrixXd cov_o;    ///< V_o (n_o x n_o)
    Eigen::MatrixXd cross_po; ///< C_po (n_p x n_o)
    Eigen::VectorXd cross_oa; ///< C_oa (n_o)
};

/// Joint return moments of the underlying vector and one derivative.
struct ReturnMoments {
    Eigen::VectorXd mean_p;   ///< M_p
    Eigen::MatrixXd cov_p;    ///< V_p, symmetric PSD
    double mean_a = 0.0;      ///< M_a
    double var_a = 0.0;       ///< V_a
    Eigen::VectorXd cross_pa; ///< C_pa
    std::optional<SectorMoments> sector;

    int assets() const { return static_cast<int>(mean_p.size()); }

    /// Symmetry within 1e-12 and PSD within eigenvalue tolerance -1e-10 for
    /// V_p and the joint [[V_p, C_pa],[C_pa^t, V_a]] block. Violations are
    /// rejected, not projected.
    void validate() const;
};

/// Exact weighted moments of the normalized returns under the measure.
ReturnMoments moments_from_measure(const ScenarioMeasure& measure, const MarketSlice& slice,
                                   const Eigen::VectorXd& derivative_end, double derivative_start);

struct ArbitrageCheck {
    bool pass = true;
    double worst_overlap = 0.0;              ///< max |v . M_p| over near-kernel v
    std::optional<Eigen::VectorXd> witness;  ///< a zero-variance portfolio with nonzero mean
};

/// ker[V_p] . M_p = {0}: eigenvectors of V_p below `tol` must be orthogonal
/// to M_p. A violating eigenvector is returned as the arbitrage witness.
ArbitrageCheck check_no_arbitrage(const ReturnMoments& moments, double tol = 1e-10);

struct SolveOptions {
    bool allow_pseudo_inverse = false; ///< minimum-norm solution on rank-deficient V
    double condition_limit = 1e12;
};

/// risk_scale * V_p^{-1} M_p. Fails on near-singular V_p unless the
/// pseudo-inverse mode is requested, in which case the minimum-norm
/// optimizer is returned.
Eigen::VectorXd optimal_portfolio(const ReturnMoments& moments, double risk_scale,
                                  const SolveOptions& options = {});

/// Efficient-frontier slope sqrt(V_p^{-1} M_p . M_p).
double frontier_slope(const ReturnMoments& moments, const SolveOptions& options = {});

struct HedgeResult {
    Eigen::VectorXd beta;          ///< units of underlying per unit derivative
    double residual_mean = 0.0;    ///< m = M_a - V_p^{-1} M_p . C_pa
    double residual_variance = 0.0;///< v = V_a - V_p^{-1} C_pa . C_pa
};

/// Minimum-variance hedge beta = V_p^{-1} C_pa with residual mean/variance.
HedgeResult hedge_weights(const ReturnMoments& moments, const SolveOptions& options = {});

struct SharpeDecomposition {
    double base = 0.0;      ///< V_p^{-1} M_p . M_p
    double increment = 0.0; ///< (M_a - V_p^{-1} M_p . C_pa)^2 / (V_a - V_p^{-1} C_pa . C_pa)
    double total() const { return base + increment; }
};

/// Block-matrix identity for the squared Sharpe ratio of the expanded market.
SharpeDecomposition incremental_sharpe(const ReturnMoments& moments,
                                       const SolveOptions& options = {});

struct TwoSectorHedge {
    Eigen::VectorXd beta_p;
    Eigen::VectorXd beta_o;
    double residual_variance = 0.0;
};

/// Two-sector hedge: first-sector-only hedge plus the Schur-complement
/// correction from the second sector. Requires moments.sector.
TwoSectorHedge two_sector_hedge(const ReturnMoments& moments, const SolveOptions& options = {});

} // namespace entropic
