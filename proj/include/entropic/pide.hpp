#pragma once

#include <Eigen/Dense>
#include <vector>

#include "entropic/stochvol.hpp"

namespace entropic {

/// Rectangular (s, sigma) mesh with a uniform backward time schedule.
/// Surfaces are stored as (n_s x n_sigma) matrices.
struct PideGrid {
    Eigen::VectorXd s;      ///< strictly increasing
    Eigen::VectorXd sigma;  ///< strictly increasing; size 1 collapses to 1D
    int time_steps = 100;
    double maturity = 1.0;

    int ns() const { return static_cast<int>(s.size()); }
    int nsigma() const { return static_cast<int>(sigma.size()); }
    void validate() const;

    static Eigen::VectorXd uniform(double lo, double hi, int count);
};

struct PideControls {
    double theta = 0.5;        ///< implicitness of the directional sweeps
    int rannacher_steps = 2;   ///< fully implicit start-up steps from maturity
    int threads = 1;
    double stability_factor = 10.0; ///< abort if the surface grows past this multiple
};

struct PideProblem {
    StochVolModel model;
    PideGrid grid;
    Eigen::MatrixXd terminal; ///< payoff on the grid at maturity
    PideControls controls;

    void validate() const;
};

struct PideSolution {
    Eigen::MatrixXd surface;  ///< fair price at t = 0
    PideGrid grid;
    long off_grid_jumps = 0;  ///< jump targets that left the grid (extrapolated)

    /// Bilinear interpolation of the t = 0 surface at a queried state.
    double price(double s, double sigma) const;
};

/// The spatial fair-price operator A[c] at one time level, so that the
/// pricing equation reads dc/dt = -A[c]. Includes the sigma drift tilted by
/// the per-state calibration weight, the three diffusion terms, and the
/// compensated jump sum under the tilted frequency.
Eigen::MatrixXd pide_drift_operator(const PideProblem& problem, const Eigen::MatrixXd& surface,
                                    double t, long* off_grid_count = nullptr);

/// Backward induction with an implicit-explicit split: directional
/// diffusion implicit (Douglas splitting, theta = 1/2), cross-derivative
/// and jump sum explicit. Line solves within a step are parallel across
/// grid lines; results are independent of the thread count.
PideSolution solve_pide(const PideProblem& problem);

/// Plain serial reference implementation of the identical scheme, kept as
/// an independent code path for testing and benchmarking.
PideSolution solve_pide_reference(const PideProblem& problem);

struct CompleteHedge {
    double beta_s = 0.0;
    Eigen::VectorXd beta_o; ///< one weight per option surface
};

/// Hedge weights using options that mark the volatility state:
/// beta_s = dc/ds - (do/dsigma)^{-1} do/ds . dc/dsigma,
/// beta_o = (do/dsigma)^{-1} dc/dsigma, from grid-differentiated surfaces
/// at grid node (i, j).
CompleteHedge complete_hedge_weights(const PideProblem& problem,
                                     const std::vector<Eigen::MatrixXd>& option_surfaces,
                                     const Eigen::MatrixXd& derivative_surface, int i, int j);

/// The four-term residual variance rate of the hedged derivative at grid
/// node (i, j): continuous s-term, sigma-term, cross-term, and the
/// discontinuous jump term.
struct ResidualVariance {
    double continuous_s = 0.0;
    double continuous_sigma = 0.0;
    double continuous_cross = 0.0;
    double discontinuous = 0.0;
    double total() const { return continuous_s + continuous_sigma + continuous_cross + discontinuous; }
};
ResidualVariance residual_variance_rate(const PideProblem& problem, double beta_s,
                                        const Eigen::VectorXd& beta_o,
                                        const std::vector<Eigen::MatrixXd>& option_surfaces,
                                        const Eigen::MatrixXd& derivative_surface, int i, int j,
                                        double t);

} // namespace entropic
