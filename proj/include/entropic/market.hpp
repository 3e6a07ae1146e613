#pragma once

#include <Eigen/Dense>
#include <optional>

namespace entropic {

/// One settlement period of market data over a finite scenario set.
///
/// Start values (p0, q0, u0, b0) are observed at the start of the period
/// and shared by all scenarios; end values carry one row (or entry) per
/// scenario. Funding prices q, u, b must be strictly positive everywhere.
struct MarketSlice {
    Eigen::VectorXd p0;  ///< underlying market prices at start (n_assets)
    Eigen::MatrixXd p1;  ///< underlying market prices at end (n_scenarios x n_assets)
    Eigen::VectorXd q0;  ///< underlying funding prices at start (n_assets)
    Eigen::MatrixXd q1;  ///< underlying funding prices at end (n_scenarios x n_assets)
    double u0 = 1.0;            ///< unsecured funding price at start
    Eigen::VectorXd u1;         ///< unsecured funding price at end (n_scenarios)
    double b0 = 1.0;            ///< derivative funding price at start
    Eigen::VectorXd b1;         ///< derivative funding price at end (n_scenarios)
    std::optional<double> w0;          ///< optional numeraire at start
    std::optional<Eigen::VectorXd> w1; ///< optional numeraire at end
    double funding_ratio = 1.0;        ///< f, used when q = b = f u

    int assets() const { return static_cast<int>(p0.size()); }
    int scenarios() const { return static_cast<int>(p1.rows()); }

    /// Slice with flat unit funding (q = u = b = 1) built from price paths.
    static MarketSlice unit_funding(Eigen::VectorXd p0, Eigen::MatrixXd p1);

    /// Dimension and positivity checks; throws an input error naming the
    /// offending scenario/asset.
    void validate() const;
};

/// Underlying returns R_p, one row per scenario: (q1/u1) * ((p1/q1) - (p0/q0)).
Eigen::MatrixXd normalized_return(const MarketSlice& slice);

/// The same quantity in the difference form (dp - (p/q) dq) / u1. Kept as
/// an independent algebraic route; the two must agree to 1e-12.
Eigen::MatrixXd normalized_return_difference_form(const MarketSlice& slice);

/// Derivative return R_a per scenario: (b1/u1) * ((a1/b1) - (a0/b0)).
Eigen::VectorXd derivative_return(const MarketSlice& slice, double a0,
                                  const Eigen::VectorXd& a1);

} // namespace entropic
