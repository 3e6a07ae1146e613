#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "entropic/funding.hpp"
#include "entropic/kernels.hpp"
#include "entropic/market.hpp"

namespace entropic {

/// One node of a finite scenario tree. Internal nodes carry a MarketSlice
/// describing the transition to their children (one slice scenario per
/// child, in order); leaves carry the terminal settlement.
struct TreeNode {
    std::string id;
    double time = 0.0;
    std::vector<int> children;        ///< indices into ScenarioTree::nodes
    Eigen::VectorXd child_weights;    ///< conditional weights, sum to 1
    std::optional<MarketSlice> slice; ///< present iff internal
    std::optional<double> terminal;   ///< present iff leaf

    bool is_leaf() const { return children.empty(); }
};

struct ScenarioTree {
    std::vector<TreeNode> nodes;
    int root = 0;

    /// Structural checks: weights sum to 1 per node within 1e-12, times
    /// strictly increase along paths, slices valid with one scenario per
    /// child, leaves have terminals, and market paths are continuous
    /// (a parent transition's end prices equal the child's start prices).
    void validate() const;

    /// Node indices grouped by depth, root first.
    std::vector<std::vector<int>> levels() const;

    int parent_of(int node) const; ///< -1 for the root
};

/// Derivative funding price at each node under an arrangement: unit for
/// futures, the compounded cash account for cleared, the slice collateral
/// path for collateralised, the unsecured path otherwise.
std::vector<double> effective_funding(const ScenarioTree& tree,
                                      const FundingArrangement& arrangement);

struct TreePricing {
    std::vector<double> price;                   ///< a_k per node (leaves: terminal)
    std::vector<Eigen::VectorXd> alpha;          ///< per-node calibration weights (internal)
    std::vector<Eigen::VectorXd> tilted_weights; ///< per-node tilted child weights (internal)
    std::vector<double> funding;                 ///< effective b per node
    double root_price = 0.0;
};

struct TreePricingControls {
    CalibrationControls calibration;
    int threads = 1; ///< calibrations at the same depth run in parallel
};

/// Backward-induction pricing: each node calibrates a local exponential
/// kernel to its own one-period underlying returns, then discounts the
/// child price ratios with the funding kernel (b1/u1) normalized by its
/// tilted expectation. Node calibrations at equal depth are independent
/// and parallelized; results do not depend on the thread count.
TreePricing price_on_tree(const ScenarioTree& tree, const FundingArrangement& arrangement,
                          const TreePricingControls& controls = {});

} // namespace entropic
