#include "entropic/tree.hpp"

#include <cmath>
#include <cstdlib>

#include "entropic/errors.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace entropic {

namespace {

constexpr double kContinuityTol = 1e-9;

void check_close(double a, double b, const std::string& what, const std::string& node_id) {
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    if (std::abs(a - b) > kContinuityTol * scale) {
        throw_input("tree node '" + node_id + "': " + what +
                    " discontinuous across the period boundary (" + std::to_string(a) +
                    " vs " + std::to_string(b) + ")");
    }
}

} // namespace

void ScenarioTree::validate() const {
    if (nodes.empty()) throw_input("ScenarioTree: no nodes");
    if (root < 0 || root >= static_cast<int>(nodes.size())) throw_input("ScenarioTree: bad root index");

    std::vector<int> parent(nodes.size(), -1);
    for (int k = 0; k < static_cast<int>(nodes.size()); ++k) {
        const TreeNode& node = nodes[k];
        if (node.is_leaf()) {
            if (!node.terminal) {
                throw_input("tree leaf '" + node.id + "' has no terminal settlement");
            }
            continue;
        }
        if (!node.slice) throw_input("tree node '" + node.id + "' has children but no market slice");
        node.slice->validate();
        if (node.slice->scenarios() != static_cast<int>(node.children.size())) {
            throw_input("tree node '" + node.id + "': slice scenario count differs from child count");
        }
        if (node.child_weights.size() != static_cast<Eigen::Index>(node.children.size())) {
            throw_input("tree node '" + node.id + "': child weight count differs from child count");
        }
        if (std::abs(node.child_weights.sum() - 1.0) > 1e-12) {
            throw_input("tree node '" + node.id + "': child weights sum to " +
                        std::to_string(node.child_weights.sum()));
        }
        if (node.child_weights.minCoeff() < 0.0) {
            throw_input("tree node '" + node.id + "': negative child weight");
        }
        for (std::size_t i = 0; i < node.children.size(); ++i) {
            const int c = node.children[i];
            if (c < 0 || c >= static_cast<int>(nodes.size())) {
                throw_input("tree node '" + node.id + "': child index out of range");
            }
            if (parent[c] != -1) throw_input("tree node '" + nodes[c].id + "' has two parents");
            parent[c] = k;
            const TreeNode& child = nodes[c];
            if (!(child.time > node.time)) {
                throw_input("tree node '" + child.id + "': time must strictly increase along paths");
            }
            // Market-path continuity with the child's own transition data.
            if (child.slice) {
                const MarketSlice& sl = *node.slice;
                const MarketSlice& cs = *child.slice;
                if (cs.assets() != sl.assets()) {
                    throw_input("tree node '" + child.id + "': asset count changes along the path");
                }
                for (int a = 0; a < sl.assets(); ++a) {
                    check_close(sl.p1(static_cast<int>(i), a), cs.p0[a], "underlying price", child.id);
                    check_close(sl.q1(static_cast<int>(i), a), cs.q0[a], "underlying funding price",
                                child.id);
                }
                check_close(sl.u1[static_cast<int>(i)], cs.u0, "unsecured funding price", child.id);
                check_close(sl.b1[static_cast<int>(i)], cs.b0, "derivative funding price", child.id);
            }
        }
    }
    for (int k = 0; k < static_cast<int>(nodes.size()); ++k) {
        if (k != root && parent[k] == -1) {
            throw_input("tree node '" + nodes[k].id + "' unreachable from the root");
        }
    }
}

std::vector<std::vector<int>> ScenarioTree::levels() const {
    std::vector<std::vector<int>> result;
    std::vector<int> frontier{root};
    while (!frontier.empty()) {
        result.push_back(frontier);
        std::vector<int> next;
        for (int k : frontier) {
            for (int c : nodes[k].children) next.push_back(c);
        }
        frontier = std::move(next);
    }
    return result;
}

int ScenarioTree::parent_of(int node) const {
    for (int k = 0; k < static_cast<int>(nodes.size()); ++k) {
        for (int c : nodes[k].children) {
            if (c == node) return k;
        }
    }
    return -1;
}

std::vector<double> effective_funding(const ScenarioTree& tree,
                                      const FundingArrangement& arrangement) {
    std::vector<double> funding(tree.nodes.size(), 1.0);
    // Forward pass from the root; each node has a unique parent.
    for (const auto& level : tree.levels()) {
        for (int k : level) {
            const TreeNode& node = tree.nodes[k];
            if (node.is_leaf()) continue;
            const MarketSlice& slice = *node.slice;
            if (k == tree.root) {
                switch (arrangement.kind) {
                    case FundingKind::futures:
                    case FundingKind::cleared: funding[k] = 1.0; break;
                    case FundingKind::collateralised: funding[k] = slice.b0; break;
                    case FundingKind::uncollateralised: funding[k] = slice.u0; break;
                }
            }
            for (std::size_t i = 0; i < node.children.size(); ++i) {
                const int c = node.children[i];
                const double dt = tree.nodes[c].time - node.time;
                switch (arrangement.kind) {
                    case FundingKind::futures:
                        funding[c] = 1.0;
                        break;
                    case FundingKind::cleared:
                        if (!arrangement.rate) {
                            throw_input("cleared arrangement requires a clearing rate");
                        }
                        funding[c] = funding[k] * (1.0 + *arrangement.rate * dt);
                        break;
                    case FundingKind::collateralised:
                        funding[c] = slice.b1[static_cast<int>(i)];
                        break;
                    case FundingKind::uncollateralised:
                        funding[c] = slice.u1[static_cast<int>(i)];
                        break;
                }
            }
        }
    }
    return funding;
}

TreePricing price_on_tree(const ScenarioTree& tree, const FundingArrangement& arrangement,
                          const TreePricingControls& controls) {
    tree.validate();
    const int n = static_cast<int>(tree.nodes.size());

    TreePricing result;
    result.price.assign(n, 0.0);
    result.alpha.assign(n, Eigen::VectorXd());
    result.tilted_weights.assign(n, Eigen::VectorXd());
    result.funding = effective_funding(tree, arrangement);

    // Price ratios y = a / b_effective, filled leaves-to-root.
    std::vector<double> ratio(n, 0.0);
    const auto levels = tree.levels();

    // Per-node calibrations within one depth are independent; a failure
    // anywhere aborts with the node named.
    std::vector<std::string> failures(n);
    for (auto level = levels.rbegin(); level != levels.rend(); ++level) {
        const auto& nodes_at_depth = *level;
        const int count = static_cast<int>(nodes_at_depth.size());
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, controls.threads)) \
    if (controls.threads > 1)
#endif
        for (int idx = 0; idx < count; ++idx) {
            const int k = nodes_at_depth[idx];
            const TreeNode& node = tree.nodes[k];
            if (node.is_leaf()) {
                ratio[k] = *node.terminal / result.funding[k];
                result.price[k] = *node.terminal;
                continue;
            }
            try {
                const MarketSlice& slice = *node.slice;
                ScenarioMeasure conditional(
                    [&] {
                        std::vector<std::string> ids;
                        for (int c : node.children) ids.push_back(tree.nodes[c].id);
                        return ids;
                    }(),
                    node.child_weights);
                const CalibrationResult cal = calibrate(conditional, slice, controls.calibration);
                const Eigen::VectorXd tilted = cal.kernel.tilted_weights(conditional);

                double numer = 0.0;
                double denom = 0.0;
                for (std::size_t i = 0; i < node.children.size(); ++i) {
                    const double fk = tilted[static_cast<int>(i)] *
                                      slice.b1[static_cast<int>(i)] / slice.u1[static_cast<int>(i)];
                    numer += fk * ratio[node.children[i]];
                    denom += fk;
                }
                ratio[k] = numer / denom;
                result.price[k] = ratio[k] * result.funding[k];
                result.alpha[k] = cal.kernel.alpha;
                result.tilted_weights[k] = tilted;
            } catch (const Error& e) {
                failures[k] = "node '" + node.id + "': " + e.what();
            }
        }
        for (int k : nodes_at_depth) {
            if (!failures[k].empty()) throw_numeric("price_on_tree: " + failures[k]);
        }
    }

    result.root_price = result.price[tree.root];
    return result;
}

} // namespace entropic
