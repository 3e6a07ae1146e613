#include "entropic/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "entropic/errors.hpp"
#include "entropic/moments.hpp"
#include "entropic/rng.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace entropic {

namespace {

struct PathRecord {
    std::vector<LedgerRow> rows;
    double total_hedged = 0.0;
    bool truncated = false;
    std::string error;
};

/// Piecewise-linear supporting slope of the child price ratios viewed as a
/// function of the child underlying ratios, evaluated at the start ratio.
double tangent_slope(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double x0) {
    const int n = static_cast<int>(x.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return x[a] < x[b]; });
    if (n < 2 || x[order.front()] == x[order.back()]) {
        throw_numeric("tangent_delta: child underlying ratios are degenerate");
    }
    // Segment containing x0 (clamped to the hull).
    int k = 0;
    while (k + 2 < n && x[order[k + 1]] <= x0) ++k;
    const double x_lo = x[order[k]];
    const double x_hi = x[order[k + 1]];
    const double y_lo = y[order[k]];
    const double y_hi = y[order[k + 1]];
    if (x_hi == x_lo) throw_numeric("tangent_delta: repeated child underlying ratio");
    return (y_hi - y_lo) / (x_hi - x_lo);
}

/// Piecewise-linear interpolation of the child values at the start ratio.
double interp_children(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double x0) {
    const int n = static_cast<int>(x.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return x[a] < x[b]; });
    int k = 0;
    while (k + 2 < n && x[order[k + 1]] <= x0) ++k;
    const double x_lo = x[order[k]];
    const double x_hi = x[order[k + 1]];
    const double w = (x0 - x_lo) / (x_hi - x_lo);
    return (1.0 - w) * y[order[k]] + w * y[order[k + 1]];
}

} // namespace

HedgePolicy hedge_policy_from_string(const std::string& name) {
    if (name == "minimum_variance") return HedgePolicy::minimum_variance;
    if (name == "tangent_delta") return HedgePolicy::tangent_delta;
    throw_input("unknown hedge policy '" + name + "'");
}

std::string to_string(HedgePolicy policy) {
    return policy == HedgePolicy::minimum_variance ? "minimum_variance" : "tangent_delta";
}

BacktestResult run_backtest(const ScenarioTree& tree, const TreePricing& pricing,
                            const FundingArrangement& arrangement, const BacktestConfig& config) {
    tree.validate();
    if (config.paths < 1) throw_input("run_backtest: need at least one path");
    if (pricing.price.size() != tree.nodes.size()) {
        throw_input("run_backtest: pricing does not match the tree");
    }
    (void)arrangement; // funding enters through pricing.funding, fixed at pricing time

    const int n_nodes = static_cast<int>(tree.nodes.size());

    // Per-node precomputation shared by all paths: sampling CDF, hedge
    // weights, carry attribution.
    struct NodeData {
        Eigen::VectorXd cdf;
        Eigen::VectorXd beta;
        Eigen::VectorXd carry;      ///< per child
        Eigen::VectorXd settle_a;   ///< derivative settlement per child
        Eigen::VectorXd settle_hedge; ///< delta-explained component per child
        bool ok = false;
        std::string error;
    };
    std::vector<NodeData> node_data(n_nodes);

    for (int k = 0; k < n_nodes; ++k) {
        const TreeNode& node = tree.nodes[k];
        if (node.is_leaf()) continue;
        NodeData& data = node_data[k];
        try {
            const MarketSlice& slice = *node.slice;
            const int n_children = static_cast<int>(node.children.size());

            const Eigen::VectorXd& sample_weights = config.measure == SampleMeasure::pricing
                                                        ? pricing.tilted_weights[k]
                                                        : node.child_weights;
            data.cdf.resize(n_children);
            double acc = 0.0;
            for (int i = 0; i < n_children; ++i) {
                acc += sample_weights[i];
                data.cdf[i] = acc;
            }

            // Settlements per child, in currency.
            const double a0 = pricing.price[k];
            const double b0 = pricing.funding[k];
            data.settle_a.resize(n_children);
            Eigen::MatrixXd hedge_legs(n_children, slice.assets());
            for (int i = 0; i < n_children; ++i) {
                const int child = node.children[i];
                const double a1 = pricing.price[child];
                const double b1 = pricing.funding[child];
                data.settle_a[i] = (a1 - a0) - (a0 / b0) * (b1 - b0);
                for (int a = 0; a < slice.assets(); ++a) {
                    hedge_legs(i, a) = (slice.p1(i, a) - slice.p0[a]) -
                                       (slice.p0[a] / slice.q0[a]) * (slice.q1(i, a) - slice.q0[a]);
                }
            }

            ScenarioMeasure tilted_measure = ScenarioMeasure(
                [&] {
                    std::vector<std::string> ids;
                    for (int c : node.children) ids.push_back(tree.nodes[c].id);
                    return ids;
                }(),
                pricing.tilted_weights[k]);

            if (config.policy == HedgePolicy::minimum_variance) {
                Eigen::VectorXd child_prices(n_children);
                for (int i = 0; i < n_children; ++i) {
                    child_prices[i] = pricing.price[node.children[i]];
                }
                // Moments under the node's pricing measure with the tree's
                // fair prices as derivative values.
                MarketSlice priced = slice;
                priced.b0 = pricing.funding[k];
                for (int i = 0; i < n_children; ++i) {
                    priced.b1[i] = pricing.funding[node.children[i]];
                }
                const ReturnMoments moments =
                    moments_from_measure(tilted_measure, priced, child_prices, a0);
                data.beta = hedge_weights(moments).beta;
                // Carry: conditional mean of the hedged settlement under the
                // pricing measure.
                data.carry.resize(n_children);
                double expected = 0.0;
                for (int i = 0; i < n_children; ++i) {
                    expected += pricing.tilted_weights[k][i] *
                                (data.settle_a[i] - hedge_legs.row(i).dot(data.beta));
                }
                data.carry.setConstant(expected);
            } else {
                if (slice.assets() != 1) {
                    throw_numeric("tangent_delta policy requires a single underlying");
                }
                Eigen::VectorXd x(n_children), y(n_children);
                for (int i = 0; i < n_children; ++i) {
                    x[i] = slice.p1(i, 0) / slice.q1(i, 0);
                    y[i] = pricing.price[node.children[i]] / pricing.funding[node.children[i]];
                }
                const double x0 = slice.p0[0] / slice.q0[0];
                data.beta = Eigen::VectorXd::Constant(1, tangent_slope(x, y, x0));
                // Carry: funding-scaled decay of the continuation value at
                // the unchanged underlying ratio.
                const double flat = interp_children(x, y, x0);
                data.carry.resize(n_children);
                for (int i = 0; i < n_children; ++i) {
                    data.carry[i] =
                        pricing.funding[node.children[i]] * (flat - a0 / pricing.funding[k]);
                }
            }

            data.settle_hedge.resize(n_children);
            for (int i = 0; i < n_children; ++i) {
                data.settle_hedge[i] = hedge_legs.row(i).dot(data.beta);
            }
            data.ok = true;
        } catch (const Error& e) {
            data.ok = false;
            data.error = e.what();
        }
    }

    // Path sampling; rows are assembled path-major so output is
    // deterministic for a fixed seed.
    std::vector<PathRecord> records(config.paths);

#if defined(_OPENMP)
#pragma omp parallel for schedule(static) num_threads(std::max(1, config.threads)) \
    if (config.threads > 1)
#endif
    for (long p = 0; p < config.paths; ++p) {
        std::mt19937_64 rng = path_stream(config.seed, static_cast<std::uint64_t>(p));
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        PathRecord& record = records[p];
        int node = tree.root;
        int period = 0;
        double cum = 0.0;
        while (!tree.nodes[node].is_leaf()) {
            const NodeData& data = node_data[node];
            if (!data.ok) {
                record.truncated = true;
                record.error = "path " + std::to_string(p) + " truncated at node '" +
                               tree.nodes[node].id + "': " + data.error;
                break;
            }
            const double u = uniform(rng);
            int pick = 0;
            while (pick + 1 < data.cdf.size() && u > data.cdf[pick]) ++pick;

            LedgerRow row;
            row.path = p;
            row.period = period;
            row.beta = data.beta;
            row.hedged_pnl = data.settle_a[pick] - data.settle_hedge[pick];
            row.carry = data.carry[pick];
            row.gamma_pnl = data.settle_a[pick] - data.carry[pick] - data.settle_hedge[pick];
            cum += row.hedged_pnl;
            row.cum_pnl = cum;
            record.rows.push_back(std::move(row));

            node = tree.nodes[node].children[pick];
            ++period;
        }
        record.total_hedged = cum;
    }

    BacktestResult result;
    result.paths = config.paths;
    result.carry_convention =
        config.policy == HedgePolicy::minimum_variance
            ? "carry = conditional mean of the hedged settlement under the node's pricing "
              "measure; gamma = realized settlement - carry - delta-explained component"
            : "carry = funding-scaled change of the interpolated continuation value at the "
              "unchanged underlying ratio; gamma = realized settlement - carry - "
              "delta-explained component";

    double sum = 0.0, sum_sq = 0.0, sum_carry = 0.0, sum_gamma = 0.0;
    long complete = 0, periods = 0;
    for (auto& record : records) {
        if (record.truncated) {
            ++result.truncated_paths;
            result.errors.push_back(record.error);
        } else {
            sum += record.total_hedged;
            sum_sq += record.total_hedged * record.total_hedged;
            ++complete;
        }
        for (auto& row : record.rows) {
            sum_carry += row.carry;
            sum_gamma += row.gamma_pnl;
            ++periods;
            result.rows.push_back(std::move(row));
        }
    }
    if (complete > 0) {
        result.mean_hedged = sum / complete;
        if (complete > 1) {
            result.variance_hedged =
                (sum_sq - complete * result.mean_hedged * result.mean_hedged) / (complete - 1);
            result.variance_hedged = std::max(0.0, result.variance_hedged);
            result.std_error = std::sqrt(result.variance_hedged / complete);
        }
    }
    if (periods > 0) {
        result.mean_carry = sum_carry / periods;
        result.mean_gamma = sum_gamma / periods;
    }
    return result;
}

} // namespace entropic
