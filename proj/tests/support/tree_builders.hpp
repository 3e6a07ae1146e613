#pragma once

// Programmatic scenario-tree fixtures shared by the tree, backtest, and
// acceptance suites.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "entropic/tree.hpp"

namespace tree_builders {

/// Non-recombining binomial tree with additive moves and unit funding.
/// Weights are (w_up, 1 - w_up) at every node; payoff maps the terminal
/// underlying price to the settlement.
inline entropic::ScenarioTree binomial(int periods, double p0, double move, double w_up,
                                       const std::function<double(double)>& payoff) {
    entropic::ScenarioTree tree;
    struct Pending {
        int index;
        double price;
        int depth;
    };
    tree.nodes.push_back({"n0", 0.0, {}, {}, {}, {}});
    std::vector<Pending> frontier{{0, p0, 0}};
    int counter = 1;
    while (!frontier.empty()) {
        std::vector<Pending> next;
        for (const auto& pending : frontier) {
            entropic::TreeNode& node = tree.nodes[pending.index];
            if (pending.depth == periods) {
                node.terminal = payoff(pending.price);
                continue;
            }
            Eigen::MatrixXd p1(2, 1);
            p1 << pending.price + move, pending.price - move;
            entropic::MarketSlice slice = entropic::MarketSlice::unit_funding(
                Eigen::VectorXd::Constant(1, pending.price), p1);
            node.slice = slice;
            node.child_weights = Eigen::Vector2d(w_up, 1.0 - w_up);
            for (int branch = 0; branch < 2; ++branch) {
                const int child_index = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back({"n" + std::to_string(counter++),
                                      static_cast<double>(pending.depth + 1),
                                      {},
                                      {},
                                      {},
                                      {}});
                tree.nodes[pending.index].children.push_back(child_index);
                next.push_back({child_index, p1(branch, 0), pending.depth + 1});
            }
        }
        frontier = std::move(next);
    }
    tree.validate();
    return tree;
}

/// Non-recombining trinomial tree (moves +m, 0, -m) with unit funding;
/// the middle branch makes the one-period market incomplete.
inline entropic::ScenarioTree trinomial(int periods, double p0, double move,
                                        const Eigen::Vector3d& weights,
                                        const std::function<double(double)>& payoff) {
    entropic::ScenarioTree tree;
    struct Pending {
        int index;
        double price;
        int depth;
    };
    tree.nodes.push_back({"n0", 0.0, {}, {}, {}, {}});
    std::vector<Pending> frontier{{0, p0, 0}};
    int counter = 1;
    const double moves[3] = {move, 0.0, -move};
    while (!frontier.empty()) {
        std::vector<Pending> next;
        for (const auto& pending : frontier) {
            entropic::TreeNode& node = tree.nodes[pending.index];
            if (pending.depth == periods) {
                node.terminal = payoff(pending.price);
                continue;
            }
            Eigen::MatrixXd p1(3, 1);
            for (int b = 0; b < 3; ++b) p1(b, 0) = pending.price + moves[b];
            node.slice = entropic::MarketSlice::unit_funding(
                Eigen::VectorXd::Constant(1, pending.price), p1);
            node.child_weights = weights;
            for (int b = 0; b < 3; ++b) {
                const int child_index = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back({"n" + std::to_string(counter++),
                                      static_cast<double>(pending.depth + 1),
                                      {},
                                      {},
                                      {},
                                      {}});
                tree.nodes[pending.index].children.push_back(child_index);
                next.push_back({child_index, p1(b, 0), pending.depth + 1});
            }
        }
        frontier = std::move(next);
    }
    tree.validate();
    return tree;
}

/// Random tree with 2-3 branches per node, bounded depth, unit funding,
/// strictly positive weights, and moves small enough to keep every node
/// arbitrage-free.
inline entropic::ScenarioTree random_tree(std::mt19937_64& rng, int max_depth,
                                          const std::function<double(double)>& payoff) {
    entropic::ScenarioTree tree;
    std::uniform_real_distribution<double> weight_dist(0.2, 1.0);
    std::uniform_real_distribution<double> move_dist(0.02, 0.12);

    struct Pending {
        int index;
        double price;
        int depth;
    };
    tree.nodes.push_back({"n0", 0.0, {}, {}, {}, {}});
    std::vector<Pending> frontier{{0, 1.0, 0}};
    int counter = 1;
    while (!frontier.empty()) {
        std::vector<Pending> next;
        for (const auto& pending : frontier) {
            entropic::TreeNode& node = tree.nodes[pending.index];
            if (pending.depth == max_depth) {
                node.terminal = payoff(pending.price);
                continue;
            }
            const int branches = 2 + static_cast<int>(rng() % 2);
            Eigen::MatrixXd p1(branches, 1);
            // Mix of up and down moves so the node admits a martingale tilt.
            for (int b = 0; b < branches; ++b) {
                const double direction = (b % 2 == 0) ? 1.0 : -1.0;
                p1(b, 0) = pending.price * (1.0 + direction * move_dist(rng));
            }
            Eigen::VectorXd w(branches);
            for (int b = 0; b < branches; ++b) w[b] = weight_dist(rng);
            w /= w.sum();

            node.slice = entropic::MarketSlice::unit_funding(
                Eigen::VectorXd::Constant(1, pending.price), p1);
            node.child_weights = w;
            for (int b = 0; b < branches; ++b) {
                const int child_index = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back({"n" + std::to_string(counter++),
                                      static_cast<double>(pending.depth + 1),
                                      {},
                                      {},
                                      {},
                                      {}});
                tree.nodes[pending.index].children.push_back(child_index);
                next.push_back({child_index, p1(b, 0), pending.depth + 1});
            }
        }
        frontier = std::move(next);
    }
    tree.validate();
    return tree;
}

} // namespace tree_builders
