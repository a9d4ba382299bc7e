#ifndef MULTISTOP_SNELL_HPP
#define MULTISTOP_SNELL_HPP

#include <algorithm>
#include <cmath>
#include <iosfwd>
#include <span>
#include <vector>

#include "multistop/scenario_tree.hpp"

namespace multistop {

/**
 * Admissible reward family on a tree: one nonnegative value per node.
 *
 * One value per node makes phi(theta) = phi(theta') on {theta = theta'}
 * automatic.
 */
class NodeReward {
public:
    NodeReward() = default;
    /// Throws InputError on a size mismatch or a negative / non-finite entry.
    NodeReward(const ScenarioTree& tree, std::vector<double> values);

    static NodeReward constant(const ScenarioTree& tree, double c);

    [[nodiscard]] double operator[](NodeId n) const { return values_[n]; }
    [[nodiscard]] double at(NodeId n) const { return values_.at(n); }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

private:
    std::vector<double> values_;
};

/// Tie policy for v(node) = phi(node): v <= phi + relative * max(1, |v|).
struct StopTolerance {
    double relative = 1e-9;

    [[nodiscard]] bool touches(double value, double reward) const {
        return value <= reward + relative * std::max(1.0, std::abs(value));
    }
};

/// Snell envelope values v(node) for every node, with the reward that generated them.
class ValueFamily {
public:
    ValueFamily(NodeReward reward, std::vector<double> values)
        : reward_(std::move(reward)), values_(std::move(values)) {}

    [[nodiscard]] double operator[](NodeId n) const { return values_[n]; }
    [[nodiscard]] double at(NodeId n) const { return values_.at(n); }
    [[nodiscard]] const NodeReward& reward() const noexcept { return reward_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

private:
    NodeReward reward_;
    std::vector<double> values_;
};

/**
 * Backward induction v(n) = max(phi(n), sum_c p(c|n) v(c)), v(leaf) = phi(leaf).
 *
 * Child expectations are accumulated in child-id order, so the result is
 * bitwise independent of `threads` (levels are split across threads).
 */
[[nodiscard]] ValueFamily snell_envelope(const ScenarioTree& tree, const NodeReward& reward,
                                         unsigned threads = 1);

/**
 * Envelope restricted to the subtree of `start`; entries outside it are NaN.
 * Same arithmetic as snell_envelope on the subtree nodes.
 */
[[nodiscard]] ValueFamily snell_envelope_from(const ScenarioTree& tree, const NodeReward& reward,
                                              NodeId start);

/// First node on each path from `start` where v touches phi.
[[nodiscard]] StoppingRule optimal_stop(const ScenarioTree& tree, const ValueFamily& values, NodeId start,
                                        StopTolerance tol = {});

/**
 * First node on each path from `start` where lambda * v <= phi.
 *
 * Nodes where v touches phi (the optimal stopping set) also stop, so the
 * result never stops after optimal_stop under the same tolerance.
 */
[[nodiscard]] StoppingRule lambda_stop(const ScenarioTree& tree, const ValueFamily& values, NodeId start,
                                       double lambda, StopTolerance tol = {});

/// E[phi(theta) | start atom], summed by nested conditional expectation in child-id order.
[[nodiscard]] double evaluate_rule(const ScenarioTree& tree, const NodeReward& reward, const StoppingRule& rule);

struct SupermartingaleReport {
    double max_violation = 0.0;  ///< max over internal nodes of (sum p v(child) - v(node))+
    NodeId worst_node = 0;
};

[[nodiscard]] SupermartingaleReport check_supermartingale(const ScenarioTree& tree, std::span<const double> values);
[[nodiscard]] inline SupermartingaleReport check_supermartingale(const ScenarioTree& tree, const ValueFamily& values) {
    return check_supermartingale(tree, values.values());
}

/// CSV with columns node_id,t,phi,v.
void write_values_csv(std::ostream& os, const ScenarioTree& tree, const ValueFamily& values);

}  // namespace multistop

#endif  // MULTISTOP_SNELL_HPP
