#ifndef MULTISTOP_GENERATORS_HPP
#define MULTISTOP_GENERATORS_HPP

#include <cstdint>
#include <random>
#include <string_view>

#include "multistop/double_stopping.hpp"
#include "multistop/scenario_tree.hpp"
#include "multistop/snell.hpp"

// Seeded builders for test trees and reward families.

namespace multistop {

using Rng = std::mt19937_64;

/// Binary tree where every internal node draws its up-probability from U(0.1, 0.9).
[[nodiscard]] ScenarioTree random_binary_tree(int depth, Rng& rng);

/// Tree of given depth whose nodes draw a child count in [1, max_branching] and random probabilities.
[[nodiscard]] ScenarioTree random_tree(int depth, int max_branching, Rng& rng);

/// Binary +/-1 walk with up-probability p; state = origin + running sum.
[[nodiscard]] ScenarioTree random_walk_tree(int depth, double p = 0.5, double origin = 0.0);

/// Same structure as `tree` with the given per-node states.
[[nodiscard]] ScenarioTree with_states(const ScenarioTree& tree, std::span<const double> states);

/// i.i.d. U(0,1) value per node.
[[nodiscard]] NodeReward uniform_node_reward(const ScenarioTree& tree, Rng& rng);

/// i.i.d. U(0,1) value per comparable ordered pair, drawn in BiRewardTable::for_each_pair order.
[[nodiscard]] BiRewardTable uniform_bireward_table(const ScenarioTree& tree, Rng& rng);

/// Rule from `start` that stops at each reached internal node with probability stop_prob.
[[nodiscard]] StoppingRule random_rule(const ScenarioTree& tree, NodeId start, Rng& rng, double stop_prob = 0.35);

/// Node-state reward (state)+.
[[nodiscard]] NodeReward positive_state_reward(const ScenarioTree& tree);

enum class StateCombination {
    Sum,         ///< (X(a) + X(b))+
    Difference,  ///< (X(a) - X(b))+
    Max,         ///< max(X(a), X(b))+
    Later,       ///< X at the deeper of a, b, positive part
};

[[nodiscard]] StateCombination parse_state_combination(std::string_view name);

/// psi built from the tree's node states; requires tree.has_state().
[[nodiscard]] BiReward state_bireward(const ScenarioTree& tree, StateCombination kind);

}  // namespace multistop

#endif  // MULTISTOP_GENERATORS_HPP
