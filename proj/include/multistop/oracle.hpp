#ifndef MULTISTOP_ORACLE_HPP
#define MULTISTOP_ORACLE_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "multistop/double_stopping.hpp"
#include "multistop/scenario_tree.hpp"
#include "multistop/snell.hpp"

namespace multistop {

/// Limits on exhaustive enumeration; exceeding one raises BudgetError.
struct EnumerationBudget {
    std::uint64_t max_rules = 1'000'000;
    std::uint64_t max_pairs = 10'000'000;
};

/**
 * Visit every stopping rule from `start` exactly once.
 *
 * Order is stop-first: a node's Stop choice is visited before every
 * Continue completion, and pending nodes are decided in the order they
 * were reached (children in id order). The visited rule is only valid for
 * the duration of the callback.
 */
void for_each_rule(const ScenarioTree& tree, NodeId start, const std::function<void(const StoppingRule&)>& visit,
                   const EnumerationBudget& budget = {});

/// Materialized enumeration, same order as for_each_rule.
[[nodiscard]] std::vector<StoppingRule> enumerate_rules(const ScenarioTree& tree, NodeId start,
                                                        const EnumerationBudget& budget = {});

struct SingleOptimum {
    double value = 0.0;
    StoppingRule rule;
    std::uint64_t rules_evaluated = 0;
};

/// Max of E[phi(theta) | start] over all rules; the first maximizer in enumeration order is kept.
[[nodiscard]] SingleOptimum brute_force_single(const ScenarioTree& tree, const NodeReward& reward, NodeId start,
                                               const EnumerationBudget& budget = {});

struct DoubleOptimum {
    double value = 0.0;
    StoppingPair pair;
    std::uint64_t pairs_evaluated = 0;
};

/**
 * Max of E[psi(tau1, tau2) | start] over all ordered pairs of rules.
 *
 * Each pair is evaluated as a sum over scenarios (leaves under `start`) of
 * path probability times psi at the two stop nodes. The outer rule index
 * is split across threads; ties keep the lowest (outer, inner) index.
 */
[[nodiscard]] DoubleOptimum brute_force_double(const ScenarioTree& tree, const BiReward& psi, NodeId start,
                                               const EnumerationBudget& budget = {}, unsigned threads = 1);

}  // namespace multistop

#endif  // MULTISTOP_ORACLE_HPP
