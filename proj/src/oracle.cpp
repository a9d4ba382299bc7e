#include "multistop/oracle.hpp"

#include <fmt/format.h>

#include "multistop/detail/backward.hpp"
#include "multistop/errors.hpp"
#include "multistop/parallel.hpp"

namespace multistop {

namespace {

class RuleEnumerator {
public:
    RuleEnumerator(const ScenarioTree& tree, NodeId start, const std::function<void(const StoppingRule&)>& visit)
        : tree_(tree), visit_(visit), rule_(start, tree.size()), pending_{start} {}

    void run() { decide(0); }

private:
    void decide(std::size_t index) {
        if (index == pending_.size()) {
            visit_(rule_);
            return;
        }
        const NodeId m = pending_[index];
        rule_.set(m, Decision::Stop);
        decide(index + 1);
        if (!tree_.is_leaf(m)) {
            rule_.set(m, Decision::Continue);
            const std::size_t mark = pending_.size();
            for (NodeId c : tree_.children(m)) pending_.push_back(c);
            decide(index + 1);
            pending_.resize(mark);
        }
        rule_.set(m, Decision::Undefined);
    }

    const ScenarioTree& tree_;
    const std::function<void(const StoppingRule&)>& visit_;
    StoppingRule rule_;
    std::vector<NodeId> pending_;
};

void require_rule_budget(const ScenarioTree& tree, NodeId start, const EnumerationBudget& budget) {
    const std::uint64_t count = count_stopping_rules(tree, start);
    if (count > budget.max_rules) {
        throw BudgetError(fmt::format("{} stopping rules from node {} exceed the budget of {}", count, start,
                                      budget.max_rules));
    }
}

/// Reachable-node evaluation without re-validating the rule.
double evaluate_enumerated(const ScenarioTree& tree, const NodeReward& reward, const StoppingRule& rule,
                           std::vector<NodeId>& reached, std::vector<double>& e) {
    reached.assign(1, rule.start());
    for (std::size_t i = 0; i < reached.size(); ++i) {
        if (rule.at(reached[i]) == Decision::Continue) {
            for (NodeId c : tree.children(reached[i])) reached.push_back(c);
        }
    }
    for (auto it = reached.rbegin(); it != reached.rend(); ++it) {
        const NodeId m = *it;
        e[m] = rule.at(m) == Decision::Stop ? reward[m] : detail::continuation(tree, m, e);
    }
    return e[rule.start()];
}

}  // namespace

void for_each_rule(const ScenarioTree& tree, NodeId start, const std::function<void(const StoppingRule&)>& visit,
                   const EnumerationBudget& budget) {
    tree.require_node(start);
    require_rule_budget(tree, start, budget);
    RuleEnumerator(tree, start, visit).run();
}

std::vector<StoppingRule> enumerate_rules(const ScenarioTree& tree, NodeId start, const EnumerationBudget& budget) {
    std::vector<StoppingRule> rules;
    for_each_rule(tree, start, [&](const StoppingRule& r) { rules.push_back(r); }, budget);
    return rules;
}

SingleOptimum brute_force_single(const ScenarioTree& tree, const NodeReward& reward, NodeId start,
                                 const EnumerationBudget& budget) {
    if (reward.size() != tree.size()) throw InputError("reward does not match the tree");
    SingleOptimum best;
    bool have = false;
    std::vector<NodeId> reached;
    std::vector<double> scratch(tree.size(), 0.0);
    for_each_rule(
        tree, start,
        [&](const StoppingRule& rule) {
            const double value = evaluate_enumerated(tree, reward, rule, reached, scratch);
            ++best.rules_evaluated;
            if (!have || value > best.value) {
                best.value = value;
                best.rule = rule;
                have = true;
            }
        },
        budget);
    return best;
}

DoubleOptimum brute_force_double(const ScenarioTree& tree, const BiReward& psi, NodeId start,
                                 const EnumerationBudget& budget, unsigned threads) {
    tree.require_node(start);
    const std::uint64_t rule_count = count_stopping_rules(tree, start);
    if (rule_count > budget.max_rules ||
        (rule_count != 0 && rule_count > budget.max_pairs / rule_count)) {
        throw BudgetError(fmt::format("{} x {} rule pairs from node {} exceed the budget of {} pairs", rule_count,
                                      rule_count, start, budget.max_pairs));
    }

    // Scenario data: path probability and psi over (stop time of tau1, stop time of tau2).
    const auto leaves = tree.leaves_under(start);
    const int t0 = tree.time(start);
    const auto span = static_cast<std::size_t>(tree.horizon() - t0 + 1);
    std::vector<double> weight(leaves.size());
    std::vector<double> psi_grid(leaves.size() * span * span);
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        weight[l] = tree.conditional_prob(start, leaves[l]);
        for (std::size_t i = 0; i < span; ++i) {
            const NodeId a = tree.ancestor_at(leaves[l], t0 + static_cast<int>(i));
            for (std::size_t j = 0; j < span; ++j) {
                const NodeId b = tree.ancestor_at(leaves[l], t0 + static_cast<int>(j));
                psi_grid[(l * span + i) * span + j] = psi(a, b);
            }
        }
    }

    // Stop time offset of every rule on every scenario.
    const std::vector<StoppingRule> rules = enumerate_rules(tree, start, budget);
    const std::size_t r_count = rules.size();
    const std::size_t l_count = leaves.size();
    std::vector<std::uint32_t> stop_offset(r_count * l_count);
    for (std::size_t r = 0; r < r_count; ++r) {
        for (std::size_t l = 0; l < l_count; ++l) {
            stop_offset[r * l_count + l] =
                static_cast<std::uint32_t>(tree.time(stopped_node(tree, rules[r], leaves[l])) - t0);
        }
    }

    struct Best {
        double value = -1.0;
        std::size_t outer = 0;
        std::size_t inner = 0;
        bool have = false;
    };
    if (threads == 0) threads = default_thread_count();
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, r_count));
    std::vector<Best> partial(workers);
    const std::size_t chunk = (r_count + workers - 1) / workers;
    parallel_for(workers, static_cast<unsigned>(workers), [&](std::size_t wb, std::size_t we) {
        for (std::size_t w = wb; w < we; ++w) {
            Best best;
            const std::size_t outer_end = std::min(r_count, (w + 1) * chunk);
            for (std::size_t i = w * chunk; i < outer_end; ++i) {
                const std::uint32_t* si = &stop_offset[i * l_count];
                for (std::size_t j = 0; j < r_count; ++j) {
                    const std::uint32_t* sj = &stop_offset[j * l_count];
                    double value = 0.0;
                    for (std::size_t l = 0; l < l_count; ++l) {
                        value += weight[l] * psi_grid[(l * span + si[l]) * span + sj[l]];
                    }
                    if (!best.have || value > best.value) best = Best{value, i, j, true};
                }
            }
            partial[w] = best;
        }
    });

    // Partials are in outer-index order; strict > keeps the earliest maximizer.
    Best best;
    for (const Best& b : partial) {
        if (b.have && (!best.have || b.value > best.value)) best = b;
    }
    return DoubleOptimum{best.value, StoppingPair{rules[best.outer], rules[best.inner]},
                         static_cast<std::uint64_t>(r_count) * r_count};
}

}  // namespace multistop
