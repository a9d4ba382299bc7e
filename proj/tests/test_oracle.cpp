#include <gtest/gtest.h>

#include <set>

#include "multistop/errors.hpp"
#include "multistop/generators.hpp"
#include "multistop/oracle.hpp"
#include "support/oracles.hpp"

using namespace multistop;

namespace {

std::vector<std::uint8_t> decisions_of(const ScenarioTree& tree, const StoppingRule& rule) {
    std::vector<std::uint8_t> d(tree.size());
    for (NodeId n = 0; n < tree.size(); ++n) d[n] = static_cast<std::uint8_t>(rule.at(n));
    return d;
}

}  // namespace

TEST(EnumerateRules, KnownCounts) {
    EXPECT_EQ(enumerate_rules(uniform_tree(4, 2), 15).size(), 1U);
    EXPECT_EQ(enumerate_rules(uniform_tree(2, 2), 0).size(), 5U);
    EXPECT_EQ(enumerate_rules(uniform_tree(4, 2), 0).size(), 677U);
}

TEST(EnumerateRules, DistinctValidAndStopFirst) {
    Rng rng(12);
    const ScenarioTree tree = random_tree(3, 3, rng);
    const std::vector<StoppingRule> rules = enumerate_rules(tree, 0);
    ASSERT_FALSE(rules.empty());
    EXPECT_EQ(rules.front(), StoppingRule::stop_at_start(tree, 0));
    EXPECT_EQ(rules.back(), StoppingRule::stop_at_leaves(tree, 0));
    std::set<std::vector<std::uint8_t>> seen;
    for (const StoppingRule& r : rules) {
        EXPECT_NO_THROW(r.validate(tree));
        EXPECT_TRUE(seen.insert(decisions_of(tree, r)).second);
    }
}

TEST(EnumerateRules, DepthTwoOrder) {
    // Stop-first over the pending frontier: root, then node 1, then node 2.
    const ScenarioTree tree = uniform_tree(2, 2);
    const std::vector<StoppingRule> rules = enumerate_rules(tree, 0);
    ASSERT_EQ(rules.size(), 5U);
    const std::vector<std::vector<NodeId>> expected_stops{{0}, {1, 2}, {1, 5, 6}, {2, 3, 4}, {3, 4, 5, 6}};
    for (std::size_t i = 0; i < rules.size(); ++i) EXPECT_EQ(rules[i].stop_nodes(), expected_stops[i]) << i;
}

TEST(EnumerateRules, BudgetIsEnforced) {
    EnumerationBudget tight;
    tight.max_rules = 676;
    EXPECT_THROW((void)enumerate_rules(uniform_tree(4, 2), 0, tight), BudgetError);
    tight.max_rules = 677;
    EXPECT_EQ(enumerate_rules(uniform_tree(4, 2), 0, tight).size(), 677U);
    // Depth 5 has 458330 rules and fits; depth 6 does not.
    EXPECT_THROW((void)enumerate_rules(uniform_tree(6, 2), 0), BudgetError);
}

TEST(BruteForceSingle, ConstantRewardKeepsFirstMaximizer) {
    const ScenarioTree tree = uniform_tree(3, 2);
    const SingleOptimum best = brute_force_single(tree, NodeReward::constant(tree, 3.0), 0);
    EXPECT_EQ(best.value, 3.0);
    EXPECT_EQ(best.rule, StoppingRule::stop_at_start(tree, 0));
    EXPECT_EQ(best.rules_evaluated, 26U);
}

TEST(BruteForceSingle, DepthOneExample) {
    const ScenarioTree tree = uniform_tree(1, 2);
    const SingleOptimum best = brute_force_single(tree, NodeReward(tree, {0.0, 2.0, 0.0}), 0);
    EXPECT_EQ(best.value, 1.0);
    EXPECT_EQ(best.rule, StoppingRule::stop_at_time(tree, 0, 1));
    EXPECT_EQ(best.rules_evaluated, 2U);
}

TEST(BruteForceSingle, MaximizerAttainsReportedValue) {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        Rng rng(seed);
        const ScenarioTree tree = random_tree(3, 3, rng);
        const NodeReward reward = uniform_node_reward(tree, rng);
        const SingleOptimum best = brute_force_single(tree, reward, 0);
        EXPECT_EQ(evaluate_rule(tree, reward, best.rule), best.value);
        EXPECT_NEAR(oracle_support::rule_value_by_scenarios(tree, reward, best.rule), best.value, 1e-14);
    }
}

TEST(BruteForceDouble, ConstantRewardStopsBothNow) {
    const ScenarioTree tree = uniform_tree(2, 2);
    const DoubleOptimum best = brute_force_double(tree, BiReward::constant(tree, 0.5), 0);
    EXPECT_EQ(best.value, 0.5);
    EXPECT_EQ(best.pair.first, StoppingRule::stop_at_start(tree, 0));
    EXPECT_EQ(best.pair.second, StoppingRule::stop_at_start(tree, 0));
    EXPECT_EQ(best.pairs_evaluated, 25U);
}

TEST(BruteForceDouble, LaterNodeSubmartingalePayoffWaitsToLeaves) {
    // psi = X at the later stop with X = 1 + t^2, a deterministic submartingale.
    Rng rng(77);
    const ScenarioTree tree = random_binary_tree(3, rng);
    std::vector<double> x(tree.size());
    for (NodeId n = 0; n < tree.size(); ++n) x[n] = 1.0 + tree.time(n) * tree.time(n);
    std::vector<int> t(tree.size());
    for (NodeId n = 0; n < tree.size(); ++n) t[n] = tree.time(n);
    const BiReward psi(tree, [x, t](NodeId a, NodeId b) { return t[a] >= t[b] ? x[a] : x[b]; });
    const DoubleOptimum best = brute_force_double(tree, psi, 0);
    EXPECT_EQ(best.value, 10.0);
    for (NodeId leaf : tree.leaves_under(0)) {
        const NodeId s1 = stopped_node(tree, best.pair.first, leaf);
        const NodeId s2 = stopped_node(tree, best.pair.second, leaf);
        EXPECT_EQ(std::max(tree.time(s1), tree.time(s2)), tree.horizon());
    }
}

TEST(BruteForceDouble, MaximizerAttainsValueAndIsThreadIndependent) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        const ScenarioTree tree = random_binary_tree(3, rng);
        const BiReward psi(uniform_bireward_table(tree, rng));
        const DoubleOptimum one = brute_force_double(tree, psi, 0, {}, 1);
        const DoubleOptimum many = brute_force_double(tree, psi, 0, {}, 4);
        EXPECT_EQ(one.value, many.value);
        EXPECT_EQ(one.pair.first, many.pair.first);
        EXPECT_EQ(one.pair.second, many.pair.second);
        EXPECT_EQ(one.pairs_evaluated, 676U);
        EXPECT_NEAR(oracle_support::pair_value_by_scenarios(tree, psi, one.pair), one.value, 1e-15);
    }
}

TEST(BruteForceDouble, PairBudgetIsEnforced) {
    const ScenarioTree tree = uniform_tree(3, 2);
    EnumerationBudget tight;
    tight.max_pairs = 675;
    EXPECT_THROW((void)brute_force_double(tree, BiReward::constant(tree, 1.0), 0, tight), BudgetError);
    EXPECT_THROW((void)brute_force_double(uniform_tree(5, 2), BiReward::constant(uniform_tree(5, 2), 1.0), 0),
                 BudgetError);
}
