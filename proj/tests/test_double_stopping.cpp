#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "multistop/double_stopping.hpp"
#include "multistop/errors.hpp"
#include "multistop/generators.hpp"
#include "multistop/oracle.hpp"
#include "multistop/tree_io.hpp"
#include "support/oracles.hpp"

using namespace multistop;

namespace {

/// Node reward m -> psi(m, theta) on theta's subtree, zero elsewhere.
NodeReward first_leg_reward(const ScenarioTree& tree, const BiReward& psi, NodeId theta) {
    std::vector<double> r(tree.size(), 0.0);
    for (NodeId m : tree.subtree(theta)) r[m] = psi(m, theta);
    return NodeReward(tree, std::move(r));
}

NodeReward second_leg_reward(const ScenarioTree& tree, const BiReward& psi, NodeId theta) {
    std::vector<double> r(tree.size(), 0.0);
    for (NodeId m : tree.subtree(theta)) r[m] = psi(theta, m);
    return NodeReward(tree, std::move(r));
}

/// psi(a, b) = payoff at the deeper of the two nodes.
BiReward deeper_node_reward(const ScenarioTree& tree, std::vector<double> payoff) {
    std::vector<int> t(tree.size());
    for (NodeId n = 0; n < tree.size(); ++n) t[n] = tree.time(n);
    return BiReward(tree, [payoff = std::move(payoff), t = std::move(t)](NodeId a, NodeId b) {
        return t[a] >= t[b] ? payoff[a] : payoff[b];
    });
}

BiReward symmetric_random_reward(const ScenarioTree& tree, Rng& rng) {
    BiRewardTable table = uniform_bireward_table(tree, rng);
    table.for_each_pair([&](NodeId a, NodeId b) {
        if (tree.time(a) < tree.time(b)) table.set(a, b, table.at(b, a));
    });
    return BiReward(std::move(table));
}

}  // namespace

TEST(BiReward, RejectsIncomparableAndNegativeValues) {
    const ScenarioTree tree = uniform_tree(2, 2);
    BiRewardTable table(tree);
    EXPECT_THROW(table.set(1, 2, 1.0), InputError);
    EXPECT_THROW(table.set(3, 5, 1.0), InputError);
    EXPECT_THROW(table.set(0, 3, -1.0), InputError);
    EXPECT_NO_THROW(table.set(0, 3, 1.0));
    EXPECT_NO_THROW(table.set(3, 1, 1.0));
    EXPECT_FALSE(table.complete());

    const BiReward f(tree, [](NodeId, NodeId) { return -1.0; });
    EXPECT_THROW((void)f(0, 1), InputError);
    const BiReward c = BiReward::constant(tree, 2.0);
    EXPECT_THROW((void)c(3, 4), InputError);
    EXPECT_EQ(c(4, 1), 2.0);
}

TEST(BiReward, TableCountsComparablePairs) {
    // Binary depth 2: sum over nodes of (depth + 1) ancestor-or-self pairs, ordered both ways minus the diagonal.
    const ScenarioTree tree = uniform_tree(2, 2);
    const BiRewardTable table(tree);
    EXPECT_EQ(table.pair_count(), 2U * (1 + 2 * 2 + 4 * 3) - 7U);
    std::size_t visited = 0;
    table.for_each_pair([&](NodeId a, NodeId b) {
        EXPECT_TRUE(tree.comparable(a, b));
        ++visited;
    });
    EXPECT_EQ(visited, table.pair_count());
}

TEST(ConditionalValues, ConstantRewardGivesConstant) {
    const ScenarioTree tree = uniform_tree(3, 2);
    const BiReward psi = BiReward::constant(tree, 0.75);
    for (NodeId n = 0; n < tree.size(); ++n) {
        EXPECT_EQ(conditional_value_u1(tree, psi, n), 0.75);
        EXPECT_EQ(conditional_value_u2(tree, psi, n), 0.75);
    }
    const NodeReward phi = new_reward(tree, psi);
    for (NodeId n = 0; n < tree.size(); ++n) EXPECT_EQ(phi[n], 0.75);
}

TEST(ConditionalValues, LeafValueIsDiagonal) {
    Rng rng(8);
    const ScenarioTree tree = random_binary_tree(3, rng);
    const BiReward psi(uniform_bireward_table(tree, rng));
    for (NodeId leaf : tree.leaves_under(0)) {
        EXPECT_EQ(conditional_value_u1(tree, psi, leaf), psi(leaf, leaf));
        EXPECT_EQ(conditional_value_u2(tree, psi, leaf), psi(leaf, leaf));
    }
}

TEST(ConditionalValues, MatchSubtreeOracle) {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        Rng rng(seed);
        const ScenarioTree tree = random_binary_tree(3, rng);
        const BiReward psi(uniform_bireward_table(tree, rng));
        const ConditionalValues cv = conditional_values(tree, psi);
        for (NodeId n = 0; n < tree.size(); ++n) {
            const double u1 = brute_force_single(tree, first_leg_reward(tree, psi, n), n).value;
            const double u2 = brute_force_single(tree, second_leg_reward(tree, psi, n), n).value;
            EXPECT_EQ(conditional_value_u1(tree, psi, n), u1) << "seed " << seed << " node " << n;
            EXPECT_EQ(conditional_value_u2(tree, psi, n), u2) << "seed " << seed << " node " << n;
            EXPECT_EQ(cv.u1[n], u1);
            EXPECT_EQ(cv.u2[n], u2);
            EXPECT_EQ(cv.phi[n], std::max(u1, u2));
        }
    }
}

TEST(ConditionalValues, SymmetricRewardGivesEqualLegs) {
    Rng rng(13);
    const ScenarioTree tree = random_tree(3, 3, rng);
    const BiReward psi = symmetric_random_reward(tree, rng);
    const ConditionalValues cv = conditional_values(tree, psi);
    for (NodeId n = 0; n < tree.size(); ++n) EXPECT_EQ(cv.u1[n], cv.u2[n]);
}

TEST(ConditionalValues, DeeperNodeRewardReducesToSingleEnvelope) {
    Rng rng(21);
    const ScenarioTree tree = random_tree(4, 3, rng);
    const NodeReward x = uniform_node_reward(tree, rng);
    const BiReward psi = deeper_node_reward(tree, std::vector<double>(x.values().begin(), x.values().end()));
    const ValueFamily v = snell_envelope(tree, x);
    const NodeReward phi = new_reward(tree, psi);
    for (NodeId n = 0; n < tree.size(); ++n) EXPECT_EQ(phi[n], v[n]) << "node " << n;
}

TEST(ConditionalValues, NonnegativeAndBitIdenticalAcrossThreads) {
    Rng rng(17);
    const ScenarioTree tree = random_tree(6, 3, rng);
    const BiReward psi(uniform_bireward_table(tree, rng));
    const ConditionalValues one = conditional_values(tree, psi, 1);
    const ConditionalValues many = conditional_values(tree, psi, 5);
    EXPECT_TRUE(std::ranges::equal(one.u1.values(), many.u1.values()));
    EXPECT_TRUE(std::ranges::equal(one.u2.values(), many.u2.values()));
    EXPECT_TRUE(std::ranges::equal(one.phi.values(), many.phi.values()));
    for (NodeId n = 0; n < tree.size(); ++n) {
        EXPECT_GE(one.u1[n], 0.0);
        EXPECT_GE(one.u2[n], 0.0);
        EXPECT_EQ(one.phi[n], std::max(one.u1[n], one.u2[n]));
    }
}

TEST(ReducedValue, ConstantReward) {
    const ScenarioTree tree = uniform_tree(3, 2);
    EXPECT_EQ(reduced_value(tree, BiReward::constant(tree, 1.25), 0), 1.25);
}

TEST(ReducedValue, RandomWalkSumMatchesPairOracleOverTwentyFivePairs) {
    // Walk started at 2 stays nonnegative for two steps, so psi = X(a) + X(b) needs no clipping.
    const ScenarioTree tree = random_walk_tree(2, 0.5, 2.0);
    const BiReward psi = state_bireward(tree, StateCombination::Sum);
    const DoubleOptimum best = brute_force_double(tree, psi, 0);
    EXPECT_EQ(best.pairs_evaluated, 25U);
    EXPECT_EQ(reduced_value(tree, psi, 0), best.value);
    // X is a martingale, so every pair is worth 2 * X(root).
    EXPECT_EQ(best.value, 4.0);
}

TEST(ReducedValue, MatchesPairOracleOnDepthFourBinaryTrees) {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(seed);
        const ScenarioTree tree = random_binary_tree(4, rng);
        const BiReward psi(uniform_bireward_table(tree, rng));
        EXPECT_NEAR(reduced_value(tree, psi, 0), brute_force_double(tree, psi, 0).value, 1e-12) << "seed " << seed;
    }
}

TEST(ReducedValue, MatchesPairOracleOnIrregularTreesAndInnerStarts) {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        Rng rng(seed);
        const ScenarioTree tree = random_tree(3, 3, rng);
        const BiReward psi(uniform_bireward_table(tree, rng));
        for (NodeId start : tree.level(1)) {
            EXPECT_NEAR(reduced_value(tree, psi, start), brute_force_double(tree, psi, start).value, 1e-12)
                << "seed " << seed << " start " << start;
        }
    }
}

TEST(OptimalPair, ConstantRewardStopsBothAtStart) {
    const ScenarioTree tree = uniform_tree(3, 2);
    const StoppingPair pair = optimal_pair(tree, BiReward::constant(tree, 1.0), 0);
    EXPECT_EQ(pair.first, StoppingRule::stop_at_start(tree, 0));
    EXPECT_EQ(pair.second, StoppingRule::stop_at_start(tree, 0));
}

TEST(OptimalPair, IncreasingDeeperPayoffWaitsUntilLeaves) {
    // Only the later stop matters: theta* stops at once (phi is flat), the tie sends tau1 there,
    // and tau2 runs to the leaves.
    const ScenarioTree tree = uniform_tree(3, 2);
    std::vector<double> payoff(tree.size());
    for (NodeId n = 0; n < tree.size(); ++n) payoff[n] = 1.0 + tree.time(n);
    const BiReward psi = deeper_node_reward(tree, payoff);
    const StoppingPair pair = optimal_pair(tree, psi, 0);
    EXPECT_EQ(pair.first, StoppingRule::stop_at_start(tree, 0));
    EXPECT_EQ(pair.second, StoppingRule::stop_at_leaves(tree, 0));
    EXPECT_EQ(evaluate_pair(tree, psi, pair), 4.0);
}

TEST(OptimalPair, PayoffIncreasingInBothStopsWaitsWithBothLegs) {
    const ScenarioTree tree = uniform_tree(3, 2);
    std::vector<int> t(tree.size());
    for (NodeId n = 0; n < tree.size(); ++n) t[n] = tree.time(n);
    const BiReward psi(tree, [t](NodeId a, NodeId b) { return 1.0 + t[a] + 2.0 * t[b]; });
    const StoppingPair pair = optimal_pair(tree, psi, 0);
    EXPECT_EQ(pair.first, StoppingRule::stop_at_leaves(tree, 0));
    EXPECT_EQ(pair.second, StoppingRule::stop_at_leaves(tree, 0));
    EXPECT_EQ(evaluate_pair(tree, psi, pair), 10.0);
}

TEST(OptimalPair, AttainsReducedValueAndOracleOptimum) {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(seed);
        const ScenarioTree tree = random_binary_tree(3, rng);
        const BiReward psi(uniform_bireward_table(tree, rng));
        const ReductionResult red = reduce(tree, psi, 0);
        const double value = evaluate_pair(tree, psi, red.pair);
        EXPECT_NEAR(value, red.u[0], 1e-10 * red.u[0]) << "seed " << seed;
        EXPECT_NEAR(value, brute_force_double(tree, psi, 0).value, 1e-12) << "seed " << seed;
    }
}

TEST(OptimalPair, BranchesFollowTheComparisonOfLegs) {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng(seed);
        const ScenarioTree tree = random_tree(4, 3, rng);
        const BiReward psi(uniform_bireward_table(tree, rng));
        const ReductionResult red = reduce(tree, psi, 0);
        ASSERT_EQ(red.branches.size(), red.theta_star.stop_nodes().size());
        for (const BranchChoice& b : red.branches) {
            EXPECT_EQ(b.in_b, red.u1[b.node] <= red.u2[b.node]);
            EXPECT_EQ(b.u1, red.u1[b.node]);
            EXPECT_EQ(b.u2, red.u2[b.node]);
            const StoppingRule& stops_here = b.in_b ? red.pair.first : red.pair.second;
            EXPECT_EQ(stops_here.at(b.node), Decision::Stop);
            for (NodeId leaf : tree.leaves_under(b.node)) {
                const NodeId s1 = stopped_node(tree, red.pair.first, leaf);
                const NodeId s2 = stopped_node(tree, red.pair.second, leaf);
                EXPECT_TRUE(tree.is_ancestor_or_equal(b.node, s1));
                EXPECT_TRUE(tree.is_ancestor_or_equal(b.node, s2));
            }
        }
        for (NodeId n = 0; n < tree.size(); ++n) EXPECT_EQ(red.phi[n], std::max(red.u1[n], red.u2[n]));
    }
}

TEST(OptimalPair, TieGoesToFirstLegAndEitherBranchHasTheSameValue) {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng(seed);
        const ScenarioTree tree = random_binary_tree(3, rng);
        const BiReward psi = symmetric_random_reward(tree, rng);
        const ReductionResult non_strict = reduce(tree, psi, 0, {}, 1, TieRule::NonStrict);
        const ReductionResult strict = reduce(tree, psi, 0, {}, 1, TieRule::Strict);
        for (const BranchChoice& b : non_strict.branches) EXPECT_TRUE(b.in_b);
        for (const BranchChoice& b : strict.branches) EXPECT_FALSE(b.in_b);
        EXPECT_NEAR(evaluate_pair(tree, psi, non_strict.pair), evaluate_pair(tree, psi, strict.pair), 1e-12)
            << "seed " << seed;
        EXPECT_NEAR(evaluate_pair(tree, psi, strict.pair), non_strict.u[0], 1e-12);
    }
}

TEST(EvaluatePair, ClosedFormCases) {
    Rng rng(30);
    const ScenarioTree tree = random_tree(3, 3, rng);
    const BiReward psi(uniform_bireward_table(tree, rng));
    const StoppingRule now = StoppingRule::stop_at_start(tree, 0);
    const StoppingRule last = StoppingRule::stop_at_leaves(tree, 0);
    EXPECT_EQ(evaluate_pair(tree, psi, {now, now}), psi(0, 0));
    double expected = 0.0;
    for (NodeId leaf : tree.leaves_under(0)) expected += tree.conditional_prob(0, leaf) * psi(0, leaf);
    EXPECT_NEAR(evaluate_pair(tree, psi, {now, last}), expected, 1e-15);
}

TEST(EvaluatePair, RejectsMismatchedStarts) {
    const ScenarioTree tree = uniform_tree(2, 2);
    const BiReward psi = BiReward::constant(tree, 1.0);
    EXPECT_THROW(
        (void)evaluate_pair(tree, psi, {StoppingRule::stop_at_start(tree, 0), StoppingRule::stop_at_start(tree, 1)}),
        InputError);
}

TEST(EvaluatePair, StepOneChainOnRandomPairs) {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        Rng rng(seed);
        const ScenarioTree tree = random_tree(4, 3, rng);
        const BiReward psi(uniform_bireward_table(tree, rng));
        const ReductionResult red = reduce(tree, psi, 0);
        for (int k = 0; k < 200; ++k) {
            const StoppingPair pair{random_rule(tree, 0, rng), random_rule(tree, 0, rng)};
            const double value = evaluate_pair(tree, psi, pair);
            EXPECT_NEAR(value, oracle_support::pair_value_by_scenarios(tree, psi, pair), 1e-14);
            const double at_earlier = evaluate_rule(tree, red.phi, earliest_of(tree, pair.first, pair.second));
            EXPECT_LE(value, at_earlier + 1e-12);
            EXPECT_LE(at_earlier, red.u[0] + 1e-12);
        }
    }
}

TEST(EarliestOf, StopsAtPathwiseMinimum) {
    Rng rng(4);
    const ScenarioTree tree = random_tree(4, 2, rng);
    for (int k = 0; k < 50; ++k) {
        const StoppingRule a = random_rule(tree, 0, rng);
        const StoppingRule b = random_rule(tree, 0, rng);
        const StoppingRule e = earliest_of(tree, a, b);
        for (NodeId leaf : tree.leaves_under(0)) {
            const NodeId sa = stopped_node(tree, a, leaf);
            const NodeId sb = stopped_node(tree, b, leaf);
            EXPECT_EQ(stopped_node(tree, e, leaf), tree.time(sa) <= tree.time(sb) ? sa : sb);
        }
    }
}

TEST(PsiJson, RoundTripIsExact) {
    Rng rng(6);
    const ScenarioTree tree = random_binary_tree(2, rng);
    const BiRewardTable table = uniform_bireward_table(tree, rng);
    const BiRewardTable back = psi_from_json(Json::parse(psi_to_json(table).dump()), tree);
    table.for_each_pair([&](NodeId a, NodeId b) { EXPECT_EQ(back.at(a, b), table.at(a, b)); });

    Json incomparable = psi_to_json(table);
    incomparable["psi"].push_back({{"a", 1}, {"b", 2}, {"value", 0.5}});
    EXPECT_THROW((void)psi_from_json(incomparable, tree), InputError);
    Json partial = psi_to_json(table);
    partial["psi"].erase(partial["psi"].begin());
    EXPECT_THROW((void)psi_from_json(partial, tree), InputError);
}

TEST(ReductionCsv, Header) {
    const ScenarioTree tree = uniform_tree(1, 2);
    std::ostringstream os;
    write_reduction_csv(os, tree, reduce(tree, BiReward::constant(tree, 1.0), 0));
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "node_id,t,u1,u2,phi,u");
    EXPECT_NE(os.str().find("0,0,1,1,1,1\n"), std::string::npos);
}
