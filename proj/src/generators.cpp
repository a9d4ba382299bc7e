#include "multistop/generators.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "multistop/errors.hpp"

namespace multistop {

ScenarioTree random_binary_tree(int depth, Rng& rng) {
    if (depth < 0) throw InputError("depth must be nonnegative");
    std::uniform_real_distribution<double> up(0.1, 0.9);
    std::vector<NodeSpec> nodes(1);
    std::size_t level_begin = 0;
    for (int t = 0; t < depth; ++t) {
        const std::size_t level_end = nodes.size();
        for (std::size_t p = level_begin; p < level_end; ++p) {
            const double q = up(rng);
            for (double prob : {q, 1.0 - q}) {
                NodeSpec child;
                child.id = static_cast<NodeId>(nodes.size());
                child.t = t + 1;
                child.parent = static_cast<NodeId>(p);
                child.prob = prob;
                nodes[p].children.push_back(child.id);
                nodes.push_back(std::move(child));
            }
        }
        level_begin = level_end;
    }
    return build_tree(std::span<const NodeSpec>(nodes));
}

ScenarioTree random_tree(int depth, int max_branching, Rng& rng) {
    if (depth < 0 || max_branching < 1) throw InputError("random_tree needs depth >= 0 and max_branching >= 1");
    std::uniform_int_distribution<int> branching(1, max_branching);
    std::uniform_real_distribution<double> weight(0.1, 1.0);
    std::vector<NodeSpec> nodes(1);
    std::size_t level_begin = 0;
    for (int t = 0; t < depth; ++t) {
        const std::size_t level_end = nodes.size();
        for (std::size_t p = level_begin; p < level_end; ++p) {
            const int k = branching(rng);
            std::vector<double> w(static_cast<std::size_t>(k));
            double total = 0.0;
            for (double& x : w) total += (x = weight(rng));
            // Last child takes the remainder so the sum is 1 to rounding.
            double assigned = 0.0;
            for (int c = 0; c < k; ++c) {
                NodeSpec child;
                child.id = static_cast<NodeId>(nodes.size());
                child.t = t + 1;
                child.parent = static_cast<NodeId>(p);
                child.prob = c + 1 < k ? w[static_cast<std::size_t>(c)] / total : 1.0 - assigned;
                assigned += child.prob;
                nodes[p].children.push_back(child.id);
                nodes.push_back(std::move(child));
            }
        }
        level_begin = level_end;
    }
    return build_tree(std::span<const NodeSpec>(nodes));
}

ScenarioTree random_walk_tree(int depth, double p, double origin) {
    if (!(p > 0.0 && p < 1.0)) throw InputError(fmt::format("walk probability must lie in (0, 1), got {}", p));
    LevelSpec spec;
    spec.levels.assign(static_cast<std::size_t>(std::max(depth, 0)), std::vector<double>{p, 1.0 - p});
    const ScenarioTree shape = build_tree(spec);
    std::vector<double> states(shape.size(), origin);
    for (NodeId m = 1; m < shape.size(); ++m) {
        const bool up = m == *shape.children(shape.parent(m)).begin();
        states[m] = states[shape.parent(m)] + (up ? 1.0 : -1.0);
    }
    return with_states(shape, states);
}

ScenarioTree with_states(const ScenarioTree& tree, std::span<const double> states) {
    if (states.size() != tree.size()) throw InputError("state vector does not match the tree");
    auto nodes = node_list(tree);
    for (std::size_t k = 0; k < nodes.size(); ++k) nodes[k].state = states[k];
    return build_tree(std::span<const NodeSpec>(nodes));
}

NodeReward uniform_node_reward(const ScenarioTree& tree, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(tree.size());
    for (double& x : v) x = u(rng);
    return NodeReward(tree, std::move(v));
}

BiRewardTable uniform_bireward_table(const ScenarioTree& tree, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BiRewardTable table(tree);
    table.for_each_pair([&](NodeId a, NodeId b) { table.set(a, b, u(rng)); });
    return table;
}

StoppingRule random_rule(const ScenarioTree& tree, NodeId start, Rng& rng, double stop_prob) {
    tree.require_node(start);
    std::bernoulli_distribution stop(stop_prob);
    StoppingRule rule(start, tree.size());
    std::vector<NodeId> reached{start};
    for (std::size_t i = 0; i < reached.size(); ++i) {
        const NodeId m = reached[i];
        if (tree.is_leaf(m) || stop(rng)) {
            rule.set(m, Decision::Stop);
        } else {
            rule.set(m, Decision::Continue);
            for (NodeId c : tree.children(m)) reached.push_back(c);
        }
    }
    return rule;
}

NodeReward positive_state_reward(const ScenarioTree& tree) {
    if (!tree.has_state()) throw InputError("tree carries no node states");
    std::vector<double> v(tree.size());
    for (NodeId m = 0; m < tree.size(); ++m) v[m] = std::max(tree.state(m), 0.0);
    return NodeReward(tree, std::move(v));
}

StateCombination parse_state_combination(std::string_view name) {
    if (name == "sum") return StateCombination::Sum;
    if (name == "difference") return StateCombination::Difference;
    if (name == "max") return StateCombination::Max;
    if (name == "later") return StateCombination::Later;
    throw InputError(fmt::format("unknown psi generator '{}' (expected sum, difference, max, later)", name));
}

BiReward state_bireward(const ScenarioTree& tree, StateCombination kind) {
    if (!tree.has_state()) throw InputError("tree carries no node states");
    std::vector<double> x(tree.states().begin(), tree.states().end());
    std::vector<int> t(tree.size());
    for (NodeId m = 0; m < tree.size(); ++m) t[m] = tree.time(m);
    auto f = [x = std::move(x), t = std::move(t), kind](NodeId a, NodeId b) {
        double v = 0.0;
        switch (kind) {
            case StateCombination::Sum: v = x[a] + x[b]; break;
            case StateCombination::Difference: v = x[a] - x[b]; break;
            case StateCombination::Max: v = std::max(x[a], x[b]); break;
            case StateCombination::Later: v = t[a] >= t[b] ? x[a] : x[b]; break;
        }
        return std::max(v, 0.0);
    };
    return BiReward(tree, std::move(f));
}

}  // namespace multistop
