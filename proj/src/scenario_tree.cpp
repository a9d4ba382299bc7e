#include "multistop/scenario_tree.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <fmt/format.h>

#include "multistop/errors.hpp"

namespace multistop {

ScenarioTree::ScenarioTree()
    : time_{0}, parent_{kNoNode}, prob_{1.0}, first_child_{1}, child_count_{0}, level_begin_{0, 1} {}

void ScenarioTree::require_node(NodeId n) const {
    if (!contains(n)) {
        throw InputError(fmt::format("node {} is not in the tree (size {})", n, size()));
    }
}

bool ScenarioTree::is_ancestor_or_equal(NodeId a, NodeId b) const {
    require_node(a);
    require_node(b);
    if (time_[a] > time_[b]) return false;
    while (time_[b] > time_[a]) b = parent_[b];
    return a == b;
}

NodeId ScenarioTree::ancestor_at(NodeId n, int t) const {
    require_node(n);
    if (t < 0 || t > time_[n]) {
        throw InputError(fmt::format("node {} has no ancestor at time {}", n, t));
    }
    while (time_[n] > t) n = parent_[n];
    return n;
}

std::vector<NodeId> ScenarioTree::subtree(NodeId n) const {
    require_node(n);
    std::vector<NodeId> out{n};
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (NodeId c : children(out[i])) out.push_back(c);
    }
    return out;
}

std::vector<NodeId> ScenarioTree::leaves_under(NodeId n) const {
    std::vector<NodeId> out;
    for (NodeId m : subtree(n)) {
        if (is_leaf(m)) out.push_back(m);
    }
    return out;
}

double ScenarioTree::conditional_prob(NodeId from, NodeId to) const {
    if (!is_ancestor_or_equal(from, to)) {
        throw InputError(fmt::format("node {} is not under node {}", to, from));
    }
    double p = 1.0;
    for (NodeId m = to; m != from; m = parent_[m]) p *= prob_[m];
    return p;
}

ScenarioTree build_tree(std::span<const NodeSpec> nodes) {
    if (nodes.empty()) throw InputError("tree has no nodes");
    if (nodes.size() > kMaxTreeNodes) {
        throw InputError(fmt::format("tree has {} nodes, cap is {}", nodes.size(), kMaxTreeNodes));
    }
    const std::size_t n = nodes.size();
    const bool with_state = nodes.front().state.has_value();

    ScenarioTree tree;
    tree.time_.assign(n, 0);
    tree.parent_.assign(n, kNoNode);
    tree.prob_.assign(n, 1.0);
    tree.first_child_.assign(n, 0);
    tree.child_count_.assign(n, 0);
    tree.state_.clear();
    if (with_state) tree.state_.assign(n, 0.0);

    const NodeSpec& root = nodes.front();
    if (root.id != 0 || root.parent.has_value() || root.t != 0) {
        throw InputError("node 0 must be the root: id 0, t 0, parent null");
    }
    if (std::abs(root.prob - 1.0) > kProbabilitySumTolerance) {
        throw InputError(fmt::format("root probability must be 1, got {}", root.prob));
    }

    NodeId next_child = 1;
    for (std::size_t k = 0; k < n; ++k) {
        const NodeSpec& spec = nodes[k];
        const auto id = static_cast<NodeId>(k);
        if (spec.id != id) {
            throw InputError(fmt::format("node at position {} has id {}; ids must be dense breadth-first", k, spec.id));
        }
        if (spec.state.has_value() != with_state) {
            throw InputError("state must be given for every node or for none");
        }
        if (with_state) {
            if (!std::isfinite(*spec.state)) throw InputError(fmt::format("node {} has a non-finite state", k));
            tree.state_[k] = *spec.state;
        }
        if (k > 0) {
            if (!spec.parent.has_value()) throw InputError(fmt::format("node {} has no parent; only node 0 may be the root", k));
            const NodeId p = *spec.parent;
            if (p >= id) throw InputError(fmt::format("node {} has parent {} which is not earlier in breadth-first order", k, p));
            if (tree.parent_[k] != p) {
                throw InputError(fmt::format("node {} names parent {} but is not listed among its children", k, p));
            }
            if (spec.t != tree.time_[p] + 1) {
                throw InputError(fmt::format("node {} has t = {} but its parent has t = {}", k, spec.t, tree.time_[p]));
            }
            if (!(spec.prob > 0.0 && spec.prob <= 1.0) || !std::isfinite(spec.prob)) {
                throw InputError(fmt::format("node {} has probability {} outside (0, 1]", k, spec.prob));
            }
            tree.time_[k] = spec.t;
            tree.prob_[k] = spec.prob;
            if (tree.time_[k] < tree.time_[k - 1]) {
                throw InputError(fmt::format("node {} breaks level contiguity", k));
            }
        }

        tree.first_child_[k] = next_child;
        tree.child_count_[k] = static_cast<NodeId>(spec.children.size());
        for (std::size_t c = 0; c < spec.children.size(); ++c) {
            const NodeId expected = next_child + static_cast<NodeId>(c);
            if (spec.children[c] != expected || expected >= n) {
                throw InputError(fmt::format(
                    "node {} lists child {}; breadth-first order requires {}", k, spec.children[c], expected));
            }
            tree.parent_[expected] = id;
        }
        next_child += static_cast<NodeId>(spec.children.size());
    }
    if (next_child != n) {
        throw InputError(fmt::format("{} of {} nodes are unreachable from the root", n - next_child, n));
    }

    // Child probabilities need the full node list.
    for (std::size_t k = 0; k < n; ++k) {
        if (tree.child_count_[k] == 0) continue;
        double sum = 0.0;
        for (NodeId c : tree.children(static_cast<NodeId>(k))) sum += tree.prob_[c];
        if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
            throw InputError(fmt::format("child probabilities of node {} sum to {}", k, sum));
        }
    }

    tree.horizon_ = tree.time_.back();
    for (std::size_t k = 0; k < n; ++k) {
        if (tree.child_count_[k] == 0 && tree.time_[k] != tree.horizon_) {
            throw InputError(fmt::format("leaf {} has t = {} but the horizon is {}", k, tree.time_[k], tree.horizon_));
        }
    }

    tree.level_begin_.assign(static_cast<std::size_t>(tree.horizon_) + 2, 0);
    for (std::size_t k = 0; k < n; ++k) tree.level_begin_[static_cast<std::size_t>(tree.time_[k]) + 1] = static_cast<NodeId>(k + 1);
    return tree;
}

ScenarioTree build_tree(const LevelSpec& spec) {
    std::vector<NodeSpec> nodes(1);
    nodes[0].prob = 1.0;
    std::size_t level_begin = 0;
    for (std::size_t t = 0; t < spec.levels.size(); ++t) {
        const auto& probs = spec.levels[t];
        if (probs.empty()) throw InputError(fmt::format("level {} has no children", t));
        const std::size_t level_end = nodes.size();
        const std::size_t projected = level_end + (level_end - level_begin) * probs.size();
        if (projected > kMaxTreeNodes) {
            throw InputError(fmt::format("tree would exceed the {} node cap", kMaxTreeNodes));
        }
        for (std::size_t p = level_begin; p < level_end; ++p) {
            for (double q : probs) {
                NodeSpec child;
                child.id = static_cast<NodeId>(nodes.size());
                child.t = static_cast<int>(t) + 1;
                child.parent = static_cast<NodeId>(p);
                child.prob = q;
                nodes[p].children.push_back(child.id);
                nodes.push_back(std::move(child));
            }
        }
        level_begin = level_end;
    }
    return build_tree(std::span<const NodeSpec>(nodes));
}

ScenarioTree uniform_tree(int depth, int branching) {
    if (depth < 0 || branching < 1) throw InputError("uniform_tree needs depth >= 0 and branching >= 1");
    LevelSpec spec;
    spec.levels.assign(static_cast<std::size_t>(depth),
                       std::vector<double>(static_cast<std::size_t>(branching), 1.0 / branching));
    return build_tree(spec);
}

std::vector<NodeSpec> node_list(const ScenarioTree& tree) {
    std::vector<NodeSpec> out(tree.size());
    for (NodeId k = 0; k < tree.size(); ++k) {
        NodeSpec& s = out[k];
        s.id = k;
        s.t = tree.time(k);
        if (k != ScenarioTree::root()) s.parent = tree.parent(k);
        for (NodeId c : tree.children(k)) s.children.push_back(c);
        s.prob = tree.prob(k);
        if (tree.has_state()) s.state = tree.state(k);
    }
    return out;
}

// ---------------------------------------------------------------------------
// StoppingRule

StoppingRule StoppingRule::stop_at_start(const ScenarioTree& tree, NodeId start) {
    tree.require_node(start);
    StoppingRule rule(start, tree.size());
    rule.set(start, Decision::Stop);
    return rule;
}

StoppingRule StoppingRule::stop_at_leaves(const ScenarioTree& tree, NodeId start) {
    return stop_at_time(tree, start, tree.horizon());
}

StoppingRule StoppingRule::stop_at_time(const ScenarioTree& tree, NodeId start, int t) {
    StoppingRule rule(start, tree.size());
    for (NodeId m : tree.subtree(start)) {
        const bool stop = tree.time(m) >= t || tree.is_leaf(m);
        if (m != start && rule.at(tree.parent(m)) != Decision::Continue) continue;
        rule.set(m, stop ? Decision::Stop : Decision::Continue);
    }
    return rule;
}

std::vector<NodeId> StoppingRule::stop_nodes() const {
    std::vector<NodeId> out;
    for (NodeId k = 0; k < decisions_.size(); ++k) {
        if (decisions_[k] == Decision::Stop) out.push_back(k);
    }
    return out;
}

std::vector<NodeId> StoppingRule::continue_nodes() const {
    std::vector<NodeId> out;
    for (NodeId k = 0; k < decisions_.size(); ++k) {
        if (decisions_[k] == Decision::Continue) out.push_back(k);
    }
    return out;
}

void StoppingRule::validate(const ScenarioTree& tree) const {
    if (decisions_.size() != tree.size()) {
        throw InputError(fmt::format("rule covers {} nodes, tree has {}", decisions_.size(), tree.size()));
    }
    tree.require_node(start_);
    std::vector<char> reachable(tree.size(), 0);
    std::vector<NodeId> frontier{start_};
    while (!frontier.empty()) {
        const NodeId m = frontier.back();
        frontier.pop_back();
        reachable[m] = 1;
        switch (decisions_[m]) {
            case Decision::Stop:
                break;
            case Decision::Continue:
                if (tree.is_leaf(m)) throw InputError(fmt::format("rule continues at leaf {}", m));
                for (NodeId c : tree.children(m)) frontier.push_back(c);
                break;
            case Decision::Undefined:
                throw InputError(fmt::format("rule has no decision at reachable node {}", m));
        }
    }
    for (NodeId k = 0; k < tree.size(); ++k) {
        if (!reachable[k] && decisions_[k] != Decision::Undefined) {
            throw InputError(fmt::format("rule decides at unreachable node {}", k));
        }
    }
}

NodeId stopped_node(const ScenarioTree& tree, const StoppingRule& rule, NodeId leaf) {
    tree.require_node(leaf);
    const NodeId start = rule.start();
    if (!tree.is_ancestor_or_equal(start, leaf)) {
        throw InputError(fmt::format("node {} is not under the rule's start node {}", leaf, start));
    }
    // Walk down the root path of `leaf` from `start`.
    const int t0 = tree.time(start);
    for (int t = t0; t <= tree.time(leaf); ++t) {
        const NodeId m = tree.ancestor_at(leaf, t);
        const Decision d = rule.at(m);
        if (d == Decision::Stop) return m;
        if (d != Decision::Continue) {
            throw InputError(fmt::format("rule has no decision at node {}", m));
        }
    }
    throw InputError(fmt::format("rule never stops on the path to node {}", leaf));
}

std::uint64_t count_stopping_rules(const ScenarioTree& tree, NodeId start) {
    constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
    const auto nodes = tree.subtree(start);
    std::vector<std::uint64_t> f(tree.size(), 0);
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        const NodeId m = *it;
        if (tree.is_leaf(m)) {
            f[m] = 1;
            continue;
        }
        std::uint64_t product = 1;
        for (NodeId c : tree.children(m)) {
            if (f[c] != 0 && product > kMax / f[c]) {
                product = kMax;
                break;
            }
            product *= f[c];
        }
        f[m] = product == kMax ? kMax : product + 1;
    }
    return f[start];
}

}  // namespace multistop
