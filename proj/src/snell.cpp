#include "multistop/snell.hpp"

#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "multistop/detail/backward.hpp"
#include "multistop/errors.hpp"
#include "multistop/parallel.hpp"

namespace multistop {

NodeReward::NodeReward(const ScenarioTree& tree, std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() != tree.size()) {
        throw InputError(fmt::format("reward has {} values, tree has {} nodes", values_.size(), tree.size()));
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!std::isfinite(values_[k]) || values_[k] < 0.0) {
            throw InputError(fmt::format("reward at node {} is {}; rewards must be finite and nonnegative", k, values_[k]));
        }
    }
}

NodeReward NodeReward::constant(const ScenarioTree& tree, double c) {
    return NodeReward(tree, std::vector<double>(tree.size(), c));
}

ValueFamily snell_envelope(const ScenarioTree& tree, const NodeReward& reward, unsigned threads) {
    if (reward.size() != tree.size()) throw InputError("reward does not match the tree");
    std::vector<double> v(tree.size());
    for (int t = tree.horizon(); t >= 0; --t) {
        const auto level = tree.level(t);
        const NodeId first = *level.begin();
        const auto count = static_cast<std::size_t>(std::ranges::distance(level));
        parallel_for(count, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const auto m = static_cast<NodeId>(first + i);
                v[m] = tree.is_leaf(m) ? reward[m] : std::max(reward[m], detail::continuation(tree, m, v));
            }
        });
    }
    return ValueFamily(reward, std::move(v));
}

ValueFamily snell_envelope_from(const ScenarioTree& tree, const NodeReward& reward, NodeId start) {
    if (reward.size() != tree.size()) throw InputError("reward does not match the tree");
    std::vector<double> v(tree.size(), std::numeric_limits<double>::quiet_NaN());
    const auto nodes = tree.subtree(start);
    detail::subtree_envelope(tree, nodes, [&](NodeId m) { return reward[m]; }, std::span<double>(v));
    return ValueFamily(reward, std::move(v));
}

namespace {

template <typename StopTest>
StoppingRule first_hitting_rule(const ScenarioTree& tree, NodeId start, StopTest&& stop_here) {
    tree.require_node(start);
    StoppingRule rule(start, tree.size());
    std::vector<NodeId> frontier{start};
    while (!frontier.empty()) {
        const NodeId m = frontier.back();
        frontier.pop_back();
        if (tree.is_leaf(m) || stop_here(m)) {
            rule.set(m, Decision::Stop);
        } else {
            rule.set(m, Decision::Continue);
            for (NodeId c : tree.children(m)) frontier.push_back(c);
        }
    }
    return rule;
}

}  // namespace

StoppingRule optimal_stop(const ScenarioTree& tree, const ValueFamily& values, NodeId start, StopTolerance tol) {
    if (values.size() != tree.size()) throw InputError("values do not match the tree");
    const NodeReward& phi = values.reward();
    return first_hitting_rule(tree, start, [&](NodeId m) { return tol.touches(values[m], phi[m]); });
}

StoppingRule lambda_stop(const ScenarioTree& tree, const ValueFamily& values, NodeId start, double lambda,
                         StopTolerance tol) {
    if (!(lambda > 0.0 && lambda < 1.0)) {
        throw InputError(fmt::format("lambda must lie in (0, 1), got {}", lambda));
    }
    if (values.size() != tree.size()) throw InputError("values do not match the tree");
    const NodeReward& phi = values.reward();
    return first_hitting_rule(tree, start, [&](NodeId m) {
        return lambda * values[m] <= phi[m] || tol.touches(values[m], phi[m]);
    });
}

double evaluate_rule(const ScenarioTree& tree, const NodeReward& reward, const StoppingRule& rule) {
    rule.validate(tree);
    if (reward.size() != tree.size()) throw InputError("reward does not match the tree");
    std::vector<NodeId> reached{rule.start()};
    for (std::size_t i = 0; i < reached.size(); ++i) {
        if (rule.at(reached[i]) == Decision::Continue) {
            for (NodeId c : tree.children(reached[i])) reached.push_back(c);
        }
    }
    std::vector<double> e(tree.size(), 0.0);
    for (auto it = reached.rbegin(); it != reached.rend(); ++it) {
        const NodeId m = *it;
        e[m] = rule.at(m) == Decision::Stop ? reward[m] : detail::continuation(tree, m, e);
    }
    return e[rule.start()];
}

SupermartingaleReport check_supermartingale(const ScenarioTree& tree, std::span<const double> values) {
    if (values.size() != tree.size()) throw InputError("values do not match the tree");
    SupermartingaleReport report;
    for (NodeId m = 0; m < tree.size(); ++m) {
        if (tree.is_leaf(m)) continue;
        const double gap = detail::continuation(tree, m, values) - values[m];
        if (gap > report.max_violation) {
            report.max_violation = gap;
            report.worst_node = m;
        }
    }
    return report;
}

void write_values_csv(std::ostream& os, const ScenarioTree& tree, const ValueFamily& values) {
    os << "node_id,t,phi,v\n";
    for (NodeId m = 0; m < tree.size(); ++m) {
        fmt::print(os, "{},{},{:.17g},{:.17g}\n", m, tree.time(m), values.reward()[m], values[m]);
    }
}

}  // namespace multistop
