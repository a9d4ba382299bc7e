#include "multistop/double_stopping.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "multistop/detail/backward.hpp"
#include "multistop/errors.hpp"
#include "multistop/parallel.hpp"

namespace multistop {

Genealogy::Genealogy(const ScenarioTree& tree) : time_(tree.size()), parent_(tree.size()) {
    for (NodeId n = 0; n < tree.size(); ++n) {
        time_[n] = tree.time(n);
        parent_[n] = tree.parent(n);
    }
}

// ---------------------------------------------------------------------------
// BiRewardTable

BiRewardTable::BiRewardTable(const ScenarioTree& tree) : genealogy_(tree), offset_(tree.size() + 1, 0) {
    for (NodeId b = 0; b < tree.size(); ++b) {
        offset_[b + 1] = offset_[b] + 2 * (static_cast<std::size_t>(tree.time(b)) + 1);
    }
    values_.assign(offset_.back(), std::numeric_limits<double>::quiet_NaN());
}

std::size_t BiRewardTable::slot(NodeId a, NodeId b) const {
    if (a >= genealogy_.size() || b >= genealogy_.size()) {
        throw InputError(fmt::format("pair ({}, {}) names a node outside the tree", a, b));
    }
    if (!genealogy_.comparable(a, b)) {
        throw InputError(fmt::format("psi is undefined on the incomparable pair ({}, {})", a, b));
    }
    const int ta = genealogy_.time(a);
    const int tb = genealogy_.time(b);
    if (ta <= tb) return offset_[b] + 2 * static_cast<std::size_t>(ta);  // psi(ancestor, deeper)
    return offset_[a] + 2 * static_cast<std::size_t>(tb) + 1;            // psi(deeper, ancestor)
}

void BiRewardTable::set(NodeId a, NodeId b, double value) {
    if (!std::isfinite(value) || value < 0.0) {
        throw InputError(fmt::format("psi({}, {}) = {}; values must be finite and nonnegative", a, b, value));
    }
    values_[slot(a, b)] = value;
}

double BiRewardTable::at(NodeId a, NodeId b) const {
    const double v = values_[slot(a, b)];
    if (std::isnan(v)) throw InputError(fmt::format("psi({}, {}) is not set", a, b));
    return v;
}

bool BiRewardTable::is_set(NodeId a, NodeId b) const { return !std::isnan(values_[slot(a, b)]); }

std::size_t BiRewardTable::pair_count() const {
    std::size_t count = 0;
    for (NodeId b = 0; b < genealogy_.size(); ++b) count += 2 * static_cast<std::size_t>(genealogy_.time(b)) + 1;
    return count;
}

bool BiRewardTable::complete() const {
    bool ok = true;
    for_each_pair([&](NodeId a, NodeId b) { ok = ok && is_set(a, b); });
    return ok;
}

// ---------------------------------------------------------------------------
// BiReward

BiReward::BiReward(const ScenarioTree& tree, Function f)
    : genealogy_(std::make_shared<const Genealogy>(tree)), function_(std::move(f)) {
    if (!function_) throw InputError("psi function is empty");
}

BiReward::BiReward(BiRewardTable table)
    : genealogy_(std::make_shared<const Genealogy>(table.genealogy())),
      table_(std::make_shared<const BiRewardTable>(std::move(table))) {
    if (!table_->complete()) throw InputError("psi table does not cover every comparable pair");
}

BiReward BiReward::constant(const ScenarioTree& tree, double c) {
    return BiReward(tree, [c](NodeId, NodeId) { return c; });
}

double BiReward::operator()(NodeId a, NodeId b) const {
    if (table_) return table_->at(a, b);
    if (a >= genealogy_->size() || b >= genealogy_->size() || !genealogy_->comparable(a, b)) {
        throw InputError(fmt::format("psi is undefined on the incomparable pair ({}, {})", a, b));
    }
    const double v = function_(a, b);
    if (!std::isfinite(v) || v < 0.0) {
        throw InputError(fmt::format("psi({}, {}) = {}; values must be finite and nonnegative", a, b, v));
    }
    return v;
}

// ---------------------------------------------------------------------------
// Conditional one-stopping values

namespace {

enum class FreeLeg { First, Second };

/// Value at theta of the one-stopping problem where one leg is frozen at theta.
double frozen_leg_value(const ScenarioTree& tree, const BiReward& psi, NodeId theta, FreeLeg leg,
                        std::span<double> scratch) {
    const auto nodes = tree.subtree(theta);
    if (leg == FreeLeg::First) {
        detail::subtree_envelope(tree, nodes, [&](NodeId m) { return psi(m, theta); }, scratch);
    } else {
        detail::subtree_envelope(tree, nodes, [&](NodeId m) { return psi(theta, m); }, scratch);
    }
    return scratch[theta];
}

/// Writes the optimal rule of the frozen-leg subproblem at s into `target`.
void follow_frozen_leg_rule(const ScenarioTree& tree, const BiReward& psi, NodeId s, FreeLeg leg,
                            StopTolerance tol, std::span<double> values, std::span<double> rewards,
                            StoppingRule& target) {
    const auto nodes = tree.subtree(s);
    for (NodeId m : nodes) rewards[m] = leg == FreeLeg::First ? psi(m, s) : psi(s, m);
    detail::subtree_envelope(tree, nodes, [&](NodeId m) { return rewards[m]; }, values);
    std::vector<NodeId> frontier{s};
    while (!frontier.empty()) {
        const NodeId m = frontier.back();
        frontier.pop_back();
        if (tree.is_leaf(m) || tol.touches(values[m], rewards[m])) {
            target.set(m, Decision::Stop);
        } else {
            target.set(m, Decision::Continue);
            for (NodeId c : tree.children(m)) frontier.push_back(c);
        }
    }
}

}  // namespace

double conditional_value_u1(const ScenarioTree& tree, const BiReward& psi, NodeId theta) {
    tree.require_node(theta);
    std::vector<double> scratch(tree.size());
    return frozen_leg_value(tree, psi, theta, FreeLeg::First, scratch);
}

double conditional_value_u2(const ScenarioTree& tree, const BiReward& psi, NodeId theta) {
    tree.require_node(theta);
    std::vector<double> scratch(tree.size());
    return frozen_leg_value(tree, psi, theta, FreeLeg::Second, scratch);
}

ConditionalValues conditional_values(const ScenarioTree& tree, const BiReward& psi, unsigned threads) {
    if (psi.genealogy().size() != tree.size()) throw InputError("psi does not match the tree");
    std::vector<double> u1(tree.size()), u2(tree.size()), phi(tree.size());
    parallel_for(tree.size(), threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> scratch(tree.size());
        for (std::size_t k = begin; k < end; ++k) {
            const auto theta = static_cast<NodeId>(k);
            u1[k] = frozen_leg_value(tree, psi, theta, FreeLeg::First, scratch);
            u2[k] = frozen_leg_value(tree, psi, theta, FreeLeg::Second, scratch);
            phi[k] = std::max(u1[k], u2[k]);
        }
    });
    return ConditionalValues{NodeReward(tree, std::move(u1)), NodeReward(tree, std::move(u2)),
                             NodeReward(tree, std::move(phi))};
}

NodeReward new_reward(const ScenarioTree& tree, const BiReward& psi, unsigned threads) {
    return conditional_values(tree, psi, threads).phi;
}

double reduced_value(const ScenarioTree& tree, const BiReward& psi, NodeId start, unsigned threads) {
    tree.require_node(start);
    return snell_envelope(tree, new_reward(tree, psi, threads), threads)[start];
}

// ---------------------------------------------------------------------------
// Optimal pair

ReductionResult reduce(const ScenarioTree& tree, const BiReward& psi, NodeId start, StopTolerance tol,
                       unsigned threads, TieRule ties) {
    tree.require_node(start);
    ConditionalValues cv = conditional_values(tree, psi, threads);
    ValueFamily u = snell_envelope(tree, cv.phi, threads);
    StoppingRule theta_star = optimal_stop(tree, u, start, tol);

    StoppingPair pair{StoppingRule(start, tree.size()), StoppingRule(start, tree.size())};
    for (NodeId m : theta_star.continue_nodes()) {
        pair.first.set(m, Decision::Continue);
        pair.second.set(m, Decision::Continue);
    }

    std::vector<BranchChoice> branches;
    std::vector<double> values(tree.size()), rewards(tree.size());
    for (NodeId s : theta_star.stop_nodes()) {
        BranchChoice choice{s, true, cv.u1[s], cv.u2[s]};
        choice.in_b = ties == TieRule::NonStrict ? choice.u1 <= choice.u2 : choice.u1 < choice.u2;
        if (choice.in_b) {
            pair.first.set(s, Decision::Stop);
            follow_frozen_leg_rule(tree, psi, s, FreeLeg::Second, tol, values, rewards, pair.second);
        } else {
            pair.second.set(s, Decision::Stop);
            follow_frozen_leg_rule(tree, psi, s, FreeLeg::First, tol, values, rewards, pair.first);
        }
        branches.push_back(choice);
    }

    return ReductionResult{std::move(cv.u1), std::move(cv.u2), std::move(cv.phi), std::move(u),
                           std::move(theta_star), std::move(pair), std::move(branches)};
}

StoppingPair optimal_pair(const ScenarioTree& tree, const BiReward& psi, NodeId start, StopTolerance tol,
                          unsigned threads) {
    return reduce(tree, psi, start, tol, threads).pair;
}

double evaluate_pair(const ScenarioTree& tree, const BiReward& psi, const StoppingPair& pair) {
    if (pair.first.start() != pair.second.start()) {
        throw InputError(fmt::format("pair rules start at different nodes ({} and {})", pair.first.start(),
                                     pair.second.start()));
    }
    pair.first.validate(tree);
    pair.second.validate(tree);
    const NodeId start = pair.first.start();

    // stop1[m], stop2[m]: stop node of each rule at or above m on the path from start.
    std::vector<NodeId> stop1(tree.size(), kNoNode), stop2(tree.size(), kNoNode);
    std::vector<NodeId> reached{start};
    for (std::size_t i = 0; i < reached.size(); ++i) {
        const NodeId m = reached[i];
        if (m != start) {
            stop1[m] = stop1[tree.parent(m)];
            stop2[m] = stop2[tree.parent(m)];
        }
        if (stop1[m] == kNoNode && pair.first.at(m) == Decision::Stop) stop1[m] = m;
        if (stop2[m] == kNoNode && pair.second.at(m) == Decision::Stop) stop2[m] = m;
        if (stop1[m] == kNoNode || stop2[m] == kNoNode) {
            for (NodeId c : tree.children(m)) reached.push_back(c);
        }
    }
    std::vector<double> e(tree.size(), 0.0);
    for (auto it = reached.rbegin(); it != reached.rend(); ++it) {
        const NodeId m = *it;
        const bool settled = stop1[m] != kNoNode && stop2[m] != kNoNode;
        e[m] = settled ? psi(stop1[m], stop2[m]) : detail::continuation(tree, m, e);
    }
    return e[start];
}

StoppingRule earliest_of(const ScenarioTree& tree, const StoppingRule& a, const StoppingRule& b) {
    if (a.start() != b.start()) throw InputError("rules start at different nodes");
    a.validate(tree);
    b.validate(tree);
    StoppingRule out(a.start(), tree.size());
    std::vector<NodeId> frontier{a.start()};
    while (!frontier.empty()) {
        const NodeId m = frontier.back();
        frontier.pop_back();
        if (a.at(m) == Decision::Stop || b.at(m) == Decision::Stop) {
            out.set(m, Decision::Stop);
        } else {
            out.set(m, Decision::Continue);
            for (NodeId c : tree.children(m)) frontier.push_back(c);
        }
    }
    return out;
}

void write_reduction_csv(std::ostream& os, const ScenarioTree& tree, const ReductionResult& r) {
    os << "node_id,t,u1,u2,phi,u\n";
    for (NodeId m = 0; m < tree.size(); ++m) {
        fmt::print(os, "{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", m, tree.time(m), r.u1[m], r.u2[m], r.phi[m], r.u[m]);
    }
}

}  // namespace multistop
