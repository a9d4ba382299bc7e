#ifndef MULTISTOP_DETAIL_BACKWARD_HPP
#define MULTISTOP_DETAIL_BACKWARD_HPP

#include <algorithm>
#include <span>

#include "multistop/scenario_tree.hpp"

namespace multistop::detail {

// Every engine and oracle path computes one-step expectations through this
// function so that equal inputs give bitwise-equal sums.
inline double continuation(const ScenarioTree& tree, NodeId n, std::span<const double> v) {
    double acc = 0.0;
    for (NodeId c : tree.children(n)) acc += tree.prob(c) * v[c];
    return acc;
}

/// Envelope of `reward` over `nodes` (breadth-first subtree list); v is indexed by node id.
template <typename Reward>
void subtree_envelope(const ScenarioTree& tree, std::span<const NodeId> nodes, Reward&& reward,
                      std::span<double> v) {
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        const NodeId m = *it;
        const double phi = reward(m);
        v[m] = tree.is_leaf(m) ? phi : std::max(phi, continuation(tree, m, v));
    }
}

}  // namespace multistop::detail

#endif  // MULTISTOP_DETAIL_BACKWARD_HPP
