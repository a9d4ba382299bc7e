#ifndef MULTISTOP_SCENARIO_TREE_HPP
#define MULTISTOP_SCENARIO_TREE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ranges>
#include <span>
#include <vector>

namespace multistop {

using NodeId = std::uint32_t;

inline constexpr NodeId kNoNode = static_cast<NodeId>(-1);
inline constexpr std::size_t kMaxTreeNodes = 200'000;
inline constexpr double kProbabilitySumTolerance = 1e-12;

/// Children of every node at one level share the same branching.
struct LevelSpec {
    std::vector<std::vector<double>> levels;  ///< levels[t] = child probabilities of each time-t node
};

/// One entry of an explicit node list; the list order is the node order.
struct NodeSpec {
    NodeId id = 0;
    int t = 0;
    std::optional<NodeId> parent;
    std::vector<NodeId> children;
    double prob = 1.0;
    std::optional<double> state;
};

/**
 * Finite non-recombining event tree encoding a discrete filtration.
 *
 * Time-t nodes are the atoms of F_t. Ids are dense and breadth-first, so
 * every level and every sibling group occupies a contiguous id range. An
 * optional per-node state value carries the observed process for built-in
 * reward generators. Immutable after construction.
 */
class ScenarioTree {
public:
    /// Single root with no children.
    ScenarioTree();

    [[nodiscard]] std::size_t size() const noexcept { return time_.size(); }
    [[nodiscard]] int horizon() const noexcept { return horizon_; }
    [[nodiscard]] static constexpr NodeId root() noexcept { return 0; }

    [[nodiscard]] int time(NodeId n) const { return time_.at(n); }
    [[nodiscard]] NodeId parent(NodeId n) const { return parent_.at(n); }
    /// Conditional probability of reaching n from its parent (1 at the root).
    [[nodiscard]] double prob(NodeId n) const { return prob_.at(n); }
    [[nodiscard]] bool is_leaf(NodeId n) const { return child_count_.at(n) == 0; }
    [[nodiscard]] std::size_t child_count(NodeId n) const { return child_count_.at(n); }

    [[nodiscard]] auto children(NodeId n) const {
        const NodeId first = first_child_.at(n);
        return std::views::iota(first, first + child_count_[n]);
    }

    /// Ids of all nodes at time t.
    [[nodiscard]] auto level(int t) const {
        return std::views::iota(level_begin_.at(static_cast<std::size_t>(t)),
                                level_begin_.at(static_cast<std::size_t>(t) + 1));
    }

    [[nodiscard]] bool has_state() const noexcept { return !state_.empty(); }
    [[nodiscard]] double state(NodeId n) const { return state_.at(n); }
    [[nodiscard]] std::span<const double> states() const noexcept { return state_; }

    [[nodiscard]] bool contains(NodeId n) const noexcept { return n < size(); }

    /// True when a lies on the root path of b (a == b included).
    [[nodiscard]] bool is_ancestor_or_equal(NodeId a, NodeId b) const;
    [[nodiscard]] bool comparable(NodeId a, NodeId b) const {
        return is_ancestor_or_equal(a, b) || is_ancestor_or_equal(b, a);
    }
    /// Ancestor of n at time t, t <= time(n).
    [[nodiscard]] NodeId ancestor_at(NodeId n, int t) const;

    /// Nodes of the subtree rooted at n, breadth-first (n first).
    [[nodiscard]] std::vector<NodeId> subtree(NodeId n) const;
    /// Leaves under n in id order.
    [[nodiscard]] std::vector<NodeId> leaves_under(NodeId n) const;
    /// Probability of reaching `to` conditioned on being at `from`, which must be an ancestor.
    [[nodiscard]] double conditional_prob(NodeId from, NodeId to) const;

    /// Throws InputError when n is not a node of this tree.
    void require_node(NodeId n) const;

private:
    friend ScenarioTree build_tree(std::span<const NodeSpec> nodes);

    int horizon_ = 0;
    std::vector<int> time_;
    std::vector<NodeId> parent_;
    std::vector<double> prob_;
    std::vector<NodeId> first_child_;
    std::vector<NodeId> child_count_;
    std::vector<NodeId> level_begin_;
    std::vector<double> state_;
};

/// Build from per-level branching; nodes are generated breadth-first.
[[nodiscard]] ScenarioTree build_tree(const LevelSpec& spec);

/**
 * Build from an explicit node list. The list must already be in canonical
 * breadth-first order: entry k has id k, each node's children are
 * consecutive ascending ids, and levels are contiguous. States must be
 * given for every node or for none.
 */
[[nodiscard]] ScenarioTree build_tree(std::span<const NodeSpec> nodes);

/// Uniform b-ary tree of the given depth with equal branch probabilities.
[[nodiscard]] ScenarioTree uniform_tree(int depth, int branching = 2);

/// Explicit node list of a tree (inverse of build_tree).
[[nodiscard]] std::vector<NodeSpec> node_list(const ScenarioTree& tree);

enum class Decision : std::uint8_t { Undefined, Continue, Stop };

/**
 * Adapted stop/continue assignment for a stopping time theta >= start.
 *
 * Decisions exist only on nodes reachable from the start without an earlier
 * stop; all other entries are Undefined.
 */
class StoppingRule {
public:
    StoppingRule() = default;
    StoppingRule(NodeId start, std::size_t tree_size)
        : start_(start), decisions_(tree_size, Decision::Undefined) {}

    /// Rule that stops at `start` immediately.
    static StoppingRule stop_at_start(const ScenarioTree& tree, NodeId start);
    /// Rule that continues until the leaves.
    static StoppingRule stop_at_leaves(const ScenarioTree& tree, NodeId start);
    /// Rule that stops at the first node at or after time t (clamped to the start's time).
    static StoppingRule stop_at_time(const ScenarioTree& tree, NodeId start, int t);

    [[nodiscard]] NodeId start() const noexcept { return start_; }
    [[nodiscard]] Decision at(NodeId n) const { return decisions_.at(n); }
    void set(NodeId n, Decision d) { decisions_.at(n) = d; }
    [[nodiscard]] std::size_t tree_size() const noexcept { return decisions_.size(); }

    /// Stop nodes, in id order.
    [[nodiscard]] std::vector<NodeId> stop_nodes() const;
    [[nodiscard]] std::vector<NodeId> continue_nodes() const;

    /**
     * Throws InputError unless every path from the start meets exactly one
     * Stop, leaves are never Continue, and nodes off the reachable region
     * are Undefined.
     */
    void validate(const ScenarioTree& tree) const;

    friend bool operator==(const StoppingRule&, const StoppingRule&) = default;

private:
    NodeId start_ = 0;
    std::vector<Decision> decisions_;
};

/// theta(omega) on the scenario identified by `leaf`.
[[nodiscard]] NodeId stopped_node(const ScenarioTree& tree, const StoppingRule& rule, NodeId leaf);

/// Number of stopping rules from `start`: f(leaf) = 1, f(n) = 1 + prod f(child).
/// Saturates at UINT64_MAX.
[[nodiscard]] std::uint64_t count_stopping_rules(const ScenarioTree& tree, NodeId start);

}  // namespace multistop

#endif  // MULTISTOP_SCENARIO_TREE_HPP
