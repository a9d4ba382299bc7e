#ifndef MULTISTOP_DOUBLE_STOPPING_HPP
#define MULTISTOP_DOUBLE_STOPPING_HPP

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "multistop/scenario_tree.hpp"
#include "multistop/snell.hpp"

namespace multistop {

/// Parent/time skeleton of a tree, enough to test comparability of two nodes.
class Genealogy {
public:
    explicit Genealogy(const ScenarioTree& tree);

    [[nodiscard]] std::size_t size() const noexcept { return time_.size(); }
    [[nodiscard]] int time(NodeId n) const { return time_[n]; }
    [[nodiscard]] NodeId ancestor_at(NodeId n, int t) const {
        while (time_[n] > t) n = parent_[n];
        return n;
    }
    [[nodiscard]] bool comparable(NodeId a, NodeId b) const {
        return time_[a] <= time_[b] ? ancestor_at(b, time_[a]) == a : ancestor_at(a, time_[b]) == b;
    }

private:
    std::vector<int> time_;
    std::vector<NodeId> parent_;
};

/**
 * Explicit table of psi(a, b) over every comparable ordered pair.
 *
 * Storage is keyed by the deeper node and the shallower node's time, two
 * slots per (deeper, ancestor) pair: psi(ancestor, deeper) and
 * psi(deeper, ancestor). Unset entries are NaN.
 */
class BiRewardTable {
public:
    explicit BiRewardTable(const ScenarioTree& tree);

    /// Throws InputError for incomparable pairs or negative / non-finite values.
    void set(NodeId a, NodeId b, double value);
    [[nodiscard]] double at(NodeId a, NodeId b) const;
    [[nodiscard]] bool is_set(NodeId a, NodeId b) const;
    /// Number of comparable ordered pairs (a, b).
    [[nodiscard]] std::size_t pair_count() const;
    [[nodiscard]] bool complete() const;

    template <typename Visitor>
    void for_each_pair(Visitor&& visit) const {
        for (NodeId b = 0; b < genealogy_.size(); ++b) {
            for (int t = 0; t <= genealogy_.time(b); ++t) {
                const NodeId a = genealogy_.ancestor_at(b, t);
                visit(a, b);
                if (a != b) visit(b, a);
            }
        }
    }

    [[nodiscard]] const Genealogy& genealogy() const noexcept { return genealogy_; }

private:
    [[nodiscard]] std::size_t slot(NodeId a, NodeId b) const;

    Genealogy genealogy_;
    std::vector<std::size_t> offset_;
    std::vector<double> values_;
};

/**
 * Biadmissible reward family psi(a, b) >= 0, defined on comparable pairs.
 *
 * Backed by a table or by a deterministic, side-effect-free function. Every
 * evaluation checks comparability and sign.
 */
class BiReward {
public:
    using Function = std::function<double(NodeId a, NodeId b)>;

    BiReward(const ScenarioTree& tree, Function f);
    explicit BiReward(BiRewardTable table);

    static BiReward constant(const ScenarioTree& tree, double c);

    [[nodiscard]] double operator()(NodeId a, NodeId b) const;
    [[nodiscard]] const Genealogy& genealogy() const noexcept { return *genealogy_; }

private:
    std::shared_ptr<const Genealogy> genealogy_;
    std::shared_ptr<const BiRewardTable> table_;
    Function function_;
};

/// Two rules (tau1, tau2) sharing a start node.
struct StoppingPair {
    StoppingRule first;
    StoppingRule second;
};

/// u1(theta) = sup over tau1 >= theta of E[psi(tau1, theta) | theta atom].
[[nodiscard]] double conditional_value_u1(const ScenarioTree& tree, const BiReward& psi, NodeId theta);
/// u2(theta) = sup over tau2 >= theta of E[psi(theta, tau2) | theta atom].
[[nodiscard]] double conditional_value_u2(const ScenarioTree& tree, const BiReward& psi, NodeId theta);

struct ConditionalValues {
    NodeReward u1;
    NodeReward u2;
    NodeReward phi;  ///< max(u1, u2), the new reward
};

/// u1, u2 and the new reward at every node; parallel over conditioning nodes.
[[nodiscard]] ConditionalValues conditional_values(const ScenarioTree& tree, const BiReward& psi,
                                                   unsigned threads = 1);
[[nodiscard]] NodeReward new_reward(const ScenarioTree& tree, const BiReward& psi, unsigned threads = 1);

/// Snell envelope of the new reward at `start`; equals the double-stopping value.
[[nodiscard]] double reduced_value(const ScenarioTree& tree, const BiReward& psi, NodeId start,
                                   unsigned threads = 1);

struct BranchChoice {
    NodeId node = 0;   ///< stop node of theta*
    bool in_b = true;  ///< u1 <= u2 at node: tau1 stops here, tau2 continues optimally
    double u1 = 0.0;
    double u2 = 0.0;
};

struct ReductionResult {
    NodeReward u1;
    NodeReward u2;
    NodeReward phi;
    ValueFamily u;
    StoppingRule theta_star;
    StoppingPair pair;
    std::vector<BranchChoice> branches;
};

/// Which branch to take at a stop node of theta*.
enum class TieRule {
    NonStrict,  ///< B = {u1 <= u2}
    Strict,     ///< B = {u1 < u2}; same value, used to check tie invariance
};

/**
 * Full reduction from `start`: new reward, its envelope, theta*, and the pair
 * tau1* = theta* on B, theta1* off B; tau2* = theta2* on B, theta* off B.
 */
[[nodiscard]] ReductionResult reduce(const ScenarioTree& tree, const BiReward& psi, NodeId start,
                                     StopTolerance tol = {}, unsigned threads = 1,
                                     TieRule ties = TieRule::NonStrict);

[[nodiscard]] StoppingPair optimal_pair(const ScenarioTree& tree, const BiReward& psi, NodeId start,
                                        StopTolerance tol = {}, unsigned threads = 1);

/// E[psi(tau1, tau2) | start atom] by nested conditional expectation.
[[nodiscard]] double evaluate_pair(const ScenarioTree& tree, const BiReward& psi, const StoppingPair& pair);

/// Rule stopping at the pathwise earlier of two rules' stop nodes.
[[nodiscard]] StoppingRule earliest_of(const ScenarioTree& tree, const StoppingRule& a, const StoppingRule& b);

/// CSV with columns node_id,t,u1,u2,phi,u.
void write_reduction_csv(std::ostream& os, const ScenarioTree& tree, const ReductionResult& result);

}  // namespace multistop

#endif  // MULTISTOP_DOUBLE_STOPPING_HPP
