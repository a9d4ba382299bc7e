#ifndef MULTISTOP_VERIFY_HPP
#define MULTISTOP_VERIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "multistop/oracle.hpp"
#include "multistop/snell.hpp"
#include "multistop/tree_io.hpp"

namespace multistop {

/// Pass thresholds for the randomized cross-check matrix.
struct VerifyThresholds {
    double reduction_abs = 1e-12;        ///< |reduced value - pair oracle|
    double snell_abs = 1e-12;           ///< |envelope - single oracle| at every node
    double optimal_rule_rel = 1e-10;    ///< |E[phi(theta*)] - v| / v
    double optimal_pair_rel = 1e-10;    ///< |E[psi(tau1*, tau2*)] - u| / u
    double earlier_stop_abs = 1e-12;           ///< slack in E[psi] <= E[phi(tau1 ^ tau2)] <= u
    double supermartingale_abs = 1e-12;
};

struct VerifyOptions {
    std::vector<int> depths{3};
    int seeds = 100;
    std::uint64_t first_seed = 1;
    int random_pairs = 1000;
    std::vector<double> lambdas{0.5, 0.9, 0.99, 0.999};
    EnumerationBudget budget;
    StopTolerance tolerance;
    VerifyThresholds thresholds;
    unsigned threads = 1;
    /// Harness self-test: replace the new reward max(u1, u2) by min(u1, u2).
    bool inject_fault = false;
};

struct Violation {
    std::uint64_t seed = 0;
    int depth = 0;
    std::string property;
    double value = 0.0;
};

struct VerifyReport {
    int seeds = 0;
    std::vector<int> depths;
    double max_abs_gap_reduction = 0.0;
    double max_abs_gap_snell = 0.0;
    double max_rel_gap_optimal_rule = 0.0;
    double max_rel_gap_optimal_pair = 0.0;
    double max_earlier_stop_excess = 0.0;
    double max_supermartingale_violation = 0.0;
    std::uint64_t lambda_order_failures = 0;
    std::uint64_t random_pairs_checked = 0;
    std::vector<Violation> violations;

    [[nodiscard]] bool passed() const { return violations.empty(); }
};

/**
 * For every (depth, seed): a random binary tree with random branch
 * probabilities, i.i.d. U(0,1) node rewards and psi table, checked for
 *   - envelope == single-rule oracle at every node, theta* attains v,
 *   - supermartingale property of v and u,
 *   - lambda-rule ordering theta^l1 <= theta^l2 <= theta*,
 *   - reduced value == pair oracle,
 *   - constructed pair attains u, and the earlier-stop chain on random pairs.
 *
 * Throws BudgetError up front when a depth exceeds the enumeration budget.
 */
[[nodiscard]] VerifyReport run_verification(const VerifyOptions& options);

[[nodiscard]] Json report_to_json(const VerifyReport& report);

}  // namespace multistop

#endif  // MULTISTOP_VERIFY_HPP
