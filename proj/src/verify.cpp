#include "multistop/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "multistop/double_stopping.hpp"
#include "multistop/errors.hpp"
#include "multistop/generators.hpp"
#include "multistop/parallel.hpp"

namespace multistop {

namespace {

double relative_gap(double value, double reference) {
    return std::abs(value - reference) / std::max(std::abs(reference), std::numeric_limits<double>::min());
}

void note(VerifyReport& r, std::uint64_t seed, int depth, const char* property, double value, double limit) {
    if (!(value <= limit)) r.violations.push_back(Violation{seed, depth, property, value});
}

VerifyReport run_case(const VerifyOptions& opt, int depth, std::uint64_t seed) {
    VerifyReport r;
    const auto& th = opt.thresholds;
    Rng rng(seed * 0x100000001B3ULL + static_cast<std::uint64_t>(depth));
    const ScenarioTree tree = random_binary_tree(depth, rng);
    const NodeReward reward = uniform_node_reward(tree, rng);
    const BiReward psi(uniform_bireward_table(tree, rng));
    const NodeId root = ScenarioTree::root();

    // Single stopping.
    const ValueFamily v = snell_envelope(tree, reward);
    for (NodeId m = 0; m < tree.size(); ++m) {
        const SingleOptimum best = brute_force_single(tree, reward, m, opt.budget);
        r.max_abs_gap_snell = std::max(r.max_abs_gap_snell, std::abs(v[m] - best.value));
    }
    note(r, seed, depth, "snell_vs_oracle", r.max_abs_gap_snell, th.snell_abs);

    const double attained = evaluate_rule(tree, reward, optimal_stop(tree, v, root, opt.tolerance));
    r.max_rel_gap_optimal_rule = relative_gap(attained, v[root]);
    note(r, seed, depth, "optimal_rule_attains_value", r.max_rel_gap_optimal_rule, th.optimal_rule_rel);

    // Lambda rules are ordered pathwise and bounded by theta*.
    std::vector<double> lambdas = opt.lambdas;
    std::sort(lambdas.begin(), lambdas.end());
    for (NodeId start = 0; start < tree.size(); ++start) {
        std::vector<StoppingRule> rules;
        for (double l : lambdas) rules.push_back(lambda_stop(tree, v, start, l, opt.tolerance));
        rules.push_back(optimal_stop(tree, v, start, opt.tolerance));
        for (NodeId leaf : tree.leaves_under(start)) {
            for (std::size_t i = 0; i + 1 < rules.size(); ++i) {
                const NodeId earlier = stopped_node(tree, rules[i], leaf);
                const NodeId later = stopped_node(tree, rules[i + 1], leaf);
                if (!tree.is_ancestor_or_equal(earlier, later)) ++r.lambda_order_failures;
            }
        }
    }
    note(r, seed, depth, "lambda_rule_ordering", static_cast<double>(r.lambda_order_failures), 0.0);

    // Double stopping.
    ReductionResult red = reduce(tree, psi, root, opt.tolerance);
    double u_root = red.u[root];
    if (opt.inject_fault) {
        std::vector<double> flipped(tree.size());
        for (NodeId m = 0; m < tree.size(); ++m) flipped[m] = std::min(red.u1[m], red.u2[m]);
        u_root = snell_envelope(tree, NodeReward(tree, std::move(flipped)))[root];
    }

    r.max_supermartingale_violation =
        std::max(check_supermartingale(tree, v).max_violation, check_supermartingale(tree, red.u).max_violation);
    note(r, seed, depth, "supermartingale", r.max_supermartingale_violation, th.supermartingale_abs);

    const DoubleOptimum oracle = brute_force_double(tree, psi, root, opt.budget);
    r.max_abs_gap_reduction = std::abs(u_root - oracle.value);
    note(r, seed, depth, "reduction_vs_pair_oracle", r.max_abs_gap_reduction, th.reduction_abs);

    r.max_rel_gap_optimal_pair = relative_gap(evaluate_pair(tree, psi, red.pair), u_root);
    note(r, seed, depth, "optimal_pair_attains_value", r.max_rel_gap_optimal_pair, th.optimal_pair_rel);

    for (int i = 0; i < opt.random_pairs; ++i) {
        const StoppingPair pair{random_rule(tree, root, rng), random_rule(tree, root, rng)};
        const double value = evaluate_pair(tree, psi, pair);
        const double at_earlier = evaluate_rule(tree, red.phi, earliest_of(tree, pair.first, pair.second));
        r.max_earlier_stop_excess = std::max({r.max_earlier_stop_excess, value - at_earlier, at_earlier - u_root});
        ++r.random_pairs_checked;
    }
    note(r, seed, depth, "earlier_stop_bound", r.max_earlier_stop_excess, th.earlier_stop_abs);
    return r;
}

}  // namespace

VerifyReport run_verification(const VerifyOptions& opt) {
    if (opt.seeds < 0) throw InputError("seed count must be nonnegative");
    for (int depth : opt.depths) {
        if (depth < 0) throw InputError(fmt::format("depth must be nonnegative, got {}", depth));
        const ScenarioTree shape = uniform_tree(depth, 2);
        const std::uint64_t rules = count_stopping_rules(shape, ScenarioTree::root());
        if (rules > opt.budget.max_rules || (rules != 0 && rules > opt.budget.max_pairs / rules)) {
            throw BudgetError(fmt::format("depth {} needs {} x {} rule pairs, budget is {}", depth, rules, rules,
                                          opt.budget.max_pairs));
        }
    }

    const std::size_t per_depth = static_cast<std::size_t>(opt.seeds);
    const std::size_t cases = per_depth * opt.depths.size();
    std::vector<VerifyReport> results(cases);
    parallel_for(cases, opt.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            const int depth = opt.depths[c / per_depth];
            const std::uint64_t seed = opt.first_seed + c % per_depth;
            results[c] = run_case(opt, depth, seed);
        }
    });

    VerifyReport report;
    report.seeds = opt.seeds;
    report.depths = opt.depths;
    for (const VerifyReport& r : results) {
        report.max_abs_gap_reduction = std::max(report.max_abs_gap_reduction, r.max_abs_gap_reduction);
        report.max_abs_gap_snell = std::max(report.max_abs_gap_snell, r.max_abs_gap_snell);
        report.max_rel_gap_optimal_rule = std::max(report.max_rel_gap_optimal_rule, r.max_rel_gap_optimal_rule);
        report.max_rel_gap_optimal_pair = std::max(report.max_rel_gap_optimal_pair, r.max_rel_gap_optimal_pair);
        report.max_earlier_stop_excess = std::max(report.max_earlier_stop_excess, r.max_earlier_stop_excess);
        report.max_supermartingale_violation =
            std::max(report.max_supermartingale_violation, r.max_supermartingale_violation);
        report.lambda_order_failures += r.lambda_order_failures;
        report.random_pairs_checked += r.random_pairs_checked;
        report.violations.insert(report.violations.end(), r.violations.begin(), r.violations.end());
    }
    return report;
}

Json report_to_json(const VerifyReport& report) {
    Json violations = Json::array();
    for (const Violation& v : report.violations) {
        violations.push_back({{"seed", v.seed}, {"depth", v.depth}, {"property", v.property}, {"value", v.value}});
    }
    return Json{{"seeds", report.seeds},
                {"depths", report.depths},
                {"max_abs_gap_reduction", report.max_abs_gap_reduction},
                {"max_abs_gap_snell", report.max_abs_gap_snell},
                {"max_rel_gap_optimal_rule", report.max_rel_gap_optimal_rule},
                {"max_rel_gap_optimal_pair", report.max_rel_gap_optimal_pair},
                {"max_earlier_stop_excess", report.max_earlier_stop_excess},
                {"max_supermartingale_violation", report.max_supermartingale_violation},
                {"lambda_order_failures", report.lambda_order_failures},
                {"random_pairs_checked", report.random_pairs_checked},
                {"passed", report.passed()},
                {"violations", std::move(violations)}};
}

}  // namespace multistop
