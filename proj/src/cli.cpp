#include "multistop/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "multistop/double_stopping.hpp"
#include "multistop/errors.hpp"
#include "multistop/exchange.hpp"
#include "multistop/generators.hpp"
#include "multistop/oracle.hpp"
#include "multistop/parallel.hpp"
#include "multistop/snell.hpp"
#include "multistop/tree_io.hpp"
#include "multistop/verify.hpp"

namespace multistop::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kSupermartingaleLimit = 1e-12;
constexpr double kOracleGapLimit = 1e-12;
constexpr std::size_t kMaxListedViolations = 50;

struct Common {
    std::string out = ".";
    std::string config;
    unsigned threads = 0;
    double eps = StopTolerance{}.relative;
};

struct TreeInput {
    std::string file;
    std::string gen;
    int depth = 3;
    double prob = 0.5;
    double origin = 0.0;
    int max_branching = 3;
    std::uint64_t seed = 1;
};

struct Budget {
    std::uint64_t max_rules = EnumerationBudget{}.max_rules;
    std::uint64_t max_pairs = EnumerationBudget{}.max_pairs;

    [[nodiscard]] EnumerationBudget get() const { return {max_rules, max_pairs}; }
};

struct SnellArgs {
    Common common;
    TreeInput tree;
    std::string reward_file;
    std::string reward_gen;
    double reward_value = 1.0;
};

struct DoubleArgs {
    Common common;
    TreeInput tree;
    Budget budget;
    std::string psi_file;
    std::string psi_gen;
    double psi_value = 1.0;
    bool verify = false;
};

struct VerifyArgs {
    Common common;
    Budget budget;
    std::vector<int> depths{3};
    int seeds = 100;
    std::uint64_t first_seed = 1;
    int random_pairs = 1000;
    bool inject_fault = false;
};

struct ExchangeArgs {
    Common common;
    exchange::MarketParams market;
    int steps = 100;
    std::size_t paths = 100000;
    std::uint64_t seed = 1;
    std::string scheme = "smoothed";
    int surface_stride = 1;
};

void add_common(CLI::App& sub, Common& c) {
    sub.add_option("--out", c.out, "Output directory (created if missing)")->capture_default_str();
    sub.add_option("--config", c.config, "JSON file with option values; command-line flags take precedence");
    sub.add_option("--threads", c.threads, "Worker threads (default: MULTISTOP_THREADS, then hardware)")
        ->check(CLI::PositiveNumber);
    sub.add_option("--eps", c.eps, "Relative tolerance for v touching the reward")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

void add_tree_input(CLI::App& sub, TreeInput& t) {
    sub.add_option("--tree", t.file, "Tree JSON file");
    sub.add_option("--tree-gen", t.gen, "Built-in tree")->check(CLI::IsMember({"binary", "random-walk", "random"}));
    sub.add_option("--depth", t.depth, "Depth of a generated tree")->check(CLI::NonNegativeNumber)->capture_default_str();
    sub.add_option("--prob", t.prob, "Up-probability of the random walk")->capture_default_str();
    sub.add_option("--origin", t.origin, "Root state of the random walk")->capture_default_str();
    sub.add_option("--max-branching", t.max_branching, "Largest child count of a random tree")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub.add_option("--seed", t.seed, "Seed for generated trees and rewards")->capture_default_str();
}

void add_budget(CLI::App& sub, Budget& b) {
    sub.add_option("--max-rules", b.max_rules, "Enumeration budget: rules per start node")->capture_default_str();
    sub.add_option("--max-pairs", b.max_pairs, "Enumeration budget: rule pairs")->capture_default_str();
}

std::string scalar_text(const Json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw InputError(fmt::format("config key '{}' must be a string, number, boolean or array of those", key));
}

std::optional<Json> lookup(const Json& obj, const std::string& name) {
    if (!obj.is_object()) return std::nullopt;
    std::string underscored = name;
    for (char& ch : underscored) {
        if (ch == '-') ch = '_';
    }
    for (const std::string& key : {name, underscored}) {
        if (auto it = obj.find(key); it != obj.end()) return *it;
    }
    return std::nullopt;
}

std::string dashed(std::string key) {
    for (char& ch : key) {
        if (ch == '_') ch = '-';
    }
    return key;
}

/// Fill options not given on the command line from the config document.
void apply_config(CLI::App& app, CLI::App& sub, const Json& config) {
    if (!config.is_object()) throw InputError("config file must hold a JSON object");

    std::set<std::string> known;
    std::set<std::string> subcommands;
    for (const CLI::App* s : app.get_subcommands({})) {
        subcommands.insert(s->get_name());
        for (const CLI::Option* o : s->get_options()) known.insert(o->get_single_name());
    }
    const Json* nested = nullptr;
    for (const auto& [key, value] : config.items()) {
        // "verify" names both a subcommand and a flag of "double"; objects are sections.
        if (subcommands.count(key) != 0U && value.is_object()) {
            if (key == sub.get_name()) nested = &value;
            continue;
        }
        if (known.count(dashed(key)) == 0U) throw InputError(fmt::format("unknown config key '{}'", key));
    }
    if (nested != nullptr) {
        for (const auto& [key, value] : nested->items()) {
            if (sub.get_option_no_throw("--" + dashed(key)) == nullptr) {
                throw InputError(fmt::format("config key '{}' is not an option of '{}'", key, sub.get_name()));
            }
        }
    }

    for (CLI::Option* opt : sub.get_options()) {
        const std::string& name = opt->get_single_name();
        if (name == "help" || name == "config" || opt->count() > 0) continue;
        std::optional<Json> value = nested != nullptr ? lookup(*nested, name) : std::nullopt;
        if (!value) value = lookup(config, name);
        if (!value || value->is_object()) continue;
        if (value->is_array()) {
            for (const Json& item : *value) opt->add_result(scalar_text(item, name));
        } else {
            opt->add_result(scalar_text(*value, name));
        }
        opt->run_callback();
    }
}

unsigned resolve_threads(const CLI::App& sub, unsigned given) {
    if (sub.get_option("--threads")->count() > 0) return given;
    if (const char* env = std::getenv("MULTISTOP_THREADS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const unsigned long n = std::strtoul(env, &end, 10);
        if (*end != '\0' || n == 0 || n > 4096) {
            throw InputError(fmt::format("MULTISTOP_THREADS must be a positive integer, got '{}'", env));
        }
        return static_cast<unsigned>(n);
    }
    return default_thread_count();
}

fs::path output_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw InputError(fmt::format("cannot create output directory '{}': {}", dir, ec.message()));
    return p;
}

template <class Writer>
void write_text(const fs::path& path, Writer&& write) {
    std::ofstream os(path);
    if (!os) throw InputError(fmt::format("cannot write '{}'", path.string()));
    write(os);
    os.flush();
    if (!os) throw InputError(fmt::format("failed writing '{}'", path.string()));
}

void require_one_source(const std::string& what, const std::string& file, const std::string& gen) {
    if (file.empty() == gen.empty()) {
        throw InputError(fmt::format("give exactly one of --{0} and --{0}-gen", what));
    }
}

/// The tree and the generator stream positioned after tree generation.
struct TreeAndRng {
    ScenarioTree tree;
    Rng rng;
};

TreeAndRng load_tree(const TreeInput& in) {
    require_one_source("tree", in.file, in.gen);
    Rng rng(in.seed);
    if (!in.file.empty()) return {tree_from_json(read_json_file(in.file)), rng};
    if (in.gen == "binary") {
        ScenarioTree tree = random_binary_tree(in.depth, rng);
        return {std::move(tree), rng};
    }
    if (in.gen == "random") {
        ScenarioTree tree = random_tree(in.depth, in.max_branching, rng);
        return {std::move(tree), rng};
    }
    return {random_walk_tree(in.depth, in.prob, in.origin), rng};
}

Json branches_to_json(const std::vector<BranchChoice>& branches) {
    Json out = Json::array();
    for (const BranchChoice& b : branches) {
        out.push_back({{"node", b.node}, {"in_b", b.in_b}, {"u1", b.u1}, {"u2", b.u2}});
    }
    return out;
}

int run_snell(const SnellArgs& a, unsigned threads, std::ostream& out, std::ostream& err) {
    auto [tree, rng] = load_tree(a.tree);
    require_one_source("reward", a.reward_file, a.reward_gen);
    NodeReward reward;
    if (!a.reward_file.empty()) {
        reward = reward_from_json(read_json_file(a.reward_file), tree);
    } else if (a.reward_gen == "constant") {
        reward = NodeReward::constant(tree, a.reward_value);
    } else if (a.reward_gen == "uniform") {
        reward = uniform_node_reward(tree, rng);
    } else {
        reward = positive_state_reward(tree);
    }

    const StopTolerance tol{a.common.eps};
    const NodeId root = ScenarioTree::root();
    const ValueFamily v = snell_envelope(tree, reward, threads);
    const StoppingRule theta = optimal_stop(tree, v, root, tol);
    const SupermartingaleReport sm = check_supermartingale(tree, v);

    const fs::path dir = output_dir(a.common.out);
    write_text(dir / "values.csv", [&](std::ostream& os) { write_values_csv(os, tree, v); });
    write_json_file(dir / "rule.json", rule_to_json(theta));
    write_json_file(dir / "summary.json", Json{{"v_root", v[root]},
                                               {"phi_root", reward[root]},
                                               {"rule_value", evaluate_rule(tree, reward, theta)},
                                               {"max_supermartingale_violation", sm.max_violation},
                                               {"worst_node", sm.worst_node},
                                               {"nodes", tree.size()},
                                               {"horizon", tree.horizon()}});
    fmt::print(out, "v_root = {:.17g}\n", v[root]);
    if (sm.max_violation > kSupermartingaleLimit) {
        fmt::print(err, "error: supermartingale violation {:.3e} at node {}\n", sm.max_violation, sm.worst_node);
        return kPropertyFailure;
    }
    return kOk;
}

int run_double(const DoubleArgs& a, unsigned threads, std::ostream& out, std::ostream& err) {
    auto [tree, rng] = load_tree(a.tree);
    require_one_source("psi", a.psi_file, a.psi_gen);
    std::optional<BiReward> psi;
    if (!a.psi_file.empty()) {
        psi.emplace(psi_from_json(read_json_file(a.psi_file), tree));
    } else if (a.psi_gen == "constant") {
        psi.emplace(BiReward::constant(tree, a.psi_value));
    } else if (a.psi_gen == "uniform") {
        psi.emplace(uniform_bireward_table(tree, rng));
    } else {
        psi.emplace(state_bireward(tree, parse_state_combination(a.psi_gen)));
    }

    const NodeId root = ScenarioTree::root();
    const ReductionResult red = reduce(tree, *psi, root, StopTolerance{a.common.eps}, threads);
    const double u_root = red.u[root];
    Json summary{{"u_root", u_root},
                 {"pair_value", evaluate_pair(tree, *psi, red.pair)},
                 {"nodes", tree.size()},
                 {"horizon", tree.horizon()}};
    double gap = 0.0;
    if (a.verify) {
        const DoubleOptimum oracle = brute_force_double(tree, *psi, root, a.budget.get(), threads);
        gap = std::abs(u_root - oracle.value);
        summary["oracle_value"] = oracle.value;
        summary["oracle_gap"] = gap;
        summary["pairs_evaluated"] = oracle.pairs_evaluated;
    }

    const fs::path dir = output_dir(a.common.out);
    write_text(dir / "u1u2phi.csv", [&](std::ostream& os) { write_reduction_csv(os, tree, red); });
    write_json_file(dir / "pair.json", Json{{"theta_star", rule_to_json(red.theta_star)},
                                            {"tau1", rule_to_json(red.pair.first)},
                                            {"tau2", rule_to_json(red.pair.second)},
                                            {"branches", branches_to_json(red.branches)}});
    write_json_file(dir / "summary.json", summary);
    fmt::print(out, "u_root = {:.17g}\n", u_root);
    if (gap > kOracleGapLimit) {
        fmt::print(err, "error: reduced value differs from the pair oracle by {:.3e}\n", gap);
        return kPropertyFailure;
    }
    return kOk;
}

int run_verify(const VerifyArgs& a, unsigned threads, std::ostream& out, std::ostream& err) {
    VerifyOptions opt;
    opt.depths = a.depths;
    opt.seeds = a.seeds;
    opt.first_seed = a.first_seed;
    opt.random_pairs = a.random_pairs;
    opt.budget = a.budget.get();
    opt.tolerance = StopTolerance{a.common.eps};
    opt.threads = threads;
    opt.inject_fault = a.inject_fault;
    const VerifyReport report = run_verification(opt);

    write_json_file(output_dir(a.common.out) / "verify.json", report_to_json(report));
    fmt::print(out, "reduction gap {:.3e}, snell gap {:.3e}, {} violations\n", report.max_abs_gap_reduction,
               report.max_abs_gap_snell, report.violations.size());
    if (report.passed()) return kOk;
    for (std::size_t i = 0; i < report.violations.size() && i < kMaxListedViolations; ++i) {
        const Violation& v = report.violations[i];
        fmt::print(err, "FAIL seed={} depth={} property={} value={:.17g}\n", v.seed, v.depth, v.property, v.value);
    }
    if (report.violations.size() > kMaxListedViolations) {
        fmt::print(err, "... {} more\n", report.violations.size() - kMaxListedViolations);
    }
    return kPropertyFailure;
}

int run_exchange(const ExchangeArgs& a, unsigned threads, std::ostream& out, std::ostream& /*err*/) {
    using namespace exchange;
    const MarketParams& m = a.market;
    m.validate();
    if (a.steps < 1) throw InputError(fmt::format("--steps must be at least 1, got {}", a.steps));
    if (a.paths < 1) throw InputError("--paths must be at least 1");
    const LatticeScheme scheme = a.scheme == "plain" ? LatticeScheme::Plain : LatticeScheme::Smoothed;

    const PriceSurface surface = price_exchange_double(m, a.steps, scheme, threads, StopTolerance{a.common.eps});
    const McEstimate mc = mc_policy_value(ExercisePolicy::optimal(surface), a.paths, a.seed, threads);

    const fs::path dir = output_dir(a.common.out);
    write_json_file(dir / "price.json", Json{{"v0", surface.value0()},
                                             {"margrabe", margrabe(m.x1, m.x2, m.sigma1, m.sigma2, m.maturity)},
                                             {"phi0", new_reward_phi(0.0, m.x1, m.x2, m)},
                                             {"n", a.steps},
                                             {"mc_estimate", mc.estimate},
                                             {"mc_se", mc.standard_error},
                                             {"mc_paths", mc.paths},
                                             {"seed", a.seed},
                                             {"scheme", a.scheme},
                                             {"x1", m.x1},
                                             {"x2", m.x2},
                                             {"sigma1", m.sigma1},
                                             {"sigma2", m.sigma2},
                                             {"maturity", m.maturity}});
    write_text(dir / "surface.csv", [&](std::ostream& os) { write_surface_csv(os, surface, a.surface_stride); });
    write_text(dir / "boundary.csv", [&](std::ostream& os) { write_boundary_csv(os, surface); });
    fmt::print(out, "v0 = {:.17g}, mc = {:.17g} +- {:.3g}\n", surface.value0(), mc.estimate, mc.standard_error);
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimal single and double stopping on finite scenario trees", "multistop"};
    app.require_subcommand(1);

    SnellArgs snell_args;
    CLI::App* snell = app.add_subcommand("snell", "Snell envelope and optimal rule for a node reward");
    add_common(*snell, snell_args.common);
    add_tree_input(*snell, snell_args.tree);
    snell->add_option("--reward", snell_args.reward_file, "Reward JSON file");
    snell->add_option("--reward-gen", snell_args.reward_gen, "Built-in reward")
        ->check(CLI::IsMember({"constant", "uniform", "state"}));
    snell->add_option("--reward-value", snell_args.reward_value, "Value of the constant reward")
        ->capture_default_str();

    DoubleArgs double_args;
    CLI::App* dbl = app.add_subcommand("double", "Double stopping value and optimal pair via the reduction");
    add_common(*dbl, double_args.common);
    add_tree_input(*dbl, double_args.tree);
    add_budget(*dbl, double_args.budget);
    dbl->add_option("--psi", double_args.psi_file, "Two-argument reward JSON file");
    dbl->add_option("--psi-gen", double_args.psi_gen, "Built-in two-argument reward")
        ->check(CLI::IsMember({"constant", "uniform", "sum", "difference", "max", "later"}));
    dbl->add_option("--psi-value", double_args.psi_value, "Value of the constant reward")->capture_default_str();
    dbl->add_flag("--verify", double_args.verify, "Cross-check against exhaustive pair enumeration");

    VerifyArgs verify_args;
    CLI::App* ver = app.add_subcommand("verify", "Randomized cross-check of the engines against enumeration");
    add_common(*ver, verify_args.common);
    add_budget(*ver, verify_args.budget);
    ver->add_option("--depth", verify_args.depths, "Tree depth(s)")->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    ver->add_option("--seeds", verify_args.seeds, "Seeds per depth")->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    ver->add_option("--first-seed", verify_args.first_seed, "First seed")->capture_default_str();
    ver->add_option("--random-pairs", verify_args.random_pairs, "Random rule pairs per seed")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    ver->add_flag("--inject-fault", verify_args.inject_fault,
                  "Harness self-test: use min(u1, u2) as the new reward so the check must fail");

    ExchangeArgs ex_args;
    CLI::App* ex = app.add_subcommand("exchange", "Double exchange option on two independent assets");
    add_common(*ex, ex_args.common);
    ex->add_option("--x1", ex_args.market.x1, "Initial price of asset 1")->capture_default_str();
    ex->add_option("--x2", ex_args.market.x2, "Initial price of asset 2")->capture_default_str();
    ex->add_option("--sigma1", ex_args.market.sigma1, "Volatility of asset 1")->capture_default_str();
    ex->add_option("--sigma2", ex_args.market.sigma2, "Volatility of asset 2")->capture_default_str();
    ex->add_option("--maturity", ex_args.market.maturity, "Maturity in years")->capture_default_str();
    ex->add_option("--steps", ex_args.steps, "Lattice steps")->capture_default_str();
    ex->add_option("--paths", ex_args.paths, "Monte Carlo paths")->capture_default_str();
    ex->add_option("--seed", ex_args.seed, "Monte Carlo seed")->capture_default_str();
    ex->add_option("--scheme", ex_args.scheme, "Lattice scheme")
        ->check(CLI::IsMember({"smoothed", "plain"}))
        ->capture_default_str();
    ex->add_option("--surface-stride", ex_args.surface_stride, "Write every stride-th time slice to surface.csv")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    std::vector<const char*> argv{"multistop"};
    for (const std::string& s : args) argv.push_back(s.c_str());

    CLI::App* chosen = nullptr;
    Common* common = nullptr;
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
        for (auto [sub, c] : {std::pair{snell, &snell_args.common}, std::pair{dbl, &double_args.common},
                              std::pair{ver, &verify_args.common}, std::pair{ex, &ex_args.common}}) {
            if (sub->parsed()) {
                chosen = sub;
                common = c;
            }
        }
        if (!common->config.empty()) apply_config(app, *chosen, read_json_file(common->config));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kInputError;
    } catch (const InputError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kInputError;
    }

    try {
        const unsigned threads = resolve_threads(*chosen, common->threads);
        if (chosen == snell) return run_snell(snell_args, threads, out, err);
        if (chosen == dbl) return run_double(double_args, threads, out, err);
        if (chosen == ver) return run_verify(verify_args, threads, out, err);
        return run_exchange(ex_args, threads, out, err);
    } catch (const InputError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kInputError;
    } catch (const BudgetError& e) {
        fmt::print(err, "budget refused: {}\n", e.what());
        return kBudgetRefusal;
    } catch (const InvariantError& e) {
        fmt::print(err, "invariant violated: {}\n", e.what());
        return kPropertyFailure;
    } catch (const std::exception& e) {
        fmt::print(err, "internal error: {}\n", e.what());
        return kPropertyFailure;
    }
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace multistop::cli
