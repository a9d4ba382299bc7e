#ifndef MULTISTOP_TREE_IO_HPP
#define MULTISTOP_TREE_IO_HPP

#include <filesystem>

#include <json.hpp>

#include "multistop/double_stopping.hpp"
#include "multistop/scenario_tree.hpp"
#include "multistop/snell.hpp"

// JSON documents for trees, node rewards, psi tables and rules.
//
//   tree:   {"horizon": n, "nodes": [{"id", "t", "parent", "children", "prob", "state"?}]}
//   reward: {"reward": [{"node", "value"}]}
//   psi:    {"psi": [{"a", "b", "value"}]}
//
// Malformed documents raise InputError.

namespace multistop {

using Json = nlohmann::json;

[[nodiscard]] ScenarioTree tree_from_json(const Json& doc);
[[nodiscard]] Json tree_to_json(const ScenarioTree& tree);

[[nodiscard]] NodeReward reward_from_json(const Json& doc, const ScenarioTree& tree);
[[nodiscard]] Json reward_to_json(const NodeReward& reward);

[[nodiscard]] BiRewardTable psi_from_json(const Json& doc, const ScenarioTree& tree);
[[nodiscard]] Json psi_to_json(const BiRewardTable& table);

/// {"start", "stop_nodes", "continue_nodes"}
[[nodiscard]] Json rule_to_json(const StoppingRule& rule);

[[nodiscard]] Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& doc);

}  // namespace multistop

#endif  // MULTISTOP_TREE_IO_HPP
