#include "multistop/tree_io.hpp"

#include <fstream>
#include <vector>

#include <fmt/format.h>

#include "multistop/errors.hpp"

namespace multistop {

namespace {

template <typename Fn>
auto translate_json_errors(const char* what, Fn&& fn) {
    try {
        return fn();
    } catch (const Json::exception& e) {
        throw InputError(fmt::format("malformed {} document: {}", what, e.what()));
    }
}

const Json& require_array(const Json& doc, const char* key, const char* what) {
    if (!doc.is_object() || !doc.contains(key) || !doc.at(key).is_array()) {
        throw InputError(fmt::format("{} document needs an array field '{}'", what, key));
    }
    return doc.at(key);
}

}  // namespace

ScenarioTree tree_from_json(const Json& doc) {
    return translate_json_errors("tree", [&] {
        const Json& list = require_array(doc, "nodes", "tree");
        std::vector<NodeSpec> nodes;
        nodes.reserve(list.size());
        for (const Json& item : list) {
            NodeSpec spec;
            spec.id = item.at("id").get<NodeId>();
            spec.t = item.at("t").get<int>();
            if (!item.at("parent").is_null()) spec.parent = item.at("parent").get<NodeId>();
            spec.children = item.at("children").get<std::vector<NodeId>>();
            spec.prob = item.at("prob").get<double>();
            if (item.contains("state") && !item.at("state").is_null()) spec.state = item.at("state").get<double>();
            nodes.push_back(std::move(spec));
        }
        ScenarioTree tree = build_tree(std::span<const NodeSpec>(nodes));
        if (doc.contains("horizon") && doc.at("horizon").get<int>() != tree.horizon()) {
            throw InputError(fmt::format("declared horizon {} but leaves sit at t = {}", doc.at("horizon").get<int>(),
                                         tree.horizon()));
        }
        return tree;
    });
}

Json tree_to_json(const ScenarioTree& tree) {
    Json nodes = Json::array();
    for (const NodeSpec& s : node_list(tree)) {
        Json item = {{"id", s.id}, {"t", s.t}, {"children", s.children}, {"prob", s.prob}};
        item["parent"] = s.parent ? Json(*s.parent) : Json(nullptr);
        if (s.state) item["state"] = *s.state;
        nodes.push_back(std::move(item));
    }
    return Json{{"horizon", tree.horizon()}, {"nodes", std::move(nodes)}};
}

NodeReward reward_from_json(const Json& doc, const ScenarioTree& tree) {
    return translate_json_errors("reward", [&] {
        const Json& list = require_array(doc, "reward", "reward");
        std::vector<double> values(tree.size(), 0.0);
        std::vector<char> seen(tree.size(), 0);
        for (const Json& item : list) {
            const auto node = item.at("node").get<NodeId>();
            tree.require_node(node);
            if (seen[node]) throw InputError(fmt::format("reward lists node {} twice", node));
            seen[node] = 1;
            values[node] = item.at("value").get<double>();
        }
        for (NodeId m = 0; m < tree.size(); ++m) {
            if (!seen[m]) throw InputError(fmt::format("reward is missing node {}", m));
        }
        return NodeReward(tree, std::move(values));
    });
}

Json reward_to_json(const NodeReward& reward) {
    Json list = Json::array();
    for (NodeId m = 0; m < reward.size(); ++m) list.push_back({{"node", m}, {"value", reward[m]}});
    return Json{{"reward", std::move(list)}};
}

BiRewardTable psi_from_json(const Json& doc, const ScenarioTree& tree) {
    return translate_json_errors("psi", [&] {
        const Json& list = require_array(doc, "psi", "psi");
        BiRewardTable table(tree);
        for (const Json& item : list) {
            const auto a = item.at("a").get<NodeId>();
            const auto b = item.at("b").get<NodeId>();
            if (table.is_set(a, b)) throw InputError(fmt::format("psi lists pair ({}, {}) twice", a, b));
            table.set(a, b, item.at("value").get<double>());
        }
        if (!table.complete()) throw InputError("psi table does not cover every comparable pair");
        return table;
    });
}

Json psi_to_json(const BiRewardTable& table) {
    Json list = Json::array();
    table.for_each_pair([&](NodeId a, NodeId b) { list.push_back({{"a", a}, {"b", b}, {"value", table.at(a, b)}}); });
    return Json{{"psi", std::move(list)}};
}

Json rule_to_json(const StoppingRule& rule) {
    return Json{{"start", rule.start()}, {"stop_nodes", rule.stop_nodes()}, {"continue_nodes", rule.continue_nodes()}};
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw InputError(fmt::format("cannot parse '{}': {}", path.string(), e.what()));
    }
}

void write_json_file(const std::filesystem::path& path, const Json& doc) {
    std::ofstream out(path);
    if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
    out << doc.dump(2) << '\n';
}

}  // namespace multistop
