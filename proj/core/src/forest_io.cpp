#include "fedsurf/forest_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedsurf/errors.hpp"

namespace fedsurf {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json tree_to_json_obj(const SurvivalTree& tree) {
    json jt;
    jt["time_grid"] = *tree.time_grid;
    jt["in_bag_count"] = tree.in_bag_count;
    json nodes = json::array();
    for (const auto& node : tree.nodes) {
        if (node.is_leaf) {
            nodes.push_back(json{{"chf", node.chf}});
        } else {
            nodes.push_back(json{
                {"feature", node.feature},
                {"threshold", node.threshold},
                {"missing", node.missing_direction == MissingDirection::Left ? "left" : "right"},
                {"left", node.left},
                {"right", node.right},
            });
        }
    }
    jt["nodes"] = std::move(nodes);
    return jt;
}

SurvivalTree tree_from_json_obj(const json& jt) {
    SurvivalTree tree;
    tree.time_grid = std::make_shared<const std::vector<double>>(
        jt.at("time_grid").get<std::vector<double>>());
    tree.in_bag_count = jt.at("in_bag_count").get<std::size_t>();
    for (const auto& jn : jt.at("nodes")) {
        TreeNode node;
        if (jn.contains("chf")) {
            node.is_leaf = true;
            node.chf = jn.at("chf").get<std::vector<double>>();
            if (node.chf.size() != tree.time_grid->size()) {
                throw LoadError("forest JSON: leaf CHF length does not match time grid");
            }
        } else {
            node.is_leaf = false;
            node.feature = jn.at("feature").get<std::size_t>();
            node.threshold = jn.at("threshold").get<double>();
            const auto dir = jn.at("missing").get<std::string>();
            if (dir == "left") {
                node.missing_direction = MissingDirection::Left;
            } else if (dir == "right") {
                node.missing_direction = MissingDirection::Right;
            } else {
                throw LoadError("forest JSON: unknown missing direction \"" + dir + "\"");
            }
            node.left = jn.at("left").get<std::size_t>();
            node.right = jn.at("right").get<std::size_t>();
        }
        tree.nodes.push_back(std::move(node));
    }
    if (tree.nodes.empty()) throw LoadError("forest JSON: tree has no nodes");
    for (const auto& node : tree.nodes) {
        if (!node.is_leaf && (node.left >= tree.nodes.size() || node.right >= tree.nodes.size())) {
            throw LoadError("forest JSON: child index out of range");
        }
    }
    return tree;
}

json parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw LoadError(std::string("invalid forest JSON: ") + e.what());
    }
}

}  // namespace

std::string forest_to_json(const Forest& forest) {
    json j;
    j["format"] = "fedsurf-forest";
    j["version"] = kFormatVersion;
    j["feature_count"] = forest.feature_count;
    j["time_grid"] = forest.time_grid;
    json trees = json::array();
    for (const auto& tree : forest.trees) trees.push_back(tree_to_json_obj(tree));
    j["trees"] = std::move(trees);
    return j.dump();
}

Forest forest_from_json(const std::string& text) {
    const json j = parse(text);
    if (j.value("format", "") != "fedsurf-forest") {
        throw LoadError("not a fedsurf forest file");
    }
    if (j.at("version").get<int>() != kFormatVersion) {
        throw LoadError("unsupported forest format version");
    }
    Forest forest;
    forest.feature_count = j.at("feature_count").get<std::size_t>();
    forest.time_grid = j.at("time_grid").get<std::vector<double>>();
    for (const auto& jt : j.at("trees")) forest.trees.push_back(tree_from_json_obj(jt));
    return forest;
}

std::string tree_to_json(const SurvivalTree& tree) {
    return tree_to_json_obj(tree).dump();
}

SurvivalTree tree_from_json(const std::string& text) {
    return tree_from_json_obj(parse(text));
}

void save_forest(const Forest& forest, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write file: " + path);
    out << forest_to_json(forest) << '\n';
}

Forest load_forest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return forest_from_json(buf.str());
}

}  // namespace fedsurf
