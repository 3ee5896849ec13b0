#pragma once

#include <string>

#include "fedsurf/forest.hpp"

namespace fedsurf {

// JSON forest format, also the wire format trees travel in between client
// and server: version tag, feature_count, the forest evaluation grid, and
// one node array per tree. Internal nodes carry (feature, threshold,
// missing direction, child indices); leaves carry CHF values aligned to
// the tree's grid.
std::string forest_to_json(const Forest& forest);
Forest forest_from_json(const std::string& text);

std::string tree_to_json(const SurvivalTree& tree);
SurvivalTree tree_from_json(const std::string& text);

void save_forest(const Forest& forest, const std::string& path);
Forest load_forest(const std::string& path);

}  // namespace fedsurf
