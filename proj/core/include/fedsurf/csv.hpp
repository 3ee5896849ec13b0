#pragma once

#include <string>

#include "fedsurf/dataset.hpp"

namespace fedsurf {

// Schema file (JSON): feature columns in order, the event column (0/1
// values), the time column, categorical levels, and the missing marker.
FeatureSchema load_schema(const std::string& path);
FeatureSchema schema_from_json_text(const std::string& text);
std::string schema_to_json_text(const FeatureSchema& schema);

// CSV with a header row, comma separator, "." decimal point. Categorical
// cells are mapped to ordinal codes per schema, missing cells to NaN.
// Malformed input throws LoadError naming the row and column.
SurvivalDataset load_csv(const std::string& path, const FeatureSchema& schema);
SurvivalDataset dataset_from_csv_text(const std::string& text, const FeatureSchema& schema);

// Re-serialization in the same dialect; load(save(x)) == x on records.
std::string dataset_to_csv_text(const SurvivalDataset& data);
void save_csv(const SurvivalDataset& data, const std::string& path);

}  // namespace fedsurf
