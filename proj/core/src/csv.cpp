#include "fedsurf/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "fedsurf/errors.hpp"

namespace fedsurf {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

double parse_double(const std::string& cell, std::size_t row, const std::string& column) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw LoadError("malformed numeric value \"" + cell + "\" at row " +
                        std::to_string(row) + ", column " + column);
    }
    return value;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

}  // namespace

FeatureSchema schema_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw LoadError(std::string("schema is not valid JSON: ") + e.what());
    }

    FeatureSchema schema;
    schema.time_column = j.at("time_column").get<std::string>();
    schema.event_column = j.at("event_column").get<std::string>();
    if (j.contains("missing_marker")) {
        schema.missing_marker = j.at("missing_marker").get<std::string>();
    }
    for (const auto& f : j.at("features")) {
        FeatureDescriptor d;
        d.name = f.at("name").get<std::string>();
        const auto kind = f.value("kind", std::string("numerical"));
        if (kind == "numerical") {
            d.kind = FeatureKind::Numerical;
        } else if (kind == "categorical") {
            d.kind = FeatureKind::CategoricalOrdinal;
            if (!f.contains("levels")) {
                throw LoadError("schema: categorical column " + d.name + " must list levels");
            }
            for (const auto& level : f.at("levels")) {
                const auto s = level.get<std::string>();
                if (s.find(',') != std::string::npos) {
                    throw LoadError("schema: level \"" + s + "\" contains a comma");
                }
                d.levels.push_back(s);
            }
            if (d.levels.empty()) {
                throw LoadError("schema: categorical column " + d.name + " has no levels");
            }
        } else {
            throw LoadError("schema: unknown feature kind \"" + kind + "\"");
        }
        schema.features.push_back(std::move(d));
    }
    return schema;
}

FeatureSchema load_schema(const std::string& path) {
    return schema_from_json_text(read_file(path));
}

std::string schema_to_json_text(const FeatureSchema& schema) {
    json j;
    j["time_column"] = schema.time_column;
    j["event_column"] = schema.event_column;
    j["missing_marker"] = schema.missing_marker;
    j["features"] = json::array();
    for (const auto& f : schema.features) {
        json jf;
        jf["name"] = f.name;
        jf["kind"] = f.kind == FeatureKind::Numerical ? "numerical" : "categorical";
        if (f.kind == FeatureKind::CategoricalOrdinal) jf["levels"] = f.levels;
        j["features"].push_back(jf);
    }
    return j.dump(2) + "\n";
}

SurvivalDataset dataset_from_csv_text(const std::string& text, const FeatureSchema& schema) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw LoadError("empty file: header row required");

    const auto header = split_line(line);
    auto column_index = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw LoadError("unknown column \"" + name + "\": not present in header");
    };

    std::vector<std::size_t> feature_cols;
    feature_cols.reserve(schema.feature_count());
    for (const auto& f : schema.features) feature_cols.push_back(column_index(f.name));
    const std::size_t time_col = column_index(schema.time_column);
    const std::size_t event_col = column_index(schema.event_column);

    std::vector<SurvivalRecord> rows;
    std::size_t row_number = 0;  // 1-based over data rows
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row_number;
        const auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw LoadError("malformed row " + std::to_string(row_number) + ": expected " +
                            std::to_string(header.size()) + " cells, found " +
                            std::to_string(cells.size()));
        }

        SurvivalRecord rec;
        rec.features.reserve(schema.feature_count());
        for (std::size_t k = 0; k < schema.feature_count(); ++k) {
            const auto& desc = schema.features[k];
            const auto& cell = cells[feature_cols[k]];
            if (cell == schema.missing_marker) {
                rec.features.push_back(missing_value());
                continue;
            }
            if (desc.kind == FeatureKind::Numerical) {
                const double value = parse_double(cell, row_number, desc.name);
                if (!std::isfinite(value)) {
                    throw LoadError("non-finite value \"" + cell + "\" at row " +
                                    std::to_string(row_number) + ", column " + desc.name);
                }
                rec.features.push_back(value);
            } else {
                auto it = std::find(desc.levels.begin(), desc.levels.end(), cell);
                if (it == desc.levels.end()) {
                    throw LoadError("unknown level \"" + cell + "\" at row " +
                                    std::to_string(row_number) + ", column " + desc.name);
                }
                rec.features.push_back(static_cast<double>(it - desc.levels.begin()));
            }
        }

        const auto& event_cell = cells[event_col];
        if (event_cell == "0") {
            rec.event = false;
        } else if (event_cell == "1") {
            rec.event = true;
        } else {
            throw LoadError("non-boolean event \"" + event_cell + "\" at row " +
                            std::to_string(row_number) + ", column " + schema.event_column);
        }

        rec.time = parse_double(cells[time_col], row_number, schema.time_column);
        if (rec.time < 0.0) {
            throw LoadError("negative time at row " + std::to_string(row_number));
        }
        if (!std::isfinite(rec.time)) {
            throw LoadError("non-finite time at row " + std::to_string(row_number));
        }
        rows.push_back(std::move(rec));
    }
    return SurvivalDataset(std::move(rows), schema);
}

SurvivalDataset load_csv(const std::string& path, const FeatureSchema& schema) {
    return dataset_from_csv_text(read_file(path), schema);
}

std::string dataset_to_csv_text(const SurvivalDataset& data) {
    const auto& schema = data.schema();
    std::string out;
    for (const auto& f : schema.features) {
        out += f.name;
        out += ',';
    }
    out += schema.event_column;
    out += ',';
    out += schema.time_column;
    out += '\n';

    for (const auto& rec : data.records()) {
        for (std::size_t k = 0; k < schema.feature_count(); ++k) {
            const double x = rec.features[k];
            const auto& desc = schema.features[k];
            if (is_missing(x)) {
                out += schema.missing_marker;
            } else if (desc.kind == FeatureKind::Numerical) {
                out += format_double(x);
            } else {
                const auto code = static_cast<std::size_t>(x);
                if (code >= desc.levels.size() || static_cast<double>(code) != x) {
                    throw ArgumentError("dataset_to_csv_text: invalid categorical code in column " +
                                        desc.name);
                }
                out += desc.levels[code];
            }
            out += ',';
        }
        out += rec.event ? '1' : '0';
        out += ',';
        out += format_double(rec.time);
        out += '\n';
    }
    return out;
}

void save_csv(const SurvivalDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write file: " + path);
    out << dataset_to_csv_text(data);
}

}  // namespace fedsurf
