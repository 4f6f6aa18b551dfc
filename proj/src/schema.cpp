#include "flowgnn/schema.hpp"

#include <fstream>
#include <stdexcept>

namespace flowgnn {

using nlohmann::json;

size_t feature_schema::feature_dim() const {
    size_t d = numeric_columns.size();
    for (const auto& v : vocabularies) d += v.size() + 1;
    return d;
}

feature_schema feature_schema::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema file: " + path);
    json j;
    in >> j;
    return from_json(j);
}

feature_schema feature_schema::from_json(const json& j) {
    feature_schema s;
    const auto& cols = j.at("columns");
    s.src_addr_column = cols.at("src_addr").get<std::string>();
    s.src_port_column = cols.at("src_port").get<std::string>();
    s.dst_addr_column = cols.at("dst_addr").get<std::string>();
    s.dst_port_column = cols.at("dst_port").get<std::string>();
    s.timestamp_column = cols.at("timestamp").get<std::string>();
    s.numeric_columns = j.at("numeric").get<std::vector<std::string>>();
    if (j.contains("categorical")) s.categorical_columns = j.at("categorical").get<std::vector<std::string>>();
    s.vocabularies.assign(s.categorical_columns.size(), {});
    if (j.contains("vocabularies")) {
        s.vocabularies = j.at("vocabularies").get<std::vector<std::vector<std::string>>>();
        if (s.vocabularies.size() != s.categorical_columns.size())
            throw std::runtime_error("schema: vocabularies do not match categorical columns");
    }
    if (j.contains("label")) {
        const auto& lbl = j.at("label");
        s.label_column = lbl.at("column").get<std::string>();
        s.normal_values = lbl.at("normal").get<std::vector<std::string>>();
        s.malicious_values = lbl.at("malicious").get<std::vector<std::string>>();
    }
    if (j.contains("attack_type_column")) s.attack_type_column = j.at("attack_type_column").get<std::string>();
    return s;
}

json feature_schema::to_json() const {
    json j;
    j["columns"] = {{"src_addr", src_addr_column}, {"src_port", src_port_column},
                    {"dst_addr", dst_addr_column}, {"dst_port", dst_port_column},
                    {"timestamp", timestamp_column}};
    j["numeric"] = numeric_columns;
    j["categorical"] = categorical_columns;
    j["vocabularies"] = vocabularies;
    if (!label_column.empty()) {
        j["label"] = {{"column", label_column}, {"normal", normal_values}, {"malicious", malicious_values}};
    }
    if (!attack_type_column.empty()) j["attack_type_column"] = attack_type_column;
    return j;
}

}  // namespace flowgnn
