#pragma once

#include <json.hpp>
#include <string>
#include <vector>

namespace flowgnn {

// declarative description of a flow CSV: which columns identify endpoints,
// which carry numeric/categorical features, and how label tokens map to
// benign/malicious
struct feature_schema {
    std::string src_addr_column;
    std::string src_port_column;
    std::string dst_addr_column;
    std::string dst_port_column;
    std::string timestamp_column;

    std::vector<std::string> numeric_columns;
    std::vector<std::string> categorical_columns;
    // per categorical column; fixed when fitted, unseen tokens route to the
    // reserved unknown slot at transform time
    std::vector<std::vector<std::string>> vocabularies;

    std::string label_column;  // empty: unlabeled data
    std::vector<std::string> normal_values;
    std::vector<std::string> malicious_values;
    std::string attack_type_column;  // empty: no attack-type tags

    // transformed width: numeric columns + per-categorical (vocabulary + 1)
    size_t feature_dim() const;

    static feature_schema load(const std::string& path);
    static feature_schema from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

}  // namespace flowgnn
