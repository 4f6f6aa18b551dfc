#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flowgnn/schema.hpp"
#include "flowgnn/tensor.hpp"
#include "flowgnn/types.hpp"

namespace flowgnn {

struct parse_report {
    size_t rows_read = 0;
    size_t rows_kept = 0;
    size_t rows_rejected = 0;
    std::vector<std::pair<size_t, std::string>> errors;  // (line number, message); capped
};

struct dataset {
    std::vector<flow_record> records;
    feature_schema schema;  // vocabularies filled from the parsed rows
    parse_report report;
};

// Parses a CSV with header into flow records. Row order is preserved;
// malformed rows are skipped and reported with their line numbers. A column
// named by the schema but absent from the header is a hard error.
dataset parse_dataset(const std::string& path, const feature_schema& schema);

// refits categorical vocabularies on a record subset (the training partition),
// first-appearance order
void fit_vocabularies(const std::vector<flow_record>& records, feature_schema& schema);

// per-column standardization statistics; population (divide-by-n) convention,
// constant columns keep std 1 so they pass through centered at zero
struct scaler {
    std::vector<double> mean;
    std::vector<double> stddev;
    bool operator==(const scaler&) const = default;
};

scaler fit_scaler(const std::vector<flow_record>& records);

// rows x D matrix: standardized numeric part, then one one-hot block per
// categorical column (vocabulary slots + trailing unknown slot)
tensor2 transform(const std::vector<flow_record>& records, const scaler& s, const feature_schema& schema);

// Keeps every malicious record; normal records are randomly subsampled
// (seeded) until normal/malicious <= target_ratio. Relative order of kept
// records is unchanged. Throws if no malicious records or target_ratio < 1.
std::vector<flow_record> undersample(const std::vector<flow_record>& records, double target_ratio, uint64_t seed);

// binary flow table (see docs/formats.md)
void write_table(const std::string& path, const std::vector<flow_record>& records, const feature_schema& schema);
dataset read_table(const std::string& path);

}  // namespace flowgnn
