#include "flowgnn/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "flowgnn/csv.hpp"
#include "flowgnn/rng.hpp"

namespace flowgnn {

namespace {

constexpr size_t kMaxStoredErrors = 1000;

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_port(const std::string& s, uint16_t& out) {
    double v;
    if (!parse_double(s, v)) return false;
    if (v < 0 || v > 65535 || v != std::floor(v)) return false;
    out = static_cast<uint16_t>(v);
    return true;
}

size_t require_column(const std::unordered_map<std::string, size_t>& index, const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw std::runtime_error("schema error: column '" + name + "' not found in header");
    return it->second;
}

bool is_no_type(const std::string& s) { return s.empty() || s == "-"; }

}  // namespace

dataset parse_dataset(const std::string& path, const feature_schema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open data file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty data file: " + path);
    auto header = csv::split_line(line);
    std::unordered_map<std::string, size_t> col;
    for (size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);

    const size_t src_addr_i = require_column(col, schema.src_addr_column);
    const size_t src_port_i = require_column(col, schema.src_port_column);
    const size_t dst_addr_i = require_column(col, schema.dst_addr_column);
    const size_t dst_port_i = require_column(col, schema.dst_port_column);
    const size_t ts_i = require_column(col, schema.timestamp_column);
    std::vector<size_t> num_i, cat_i;
    for (const auto& c : schema.numeric_columns) num_i.push_back(require_column(col, c));
    for (const auto& c : schema.categorical_columns) cat_i.push_back(require_column(col, c));
    const bool labeled = !schema.label_column.empty();
    const size_t label_i = labeled ? require_column(col, schema.label_column) : 0;
    const bool typed = !schema.attack_type_column.empty();
    const size_t type_i = typed ? require_column(col, schema.attack_type_column) : 0;

    std::unordered_set<std::string> normal_tokens(schema.normal_values.begin(), schema.normal_values.end());
    std::unordered_set<std::string> malicious_tokens(schema.malicious_values.begin(), schema.malicious_values.end());

    dataset out;
    out.schema = schema;
    out.schema.vocabularies.assign(schema.categorical_columns.size(), {});
    std::vector<std::unordered_map<std::string, size_t>> seen(schema.categorical_columns.size());

    auto reject = [&](size_t line_no, std::string msg) {
        ++out.report.rows_rejected;
        if (out.report.errors.size() < kMaxStoredErrors) out.report.errors.emplace_back(line_no, std::move(msg));
    };

    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        ++out.report.rows_read;
        auto fields = csv::split_line(line);
        if (fields.size() != header.size()) {
            reject(line_no, "field count " + std::to_string(fields.size()) + " does not match header");
            continue;
        }

        flow_record r;
        r.src_addr = fields[src_addr_i];
        r.dst_addr = fields[dst_addr_i];
        if (!parse_port(fields[src_port_i], r.src_port)) {
            reject(line_no, "bad source port '" + fields[src_port_i] + "'");
            continue;
        }
        if (!parse_port(fields[dst_port_i], r.dst_port)) {
            reject(line_no, "bad destination port '" + fields[dst_port_i] + "'");
            continue;
        }
        if (!parse_double(fields[ts_i], r.timestamp)) {
            reject(line_no, "bad timestamp '" + fields[ts_i] + "'");
            continue;
        }

        r.features.resize(num_i.size());
        bool ok = true;
        for (size_t k = 0; k < num_i.size(); ++k) {
            if (!parse_double(fields[num_i[k]], r.features[k])) {
                reject(line_no, "non-numeric value '" + fields[num_i[k]] + "' in column '" +
                                    schema.numeric_columns[k] + "'");
                ok = false;
                break;
            }
        }
        if (!ok) continue;

        if (labeled) {
            const std::string& tok = fields[label_i];
            if (normal_tokens.count(tok)) {
                r.label = flow_label::normal;
            } else if (malicious_tokens.count(tok)) {
                r.label = flow_label::malicious;
            } else {
                reject(line_no, "unrecognized label '" + tok + "'");
                continue;
            }
        }
        if (typed && !is_no_type(fields[type_i])) r.attack_type = fields[type_i];

        r.categorical.resize(cat_i.size());
        for (size_t k = 0; k < cat_i.size(); ++k) {
            r.categorical[k] = fields[cat_i[k]];
            auto& vocab_seen = seen[k];
            if (vocab_seen.emplace(r.categorical[k], vocab_seen.size()).second)
                out.schema.vocabularies[k].push_back(r.categorical[k]);
        }

        out.records.push_back(std::move(r));
        ++out.report.rows_kept;
    }
    return out;
}

void fit_vocabularies(const std::vector<flow_record>& records, feature_schema& schema) {
    schema.vocabularies.assign(schema.categorical_columns.size(), {});
    std::vector<std::unordered_set<std::string>> seen(schema.categorical_columns.size());
    for (const auto& r : records) {
        if (r.categorical.size() != schema.categorical_columns.size())
            throw std::invalid_argument("record categorical arity does not match schema");
        for (size_t k = 0; k < r.categorical.size(); ++k) {
            if (seen[k].insert(r.categorical[k]).second) schema.vocabularies[k].push_back(r.categorical[k]);
        }
    }
}

scaler fit_scaler(const std::vector<flow_record>& records) {
    if (records.size() < 2) throw std::invalid_argument("fit_scaler: need at least 2 records");
    const size_t d = records[0].features.size();
    for (const auto& r : records) {
        if (r.features.size() != d) throw std::invalid_argument("fit_scaler: inconsistent feature arity");
    }
    scaler s;
    s.mean.assign(d, 0.0);
    s.stddev.assign(d, 0.0);
    const double n = static_cast<double>(records.size());
    for (const auto& r : records) {
        for (size_t k = 0; k < d; ++k) s.mean[k] += r.features[k];
    }
    for (size_t k = 0; k < d; ++k) s.mean[k] /= n;
    for (const auto& r : records) {
        for (size_t k = 0; k < d; ++k) {
            double dev = r.features[k] - s.mean[k];
            s.stddev[k] += dev * dev;
        }
    }
    for (size_t k = 0; k < d; ++k) {
        s.stddev[k] = std::sqrt(s.stddev[k] / n);
        if (s.stddev[k] < 1e-8) s.stddev[k] = 1.0;
    }
    return s;
}

tensor2 transform(const std::vector<flow_record>& records, const scaler& s, const feature_schema& schema) {
    const size_t n_num = schema.numeric_columns.size();
    if (s.mean.size() != n_num) throw std::invalid_argument("transform: scaler does not match schema");
    if (schema.vocabularies.size() != schema.categorical_columns.size())
        throw std::invalid_argument("transform: schema vocabularies not fitted");

    std::vector<std::unordered_map<std::string, size_t>> index(schema.vocabularies.size());
    for (size_t c = 0; c < schema.vocabularies.size(); ++c) {
        for (size_t i = 0; i < schema.vocabularies[c].size(); ++i) index[c].emplace(schema.vocabularies[c][i], i);
    }

    tensor2 out(records.size(), schema.feature_dim());
    for (size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.features.size() != n_num || rec.categorical.size() != schema.categorical_columns.size())
            throw std::invalid_argument("transform: record arity does not match schema");
        double* row = out.row(r);
        for (size_t k = 0; k < n_num; ++k) row[k] = (rec.features[k] - s.mean[k]) / s.stddev[k];
        size_t off = n_num;
        for (size_t c = 0; c < schema.vocabularies.size(); ++c) {
            const size_t slots = schema.vocabularies[c].size() + 1;
            auto it = index[c].find(rec.categorical[c]);
            size_t slot = it == index[c].end() ? slots - 1 : it->second;
            row[off + slot] = 1.0;
            off += slots;
        }
    }
    return out;
}

std::vector<flow_record> undersample(const std::vector<flow_record>& records, double target_ratio, uint64_t seed) {
    if (target_ratio < 1.0) throw std::invalid_argument("undersample: target_ratio must be >= 1");
    size_t normal = 0, malicious = 0;
    for (const auto& r : records) {
        if (r.label == flow_label::normal) ++normal;
        else if (r.label == flow_label::malicious) ++malicious;
        else throw std::invalid_argument("undersample: records must carry labels");
    }
    if (malicious == 0) throw std::runtime_error("undersample: no malicious records, ratio undefined");
    const size_t keep_n = static_cast<size_t>(target_ratio * static_cast<double>(malicious));
    if (normal <= keep_n) return records;

    std::vector<size_t> normal_idx;
    normal_idx.reserve(normal);
    for (size_t i = 0; i < records.size(); ++i) {
        if (records[i].label == flow_label::normal) normal_idx.push_back(i);
    }
    rng gen(seed, "undersample");
    gen.shuffle(normal_idx);
    normal_idx.resize(keep_n);
    std::vector<char> keep(records.size(), 0);
    for (size_t i : normal_idx) keep[i] = 1;

    std::vector<flow_record> out;
    out.reserve(keep_n + malicious);
    for (size_t i = 0; i < records.size(); ++i) {
        if (records[i].label == flow_label::malicious || keep[i]) out.push_back(records[i]);
    }
    return out;
}

// ---- binary flow table ----

namespace {

constexpr char kTableMagic[4] = {'F', 'G', 'T', 'B'};
constexpr uint32_t kTableVersion = 1;

void put_bytes(std::ostream& os, const void* p, size_t n) { os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

template <class T>
void put(std::ostream& os, T v) { put_bytes(os, &v, sizeof(T)); }

void put_str(std::ostream& os, const std::string& s) {
    put<uint32_t>(os, static_cast<uint32_t>(s.size()));
    put_bytes(os, s.data(), s.size());
}

void get_bytes(std::istream& is, void* p, size_t n) {
    if (!is.read(static_cast<char*>(p), static_cast<std::streamsize>(n)))
        throw std::runtime_error("flow table: truncated file");
}

template <class T>
T get(std::istream& is) {
    T v;
    get_bytes(is, &v, sizeof(T));
    return v;
}

std::string get_str(std::istream& is) {
    uint32_t n = get<uint32_t>(is);
    if (n > (1u << 24)) throw std::runtime_error("flow table: implausible string length");
    std::string s(n, '\0');
    get_bytes(is, s.data(), n);
    return s;
}

}  // namespace

void write_table(const std::string& path, const std::vector<flow_record>& records, const feature_schema& schema) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open output table: " + path);
    put_bytes(os, kTableMagic, 4);
    put<uint32_t>(os, kTableVersion);
    put<uint64_t>(os, records.size());
    put<uint32_t>(os, static_cast<uint32_t>(schema.numeric_columns.size()));
    put<uint32_t>(os, static_cast<uint32_t>(schema.categorical_columns.size()));
    for (const auto& c : schema.numeric_columns) put_str(os, c);
    for (const auto& c : schema.categorical_columns) put_str(os, c);
    for (const auto& r : records) {
        put_str(os, r.src_addr);
        put<uint16_t>(os, r.src_port);
        put_str(os, r.dst_addr);
        put<uint16_t>(os, r.dst_port);
        put<double>(os, r.timestamp);
        put<int8_t>(os, static_cast<int8_t>(r.label));
        put_str(os, r.attack_type);
        put_bytes(os, r.features.data(), r.features.size() * sizeof(double));
        for (const auto& t : r.categorical) put_str(os, t);
    }
    if (!os) throw std::runtime_error("failed writing table: " + path);
}

dataset read_table(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open table: " + path);
    char magic[4];
    get_bytes(is, magic, 4);
    if (std::memcmp(magic, kTableMagic, 4) != 0) throw std::runtime_error("not a flow table: " + path);
    if (get<uint32_t>(is) != kTableVersion) throw std::runtime_error("unsupported flow table version");
    const uint64_t n = get<uint64_t>(is);
    const uint32_t n_num = get<uint32_t>(is);
    const uint32_t n_cat = get<uint32_t>(is);

    dataset out;
    for (uint32_t i = 0; i < n_num; ++i) out.schema.numeric_columns.push_back(get_str(is));
    for (uint32_t i = 0; i < n_cat; ++i) out.schema.categorical_columns.push_back(get_str(is));
    out.schema.vocabularies.assign(n_cat, {});

    out.records.resize(n);
    for (uint64_t i = 0; i < n; ++i) {
        flow_record& r = out.records[i];
        r.src_addr = get_str(is);
        r.src_port = get<uint16_t>(is);
        r.dst_addr = get_str(is);
        r.dst_port = get<uint16_t>(is);
        r.timestamp = get<double>(is);
        r.label = static_cast<flow_label>(get<int8_t>(is));
        r.attack_type = get_str(is);
        r.features.resize(n_num);
        get_bytes(is, r.features.data(), n_num * sizeof(double));
        r.categorical.resize(n_cat);
        for (uint32_t c = 0; c < n_cat; ++c) r.categorical[c] = get_str(is);
    }
    out.report.rows_read = out.report.rows_kept = n;
    return out;
}

}  // namespace flowgnn
