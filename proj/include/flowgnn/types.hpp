#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace flowgnn {

enum class flow_label : int8_t { unknown = -1, normal = 0, malicious = 1 };

inline const char* label_name(flow_label l) {
    switch (l) {
        case flow_label::normal: return "benign";
        case flow_label::malicious: return "malicious";
        default: return "unknown";
    }
}

// one network flow; features/categorical are ordered by the schema's columns
struct flow_record {
    std::string src_addr;
    std::string dst_addr;
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    double timestamp = 0.0;
    std::vector<double> features;
    std::vector<std::string> categorical;
    flow_label label = flow_label::unknown;
    std::string attack_type;  // empty when untagged

    bool operator==(const flow_record&) const = default;
};

enum class key_mode { addr, addr_port };

// endpoint identity used for linking flows; equality only, no address parsing
struct endpoint_key {
    std::string addr;
    int32_t port = -1;  // -1 when keying by address alone
    bool operator==(const endpoint_key&) const = default;
};

struct endpoint_key_hash {
    size_t operator()(const endpoint_key& k) const {
        size_t h = std::hash<std::string>{}(k.addr);
        return h ^ (std::hash<int32_t>{}(k.port) + 0x9e3779b9u + (h << 6) + (h >> 2));
    }
};

inline endpoint_key src_key(const flow_record& r, key_mode m) {
    return {r.src_addr, m == key_mode::addr_port ? static_cast<int32_t>(r.src_port) : -1};
}

inline endpoint_key dst_key(const flow_record& r, key_mode m) {
    return {r.dst_addr, m == key_mode::addr_port ? static_cast<int32_t>(r.dst_port) : -1};
}

}  // namespace flowgnn
