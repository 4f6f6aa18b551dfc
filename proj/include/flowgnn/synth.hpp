#pragma once

#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "flowgnn/schema.hpp"
#include "flowgnn/types.hpp"

namespace flowgnn {

// one burst of flows from an actor toward one or more victims
struct scenario_step {
    double time = 0.0;
    std::string actor;
    std::vector<std::string> victims;  // flows round-robin across victims
    size_t flows = 1;
    std::vector<double> mean;   // feature template centre
    double noise = -1.0;        // < 0: use the script-level noise
    flow_label label = flow_label::malicious;
    std::string attack_type;
    int campaign = 0;
    std::string spoof_of;  // when spoofed, the pre-spoof actor (ground truth only)
    uint16_t port = 445;
};

struct benign_background {
    size_t flows = 0;
    size_t endpoints = 8;
    double jitter = 0.0;  // magnitude of the per-endpoint centroid offset
    uint16_t port = 443;
};

struct scenario_script {
    size_t n_features = 8;
    double noise = 0.25;
    benign_background benign;
    std::vector<scenario_step> steps;  // times non-decreasing

    void validate() const;
    static scenario_script from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static scenario_script load(const std::string& path);
};

struct ground_truth_row {
    flow_label label = flow_label::normal;
    std::string attack_type;
    int campaign = -1;  // -1 for background traffic
};

// Deterministic generation: features are drawn around each step's mean so
// flows of one campaign stay mutually similar; benign endpoints draw around
// per-endpoint centroids. Records come back sorted by timestamp.
std::pair<std::vector<flow_record>, std::vector<ground_truth_row>> generate(const scenario_script& script,
                                                                            uint64_t seed);

// canonical four-step scenario: reconnaissance across four victims, injection
// against the first, repeated cracking of the fourth, then the same cracking
// retried from a spoofed source address
scenario_script multi_step_script(size_t n_features = 8, double separation = 3.0, double noise = 0.25);

// several multi-step campaigns over shared benign background; malicious
// templates share a common direction (scaled by `separation`) plus a
// per-campaign offset (`campaign_jitter`) so held-out campaigns stay learnable
scenario_script campaigns_script(size_t campaigns, size_t flows_per_step, size_t benign_flows,
                                 size_t benign_endpoints, size_t n_features, double separation,
                                 double campaign_jitter, double noise, uint64_t seed);

// Per-endpoint correlated corpus for the split comparison: every attacker has
// its own attack type and its own feature direction with near-duplicate flows,
// and benign endpoints get centroids of comparable magnitude. Random splits
// memorize these endpoints; endpoint-disjoint splits cannot.
scenario_script leakage_script(size_t attackers, size_t flows_per_attacker, size_t benign_endpoints,
                               size_t flows_per_benign, size_t n_features, double separation, uint64_t seed);

// the CSV layout produced by write_csv
feature_schema synth_schema(size_t n_features);

void write_csv(const std::string& path, const std::vector<flow_record>& records,
               const std::vector<ground_truth_row>& truth, size_t n_features);

}  // namespace flowgnn
