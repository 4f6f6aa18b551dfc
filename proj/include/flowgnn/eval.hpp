#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowgnn/pipeline.hpp"
#include "flowgnn/types.hpp"

namespace flowgnn {

enum class split_side : int8_t { dropped = -1, train = 0, test = 1 };

struct split_plan {
    std::string kind;  // "ip" or "random"
    std::set<std::string> train_endpoints;
    std::set<std::string> test_endpoints;
    std::set<std::string> train_attack_types;
    std::set<std::string> test_attack_types;
    std::vector<split_side> assignment;  // per record
    size_t dropped = 0;
    size_t endpoint_overlap = 0;                 // random split: endpoints seen on both sides
    std::set<std::string> overlapping_types;     // residual attack-type overlap (best effort)

    std::vector<uint64_t> side_indices(split_side s) const;
    nlohmann::json to_json() const;
};

struct attacker_stats {
    size_t malicious_flows = 0;
    std::set<std::string> types;
};

// source endpoints of malicious flows with their flow counts and type sets
using attacker_table = std::map<std::string, attacker_stats>;

attacker_table attacker_flow_counts(const std::vector<flow_record>& records);

struct ip_split_options {
    double train_fraction = 0.7;
    // when the data admits no type-disjoint two-way partition (or has a single
    // attacker/type), split attacker endpoints anyway and report the overlap
    bool allow_type_overlap = false;
};

// Endpoint-disjoint split: attacker endpoints are partitioned so the two
// sides' attack-type sets are disjoint where the data allows; remaining
// endpoints are randomly assigned (seeded) to balance flow counts. A flow
// stays only if both its endpoints are on one side; the rest are dropped.
split_plan make_ip_split(const std::vector<flow_record>& records, const attacker_table& attackers,
                         uint64_t seed, const ip_split_options& opts = {});

// leakage-prone baseline: iid per-flow assignment, endpoint overlap reported
split_plan random_split(const std::vector<flow_record>& records, double fraction, uint64_t seed);

struct roc_point {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct sweep_row {
    double threshold = 0.0;
    size_t alerts = 0;
    double precision = 0.0;
    double recall = 0.0;
    double fpr = 0.0;
    double f1 = 0.0;
};

struct eval_report {
    size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0, fpr = 0.0;
    std::optional<double> auc;  // absent when only one class is present
    std::vector<roc_point> roc;
    std::vector<sweep_row> sweep;

    nlohmann::json to_json() const;
    std::string table() const;  // human-readable
};

// counts use each flow's stored decision; AUC ranks the scores (midranks on
// ties); the ROC is the threshold step curve from (0,0) to (1,1)
eval_report compute_metrics(const std::vector<scored_flow>& scored);

std::vector<sweep_row> threshold_sweep(const std::vector<scored_flow>& scored, const std::vector<double>& grid);

void write_roc_csv(const std::string& path, const std::vector<roc_point>& roc);

}  // namespace flowgnn
