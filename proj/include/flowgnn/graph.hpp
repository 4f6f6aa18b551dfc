#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flowgnn/kernels.hpp"
#include "flowgnn/tensor.hpp"
#include "flowgnn/types.hpp"

namespace flowgnn {

// Weighted undirected graph over a batch of flows: one node per flow, an edge
// whenever two flows share a source endpoint or share a destination endpoint,
// edge weights are the cosine similarity of the two flows' feature rows.
struct flow_graph {
    size_t n_nodes = 0;
    std::vector<std::pair<uint32_t, uint32_t>> edges;  // i < j, sorted, deduplicated
    std::vector<double> weights;                       // per edge, finite, in [-1, 1]
    tensor2 node_features;                             // n_nodes x D
    std::vector<flow_label> node_labels;               // empty when unlabeled
    std::vector<uint64_t> provenance;                  // original record index per node
    double build_seconds = 0.0;                        // not serialized
};

// endpoints as nodes, one directed edge per flow (parallel edges allowed)
struct classic_graph {
    std::vector<std::string> nodes;                    // endpoint key text
    std::vector<std::pair<uint32_t, uint32_t>> edges;  // src node -> dst node, one per flow
    std::vector<uint64_t> provenance;                  // flow index per edge
};

// cosine similarity of two equal-length vectors; zero-norm inputs give 0,
// result clamped to [-1, 1]; throws on length mismatch
double cosine_similarity(std::span<const double> u, std::span<const double> v);

struct graph_limits {
    // an endpoint grouping more than this many flows in one window would blow
    // up the pair count; callers are told to shrink the window instead
    size_t max_group = 10000;
};

// Endpoint-indexed construction: hash endpoint -> flow indices, emit pairs
// within each group. Never scans all pairs.
flow_graph build_flow_graph(const std::vector<flow_record>& records, const tensor2& features,
                            key_mode mode = key_mode::addr, const graph_limits& limits = {});

classic_graph build_classic_graph(const std::vector<flow_record>& records, key_mode mode = key_mode::addr);

// Nodes are the classic graph's edges (flows); two nodes are linked when the
// flows form a directed path of length two in either orientation. Features and
// labels for node k come from row provenance[k].
flow_graph line_graph(const classic_graph& g, const tensor2& flow_features,
                      const std::vector<flow_label>& flow_labels);

// D^(-1/2) (A + I) D^(-1/2) in CSR form. In weighted mode edge weights are
// clamped to [0, 1] before building (negative cosines would break the degree
// roots); pass clamp_weights = false to keep raw weights, which throws when a
// degree drops to <= 0.
csr_matrix normalized_adjacency(const flow_graph& g, bool weighted, bool clamp_weights = true);

struct graph_summary {
    size_t nodes = 0;
    size_t edges = 0;
    size_t components = 0;
    std::map<size_t, size_t> degree_histogram;  // degree -> node count
    double build_seconds = 0.0;
};

graph_summary graph_stats(const flow_graph& g);

// connected-component id per node (BFS order, ids dense from 0)
std::vector<uint32_t> connected_components(const flow_graph& g);

// Neighbor structure for the attention layer: per-row sorted neighbor lists
// with the self loop included, the per-slot similarity score (1 on the self
// loop), and the slot of each entry's mirror (j,i) for backward gathers.
struct attention_graph {
    size_t n = 0;
    std::vector<size_t> row_ptr;
    std::vector<uint32_t> col;
    std::vector<double> zeta;
    std::vector<size_t> reverse_slot;
};

attention_graph make_attention_graph(const flow_graph& g);

// exports (documented in docs/formats.md)
nlohmann::json graph_to_json(const flow_graph& g);
void write_graph_json(const std::string& path, const flow_graph& g);
void write_graph_binary(const std::string& path, const flow_graph& g);
flow_graph read_graph_binary(const std::string& path);

}  // namespace flowgnn
