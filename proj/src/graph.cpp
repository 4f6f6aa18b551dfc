#include "flowgnn/graph.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>
#include <stdexcept>
#include <unordered_map>

namespace flowgnn {

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
    return detail::cosine_raw(u.data(), v.data(), u.size());
}

namespace {

using edge_t = std::pair<uint32_t, uint32_t>;

void emit_group_pairs(const std::vector<uint32_t>& group, std::vector<edge_t>& out) {
    for (size_t a = 0; a + 1 < group.size(); ++a) {
        for (size_t b = a + 1; b < group.size(); ++b) {
            out.emplace_back(group[a], group[b]);  // indices ascend within a group
        }
    }
}

void dedup_edges(std::vector<edge_t>& edges) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

}  // namespace

flow_graph build_flow_graph(const std::vector<flow_record>& records, const tensor2& features,
                            key_mode mode, const graph_limits& limits) {
    if (features.rows != records.size())
        throw std::invalid_argument("build_flow_graph: feature rows do not match record count");
    const auto t0 = std::chrono::steady_clock::now();

    std::unordered_map<endpoint_key, std::vector<uint32_t>, endpoint_key_hash> by_src, by_dst;
    by_src.reserve(records.size());
    by_dst.reserve(records.size());
    for (uint32_t i = 0; i < records.size(); ++i) {
        by_src[src_key(records[i], mode)].push_back(i);
        by_dst[dst_key(records[i], mode)].push_back(i);
    }

    flow_graph g;
    g.n_nodes = records.size();
    for (const auto* groups : {&by_src, &by_dst}) {
        for (const auto& [key, members] : *groups) {
            if (members.size() > limits.max_group) {
                throw std::runtime_error(
                    "build_flow_graph: endpoint '" + key.addr + "' groups " + std::to_string(members.size()) +
                    " flows in one window (limit " + std::to_string(limits.max_group) +
                    "); use a smaller --window");
            }
            emit_group_pairs(members, g.edges);
        }
    }
    dedup_edges(g.edges);
    g.weights = kernels::edge_cosine(features, g.edges);

    g.node_features = features;
    g.node_labels.reserve(records.size());
    bool any_label = false;
    for (const auto& r : records) {
        g.node_labels.push_back(r.label);
        if (r.label != flow_label::unknown) any_label = true;
    }
    if (!any_label) g.node_labels.clear();
    g.provenance.resize(records.size());
    for (size_t i = 0; i < records.size(); ++i) g.provenance[i] = i;

    g.build_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return g;
}

classic_graph build_classic_graph(const std::vector<flow_record>& records, key_mode mode) {
    classic_graph g;
    std::unordered_map<endpoint_key, uint32_t, endpoint_key_hash> node_of;
    auto intern = [&](const endpoint_key& k) {
        auto [it, inserted] = node_of.emplace(k, static_cast<uint32_t>(g.nodes.size()));
        if (inserted) {
            g.nodes.push_back(k.port >= 0 ? k.addr + ":" + std::to_string(k.port) : k.addr);
        }
        return it->second;
    };
    g.edges.reserve(records.size());
    for (uint32_t i = 0; i < records.size(); ++i) {
        uint32_t s = intern(src_key(records[i], mode));
        uint32_t d = intern(dst_key(records[i], mode));
        g.edges.emplace_back(s, d);
        g.provenance.push_back(i);
    }
    return g;
}

flow_graph line_graph(const classic_graph& g, const tensor2& flow_features,
                      const std::vector<flow_label>& flow_labels) {
    const auto t0 = std::chrono::steady_clock::now();
    const size_t m = g.edges.size();
    if (flow_features.rows != m)
        throw std::invalid_argument("line_graph: feature rows do not match flow count");

    // flows incident to each endpoint node, by orientation
    std::vector<std::vector<uint32_t>> out_of(g.nodes.size()), into(g.nodes.size());
    for (uint32_t k = 0; k < m; ++k) {
        out_of[g.edges[k].first].push_back(k);
        into[g.edges[k].second].push_back(k);
    }

    flow_graph lg;
    lg.n_nodes = m;
    for (size_t v = 0; v < g.nodes.size(); ++v) {
        // a ends at v, b starts at v: directed path of length two
        for (uint32_t a : into[v]) {
            for (uint32_t b : out_of[v]) {
                if (a == b) continue;
                lg.edges.emplace_back(std::min(a, b), std::max(a, b));
            }
        }
    }
    dedup_edges(lg.edges);
    lg.weights = kernels::edge_cosine(flow_features, lg.edges);
    lg.node_features = flow_features;
    if (!flow_labels.empty()) {
        if (flow_labels.size() != m) throw std::invalid_argument("line_graph: label count mismatch");
        lg.node_labels = flow_labels;
    }
    lg.provenance.assign(g.provenance.begin(), g.provenance.end());
    lg.build_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return lg;
}

namespace {

// adjacency lists with self loops, cols sorted per row; shared by the
// normalized adjacency and the attention structure
struct self_loop_adj {
    std::vector<size_t> row_ptr;
    std::vector<uint32_t> col;
    std::vector<double> w;  // raw edge weight, 1.0 on self loops
};

self_loop_adj build_self_loop_adj(const flow_graph& g) {
    const size_t n = g.n_nodes;
    std::vector<size_t> deg(n, 1);  // self loop
    for (const auto& [i, j] : g.edges) {
        ++deg[i];
        ++deg[j];
    }
    self_loop_adj a;
    a.row_ptr.assign(n + 1, 0);
    for (size_t i = 0; i < n; ++i) a.row_ptr[i + 1] = a.row_ptr[i] + deg[i];
    a.col.resize(a.row_ptr[n]);
    a.w.resize(a.row_ptr[n]);
    std::vector<size_t> fill(n, 0);
    auto push = [&](uint32_t r, uint32_t c, double w) {
        size_t p = a.row_ptr[r] + fill[r]++;
        a.col[p] = c;
        a.w[p] = w;
    };
    for (uint32_t i = 0; i < n; ++i) push(i, i, 1.0);
    for (size_t e = 0; e < g.edges.size(); ++e) {
        auto [i, j] = g.edges[e];
        push(i, j, g.weights[e]);
        push(j, i, g.weights[e]);
    }
    // sort each row by column id (weights follow)
    for (size_t i = 0; i < n; ++i) {
        size_t b = a.row_ptr[i], e = a.row_ptr[i + 1];
        std::vector<std::pair<uint32_t, double>> row(e - b);
        for (size_t p = b; p < e; ++p) row[p - b] = {a.col[p], a.w[p]};
        std::sort(row.begin(), row.end());
        for (size_t p = b; p < e; ++p) {
            a.col[p] = row[p - b].first;
            a.w[p] = row[p - b].second;
        }
    }
    return a;
}

}  // namespace

csr_matrix normalized_adjacency(const flow_graph& g, bool weighted, bool clamp_weights) {
    self_loop_adj a = build_self_loop_adj(g);
    const size_t n = g.n_nodes;

    std::vector<double> degree(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        for (size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
            double w = 1.0;
            if (weighted && a.col[p] != i) {
                w = a.w[p];
                if (clamp_weights) w = std::clamp(w, 0.0, 1.0);
            }
            a.w[p] = (a.col[p] == i) ? 1.0 : w;
            degree[i] += a.w[p];
        }
        if (degree[i] <= 0.0) {
            throw std::runtime_error(
                "normalized_adjacency: node degree <= 0 from negative edge weights; "
                "enable weight clamping to [0, 1]");
        }
    }

    csr_matrix m;
    m.n = n;
    m.row_ptr = std::move(a.row_ptr);
    m.col = std::move(a.col);
    m.val.resize(a.w.size());
    for (size_t i = 0; i < n; ++i) {
        double di = 1.0 / std::sqrt(degree[i]);
        for (size_t p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p) {
            m.val[p] = di * a.w[p] / std::sqrt(degree[m.col[p]]);
        }
    }
    return m;
}

std::vector<uint32_t> connected_components(const flow_graph& g) {
    std::vector<std::vector<uint32_t>> adj(g.n_nodes);
    for (const auto& [i, j] : g.edges) {
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    std::vector<uint32_t> comp(g.n_nodes, UINT32_MAX);
    uint32_t next = 0;
    std::queue<uint32_t> q;
    for (uint32_t s = 0; s < g.n_nodes; ++s) {
        if (comp[s] != UINT32_MAX) continue;
        comp[s] = next;
        q.push(s);
        while (!q.empty()) {
            uint32_t u = q.front();
            q.pop();
            for (uint32_t v : adj[u]) {
                if (comp[v] == UINT32_MAX) {
                    comp[v] = next;
                    q.push(v);
                }
            }
        }
        ++next;
    }
    return comp;
}

graph_summary graph_stats(const flow_graph& g) {
    graph_summary s;
    s.nodes = g.n_nodes;
    s.edges = g.edges.size();
    s.build_seconds = g.build_seconds;
    std::vector<size_t> deg(g.n_nodes, 0);
    for (const auto& [i, j] : g.edges) {
        ++deg[i];
        ++deg[j];
    }
    for (size_t d : deg) ++s.degree_histogram[d];
    if (g.n_nodes > 0) {
        auto comp = connected_components(g);
        s.components = 1 + *std::max_element(comp.begin(), comp.end());
    }
    return s;
}

attention_graph make_attention_graph(const flow_graph& g) {
    self_loop_adj a = build_self_loop_adj(g);
    attention_graph ag;
    ag.n = g.n_nodes;
    ag.row_ptr = std::move(a.row_ptr);
    ag.col = std::move(a.col);
    ag.zeta = std::move(a.w);
    ag.reverse_slot.resize(ag.col.size());
    for (size_t i = 0; i < ag.n; ++i) {
        for (size_t p = ag.row_ptr[i]; p < ag.row_ptr[i + 1]; ++p) {
            uint32_t j = ag.col[p];
            // binary search i within row j (rows are sorted)
            auto begin = ag.col.begin() + static_cast<ptrdiff_t>(ag.row_ptr[j]);
            auto end = ag.col.begin() + static_cast<ptrdiff_t>(ag.row_ptr[j + 1]);
            auto it = std::lower_bound(begin, end, static_cast<uint32_t>(i));
            ag.reverse_slot[p] = static_cast<size_t>(it - ag.col.begin());
        }
    }
    return ag;
}

nlohmann::json graph_to_json(const flow_graph& g) {
    nlohmann::json nodes = nlohmann::json::array();
    for (size_t i = 0; i < g.n_nodes; ++i) {
        nlohmann::json n;
        n["id"] = i;
        n["provenance"] = g.provenance.empty() ? i : g.provenance[i];
        if (!g.node_labels.empty() && g.node_labels[i] != flow_label::unknown)
            n["label"] = label_name(g.node_labels[i]);
        nodes.push_back(std::move(n));
    }
    nlohmann::json edges = nlohmann::json::array();
    for (size_t e = 0; e < g.edges.size(); ++e) {
        edges.push_back({g.edges[e].first, g.edges[e].second, g.weights[e]});
    }
    return {{"n_nodes", g.n_nodes}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

void write_graph_json(const std::string& path, const flow_graph& g) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open graph output: " + path);
    os << graph_to_json(g).dump(2) << "\n";
}

namespace {
constexpr char kGraphMagic[4] = {'F', 'G', 'R', 'B'};
constexpr uint32_t kGraphVersion = 1;
}  // namespace

void write_graph_binary(const std::string& path, const flow_graph& g) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open graph output: " + path);
    os.write(kGraphMagic, 4);
    uint32_t ver = kGraphVersion;
    os.write(reinterpret_cast<const char*>(&ver), 4);
    uint64_t n = g.n_nodes, m = g.edges.size();
    os.write(reinterpret_cast<const char*>(&n), 8);
    os.write(reinterpret_cast<const char*>(&m), 8);
    for (size_t e = 0; e < g.edges.size(); ++e) {
        os.write(reinterpret_cast<const char*>(&g.edges[e].first), 4);
        os.write(reinterpret_cast<const char*>(&g.edges[e].second), 4);
        os.write(reinterpret_cast<const char*>(&g.weights[e]), 8);
    }
    for (size_t i = 0; i < g.n_nodes; ++i) {
        uint64_t p = g.provenance.empty() ? i : g.provenance[i];
        os.write(reinterpret_cast<const char*>(&p), 8);
    }
    for (size_t i = 0; i < g.n_nodes; ++i) {
        int8_t l = static_cast<int8_t>(g.node_labels.empty() ? flow_label::unknown : g.node_labels[i]);
        os.write(reinterpret_cast<const char*>(&l), 1);
    }
    if (!os) throw std::runtime_error("failed writing graph: " + path);
}

flow_graph read_graph_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open graph: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kGraphMagic, 4) != 0) throw std::runtime_error("not a graph file: " + path);
    uint32_t ver;
    is.read(reinterpret_cast<char*>(&ver), 4);
    if (ver != kGraphVersion) throw std::runtime_error("unsupported graph version");
    uint64_t n, m;
    is.read(reinterpret_cast<char*>(&n), 8);
    is.read(reinterpret_cast<char*>(&m), 8);
    flow_graph g;
    g.n_nodes = n;
    g.edges.resize(m);
    g.weights.resize(m);
    for (uint64_t e = 0; e < m; ++e) {
        is.read(reinterpret_cast<char*>(&g.edges[e].first), 4);
        is.read(reinterpret_cast<char*>(&g.edges[e].second), 4);
        is.read(reinterpret_cast<char*>(&g.weights[e]), 8);
    }
    g.provenance.resize(n);
    for (uint64_t i = 0; i < n; ++i) is.read(reinterpret_cast<char*>(&g.provenance[i]), 8);
    g.node_labels.resize(n);
    bool any = false;
    for (uint64_t i = 0; i < n; ++i) {
        int8_t l;
        is.read(reinterpret_cast<char*>(&l), 1);
        g.node_labels[i] = static_cast<flow_label>(l);
        if (g.node_labels[i] != flow_label::unknown) any = true;
    }
    if (!any) g.node_labels.clear();
    if (!is) throw std::runtime_error("truncated graph file: " + path);
    return g;
}

}  // namespace flowgnn
