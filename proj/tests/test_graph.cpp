#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>

#include "flowgnn/graph.hpp"
#include "flowgnn/rng.hpp"

using namespace flowgnn;

namespace {

flow_record flow(const std::string& src, const std::string& dst, uint16_t sp = 0, uint16_t dp = 0) {
    flow_record r;
    r.src_addr = src;
    r.dst_addr = dst;
    r.src_port = sp;
    r.dst_port = dp;
    return r;
}

tensor2 random_features(size_t n, size_t d, rng& gen) {
    tensor2 t(n, d);
    for (auto& v : t.data) v = gen.normal();
    return t;
}

using edge_set = std::set<std::pair<uint32_t, uint32_t>>;

edge_set to_set(const std::vector<std::pair<uint32_t, uint32_t>>& edges) {
    return edge_set(edges.begin(), edges.end());
}

// all-pairs rule application; the independent construction oracle
edge_set brute_force_flow_edges(const std::vector<flow_record>& recs, key_mode mode) {
    edge_set out;
    for (uint32_t i = 0; i < recs.size(); ++i) {
        for (uint32_t j = i + 1; j < recs.size(); ++j) {
            if (src_key(recs[i], mode) == src_key(recs[j], mode) ||
                dst_key(recs[i], mode) == dst_key(recs[j], mode)) {
                out.insert({i, j});
            }
        }
    }
    return out;
}

// all-pairs directed-two-path rule; the line-graph oracle
edge_set brute_force_line_edges(const classic_graph& g) {
    edge_set out;
    for (uint32_t a = 0; a < g.edges.size(); ++a) {
        for (uint32_t b = a + 1; b < g.edges.size(); ++b) {
            if (g.edges[a].second == g.edges[b].first || g.edges[b].second == g.edges[a].first) {
                out.insert({a, b});
            }
        }
    }
    return out;
}

// union-find component count; independent of the BFS in graph_stats
size_t union_find_components(const flow_graph& g) {
    std::vector<uint32_t> parent(g.n_nodes);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<uint32_t(uint32_t)> find = [&](uint32_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (auto [i, j] : g.edges) parent[find(i)] = find(j);
    std::set<uint32_t> roots;
    for (uint32_t i = 0; i < g.n_nodes; ++i) roots.insert(find(i));
    return roots.size();
}

std::vector<flow_record> random_flows(rng& gen, size_t n, size_t endpoints) {
    std::vector<flow_record> recs;
    recs.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        recs.push_back(flow("h" + std::to_string(gen.below(endpoints)),
                            "h" + std::to_string(gen.below(endpoints)),
                            static_cast<uint16_t>(gen.below(5)), static_cast<uint16_t>(gen.below(5))));
    }
    return recs;
}

}  // namespace

TEST_CASE("cosine similarity examples and properties") {
    std::vector<double> u{1, 2, 3};
    CHECK(cosine_similarity(u, u) == doctest::Approx(1.0).epsilon(1e-15));

    std::vector<double> e1{1, 0}, e2{0, 1};
    CHECK(cosine_similarity(e1, e2) == 0.0);

    std::vector<double> a{1, 2}, b{2, 1};
    CHECK(cosine_similarity(a, b) == doctest::Approx(0.8).epsilon(1e-12));

    std::vector<double> zero{0, 0}, v{1, 1};
    CHECK(cosine_similarity(zero, v) == 0.0);
    CHECK(cosine_similarity(zero, zero) == 0.0);

    CHECK_THROWS_AS(cosine_similarity(std::vector<double>{1.0}, v), std::invalid_argument);

    rng gen(1);
    for (int it = 0; it < 50; ++it) {
        std::vector<double> x(5), y(5);
        for (auto& t : x) t = gen.normal();
        for (auto& t : y) t = gen.normal();
        double z = cosine_similarity(x, y);
        CHECK(z >= -1.0);
        CHECK(z <= 1.0);
        CHECK(cosine_similarity(y, x) == z);  // symmetry
        // scale invariance for positive scalars
        std::vector<double> xs = x, ys = y;
        double a1 = gen.uniform(0.1, 7.0), b1 = gen.uniform(0.1, 7.0);
        for (auto& t : xs) t *= a1;
        for (auto& t : ys) t *= b1;
        CHECK(cosine_similarity(xs, ys) == doctest::Approx(z).epsilon(1e-9));
        CHECK(cosine_similarity(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("flow graph follows the shared-endpoint narrative") {
    // F1..F5 drawn from the canonical picture: three flows out of one source,
    // two flows into one destination
    std::vector<flow_record> recs{flow("IP2", "IP1"), flow("IP2", "IP3"), flow("IP2", "IP4"),
                                  flow("IP3", "IP4")};
    rng gen(2);
    flow_graph g = build_flow_graph(recs, random_features(4, 3, gen));
    edge_set want{{0, 1}, {0, 2}, {1, 2}, {2, 3}};
    CHECK(to_set(g.edges) == want);
    CHECK(g.weights.size() == g.edges.size());
    for (double w : g.weights) {
        CHECK(std::isfinite(w));
        CHECK(w >= -1.0);
        CHECK(w <= 1.0);
    }
}

TEST_CASE("flow graph: disjoint endpoints produce no edges") {
    std::vector<flow_record> recs{flow("a", "b"), flow("c", "d")};
    rng gen(3);
    flow_graph g = build_flow_graph(recs, random_features(2, 2, gen));
    CHECK(g.edges.empty());
}

TEST_CASE("flow graph equals the all-pairs oracle on random instances") {
    rng gen(4);
    for (int inst = 0; inst < 25; ++inst) {
        size_t n = 20 + gen.below(180);
        auto recs = random_flows(gen, n, 12);
        auto feats = random_features(n, 4, gen);
        for (key_mode mode : {key_mode::addr, key_mode::addr_port}) {
            flow_graph g = build_flow_graph(recs, feats, mode);
            CHECK(to_set(g.edges) == brute_force_flow_edges(recs, mode));
        }
    }
}

TEST_CASE("flow graph weights equal the pairwise similarity") {
    rng gen(5);
    auto recs = random_flows(gen, 60, 6);
    auto feats = random_features(60, 5, gen);
    flow_graph g = build_flow_graph(recs, feats);
    for (size_t e = 0; e < g.edges.size(); ++e) {
        auto [i, j] = g.edges[e];
        double want = cosine_similarity(std::span(feats.row(i), 5), std::span(feats.row(j), 5));
        CHECK(g.weights[e] == want);
    }
}

TEST_CASE("hub endpoint over the group limit is rejected with guidance") {
    std::vector<flow_record> recs;
    for (int i = 0; i < 8; ++i) recs.push_back(flow("hub", "v" + std::to_string(i)));
    rng gen(6);
    graph_limits limits;
    limits.max_group = 5;
    CHECK_THROWS_WITH_AS(build_flow_graph(recs, random_features(8, 2, gen), key_mode::addr, limits),
                         doctest::Contains("--window"), std::runtime_error);
}

TEST_CASE("classic graph shapes") {
    std::vector<flow_record> recs{flow("IP2", "IP1"), flow("IP2", "IP3"), flow("IP2", "IP4"),
                                  flow("IP3", "IP4")};
    classic_graph g = build_classic_graph(recs);
    CHECK(g.nodes.size() == 4);
    CHECK(g.edges.size() == 4);

    classic_graph single = build_classic_graph({flow("a", "b")});
    CHECK(single.nodes.size() == 2);
    CHECK(single.edges.size() == 1);

    std::vector<flow_record> repeats(5, flow("a", "b"));
    classic_graph multi = build_classic_graph(repeats);
    CHECK(multi.nodes.size() == 2);
    CHECK(multi.edges.size() == 5);  // parallel edges stay
}

TEST_CASE("line graph: directed path and star") {
    rng gen(7);
    // path a -> b -> c: two flows, one line-graph edge
    std::vector<flow_record> path{flow("a", "b"), flow("b", "c")};
    classic_graph cg = build_classic_graph(path);
    flow_graph lg = line_graph(cg, random_features(2, 3, gen), {});
    CHECK(lg.n_nodes == 2);
    CHECK(to_set(lg.edges) == edge_set{{0, 1}});

    // star with all edges out of one node: no head-to-tail pair
    std::vector<flow_record> star{flow("c", "x"), flow("c", "y"), flow("c", "z")};
    classic_graph sg = build_classic_graph(star);
    flow_graph sl = line_graph(sg, random_features(3, 3, gen), {});
    CHECK(sl.n_nodes == 3);
    CHECK(sl.edges.empty());
}

TEST_CASE("line graph equals the directed-two-path oracle") {
    rng gen(8);
    for (int inst = 0; inst < 20; ++inst) {
        auto recs = random_flows(gen, 50, 8);
        classic_graph cg = build_classic_graph(recs);
        flow_graph lg = line_graph(cg, random_features(50, 4, gen), {});
        CHECK(lg.n_nodes == cg.edges.size());  // node count == flow count, always
        CHECK(to_set(lg.edges) == brute_force_line_edges(cg));
    }
}

TEST_CASE("normalized adjacency hand cases") {
    rng gen(9);
    // single node: just the self loop
    flow_graph lone = build_flow_graph({flow("a", "b")}, random_features(1, 2, gen));
    csr_matrix m = normalized_adjacency(lone, false);
    REQUIRE(m.val.size() == 1);
    CHECK(m.val[0] == 1.0);

    // two nodes, one unweighted edge: all four entries 0.5
    std::vector<flow_record> pair{flow("a", "x"), flow("a", "y")};
    flow_graph g = build_flow_graph(pair, random_features(2, 2, gen));
    REQUIRE(g.edges.size() == 1);
    csr_matrix m2 = normalized_adjacency(g, false);
    REQUIRE(m2.val.size() == 4);
    for (double v : m2.val) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("normalized adjacency is symmetric and row-bounded") {
    rng gen(10);
    auto recs = random_flows(gen, 80, 7);
    flow_graph g = build_flow_graph(recs, random_features(80, 4, gen));
    for (bool weighted : {false, true}) {
        csr_matrix m = normalized_adjacency(g, weighted);
        // symmetry via dense expansion
        tensor2 dense(m.n, m.n);
        for (size_t i = 0; i < m.n; ++i)
            for (size_t p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p) dense.at(i, m.col[p]) = m.val[p];
        for (size_t i = 0; i < m.n; ++i)
            for (size_t j = 0; j < m.n; ++j) CHECK(dense.at(i, j) == doctest::Approx(dense.at(j, i)).epsilon(1e-12));
        if (!weighted) {
            // unweighted: row action on the ones vector lands in (0, 1]
            for (size_t i = 0; i < m.n; ++i) {
                double row = 0.0;
                for (size_t p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p) row += m.val[p];
                CHECK(row > 0.0);
                CHECK(row <= 1.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("weighted adjacency clamps negatives; raw mode refuses zero degrees") {
    std::vector<flow_record> pair{flow("a", "x"), flow("a", "y")};
    tensor2 feats(2, 2);
    feats.at(0, 0) = 1.0;
    feats.at(1, 0) = -1.0;  // cosine = -1
    flow_graph g = build_flow_graph(pair, feats);
    REQUIRE(g.weights[0] == doctest::Approx(-1.0));

    csr_matrix clamped = normalized_adjacency(g, true, true);
    for (size_t i = 0; i < clamped.n; ++i) {
        for (size_t p = clamped.row_ptr[i]; p < clamped.row_ptr[i + 1]; ++p) {
            if (clamped.col[p] != i) CHECK(clamped.val[p] == 0.0);
        }
    }
    CHECK_THROWS_WITH_AS(normalized_adjacency(g, true, false), doctest::Contains("clamp"),
                         std::runtime_error);
}

TEST_CASE("graph stats: empty graph and the union-find oracle") {
    flow_graph empty;
    graph_summary s = graph_stats(empty);
    CHECK(s.nodes == 0);
    CHECK(s.edges == 0);
    CHECK(s.components == 0);

    rng gen(11);
    for (int inst = 0; inst < 10; ++inst) {
        auto recs = random_flows(gen, 40 + gen.below(80), 20);
        flow_graph g = build_flow_graph(recs, random_features(recs.size(), 3, gen));
        graph_summary st = graph_stats(g);
        CHECK(st.components == union_find_components(g));
        size_t hist_total = 0;
        for (auto [d, c] : st.degree_histogram) hist_total += c;
        CHECK(hist_total == g.n_nodes);
    }
}

TEST_CASE("shared destinations always link, regardless of source spoofing") {
    rng gen(12);
    auto recs = random_flows(gen, 100, 9);
    flow_graph g = build_flow_graph(recs, random_features(100, 3, gen));
    auto edges = to_set(g.edges);
    auto comp = connected_components(g);
    for (uint32_t i = 0; i < recs.size(); ++i) {
        for (uint32_t j = i + 1; j < recs.size(); ++j) {
            if (recs[i].dst_addr == recs[j].dst_addr && recs[i].src_addr != recs[j].src_addr) {
                CHECK(edges.count({i, j}) == 1);
                CHECK(comp[i] == comp[j]);
            }
        }
    }
}

TEST_CASE("attention graph mirrors slots correctly") {
    rng gen(13);
    auto recs = random_flows(gen, 30, 5);
    flow_graph g = build_flow_graph(recs, random_features(30, 3, gen));
    attention_graph ag = make_attention_graph(g);
    for (size_t i = 0; i < ag.n; ++i) {
        for (size_t p = ag.row_ptr[i]; p < ag.row_ptr[i + 1]; ++p) {
            size_t q = ag.reverse_slot[p];
            uint32_t j = ag.col[p];
            CHECK(q >= ag.row_ptr[j]);
            CHECK(q < ag.row_ptr[j + 1]);
            CHECK(ag.col[q] == i);
            CHECK(ag.zeta[q] == ag.zeta[p]);
            if (j == i) CHECK(q == p);
        }
        // self loop zeta is 1
        auto begin = ag.col.begin() + static_cast<ptrdiff_t>(ag.row_ptr[i]);
        auto end = ag.col.begin() + static_cast<ptrdiff_t>(ag.row_ptr[i + 1]);
        auto it = std::find(begin, end, static_cast<uint32_t>(i));
        REQUIRE(it != end);
        CHECK(ag.zeta[static_cast<size_t>(it - ag.col.begin())] == 1.0);
    }
}

TEST_CASE("graph export round trip") {
    rng gen(14);
    auto recs = random_flows(gen, 25, 4);
    for (auto& r : recs) r.label = gen.below(2) ? flow_label::malicious : flow_label::normal;
    flow_graph g = build_flow_graph(recs, random_features(25, 3, gen));

    auto dir = std::filesystem::temp_directory_path();
    auto bin = (dir / "flowgnn_graph.bin").string();
    write_graph_binary(bin, g);
    flow_graph back = read_graph_binary(bin);
    CHECK(back.n_nodes == g.n_nodes);
    CHECK(back.edges == g.edges);
    CHECK(back.weights == g.weights);
    CHECK(back.provenance == g.provenance);
    CHECK(back.node_labels == g.node_labels);

    auto j = graph_to_json(g);
    CHECK(j["n_nodes"] == g.n_nodes);
    CHECK(j["edges"].size() == g.edges.size());
    CHECK(j["nodes"].size() == g.n_nodes);
}
