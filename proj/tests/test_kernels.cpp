#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "flowgnn/graph.hpp"
#include "flowgnn/kernels.hpp"
#include "flowgnn/rng.hpp"

using namespace flowgnn;

namespace {

tensor2 random_tensor(size_t r, size_t c, rng& gen) {
    tensor2 t(r, c);
    for (auto& v : t.data) v = gen.normal();
    return t;
}

bool identical(const tensor2& a, const tensor2& b) {
    return a.rows == b.rows && a.cols == b.cols &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("openmp kernels are bitwise identical to the serial reference") {
    rng gen(21);
    // sizes straddle the parallelism cutoff on purpose
    for (size_t n : {3ul, 17ul, 64ul, 257ul}) {
        tensor2 a = random_tensor(n, n / 2 + 1, gen);
        tensor2 b = random_tensor(n / 2 + 1, n / 3 + 2, gen);
        CHECK(identical(kernels::matmul(a, b), serial::matmul(a, b)));
        CHECK(identical(kernels::matmul_tn(a, a), serial::matmul_tn(a, a)));
        CHECK(identical(kernels::matmul_nt(a, a), serial::matmul_nt(a, a)));

        std::vector<flow_record> recs(2 * n);
        for (auto& r : recs) {
            r.src_addr = "s" + std::to_string(gen.below(8));
            r.dst_addr = "d" + std::to_string(gen.below(8));
        }
        tensor2 feats = random_tensor(recs.size(), 9, gen);
        flow_graph g = build_flow_graph(recs, feats);
        csr_matrix adj = normalized_adjacency(g, true);
        CHECK(identical(kernels::spmm(adj, feats), serial::spmm(adj, feats)));

        auto wp = kernels::edge_cosine(feats, g.edges);
        auto ws = serial::edge_cosine(feats, g.edges);
        CHECK(wp == ws);
    }
}

TEST_CASE("matmul family shape validation") {
    tensor2 a(2, 3), b(4, 5);
    CHECK_THROWS_AS(kernels::matmul(a, b), std::invalid_argument);
    CHECK_THROWS_AS(kernels::matmul_tn(a, b), std::invalid_argument);
    CHECK_THROWS_AS(kernels::matmul_nt(a, b), std::invalid_argument);
    CHECK_THROWS_AS(serial::matmul(a, b), std::invalid_argument);
}

TEST_CASE("relu and bias helpers") {
    tensor2 x(2, 2);
    x.data = {-1, 2, 0.5, -3};
    kernels::relu_inplace(x);
    CHECK(x.data == std::vector<double>{0, 2, 0.5, 0});
    kernels::add_row_inplace(x, {1, -1});
    CHECK(x.data == std::vector<double>{1, 1, 1.5, -1});
    CHECK_THROWS_AS(kernels::add_row_inplace(x, {1, 2, 3}), std::invalid_argument);
}
