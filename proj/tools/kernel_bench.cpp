// Times the OpenMP kernels against the serial reference implementations and
// checks that both produce identical results on the benchmark inputs.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "flowgnn/graph.hpp"
#include "flowgnn/kernels.hpp"
#include "flowgnn/rng.hpp"

using namespace flowgnn;

namespace {

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

tensor2 random_tensor(size_t r, size_t c, rng& gen) {
    tensor2 t(r, c);
    for (auto& v : t.data) v = gen.normal();
    return t;
}

template <class F>
double time_best_of(int reps, F f) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        double t0 = now_seconds();
        f();
        best = std::min(best, now_seconds() - t0);
    }
    return best;
}

bool identical(const tensor2& a, const tensor2& b) {
    return a.rows == b.rows && a.cols == b.cols &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

void report(const char* name, double serial_s, double parallel_s, bool match) {
    std::printf("%-22s serial %9.4f ms   openmp %9.4f ms   speedup %5.2fx   %s\n", name, serial_s * 1e3,
                parallel_s * 1e3, serial_s / parallel_s, match ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    size_t n = 512;
    int reps = 5;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--n" && i + 1 < argc) n = std::stoul(argv[++i]);
        else if (std::string(argv[i]) == "--reps" && i + 1 < argc) reps = std::stoi(argv[++i]);
    }
    std::printf("kernel benchmark: n=%zu, %d reps, %d threads\n", n, reps, max_threads());

    rng gen(7, "bench");
    tensor2 a = random_tensor(n, n / 2, gen);
    tensor2 b = random_tensor(n / 2, n / 2, gen);

    tensor2 rs, rp;
    double ts = time_best_of(reps, [&] { rs = serial::matmul(a, b); });
    double tp = time_best_of(reps, [&] { rp = kernels::matmul(a, b); });
    report("matmul", ts, tp, identical(rs, rp));

    ts = time_best_of(reps, [&] { rs = serial::matmul_tn(a, a); });
    tp = time_best_of(reps, [&] { rp = kernels::matmul_tn(a, a); });
    report("matmul_tn", ts, tp, identical(rs, rp));

    ts = time_best_of(reps, [&] { rs = serial::matmul_nt(a, a); });
    tp = time_best_of(reps, [&] { rp = kernels::matmul_nt(a, a); });
    report("matmul_nt", ts, tp, identical(rs, rp));

    // random flow batch for the sparse kernels
    std::vector<flow_record> records(4 * n);
    for (size_t i = 0; i < records.size(); ++i) {
        records[i].src_addr = "10.0.0." + std::to_string(gen.below(24));
        records[i].dst_addr = "10.0.1." + std::to_string(gen.below(24));
    }
    tensor2 feats = random_tensor(records.size(), 32, gen);
    flow_graph g = build_flow_graph(records, feats);
    csr_matrix adj = normalized_adjacency(g, true);
    std::printf("flow graph: %zu nodes, %zu edges\n", g.n_nodes, g.edges.size());

    ts = time_best_of(reps, [&] { rs = serial::spmm(adj, feats); });
    tp = time_best_of(reps, [&] { rp = kernels::spmm(adj, feats); });
    report("spmm", ts, tp, identical(rs, rp));

    std::vector<double> ws, wp;
    ts = time_best_of(reps, [&] { ws = serial::edge_cosine(feats, g.edges); });
    tp = time_best_of(reps, [&] { wp = kernels::edge_cosine(feats, g.edges); });
    report("edge_cosine", ts, tp,
           ws.size() == wp.size() && std::memcmp(ws.data(), wp.data(), ws.size() * sizeof(double)) == 0);
    return 0;
}
