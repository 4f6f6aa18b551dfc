#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "flowgnn/tensor.hpp"

namespace flowgnn {

// sparse matrix in CSR form; used for the normalized adjacency
struct csr_matrix {
    size_t n = 0;
    std::vector<size_t> row_ptr;  // n + 1
    std::vector<uint32_t> col;
    std::vector<double> val;
};

void set_threads(int n);
int max_threads();

namespace detail {
// dot/norm form shared by the public similarity op and the edge-weight kernels;
// zero norms (< 1e-12) map to 0, result clamped to [-1, 1]
double cosine_raw(const double* u, const double* v, size_t n);
}  // namespace detail

// OpenMP kernels. Every parallel loop writes disjoint output elements with a
// fixed serial inner order, so results are bitwise identical to the serial
// reference regardless of thread count.
namespace kernels {

tensor2 matmul(const tensor2& a, const tensor2& b);     // a(m,k) * b(k,n)
tensor2 matmul_tn(const tensor2& a, const tensor2& b);  // a^T(k,m) * b(k,n)
tensor2 matmul_nt(const tensor2& a, const tensor2& b);  // a(m,k) * b^T(n,k)
tensor2 spmm(const csr_matrix& s, const tensor2& x);    // s(n,n) * x(n,d)

void add_row_inplace(tensor2& x, const std::vector<double>& bias);
void relu_inplace(tensor2& x);

// per-edge cosine similarity over rows of `feats`
std::vector<double> edge_cosine(const tensor2& feats,
                                const std::vector<std::pair<uint32_t, uint32_t>>& edges);

}  // namespace kernels

// serial reference implementations with identical contracts; kept for the
// equivalence tests and the kernel benchmark
namespace serial {

tensor2 matmul(const tensor2& a, const tensor2& b);
tensor2 matmul_tn(const tensor2& a, const tensor2& b);
tensor2 matmul_nt(const tensor2& a, const tensor2& b);
tensor2 spmm(const csr_matrix& s, const tensor2& x);
std::vector<double> edge_cosine(const tensor2& feats,
                                const std::vector<std::pair<uint32_t, uint32_t>>& edges);

}  // namespace serial

}  // namespace flowgnn
