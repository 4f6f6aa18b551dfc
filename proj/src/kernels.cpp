#include "flowgnn/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flowgnn {

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void check_finite(const tensor2& t, const char* what) {
    for (double v : t.data) {
        if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite value in ") + what);
    }
}

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw std::runtime_error(std::string("non-finite value in ") + what);
    }
}

namespace detail {

double cosine_raw(const double* u, const double* v, size_t n) {
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (size_t k = 0; k < n; ++k) {
        dot += u[k] * v[k];
        nu += u[k] * u[k];
        nv += v[k] * v[k];
    }
    double norm = std::sqrt(nu) * std::sqrt(nv);
    if (norm < 1e-12) return 0.0;
    double z = dot / norm;
    if (z > 1.0) z = 1.0;
    if (z < -1.0) z = -1.0;
    return z;
}

namespace {

void shape_check(bool ok, const char* op) {
    if (!ok) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace
}  // namespace detail

namespace serial {

tensor2 matmul(const tensor2& a, const tensor2& b) {
    detail::shape_check(a.cols == b.rows, "matmul");
    tensor2 c(a.rows, b.cols);
    for (size_t i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (size_t k = 0; k < a.cols; ++k) {
            double av = ar[k];
            if (av == 0.0) continue;
            const double* br = b.row(k);
            for (size_t j = 0; j < b.cols; ++j) cr[j] += av * br[j];
        }
    }
    return c;
}

tensor2 matmul_tn(const tensor2& a, const tensor2& b) {
    detail::shape_check(a.rows == b.rows, "matmul_tn");
    tensor2 c(a.cols, b.cols);
    for (size_t i = 0; i < a.cols; ++i) {
        double* cr = c.row(i);
        for (size_t k = 0; k < a.rows; ++k) {
            double av = a.at(k, i);
            if (av == 0.0) continue;
            const double* br = b.row(k);
            for (size_t j = 0; j < b.cols; ++j) cr[j] += av * br[j];
        }
    }
    return c;
}

tensor2 matmul_nt(const tensor2& a, const tensor2& b) {
    detail::shape_check(a.cols == b.cols, "matmul_nt");
    tensor2 c(a.rows, b.rows);
    for (size_t i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (size_t j = 0; j < b.rows; ++j) {
            const double* br = b.row(j);
            double s = 0.0;
            for (size_t k = 0; k < a.cols; ++k) s += ar[k] * br[k];
            cr[j] = s;
        }
    }
    return c;
}

tensor2 spmm(const csr_matrix& s, const tensor2& x) {
    detail::shape_check(s.n == x.rows, "spmm");
    tensor2 y(s.n, x.cols);
    for (size_t i = 0; i < s.n; ++i) {
        double* yr = y.row(i);
        for (size_t p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p) {
            double w = s.val[p];
            const double* xr = x.row(s.col[p]);
            for (size_t j = 0; j < x.cols; ++j) yr[j] += w * xr[j];
        }
    }
    return y;
}

std::vector<double> edge_cosine(const tensor2& feats,
                                const std::vector<std::pair<uint32_t, uint32_t>>& edges) {
    std::vector<double> w(edges.size());
    for (size_t e = 0; e < edges.size(); ++e) {
        w[e] = detail::cosine_raw(feats.row(edges[e].first), feats.row(edges[e].second), feats.cols);
    }
    return w;
}

}  // namespace serial

namespace kernels {

// parallelism cutoff; below this the serial path is faster than forking a team
constexpr size_t kParallelWork = 1 << 15;

tensor2 matmul(const tensor2& a, const tensor2& b) {
    detail::shape_check(a.cols == b.rows, "matmul");
    tensor2 c(a.rows, b.cols);
    const size_t work = a.rows * a.cols * b.cols;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
    for (long long ii = 0; ii < static_cast<long long>(a.rows); ++ii) {
        size_t i = static_cast<size_t>(ii);
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (size_t k = 0; k < a.cols; ++k) {
            double av = ar[k];
            if (av == 0.0) continue;
            const double* br = b.row(k);
            for (size_t j = 0; j < b.cols; ++j) cr[j] += av * br[j];
        }
    }
    return c;
}

tensor2 matmul_tn(const tensor2& a, const tensor2& b) {
    detail::shape_check(a.rows == b.rows, "matmul_tn");
    tensor2 c(a.cols, b.cols);
    const size_t work = a.rows * a.cols * b.cols;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
    for (long long ii = 0; ii < static_cast<long long>(a.cols); ++ii) {
        size_t i = static_cast<size_t>(ii);
        double* cr = c.row(i);
        for (size_t k = 0; k < a.rows; ++k) {
            double av = a.at(k, i);
            if (av == 0.0) continue;
            const double* br = b.row(k);
            for (size_t j = 0; j < b.cols; ++j) cr[j] += av * br[j];
        }
    }
    return c;
}

tensor2 matmul_nt(const tensor2& a, const tensor2& b) {
    detail::shape_check(a.cols == b.cols, "matmul_nt");
    tensor2 c(a.rows, b.rows);
    const size_t work = a.rows * a.cols * b.rows;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
    for (long long ii = 0; ii < static_cast<long long>(a.rows); ++ii) {
        size_t i = static_cast<size_t>(ii);
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (size_t j = 0; j < b.rows; ++j) {
            const double* br = b.row(j);
            double s = 0.0;
            for (size_t k = 0; k < a.cols; ++k) s += ar[k] * br[k];
            cr[j] = s;
        }
    }
    return c;
}

tensor2 spmm(const csr_matrix& s, const tensor2& x) {
    detail::shape_check(s.n == x.rows, "spmm");
    tensor2 y(s.n, x.cols);
    const size_t work = s.col.size() * x.cols;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
    for (long long ii = 0; ii < static_cast<long long>(s.n); ++ii) {
        size_t i = static_cast<size_t>(ii);
        double* yr = y.row(i);
        for (size_t p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p) {
            double w = s.val[p];
            const double* xr = x.row(s.col[p]);
            for (size_t j = 0; j < x.cols; ++j) yr[j] += w * xr[j];
        }
    }
    return y;
}

void add_row_inplace(tensor2& x, const std::vector<double>& bias) {
    detail::shape_check(x.cols == bias.size(), "add_row_inplace");
#pragma omp parallel for schedule(static) if (x.size() > kParallelWork)
    for (long long ii = 0; ii < static_cast<long long>(x.rows); ++ii) {
        double* xr = x.row(static_cast<size_t>(ii));
        for (size_t j = 0; j < x.cols; ++j) xr[j] += bias[j];
    }
}

void relu_inplace(tensor2& x) {
#pragma omp parallel for schedule(static) if (x.size() > kParallelWork)
    for (long long ii = 0; ii < static_cast<long long>(x.rows); ++ii) {
        double* xr = x.row(static_cast<size_t>(ii));
        for (size_t j = 0; j < x.cols; ++j) {
            if (xr[j] < 0.0) xr[j] = 0.0;
        }
    }
}

std::vector<double> edge_cosine(const tensor2& feats,
                                const std::vector<std::pair<uint32_t, uint32_t>>& edges) {
    std::vector<double> w(edges.size());
    const size_t work = edges.size() * feats.cols;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
    for (long long ee = 0; ee < static_cast<long long>(edges.size()); ++ee) {
        size_t e = static_cast<size_t>(ee);
        w[e] = detail::cosine_raw(feats.row(edges[e].first), feats.row(edges[e].second), feats.cols);
    }
    return w;
}

}  // namespace kernels
}  // namespace flowgnn
