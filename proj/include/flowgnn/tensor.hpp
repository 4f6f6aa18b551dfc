#pragma once

#include <cstddef>
#include <vector>

namespace flowgnn {

// dense row-major matrix of doubles
struct tensor2 {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    tensor2() = default;
    tensor2(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(size_t i, size_t j) { return data[i * cols + j]; }
    double at(size_t i, size_t j) const { return data[i * cols + j]; }
    double* row(size_t i) { return data.data() + i * cols; }
    const double* row(size_t i) const { return data.data() + i * cols; }
    size_t size() const { return data.size(); }
    bool same_shape(const tensor2& o) const { return rows == o.rows && cols == o.cols; }
};

// throws std::runtime_error naming `what` if any entry is NaN/Inf
void check_finite(const tensor2& t, const char* what);
void check_finite(const std::vector<double>& v, const char* what);

}  // namespace flowgnn
