#pragma once

#include <cmath>
#include <vector>

#include "egopack/common.hpp"

namespace egopack {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 tensors.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    double* row_ptr(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row_ptr(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    bool finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// C = A * B
void matmul(const Tensor& a, const Tensor& b, Tensor& out);
// C = A^T * B
void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out);
// C = A * B^T
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out);

// out += s * a   (shapes must agree)
void axpy(double s, const Tensor& a, Tensor& out);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace egopack
