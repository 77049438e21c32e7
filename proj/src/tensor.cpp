#include "egopack/tensor.hpp"

#include <algorithm>
#include <cstdlib>

namespace egopack {

namespace {
void check_mm(int ak, int bk, const char* what) {
    if (ak != bk) throw ShapeError(std::string("matmul inner dim mismatch in ") + what);
}
}  // namespace

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
    check_mm(a.cols, b.rows, "matmul");
    out = Tensor(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
}

void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out) {
    check_mm(a.rows, b.rows, "matmul_tn");
    out = Tensor(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const double* arow = a.row_ptr(k);
        const double* brow = b.row_ptr(k);
        for (int i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* orow = out.row_ptr(i);
            for (int j = 0; j < b.cols; ++j) orow[j] += aki * brow[j];
        }
    }
}

void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out) {
    check_mm(a.cols, b.cols, "matmul_nt");
    out = Tensor(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = b.row_ptr(j);
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            orow[j] = acc;
        }
    }
}

void axpy(double s, const Tensor& a, Tensor& out) {
    if (!a.same_shape(out)) throw ShapeError("axpy shape mismatch");
    for (size_t i = 0; i < a.size(); ++i) out.data[i] += s * a.data[i];
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace egopack
