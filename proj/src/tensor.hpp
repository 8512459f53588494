#pragma once

#include <cassert>
#include <initializer_list>
#include <vector>

namespace gebc {

// Dense row-major matrix of doubles. Everything in the model is 2-D; higher
// rank data (region stacks, batched steps) is kept flattened.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows_init);
    static Tensor identity(int n);

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
    void fill(double v) { std::fill(data.begin(), data.end(), v); }
    bool all_finite() const;
};

// C += (optionally transposed) A * (optionally transposed) B.
// When accumulate is false, C is overwritten.
void gemm(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b, Tensor& out,
          bool accumulate);

Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace gebc
