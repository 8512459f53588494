#include "tensor.hpp"

#include <cmath>
#include <stdexcept>

#include "common.hpp"

namespace gebc {

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
    Tensor t(static_cast<int>(rows_init.size()),
             rows_init.size() ? static_cast<int>(rows_init.begin()->size()) : 0);
    int r = 0;
    for (const auto& row : rows_init) {
        assert(static_cast<int>(row.size()) == t.cols);
        int c = 0;
        for (double v : row) t.at(r, c++) = v;
        ++r;
    }
    return t;
}

Tensor Tensor::identity(int n) {
    Tensor t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void gemm(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b, Tensor& out,
          bool accumulate) {
    const int m = transpose_a ? a.cols : a.rows;
    const int k = transpose_a ? a.rows : a.cols;
    const int kb = transpose_b ? b.cols : b.rows;
    const int n = transpose_b ? b.rows : b.cols;
    if (k != kb) throw std::logic_error("gemm: inner dimensions disagree");
    if (out.rows != m || out.cols != n) out = Tensor(m, n);
    else if (!accumulate) out.fill(0.0);

    // i-k-j loop keeps the innermost walk contiguous for the non-transposed
    // cases, which covers the hot paths.
    for (int i = 0; i < m; ++i) {
        double* out_row = out.row(i);
        for (int kk = 0; kk < k; ++kk) {
            const double av = transpose_a ? a.at(kk, i) : a.at(i, kk);
            if (av == 0.0) continue;
            if (!transpose_b) {
                const double* b_row = b.row(kk);
                for (int j = 0; j < n; ++j) out_row[j] += av * b_row[j];
            } else {
                for (int j = 0; j < n; ++j) out_row[j] += av * b.at(j, kk);
            }
        }
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    Tensor out;
    gemm(a, false, b, false, out, false);
    return out;
}

}  // namespace gebc
