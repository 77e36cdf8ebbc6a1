// Minimal dense row-major matrix used for layer weights and Jacobians.

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace qtl {

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data; // row-major, rows*cols entries

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

/// y = M x
inline std::vector<double> matvec(const Matrix& m, std::span<const double> x) {
    if (static_cast<int>(x.size()) != m.cols)
        throw std::invalid_argument("matvec: vector length does not match matrix columns");
    std::vector<double> y(m.rows, 0.0);
    for (int r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        const double* row = m.data.data() + static_cast<std::size_t>(r) * m.cols;
        for (int c = 0; c < m.cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
    return y;
}

/// x = M^T y
inline std::vector<double> matvec_transposed(const Matrix& m, std::span<const double> y) {
    if (static_cast<int>(y.size()) != m.rows)
        throw std::invalid_argument("matvec_transposed: vector length does not match matrix rows");
    std::vector<double> x(m.cols, 0.0);
    for (int r = 0; r < m.rows; ++r) {
        const double* row = m.data.data() + static_cast<std::size_t>(r) * m.cols;
        for (int c = 0; c < m.cols; ++c) x[c] += row[c] * y[r];
    }
    return x;
}

} // namespace qtl
