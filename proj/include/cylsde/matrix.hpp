#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cylsde {

/// Dense row-major matrix. Dimensions here are desk scale (tens), so no BLAS.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    Matrix& operator+=(const Matrix& o) {
        if (rows != o.rows || cols != o.cols) throw std::invalid_argument("Matrix +=: shape mismatch");
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
        return *this;
    }

    Matrix scaled(double s) const {
        Matrix m = *this;
        for (auto& v : m.a) v *= s;
        return m;
    }
};

inline Matrix operator+(Matrix lhs, const Matrix& rhs) {
    lhs += rhs;
    return lhs;
}

inline std::vector<double> matvec(const Matrix& m, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != m.cols) throw std::invalid_argument("matvec: dimension mismatch");
    std::vector<double> y(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double acc = 0.0;
        for (int j = 0; j < m.cols; ++j) acc += m(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

} // namespace cylsde
