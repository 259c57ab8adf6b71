#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "windcast/errors.hpp"

namespace windcast {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    std::span<double> flat() { return data_; }
    std::span<const double> flat() const { return data_; }
    Vector& storage() { return data_; }
    const Vector& storage() const { return data_; }

    void fill(double v) { data_.assign(data_.size(), v); }

    bool operator==(const Matrix&) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vector data_;
};

// Dot product, unrolled into four accumulators for instruction-level
// parallelism; summation order is fixed, so results are reproducible.
inline double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

inline double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
    return dot(a.data(), b.data(), a.size());
}

// out += m * x
inline void matvec_add(const Matrix& m, const double* x, double* out) {
    const std::size_t rows = m.rows(), cols = m.cols();
    for (std::size_t i = 0; i < rows; ++i) out[i] += dot(m.row(i), x, cols);
}

// out += m^T * x   (x has m.rows() entries, out has m.cols())
inline void matvec_transpose_add(const Matrix& m, const double* x, double* out) {
    const std::size_t rows = m.rows(), cols = m.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* r = m.row(i);
        for (std::size_t j = 0; j < cols; ++j) out[j] += xi * r[j];
    }
}

// m += a * b^T
inline void outer_add(Matrix& m, const double* a, const double* b) {
    const std::size_t rows = m.rows(), cols = m.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        double* r = m.row(i);
        for (std::size_t j = 0; j < cols; ++j) r[j] += ai * b[j];
    }
}

// In-place lower Cholesky factorization of a symmetric positive-definite
// matrix. Returns false when a pivot falls below the tolerance, which is
// how rank deficiency surfaces from the normal equations.
inline bool cholesky_factor(Matrix& a, double tol = 1e-12) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw ShapeError("cholesky: matrix not square");
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
    const double floor = tol * std::max(1.0, max_diag);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j) - dot(a.row(j), a.row(j), j);
        if (!(d > floor)) return false;
        d = std::sqrt(d);
        a(j, j) = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            a(i, j) = (a(i, j) - dot(a.row(i), a.row(j), j)) / d;
        }
    }
    return true;
}

// Solves L L^T x = b given the factor produced by cholesky_factor.
inline Vector cholesky_solve(const Matrix& l, const Vector& b) {
    const std::size_t n = l.rows();
    if (b.size() != n) throw ShapeError("cholesky_solve: length mismatch");
    Vector x(b);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = (x[i] - dot(l.row(i), x.data(), i)) / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
        x[ii] = s / l(ii, ii);
    }
    return x;
}

inline double norm2(const Vector& v) { return std::sqrt(dot(v.data(), v.data(), v.size())); }

inline bool all_finite(const double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(v[i])) return false;
    }
    return true;
}

}  // namespace windcast
