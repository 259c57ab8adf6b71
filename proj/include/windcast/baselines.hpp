#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "windcast/csv.hpp"
#include "windcast/data.hpp"
#include "windcast/errors.hpp"
#include "windcast/linalg.hpp"

namespace windcast {

enum class LinearKind { Ols, Ridge, Lasso };

inline std::string to_string(LinearKind k) {
    switch (k) {
        case LinearKind::Ols: return "ols";
        case LinearKind::Ridge: return "ridge";
        default: return "lasso";
    }
}

// Linear predictor over flattened lookback windows.
struct LinearModel {
    Vector weights;
    double intercept = 0.0;
    LinearKind kind = LinearKind::Ols;
    double lambda = 0.0;
};

// Coordinate descent ran out of sweeps; carries the last iterate so callers
// can inspect how far it got.
struct ConvergenceError : Error {
    ConvergenceError(std::string msg, LinearModel last)
        : Error(std::move(msg)), last_iterate(std::move(last)) {}
    LinearModel last_iterate;
};

// Row i is the row-major flattening of window i.
inline std::pair<Matrix, Vector> flatten(const WindowSet& windows) {
    if (windows.size() == 0) throw EmptyDatasetError("flatten: empty window set");
    const std::size_t n = windows.size();
    const std::size_t p = windows.lookback * windows.inputs[0].cols();
    Matrix x(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = windows.inputs[i].flat();
        std::copy(src.begin(), src.end(), x.row(i));
    }
    return {std::move(x), windows.targets};
}

namespace detail {

struct Centered {
    Matrix xc;      // centered copy (or plain copy when fit_intercept is off)
    Vector yc;
    Vector x_mean;  // zero when not centering
    double y_mean = 0.0;
};

inline Centered center_data(const Matrix& x, const Vector& y, bool fit_intercept) {
    if (x.rows() != y.size()) throw ShapeError("fit: row count mismatch");
    if (x.rows() == 0) throw EmptyDatasetError("fit: no rows");
    Centered c;
    c.xc = x;
    c.yc = y;
    c.x_mean.assign(x.cols(), 0.0);
    if (!fit_intercept) return c;
    const double n = static_cast<double>(x.rows());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) m += x(i, j);
        m /= n;
        c.x_mean[j] = m;
        for (std::size_t i = 0; i < x.rows(); ++i) c.xc(i, j) -= m;
    }
    for (const double v : y) c.y_mean += v;
    c.y_mean /= n;
    for (double& v : c.yc) v -= c.y_mean;
    return c;
}

inline Matrix gram(const Matrix& x, double ridge_lambda) {
    const std::size_t p = x.cols();
    Matrix g(p, p);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* row = x.row(i);
        for (std::size_t a = 0; a < p; ++a) {
            const double ra = row[a];
            if (ra == 0.0) continue;
            double* grow = g.row(a);
            for (std::size_t b = a; b < p; ++b) grow[b] += ra * row[b];
        }
    }
    for (std::size_t a = 0; a < p; ++a) {
        g(a, a) += ridge_lambda;
        for (std::size_t b = a + 1; b < p; ++b) g(b, a) = g(a, b);
    }
    return g;
}

inline LinearModel solve_normal_equations(const Matrix& x, const Vector& y, double ridge_lambda,
                                          bool fit_intercept, LinearKind kind) {
    const Centered c = center_data(x, y, fit_intercept);
    Matrix g = gram(c.xc, ridge_lambda);
    Vector rhs(x.cols(), 0.0);
    matvec_transpose_add(c.xc, c.yc.data(), rhs.data());
    if (!cholesky_factor(g)) {
        throw SingularMatrixError(
            "normal equations are singular (rank-deficient features); consider ridge regression");
    }
    LinearModel model;
    model.kind = kind;
    model.lambda = ridge_lambda;
    model.weights = cholesky_solve(g, rhs);
    model.intercept = fit_intercept ? c.y_mean - dot(c.x_mean, model.weights) : 0.0;
    return model;
}

}  // namespace detail

// Ordinary least squares via the normal equations with a Cholesky solve;
// the intercept is fitted by centering.
inline LinearModel ols_fit(const Matrix& x, const Vector& y, bool fit_intercept = true) {
    return detail::solve_normal_equations(x, y, 0.0, fit_intercept, LinearKind::Ols);
}

inline LinearModel ridge_fit(const Matrix& x, const Vector& y, double lambda,
                             bool fit_intercept = true) {
    if (lambda < 0.0) throw DomainError("ridge_fit: lambda must be >= 0");
    return detail::solve_normal_equations(x, y, lambda, fit_intercept, LinearKind::Ridge);
}

// L1-penalized least squares, objective (1/2n)|y - Xw - b|^2 + lambda*|w|_1,
// solved by cyclic coordinate descent with soft thresholding on internally
// standardized columns. Reported weights are on the original scale.
inline LinearModel lasso_fit(const Matrix& x, const Vector& y, double lambda, double tol = 1e-8,
                             std::size_t max_iter = 10000, bool fit_intercept = true) {
    if (lambda < 0.0) throw DomainError("lasso_fit: lambda must be >= 0");
    const detail::Centered c = detail::center_data(x, y, fit_intercept);
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    const double dn = static_cast<double>(n);

    // Column-major standardized copy; zero-variance columns stay inactive.
    std::vector<Vector> cols(p);
    Vector scale(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        cols[j].resize(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cols[j][i] = c.xc(i, j);
            ss += cols[j][i] * cols[j][i];
        }
        scale[j] = std::sqrt(ss / dn);
        if (scale[j] > 0.0) {
            for (double& v : cols[j]) v /= scale[j];
        }
    }

    Vector w(p, 0.0);
    Vector residual = c.yc;
    auto objective = [&]() {
        double l1 = 0.0;
        for (const double v : w) l1 += std::abs(v);
        return dot(residual.data(), residual.data(), n) / (2.0 * dn) + lambda * l1;
    };
    auto finish = [&](Vector w_std) {
        LinearModel model;
        model.kind = LinearKind::Lasso;
        model.lambda = lambda;
        model.weights.assign(p, 0.0);
        for (std::size_t j = 0; j < p; ++j) {
            if (scale[j] > 0.0) model.weights[j] = w_std[j] / scale[j];
        }
        model.intercept = fit_intercept ? c.y_mean - dot(c.x_mean, model.weights) : 0.0;
        return model;
    };

    double prev_obj = objective();
    for (std::size_t sweep = 0; sweep < max_iter; ++sweep) {
        double max_delta = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (scale[j] == 0.0) continue;
            const double rho = dot(cols[j].data(), residual.data(), n) / dn + w[j];
            double wj = 0.0;
            if (rho > lambda) {
                wj = rho - lambda;
            } else if (rho < -lambda) {
                wj = rho + lambda;
            }
            const double delta = wj - w[j];
            if (delta != 0.0) {
                for (std::size_t i = 0; i < n; ++i) residual[i] -= delta * cols[j][i];
                w[j] = wj;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        const double obj = objective();
        if (obj > prev_obj + 1e-12 * (1.0 + std::abs(prev_obj))) {
            throw NumericError("lasso_fit: objective increased during a sweep");
        }
        prev_obj = obj;
        if (max_delta < tol) return finish(std::move(w));
    }
    throw ConvergenceError("lasso_fit: no convergence after " + std::to_string(max_iter) +
                               " sweeps",
                           finish(std::move(w)));
}

inline Vector linear_predict(const LinearModel& model, const Matrix& x) {
    if (x.cols() != model.weights.size()) {
        throw ShapeError("linear_predict: feature count mismatch");
    }
    Vector out(x.rows(), model.intercept);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        out[i] += dot(x.row(i), model.weights.data(), x.cols());
    }
    return out;
}

// Forecast = last observed target-column value inside each window.
inline Vector persistence_predict(const WindowSet& windows) {
    if (windows.size() == 0) throw EmptyDatasetError("persistence_predict: empty window set");
    Vector out(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        out[i] = windows.inputs[i](windows.lookback - 1, windows.target_column);
    }
    return out;
}

inline void write_linear_model_csv(const LinearModel& model, std::ostream& out) {
    out << "kind,lambda,intercept";
    for (std::size_t j = 0; j < model.weights.size(); ++j) out << ",w_" << j;
    out << '\n';
    out << to_string(model.kind) << ',' << format_double(model.lambda) << ','
        << format_double(model.intercept);
    for (const double w : model.weights) out << ',' << format_double(w);
    out << '\n';
}

}  // namespace windcast
