#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "windcast/csv.hpp"
#include "windcast/data.hpp"
#include "windcast/errors.hpp"

namespace windcast {

// Product-moment correlation coefficient, clamped to [-1,1] against
// floating-point rounding.
inline double pearson_r(const Vector& x, const Vector& y) {
    if (x.size() != y.size()) throw ShapeError("pearson_r: length mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw DomainError("pearson_r: need at least 3 samples");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw UndefinedCorrelationError("pearson_r: constant input series");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace detail {

// Continued fraction for the incomplete beta function, modified Lentz.
inline double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) return h;
    }
    throw NumericError("reg_inc_beta: continued fraction did not converge");
}

}  // namespace detail

// Regularized incomplete beta I_x(a,b), continued-fraction evaluation with
// the symmetry switch at x > (a+1)/(a+b+2).
inline double reg_inc_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("reg_inc_beta: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("reg_inc_beta: x must lie in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::beta_cf(a, b, x) / a;
    }
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// Two-sided p-value for a product-moment coefficient under the null of no
// correlation: Student-t with n-2 degrees of freedom.
inline double p_value_two_sided(double r, std::size_t n) {
    if (n < 3) throw DomainError("p_value_two_sided: need n >= 3");
    if (std::abs(r) >= 1.0) return 0.0;
    const double df = static_cast<double>(n - 2);
    const double t2 = r * r * df / (1.0 - r * r);
    return reg_inc_beta(df / 2.0, 0.5, df / (df + t2));
}

struct CorrelationRow {
    std::string variable;
    double r = 0.0;
    double p_value = 1.0;
    bool significant = false;
};

// One row per non-target variable, correlated against ws10.
inline std::vector<CorrelationRow> correlation_report(const RecordSeries& series,
                                                      double threshold = 0.02) {
    if (series.size() < 3) throw DomainError("correlation_report: need at least 3 records");
    for (const auto& rec : series.records) {
        if (!rec.complete()) {
            throw DomainError("correlation_report: series has missing values; clean it first");
        }
    }
    Vector target(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        target[i] = *series.records[i].values[kTargetColumn];
    }
    std::vector<CorrelationRow> rows;
    for (std::size_t c = 0; c < kNumVariables; ++c) {
        if (c == kTargetColumn) continue;
        Vector x(series.size());
        for (std::size_t i = 0; i < series.size(); ++i) x[i] = *series.records[i].values[c];
        CorrelationRow row;
        row.variable = variable_names()[c];
        row.r = pearson_r(x, target);
        row.p_value = p_value_two_sided(row.r, series.size());
        row.significant = row.p_value < threshold;
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_correlation_csv(const std::vector<CorrelationRow>& rows, std::ostream& out) {
    out << "variable,r,p_value,significant\n";
    for (const auto& row : rows) {
        out << row.variable << ',' << format_double(row.r) << ',' << format_double(row.p_value)
            << ',' << (row.significant ? "true" : "false") << '\n';
    }
}

// MSE/RMSE/MAE/R-squared bundle. r2 is empty when the true series is
// constant (the mean-baseline denominator vanishes); the other metrics are
// still reported.
struct MetricsReport {
    double mse = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    std::optional<double> r2;
    std::size_t n = 0;
};

inline MetricsReport metrics(const Vector& y_true, const Vector& y_pred) {
    if (y_true.size() != y_pred.size()) throw ShapeError("metrics: length mismatch");
    if (y_true.empty()) throw EmptyDatasetError("metrics: empty input");
    const std::size_t n = y_true.size();
    double se = 0.0, ae = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y_true[i] - y_pred[i];
        se += e * e;
        ae += std::abs(e);
        mean += y_true[i];
    }
    mean /= static_cast<double>(n);
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = y_true[i] - mean;
        ss_tot += d * d;
    }
    MetricsReport rep;
    rep.n = n;
    rep.mse = se / static_cast<double>(n);
    rep.rmse = std::sqrt(rep.mse);
    rep.mae = ae / static_cast<double>(n);
    if (ss_tot > 0.0) rep.r2 = 1.0 - se / ss_tot;
    return rep;
}

inline std::string metrics_csv_row(const std::string& model, const MetricsReport& rep) {
    return model + ',' + format_double(rep.mse) + ',' + format_double(rep.rmse) + ',' +
           format_double(rep.mae) + ',' + (rep.r2 ? format_double(*rep.r2) : std::string("nan"));
}

}  // namespace windcast
