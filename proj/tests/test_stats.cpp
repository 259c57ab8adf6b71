#include <cmath>

#include "catch_amalgamated.hpp"
#include "windcast/data.hpp"
#include "windcast/rng.hpp"
#include "windcast/stats.hpp"

using namespace windcast;

namespace {

// Spreadsheet-style recomputation used as an independent check.
double naive_pearson(const Vector& x, const Vector& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

// Student-t upper tail by adaptive Simpson integration of the density,
// independent of the incomplete-beta route under test.
double t_density(double x, double df) {
    const double c =
        std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) - 0.5 * std::log(df * M_PI);
    return std::exp(c - (df + 1.0) / 2.0 * std::log1p(x * x / df));
}

double simpson(double a, double b, double df) {
    const double m = 0.5 * (a + b);
    return (b - a) / 6.0 * (t_density(a, df) + 4.0 * t_density(m, df) + t_density(b, df));
}

double adaptive(double a, double b, double whole, double df, int depth) {
    const double m = 0.5 * (a + b);
    const double left = simpson(a, m, df);
    const double right = simpson(m, b, df);
    if (depth <= 0 || std::abs(left + right - whole) < 1e-13) return left + right;
    return adaptive(a, m, left, df, depth - 1) + adaptive(m, b, right, df, depth - 1);
}

double t_two_sided_oracle(double t, double df) {
    const double upper = t + 400.0;  // tail beyond is far below the tolerance
    return 2.0 * adaptive(t, upper, simpson(t, upper, df), df, 40);
}

}  // namespace

TEST_CASE("pearson_r hand cases") {
    CHECK(pearson_r({1, 2, 3}, {2, 4, 6}) == 1.0);
    CHECK(pearson_r({1, 2, 3}, {6, 4, 2}) == -1.0);
    CHECK_THAT(pearson_r({1, 2, 3, 4}, {1, 3, 2, 4}),
               Catch::Matchers::WithinAbs(0.8, 1e-12));
}

TEST_CASE("pearson_r error cases") {
    CHECK_THROWS_AS(pearson_r({1, 2, 3}, {1, 2}), ShapeError);
    CHECK_THROWS_AS(pearson_r({1, 2}, {1, 2}), DomainError);
    CHECK_THROWS_AS(pearson_r({5, 5, 5}, {1, 2, 3}), UndefinedCorrelationError);
}

TEST_CASE("pearson_r symmetry and affine invariance") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        Vector x(30), y(30);
        for (std::size_t i = 0; i < 30; ++i) {
            x[i] = rng.uniform(-5, 5);
            y[i] = rng.uniform(-5, 5);
        }
        const double r = pearson_r(x, y);
        CHECK_THAT(pearson_r(y, x), Catch::Matchers::WithinAbs(r, 1e-12));
        const double a = rng.uniform(0.1, 3.0);
        const double b = rng.uniform(-10, 10);
        Vector xs(30);
        for (std::size_t i = 0; i < 30; ++i) xs[i] = a * x[i] + b;
        CHECK_THAT(pearson_r(xs, y), Catch::Matchers::WithinAbs(r, 1e-12));
        CHECK(pearson_r(x, x) == 1.0);
        Vector nx(30);
        for (std::size_t i = 0; i < 30; ++i) nx[i] = -x[i];
        CHECK(pearson_r(x, nx) == -1.0);
    }
}

TEST_CASE("pearson_r matches an independent recomputation") {
    const auto s = synth_generate(50, 21);
    Vector ws10(50), ws2(50);
    for (std::size_t i = 0; i < 50; ++i) {
        ws10[i] = *s.records[i].values[0];
        ws2[i] = *s.records[i].values[6];
    }
    CHECK_THAT(pearson_r(ws2, ws10),
               Catch::Matchers::WithinAbs(naive_pearson(ws2, ws10), 1e-12));
}

TEST_CASE("reg_inc_beta uniform and symmetric cases") {
    CHECK(reg_inc_beta(1, 1, 0.0) == 0.0);
    CHECK_THAT(reg_inc_beta(1, 1, 0.25), Catch::Matchers::WithinAbs(0.25, 1e-12));
    CHECK(reg_inc_beta(1, 1, 1.0) == 1.0);
    CHECK_THAT(reg_inc_beta(2, 2, 0.5), Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("reg_inc_beta reflection identity on random triples") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const double a = rng.uniform(0.1, 20.0);
        const double b = rng.uniform(0.1, 20.0);
        const double x = rng.uniform(0.0, 1.0);
        CHECK_THAT(reg_inc_beta(a, b, x) + reg_inc_beta(b, a, 1.0 - x),
                   Catch::Matchers::WithinAbs(1.0, 1e-10));
    }
}

TEST_CASE("reg_inc_beta domain errors") {
    CHECK_THROWS_AS(reg_inc_beta(0.0, 1.0, 0.5), DomainError);
    CHECK_THROWS_AS(reg_inc_beta(1.0, -1.0, 0.5), DomainError);
    CHECK_THROWS_AS(reg_inc_beta(1.0, 1.0, 1.5), DomainError);
}

TEST_CASE("p_value_two_sided null and limit behavior") {
    CHECK(p_value_two_sided(0.0, 10) == 1.0);
    CHECK(p_value_two_sided(0.0, 1000) == 1.0);
    CHECK(p_value_two_sided(0.9999999, 10) < 1e-10);
    CHECK(p_value_two_sided(1.0, 10) == 0.0);
    CHECK(p_value_two_sided(-1.0, 10) == 0.0);
    CHECK_THROWS_AS(p_value_two_sided(0.5, 2), DomainError);
}

TEST_CASE("p_value_two_sided matches the t-density integration oracle") {
    // r = 0.5, n = 20 -> t = 2.4495 on 18 degrees of freedom.
    const double p = p_value_two_sided(0.5, 20);
    const double t = 0.5 * std::sqrt(18.0 / (1.0 - 0.25));
    const double oracle = t_two_sided_oracle(t, 18.0);
    CHECK_THAT(p, Catch::Matchers::WithinAbs(oracle, 1e-9));
    CHECK_THAT(p, Catch::Matchers::WithinAbs(0.024769558804109703, 1e-9));  // frozen oracle value
    // further spot checks across df
    for (const auto& [r, n] : std::vector<std::pair<double, std::size_t>>{
             {0.1, 100}, {0.3, 12}, {0.7, 8}, {0.05, 2000}}) {
        const double df = static_cast<double>(n - 2);
        const double tv = r * std::sqrt(df / (1.0 - r * r));
        CHECK_THAT(p_value_two_sided(r, n),
                   Catch::Matchers::WithinAbs(t_two_sided_oracle(tv, df), 1e-8));
    }
}

TEST_CASE("p_value_two_sided is monotone in |r| and in n") {
    double prev = 1.0;
    for (const double r : {0.1, 0.2, 0.3, 0.5, 0.7, 0.9}) {
        const double p = p_value_two_sided(r, 30);
        CHECK(p < prev);
        prev = p;
        CHECK(p_value_two_sided(-r, 30) == p);  // two-sided symmetry
    }
    prev = 1.0;
    for (const std::size_t n : {5u, 10u, 20u, 50u, 200u}) {
        const double p = p_value_two_sided(0.3, n);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("correlation_report flags the coupled ws2 column") {
    const auto s = synth_generate(2000, 1);
    const auto rows = correlation_report(s);
    REQUIRE(rows.size() == 7);
    bool saw_ws2 = false;
    for (const auto& row : rows) {
        CHECK(std::abs(row.r) <= 1.0);
        CHECK((row.p_value >= 0.0 && row.p_value <= 1.0));
        if (row.variable == "ws2") {
            saw_ws2 = true;
            CHECK(row.r > 0.5);
            CHECK(row.significant);
        }
    }
    CHECK(saw_ws2);
}

TEST_CASE("correlation_report leaves independent noise unflagged") {
    // Hand-built series: ws10 random, press pure independent noise.
    Rng rng(99);
    RecordSeries s;
    for (std::size_t i = 0; i < 5000; ++i) {
        MeteoRecord rec;
        rec.timestamp = DateTime::from_civil(2020, 1, 1, 0, 0).plus_minutes(5 * i);
        const double ws = 3.0 + rng.gaussian();
        rec.values = {std::max(ws, 0.0),       180.0 + rng.uniform(-1, 1),
                      10.0 + rng.gaussian(),   50.0 + rng.uniform(-1, 1),
                      1000.0 + rng.gaussian(), 5.0 + rng.uniform(-1, 1),
                      std::max(1.0 + 0.1 * rng.gaussian(), 0.0), rng.uniform(0, 100)};
        s.records.push_back(rec);
    }
    const auto rows = correlation_report(s);
    for (const auto& row : rows) {
        if (row.variable == "press") {
            CHECK(std::abs(row.r) < 0.05);
            CHECK(!row.significant);
        }
    }
    // shuffling oracle: |r| of ws10 against its own shuffle stays in the same
    // sampling-noise band
    Vector ws10(s.size()), shuffled(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) ws10[i] = *s.records[i].values[0];
    shuffled = ws10;
    Rng shuffle_rng(7);
    for (std::size_t i = shuffled.size(); i > 1; --i) {
        std::swap(shuffled[i - 1], shuffled[shuffle_rng.below(i)]);
    }
    CHECK(std::abs(pearson_r(ws10, shuffled)) < 0.05);
}

TEST_CASE("correlation_report requires a cleaned series") {
    auto s = synth_generate(10, 2);
    s.records[4].values[2].reset();
    CHECK_THROWS_AS(correlation_report(s), DomainError);
}

TEST_CASE("correlation csv has one row per covariate") {
    const auto rows = correlation_report(synth_generate(500, 5));
    std::ostringstream out;
    write_correlation_csv(rows, out);
    std::size_t lines = 0;
    for (const char c : out.str()) lines += c == '\n' ? 1 : 0;
    CHECK(lines == 8);  // header + 7 variables
}

TEST_CASE("metrics on perfect predictions") {
    const auto rep = metrics({1, 2, 3}, {1, 2, 3});
    CHECK(rep.mse == 0.0);
    CHECK(rep.rmse == 0.0);
    CHECK(rep.mae == 0.0);
    REQUIRE(rep.r2.has_value());
    CHECK(*rep.r2 == 1.0);
}

TEST_CASE("metrics hand arithmetic") {
    const auto rep = metrics({0, 0}, {1, 1});
    CHECK(rep.mse == 1.0);
    CHECK(rep.rmse == 1.0);
    CHECK(rep.mae == 1.0);
    CHECK(!rep.r2.has_value());  // constant truth: R2 undefined, rest reported
}

TEST_CASE("metrics of the mean predictor has zero R2") {
    const Vector y = {1, 2, 3, 4, 5, 9};
    double mean = 0;
    for (const double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    const auto rep = metrics(y, Vector(y.size(), mean));
    REQUIRE(rep.r2.has_value());
    CHECK_THAT(*rep.r2, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("metrics identities on random vectors") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        Vector y(40), p(40);
        for (std::size_t i = 0; i < 40; ++i) {
            y[i] = rng.uniform(-10, 10);
            p[i] = rng.uniform(-10, 10);
        }
        const auto rep = metrics(y, p);
        CHECK_THAT(rep.rmse * rep.rmse, Catch::Matchers::WithinAbs(rep.mse, 1e-12));
        CHECK(rep.mae <= rep.rmse + 1e-12);
        REQUIRE(rep.r2.has_value());
        CHECK(*rep.r2 <= 1.0);
    }
}

TEST_CASE("metrics rejects mismatched lengths") {
    CHECK_THROWS_AS(metrics({1, 2}, {1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(metrics({}, {}), EmptyDatasetError);
}

TEST_CASE("reported mse/rmse pairs satisfy the square-root relation") {
    // Five reference (MSE, RMSE) pairs; the implemented relation reproduces
    // the RMSE from the MSE within 5e-4.
    const std::vector<std::pair<double, double>> pairs = {{0.22227, 0.47146},
                                                          {0.20887, 0.45703},
                                                          {0.88995, 0.94337},
                                                          {0.01107, 0.10522},
                                                          {0.00297, 0.05448}};
    for (const auto& [mse, rmse] : pairs) {
        const Vector truth(100, 0.0);
        const Vector pred(100, std::sqrt(mse));
        const auto rep = metrics(truth, pred);
        CHECK_THAT(rep.mse, Catch::Matchers::WithinAbs(mse, 1e-12));
        CHECK_THAT(rep.rmse, Catch::Matchers::WithinAbs(rmse, 5e-4));
    }
}
