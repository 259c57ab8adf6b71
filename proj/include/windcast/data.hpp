#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "windcast/csv.hpp"
#include "windcast/errors.hpp"
#include "windcast/linalg.hpp"
#include "windcast/rng.hpp"

namespace windcast {

inline constexpr std::size_t kNumVariables = 8;
inline constexpr std::size_t kTargetColumn = 0;  // ws10

inline const std::array<std::string, kNumVariables>& variable_names() {
    static const std::array<std::string, kNumVariables> names = {
        "ws10", "wdir", "temp", "rh", "press", "dewpt", "ws2", "srad"};
    return names;
}

// Calendar timestamp on a minute grid, naive local time.
struct DateTime {
    std::int64_t minutes = 0;  // since 1970-01-01 00:00

    // days_from_civil / civil_from_days, proleptic Gregorian.
    static std::int64_t days_from_civil(int y, int m, int d) {
        y -= m <= 2;
        const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
        const int yoe = static_cast<int>(y - era * 400);
        const int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
        const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return era * 146097 + doe - 719468;
    }

    static void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
        z += 719468;
        const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
        const int doe = static_cast<int>(z - era * 146097);
        const int yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const int doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const int mp = (5 * doy + 2) / 153;
        d = doy - (153 * mp + 2) / 5 + 1;
        m = mp + (mp < 10 ? 3 : -9);
        y = static_cast<int>(yoe + era * 400) + (m <= 2);
    }

    static DateTime from_civil(int y, int mo, int d, int h, int mi) {
        return DateTime{days_from_civil(y, mo, d) * 1440 + h * 60 + mi};
    }

    // Accepts exactly "YYYY-MM-DD HH:MM".
    static std::optional<DateTime> parse(std::string_view s) {
        if (s.size() != 16 || s[4] != '-' || s[7] != '-' || s[10] != ' ' || s[13] != ':') {
            return std::nullopt;
        }
        auto digits = [&](std::size_t pos, std::size_t len) -> int {
            int v = 0;
            for (std::size_t i = pos; i < pos + len; ++i) {
                if (s[i] < '0' || s[i] > '9') return -1;
                v = v * 10 + (s[i] - '0');
            }
            return v;
        };
        const int y = digits(0, 4), mo = digits(5, 2), d = digits(8, 2);
        const int h = digits(11, 2), mi = digits(14, 2);
        if (y < 0 || mo < 1 || mo > 12 || d < 1 || h < 0 || h > 23 || mi < 0 || mi > 59) {
            return std::nullopt;
        }
        static constexpr int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        const int dim = lengths[mo - 1] + ((mo == 2 && leap) ? 1 : 0);
        if (d > dim) return std::nullopt;
        return from_civil(y, mo, d, h, mi);
    }

    std::string to_string() const {
        int y, mo, d;
        const std::int64_t day = minutes >= 0 ? minutes / 1440 : (minutes - 1439) / 1440;
        civil_from_days(day, y, mo, d);
        const int rem = static_cast<int>(minutes - day * 1440);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d", y, mo, d, rem / 60, rem % 60);
        return buf;
    }

    DateTime plus_minutes(std::int64_t m) const { return DateTime{minutes + m}; }
    auto operator<=>(const DateTime&) const = default;
};

// One observation of the eight meteorological variables; any value may be
// missing. Column order matches variable_names().
struct MeteoRecord {
    DateTime timestamp;
    std::array<std::optional<double>, kNumVariables> values;

    bool complete() const {
        for (const auto& v : values) {
            if (!v) return false;
        }
        return true;
    }
};

struct RecordSeries {
    std::vector<MeteoRecord> records;
    std::int64_t sample_interval_minutes = 5;

    std::size_t size() const { return records.size(); }
};

namespace detail {
// Range constraints enforced at ingestion so the documented invariants hold
// for every record this library hands out.
inline void check_range(std::size_t row, std::size_t col, double v) {
    const std::string& name = variable_names()[col];
    if (name == "rh" && (v < 0.0 || v > 100.0)) {
        throw CsvParseError(row, name, "relative humidity outside [0,100]");
    }
    if (name == "wdir" && (v < 0.0 || v >= 360.0)) {
        throw CsvParseError(row, name, "wind direction outside [0,360)");
    }
    if ((name == "ws10" || name == "ws2" || name == "srad") && v < 0.0) {
        throw CsvParseError(row, name, "negative value");
    }
}
}  // namespace detail

// Reads the documented station CSV schema. Empty cells become missing
// values; the header must match exactly.
inline RecordSeries parse_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty input: missing header");
    const auto header = split_csv_line(line);
    std::vector<std::string> expected = {"timestamp"};
    for (const auto& n : variable_names()) expected.push_back(n);
    for (const auto& name : expected) {
        bool found = false;
        for (const auto& h : header) {
            if (h == name) {
                found = true;
                break;
            }
        }
        if (!found) throw SchemaError("header missing column '" + name + "'");
    }
    if (header.size() != expected.size()) {
        throw SchemaError("header has " + std::to_string(header.size()) + " columns, expected " +
                          std::to_string(expected.size()));
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (header[i] != expected[i]) {
            throw SchemaError("header column " + std::to_string(i + 1) + " is '" + header[i] +
                              "', expected '" + expected[i] + "'");
        }
    }

    RecordSeries series;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != expected.size()) {
            throw CsvParseError(row, "(line)",
                                "expected " + std::to_string(expected.size()) + " fields, got " +
                                    std::to_string(fields.size()));
        }
        MeteoRecord rec;
        const auto ts = DateTime::parse(fields[0]);
        if (!ts) throw CsvParseError(row, "timestamp", "invalid timestamp '" + fields[0] + "'");
        rec.timestamp = *ts;
        for (std::size_t c = 0; c < kNumVariables; ++c) {
            const std::string& cell = fields[c + 1];
            if (cell.empty()) continue;
            const auto v = parse_double(cell);
            if (!v || !std::isfinite(*v)) {
                throw CsvParseError(row, variable_names()[c], "not a number: '" + cell + "'");
            }
            detail::check_range(row, c, *v);
            rec.values[c] = *v;
        }
        if (!series.records.empty() && rec.timestamp <= series.records.back().timestamp) {
            throw OrderingError("timestamps not strictly increasing at data row " +
                                std::to_string(row));
        }
        series.records.push_back(std::move(rec));
    }
    return series;
}

inline void write_csv(const RecordSeries& series, std::ostream& out) {
    out << "timestamp";
    for (const auto& n : variable_names()) out << ',' << n;
    out << '\n';
    for (const auto& rec : series.records) {
        out << rec.timestamp.to_string();
        for (const auto& v : rec.values) {
            out << ',';
            if (v) out << format_double(*v);
        }
        out << '\n';
    }
}

// Deletes every record with at least one missing variable.
inline RecordSeries drop_missing(const RecordSeries& series) {
    RecordSeries out;
    out.sample_interval_minutes = series.sample_interval_minutes;
    for (const auto& rec : series.records) {
        if (rec.complete()) out.records.push_back(rec);
    }
    if (out.records.empty()) {
        throw EmptyDatasetError("all records contain missing values");
    }
    return out;
}

// Requires a cleaned series (see drop_missing).
inline Matrix to_matrix(const RecordSeries& series) {
    Matrix m(series.size(), kNumVariables);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& rec = series.records[i];
        for (std::size_t c = 0; c < kNumVariables; ++c) {
            if (!rec.values[c]) {
                throw DomainError("record " + std::to_string(i + 1) +
                                  " has missing values; apply drop_missing first");
            }
            m(i, c) = *rec.values[c];
        }
    }
    return m;
}

inline std::vector<std::int64_t> timestamps_minutes(const RecordSeries& series) {
    std::vector<std::int64_t> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = series.records[i].timestamp.minutes;
    return out;
}

// Per-column min/max over the fitted matrix. A column with max == min is
// flagged degenerate and maps to 0.
struct Scaler {
    Vector v_min;
    Vector v_max;
    std::vector<std::uint8_t> degenerate;

    std::size_t cols() const { return v_min.size(); }
    bool is_degenerate(std::size_t j) const { return degenerate[j] != 0; }
};

struct ScaledMatrix {
    Matrix values;
    std::vector<std::string> column_names;
    Scaler scaler;
};

inline Scaler fit_scaler(const Matrix& m) {
    if (m.rows() == 0) throw EmptyDatasetError("fit_scaler: no rows");
    Scaler s;
    s.v_min.assign(m.cols(), 0.0);
    s.v_max.assign(m.cols(), 0.0);
    s.degenerate.assign(m.cols(), 0);
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double lo = m(0, j), hi = m(0, j);
        for (std::size_t i = 1; i < m.rows(); ++i) {
            lo = std::min(lo, m(i, j));
            hi = std::max(hi, m(i, j));
        }
        s.v_min[j] = lo;
        s.v_max[j] = hi;
        s.degenerate[j] = (lo == hi) ? 1 : 0;
    }
    return s;
}

inline ScaledMatrix transform(const Matrix& m, const Scaler& scaler) {
    if (m.cols() != scaler.cols()) {
        throw ShapeError("transform: matrix has " + std::to_string(m.cols()) +
                         " columns, scaler has " + std::to_string(scaler.cols()));
    }
    ScaledMatrix out;
    out.values = Matrix(m.rows(), m.cols());
    out.scaler = scaler;
    if (m.cols() == kNumVariables) {
        out.column_names.assign(variable_names().begin(), variable_names().end());
    }
    for (std::size_t j = 0; j < m.cols(); ++j) {
        if (scaler.is_degenerate(j)) continue;  // column stays all zero
        const double lo = scaler.v_min[j];
        const double range = scaler.v_max[j] - lo;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            out.values(i, j) = (m(i, j) - lo) / range;
        }
    }
    return out;
}

inline Matrix inverse_transform(const Matrix& scaled, const Scaler& scaler) {
    if (scaled.cols() != scaler.cols()) {
        throw ShapeError("inverse_transform: column count mismatch");
    }
    Matrix out(scaled.rows(), scaled.cols());
    for (std::size_t j = 0; j < scaled.cols(); ++j) {
        const double lo = scaler.v_min[j];
        const double range = scaler.v_max[j] - lo;
        for (std::size_t i = 0; i < scaled.rows(); ++i) {
            out(i, j) = scaler.is_degenerate(j) ? lo : scaled(i, j) * range + lo;
        }
    }
    return out;
}

inline double inverse_transform_value(double v, const Scaler& scaler, std::size_t column) {
    if (column >= scaler.cols()) throw ShapeError("inverse_transform_value: column out of range");
    if (scaler.is_degenerate(column)) return scaler.v_min[column];
    return v * (scaler.v_max[column] - scaler.v_min[column]) + scaler.v_min[column];
}

// Supervised samples: lookback windows paired with the scaled target value
// horizon steps past the window end.
struct WindowSet {
    std::vector<Matrix> inputs;
    Vector targets;
    std::size_t lookback = 0;
    std::size_t horizon = 1;
    std::size_t target_column = kTargetColumn;

    std::size_t size() const { return inputs.size(); }
};

inline WindowSet make_windows(const ScaledMatrix& scaled, std::size_t lookback,
                              std::size_t horizon = 1,
                              std::size_t target_column = kTargetColumn) {
    if (lookback < 1 || horizon < 1) throw DomainError("make_windows: lookback and horizon >= 1");
    if (target_column >= scaled.values.cols()) {
        throw ShapeError("make_windows: target column out of range");
    }
    const std::size_t t = scaled.values.rows();
    if (t < lookback + horizon) {
        throw InsufficientDataError("make_windows: need at least " +
                                    std::to_string(lookback + horizon) + " rows, have " +
                                    std::to_string(t));
    }
    WindowSet ws;
    ws.lookback = lookback;
    ws.horizon = horizon;
    ws.target_column = target_column;
    const std::size_t n = t - lookback - horizon + 1;
    const std::size_t d = scaled.values.cols();
    ws.inputs.reserve(n);
    ws.targets.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Matrix window(lookback, d);
        for (std::size_t r = 0; r < lookback; ++r) {
            const double* src = scaled.values.row(i + r);
            std::copy(src, src + d, window.row(r));
        }
        ws.inputs.push_back(std::move(window));
        ws.targets.push_back(scaled.values(i + lookback + horizon - 1, target_column));
    }
    return ws;
}

// Strict variant: a window is kept only when every step it spans (input rows
// through the target row) sits exactly one sample interval apart.
inline WindowSet make_windows_strict(const ScaledMatrix& scaled,
                                     const std::vector<std::int64_t>& timestamps,
                                     std::int64_t interval_minutes, std::size_t lookback,
                                     std::size_t horizon = 1,
                                     std::size_t target_column = kTargetColumn) {
    if (timestamps.size() != scaled.values.rows()) {
        throw ShapeError("make_windows_strict: timestamp count mismatch");
    }
    WindowSet all = make_windows(scaled, lookback, horizon, target_column);
    WindowSet ws;
    ws.lookback = lookback;
    ws.horizon = horizon;
    ws.target_column = target_column;
    for (std::size_t i = 0; i < all.size(); ++i) {
        bool contiguous = true;
        for (std::size_t k = i; k + 1 <= i + lookback + horizon - 1; ++k) {
            if (timestamps[k + 1] - timestamps[k] != interval_minutes) {
                contiguous = false;
                break;
            }
        }
        if (contiguous) {
            ws.inputs.push_back(std::move(all.inputs[i]));
            ws.targets.push_back(all.targets[i]);
        }
    }
    if (ws.inputs.empty()) {
        throw InsufficientDataError("make_windows_strict: no gap-free window");
    }
    return ws;
}

enum class SplitMode { Random, Chronological };

inline SplitMode parse_split_mode(std::string_view s) {
    if (s == "random") return SplitMode::Random;
    if (s == "chrono" || s == "chronological") return SplitMode::Chronological;
    throw DomainError("unknown split mode '" + std::string(s) + "'");
}

// Partitions windows into train/test. Random mode permutes with a
// seed-deterministic shuffle; both partitions preserve the drawn order.
inline std::pair<WindowSet, WindowSet> split(const WindowSet& windows, double train_fraction,
                                             SplitMode mode, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw DomainError("split: train_fraction must be in (0,1)");
    }
    const std::size_t n = windows.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (mode == SplitMode::Random) {
        Rng rng(mix64(seed, 0x53504c4954ULL));  // "SPLIT"
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.below(i));
            std::swap(order[i - 1], order[j]);
        }
    }
    const std::size_t k = static_cast<std::size_t>(static_cast<double>(n) * train_fraction);
    if (k == 0 || k == n) throw SplitError("split leaves an empty partition");

    auto take = [&](std::size_t begin, std::size_t end) {
        WindowSet out;
        out.lookback = windows.lookback;
        out.horizon = windows.horizon;
        out.target_column = windows.target_column;
        out.inputs.reserve(end - begin);
        out.targets.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            out.inputs.push_back(windows.inputs[order[i]]);
            out.targets.push_back(windows.targets[order[i]]);
        }
        return out;
    };
    return {take(0, k), take(k, n)};
}

// Generator constants for the synthetic desk-scale weather series. The wind
// recurrence is ws_t = clamp(ar*ws + diurnal*sin(2*pi*t/288)
//   + logistic*ws*(1 - ws/saturation) + noise, 0, inf).
struct SynthParams {
    double ar = 0.35;
    double diurnal = 0.55;
    double logistic = 1.10;
    double saturation = 7.0;
    double ws_noise = 0.18;
    double ws_init = 3.0;
    double ws2_ratio = 0.6;
    double ws2_noise = 0.12;
    double srad_peak = 900.0;
    double srad_noise = 15.0;
    double temp_base = 10.0;
    double temp_amp = 9.0;
    std::int64_t temp_lag_steps = 24;
    double temp_noise = 0.5;
    double rh_base = 70.0;
    double rh_slope = 2.5;
    double rh_noise = 4.0;
    double press_init = 1013.0;
    double press_step = 0.04;
    double dew_offset = 2.0;
    double dew_noise = 1.0;
    double wdir_step = 7.0;
};

inline RecordSeries synth_generate(std::size_t n_steps, std::uint64_t seed,
                                   const SynthParams& p = {}) {
    if (n_steps < 1) throw DomainError("synth_generate: n_steps must be >= 1");
    Rng rng(mix64(seed, 0x53594e5448ULL));  // "SYNTH"
    RecordSeries series;
    series.records.reserve(n_steps);
    const DateTime start = DateTime::from_civil(2020, 1, 1, 0, 0);
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    constexpr int kStepsPerDay = 288;  // 5-minute grid

    auto half_sine = [&](std::int64_t step) {
        const std::int64_t phase = ((step % kStepsPerDay) + kStepsPerDay) % kStepsPerDay;
        if (phase >= kStepsPerDay / 2) return 0.0;  // night
        return std::sin(kTwoPi * static_cast<double>(phase) / kStepsPerDay);
    };

    double ws = p.ws_init;
    double press = p.press_init;
    double wdir = 180.0;
    for (std::size_t t = 0; t < n_steps; ++t) {
        const auto step = static_cast<std::int64_t>(t);
        // One draw per variable per step, in fixed order.
        const double eps = rng.gaussian(0.0, p.ws_noise);
        const double ws2_eps = rng.gaussian(0.0, p.ws2_noise);
        const double srad_eps = rng.gaussian(0.0, p.srad_noise);
        const double temp_eps = rng.gaussian(0.0, p.temp_noise);
        const double rh_eps = rng.gaussian(0.0, p.rh_noise);
        const double press_eps = rng.gaussian(0.0, p.press_step);
        const double dew_eps = std::abs(rng.gaussian(0.0, p.dew_noise));
        const double wdir_eps = rng.gaussian(0.0, p.wdir_step);

        if (t > 0) {
            ws = p.ar * ws + p.diurnal * std::sin(kTwoPi * static_cast<double>(t) / kStepsPerDay) +
                 p.logistic * ws * (1.0 - ws / p.saturation) + eps;
            ws = std::max(ws, 0.0);
        }
        const double ws2 = std::max(p.ws2_ratio * ws + ws2_eps, 0.0);
        const double srad = std::max(p.srad_peak * half_sine(step) + srad_eps, 0.0);
        const double temp =
            p.temp_base + p.temp_amp * half_sine(step - p.temp_lag_steps) + temp_eps;
        const double rh =
            std::clamp(p.rh_base - p.rh_slope * (temp - p.temp_base) + rh_eps, 0.0, 100.0);
        press = std::clamp(press + press_eps, 980.0, 1045.0);
        const double dewpt = temp - p.dew_offset - dew_eps;
        wdir = wdir + wdir_eps;
        wdir -= std::floor(wdir / 360.0) * 360.0;

        MeteoRecord rec;
        rec.timestamp = start.plus_minutes(step * series.sample_interval_minutes);
        rec.values = {ws, wdir, temp, rh, press, dewpt, ws2, srad};
        series.records.push_back(rec);
    }
    return series;
}

}  // namespace windcast
