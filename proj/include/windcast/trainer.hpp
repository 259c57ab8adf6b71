#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "windcast/baselines.hpp"
#include "windcast/data.hpp"
#include "windcast/errors.hpp"
#include "windcast/lstm.hpp"
#include "windcast/stats.hpp"

namespace windcast {

enum class Optimizer { Adam, Sgd };

inline Optimizer parse_optimizer(std::string_view s) {
    if (s == "adam") return Optimizer::Adam;
    if (s == "sgd") return Optimizer::Sgd;
    throw DomainError("unknown optimizer '" + std::string(s) + "'");
}

struct TrainConfig {
    std::size_t batch_size = 40;
    std::size_t epochs = 50;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 1;
    bool shuffle_each_epoch = true;
    std::optional<double> gradient_clip_norm;
    Optimizer optimizer = Optimizer::Adam;

    void validate() const {
        if (batch_size < 1) throw DomainError("train config: batch_size must be >= 1");
        if (epochs < 1) throw DomainError("train config: epochs must be >= 1");
        if (!(learning_rate > 0.0) && learning_rate != 0.0) {
            throw DomainError("train config: learning_rate must be >= 0");
        }
        if (gradient_clip_norm && !(*gradient_clip_norm > 0.0)) {
            throw DomainError("train config: clip norm must be positive");
        }
    }
};

struct LossHistory {
    Vector train_loss;  // one entry per epoch
    Vector test_loss;
};

inline void write_loss_history_csv(const LossHistory& history, std::ostream& out) {
    out << "epoch,train_loss,test_loss\n";
    for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        out << (e + 1) << ',' << format_double(history.train_loss[e]) << ','
            << format_double(history.test_loss[e]) << '\n';
    }
}

// First/second moment accumulators mirroring the model parameters.
struct AdamState {
    GradientSet m;
    GradientSet v;
    std::size_t t = 0;

    static AdamState like(const StackedLstmModel& model) {
        return {GradientSet::zeros_like(model), GradientSet::zeros_like(model), 0};
    }
};

// One bias-corrected Adam update; the step counter advances once per call.
inline void adam_step(StackedLstmModel& model, GradientSet& grads, AdamState& state,
                      const TrainConfig& cfg) {
    auto p_segs = parameter_segments(model);
    auto g_segs = parameter_segments(grads);
    auto m_segs = parameter_segments(state.m);
    auto v_segs = parameter_segments(state.v);
    if (p_segs.size() != g_segs.size()) throw ShapeError("adam_step: gradient shape mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t s = 0; s < p_segs.size(); ++s) {
        auto p = p_segs[s];
        auto g = g_segs[s];
        auto m = m_segs[s];
        auto v = v_segs[s];
        if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
            throw ShapeError("adam_step: segment size mismatch");
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            p[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.epsilon);
        }
    }
}

inline void sgd_step(StackedLstmModel& model, GradientSet& grads, const TrainConfig& cfg) {
    auto p_segs = parameter_segments(model);
    auto g_segs = parameter_segments(grads);
    for (std::size_t s = 0; s < p_segs.size(); ++s) {
        for (std::size_t i = 0; i < p_segs[s].size(); ++i) {
            p_segs[s][i] -= cfg.learning_rate * g_segs[s][i];
        }
    }
}

// Scales all gradients so their global L2 norm does not exceed max_norm.
inline void clip_gradients(GradientSet& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& seg : parameter_segments(grads)) {
        for (const double g : seg) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return;
    const double scale = max_norm / norm;
    for (auto seg : parameter_segments(grads)) {
        for (double& g : seg) g *= scale;
    }
}

inline Vector predict_all(const StackedLstmModel& model, const WindowSet& windows) {
    Vector out(windows.size());
    ForwardCache cache;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        out[i] = network_forward_into(windows.inputs[i], model, RunMode::Eval, 0, cache);
    }
    return out;
}

struct TrainResult {
    StackedLstmModel model;
    LossHistory history;
    AdamState adam;  // final optimizer state; adam.t counts total steps
};

// Mini-batch MSE training. Per epoch: seed-deterministic shuffle, fixed
// batch partition (last batch may be short), gradients averaged over the
// batch in sample order, one optimizer step per batch. The recorded train
// loss is the mean of the per-batch losses; the test loss is the full
// eval-mode MSE after the epoch. Test evaluation never feeds back into
// training.
inline TrainResult train(StackedLstmModel model, const WindowSet& train_set,
                         const WindowSet& test_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.size() == 0 || test_set.size() == 0) {
        throw EmptyDatasetError("train: empty train or test set");
    }
    if (train_set.inputs[0].cols() != model.config.input_dim) {
        throw ShapeError("train: data dimension does not match model input_dim");
    }

    const std::size_t n = train_set.size();
    AdamState state = AdamState::like(model);
    GradientSet grads = GradientSet::zeros_like(model);
    LossHistory history;
    history.train_loss.reserve(cfg.epochs);
    history.test_loss.reserve(cfg.epochs);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    ForwardCache cache;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle_each_epoch) {
            Rng rng(mix64(cfg.seed, 0x53485546ULL, epoch));  // "SHUF"
            for (std::size_t i = n; i > 1; --i) {
                std::swap(order[i - 1], order[rng.below(i)]);
            }
        }
        double loss_sum = 0.0;
        std::size_t batch_count = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t batch_n = std::min(cfg.batch_size, n - start);
            const std::size_t batch_idx = start / cfg.batch_size;
            grads.zero();
            double batch_loss = 0.0;
            try {
                for (std::size_t pos = 0; pos < batch_n; ++pos) {
                    const std::size_t sample = order[start + pos];
                    const std::uint64_t drop_seed = mix64(cfg.seed, epoch, batch_idx, pos);
                    const double pred = network_forward_into(train_set.inputs[sample], model,
                                                             RunMode::Train, drop_seed, cache);
                    const double err = pred - train_set.targets[sample];
                    batch_loss += err * err;
                    network_backward_accum(cache, model, 2.0 * err / static_cast<double>(batch_n),
                                           grads);
                }
            } catch (const NumericError& e) {
                throw DivergenceError(epoch, batch_idx, e.what());
            }
            batch_loss /= static_cast<double>(batch_n);
            if (!std::isfinite(batch_loss)) throw DivergenceError(epoch, batch_idx);
            loss_sum += batch_loss;
            ++batch_count;
            if (cfg.gradient_clip_norm) clip_gradients(grads, *cfg.gradient_clip_norm);
            if (cfg.optimizer == Optimizer::Adam) {
                adam_step(model, grads, state, cfg);
            } else {
                sgd_step(model, grads, cfg);
                state.t += 1;
            }
        }
        history.train_loss.push_back(loss_sum / static_cast<double>(batch_count));
        const Vector test_pred = predict_all(model, test_set);
        history.test_loss.push_back(metrics(test_set.targets, test_pred).mse);
    }
    return {std::move(model), std::move(history), std::move(state)};
}

struct EvalResult {
    MetricsReport normalized;
    MetricsReport physical;  // target column mapped back to m/s
    Vector y_true_norm, y_pred_norm;
    Vector y_true, y_pred;
};

// Eval-mode predictions scored both on the normalized scale and after
// inverse-transforming the target column. Nothing is clamped here.
inline EvalResult evaluate(const StackedLstmModel& model, const WindowSet& windows,
                           const Scaler& scaler) {
    if (windows.size() == 0) throw EmptyDatasetError("evaluate: empty window set");
    EvalResult res;
    res.y_pred_norm = predict_all(model, windows);
    res.y_true_norm = windows.targets;
    res.normalized = metrics(res.y_true_norm, res.y_pred_norm);
    res.y_true.resize(windows.size());
    res.y_pred.resize(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        res.y_true[i] = inverse_transform_value(res.y_true_norm[i], scaler, windows.target_column);
        res.y_pred[i] = inverse_transform_value(res.y_pred_norm[i], scaler, windows.target_column);
    }
    res.physical = metrics(res.y_true, res.y_pred);
    return res;
}

inline EvalResult evaluate_predictions(const Vector& y_true_norm, const Vector& y_pred_norm,
                                       const Scaler& scaler, std::size_t target_column) {
    EvalResult res;
    res.y_true_norm = y_true_norm;
    res.y_pred_norm = y_pred_norm;
    res.normalized = metrics(y_true_norm, y_pred_norm);
    res.y_true.resize(y_true_norm.size());
    res.y_pred.resize(y_pred_norm.size());
    for (std::size_t i = 0; i < y_true_norm.size(); ++i) {
        res.y_true[i] = inverse_transform_value(y_true_norm[i], scaler, target_column);
        res.y_pred[i] = inverse_transform_value(y_pred_norm[i], scaler, target_column);
    }
    res.physical = metrics(res.y_true, res.y_pred);
    return res;
}

struct BenchmarkRow {
    std::string model;
    bool ok = false;
    std::string error;
    MetricsReport normalized;
    MetricsReport physical;
};

struct BenchmarkConfig {
    TrainConfig train;
    std::vector<std::size_t> stacked_hidden = {32, 32};
    std::size_t single_hidden = 32;
    double dropout_rate = 0.05;
    GateActivation gate_activation = GateActivation::Sigmoid;
    double lasso_lambda = 0.1;
    double ridge_lambda = 0.1;
    bool include_single_lstm = true;
};

// Fits every comparison model on the shared split and scores them on the
// shared test windows. A failing model marks its own row and the rest
// continue.
inline std::vector<BenchmarkRow> benchmark(const WindowSet& train_set, const WindowSet& test_set,
                                           const Scaler& scaler, const BenchmarkConfig& cfg) {
    std::vector<BenchmarkRow> rows;
    auto run = [&](const std::string& name, auto&& fit_and_predict) {
        BenchmarkRow row;
        row.model = name;
        try {
            const Vector pred = fit_and_predict();
            const EvalResult ev =
                evaluate_predictions(test_set.targets, pred, scaler, test_set.target_column);
            row.normalized = ev.normalized;
            row.physical = ev.physical;
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    };

    const auto [x_train, y_train] = flatten(train_set);
    const auto [x_test, y_test] = flatten(test_set);

    run("Multi. Linear Reg.",
        [&] { return linear_predict(ols_fit(x_train, y_train), x_test); });
    run("Lasso",
        [&] { return linear_predict(lasso_fit(x_train, y_train, cfg.lasso_lambda), x_test); });
    run("Ridge",
        [&] { return linear_predict(ridge_fit(x_train, y_train, cfg.ridge_lambda), x_test); });

    const std::size_t input_dim = train_set.inputs[0].cols();
    auto train_lstm = [&](std::vector<std::size_t> hidden) {
        NetworkConfig net;
        net.input_dim = input_dim;
        net.hidden_sizes = std::move(hidden);
        net.dropout_rate = cfg.dropout_rate;
        net.gate_activation = cfg.gate_activation;
        StackedLstmModel model = init_model(net, cfg.train.seed);
        TrainResult result = train(std::move(model), train_set, test_set, cfg.train);
        return predict_all(result.model, test_set);
    };
    if (cfg.include_single_lstm) {
        run("LSTM", [&] { return train_lstm({cfg.single_hidden}); });
    }
    run("Stacked LSTMs", [&] { return train_lstm(cfg.stacked_hidden); });
    run("Persistence", [&] { return persistence_predict(test_set); });
    return rows;
}

inline void write_benchmark_csv(const std::vector<BenchmarkRow>& rows, std::ostream& out) {
    out << "model,mse,rmse,mae,r2,units\n";
    for (const auto& row : rows) {
        if (!row.ok) continue;
        out << metrics_csv_row(row.model, row.normalized) << ",normalized\n";
        out << metrics_csv_row(row.model, row.physical) << ",m_s\n";
    }
}

// Plain-text table in the four-metric comparison format; the best value in
// each column is starred (first row wins ties).
inline std::string render_benchmark_table(const std::vector<BenchmarkRow>& rows,
                                          bool physical_units) {
    auto pick = [&](const BenchmarkRow& r) { return physical_units ? r.physical : r.normalized; };
    std::array<int, 4> best = {-1, -1, -1, -1};
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
        if (!rows[i].ok) continue;
        const MetricsReport& m = pick(rows[i]);
        const double vals[4] = {m.mse, m.rmse, m.mae, m.r2 ? *m.r2 : 0.0};
        for (int k = 0; k < 4; ++k) {
            if (k == 3 && !m.r2) continue;
            if (best[k] < 0) {
                best[k] = i;
                continue;
            }
            const MetricsReport& bm = pick(rows[best[k]]);
            const double bv[4] = {bm.mse, bm.rmse, bm.mae, bm.r2 ? *bm.r2 : 0.0};
            const bool better = (k == 3) ? vals[k] > bv[k] : vals[k] < bv[k];
            if (better) best[k] = i;
        }
    }
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-20s %12s %12s %12s %12s\n",
                  physical_units ? "model (m/s)" : "model (normalized)", "MSE", "RMSE", "MAE",
                  "R2");
    out += line;
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
        const auto& row = rows[i];
        if (!row.ok) {
            std::snprintf(line, sizeof(line), "%-20s failed: %s\n", row.model.c_str(),
                          row.error.c_str());
            out += line;
            continue;
        }
        const MetricsReport& m = pick(row);
        auto cell = [&](double v, bool starred, bool defined) {
            char buf[32];
            if (!defined) {
                std::snprintf(buf, sizeof(buf), "%12s", "n/a");
            } else {
                std::snprintf(buf, sizeof(buf), "%11.5f%c", v, starred ? '*' : ' ');
            }
            return std::string(buf);
        };
        out += [&] {
            char b[160];
            std::snprintf(b, sizeof(b), "%-20s %s %s %s %s\n", row.model.c_str(),
                          cell(m.mse, best[0] == i, true).c_str(),
                          cell(m.rmse, best[1] == i, true).c_str(),
                          cell(m.mae, best[2] == i, true).c_str(),
                          cell(m.r2 ? *m.r2 : 0.0, best[3] == i, m.r2.has_value()).c_str());
            return std::string(b);
        }();
    }
    return out;
}

}  // namespace windcast
