// Command-line surface for the windcast toolkit: synthetic data generation,
// correlation analysis, training, evaluation, forecasting and the multi-model
// benchmark. Exit codes: 0 success, 1 runtime/data failure, 2 usage or I/O
// failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "windcast/windcast.hpp"

namespace fs = std::filesystem;
using namespace windcast;

namespace {

struct DataFlags {
    std::string input;
    std::size_t lookback = 12;
    std::size_t horizon = 1;
    double train_frac = 0.9;
    std::string split_mode = "random";
    bool strict_gaps = false;
    bool scale_train_only = false;
};

struct ModelFlags {
    std::string hidden = "32,32";
    double dropout = 0.05;
    std::string gate_activation = "sigmoid";
};

struct TrainFlags {
    std::size_t batch_size = 40;
    std::size_t epochs = 50;
    double lr = 0.001;
    double clip = 0.0;  // 0 = no clipping
    std::string optimizer = "adam";
};

std::vector<std::size_t> parse_hidden_sizes(const std::string& list) {
    std::vector<std::size_t> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto v = parse_double(item);
        if (!v || *v < 1.0 || *v != static_cast<double>(static_cast<std::size_t>(*v))) {
            throw DomainError("bad --hidden entry '" + item + "'");
        }
        out.push_back(static_cast<std::size_t>(*v));
    }
    if (out.empty()) throw DomainError("--hidden must list at least one layer size");
    return out;
}

RecordSeries read_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return parse_csv(in);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoError("failed writing '" + path + "'");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

struct Pipeline {
    RecordSeries cleaned;
    Scaler scaler;
    WindowSet train_windows;
    WindowSet test_windows;
};

Pipeline build_pipeline(const DataFlags& d, std::uint64_t seed) {
    const RecordSeries raw = read_series(d.input);
    const RecordSeries cleaned = drop_missing(raw);
    const Matrix values = to_matrix(cleaned);

    Scaler scaler;
    if (d.scale_train_only) {
        // Leak-free option: fit min/max on the chronological prefix only.
        const auto head = static_cast<std::size_t>(static_cast<double>(values.rows()) *
                                                   d.train_frac);
        if (head < 1) throw InsufficientDataError("train fraction leaves no scaling rows");
        Matrix prefix(head, values.cols());
        for (std::size_t i = 0; i < head; ++i) {
            std::copy(values.row(i), values.row(i) + values.cols(), prefix.row(i));
        }
        scaler = fit_scaler(prefix);
    } else {
        scaler = fit_scaler(values);
    }
    const ScaledMatrix scaled = transform(values, scaler);

    WindowSet windows;
    if (d.strict_gaps) {
        windows = make_windows_strict(scaled, timestamps_minutes(cleaned),
                                      cleaned.sample_interval_minutes, d.lookback, d.horizon);
    } else {
        windows = make_windows(scaled, d.lookback, d.horizon);
    }
    auto [train_w, test_w] = split(windows, d.train_frac, parse_split_mode(d.split_mode), seed);
    return Pipeline{cleaned, scaler, std::move(train_w), std::move(test_w)};
}

void print_metrics(const std::string& name, const EvalResult& ev) {
    std::printf("%s  normalized: mse=%.6g rmse=%.6g mae=%.6g r2=%s\n", name.c_str(),
                ev.normalized.mse, ev.normalized.rmse, ev.normalized.mae,
                ev.normalized.r2 ? format_double(*ev.normalized.r2).c_str() : "n/a");
    std::printf("%s  m/s:        mse=%.6g rmse=%.6g mae=%.6g r2=%s\n", name.c_str(),
                ev.physical.mse, ev.physical.rmse, ev.physical.mae,
                ev.physical.r2 ? format_double(*ev.physical.r2).c_str() : "n/a");
}

int run(int argc, char** argv) {
    CLI::App app{"windcast - multivariate short-term wind speed forecasting toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    app.set_config("--config", "", "flat key = value configuration file");

    std::uint64_t seed = 1;
    std::string out_dir = ".";
    app.add_option("--seed", seed, "seed for every stochastic choice")->capture_default_str();
    app.add_option("--out-dir", out_dir, "directory for output artifacts")
        ->capture_default_str();

    DataFlags train_data, eval_data, bench_data;
    ModelFlags model_flags;
    TrainFlags train_flags;
    double lasso_lambda = 0.1;
    double ridge_lambda = 0.1;

    auto add_data_flags = [&](CLI::App* cmd, DataFlags& data) {
        cmd->add_option("--input", data.input, "station CSV file")->required();
        cmd->add_option("--lookback", data.lookback, "window length in steps")
            ->capture_default_str();
        cmd->add_option("--horizon", data.horizon, "steps ahead to predict")
            ->capture_default_str();
        cmd->add_option("--train-frac", data.train_frac, "training fraction")
            ->capture_default_str();
        cmd->add_option("--split", data.split_mode, "random or chrono")
            ->capture_default_str();
        cmd->add_flag("--strict-gaps", data.strict_gaps, "drop windows spanning timestamp gaps");
        cmd->add_flag("--scale-train-only", data.scale_train_only,
                      "fit the scaler on the chronological training prefix only");
    };
    auto add_model_flags = [&](CLI::App* cmd) {
        cmd->add_option("--hidden", model_flags.hidden, "comma-separated layer sizes")
            ->capture_default_str();
        cmd->add_option("--dropout", model_flags.dropout, "dropout rate before the dense head")
            ->capture_default_str();
        cmd->add_option("--gate-activation", model_flags.gate_activation, "sigmoid or relu")
            ->capture_default_str();
    };
    auto add_train_flags = [&](CLI::App* cmd) {
        cmd->add_option("--batch-size", train_flags.batch_size, "mini-batch size")
            ->capture_default_str();
        cmd->add_option("--epochs", train_flags.epochs, "training epochs")
            ->capture_default_str();
        cmd->add_option("--lr", train_flags.lr, "learning rate")->capture_default_str();
        cmd->add_option("--clip", train_flags.clip, "global gradient norm clip (0 = off)")
            ->capture_default_str();
        cmd->add_option("--optimizer", train_flags.optimizer, "adam or sgd")
            ->capture_default_str();
    };
    auto make_train_config = [&]() {
        TrainConfig cfg;
        cfg.batch_size = train_flags.batch_size;
        cfg.epochs = train_flags.epochs;
        cfg.learning_rate = train_flags.lr;
        cfg.seed = seed;
        cfg.optimizer = parse_optimizer(train_flags.optimizer);
        if (train_flags.clip > 0.0) cfg.gradient_clip_norm = train_flags.clip;
        return cfg;
    };

    // synth ------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate a synthetic station CSV");
    std::size_t synth_n = 8353;
    std::string synth_out;
    synth->add_option("--n", synth_n, "number of 5-minute steps")
        ->capture_default_str()
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
    synth->add_option("--out", synth_out, "output CSV path (default <out-dir>/synthetic.csv)");
    synth->callback([&] {
        if (synth_out.empty()) ensure_dir(out_dir);
        const RecordSeries series = synth_generate(synth_n, seed);
        const std::string path = synth_out.empty() ? out_dir + "/synthetic.csv" : synth_out;
        std::ostringstream buf;
        write_csv(series, buf);
        write_text_file(path, buf.str());
        std::printf("wrote %zu rows to %s\n", series.size(), path.c_str());
    });

    // correlate ---------------------------------------------------------
    auto* correlate = app.add_subcommand("correlate", "correlation of each variable with ws10");
    std::string corr_input;
    double threshold = 0.02;
    correlate->add_option("--input", corr_input, "station CSV file")->required();
    correlate->add_option("--threshold", threshold, "significance threshold on the p-value")
        ->capture_default_str();
    correlate->callback([&] {
        ensure_dir(out_dir);
        const RecordSeries cleaned = drop_missing(read_series(corr_input));
        const auto rows = correlation_report(cleaned, threshold);
        std::ostringstream csv;
        write_correlation_csv(rows, csv);
        write_text_file(out_dir + "/correlations.csv", csv.str());
        std::printf("%-10s %12s %14s\n", "variable", "r", "p-value");
        for (const auto& row : rows) {
            std::printf("%-10s %11.4f%c %14.4g\n", row.variable.c_str(), row.r,
                        row.significant ? '*' : ' ', row.p_value);
        }
        std::printf("(* = significant at p < %g, n = %zu)\n", threshold, cleaned.size());
    });

    // train --------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "train the stacked model on a station CSV");
    add_data_flags(train_cmd, train_data);
    add_model_flags(train_cmd);
    add_train_flags(train_cmd);
    train_cmd->callback([&] {
        ensure_dir(out_dir);
        const DataFlags& data = train_data;
        Pipeline pipe = build_pipeline(data, seed);
        NetworkConfig net;
        net.input_dim = kNumVariables;
        net.hidden_sizes = parse_hidden_sizes(model_flags.hidden);
        net.dropout_rate = model_flags.dropout;
        net.gate_activation = parse_gate_activation(model_flags.gate_activation);
        StackedLstmModel model = init_model(net, seed);
        TrainResult result = train(std::move(model), pipe.train_windows, pipe.test_windows,
                                   make_train_config());

        save_model(out_dir + "/model.mslstm", result.model,
                   static_cast<std::uint32_t>(data.lookback),
                   static_cast<std::uint32_t>(data.horizon));
        std::ostringstream loss_csv;
        write_loss_history_csv(result.history, loss_csv);
        write_text_file(out_dir + "/loss_history.csv", loss_csv.str());

        const EvalResult ev = evaluate(result.model, pipe.test_windows, pipe.scaler);
        std::printf("trained %zu epochs, final train loss %.6g, final test loss %.6g\n",
                    result.history.train_loss.size(), result.history.train_loss.back(),
                    result.history.test_loss.back());
        print_metrics("test", ev);
    });

    // evaluate -------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("evaluate", "score a saved model on a station CSV");
    std::string model_path;
    eval_cmd->add_option("--model", model_path, "model file")->required();
    eval_data.lookback = 0;  // 0 = take from the model file
    eval_data.horizon = 0;
    add_data_flags(eval_cmd, eval_data);
    eval_cmd->callback([&] {
        ensure_dir(out_dir);
        DataFlags data = eval_data;
        const ModelDocument doc = load_model(model_path);
        if (data.lookback == 0) data.lookback = doc.lookback;
        if (data.horizon == 0) data.horizon = doc.horizon;
        if (data.lookback != doc.lookback || data.horizon != doc.horizon) {
            throw ShapeError("requested lookback/horizon " + std::to_string(data.lookback) + "/" +
                             std::to_string(data.horizon) +
                             " do not match the model's training frame " +
                             std::to_string(doc.lookback) + "/" + std::to_string(doc.horizon));
        }
        Pipeline pipe = build_pipeline(data, seed);
        const EvalResult ev = evaluate(doc.model, pipe.test_windows, pipe.scaler);

        std::ostringstream metrics_csv;
        metrics_csv << "model,mse,rmse,mae,r2,units\n";
        metrics_csv << metrics_csv_row("Stacked LSTMs", ev.normalized) << ",normalized\n";
        metrics_csv << metrics_csv_row("Stacked LSTMs", ev.physical) << ",m_s\n";
        write_text_file(out_dir + "/metrics.csv", metrics_csv.str());

        std::ostringstream pred_csv;
        pred_csv << "index,y_true,y_pred\n";
        for (std::size_t i = 0; i < ev.y_true.size(); ++i) {
            pred_csv << i << ',' << format_double(ev.y_true[i]) << ','
                     << format_double(ev.y_pred[i]) << '\n';
        }
        write_text_file(out_dir + "/predictions.csv", pred_csv.str());
        print_metrics("test", ev);
    });

    // benchmark -------------------------------------------------------------
    auto* bench_cmd = app.add_subcommand("benchmark", "compare all models on one dataset");
    add_data_flags(bench_cmd, bench_data);
    add_model_flags(bench_cmd);
    add_train_flags(bench_cmd);
    bench_cmd->add_option("--lasso-lambda", lasso_lambda, "lasso penalty")->capture_default_str();
    bench_cmd->add_option("--ridge-lambda", ridge_lambda, "ridge penalty")->capture_default_str();
    bench_cmd->callback([&] {
        ensure_dir(out_dir);
        Pipeline pipe = build_pipeline(bench_data, seed);
        BenchmarkConfig cfg;
        cfg.train = make_train_config();
        cfg.stacked_hidden = parse_hidden_sizes(model_flags.hidden);
        cfg.dropout_rate = model_flags.dropout;
        cfg.gate_activation = parse_gate_activation(model_flags.gate_activation);
        cfg.lasso_lambda = lasso_lambda;
        cfg.ridge_lambda = ridge_lambda;
        const auto rows = benchmark(pipe.train_windows, pipe.test_windows, pipe.scaler, cfg);

        std::ostringstream csv;
        write_benchmark_csv(rows, csv);
        write_text_file(out_dir + "/benchmark.csv", csv.str());
        std::fputs(render_benchmark_table(rows, false).c_str(), stdout);
        std::fputs("\n", stdout);
        std::fputs(render_benchmark_table(rows, true).c_str(), stdout);

        bool any_ok = false;
        for (const auto& row : rows) any_ok = any_ok || row.ok;
        if (!any_ok) throw Error("every benchmark row failed");
    });

    // predict ----------------------------------------------------------------
    auto* predict_cmd = app.add_subcommand("predict", "emit next-step forecasts in m/s");
    std::string predict_model, predict_input, predict_out;
    predict_cmd->add_option("--model", predict_model, "model file")->required();
    predict_cmd->add_option("--input", predict_input, "station CSV file")->required();
    predict_cmd->add_option("--out", predict_out,
                            "output CSV path (default <out-dir>/forecast.csv)");
    predict_cmd->callback([&] {
        if (predict_out.empty()) ensure_dir(out_dir);
        const ModelDocument doc = load_model(predict_model);
        const RecordSeries cleaned = drop_missing(read_series(predict_input));
        const Matrix values = to_matrix(cleaned);
        const Scaler scaler = fit_scaler(values);
        const ScaledMatrix scaled = transform(values, scaler);
        const std::size_t w = doc.lookback;
        if (scaled.values.rows() < w) {
            throw InsufficientDataError("need at least " + std::to_string(w) + " rows, have " +
                                        std::to_string(scaled.values.rows()));
        }
        std::ostringstream csv;
        csv << "index,window_end,forecast_ws10\n";
        ForwardCache cache;
        const std::size_t n = scaled.values.rows() - w + 1;
        for (std::size_t i = 0; i < n; ++i) {
            Matrix window(w, scaled.values.cols());
            for (std::size_t r = 0; r < w; ++r) {
                std::copy(scaled.values.row(i + r), scaled.values.row(i + r) + scaled.values.cols(),
                          window.row(r));
            }
            const double pred = network_forward_into(window, doc.model, RunMode::Eval, 0, cache);
            // Deployment output is clamped at 0 m/s; evaluation never clamps.
            const double ms =
                std::max(inverse_transform_value(pred, scaler, kTargetColumn), 0.0);
            csv << i << ',' << cleaned.records[i + w - 1].timestamp.to_string() << ','
                << format_double(ms) << '\n';
        }
        const std::string path = predict_out.empty() ? out_dir + "/forecast.csv" : predict_out;
        write_text_file(path, csv.str());
        std::printf("wrote %zu forecasts to %s\n", n, path.c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
