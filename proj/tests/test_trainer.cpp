#include <cmath>

#include "catch_amalgamated.hpp"
#include "windcast/trainer.hpp"

using namespace windcast;

namespace {

struct Desk {
    WindowSet train_w;
    WindowSet test_w;
    Scaler scaler;
};

Desk make_desk(std::size_t n, std::uint64_t seed, std::size_t lookback,
               const SynthParams& params = {}, double frac = 0.9) {
    const auto series = synth_generate(n, seed);
    const Matrix values = to_matrix(series);
    const Scaler scaler = fit_scaler(values);
    const auto scaled = transform(values, scaler);
    auto windows = make_windows(scaled, lookback, 1, kTargetColumn);
    auto [train_w, test_w] = split(windows, frac, SplitMode::Random, seed);
    (void)params;
    return {std::move(train_w), std::move(test_w), scaler};
}

Desk make_quiet_desk(std::size_t n, std::uint64_t seed, std::size_t lookback) {
    SynthParams p;
    p.ws_noise = 0.02;
    p.ws2_noise = 0.02;
    p.srad_noise = 2.0;
    p.temp_noise = 0.05;
    p.rh_noise = 0.5;
    p.press_step = 0.01;
    p.dew_noise = 0.1;
    p.wdir_step = 2.0;
    const auto series = synth_generate(n, seed, p);
    const Matrix values = to_matrix(series);
    const Scaler scaler = fit_scaler(values);
    const auto scaled = transform(values, scaler);
    auto windows = make_windows(scaled, lookback, 1, kTargetColumn);
    auto [train_w, test_w] = split(windows, 0.9, SplitMode::Random, seed);
    return {std::move(train_w), std::move(test_w), scaler};
}

StackedLstmModel small_model(std::size_t input_dim, std::vector<std::size_t> hidden,
                             std::uint64_t seed, double dropout = 0.05) {
    NetworkConfig cfg;
    cfg.input_dim = input_dim;
    cfg.hidden_sizes = std::move(hidden);
    cfg.dropout_rate = dropout;
    return init_model(cfg, seed);
}

bool models_identical(const StackedLstmModel& a, const StackedLstmModel& b) {
    const auto sa = parameter_segments(a);
    const auto sb = parameter_segments(b);
    if (sa.size() != sb.size()) return false;
    for (std::size_t s = 0; s < sa.size(); ++s) {
        if (sa[s].size() != sb[s].size()) return false;
        for (std::size_t i = 0; i < sa[s].size(); ++i) {
            if (sa[s][i] != sb[s][i]) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("adam_step with zero gradients leaves parameters untouched") {
    auto model = small_model(2, {3}, 1);
    const auto before = model;
    auto grads = GradientSet::zeros_like(model);
    auto state = AdamState::like(model);
    TrainConfig cfg;
    adam_step(model, grads, state, cfg);
    CHECK(state.t == 1);
    CHECK(models_identical(model, before));
}

TEST_CASE("adam_step first update has magnitude learning_rate") {
    auto model = small_model(2, {3}, 1);
    const auto before = model;
    auto grads = GradientSet::zeros_like(model);
    for (auto seg : parameter_segments(grads)) {
        for (double& g : seg) g = 1.0;
    }
    auto state = AdamState::like(model);
    TrainConfig cfg;  // lr 0.001
    adam_step(model, grads, state, cfg);
    // m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
    const auto sb = parameter_segments(before);
    const auto sa = parameter_segments(model);
    for (std::size_t s = 0; s < sa.size(); ++s) {
        for (std::size_t i = 0; i < sa[s].size(); ++i) {
            CHECK_THAT(sb[s][i] - sa[s][i], Catch::Matchers::WithinAbs(0.001, 1e-9));
        }
    }
}

TEST_CASE("adam_step with a repeated constant gradient keeps a steady step while v grows") {
    // Hand iteration: with g = 1 twice, m_hat = v_hat = 1 at both steps, so
    // the update magnitude stays lr/(1+eps); the raw second moment grows.
    auto model = small_model(1, {1}, 2);
    auto grads = GradientSet::zeros_like(model);
    for (auto seg : parameter_segments(grads)) {
        for (double& g : seg) g = 1.0;
    }
    auto state = AdamState::like(model);
    TrainConfig cfg;
    const double p0 = model.dense_b;
    adam_step(model, grads, state, cfg);
    const double step1 = p0 - model.dense_b;
    const double v1 = state.v.dense_b;
    for (auto seg : parameter_segments(grads)) {
        for (double& g : seg) g = 1.0;  // same gradient again
    }
    const double p1 = model.dense_b;
    adam_step(model, grads, state, cfg);
    const double step2 = p1 - model.dense_b;
    const double v2 = state.v.dense_b;
    CHECK(v2 > v1);
    CHECK_THAT(step2, Catch::Matchers::WithinAbs(step1, 1e-12));
    CHECK(state.t == 2);
}

TEST_CASE("adam_step rejects mismatched gradient shapes") {
    auto model = small_model(2, {3}, 1);
    auto other = small_model(2, {4}, 1);
    auto grads = GradientSet::zeros_like(other);
    auto state = AdamState::like(model);
    TrainConfig cfg;
    CHECK_THROWS_AS(adam_step(model, grads, state, cfg), ShapeError);
}

TEST_CASE("training is bit-reproducible") {
    const auto desk = make_desk(320, 3, 6);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.seed = 5;
    const auto r1 = train(small_model(8, {6, 6}, 5), desk.train_w, desk.test_w, cfg);
    const auto r2 = train(small_model(8, {6, 6}, 5), desk.train_w, desk.test_w, cfg);
    CHECK(r1.history.train_loss == r2.history.train_loss);
    CHECK(r1.history.test_loss == r2.history.test_loss);
    CHECK(models_identical(r1.model, r2.model));
}

TEST_CASE("zero learning rate leaves the model bit-identical") {
    const auto desk = make_desk(200, 4, 5);
    auto model = small_model(8, {5}, 9);
    const auto before = model;
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.learning_rate = 0.0;
    const auto result = train(std::move(model), desk.train_w, desk.test_w, cfg);
    CHECK(models_identical(result.model, before));
}

TEST_CASE("optimizer steps count epochs times batch count") {
    const auto desk = make_desk(120, 7, 4);  // 116 windows -> 104 train
    REQUIRE(desk.train_w.size() == 104);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 20;
    const auto result = train(small_model(8, {4}, 2), desk.train_w, desk.test_w, cfg);
    CHECK(result.adam.t == 3 * 6);  // ceil(104/20) = 6
    CHECK(result.history.train_loss.size() == 3);
    CHECK(result.history.test_loss.size() == 3);
}

TEST_CASE("one batch per epoch when the batch covers the data") {
    const auto desk = make_desk(60, 8, 4);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 10000;
    const auto result = train(small_model(8, {4}, 2), desk.train_w, desk.test_w, cfg);
    CHECK(result.adam.t == 1);
}

TEST_CASE("recorded train loss is the mean of per-batch mse") {
    const auto desk = make_desk(40, 9, 3);  // 36 windows -> 32 train, 4 test
    auto model = small_model(8, {4}, 3, 0.0);  // no dropout: train == eval
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 7;
    cfg.learning_rate = 0.0;  // model never moves, so the loss is predictable
    cfg.shuffle_each_epoch = false;
    const auto result = train(model, desk.train_w, desk.test_w, cfg);

    const Vector pred = predict_all(model, desk.train_w);
    const std::size_t n = desk.train_w.size();
    double expected = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
        const std::size_t bn = std::min(cfg.batch_size, n - start);
        double batch_mse = 0.0;
        for (std::size_t i = start; i < start + bn; ++i) {
            const double e = pred[i] - desk.train_w.targets[i];
            batch_mse += e * e;
        }
        expected += batch_mse / static_cast<double>(bn);
        ++batches;
    }
    expected /= static_cast<double>(batches);
    CHECK_THAT(result.history.train_loss[0], Catch::Matchers::WithinAbs(expected, 1e-15));
    // every recorded loss is finite and nonnegative
    for (const double l : result.history.train_loss) CHECK((std::isfinite(l) && l >= 0.0));
    for (const double l : result.history.test_loss) CHECK((std::isfinite(l) && l >= 0.0));
}

TEST_CASE("the final test loss equals a fresh evaluation of the trained model") {
    const auto desk = make_desk(250, 11, 6);
    TrainConfig cfg;
    cfg.epochs = 2;
    const auto result = train(small_model(8, {6}, 4), desk.train_w, desk.test_w, cfg);
    const auto ev = evaluate(result.model, desk.test_w, desk.scaler);
    CHECK(result.history.test_loss.back() == ev.normalized.mse);
}

TEST_CASE("an absurd learning rate raises a divergence error with context") {
    const auto desk = make_desk(100, 13, 4);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 1e160;
    try {
        train(small_model(8, {4}, 5), desk.train_w, desk.test_w, cfg);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch >= 1);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("sgd with clipping trains deterministically") {
    const auto desk = make_desk(150, 6, 5);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.optimizer = Optimizer::Sgd;
    cfg.learning_rate = 0.05;
    cfg.gradient_clip_norm = 1.0;
    const auto r1 = train(small_model(8, {5}, 3), desk.train_w, desk.test_w, cfg);
    const auto r2 = train(small_model(8, {5}, 3), desk.train_w, desk.test_w, cfg);
    CHECK(r1.history.train_loss == r2.history.train_loss);
    CHECK(models_identical(r1.model, r2.model));
    for (const double l : r1.history.train_loss) CHECK(std::isfinite(l));
}

TEST_CASE("gradient clipping caps the global norm") {
    auto model = small_model(2, {3}, 6);
    auto grads = GradientSet::zeros_like(model);
    for (auto seg : parameter_segments(grads)) {
        for (double& g : seg) g = 10.0;
    }
    clip_gradients(grads, 1.0);
    double sq = 0.0;
    for (const auto& seg : parameter_segments(grads)) {
        for (const double g : seg) sq += g * g;
    }
    CHECK_THAT(std::sqrt(sq), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("training reduces the loss on synthetic data") {
    const auto desk = make_desk(2000, 1, 12);
    TrainConfig cfg;  // defaults: batch 40, 50 epochs, lr 0.001, seed 1
    const auto result = train(small_model(8, {32, 32}, 1), desk.train_w, desk.test_w, cfg);
    CHECK(result.history.train_loss.back() < result.history.train_loss.front());
}

TEST_CASE("a freshly trained model explains near-noiseless synthetic data") {
    const auto desk = make_quiet_desk(1200, 2, 8);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 32;
    cfg.learning_rate = 0.005;
    cfg.seed = 2;
    const auto untrained = small_model(8, {12, 12}, 2);
    const auto result = train(untrained, desk.train_w, desk.test_w, cfg);

    const auto trained_eval = evaluate(result.model, desk.test_w, desk.scaler);
    REQUIRE(trained_eval.physical.r2.has_value());
    CHECK(*trained_eval.physical.r2 > 0.9);

    const auto untrained_eval = evaluate(untrained, desk.test_w, desk.scaler);
    REQUIRE(untrained_eval.physical.r2.has_value());
    CHECK(*untrained_eval.physical.r2 < *trained_eval.physical.r2);
    CHECK(*untrained_eval.physical.r2 < 0.5);
}

TEST_CASE("a constant-output model scores at or below the mean baseline") {
    const auto desk = make_desk(300, 3, 6);
    auto model = small_model(8, {5}, 7);
    model.dense_w.assign(model.dense_w.size(), 0.0);
    model.dense_b = 0.9;
    for (auto& layer : model.layers) layer.zero();
    const auto ev = evaluate(model, desk.test_w, desk.scaler);
    REQUIRE(ev.normalized.r2.has_value());
    CHECK(*ev.normalized.r2 <= 0.0);
}

TEST_CASE("benchmark produces all six rows on shared data") {
    const auto desk = make_desk(260, 5, 4);
    BenchmarkConfig cfg;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 20;
    cfg.train.seed = 5;
    cfg.stacked_hidden = {6, 6};
    cfg.single_hidden = 6;
    const auto rows = benchmark(desk.train_w, desk.test_w, desk.scaler, cfg);
    REQUIRE(rows.size() == 6);
    const std::vector<std::string> names = {"Multi. Linear Reg.", "Lasso", "Ridge",
                                            "LSTM", "Stacked LSTMs", "Persistence"};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].model == names[i]);
        CHECK(rows[i].ok);
        CHECK(rows[i].normalized.n == desk.test_w.size());
    }
    // deterministic across reruns
    const auto again = benchmark(desk.train_w, desk.test_w, desk.scaler, cfg);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].normalized.mse == again[i].normalized.mse);
        CHECK(rows[i].physical.mae == again[i].physical.mae);
    }
    const std::string table = render_benchmark_table(rows, true);
    CHECK(table.find("Stacked LSTMs") != std::string::npos);
    CHECK(table.find('*') != std::string::npos);
}

TEST_CASE("a failing row does not abort the benchmark") {
    // duplicate constant columns make OLS singular, the rest still run
    ScaledMatrix sm;
    sm.values = Matrix(40, 2, 0.0);
    for (std::size_t i = 0; i < 40; ++i) {
        sm.values(i, 0) = 0.5 + 0.4 * std::sin(0.3 * static_cast<double>(i));
        sm.values(i, 1) = 0.7;  // constant column -> rank-deficient flattened design
    }
    const auto ws = make_windows(sm, 3, 1, 0);
    const auto [train_w, test_w] = split(ws, 0.8, SplitMode::Chronological, 1);
    Scaler scaler;
    scaler.v_min = {0.0, 0.0};
    scaler.v_max = {1.0, 1.0};
    scaler.degenerate = {0, 0};
    BenchmarkConfig cfg;
    cfg.train.epochs = 1;
    cfg.stacked_hidden = {3, 3};
    cfg.single_hidden = 3;
    const auto rows = benchmark(train_w, test_w, scaler, cfg);
    REQUIRE(rows.size() == 6);
    CHECK(!rows[0].ok);  // OLS fails on the singular design
    CHECK(!rows[0].error.empty());
    CHECK(rows[5].ok);   // persistence is untouched
    const std::string table = render_benchmark_table(rows, false);
    CHECK(table.find("failed") != std::string::npos);
}

TEST_CASE("loss history csv lists one row per epoch") {
    LossHistory h;
    h.train_loss = {0.5, 0.25};
    h.test_loss = {0.6, 0.3};
    std::ostringstream out;
    write_loss_history_csv(h, out);
    CHECK(out.str() == "epoch,train_loss,test_loss\n1,0.5,0.6\n2,0.25,0.3\n");
}
