#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "windcast/errors.hpp"
#include "windcast/linalg.hpp"
#include "windcast/rng.hpp"

namespace windcast {

enum class GateActivation : std::uint32_t { Sigmoid = 0, Relu = 1 };

inline GateActivation parse_gate_activation(std::string_view s) {
    if (s == "sigmoid") return GateActivation::Sigmoid;
    if (s == "relu") return GateActivation::Relu;
    throw DomainError("unknown gate activation '" + std::string(s) + "'");
}

// Weights for one recurrent layer: input weights W, recurrent weights U and
// bias b for the forget/input/output gates and the candidate activation.
struct LstmLayerParams {
    Matrix w_f, u_f;
    Vector b_f;
    Matrix w_i, u_i;
    Vector b_i;
    Matrix w_c, u_c;
    Vector b_c;
    Matrix w_o, u_o;
    Vector b_o;

    std::size_t input_dim() const { return w_f.cols(); }
    std::size_t hidden_size() const { return w_f.rows(); }

    static LstmLayerParams zeros(std::size_t hidden, std::size_t input) {
        LstmLayerParams p;
        for (Matrix* m : {&p.w_f, &p.w_i, &p.w_c, &p.w_o}) *m = Matrix(hidden, input);
        for (Matrix* m : {&p.u_f, &p.u_i, &p.u_c, &p.u_o}) *m = Matrix(hidden, hidden);
        for (Vector* v : {&p.b_f, &p.b_i, &p.b_c, &p.b_o}) v->assign(hidden, 0.0);
        return p;
    }

    void zero() {
        for (Matrix* m : {&w_f, &u_f, &w_i, &u_i, &w_c, &u_c, &w_o, &u_o}) m->fill(0.0);
        for (Vector* v : {&b_f, &b_i, &b_c, &b_o}) v->assign(v->size(), 0.0);
    }
};

struct CellState {
    Vector h;
    Vector c;

    static CellState zeros(std::size_t hidden) { return {Vector(hidden, 0.0), Vector(hidden, 0.0)}; }
};

struct NetworkConfig {
    std::size_t input_dim = 8;
    std::vector<std::size_t> hidden_sizes = {32, 32};
    double dropout_rate = 0.05;
    GateActivation gate_activation = GateActivation::Sigmoid;
    std::size_t output_dim = 1;

    void validate() const {
        if (input_dim < 1) throw DomainError("config: input_dim must be >= 1");
        if (hidden_sizes.empty()) throw DomainError("config: at least one layer required");
        for (const std::size_t h : hidden_sizes) {
            if (h < 1) throw DomainError("config: hidden sizes must be >= 1");
        }
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
            throw DomainError("config: dropout_rate must lie in [0,1)");
        }
        if (output_dim != 1) throw DomainError("config: output_dim must be 1");
    }
};

// Stacked recurrent layers plus the scalar dense head.
struct StackedLstmModel {
    NetworkConfig config;
    std::vector<LstmLayerParams> layers;
    Vector dense_w;
    double dense_b = 0.0;
};

// Structural fingerprint; lets a replayed cache detect a model it was not
// built from.
inline std::uint64_t model_fingerprint(const StackedLstmModel& m) {
    std::uint64_t h = mix64(m.config.input_dim, m.layers.size());
    for (const auto& layer : m.layers) h = mix64(h, layer.hidden_size(), layer.input_dim());
    return mix64(h, m.dense_w.size(), static_cast<std::uint64_t>(m.config.gate_activation));
}

// Glorot-uniform weights, zero biases except the forget gate at 1.
inline StackedLstmModel init_model(const NetworkConfig& config, std::uint64_t seed) {
    config.validate();
    StackedLstmModel model;
    model.config = config;
    Rng rng(mix64(seed, 0x494e4954ULL));  // "INIT"

    auto glorot_fill = [&](Matrix& m, std::size_t fan_in, std::size_t fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& v : m.flat()) v = rng.uniform(-bound, bound);
    };

    std::size_t in_dim = config.input_dim;
    for (const std::size_t hidden : config.hidden_sizes) {
        LstmLayerParams p = LstmLayerParams::zeros(hidden, in_dim);
        // Draw order: gates f, i, candidate, o; W before U within a gate.
        for (auto [w, u] : {std::pair{&p.w_f, &p.u_f}, std::pair{&p.w_i, &p.u_i},
                            std::pair{&p.w_c, &p.u_c}, std::pair{&p.w_o, &p.u_o}}) {
            glorot_fill(*w, in_dim, hidden);
            glorot_fill(*u, hidden, hidden);
        }
        p.b_f.assign(hidden, 1.0);
        model.layers.push_back(std::move(p));
        in_dim = hidden;
    }
    model.dense_w.assign(in_dim, 0.0);
    const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + 1));
    for (double& v : model.dense_w) v = rng.uniform(-bound, bound);
    model.dense_b = 0.0;
    return model;
}

// Everything one cell step produced; replayed by the backward pass.
struct CellStepCache {
    Vector x;
    Vector h_prev, c_prev;
    Vector zf, zi, zc, zo;  // gate pre-activations
    Vector f, i, k, o;      // gate activations and candidate
    Vector c, tanh_c, h;

    void prepare(std::size_t input, std::size_t hidden) {
        x.resize(input);
        for (Vector* v : {&h_prev, &c_prev, &zf, &zi, &zc, &zo, &f, &i, &k, &o, &c, &tanh_c, &h}) {
            v->resize(hidden);
        }
    }
};

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline void apply_gate(GateActivation g, const Vector& z, Vector& out) {
    if (g == GateActivation::Sigmoid) {
        for (std::size_t j = 0; j < z.size(); ++j) out[j] = sigmoid(z[j]);
    } else {
        for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] > 0.0 ? z[j] : 0.0;
    }
}

inline void check_cell_finite(const CellStepCache& s) {
    struct Entry {
        const Vector* v;
        const char* name;
    };
    const Entry entries[] = {{&s.f, "forget gate"}, {&s.i, "input gate"},
                             {&s.k, "candidate"},   {&s.o, "output gate"},
                             {&s.c, "cell state"},  {&s.h, "hidden state"}};
    for (const auto& e : entries) {
        if (!all_finite(e.v->data(), e.v->size())) {
            throw NumericError(std::string("non-finite value in ") + e.name);
        }
    }
}

}  // namespace detail

// One step of the cell update:
//   f = g(W_f x + U_f h + b_f)        i = g(W_i x + U_i h + b_i)
//   k = tanh(W_c x + U_c h + b_c)     o = g(W_o x + U_o h + b_o)
//   c = f.c_prev + i.k                h = o.tanh(c)
inline void cell_forward_into(const double* x, std::size_t x_len, const Vector& h_prev,
                              const Vector& c_prev, const LstmLayerParams& p, GateActivation g,
                              CellStepCache& s) {
    const std::size_t hidden = p.hidden_size();
    if (x_len != p.input_dim()) throw ShapeError("cell_forward: input dimension mismatch");
    if (h_prev.size() != hidden || c_prev.size() != hidden) {
        throw ShapeError("cell_forward: state dimension mismatch");
    }
    s.prepare(x_len, hidden);
    std::copy(x, x + x_len, s.x.begin());
    s.h_prev = h_prev;
    s.c_prev = c_prev;

    auto preact = [&](const Matrix& w, const Matrix& u, const Vector& b, Vector& z) {
        z = b;
        matvec_add(w, x, z.data());
        matvec_add(u, h_prev.data(), z.data());
    };
    preact(p.w_f, p.u_f, p.b_f, s.zf);
    preact(p.w_i, p.u_i, p.b_i, s.zi);
    preact(p.w_c, p.u_c, p.b_c, s.zc);
    preact(p.w_o, p.u_o, p.b_o, s.zo);

    detail::apply_gate(g, s.zf, s.f);
    detail::apply_gate(g, s.zi, s.i);
    detail::apply_gate(g, s.zo, s.o);
    for (std::size_t j = 0; j < hidden; ++j) s.k[j] = std::tanh(s.zc[j]);
    for (std::size_t j = 0; j < hidden; ++j) s.c[j] = s.f[j] * c_prev[j] + s.i[j] * s.k[j];
    for (std::size_t j = 0; j < hidden; ++j) s.tanh_c[j] = std::tanh(s.c[j]);
    for (std::size_t j = 0; j < hidden; ++j) s.h[j] = s.o[j] * s.tanh_c[j];
    detail::check_cell_finite(s);
}

inline std::pair<CellState, CellStepCache> cell_forward(const Vector& x, const CellState& prev,
                                                        const LstmLayerParams& params,
                                                        GateActivation gate_activation) {
    CellStepCache cache;
    cell_forward_into(x.data(), x.size(), prev.h, prev.c, params, gate_activation, cache);
    return {CellState{cache.h, cache.c}, std::move(cache)};
}

enum class RunMode { Train, Eval };

// Per-timestep, per-layer trace of one forward pass plus the dropout
// multipliers applied to the final hidden vector.
struct ForwardCache {
    std::vector<std::vector<CellStepCache>> steps;  // [layer][t]
    Vector dropout_scale;                           // 0 or 1/(1-rate); all 1 in eval
    Vector h_dropped;
    double prediction = 0.0;
    RunMode mode = RunMode::Eval;
    std::uint64_t fingerprint = 0;

    std::size_t timesteps() const { return steps.empty() ? 0 : steps[0].size(); }
};

// Runs the stacked network over a lookback window. Layer 0 consumes the
// window rows; each further layer consumes the full hidden sequence below
// it. Inverted dropout is applied to the last hidden vector in train mode.
inline double network_forward_into(const Matrix& window, const StackedLstmModel& model,
                                   RunMode mode, std::uint64_t dropout_seed, ForwardCache& cache) {
    const std::size_t w = window.rows();
    const std::size_t n_layers = model.layers.size();
    if (w < 1) throw ShapeError("network_forward: empty window");
    if (window.cols() != model.config.input_dim) {
        throw ShapeError("network_forward: window has " + std::to_string(window.cols()) +
                         " columns, model expects " + std::to_string(model.config.input_dim));
    }

    cache.steps.resize(n_layers);
    for (auto& v : cache.steps) v.resize(w);
    cache.mode = mode;
    cache.fingerprint = model_fingerprint(model);

    for (std::size_t l = 0; l < n_layers; ++l) {
        const LstmLayerParams& p = model.layers[l];
        const std::size_t hidden = p.hidden_size();
        CellState state = CellState::zeros(hidden);
        for (std::size_t t = 0; t < w; ++t) {
            const double* x = (l == 0) ? window.row(t) : cache.steps[l - 1][t].h.data();
            const std::size_t x_len = (l == 0) ? window.cols() : model.layers[l - 1].hidden_size();
            CellStepCache& s = cache.steps[l][t];
            cell_forward_into(x, x_len, state.h, state.c, p, model.config.gate_activation, s);
            state.h = s.h;
            state.c = s.c;
        }
    }

    const Vector& h_final = cache.steps[n_layers - 1][w - 1].h;
    const std::size_t top = h_final.size();
    cache.dropout_scale.assign(top, 1.0);
    if (mode == RunMode::Train && model.config.dropout_rate > 0.0) {
        Rng rng(mix64(dropout_seed, 0x44524f50ULL));  // "DROP"
        const double keep = 1.0 - model.config.dropout_rate;
        for (std::size_t j = 0; j < top; ++j) {
            cache.dropout_scale[j] = (rng.uniform() < keep) ? 1.0 / keep : 0.0;
        }
    }
    cache.h_dropped.resize(top);
    for (std::size_t j = 0; j < top; ++j) cache.h_dropped[j] = h_final[j] * cache.dropout_scale[j];
    cache.prediction = dot(model.dense_w.data(), cache.h_dropped.data(), top) + model.dense_b;
    return cache.prediction;
}

inline std::pair<double, ForwardCache> network_forward(const Matrix& window,
                                                       const StackedLstmModel& model, RunMode mode,
                                                       std::uint64_t dropout_seed = 0) {
    ForwardCache cache;
    const double pred = network_forward_into(window, model, mode, dropout_seed, cache);
    return {pred, std::move(cache)};
}

// Gradient storage mirroring the model parameters.
struct GradientSet {
    std::vector<LstmLayerParams> layers;
    Vector dense_w;
    double dense_b = 0.0;

    static GradientSet zeros_like(const StackedLstmModel& m) {
        GradientSet g;
        for (const auto& layer : m.layers) {
            g.layers.push_back(LstmLayerParams::zeros(layer.hidden_size(), layer.input_dim()));
        }
        g.dense_w.assign(m.dense_w.size(), 0.0);
        return g;
    }

    void zero() {
        for (auto& layer : layers) layer.zero();
        dense_w.assign(dense_w.size(), 0.0);
        dense_b = 0.0;
    }
};

namespace detail {

inline void gate_derivative(GateActivation g, const CellStepCache& s, const Vector& act,
                            const Vector& z, const Vector& d_act, Vector& d_z) {
    (void)s;
    const std::size_t n = act.size();
    d_z.resize(n);
    if (g == GateActivation::Sigmoid) {
        for (std::size_t j = 0; j < n; ++j) d_z[j] = d_act[j] * act[j] * (1.0 - act[j]);
    } else {
        for (std::size_t j = 0; j < n; ++j) d_z[j] = z[j] > 0.0 ? d_act[j] : 0.0;
    }
}

}  // namespace detail

// Exact backpropagation through time over the cached forward pass,
// accumulating into `grads` (shapes must match the model).
inline void network_backward_accum(const ForwardCache& cache, const StackedLstmModel& model,
                                   double d_prediction, GradientSet& grads) {
    if (cache.fingerprint != model_fingerprint(model)) {
        throw StateError("network_backward: cache does not belong to this model");
    }
    if (grads.layers.size() != model.layers.size() ||
        grads.dense_w.size() != model.dense_w.size()) {
        throw ShapeError("network_backward: gradient shapes do not match model");
    }
    const std::size_t n_layers = model.layers.size();
    const std::size_t w = cache.timesteps();
    const std::size_t top = model.dense_w.size();

    // Dense head, then replay the dropout multipliers.
    grads.dense_b += d_prediction;
    for (std::size_t j = 0; j < top; ++j) grads.dense_w[j] += d_prediction * cache.h_dropped[j];
    std::vector<Vector> upstream(w);
    upstream[w - 1].assign(top, 0.0);
    for (std::size_t j = 0; j < top; ++j) {
        upstream[w - 1][j] = d_prediction * model.dense_w[j] * cache.dropout_scale[j];
    }

    Vector dh, dc, d_zf, d_zi, d_zk, d_zo, df, di, dk, d_o;
    for (std::size_t li = n_layers; li-- > 0;) {
        const LstmLayerParams& p = model.layers[li];
        LstmLayerParams& g = grads.layers[li];
        const std::size_t hidden = p.hidden_size();
        const std::size_t in_dim = p.input_dim();
        const GateActivation act = model.config.gate_activation;

        std::vector<Vector> downstream;
        if (li > 0) {
            downstream.assign(w, Vector());
            for (auto& v : downstream) v.assign(in_dim, 0.0);
        }

        Vector dh_next(hidden, 0.0);
        Vector dc_next(hidden, 0.0);
        for (std::size_t t = w; t-- > 0;) {
            const CellStepCache& s = cache.steps[li][t];
            dh = dh_next;
            if (!upstream[t].empty()) {
                for (std::size_t j = 0; j < hidden; ++j) dh[j] += upstream[t][j];
            }
            dc = dc_next;

            // h = o . tanh(c)
            d_o.resize(hidden);
            for (std::size_t j = 0; j < hidden; ++j) {
                d_o[j] = dh[j] * s.tanh_c[j];
                dc[j] += dh[j] * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
            }
            // c = f . c_prev + i . k
            df.resize(hidden);
            di.resize(hidden);
            dk.resize(hidden);
            for (std::size_t j = 0; j < hidden; ++j) {
                df[j] = dc[j] * s.c_prev[j];
                di[j] = dc[j] * s.k[j];
                dk[j] = dc[j] * s.i[j];
            }
            detail::gate_derivative(act, s, s.f, s.zf, df, d_zf);
            detail::gate_derivative(act, s, s.i, s.zi, di, d_zi);
            detail::gate_derivative(act, s, s.o, s.zo, d_o, d_zo);
            d_zk.resize(hidden);
            for (std::size_t j = 0; j < hidden; ++j) d_zk[j] = dk[j] * (1.0 - s.k[j] * s.k[j]);

            struct GateRef {
                const Matrix *w, *u;
                Matrix *gw, *gu;
                Vector* gb;
                const Vector* dz;
            };
            const GateRef gates[] = {{&p.w_f, &p.u_f, &g.w_f, &g.u_f, &g.b_f, &d_zf},
                                     {&p.w_i, &p.u_i, &g.w_i, &g.u_i, &g.b_i, &d_zi},
                                     {&p.w_c, &p.u_c, &g.w_c, &g.u_c, &g.b_c, &d_zk},
                                     {&p.w_o, &p.u_o, &g.w_o, &g.u_o, &g.b_o, &d_zo}};
            dh_next.assign(hidden, 0.0);
            for (const auto& gr : gates) {
                outer_add(*gr.gw, gr.dz->data(), s.x.data());
                outer_add(*gr.gu, gr.dz->data(), s.h_prev.data());
                for (std::size_t j = 0; j < hidden; ++j) (*gr.gb)[j] += (*gr.dz)[j];
                if (li > 0) matvec_transpose_add(*gr.w, gr.dz->data(), downstream[t].data());
                matvec_transpose_add(*gr.u, gr.dz->data(), dh_next.data());
            }
            for (std::size_t j = 0; j < hidden; ++j) dc_next[j] = dc[j] * s.f[j];
        }
        if (li > 0) upstream = std::move(downstream);
    }
}

inline GradientSet network_backward(const ForwardCache& cache, const StackedLstmModel& model,
                                    double d_prediction) {
    GradientSet grads = GradientSet::zeros_like(model);
    network_backward_accum(cache, model, d_prediction, grads);
    return grads;
}

// Canonical flat view over all trainable parameters: per layer, gates in
// order f, i, candidate, o with W, U, b inside each gate; then the dense
// head. Serialization, the optimizer and the gradient checks all share it.
template <typename ModelLike>
inline std::vector<std::span<double>> parameter_segments(ModelLike& m) {
    std::vector<std::span<double>> segs;
    for (auto& layer : m.layers) {
        for (auto [w, u, b] : {std::tuple{&layer.w_f, &layer.u_f, &layer.b_f},
                               std::tuple{&layer.w_i, &layer.u_i, &layer.b_i},
                               std::tuple{&layer.w_c, &layer.u_c, &layer.b_c},
                               std::tuple{&layer.w_o, &layer.u_o, &layer.b_o}}) {
            segs.push_back(w->flat());
            segs.push_back(u->flat());
            segs.push_back(std::span<double>(b->data(), b->size()));
        }
    }
    segs.push_back(std::span<double>(m.dense_w.data(), m.dense_w.size()));
    segs.push_back(std::span<double>(&m.dense_b, 1));
    return segs;
}

template <typename ModelLike>
inline std::vector<std::span<const double>> parameter_segments(const ModelLike& m) {
    std::vector<std::span<const double>> segs;
    for (const auto& layer : m.layers) {
        for (auto [w, u, b] : {std::tuple{&layer.w_f, &layer.u_f, &layer.b_f},
                               std::tuple{&layer.w_i, &layer.u_i, &layer.b_i},
                               std::tuple{&layer.w_c, &layer.u_c, &layer.b_c},
                               std::tuple{&layer.w_o, &layer.u_o, &layer.b_o}}) {
            segs.push_back(w->flat());
            segs.push_back(u->flat());
            segs.push_back(std::span<const double>(b->data(), b->size()));
        }
    }
    segs.push_back(std::span<const double>(m.dense_w.data(), m.dense_w.size()));
    segs.push_back(std::span<const double>(&m.dense_b, 1));
    return segs;
}

inline std::size_t parameter_count(const StackedLstmModel& m) {
    std::size_t n = 0;
    for (const auto& s : parameter_segments(m)) n += s.size();
    return n;
}

// ---------------------------------------------------------------------------
// Model file format. Little-endian layout:
//   magic "MSLSTM" | u32 version | u32 input_dim | u32 n_layers
//   | u32 hidden[n_layers] | f64 dropout_rate | u32 gate_activation
//   | u32 output_dim | u32 lookback | u32 horizon
//   | f64 parameters in canonical segment order (row-major matrices)
// ---------------------------------------------------------------------------

inline constexpr char kModelMagic[6] = {'M', 'S', 'L', 'S', 'T', 'M'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

struct ModelDocument {
    StackedLstmModel model;
    std::uint32_t lookback = 12;
    std::uint32_t horizon = 1;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class ByteReader {
  public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void raw(void* dst, std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            throw ModelTruncationError("model file truncated at byte " + std::to_string(pos_));
        }
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }

    std::uint32_t u32() {
        std::uint8_t b[4];
        raw(b, 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    double f64() {
        std::uint8_t b[8];
        raw(b, 8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

  private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const StackedLstmModel& model,
                                           std::uint32_t lookback = 12,
                                           std::uint32_t horizon = 1) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kModelMagic, kModelMagic + 6);
    detail::put_u32(out, kModelFormatVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(model.config.input_dim));
    detail::put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
    for (const auto& layer : model.layers) {
        detail::put_u32(out, static_cast<std::uint32_t>(layer.hidden_size()));
    }
    detail::put_f64(out, model.config.dropout_rate);
    detail::put_u32(out, static_cast<std::uint32_t>(model.config.gate_activation));
    detail::put_u32(out, static_cast<std::uint32_t>(model.config.output_dim));
    detail::put_u32(out, lookback);
    detail::put_u32(out, horizon);
    for (const auto& seg : parameter_segments(model)) {
        for (const double v : seg) detail::put_f64(out, v);
    }
    return out;
}

inline ModelDocument deserialize(std::span<const std::uint8_t> bytes) {
    detail::ByteReader reader(bytes);
    char magic[6];
    reader.raw(magic, 6);
    if (std::memcmp(magic, kModelMagic, 6) != 0) {
        throw ModelFormatError("bad magic: not a model file");
    }
    const std::uint32_t version = reader.u32();
    if (version != kModelFormatVersion) {
        throw ModelVersionError("unsupported model format version " + std::to_string(version));
    }
    constexpr std::uint32_t kDimCap = 1u << 20;
    ModelDocument doc;
    NetworkConfig cfg;
    cfg.input_dim = reader.u32();
    const std::uint32_t n_layers = reader.u32();
    if (cfg.input_dim == 0 || cfg.input_dim > kDimCap || n_layers == 0 || n_layers > 1024) {
        throw ModelFormatError("inconsistent model dimensions in header");
    }
    cfg.hidden_sizes.clear();
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const std::uint32_t h = reader.u32();
        if (h == 0 || h > kDimCap) throw ModelFormatError("inconsistent hidden size in header");
        cfg.hidden_sizes.push_back(h);
    }
    cfg.dropout_rate = reader.f64();
    const std::uint32_t act = reader.u32();
    if (act > 1) throw ModelFormatError("unknown gate activation code");
    cfg.gate_activation = static_cast<GateActivation>(act);
    cfg.output_dim = reader.u32();
    if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0) || cfg.output_dim != 1) {
        throw ModelFormatError("inconsistent config block");
    }
    doc.lookback = reader.u32();
    doc.horizon = reader.u32();
    if (doc.lookback == 0 || doc.horizon == 0) {
        throw ModelFormatError("inconsistent lookback/horizon");
    }

    doc.model.config = cfg;
    std::size_t in_dim = cfg.input_dim;
    std::size_t expected = 0;
    for (const std::size_t hidden : cfg.hidden_sizes) {
        expected += 4 * (hidden * in_dim + hidden * hidden + hidden);
        in_dim = hidden;
    }
    expected += in_dim + 1;  // dense head
    if (reader.remaining() < expected * 8) {
        throw ModelTruncationError("model file shorter than its header describes");
    }
    if (reader.remaining() > expected * 8) {
        throw ModelFormatError("trailing bytes after parameters");
    }

    in_dim = cfg.input_dim;
    for (const std::size_t hidden : cfg.hidden_sizes) {
        doc.model.layers.push_back(LstmLayerParams::zeros(hidden, in_dim));
        in_dim = hidden;
    }
    doc.model.dense_w.assign(in_dim, 0.0);
    for (const auto& seg : parameter_segments(doc.model)) {
        for (double& v : seg) v = reader.f64();
    }
    return doc;
}

inline void save_model(const std::string& path, const StackedLstmModel& model,
                       std::uint32_t lookback, std::uint32_t horizon) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    const auto bytes = serialize(model, lookback, horizon);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline ModelDocument load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace windcast
