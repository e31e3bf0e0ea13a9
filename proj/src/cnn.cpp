#include "fdms/cnn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "fdms/errors.hpp"
#include "fdms/rng.hpp"

namespace fdms {

// ============================================================================
// Spec validation
// ============================================================================

void ModelSpec::validate_or_throw() const {
    if (in_channels < 1) throw ValidationError("ModelSpec: in_channels must be >= 1");
    if (in_height < 4 || in_width < 4 || in_height % 4 != 0 || in_width % 4 != 0) {
        throw ValidationError("ModelSpec: input height/width must be multiples of 4 (two pools)");
    }
    if (in_height != in_width) {
        throw ValidationError("ModelSpec: input must be square");
    }
    if (n_classes < 2 || n_classes > kNumFaultClasses) {
        throw ValidationError("ModelSpec: n_classes must be in [2, " +
                              std::to_string(kNumFaultClasses) + "], got " +
                              std::to_string(n_classes));
    }
}

void TrainConfig::validate_or_throw() const {
    if (!(learning_rate > 0.0)) throw ValidationError("TrainConfig: learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw ValidationError("TrainConfig: momentum must be in [0, 1)");
    }
    if (batch_size < 1) throw ValidationError("TrainConfig: batch_size must be >= 1");
    if (epochs < 1) throw ValidationError("TrainConfig: epochs must be >= 1");
}

// ============================================================================
// Layer kernels
// ============================================================================

namespace {

// 3x3 convolution, stride 1, zero pad 1. Inner accumulation order is
// ci -> ky -> kx; tests compare against a reference with the same order.
template <typename S>
void conv3x3_forward(const S* in, int ci_n, int h, int w, const S* weights,
                     const S* bias, int co_n, S* out) {
    for (int co = 0; co < co_n; ++co) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                S acc = bias[co];
                for (int ci = 0; ci < ci_n; ++ci) {
                    const S* wch = weights + (static_cast<size_t>(co) * ci_n + ci) * 9;
                    const S* ich = in + static_cast<size_t>(ci) * h * w;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = y + ky - 1;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = x + kx - 1;
                            if (ix < 0 || ix >= w) continue;
                            acc += wch[ky * 3 + kx] * ich[static_cast<size_t>(iy) * w + ix];
                        }
                    }
                }
                out[(static_cast<size_t>(co) * h + y) * w + x] = acc;
            }
        }
    }
}

template <typename S>
void conv3x3_backward_data(const S* dout, int co_n, int h, int w, const S* weights,
                           int ci_n, S* din) {
    for (int ci = 0; ci < ci_n; ++ci) {
        for (int iy = 0; iy < h; ++iy) {
            for (int ix = 0; ix < w; ++ix) {
                S acc{0};
                for (int co = 0; co < co_n; ++co) {
                    const S* wch = weights + (static_cast<size_t>(co) * ci_n + ci) * 9;
                    const S* dch = dout + static_cast<size_t>(co) * h * w;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int oy = iy - ky + 1;
                        if (oy < 0 || oy >= h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ox = ix - kx + 1;
                            if (ox < 0 || ox >= w) continue;
                            acc += wch[ky * 3 + kx] * dch[static_cast<size_t>(oy) * w + ox];
                        }
                    }
                }
                din[(static_cast<size_t>(ci) * h + iy) * w + ix] = acc;
            }
        }
    }
}

template <typename S>
void conv3x3_backward_weights(const S* in, int ci_n, int h, int w, const S* dout,
                              int co_n, S* dw, S* db) {
    for (int co = 0; co < co_n; ++co) {
        const S* dch = dout + static_cast<size_t>(co) * h * w;
        S bacc{0};
        for (int i = 0; i < h * w; ++i) bacc += dch[i];
        db[co] += bacc;
        for (int ci = 0; ci < ci_n; ++ci) {
            const S* ich = in + static_cast<size_t>(ci) * h * w;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    S acc{0};
                    for (int y = 0; y < h; ++y) {
                        const int iy = y + ky - 1;
                        if (iy < 0 || iy >= h) continue;
                        for (int x = 0; x < w; ++x) {
                            const int ix = x + kx - 1;
                            if (ix < 0 || ix >= w) continue;
                            acc += dch[static_cast<size_t>(y) * w + x] *
                                   ich[static_cast<size_t>(iy) * w + ix];
                        }
                    }
                    dw[(static_cast<size_t>(co) * ci_n + ci) * 9 + ky * 3 + kx] += acc;
                }
            }
        }
    }
}

// 2x2 max pool, stride 2. Ties go to the first (row-major lowest-index)
// maximum so the backward routing is deterministic.
template <typename S>
void maxpool2_forward(const S* in, int c_n, int h, int w, S* out, int* argmax) {
    const int oh = h / 2, ow = w / 2;
    for (int c = 0; c < c_n; ++c) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const int by = oy * 2, bx = ox * 2;
                int best_idx = (static_cast<int>((static_cast<size_t>(c) * h + by) * w)) + bx;
                S best = in[best_idx];
                static constexpr int kOff[3][2] = {{0, 1}, {1, 0}, {1, 1}};
                for (const auto& d : kOff) {
                    const int idx =
                        static_cast<int>((static_cast<size_t>(c) * h + by + d[0]) * w) + bx + d[1];
                    if (in[idx] > best) {
                        best = in[idx];
                        best_idx = idx;
                    }
                }
                const size_t o = (static_cast<size_t>(c) * oh + oy) * ow + ox;
                out[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
}

template <typename S>
void relu_forward(const S* in, size_t n, S* out) {
    for (size_t i = 0; i < n; ++i) out[i] = in[i] > S{0} ? in[i] : S{0};
}

template <typename S>
void dense_forward(const S* in, int in_n, const S* weights, const S* bias, int out_n, S* out) {
    for (int o = 0; o < out_n; ++o) {
        S acc = bias[o];
        const S* row = weights + static_cast<size_t>(o) * in_n;
        for (int i = 0; i < in_n; ++i) acc += row[i] * in[i];
        out[o] = acc;
    }
}

// Softmax in double regardless of S, so probabilities sum to 1 tightly.
template <typename S>
std::vector<double> softmax_double(const S* logits, int n) {
    double m = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) m = std::max(m, static_cast<double>(logits[i]));
    std::vector<double> p(static_cast<size_t>(n));
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        p[static_cast<size_t>(i)] = std::exp(static_cast<double>(logits[i]) - m);
        sum += p[static_cast<size_t>(i)];
    }
    for (double& v : p) v /= sum;
    return p;
}

int argmax_index(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
    }
    return best;
}

// Per-sample activation scratch, reused across a batch.
template <typename S>
struct Workspace {
    // forward
    std::vector<S> z1, a1, p1;
    std::vector<int> idx1;
    std::vector<S> z2, a2, p2;
    std::vector<int> idx2;
    std::vector<S> z3, a3, z4;
    // backward
    std::vector<S> dz4, da3, dz3, df, dp2, da2, dz2, dp1, da1, dz1;

    explicit Workspace(const ModelSpec& sp) {
        const int h = sp.in_height, w = sp.in_width;
        const size_t s1 = static_cast<size_t>(ModelSpec::kConv1Out) * h * w;
        const size_t s1p = s1 / 4;
        const size_t s2 = static_cast<size_t>(ModelSpec::kConv2Out) * (h / 2) * (w / 2);
        const size_t s2p = s2 / 4;
        z1.resize(s1);
        a1.resize(s1);
        p1.resize(s1p);
        idx1.resize(s1p);
        z2.resize(s2);
        a2.resize(s2);
        p2.resize(s2p);
        idx2.resize(s2p);
        z3.resize(ModelSpec::kHidden);
        a3.resize(ModelSpec::kHidden);
        z4.resize(static_cast<size_t>(sp.n_classes));
        dz4.resize(z4.size());
        da3.resize(z3.size());
        dz3.resize(z3.size());
        df.resize(s2p);
        dp2.resize(s2p);
        da2.resize(s2);
        dz2.resize(s2);
        dp1.resize(s1p);
        da1.resize(s1);
        dz1.resize(s1);
    }
};

// Runs the stack up to the logits; returns softmax probabilities.
template <typename S>
std::vector<double> forward_into(const ModelT<S>& m, std::span<const S> input,
                                 Workspace<S>& ws) {
    const ModelSpec& sp = m.spec;
    const int h = sp.in_height, w = sp.in_width;
    conv3x3_forward(input.data(), sp.in_channels, h, w, m.conv1_w.values.data(),
                    m.conv1_b.values.data(), ModelSpec::kConv1Out, ws.z1.data());
    relu_forward(ws.z1.data(), ws.z1.size(), ws.a1.data());
    maxpool2_forward(ws.a1.data(), ModelSpec::kConv1Out, h, w, ws.p1.data(), ws.idx1.data());
    conv3x3_forward(ws.p1.data(), ModelSpec::kConv1Out, h / 2, w / 2, m.conv2_w.values.data(),
                    m.conv2_b.values.data(), ModelSpec::kConv2Out, ws.z2.data());
    relu_forward(ws.z2.data(), ws.z2.size(), ws.a2.data());
    maxpool2_forward(ws.a2.data(), ModelSpec::kConv2Out, h / 2, w / 2, ws.p2.data(),
                     ws.idx2.data());
    dense_forward(ws.p2.data(), sp.flat_dim(), m.fc1_w.values.data(), m.fc1_b.values.data(),
                  ModelSpec::kHidden, ws.z3.data());
    relu_forward(ws.z3.data(), ws.z3.size(), ws.a3.data());
    dense_forward(ws.a3.data(), ModelSpec::kHidden, m.fc2_w.values.data(),
                  m.fc2_b.values.data(), sp.n_classes, ws.z4.data());
    return softmax_double(ws.z4.data(), sp.n_classes);
}

template <typename S>
void check_input_size(const ModelSpec& sp, size_t got) {
    const size_t want = static_cast<size_t>(sp.in_channels) * sp.in_height * sp.in_width;
    if (got != want) {
        throw ValidationError("cnn: input size " + std::to_string(got) +
                              " does not match model input " + std::to_string(want));
    }
}

template <typename S>
std::vector<TensorT<S>> zero_like_params(const ModelT<S>& m) {
    std::vector<TensorT<S>> out;
    for (const TensorT<S>* p : m.params()) out.push_back(TensorT<S>::zeros(p->shape));
    return out;
}

} // namespace

// ============================================================================
// Model initialization and inference
// ============================================================================

template <typename S>
ModelT<S> init_model(const ModelSpec& spec, uint64_t seed) {
    spec.validate_or_throw();
    ModelT<S> m;
    m.spec = spec;
    m.seed = seed;
    m.class_codes.resize(static_cast<size_t>(spec.n_classes));
    for (int i = 0; i < spec.n_classes; ++i) {
        m.class_codes[static_cast<size_t>(i)] = static_cast<FaultClass>(i);
    }

    m.conv1_w = TensorT<S>::zeros({ModelSpec::kConv1Out, spec.in_channels, 3, 3});
    m.conv1_b = TensorT<S>::zeros({ModelSpec::kConv1Out});
    m.conv2_w = TensorT<S>::zeros({ModelSpec::kConv2Out, ModelSpec::kConv1Out, 3, 3});
    m.conv2_b = TensorT<S>::zeros({ModelSpec::kConv2Out});
    m.fc1_w = TensorT<S>::zeros({ModelSpec::kHidden, spec.flat_dim()});
    m.fc1_b = TensorT<S>::zeros({ModelSpec::kHidden});
    m.fc2_w = TensorT<S>::zeros({spec.n_classes, ModelSpec::kHidden});
    m.fc2_b = TensorT<S>::zeros({spec.n_classes});

    Rng rng(seed);
    const auto fill = [&rng](TensorT<S>& t, int fan_in) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (S& v : t.values) v = static_cast<S>(rng.uniform(-bound, bound));
    };
    fill(m.conv1_w, spec.in_channels * 9);
    fill(m.conv2_w, ModelSpec::kConv1Out * 9);
    fill(m.fc1_w, spec.flat_dim());
    fill(m.fc2_w, ModelSpec::kHidden);
    return m;
}

template <typename S>
ClassScores forward(const ModelT<S>& model, std::span<const S> input) {
    check_input_size<S>(model.spec, input.size());
    Workspace<S> ws(model.spec);
    ClassScores out;
    out.probs = forward_into(model, input, ws);
    return out;
}

// ============================================================================
// Loss, gradients, optimizer
// ============================================================================

template <typename S>
LossAndGrads<S> loss_and_grads(const ModelT<S>& model, const DatasetT<S>& data,
                               std::span<const size_t> batch_indices) {
    if (batch_indices.empty()) throw ValidationError("loss_and_grads: empty batch");
    if (data.inputs.size() != data.labels.size()) {
        throw ValidationError("loss_and_grads: inputs/labels size mismatch");
    }
    const ModelSpec& sp = model.spec;
    for (size_t i : batch_indices) {
        if (i >= data.size()) throw ValidationError("loss_and_grads: batch index out of range");
        check_input_size<S>(sp, data.inputs[i].size());
        const int label = data.labels[i];
        if (label < 0 || label >= sp.n_classes) {
            throw ValidationError("loss_and_grads: label " + std::to_string(label) +
                                  " out of range for " + std::to_string(sp.n_classes) +
                                  " classes");
        }
    }

    LossAndGrads<S> out;
    out.grads.tensors = zero_like_params(model);
    TensorT<S>& g_c1w = out.grads.tensors[0];
    TensorT<S>& g_c1b = out.grads.tensors[1];
    TensorT<S>& g_c2w = out.grads.tensors[2];
    TensorT<S>& g_c2b = out.grads.tensors[3];
    TensorT<S>& g_f1w = out.grads.tensors[4];
    TensorT<S>& g_f1b = out.grads.tensors[5];
    TensorT<S>& g_f2w = out.grads.tensors[6];
    TensorT<S>& g_f2b = out.grads.tensors[7];

    Workspace<S> ws(sp);
    const int h = sp.in_height, w = sp.in_width;
    const double inv_batch = 1.0 / static_cast<double>(batch_indices.size());
    double loss_sum = 0.0;

    for (size_t i : batch_indices) {
        const std::vector<S>& input = data.inputs[i];
        const int label = data.labels[i];
        const std::vector<double> probs = forward_into(model, std::span<const S>(input), ws);
        loss_sum += -std::log(std::max(probs[static_cast<size_t>(label)], 1e-300));
        if (argmax_index(probs) == label) ++out.correct;

        // d(mean CE)/d(logit_k) = (p_k - [k == label]) / batch
        for (int k = 0; k < sp.n_classes; ++k) {
            const double y = (k == label) ? 1.0 : 0.0;
            ws.dz4[static_cast<size_t>(k)] =
                static_cast<S>((probs[static_cast<size_t>(k)] - y) * inv_batch);
        }

        // fc2
        for (int o = 0; o < sp.n_classes; ++o) {
            const S d = ws.dz4[static_cast<size_t>(o)];
            S* grow = g_f2w.values.data() + static_cast<size_t>(o) * ModelSpec::kHidden;
            for (int j = 0; j < ModelSpec::kHidden; ++j) grow[j] += d * ws.a3[static_cast<size_t>(j)];
            g_f2b.values[static_cast<size_t>(o)] += d;
        }
        for (int j = 0; j < ModelSpec::kHidden; ++j) {
            S acc{0};
            for (int o = 0; o < sp.n_classes; ++o) {
                acc += model.fc2_w.values[static_cast<size_t>(o) * ModelSpec::kHidden + j] *
                       ws.dz4[static_cast<size_t>(o)];
            }
            ws.da3[static_cast<size_t>(j)] = acc;
        }
        for (int j = 0; j < ModelSpec::kHidden; ++j) {
            ws.dz3[static_cast<size_t>(j)] =
                ws.z3[static_cast<size_t>(j)] > S{0} ? ws.da3[static_cast<size_t>(j)] : S{0};
        }

        // fc1
        const int flat = sp.flat_dim();
        for (int o = 0; o < ModelSpec::kHidden; ++o) {
            const S d = ws.dz3[static_cast<size_t>(o)];
            if (d != S{0}) {
                S* grow = g_f1w.values.data() + static_cast<size_t>(o) * flat;
                for (int j = 0; j < flat; ++j) grow[j] += d * ws.p2[static_cast<size_t>(j)];
            }
            g_f1b.values[static_cast<size_t>(o)] += d;
        }
        for (int j = 0; j < flat; ++j) {
            S acc{0};
            for (int o = 0; o < ModelSpec::kHidden; ++o) {
                acc += model.fc1_w.values[static_cast<size_t>(o) * flat + j] *
                       ws.dz3[static_cast<size_t>(o)];
            }
            ws.df[static_cast<size_t>(j)] = acc;
        }

        // unpool 2 + relu 2
        std::fill(ws.da2.begin(), ws.da2.end(), S{0});
        for (size_t j = 0; j < ws.df.size(); ++j) ws.da2[static_cast<size_t>(ws.idx2[j])] += ws.df[j];
        for (size_t j = 0; j < ws.dz2.size(); ++j) {
            ws.dz2[j] = ws.z2[j] > S{0} ? ws.da2[j] : S{0};
        }

        // conv2
        conv3x3_backward_weights(ws.p1.data(), ModelSpec::kConv1Out, h / 2, w / 2, ws.dz2.data(),
                                 ModelSpec::kConv2Out, g_c2w.values.data(), g_c2b.values.data());
        conv3x3_backward_data(ws.dz2.data(), ModelSpec::kConv2Out, h / 2, w / 2,
                              model.conv2_w.values.data(), ModelSpec::kConv1Out, ws.dp1.data());

        // unpool 1 + relu 1
        std::fill(ws.da1.begin(), ws.da1.end(), S{0});
        for (size_t j = 0; j < ws.dp1.size(); ++j) ws.da1[static_cast<size_t>(ws.idx1[j])] += ws.dp1[j];
        for (size_t j = 0; j < ws.dz1.size(); ++j) {
            ws.dz1[j] = ws.z1[j] > S{0} ? ws.da1[j] : S{0};
        }

        // conv1
        conv3x3_backward_weights(input.data(), sp.in_channels, h, w, ws.dz1.data(),
                                 ModelSpec::kConv1Out, g_c1w.values.data(), g_c1b.values.data());
    }

    out.loss = loss_sum * inv_batch;
    return out;
}

template <typename S>
void sgd_step(ModelT<S>& model, const GradsT<S>& grads, const TrainConfig& cfg,
              SgdStateT<S>& state) {
    cfg.validate_or_throw();
    auto params = model.params();
    if (grads.tensors.size() != params.size()) {
        throw ValidationError("sgd_step: gradient tensor count mismatch");
    }
    if (state.velocity.empty()) {
        for (const TensorT<S>* p : params) state.velocity.push_back(TensorT<S>::zeros(p->shape));
    }
    if (state.velocity.size() != params.size()) {
        throw ValidationError("sgd_step: velocity tensor count mismatch");
    }
    for (size_t t = 0; t < params.size(); ++t) {
        TensorT<S>& p = *params[t];
        const TensorT<S>& g = grads.tensors[t];
        TensorT<S>& v = state.velocity[t];
        if (g.shape != p.shape || v.shape != p.shape) {
            throw ValidationError("sgd_step: tensor shape mismatch at parameter " +
                                  std::to_string(t));
        }
        const S mu = static_cast<S>(cfg.momentum);
        const S lr = static_cast<S>(cfg.learning_rate);
        for (size_t i = 0; i < p.values.size(); ++i) {
            v.values[i] = mu * v.values[i] - lr * g.values[i];
            p.values[i] += v.values[i];
        }
    }
}

// ============================================================================
// Training loop and evaluation
// ============================================================================

template <typename S>
std::pair<double, double> evaluate_loss(const ModelT<S>& model, const DatasetT<S>& data) {
    if (data.size() == 0) throw ValidationError("evaluate_loss: empty dataset");
    Workspace<S> ws(model.spec);
    double loss_sum = 0.0;
    size_t correct = 0;
    for (size_t i = 0; i < data.size(); ++i) {
        check_input_size<S>(model.spec, data.inputs[i].size());
        const std::vector<double> probs =
            forward_into(model, std::span<const S>(data.inputs[i]), ws);
        loss_sum += -std::log(std::max(probs[static_cast<size_t>(data.labels[i])], 1e-300));
        if (argmax_index(probs) == data.labels[i]) ++correct;
    }
    return {loss_sum / static_cast<double>(data.size()),
            static_cast<double>(correct) / static_cast<double>(data.size())};
}

template <typename S>
TrainResultT<S> train(const ModelT<S>& model, const DatasetT<S>& train_set,
                      const DatasetT<S>& val_set, const TrainConfig& cfg) {
    cfg.validate_or_throw();
    if (train_set.size() == 0 || val_set.size() == 0) {
        throw ValidationError("train: datasets must be non-empty");
    }
    if (train_set.inputs.size() != train_set.labels.size() ||
        val_set.inputs.size() != val_set.labels.size()) {
        throw ValidationError("train: inputs/labels size mismatch");
    }

    TrainResultT<S> result;
    ModelT<S> current = model;
    SgdStateT<S> state;
    Rng rng(cfg.seed);

    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    double best_acc = -1.0;
    double best_loss = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = order.size() - 1; i > 0; --i) {
            const size_t j = rng.below(i + 1);
            std::swap(order[i], order[j]);
        }

        double loss_weighted = 0.0;
        size_t correct = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            const std::span<const size_t> batch(order.data() + start, end - start);
            LossAndGrads<S> lg = loss_and_grads(current, train_set, batch);
            loss_weighted += lg.loss * static_cast<double>(batch.size());
            correct += lg.correct;
            sgd_step(current, lg.grads, cfg, state);
        }

        EpochStats stats;
        stats.train_loss = loss_weighted / static_cast<double>(train_set.size());
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
        const auto [vl, va] = evaluate_loss(current, val_set);
        stats.val_loss = vl;
        stats.val_acc = va;
        result.history.push_back(stats);

        if (va > best_acc || (va == best_acc && vl < best_loss)) {
            best_acc = va;
            best_loss = vl;
            result.model = current;
            result.best_epoch = epoch;
        }
    }
    return result;
}

template <typename S>
EvalReport evaluate(const ModelT<S>& model, const DatasetT<S>& data) {
    if (data.size() == 0) throw ValidationError("evaluate: empty dataset");
    Workspace<S> ws(model.spec);
    std::vector<int> preds(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        check_input_size<S>(model.spec, data.inputs[i].size());
        const std::vector<double> probs =
            forward_into(model, std::span<const S>(data.inputs[i]), ws);
        preds[i] = argmax_index(probs);
    }
    return evaluate_predictions(preds, data.labels, model.spec.n_classes);
}

EvalReport evaluate_predictions(std::span<const int> preds, std::span<const int> labels,
                                int n_classes) {
    if (preds.size() != labels.size()) {
        throw ValidationError("evaluate_predictions: preds/labels size mismatch");
    }
    if (preds.empty()) throw ValidationError("evaluate_predictions: empty input");
    if (n_classes < 1) throw ValidationError("evaluate_predictions: n_classes must be >= 1");

    EvalReport r;
    r.n_classes = n_classes;
    r.total = preds.size();
    r.confusion.assign(static_cast<size_t>(n_classes) * n_classes, 0);
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || preds[i] >= n_classes || labels[i] < 0 || labels[i] >= n_classes) {
            throw ValidationError("evaluate_predictions: class index out of range at sample " +
                                  std::to_string(i));
        }
        ++r.confusion[static_cast<size_t>(labels[i]) * n_classes + preds[i]];
    }

    int64_t trace = 0;
    r.precision.assign(static_cast<size_t>(n_classes), 0.0);
    r.recall.assign(static_cast<size_t>(n_classes), 0.0);
    r.f1.assign(static_cast<size_t>(n_classes), 0.0);
    double f1_sum = 0.0;
    for (int c = 0; c < n_classes; ++c) {
        const int64_t tp = r.confusion_at(c, c);
        trace += tp;
        int64_t row = 0, col = 0;
        for (int k = 0; k < n_classes; ++k) {
            row += r.confusion_at(c, k);
            col += r.confusion_at(k, c);
        }
        const double prec = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
        const double rec = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
        r.precision[static_cast<size_t>(c)] = prec;
        r.recall[static_cast<size_t>(c)] = rec;
        const double f1 = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        r.f1[static_cast<size_t>(c)] = f1;
        f1_sum += f1;
    }
    r.accuracy = static_cast<double>(trace) / static_cast<double>(r.total);
    r.macro_f1 = f1_sum / static_cast<double>(n_classes);
    return r;
}

template <typename S>
void conv3x3_apply(std::span<const S> input, int in_channels, int height, int width,
                   std::span<const S> weights, std::span<const S> bias, int out_channels,
                   std::span<S> output) {
    if (in_channels < 1 || height < 1 || width < 1 || out_channels < 1) {
        throw ValidationError("conv3x3_apply: dimensions must be positive");
    }
    const size_t plane = static_cast<size_t>(height) * width;
    if (input.size() != plane * in_channels) {
        throw ValidationError("conv3x3_apply: input size mismatch");
    }
    if (weights.size() != static_cast<size_t>(out_channels) * in_channels * 9) {
        throw ValidationError("conv3x3_apply: weight size mismatch");
    }
    if (bias.size() != static_cast<size_t>(out_channels)) {
        throw ValidationError("conv3x3_apply: bias size mismatch");
    }
    if (output.size() != plane * out_channels) {
        throw ValidationError("conv3x3_apply: output size mismatch");
    }
    conv3x3_forward(input.data(), in_channels, height, width, weights.data(), bias.data(),
                    out_channels, output.data());
}

// ============================================================================
// Serialization
// ============================================================================

uint32_t crc32(std::span<const unsigned char> bytes) {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t c = 0xFFFFFFFFu;
    for (unsigned char b : bytes) c = table[(c ^ b) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

namespace {

constexpr char kMagic[4] = {'F', 'D', 'M', 'S'};
constexpr uint32_t kFormatVersion = 1;

void append_u32(std::vector<unsigned char>& b, uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
}

void append_u64(std::vector<unsigned char>& b, uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
}

void append_f32(std::vector<unsigned char>& b, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    append_u32(b, u);
}

struct Cursor {
    std::span<const unsigned char> bytes;
    size_t off = 0;

    void need(size_t n, const char* what) const {
        if (off + n > bytes.size()) {
            throw FormatError("model file truncated at offset " + std::to_string(bytes.size()) +
                              " (while reading " + what + " at offset " + std::to_string(off) +
                              ")");
        }
    }
    uint32_t read_u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[off + i]) << (8 * i);
        off += 4;
        return v;
    }
    uint64_t read_u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[off + i]) << (8 * i);
        off += 8;
        return v;
    }
    float read_f32(const char* what) {
        const uint32_t u = read_u32(what);
        float f;
        std::memcpy(&f, &u, 4);
        return f;
    }
};

void expect_shape(const TensorT<float>& t, const std::vector<int>& shape, const char* name,
                  size_t offset) {
    if (t.shape != shape) {
        throw FormatError(std::string("model file: unexpected shape for ") + name +
                          " tensor at offset " + std::to_string(offset));
    }
}

} // namespace

void save_model(const Model& model, const std::string& path) {
    model.spec.validate_or_throw();
    if (model.class_codes.size() != static_cast<size_t>(model.spec.n_classes)) {
        throw ValidationError("save_model: class_codes count mismatch");
    }
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    append_u32(buf, kFormatVersion);
    append_u64(buf, model.seed);
    append_u32(buf, static_cast<uint32_t>(model.spec.n_classes));
    for (FaultClass c : model.class_codes) append_u32(buf, static_cast<uint32_t>(c));
    const auto params = model.params();
    append_u32(buf, static_cast<uint32_t>(params.size()));
    for (const TensorT<float>* t : params) {
        append_u32(buf, static_cast<uint32_t>(t->shape.size()));
        for (int d : t->shape) append_u32(buf, static_cast<uint32_t>(d));
        for (float v : t->values) append_f32(buf, v);
    }
    append_u32(buf, crc32(std::span<const unsigned char>(buf.data(), buf.size())));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_model: cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());

    Cursor cur{std::span<const unsigned char>(bytes.data(), bytes.size())};
    cur.need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("model file: bad magic at offset 0");
    }
    cur.off = 4;
    const uint32_t version = cur.read_u32("format version");
    if (version != kFormatVersion) {
        throw FormatError("model file: unsupported format version " + std::to_string(version) +
                          " at offset 4");
    }
    const uint64_t seed = cur.read_u64("seed");
    const size_t n_classes_off = cur.off;
    const uint32_t n_classes = cur.read_u32("class count");
    if (n_classes < 2 || n_classes > static_cast<uint32_t>(kNumFaultClasses)) {
        throw FormatError("model file: invalid class count " + std::to_string(n_classes) +
                          " at offset " + std::to_string(n_classes_off));
    }
    std::vector<FaultClass> codes;
    for (uint32_t i = 0; i < n_classes; ++i) {
        const size_t code_off = cur.off;
        const uint32_t code = cur.read_u32("class code");
        if (code >= static_cast<uint32_t>(kNumFaultClasses)) {
            throw FormatError("model file: invalid class code " + std::to_string(code) +
                              " at offset " + std::to_string(code_off));
        }
        codes.push_back(static_cast<FaultClass>(code));
    }
    const size_t count_off = cur.off;
    const uint32_t tensor_count = cur.read_u32("tensor count");
    if (tensor_count != 8) {
        throw FormatError("model file: expected 8 parameter tensors, got " +
                          std::to_string(tensor_count) + " at offset " +
                          std::to_string(count_off));
    }

    std::vector<TensorT<float>> tensors;
    std::vector<size_t> tensor_offsets;
    for (uint32_t t = 0; t < tensor_count; ++t) {
        tensor_offsets.push_back(cur.off);
        const size_t rank_off = cur.off;
        const uint32_t rank = cur.read_u32("tensor rank");
        if (rank < 1 || rank > 4) {
            throw FormatError("model file: invalid tensor rank " + std::to_string(rank) +
                              " at offset " + std::to_string(rank_off));
        }
        TensorT<float> tensor;
        size_t n = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            const size_t dim_off = cur.off;
            const uint32_t dim = cur.read_u32("tensor dimension");
            if (dim == 0 || dim > (1u << 24)) {
                throw FormatError("model file: invalid tensor dimension " + std::to_string(dim) +
                                  " at offset " + std::to_string(dim_off));
            }
            tensor.shape.push_back(static_cast<int>(dim));
            n *= dim;
            if (n > (1u << 26)) {
                throw FormatError("model file: tensor too large at offset " +
                                  std::to_string(rank_off));
            }
        }
        tensor.values.resize(n);
        for (size_t i = 0; i < n; ++i) tensor.values[i] = cur.read_f32("tensor payload");
        tensors.push_back(std::move(tensor));
    }

    const size_t crc_off = cur.off;
    const uint32_t stored_crc = cur.read_u32("checksum");
    if (cur.off != bytes.size()) {
        throw FormatError("model file: trailing bytes at offset " + std::to_string(cur.off));
    }
    const uint32_t computed = crc32(std::span<const unsigned char>(bytes.data(), crc_off));
    if (stored_crc != computed) {
        throw FormatError("model file: checksum mismatch at offset " + std::to_string(crc_off));
    }

    // Rebuild the spec from tensor shapes and check architecture consistency.
    if (tensors[0].shape.size() != 4 || tensors[0].shape[0] != ModelSpec::kConv1Out ||
        tensors[0].shape[2] != 3 || tensors[0].shape[3] != 3) {
        throw FormatError("model file: unexpected shape for conv1 weights at offset " +
                          std::to_string(tensor_offsets[0]));
    }
    const int in_channels = tensors[0].shape[1];
    if (tensors[4].shape.size() != 2 || tensors[4].shape[0] != ModelSpec::kHidden) {
        throw FormatError("model file: unexpected shape for dense1 weights at offset " +
                          std::to_string(tensor_offsets[4]));
    }
    const int flat = tensors[4].shape[1];
    if (flat % ModelSpec::kConv2Out != 0) {
        throw FormatError("model file: dense1 width inconsistent with conv stack at offset " +
                          std::to_string(tensor_offsets[4]));
    }
    const int cells = flat / ModelSpec::kConv2Out;
    const int quarter = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cells))));
    if (quarter * quarter != cells || quarter < 1) {
        throw FormatError("model file: dense1 width implies non-square input at offset " +
                          std::to_string(tensor_offsets[4]));
    }

    Model m;
    m.spec.in_channels = in_channels;
    m.spec.in_height = quarter * 4;
    m.spec.in_width = quarter * 4;
    m.spec.n_classes = static_cast<int>(n_classes);
    m.spec.validate_or_throw();
    m.seed = seed;
    m.class_codes = std::move(codes);

    m.conv1_w = std::move(tensors[0]);
    m.conv1_b = std::move(tensors[1]);
    m.conv2_w = std::move(tensors[2]);
    m.conv2_b = std::move(tensors[3]);
    m.fc1_w = std::move(tensors[4]);
    m.fc1_b = std::move(tensors[5]);
    m.fc2_w = std::move(tensors[6]);
    m.fc2_b = std::move(tensors[7]);

    expect_shape(m.conv1_b, {ModelSpec::kConv1Out}, "conv1 bias", tensor_offsets[1]);
    expect_shape(m.conv2_w, {ModelSpec::kConv2Out, ModelSpec::kConv1Out, 3, 3}, "conv2 weights",
                 tensor_offsets[2]);
    expect_shape(m.conv2_b, {ModelSpec::kConv2Out}, "conv2 bias", tensor_offsets[3]);
    expect_shape(m.fc1_w, {ModelSpec::kHidden, m.spec.flat_dim()}, "dense1 weights",
                 tensor_offsets[4]);
    expect_shape(m.fc1_b, {ModelSpec::kHidden}, "dense1 bias", tensor_offsets[5]);
    expect_shape(m.fc2_w, {m.spec.n_classes, ModelSpec::kHidden}, "dense2 weights",
                 tensor_offsets[6]);
    expect_shape(m.fc2_b, {m.spec.n_classes}, "dense2 bias", tensor_offsets[7]);

    for (const TensorT<float>* t : m.params()) {
        for (float v : t->values) {
            if (!std::isfinite(v)) throw FormatError("model file: non-finite parameter value");
        }
    }
    return m;
}

uint64_t model_param_hash(const Model& model) {
    uint64_t h = 14695981039346656037ULL;
    const auto mix = [&h](unsigned char b) {
        h ^= b;
        h *= 1099511628211ULL;
    };
    for (const TensorT<float>* t : model.params()) {
        for (float v : t->values) {
            uint32_t u;
            std::memcpy(&u, &v, 4);
            for (int i = 0; i < 4; ++i) mix(static_cast<unsigned char>((u >> (8 * i)) & 0xFFu));
        }
    }
    return h;
}

// ============================================================================
// Explicit instantiations
// ============================================================================

template struct ModelT<float>;
template struct ModelT<double>;
template ModelT<float> init_model<float>(const ModelSpec&, uint64_t);
template ModelT<double> init_model<double>(const ModelSpec&, uint64_t);
template ClassScores forward<float>(const ModelT<float>&, std::span<const float>);
template ClassScores forward<double>(const ModelT<double>&, std::span<const double>);
template LossAndGrads<float> loss_and_grads<float>(const ModelT<float>&, const DatasetT<float>&,
                                                   std::span<const size_t>);
template LossAndGrads<double> loss_and_grads<double>(const ModelT<double>&,
                                                     const DatasetT<double>&,
                                                     std::span<const size_t>);
template void sgd_step<float>(ModelT<float>&, const GradsT<float>&, const TrainConfig&,
                              SgdStateT<float>&);
template void sgd_step<double>(ModelT<double>&, const GradsT<double>&, const TrainConfig&,
                               SgdStateT<double>&);
template std::pair<double, double> evaluate_loss<float>(const ModelT<float>&,
                                                        const DatasetT<float>&);
template std::pair<double, double> evaluate_loss<double>(const ModelT<double>&,
                                                         const DatasetT<double>&);
template TrainResultT<float> train<float>(const ModelT<float>&, const DatasetT<float>&,
                                          const DatasetT<float>&, const TrainConfig&);
template TrainResultT<double> train<double>(const ModelT<double>&, const DatasetT<double>&,
                                            const DatasetT<double>&, const TrainConfig&);
template EvalReport evaluate<float>(const ModelT<float>&, const DatasetT<float>&);
template EvalReport evaluate<double>(const ModelT<double>&, const DatasetT<double>&);
template void conv3x3_apply<float>(std::span<const float>, int, int, int, std::span<const float>,
                                   std::span<const float>, int, std::span<float>);
template void conv3x3_apply<double>(std::span<const double>, int, int, int,
                                    std::span<const double>, std::span<const double>, int,
                                    std::span<double>);

} // namespace fdms
