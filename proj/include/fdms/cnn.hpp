#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fdms/dsp.hpp"
#include "fdms/signal_core.hpp"

namespace fdms {

// ============================================================================
// Tensors and model description
// ============================================================================

template <typename S>
struct TensorT {
    std::vector<S> values;
    std::vector<int> shape;

    size_t size() const { return values.size(); }

    static TensorT zeros(std::vector<int> shape) {
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        TensorT t;
        t.shape = std::move(shape);
        t.values.assign(n, S{0});
        return t;
    }
};

// Fixed architecture: Conv(3x3, 8, stride 1, pad 1) - ReLU - MaxPool(2) -
// Conv(3x3, 16, stride 1, pad 1) - ReLU - MaxPool(2) - Flatten - Dense(64) -
// ReLU - Dense(n_classes) - Softmax. Only the input shape and class count
// vary; height/width must be divisible by 4 (two pooling stages).
struct ModelSpec {
    int in_channels = 1;
    int in_height = kTensorEdge;
    int in_width = kTensorEdge;
    int n_classes = 2;

    static constexpr int kConv1Out = 8;
    static constexpr int kConv2Out = 16;
    static constexpr int kHidden = 64;

    int flat_dim() const { return kConv2Out * (in_height / 4) * (in_width / 4); }
    void validate_or_throw() const;
};

// class_codes gives the label meaning of each output index; defaults to
// 0..n_classes-1 until a dataset binds real fault codes.
template <typename S>
struct ModelT {
    ModelSpec spec;
    uint64_t seed = 0;
    std::vector<FaultClass> class_codes;

    TensorT<S> conv1_w, conv1_b;
    TensorT<S> conv2_w, conv2_b;
    TensorT<S> fc1_w, fc1_b;
    TensorT<S> fc2_w, fc2_b;

    std::vector<TensorT<S>*> params() {
        return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b};
    }
    std::vector<const TensorT<S>*> params() const {
        return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b};
    }
};

using Model = ModelT<float>;

// ============================================================================
// Training and evaluation types
// ============================================================================

struct ClassScores {
    std::vector<double> probs;
    Modality modality = Modality::Acoustic;
};

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    int batch_size = 16;
    int epochs = 30;
    uint64_t seed = 0;
    void validate_or_throw() const;
};

template <typename S>
struct DatasetT {
    std::vector<std::vector<S>> inputs;  // each of length C*H*W
    std::vector<int> labels;             // indices into the model's class list
    size_t size() const { return inputs.size(); }
};
using Dataset = DatasetT<float>;

template <typename S>
struct GradsT {
    std::vector<TensorT<S>> tensors;  // same order as ModelT::params()
};

template <typename S>
struct SgdStateT {
    std::vector<TensorT<S>> velocity;  // same order as ModelT::params()
};

struct EpochStats {
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

template <typename S>
struct TrainResultT {
    ModelT<S> model;  // best-validation-accuracy snapshot
    std::vector<EpochStats> history;
    int best_epoch = 0;
};
using TrainResult = TrainResultT<float>;

struct EvalReport {
    int n_classes = 0;
    size_t total = 0;
    double accuracy = 0.0;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    std::vector<int64_t> confusion;  // row-major [n_classes x n_classes], row = truth
    double macro_f1 = 0.0;

    int64_t confusion_at(int truth, int pred) const {
        return confusion[static_cast<size_t>(truth) * n_classes + pred];
    }
};

// ============================================================================
// Operations
// ============================================================================

// He-uniform weights (|w| <= sqrt(6/fan_in)) drawn from Rng(seed) in fixed
// parameter order; biases zero. Same seed gives bit-identical parameters.
template <typename S>
ModelT<S> init_model(const ModelSpec& spec, uint64_t seed);

// Softmax probabilities (computed in double). Throws on input size mismatch.
template <typename S>
ClassScores forward(const ModelT<S>& model, std::span<const S> input);

// Mean cross-entropy over the batch plus backprop gradients for every
// parameter. `correct` counts argmax hits, for running train accuracy.
template <typename S>
struct LossAndGrads {
    double loss = 0.0;
    size_t correct = 0;
    GradsT<S> grads;
};
template <typename S>
LossAndGrads<S> loss_and_grads(const ModelT<S>& model, const DatasetT<S>& data,
                               std::span<const size_t> batch_indices);

// Classic momentum update: v <- mu*v - lr*g; p <- p + v. Velocity lives in
// `state` across calls; an empty state is initialized to zeros.
template <typename S>
void sgd_step(ModelT<S>& model, const GradsT<S>& grads, const TrainConfig& cfg,
              SgdStateT<S>& state);

// Mean cross-entropy and accuracy without gradients.
template <typename S>
std::pair<double, double> evaluate_loss(const ModelT<S>& model, const DatasetT<S>& data);

// Full training loop: seeded shuffling, mini-batches, per-epoch validation;
// returns the best-validation-accuracy snapshot and the complete history.
template <typename S>
TrainResultT<S> train(const ModelT<S>& model, const DatasetT<S>& train_set,
                      const DatasetT<S>& val_set, const TrainConfig& cfg);

// Argmax predictions scored against labels.
template <typename S>
EvalReport evaluate(const ModelT<S>& model, const DatasetT<S>& data);

// Metric computation from already-made predictions (also used for fused
// decisions). Zero-denominator precision/recall/F1 conventions: 0.
EvalReport evaluate_predictions(std::span<const int> preds, std::span<const int> labels,
                                int n_classes);

// The raw convolution kernel behind both conv layers (3x3, stride 1, zero
// pad 1): input [ci x h x w], weights [co x ci x 3 x 3], bias [co], output
// [co x h x w]. Accumulation starts at the bias and runs input channel, then
// kernel row, then kernel column; callers relying on exact arithmetic (for
// cross-checking) get that order. Throws on any size mismatch.
template <typename S>
void conv3x3_apply(std::span<const S> input, int in_channels, int height, int width,
                   std::span<const S> weights, std::span<const S> bias, int out_channels,
                   std::span<S> output);

// ============================================================================
// Serialization
// ============================================================================

// Binary model format, little-endian: magic "FDMS", format version u32 = 1,
// seed u64, n_classes u32, class codes (u32 each), tensor count u32, then per
// tensor: rank u32, dims u32 each, float32 payload; trailing CRC32 (IEEE) of
// all preceding bytes. Errors carry the byte offset of the fault.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

// FNV-1a 64-bit over the little-endian parameter payload, in params() order.
uint64_t model_param_hash(const Model& model);

// CRC32 (IEEE 802.3, reflected, init/xorout 0xFFFFFFFF).
uint32_t crc32(std::span<const unsigned char> bytes);

extern template struct ModelT<float>;
extern template struct ModelT<double>;
extern template ModelT<float> init_model<float>(const ModelSpec&, uint64_t);
extern template ModelT<double> init_model<double>(const ModelSpec&, uint64_t);
extern template ClassScores forward<float>(const ModelT<float>&, std::span<const float>);
extern template ClassScores forward<double>(const ModelT<double>&, std::span<const double>);
extern template LossAndGrads<float> loss_and_grads<float>(const ModelT<float>&,
                                                          const DatasetT<float>&,
                                                          std::span<const size_t>);
extern template LossAndGrads<double> loss_and_grads<double>(const ModelT<double>&,
                                                            const DatasetT<double>&,
                                                            std::span<const size_t>);
extern template void sgd_step<float>(ModelT<float>&, const GradsT<float>&, const TrainConfig&,
                                     SgdStateT<float>&);
extern template void sgd_step<double>(ModelT<double>&, const GradsT<double>&,
                                      const TrainConfig&, SgdStateT<double>&);
extern template std::pair<double, double> evaluate_loss<float>(const ModelT<float>&,
                                                               const DatasetT<float>&);
extern template std::pair<double, double> evaluate_loss<double>(const ModelT<double>&,
                                                                const DatasetT<double>&);
extern template TrainResultT<float> train<float>(const ModelT<float>&, const DatasetT<float>&,
                                                 const DatasetT<float>&, const TrainConfig&);
extern template TrainResultT<double> train<double>(const ModelT<double>&,
                                                   const DatasetT<double>&,
                                                   const DatasetT<double>&, const TrainConfig&);
extern template EvalReport evaluate<float>(const ModelT<float>&, const DatasetT<float>&);
extern template EvalReport evaluate<double>(const ModelT<double>&, const DatasetT<double>&);
extern template void conv3x3_apply<float>(std::span<const float>, int, int, int,
                                          std::span<const float>, std::span<const float>, int,
                                          std::span<float>);
extern template void conv3x3_apply<double>(std::span<const double>, int, int, int,
                                           std::span<const double>, std::span<const double>, int,
                                           std::span<double>);

} // namespace fdms
