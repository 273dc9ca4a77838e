#pragma once

// Three-output feed-forward head over the concatenated input [embedding, scores].
//
//   hidden = relu(W_h [x; s] + b_h)           H units, shared by EXPR and AU
//   p_expr = softmax(W_e hidden + b_e)        8 classes
//   p_au   = sigmoid(W_a hidden + b_a)        12 action units
//   p_va   = tanh(W_v s + b_v)                valence, arousal
//
// The VA layer only sees the 10 trailing inputs (the backbone scores s), so
// VA predictions do not depend on the embedding.
//
// Training minimizes
//
//   lambda_expr * CE_w + lambda_va * (1 - (CCC_v + CCC_a) / 2) + lambda_au * BCE_w
//
// where CE_w is class-weighted cross-entropy normalized by the summed
// weights of the labeled frames, BCE_w is binary cross-entropy with per-AU
// positive weights averaged over present AU labels, and the CCC terms are
// computed over the VA-labeled frames of the batch.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "affpipe/datamodel.hpp"

namespace affpipe {

// Row-major weight matrix with a bias per row.
struct DenseLayer {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> weights;  // rows * cols
    std::vector<double> bias;     // rows

    DenseLayer() = default;
    DenseLayer(std::size_t r, std::size_t c) : rows(r), cols(c), weights(r * c, 0.0), bias(r, 0.0) {}

    double& w(std::size_t r, std::size_t c) { return weights[r * cols + c]; }
    double w(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }

    bool operator==(const DenseLayer&) const = default;
};

struct HeadParams {
    std::size_t input_dim = 0;     // D, embedding width
    std::size_t hidden_width = 0;  // H
    DenseLayer hidden;  // H x (D + 10)
    DenseLayer expr;    // 8 x H
    DenseLayer au;      // 12 x H
    DenseLayer va;      // 2 x 10

    HeadParams() = default;
    // All-zero parameters.
    HeadParams(std::size_t dim, std::size_t hidden_units);

    // Visits the four layers in a fixed order (hidden, expr, au, va).
    template <typename F>
    void for_each_layer(F&& f) {
        f("hidden", hidden);
        f("expr", expr);
        f("au", au);
        f("va", va);
    }
    template <typename F>
    void for_each_layer(F&& f) const {
        f("hidden", hidden);
        f("expr", expr);
        f("au", au);
        f("va", va);
    }

    std::size_t parameter_count() const;
    bool all_finite() const;
    // Throws Schema if layer shapes disagree with (D, H).
    void check_shapes() const;

    bool operator==(const HeadParams&) const = default;
};

struct TaskWeights {
    double va = 1.0;
    double expr = 1.0;
    double au = 1.0;
};

struct TrainConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    int epochs = 30;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    TaskWeights task_weights;
    std::array<double, kNumExpr> expr_class_weights = filled(1.0);
    std::array<double, kNumAu> au_pos_weights = au_filled(1.0);
    std::size_t hidden_width = 32;

    void validate() const;

    static constexpr std::array<double, kNumExpr> filled(double v) {
        std::array<double, kNumExpr> a{};
        a.fill(v);
        return a;
    }
    static constexpr std::array<double, kNumAu> au_filled(double v) {
        std::array<double, kNumAu> a{};
        a.fill(v);
        return a;
    }
};

// A frame paired with its labels; `labels` may be null (prediction only).
struct LabeledFrame {
    const FrameRecord* record = nullptr;
    const MtlLabels* labels = nullptr;
};

PredictionSet forward(const HeadParams& params, const FrameRecord& record);

double loss(const HeadParams& params, std::span<const LabeledFrame> batch, const TrainConfig& config);

struct LossAndGradient {
    double loss = 0.0;
    HeadParams gradient;
};

// Exact gradient of `loss` with respect to every parameter.
LossAndGradient loss_and_gradient(const HeadParams& params, std::span<const LabeledFrame> batch,
                                  const TrainConfig& config);

HeadParams gradient(const HeadParams& params, std::span<const LabeledFrame> batch, const TrainConfig& config);

// Glorot-uniform weights, zero biases, drawn from `seed`.
HeadParams initialize(std::size_t dim, std::size_t hidden_units, std::uint64_t seed);

// Inverse class frequency scaled to mean 1 over all 8 classes (absent
// classes get 0), and negatives/positives per AU (1 if either count is 0).
struct DefaultWeights {
    std::array<double, kNumExpr> expr_class_weights;
    std::array<double, kNumAu> au_pos_weights;
};
DefaultWeights default_loss_weights(std::span<const LabeledFrame> frames);

struct TrainResult {
    HeadParams params;
    double initial_loss = 0.0;
    std::vector<double> epoch_loss;  // full-data loss after each epoch
};

// Frames whose labels are null or empty are skipped. Throws Numerical on a
// non-finite loss.
TrainResult train(std::span<const LabeledFrame> frames, std::size_t dim, const TrainConfig& config,
                  const std::function<void(int, double)>& on_epoch = {});

// Convenience: joins features with labels and trains on every labeled frame.
TrainResult train(const FeatureSet& features, const LabelMap& labels, const TrainConfig& config,
                  const std::function<void(int, double)>& on_epoch = {});

std::vector<LabeledFrame> join(const FeatureSet& features, const LabelMap& labels);

PredictionTable predict(const HeadParams& params, const FeatureSet& features);

// Weights file (text): version line, "dims D H", then one "layer <name> <rows>
// <cols>" block per layer followed by `rows` weight lines and one bias line.
void save_params(const std::filesystem::path& path, const HeadParams& params);
HeadParams load_params(const std::filesystem::path& path,
                       std::optional<std::size_t> expected_dim = std::nullopt,
                       std::optional<std::size_t> expected_hidden = std::nullopt);

}  // namespace affpipe
