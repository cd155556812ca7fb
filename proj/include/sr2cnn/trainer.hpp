#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sr2cnn/losses.hpp"
#include "sr2cnn/model.hpp"

namespace sr2cnn {

/// Labeled frames ready for training: frames are stored contiguously,
/// labels are indices into the known-class set.
template <typename T>
struct LabeledFrames {
    std::size_t channels = 2, frame_len = 128;
    std::vector<T> frames;  // count * channels * frame_len
    std::vector<std::uint16_t> labels;

    std::size_t count() const { return labels.size(); }
    std::size_t frame_elems() const { return channels * frame_len; }
    const T* frame(std::size_t i) const { return frames.data() + i * frame_elems(); }
    Tensor<T> frame_tensor(std::size_t i) const {
        return Tensor<T>({channels, frame_len},
                         std::vector<T>(frame(i), frame(i) + frame_elems()));
    }
};

struct TrainConfig {
    std::size_t batch = 256;
    double lr = 1e-3;
    double center_alpha = 0.5;
    LossWeights weights;
    std::size_t max_epochs = 250;
    std::size_t patience = 25;  // early stop on stalled validation accuracy
    std::uint64_t seed = 1;
    bool classic_center_update = false;

    void validate() const {
        if (batch < 1) throw Error(ErrorCode::invalid_argument, "batch size must be >= 1");
        if (!(lr > 0)) throw Error(ErrorCode::invalid_argument, "learning rate must be > 0");
        if (max_epochs < 1) throw Error(ErrorCode::invalid_argument, "epochs must be >= 1");
    }
};

/// Batch-step instrumentation, used by tests to verify statement order.
struct TrainHooks {
    std::function<void(std::size_t)> on_center_update;
    std::function<void(std::size_t, const BatchLoss&)> on_loss;
    std::function<void(std::size_t)> on_param_update;
};

struct EpochStats {
    double ce = 0, ct = 0, r = 0, total = 0;
    std::size_t batches = 0;
};

struct HistoryRow {
    std::size_t epoch;
    double ce, ct, r, total, val_softmax_acc;
};

template <typename T>
struct FitResult {
    ModelParams<T> best;
    std::vector<HistoryRow> history;
    std::size_t best_epoch = 0;
    double best_val_acc = 0.0;
};

struct AccuracyReport {
    std::vector<double> per_class;  // indexed by known class
    std::vector<std::size_t> per_class_count;
    double macro = 0.0;
};

/// One pass over the data in seeded shuffled order, dropping the last
/// partial batch. Per batch: center update, loss computation, then Adam
/// updates, in that order.
template <typename T>
EpochStats train_epoch(ModelParams<T>& model, const LabeledFrames<T>& data,
                       const TrainConfig& cfg, AdamState<T>& adam, std::uint64_t epoch_index,
                       const TrainHooks* hooks = nullptr);

/// Runs up to cfg.max_epochs epochs, tracking softmax validation accuracy
/// and retaining the best-validation parameters.
template <typename T>
FitResult<T> fit(ModelParams<T> model, const LabeledFrames<T>& train,
                 const LabeledFrames<T>& val, const TrainConfig& cfg,
                 const TrainHooks* hooks = nullptr,
                 const std::function<void(const HistoryRow&)>& on_epoch = nullptr);

/// Argmax-of-classifier accuracy, per class and macro-averaged.
template <typename T>
AccuracyReport evaluate_softmax(const ModelParams<T>& model, const LabeledFrames<T>& data);

/// Batched feature extraction (encoder only), rows in data order.
template <typename T>
std::vector<std::vector<double>> extract_all_features(const ModelParams<T>& model,
                                                      const LabeledFrames<T>& data);

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path);

}  // namespace sr2cnn
