#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sr2cnn/dataset.hpp"
#include "sr2cnn/discriminator.hpp"
#include "sr2cnn/metrics.hpp"
#include "sr2cnn/model.hpp"
#include "sr2cnn/trainer.hpp"

namespace sr2cnn {

struct TrainRunConfig {
    SplitSpec split;
    TrainConfig train;
    std::size_t semantic_dim = 64;
    std::optional<int> min_snr;  // optional SNR sieve before the split
};

struct TrainRunResult {
    ModelParams<float> model;  // best-validation parameters
    std::vector<HistoryRow> history;
    std::size_t best_epoch = 0;
    double best_val_acc = 0.0;
    std::vector<std::uint16_t> known_ids, unknown_ids;
};

/// Sieve (optional), split, train on the known classes, keep the best
/// checkpoint by validation softmax accuracy.
TrainRunResult run_training(const Corpus& corpus, const TrainRunConfig& cfg,
                            const std::function<void(const HistoryRow&)>& on_epoch = nullptr);

/// Checks that a checkpoint matches the known classes of a split; throws a
/// data error when counts or names disagree.
void check_model_matches(const ModelParams<float>& model, const Corpus& corpus,
                         const std::vector<std::uint16_t>& known_ids);

/// Nearest-center accuracy under the given metric, ignoring any rejection
/// threshold (the "cluster" / upper-bound accuracy).
template <typename T>
AccuracyReport evaluate_cluster(const ModelParams<T>& model, const LabeledFrames<T>& data,
                                const ClassStats& stats, MetricKind metric);

struct EvalRunConfig {
    SplitSpec split;
    std::optional<int> min_snr;
    MetricKind metric = MetricKind::mahalanobis;
    double shrinkage = 1e-3;
};

struct EvalRunResult {
    AccuracyReport softmax, cluster;
    std::vector<std::string> known_names;
    std::string to_json() const;
    std::string to_csv() const;
};

/// Softmax and cluster (UB) accuracy on the known test split; class
/// statistics are fitted on the training split features.
EvalRunResult run_eval(const ModelParams<float>& model, const Corpus& corpus,
                       const EvalRunConfig& cfg);

struct DiscriminateRunConfig {
    SplitSpec split;
    std::optional<int> min_snr;
    DiscriminatorConfig disc;
    std::uint64_t order_seed = 1;  // presentation order of the mixed test set
};

struct DiscriminateRunResult {
    ZslReport report;
    std::string registry_json;
};

/// Streams the mixed known+unknown test set through the discriminator in a
/// seeded shuffled order and tallies the §-style outcome metrics.
DiscriminateRunResult run_discriminate(const ModelParams<float>& model, const Corpus& corpus,
                                       const DiscriminateRunConfig& cfg);

struct SweepRunResult {
    std::vector<ZslReport> rows;  // one per lambda1, ascending
    IntervalResult interval;
};

/// Repeats the discrimination run over a lambda1 grid with frozen class
/// statistics and per-run fresh registries; features are extracted once.
SweepRunResult run_sweep(const ModelParams<float>& model, const Corpus& corpus,
                         const DiscriminateRunConfig& base, const std::vector<double>& lambdas);

std::vector<double> parse_grid(const std::string& spec);  // "lo:hi:step" or csv
std::vector<int> parse_int_grid(const std::string& spec);

}  // namespace sr2cnn
