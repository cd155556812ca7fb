#pragma once

#include <cstdint>
#include <vector>

#include "sr2cnn/tensor.hpp"

namespace sr2cnn {

/// One semantic center per known class, row j = c_j. alpha is the center
/// learning rate applied as c_j <- c_j - alpha * delta_j.
template <typename T>
struct CenterTable {
    Tensor<T> centers;  // (num_classes, dim)
    T alpha = T(0.5);

    std::size_t num_classes() const { return centers.extent(0); }
    std::size_t dim() const { return centers.extent(1); }
};

struct LossWeights {
    double lambda_ct = 0.1;
    double lambda_r = 1.0;
    bool ce_on = true;
    bool ct_on = true;
    bool r_on = true;
};

struct BatchLoss {
    double ce = 0.0, ct = 0.0, r = 0.0, total = 0.0;
};

/// Mean negative log true-class probability; rows of `predictions` are
/// probability vectors. Probabilities are floored at 1e-12 before the log.
template <typename T>
double cross_entropy(const Tensor<T>& predictions, const std::vector<std::uint16_t>& labels);

/// Half mean squared distance between features and their class centers.
template <typename T>
double center_loss(const Tensor<T>& features, const std::vector<std::uint16_t>& labels,
                   const CenterTable<T>& table);

/// Per-class center deltas: zero for classes absent from the batch, else
/// sum_{i in class j} (c_j - z_i) / count_j. classic_plus_one adds the +1
/// smoothing denominator of the classic center-loss formulation.
template <typename T>
Tensor<T> center_delta(const Tensor<T>& features, const std::vector<std::uint16_t>& labels,
                       const CenterTable<T>& table, bool classic_plus_one = false);

/// Applies table.centers -= alpha * delta.
template <typename T>
void apply_center_delta(CenterTable<T>& table, const Tensor<T>& delta);

/// Half mean squared frame error between reconstructions and originals,
/// both (N, frame elements).
template <typename T>
double reconstruction_loss(const Tensor<T>& reconstructions, const Tensor<T>& originals);

double total_loss(double ce, double ct, double r, const LossWeights& weights);

BatchLoss combine_losses(double ce, double ct, double r, const LossWeights& weights);

}  // namespace sr2cnn
