#include "sr2cnn/losses.hpp"

#include <cmath>

namespace sr2cnn {

template <typename T>
double cross_entropy(const Tensor<T>& predictions, const std::vector<std::uint16_t>& labels) {
    if (predictions.rank() != 2)
        throw Error(ErrorCode::shape_mismatch, "cross_entropy expects (N, classes) probabilities");
    const std::size_t n = predictions.extent(0), k = predictions.extent(1);
    if (labels.size() != n)
        throw Error(ErrorCode::shape_mismatch, "cross_entropy label count mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= k)
            throw Error(ErrorCode::invalid_argument, "cross_entropy label outside known set");
        double p = static_cast<double>(predictions(i, labels[i]));
        acc -= std::log(std::max(p, 1e-12));
    }
    return acc / static_cast<double>(n);
}

template <typename T>
double center_loss(const Tensor<T>& features, const std::vector<std::uint16_t>& labels,
                   const CenterTable<T>& table) {
    if (features.rank() != 2)
        throw Error(ErrorCode::shape_mismatch, "center_loss expects (N, dim) features");
    const std::size_t n = features.extent(0), d = features.extent(1);
    if (d != table.dim())
        throw Error(ErrorCode::shape_mismatch, "center_loss feature dim != center dim");
    if (labels.size() != n)
        throw Error(ErrorCode::shape_mismatch, "center_loss label count mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= table.num_classes())
            throw Error(ErrorCode::invalid_argument, "center_loss: no center for label");
        const T* z = features.ptr() + i * d;
        const T* c = table.centers.ptr() + labels[i] * d;
        for (std::size_t j = 0; j < d; ++j) {
            double diff = static_cast<double>(z[j]) - static_cast<double>(c[j]);
            acc += diff * diff;
        }
    }
    return acc / (2.0 * static_cast<double>(n));
}

template <typename T>
Tensor<T> center_delta(const Tensor<T>& features, const std::vector<std::uint16_t>& labels,
                       const CenterTable<T>& table, bool classic_plus_one) {
    const std::size_t n = features.extent(0), d = features.extent(1);
    if (d != table.dim())
        throw Error(ErrorCode::shape_mismatch, "center_delta feature dim != center dim");
    Tensor<T> delta(table.centers.shape);
    std::vector<std::size_t> count(table.num_classes(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= table.num_classes())
            throw Error(ErrorCode::invalid_argument, "center_delta label outside table");
        count[labels[i]]++;
        const T* z = features.ptr() + i * d;
        const T* c = table.centers.ptr() + labels[i] * d;
        T* row = delta.ptr() + labels[i] * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += c[j] - z[j];
    }
    for (std::size_t cls = 0; cls < table.num_classes(); ++cls) {
        if (count[cls] == 0) continue;  // delta stays zero for absent classes
        T denom = static_cast<T>(count[cls] + (classic_plus_one ? 1 : 0));
        T* row = delta.ptr() + cls * d;
        for (std::size_t j = 0; j < d; ++j) row[j] /= denom;
    }
    return delta;
}

template <typename T>
void apply_center_delta(CenterTable<T>& table, const Tensor<T>& delta) {
    if (!delta.same_shape(table.centers))
        throw Error(ErrorCode::shape_mismatch, "center delta shape mismatch");
    for (std::size_t i = 0; i < delta.numel(); ++i)
        table.centers.data[i] -= table.alpha * delta.data[i];
}

template <typename T>
double reconstruction_loss(const Tensor<T>& reconstructions, const Tensor<T>& originals) {
    if (!reconstructions.same_shape(originals))
        throw Error(ErrorCode::shape_mismatch, "reconstruction_loss shape mismatch");
    if (reconstructions.rank() < 1 || reconstructions.extent(0) == 0)
        throw Error(ErrorCode::invalid_argument, "reconstruction_loss empty batch");
    const std::size_t n = reconstructions.extent(0);
    double acc = 0.0;
    for (std::size_t i = 0; i < reconstructions.numel(); ++i) {
        double diff = static_cast<double>(reconstructions.data[i]) -
                      static_cast<double>(originals.data[i]);
        acc += diff * diff;
    }
    return acc / (2.0 * static_cast<double>(n));
}

double total_loss(double ce, double ct, double r, const LossWeights& w) {
    double t = 0.0;
    if (w.ce_on) t += ce;
    if (w.ct_on) t += w.lambda_ct * ct;
    if (w.r_on) t += w.lambda_r * r;
    return t;
}

BatchLoss combine_losses(double ce, double ct, double r, const LossWeights& w) {
    BatchLoss b;
    b.ce = ce;
    b.ct = ct;
    b.r = r;
    b.total = total_loss(ce, ct, r, w);
    return b;
}

#define SR2CNN_INSTANTIATE(T)                                                               \
    template double cross_entropy<T>(const Tensor<T>&, const std::vector<std::uint16_t>&); \
    template double center_loss<T>(const Tensor<T>&, const std::vector<std::uint16_t>&,    \
                                   const CenterTable<T>&);                                  \
    template Tensor<T> center_delta<T>(const Tensor<T>&, const std::vector<std::uint16_t>&,\
                                       const CenterTable<T>&, bool);                        \
    template void apply_center_delta<T>(CenterTable<T>&, const Tensor<T>&);                 \
    template double reconstruction_loss<T>(const Tensor<T>&, const Tensor<T>&);

SR2CNN_INSTANTIATE(float)
SR2CNN_INSTANTIATE(double)

#undef SR2CNN_INSTANTIATE

}  // namespace sr2cnn
