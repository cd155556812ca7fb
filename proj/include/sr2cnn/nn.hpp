#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "sr2cnn/tensor.hpp"

namespace sr2cnn {

/// Convolution layer parameters. kernel shape is (out_ch, in_ch, kH, kW);
/// bias has out_ch entries. The same struct parameterizes deconvolution,
/// where out_ch is the larger (restored) side and the geometry fields
/// describe the mirrored convolution.
template <typename T>
struct ConvSpec {
    Tensor<T> kernel;
    Tensor<T> bias;
    std::size_t stride_h = 1, stride_w = 1;
    std::size_t pad_h = 0, pad_w = 0;

    std::size_t out_channels() const { return kernel.extent(0); }
    std::size_t in_channels() const { return kernel.extent(1); }
    std::size_t kernel_h() const { return kernel.extent(2); }
    std::size_t kernel_w() const { return kernel.extent(3); }

    void validate() const {
        if (kernel.rank() != 4 || kernel.numel() == 0)
            throw Error(ErrorCode::invalid_argument, "conv kernel must be non-empty 4-d");
        if (stride_h < 1 || stride_w < 1)
            throw Error(ErrorCode::invalid_argument, "conv stride must be >= 1");
        if (bias.numel() != 0 && bias.numel() != out_channels())
            throw Error(ErrorCode::shape_mismatch, "conv bias length != out channels");
    }
};

enum class PoolMode : std::uint8_t { max = 1, average = 2 };

/// Everything needed to invert a pooling step. argmax holds flat offsets
/// into the pre-pool tensor, one per pooled element (max mode only).
struct PoolRecord {
    PoolMode mode = PoolMode::max;
    std::size_t window_h = 2, window_w = 2;
    std::size_t stride_h = 2, stride_w = 2;
    std::size_t pad_h = 0, pad_w = 0;  // only 0 supported
    std::vector<std::size_t> in_shape;
    std::vector<std::uint32_t> argmax;
};

// conv output extent for one axis
inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
    if (in + 2 * p < k)
        throw Error(ErrorCode::shape_mismatch, "conv kernel larger than padded input");
    return (in + 2 * p - k) / s + 1;
}

// deconv restores the mirrored conv's input extent
inline std::size_t deconv_out_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
    std::size_t full = (in - 1) * s + k;
    if (full < 2 * p) throw Error(ErrorCode::shape_mismatch, "deconv padding exceeds output");
    return full - 2 * p;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvSpec<T>& spec);

template <typename T>
struct ConvGrads {
    Tensor<T> input, kernel, bias;
};

template <typename T>
ConvGrads<T> conv2d_grad(const Tensor<T>& upstream, const Tensor<T>& input,
                         const ConvSpec<T>& spec);

template <typename T>
Tensor<T> deconv2d(const Tensor<T>& input, const ConvSpec<T>& spec);

template <typename T>
ConvGrads<T> deconv2d_grad(const Tensor<T>& upstream, const Tensor<T>& input,
                           const ConvSpec<T>& spec);

/// Dense matrix M with conv2d(x, spec) == M * vec(x) for single-channel
/// specs; rows index output elements, columns input elements. Oracle for
/// the matrix-form identities; rejects multi-channel specs.
template <typename T>
Tensor<T> build_conv_matrix(const ConvSpec<T>& spec, std::size_t in_h, std::size_t in_w);

template <typename T>
std::pair<Tensor<T>, PoolRecord> pool2d(const Tensor<T>& input, PoolMode mode,
                                        std::size_t window_h, std::size_t window_w,
                                        std::size_t stride_h, std::size_t stride_w);

template <typename T>
Tensor<T> unpool2d(const Tensor<T>& input, const PoolRecord& record);

/// Gradient of pool2d w.r.t. its input: max scatters upstream to the argmax
/// positions, average spreads upstream / window area over each window.
template <typename T>
Tensor<T> pool2d_grad(const Tensor<T>& upstream, const PoolRecord& record);

/// Gradient of unpool2d w.r.t. its input: max gathers upstream at the argmax
/// positions, average sums upstream over each window (copy semantics).
template <typename T>
Tensor<T> unpool2d_grad(const Tensor<T>& upstream, const PoolRecord& record);

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
struct DenseGrads {
    Tensor<T> input, weights, bias;
};

template <typename T>
DenseGrads<T> dense_grad(const Tensor<T>& upstream, const Tensor<T>& input,
                         const Tensor<T>& weights);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

template <typename T>
Tensor<T> relu_grad(const Tensor<T>& upstream, const Tensor<T>& input);

/// Numerically stable softmax over a 1-d tensor.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

/// Jacobian-vector product of softmax given its output probabilities.
template <typename T>
Tensor<T> softmax_grad(const Tensor<T>& upstream, const Tensor<T>& probs);

/// Bias-corrected Adam. eps is added after the second-moment bias
/// correction: p -= eta * m_hat / (sqrt(v_hat) + eps).
template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m, v;
    std::uint64_t step = 0;
    T beta1 = T(0.9), beta2 = T(0.999), eps = T(1e-8);

    static AdamState for_params(const std::vector<Tensor<T>*>& params) {
        AdamState st;
        st.m.reserve(params.size());
        st.v.reserve(params.size());
        for (const Tensor<T>* p : params) {
            st.m.emplace_back(p->shape);
            st.v.emplace_back(p->shape);
        }
        return st;
    }
};

template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
               AdamState<T>& state, T eta);

/// Central-difference check of an analytic gradient of a scalar function.
/// Returns the max over probed coordinates of |num - ana| / max(1, |num|, |ana|).
/// probe_indices empty means all coordinates.
double grad_check(const std::function<double(const Tensor<double>&)>& f,
                  const Tensor<double>& point, const Tensor<double>& analytic_grad, double step,
                  const std::vector<std::size_t>& probe_indices = {});

}  // namespace sr2cnn
