#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "sr2cnn/losses.hpp"
#include "sr2cnn/nn.hpp"
#include "sr2cnn/tensor.hpp"

namespace sr2cnn {

struct ConvLayerSpec {
    std::size_t out_ch = 0;
    std::size_t kh = 1, kw = 3;
    std::size_t sh = 1, sw = 1;
    std::size_t ph = 0, pw = 1;
    bool pooled = false;
    PoolMode pool_mode = PoolMode::max;
    std::size_t pool_h = 1, pool_w = 2;
};

/// Network topology: encoder conv stack + dense head down to the semantic
/// dimension, classifier widths, and an implied decoder that mirrors the
/// encoder stage by stage (unpooling wherever the encoder pooled).
struct ArchConfig {
    std::size_t in_ch = 1, in_h = 2, in_w = 128;
    std::vector<ConvLayerSpec> conv;
    std::vector<std::size_t> feature_dense;     // hidden widths before the semantic layer
    std::size_t semantic_dim = 64;
    std::vector<std::size_t> classifier_dense;  // hidden widths before the class logits
    std::size_t num_known = 0;
    std::vector<std::string> class_names;       // one per known class

    static ArchConfig defaults(std::size_t num_known, std::vector<std::string> names = {});

    /// Throws on inconsistent geometry; in particular every conv layer must
    /// be exactly invertible so the decoder restores the input shape.
    void validate() const;
};

/// Per-stage shapes derived from an ArchConfig.
struct ShapePlan {
    std::vector<std::array<std::size_t, 3>> conv_in;   // encoder stage inputs
    std::vector<std::array<std::size_t, 3>> conv_out;  // conv outputs (pre-pool)
    std::vector<std::array<std::size_t, 3>> stage_out; // post-pool stage outputs
    std::size_t flat = 0;
    std::vector<std::size_t> f_dims;  // flat, hidden..., semantic_dim
    std::vector<std::size_t> c_dims;  // semantic_dim, hidden..., num_known
    std::vector<std::size_t> d_dims;  // semantic_dim, reversed hidden..., flat
};

ShapePlan plan_shapes(const ArchConfig& cfg);

template <typename T>
struct ModelParams {
    ArchConfig cfg;
    std::vector<ConvSpec<T>> f_conv;
    std::vector<Tensor<T>> f_w, f_b;
    std::vector<Tensor<T>> c_w, c_b;
    std::vector<Tensor<T>> d_w, d_b;
    std::vector<ConvSpec<T>> d_deconv;  // d_deconv[i] inverts f_conv[i]
    Tensor<T> centers;                  // (num_known, semantic_dim)

    /// All parameter tensors in checkpoint declaration order, centers last.
    std::vector<std::pair<std::string, Tensor<T>*>> named_tensors();
    std::vector<std::pair<std::string, const Tensor<T>*>> named_tensors() const;

    /// Tensors updated by the optimizer (everything except the center table,
    /// which follows its own update rule).
    std::vector<Tensor<T>*> trainable();

    template <typename U>
    ModelParams<U> cast() const {
        ModelParams<U> out;
        out.cfg = cfg;
        auto src = named_tensors();
        out.allocate(cfg);
        auto dst = out.named_tensors();
        for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<U>();
        return out;
    }

    /// Builds zeroed tensors with the right shapes for cfg.
    void allocate(const ArchConfig& config);
};

/// Seeded He initialization; centers start at zero.
template <typename T>
ModelParams<T> init_params(const ArchConfig& cfg, std::uint64_t seed);

/// Per-sample activation cache. Reused across samples to avoid churn.
template <typename T>
struct Workspace {
    std::vector<Tensor<T>> stage_in;   // size n_conv + 1; last is final stage output
    std::vector<Tensor<T>> conv_pre;
    std::vector<PoolRecord> pool_rec;  // valid only where cfg.conv[i].pooled
    Tensor<T> flat;
    std::vector<Tensor<T>> f_in, f_pre;  // per dense layer input / pre-activation
    Tensor<T> z;
    std::vector<Tensor<T>> c_in, c_pre;
    Tensor<T> logits, probs;
    std::vector<Tensor<T>> d_in, d_pre;
    std::vector<Tensor<T>> dec_up;    // unpooled decoder stage inputs (where pooled)
    std::vector<Tensor<T>> dec_pre;   // deconv outputs pre-activation
    std::vector<Tensor<T>> dec_in;    // decoder stage inputs, index i feeds stage i
    Tensor<T> recon;
};

/// Full forward pass (encoder, classifier, decoder) caching intermediates.
template <typename T>
void forward_sample(const ModelParams<T>& p, const Tensor<T>& frame, Workspace<T>& ws);

/// Accumulates parameter gradients of the weighted total loss for one sample
/// into `grad` (shapes mirror the model). batch_n is the batch size N in the
/// loss normalizations. Center gradients are not produced; the center table
/// follows its own update rule.
template <typename T>
void backward_sample(const ModelParams<T>& p, const Workspace<T>& ws, const Tensor<T>& frame,
                     std::uint16_t label, const LossWeights& w, std::size_t batch_n,
                     ModelParams<T>& grad);

/// Encoder only: semantic vector plus the pool records the decoder needs.
template <typename T>
std::pair<Tensor<T>, std::vector<PoolRecord>> extract_features(const Tensor<T>& frame,
                                                               const ModelParams<T>& p);

/// Classifier softmax over the known classes.
template <typename T>
Tensor<T> classify(const Tensor<T>& z, const ModelParams<T>& p);

/// Decoder reconstruction; records must come from the matching
/// extract_features call.
template <typename T>
Tensor<T> decode(const Tensor<T>& z, const std::vector<PoolRecord>& records,
                 const ModelParams<T>& p);

/// Checkpoint file: magic "SR2C", u16 version, serialized ArchConfig, then
/// parameter tensors in declaration order as little-endian f32 with
/// per-tensor shape headers.
void save_checkpoint(const ModelParams<float>& p, const std::string& path);
ModelParams<float> load_checkpoint(const std::string& path);

}  // namespace sr2cnn
