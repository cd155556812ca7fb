#include "sr2cnn/model.hpp"

#include <cstring>
#include <fstream>

#include "sr2cnn/rng.hpp"

namespace sr2cnn {

namespace {

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
    for (std::size_t i = 0; i < dst.numel(); ++i) dst.data[i] += src.data[i];
}

template <typename T>
Tensor<T> as_chw(const Tensor<T>& frame, const ArchConfig& cfg) {
    if (frame.rank() == 3) {
        require_shape(frame, {cfg.in_ch, cfg.in_h, cfg.in_w}, "input frame");
        return frame;
    }
    if (frame.rank() == 2 && cfg.in_ch == 1) {
        require_shape(frame, {cfg.in_h, cfg.in_w}, "input frame");
        return Tensor<T>({1, cfg.in_h, cfg.in_w}, frame.data);
    }
    throw Error(ErrorCode::shape_mismatch, "input frame must be (H, W) or (C, H, W)");
}

}  // namespace

ArchConfig ArchConfig::defaults(std::size_t num_known, std::vector<std::string> names) {
    ArchConfig c;
    c.conv = {
        {64, 1, 3, 1, 1, 0, 1, true, PoolMode::max, 1, 2},
        {64, 2, 3, 1, 1, 0, 1, false, PoolMode::max, 1, 2},
        {32, 1, 3, 1, 1, 0, 1, true, PoolMode::max, 1, 2},
        {32, 1, 3, 1, 1, 0, 1, false, PoolMode::max, 1, 2},
    };
    c.feature_dense = {256};
    c.semantic_dim = 64;
    c.classifier_dense = {128};
    c.num_known = num_known;
    c.class_names = std::move(names);
    c.validate();
    return c;
}

ShapePlan plan_shapes(const ArchConfig& cfg) {
    ShapePlan plan;
    std::array<std::size_t, 3> cur = {cfg.in_ch, cfg.in_h, cfg.in_w};
    for (const ConvLayerSpec& l : cfg.conv) {
        plan.conv_in.push_back(cur);
        std::size_t oh = conv_out_extent(cur[1], l.kh, l.sh, l.ph);
        std::size_t ow = conv_out_extent(cur[2], l.kw, l.sw, l.pw);
        std::array<std::size_t, 3> out = {l.out_ch, oh, ow};
        plan.conv_out.push_back(out);
        if (l.pooled) {
            if (l.pool_h == 0 || l.pool_w == 0 || oh % l.pool_h != 0 || ow % l.pool_w != 0)
                throw Error(ErrorCode::invalid_argument, "pool window does not tile conv output");
            out = {l.out_ch, oh / l.pool_h, ow / l.pool_w};
        }
        plan.stage_out.push_back(out);
        cur = out;
    }
    plan.flat = cur[0] * cur[1] * cur[2];

    plan.f_dims.push_back(plan.flat);
    for (std::size_t w : cfg.feature_dense) plan.f_dims.push_back(w);
    plan.f_dims.push_back(cfg.semantic_dim);

    plan.c_dims.push_back(cfg.semantic_dim);
    for (std::size_t w : cfg.classifier_dense) plan.c_dims.push_back(w);
    plan.c_dims.push_back(cfg.num_known);

    plan.d_dims.push_back(cfg.semantic_dim);
    for (auto it = cfg.feature_dense.rbegin(); it != cfg.feature_dense.rend(); ++it)
        plan.d_dims.push_back(*it);
    plan.d_dims.push_back(plan.flat);
    return plan;
}

void ArchConfig::validate() const {
    if (in_ch < 1 || in_h < 1 || in_w < 1)
        throw Error(ErrorCode::invalid_argument, "input shape extents must be positive");
    if (conv.empty()) throw Error(ErrorCode::invalid_argument, "at least one conv layer required");
    if (semantic_dim < 1) throw Error(ErrorCode::invalid_argument, "semantic dim must be positive");
    if (num_known < 1) throw Error(ErrorCode::invalid_argument, "need at least one known class");
    if (!class_names.empty() && class_names.size() != num_known)
        throw Error(ErrorCode::invalid_argument, "class name count != num_known");
    for (std::size_t w : feature_dense)
        if (w < 1) throw Error(ErrorCode::invalid_argument, "dense width must be positive");
    for (std::size_t w : classifier_dense)
        if (w < 1) throw Error(ErrorCode::invalid_argument, "dense width must be positive");

    std::array<std::size_t, 3> cur = {in_ch, in_h, in_w};
    for (const ConvLayerSpec& l : conv) {
        if (l.out_ch < 1 || l.kh < 1 || l.kw < 1 || l.sh < 1 || l.sw < 1)
            throw Error(ErrorCode::invalid_argument, "conv layer extents must be positive");
        // conv must be exactly invertible so the decoder can restore shapes
        if (cur[1] + 2 * l.ph < l.kh || cur[2] + 2 * l.pw < l.kw)
            throw Error(ErrorCode::invalid_argument, "conv kernel larger than padded input");
        if ((cur[1] + 2 * l.ph - l.kh) % l.sh != 0 || (cur[2] + 2 * l.pw - l.kw) % l.sw != 0)
            throw Error(ErrorCode::invalid_argument,
                        "conv geometry not exactly invertible by the decoder");
        cur = {l.out_ch, (cur[1] + 2 * l.ph - l.kh) / l.sh + 1, (cur[2] + 2 * l.pw - l.kw) / l.sw + 1};
        if (l.pooled) {
            if (l.pool_h == 0 || l.pool_w == 0 || cur[1] % l.pool_h != 0 || cur[2] % l.pool_w != 0)
                throw Error(ErrorCode::invalid_argument, "pool window does not tile conv output");
            cur = {cur[0], cur[1] / l.pool_h, cur[2] / l.pool_w};
        }
    }

    // mirrored decoder restores the input shape; walk it symbolically
    ShapePlan plan = plan_shapes(*this);
    std::array<std::size_t, 3> dec = plan.stage_out.back();
    for (std::size_t idx = conv.size(); idx-- > 0;) {
        const ConvLayerSpec& l = conv[idx];
        if (l.pooled) dec = {dec[0], dec[1] * l.pool_h, dec[2] * l.pool_w};
        dec = {plan.conv_in[idx][0], deconv_out_extent(dec[1], l.kh, l.sh, l.ph),
               deconv_out_extent(dec[2], l.kw, l.sw, l.pw)};
    }
    if (dec != std::array<std::size_t, 3>{in_ch, in_h, in_w})
        throw Error(ErrorCode::invalid_argument, "decoder does not restore the input shape");
}

template <typename T>
void ModelParams<T>::allocate(const ArchConfig& config) {
    cfg = config;
    cfg.validate();
    ShapePlan plan = plan_shapes(cfg);

    f_conv.clear();
    d_deconv.clear();
    f_w.clear(); f_b.clear(); c_w.clear(); c_b.clear(); d_w.clear(); d_b.clear();

    for (std::size_t i = 0; i < cfg.conv.size(); ++i) {
        const ConvLayerSpec& l = cfg.conv[i];
        ConvSpec<T> fc;
        fc.kernel = Tensor<T>({l.out_ch, plan.conv_in[i][0], l.kh, l.kw});
        fc.bias = Tensor<T>({l.out_ch});
        fc.stride_h = l.sh; fc.stride_w = l.sw; fc.pad_h = l.ph; fc.pad_w = l.pw;
        f_conv.push_back(std::move(fc));

        ConvSpec<T> dc;
        dc.kernel = Tensor<T>({plan.conv_in[i][0], l.out_ch, l.kh, l.kw});
        dc.bias = Tensor<T>({plan.conv_in[i][0]});
        dc.stride_h = l.sh; dc.stride_w = l.sw; dc.pad_h = l.ph; dc.pad_w = l.pw;
        d_deconv.push_back(std::move(dc));
    }
    for (std::size_t j = 0; j + 1 < plan.f_dims.size(); ++j) {
        f_w.emplace_back(std::vector<std::size_t>{plan.f_dims[j + 1], plan.f_dims[j]});
        f_b.emplace_back(std::vector<std::size_t>{plan.f_dims[j + 1]});
    }
    for (std::size_t j = 0; j + 1 < plan.c_dims.size(); ++j) {
        c_w.emplace_back(std::vector<std::size_t>{plan.c_dims[j + 1], plan.c_dims[j]});
        c_b.emplace_back(std::vector<std::size_t>{plan.c_dims[j + 1]});
    }
    for (std::size_t j = 0; j + 1 < plan.d_dims.size(); ++j) {
        d_w.emplace_back(std::vector<std::size_t>{plan.d_dims[j + 1], plan.d_dims[j]});
        d_b.emplace_back(std::vector<std::size_t>{plan.d_dims[j + 1]});
    }
    centers = Tensor<T>({cfg.num_known, cfg.semantic_dim});
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> ModelParams<T>::named_tensors() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (std::size_t i = 0; i < f_conv.size(); ++i) {
        out.emplace_back("f_conv" + std::to_string(i) + ".kernel", &f_conv[i].kernel);
        out.emplace_back("f_conv" + std::to_string(i) + ".bias", &f_conv[i].bias);
    }
    for (std::size_t j = 0; j < f_w.size(); ++j) {
        out.emplace_back("f_dense" + std::to_string(j) + ".w", &f_w[j]);
        out.emplace_back("f_dense" + std::to_string(j) + ".b", &f_b[j]);
    }
    for (std::size_t j = 0; j < c_w.size(); ++j) {
        out.emplace_back("c_dense" + std::to_string(j) + ".w", &c_w[j]);
        out.emplace_back("c_dense" + std::to_string(j) + ".b", &c_b[j]);
    }
    for (std::size_t j = 0; j < d_w.size(); ++j) {
        out.emplace_back("d_dense" + std::to_string(j) + ".w", &d_w[j]);
        out.emplace_back("d_dense" + std::to_string(j) + ".b", &d_b[j]);
    }
    for (std::size_t i = 0; i < d_deconv.size(); ++i) {
        out.emplace_back("d_deconv" + std::to_string(i) + ".kernel", &d_deconv[i].kernel);
        out.emplace_back("d_deconv" + std::to_string(i) + ".bias", &d_deconv[i].bias);
    }
    out.emplace_back("centers", &centers);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> ModelParams<T>::named_tensors() const {
    auto mut = const_cast<ModelParams<T>*>(this)->named_tensors();
    std::vector<std::pair<std::string, const Tensor<T>*>> out;
    out.reserve(mut.size());
    for (auto& [n, t] : mut) out.emplace_back(n, t);
    return out;
}

template <typename T>
std::vector<Tensor<T>*> ModelParams<T>::trainable() {
    std::vector<Tensor<T>*> out;
    for (auto& [name, t] : named_tensors())
        if (name != "centers") out.push_back(t);
    return out;
}

template <typename T>
ModelParams<T> init_params(const ArchConfig& cfg, std::uint64_t seed) {
    ModelParams<T> p;
    p.allocate(cfg);
    auto tensors = p.named_tensors();
    for (std::size_t ord = 0; ord < tensors.size(); ++ord) {
        auto& [name, t] = tensors[ord];
        if (name == "centers") continue;  // centers start at zero
        bool is_kernel = name.find(".kernel") != std::string::npos;
        bool is_weight = name.find(".w") != std::string::npos;
        if (!is_kernel && !is_weight) continue;  // biases start at zero
        std::size_t fan_in = is_kernel ? t->extent(1) * t->extent(2) * t->extent(3)
                                       : t->extent(1);
        double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
        Rng rng(derive_seed(seed, ord));
        for (std::size_t i = 0; i < t->numel(); ++i)
            t->data[i] = static_cast<T>(rng.gaussian() * std_dev);
    }
    return p;
}

template <typename T>
void forward_sample(const ModelParams<T>& p, const Tensor<T>& frame, Workspace<T>& ws) {
    const ArchConfig& cfg = p.cfg;
    const std::size_t n = cfg.conv.size();
    const std::size_t nf = p.f_w.size(), nc = p.c_w.size(), nd = p.d_w.size();

    ws.stage_in.resize(n + 1);
    ws.conv_pre.resize(n);
    ws.pool_rec.resize(n);
    ws.f_in.resize(nf);
    ws.f_pre.resize(nf);
    ws.c_in.resize(nc);
    ws.c_pre.resize(nc);
    ws.d_in.resize(nd + 1);
    ws.d_pre.resize(nd);
    ws.dec_up.resize(n);
    ws.dec_pre.resize(n);
    ws.dec_in.resize(n + 1);

    ws.stage_in[0] = as_chw(frame, cfg);
    require_finite(ws.stage_in[0], "input frame");

    for (std::size_t i = 0; i < n; ++i) {
        ws.conv_pre[i] = conv2d(ws.stage_in[i], p.f_conv[i]);
        Tensor<T> act = relu(ws.conv_pre[i]);
        if (cfg.conv[i].pooled) {
            auto [pooled, rec] = pool2d(act, cfg.conv[i].pool_mode, cfg.conv[i].pool_h,
                                        cfg.conv[i].pool_w, cfg.conv[i].pool_h, cfg.conv[i].pool_w);
            ws.pool_rec[i] = std::move(rec);
            ws.stage_in[i + 1] = std::move(pooled);
        } else {
            ws.stage_in[i + 1] = std::move(act);
        }
    }

    ws.flat = Tensor<T>({ws.stage_in[n].numel()}, ws.stage_in[n].data);
    ws.f_in[0] = ws.flat;
    for (std::size_t j = 0; j < nf; ++j) {
        ws.f_pre[j] = dense(ws.f_in[j], p.f_w[j], p.f_b[j]);
        if (j + 1 < nf) ws.f_in[j + 1] = relu(ws.f_pre[j]);
    }
    ws.z = ws.f_pre[nf - 1];  // semantic layer stays linear

    ws.c_in[0] = ws.z;
    for (std::size_t j = 0; j < nc; ++j) {
        ws.c_pre[j] = dense(ws.c_in[j], p.c_w[j], p.c_b[j]);
        if (j + 1 < nc) ws.c_in[j + 1] = relu(ws.c_pre[j]);
    }
    ws.logits = ws.c_pre[nc - 1];
    ws.probs = softmax(ws.logits);

    ws.d_in[0] = ws.z;
    for (std::size_t j = 0; j < nd; ++j) {
        ws.d_pre[j] = dense(ws.d_in[j], p.d_w[j], p.d_b[j]);
        ws.d_in[j + 1] = relu(ws.d_pre[j]);
    }

    ShapePlan plan = plan_shapes(cfg);
    ws.dec_in[n] = Tensor<T>({plan.stage_out[n - 1][0], plan.stage_out[n - 1][1],
                              plan.stage_out[n - 1][2]},
                             ws.d_in[nd].data);
    for (std::size_t idx = n; idx-- > 0;) {
        const Tensor<T>* src = &ws.dec_in[idx + 1];
        if (cfg.conv[idx].pooled) {
            ws.dec_up[idx] = unpool2d(*src, ws.pool_rec[idx]);
            src = &ws.dec_up[idx];
        }
        ws.dec_pre[idx] = deconv2d(*src, p.d_deconv[idx]);
        if (idx > 0) ws.dec_in[idx] = relu(ws.dec_pre[idx]);
    }
    ws.recon = ws.dec_pre[0];  // final reconstruction is linear
}

template <typename T>
void backward_sample(const ModelParams<T>& p, const Workspace<T>& ws, const Tensor<T>& frame,
                     std::uint16_t label, const LossWeights& w, std::size_t batch_n,
                     ModelParams<T>& grad) {
    const ArchConfig& cfg = p.cfg;
    const std::size_t n = cfg.conv.size();
    const std::size_t nf = p.f_w.size(), nc = p.c_w.size(), nd = p.d_w.size();
    if (label >= cfg.num_known)
        throw Error(ErrorCode::invalid_argument, "label outside known classes");
    const T invn = T(1) / static_cast<T>(batch_n);

    Tensor<T> dz({cfg.semantic_dim});

    if (w.ce_on) {
        Tensor<T> g = ws.probs;
        g(label) -= T(1);
        for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] *= invn;
        for (std::size_t j = nc; j-- > 0;) {
            Tensor<T> gpre = (j + 1 == nc) ? std::move(g) : relu_grad(g, ws.c_pre[j]);
            DenseGrads<T> dg = dense_grad(gpre, ws.c_in[j], p.c_w[j]);
            add_into(grad.c_w[j], dg.weights);
            add_into(grad.c_b[j], dg.bias);
            g = std::move(dg.input);
        }
        add_into(dz, g);
    }

    if (w.ct_on) {
        const T scale = static_cast<T>(w.lambda_ct) * invn;
        const T* c = p.centers.ptr() + label * cfg.semantic_dim;
        for (std::size_t i = 0; i < cfg.semantic_dim; ++i)
            dz.data[i] += scale * (ws.z.data[i] - c[i]);
    }

    if (w.r_on) {
        Tensor<T> x = as_chw(frame, cfg);
        const T scale = static_cast<T>(w.lambda_r) * invn;
        Tensor<T> gpre(ws.recon.shape);
        for (std::size_t i = 0; i < gpre.numel(); ++i)
            gpre.data[i] = scale * (ws.recon.data[i] - x.data[i]);

        for (std::size_t i = 0; i < n; ++i) {
            const Tensor<T>& src = cfg.conv[i].pooled ? ws.dec_up[i] : ws.dec_in[i + 1];
            ConvGrads<T> dg = deconv2d_grad(gpre, src, p.d_deconv[i]);
            add_into(grad.d_deconv[i].kernel, dg.kernel);
            add_into(grad.d_deconv[i].bias, dg.bias);
            Tensor<T> gsmall = cfg.conv[i].pooled ? unpool2d_grad(dg.input, ws.pool_rec[i])
                                                  : std::move(dg.input);
            if (i + 1 < n) {
                gpre = relu_grad(gsmall, ws.dec_pre[i + 1]);
            } else {
                const std::size_t flat_n = gsmall.numel();
                Tensor<T> g({flat_n}, std::move(gsmall.data));
                for (std::size_t j = nd; j-- > 0;) {
                    Tensor<T> gp = relu_grad(g, ws.d_pre[j]);
                    DenseGrads<T> ddg = dense_grad(gp, ws.d_in[j], p.d_w[j]);
                    add_into(grad.d_w[j], ddg.weights);
                    add_into(grad.d_b[j], ddg.bias);
                    g = std::move(ddg.input);
                }
                add_into(dz, g);
            }
        }
    }

    Tensor<T> g = std::move(dz);
    for (std::size_t j = nf; j-- > 0;) {
        Tensor<T> gpre = (j + 1 == nf) ? std::move(g) : relu_grad(g, ws.f_pre[j]);
        DenseGrads<T> dg = dense_grad(gpre, ws.f_in[j], p.f_w[j]);
        add_into(grad.f_w[j], dg.weights);
        add_into(grad.f_b[j], dg.bias);
        g = std::move(dg.input);
    }

    ShapePlan plan = plan_shapes(cfg);
    Tensor<T> gs({plan.stage_out[n - 1][0], plan.stage_out[n - 1][1], plan.stage_out[n - 1][2]},
                 std::move(g.data));
    for (std::size_t i = n; i-- > 0;) {
        Tensor<T> gact = cfg.conv[i].pooled ? pool2d_grad(gs, ws.pool_rec[i]) : std::move(gs);
        Tensor<T> gpre = relu_grad(gact, ws.conv_pre[i]);
        ConvGrads<T> cg = conv2d_grad(gpre, ws.stage_in[i], p.f_conv[i]);
        add_into(grad.f_conv[i].kernel, cg.kernel);
        add_into(grad.f_conv[i].bias, cg.bias);
        gs = std::move(cg.input);
    }
}

template <typename T>
std::pair<Tensor<T>, std::vector<PoolRecord>> extract_features(const Tensor<T>& frame,
                                                               const ModelParams<T>& p) {
    const ArchConfig& cfg = p.cfg;
    Tensor<T> a = as_chw(frame, cfg);
    require_finite(a, "input frame");
    std::vector<PoolRecord> records;
    for (std::size_t i = 0; i < cfg.conv.size(); ++i) {
        Tensor<T> act = relu(conv2d(a, p.f_conv[i]));
        if (cfg.conv[i].pooled) {
            auto [pooled, rec] = pool2d(act, cfg.conv[i].pool_mode, cfg.conv[i].pool_h,
                                        cfg.conv[i].pool_w, cfg.conv[i].pool_h, cfg.conv[i].pool_w);
            records.push_back(std::move(rec));
            a = std::move(pooled);
        } else {
            a = std::move(act);
        }
    }
    const std::size_t flat_n = a.numel();
    Tensor<T> h({flat_n}, std::move(a.data));
    for (std::size_t j = 0; j < p.f_w.size(); ++j) {
        Tensor<T> pre = dense(h, p.f_w[j], p.f_b[j]);
        h = (j + 1 < p.f_w.size()) ? relu(pre) : std::move(pre);
    }
    return {std::move(h), std::move(records)};
}

template <typename T>
Tensor<T> classify(const Tensor<T>& z, const ModelParams<T>& p) {
    if (z.numel() != p.cfg.semantic_dim)
        throw Error(ErrorCode::shape_mismatch, "semantic vector has wrong dimension");
    Tensor<T> h = z;
    for (std::size_t j = 0; j < p.c_w.size(); ++j) {
        Tensor<T> pre = dense(h, p.c_w[j], p.c_b[j]);
        h = (j + 1 < p.c_w.size()) ? relu(pre) : std::move(pre);
    }
    return softmax(h);
}

template <typename T>
Tensor<T> decode(const Tensor<T>& z, const std::vector<PoolRecord>& records,
                 const ModelParams<T>& p) {
    const ArchConfig& cfg = p.cfg;
    if (z.numel() != cfg.semantic_dim)
        throw Error(ErrorCode::shape_mismatch, "semantic vector has wrong dimension");
    std::size_t n_pooled = 0;
    for (const auto& l : cfg.conv) n_pooled += l.pooled ? 1 : 0;
    if (records.size() != n_pooled)
        throw Error(ErrorCode::invalid_argument, "pool record count does not match architecture");

    Tensor<T> h = z;
    for (std::size_t j = 0; j < p.d_w.size(); ++j) h = relu(dense(h, p.d_w[j], p.d_b[j]));

    ShapePlan plan = plan_shapes(cfg);
    Tensor<T> a({plan.stage_out.back()[0], plan.stage_out.back()[1], plan.stage_out.back()[2]},
                std::move(h.data));
    std::size_t rec_idx = records.size();
    for (std::size_t i = cfg.conv.size(); i-- > 0;) {
        if (cfg.conv[i].pooled) {
            const PoolRecord& rec = records[--rec_idx];
            if (rec.in_shape != std::vector<std::size_t>{plan.conv_out[i][0], plan.conv_out[i][1],
                                                         plan.conv_out[i][2]})
                throw Error(ErrorCode::invalid_argument, "pool record shape mismatch");
            a = unpool2d(a, rec);
        }
        a = deconv2d(a, p.d_deconv[i]);
        if (i > 0) a = relu(a);
    }
    return a;
}

// ---- checkpoint io ----------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'R', '2', 'C'};
constexpr std::uint16_t kVersion = 1;

void put_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }
void put_u16(std::ostream& os, std::uint16_t v) {
    put_u8(os, v & 0xFF);
    put_u8(os, v >> 8);
}
void put_u32(std::ostream& os, std::uint32_t v) {
    put_u16(os, v & 0xFFFF);
    put_u16(os, v >> 16);
}
void put_str(std::ostream& os, const std::string& s) {
    put_u16(os, static_cast<std::uint16_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint8_t get_u8(std::istream& is) {
    int c = is.get();
    if (c == EOF) throw Error(ErrorCode::data_format, "truncated checkpoint");
    return static_cast<std::uint8_t>(c);
}
std::uint16_t get_u16(std::istream& is) {
    std::uint16_t lo = get_u8(is), hi = get_u8(is);
    return static_cast<std::uint16_t>(lo | (hi << 8));
}
std::uint32_t get_u32(std::istream& is) {
    std::uint32_t lo = get_u16(is), hi = get_u16(is);
    return lo | (hi << 16);
}
std::string get_str(std::istream& is) {
    std::uint16_t len = get_u16(is);
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (is.gcount() != len) throw Error(ErrorCode::data_format, "truncated checkpoint");
    return s;
}

void write_config(std::ostream& os, const ArchConfig& cfg) {
    put_u16(os, static_cast<std::uint16_t>(cfg.in_ch));
    put_u16(os, static_cast<std::uint16_t>(cfg.in_h));
    put_u16(os, static_cast<std::uint16_t>(cfg.in_w));
    put_u16(os, static_cast<std::uint16_t>(cfg.conv.size()));
    for (const ConvLayerSpec& l : cfg.conv) {
        put_u32(os, static_cast<std::uint32_t>(l.out_ch));
        put_u16(os, static_cast<std::uint16_t>(l.kh));
        put_u16(os, static_cast<std::uint16_t>(l.kw));
        put_u16(os, static_cast<std::uint16_t>(l.sh));
        put_u16(os, static_cast<std::uint16_t>(l.sw));
        put_u16(os, static_cast<std::uint16_t>(l.ph));
        put_u16(os, static_cast<std::uint16_t>(l.pw));
        put_u8(os, l.pooled ? 1 : 0);
        put_u8(os, static_cast<std::uint8_t>(l.pool_mode));
        put_u16(os, static_cast<std::uint16_t>(l.pool_h));
        put_u16(os, static_cast<std::uint16_t>(l.pool_w));
    }
    put_u16(os, static_cast<std::uint16_t>(cfg.feature_dense.size()));
    for (std::size_t w : cfg.feature_dense) put_u32(os, static_cast<std::uint32_t>(w));
    put_u32(os, static_cast<std::uint32_t>(cfg.semantic_dim));
    put_u16(os, static_cast<std::uint16_t>(cfg.classifier_dense.size()));
    for (std::size_t w : cfg.classifier_dense) put_u32(os, static_cast<std::uint32_t>(w));
    put_u16(os, static_cast<std::uint16_t>(cfg.num_known));
    for (std::size_t i = 0; i < cfg.num_known; ++i)
        put_str(os, cfg.class_names.empty() ? std::string("class_") + std::to_string(i)
                                            : cfg.class_names[i]);
}

ArchConfig read_config(std::istream& is) {
    ArchConfig cfg;
    cfg.in_ch = get_u16(is);
    cfg.in_h = get_u16(is);
    cfg.in_w = get_u16(is);
    std::uint16_t n_conv = get_u16(is);
    for (std::uint16_t i = 0; i < n_conv; ++i) {
        ConvLayerSpec l;
        l.out_ch = get_u32(is);
        l.kh = get_u16(is);
        l.kw = get_u16(is);
        l.sh = get_u16(is);
        l.sw = get_u16(is);
        l.ph = get_u16(is);
        l.pw = get_u16(is);
        l.pooled = get_u8(is) != 0;
        std::uint8_t mode = get_u8(is);
        if (mode != 1 && mode != 2) throw Error(ErrorCode::data_format, "bad pool mode");
        l.pool_mode = static_cast<PoolMode>(mode);
        l.pool_h = get_u16(is);
        l.pool_w = get_u16(is);
        cfg.conv.push_back(l);
    }
    std::uint16_t n_fd = get_u16(is);
    for (std::uint16_t i = 0; i < n_fd; ++i) cfg.feature_dense.push_back(get_u32(is));
    cfg.semantic_dim = get_u32(is);
    std::uint16_t n_cd = get_u16(is);
    for (std::uint16_t i = 0; i < n_cd; ++i) cfg.classifier_dense.push_back(get_u32(is));
    cfg.num_known = get_u16(is);
    for (std::size_t i = 0; i < cfg.num_known; ++i) cfg.class_names.push_back(get_str(is));
    return cfg;
}

}  // namespace

void save_checkpoint(const ModelParams<float>& p, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::io, "cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    put_u16(os, kVersion);
    write_config(os, p.cfg);
    auto tensors = p.named_tensors();
    put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (auto& [name, t] : tensors) {
        put_u8(os, static_cast<std::uint8_t>(t->rank()));
        for (std::size_t e : t->shape) put_u32(os, static_cast<std::uint32_t>(e));
        os.write(reinterpret_cast<const char*>(t->ptr()),
                 static_cast<std::streamsize>(t->numel() * sizeof(float)));
    }
    os.flush();
    if (!os) throw Error(ErrorCode::io, "failed writing checkpoint: " + path);
}

ModelParams<float> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::io, "cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw Error(ErrorCode::data_format, "bad checkpoint magic");
    std::uint16_t version = get_u16(is);
    if (version != kVersion)
        throw Error(ErrorCode::data_format,
                    "unsupported checkpoint version " + std::to_string(version));
    ArchConfig cfg = read_config(is);
    ModelParams<float> p;
    p.allocate(cfg);
    auto tensors = p.named_tensors();
    std::uint32_t count = get_u32(is);
    if (count != tensors.size())
        throw Error(ErrorCode::data_format, "checkpoint tensor count mismatch");
    for (auto& [name, t] : tensors) {
        std::uint8_t rank = get_u8(is);
        if (rank != t->rank()) throw Error(ErrorCode::data_format, "checkpoint rank mismatch");
        for (std::size_t d = 0; d < rank; ++d)
            if (get_u32(is) != t->shape[d])
                throw Error(ErrorCode::data_format, "checkpoint shape mismatch for " + name);
        is.read(reinterpret_cast<char*>(t->ptr()),
                static_cast<std::streamsize>(t->numel() * sizeof(float)));
        if (static_cast<std::size_t>(is.gcount()) != t->numel() * sizeof(float))
            throw Error(ErrorCode::data_format, "truncated checkpoint");
    }
    is.peek();
    if (!is.eof()) throw Error(ErrorCode::data_format, "trailing bytes in checkpoint");
    return p;
}

#define SR2CNN_INSTANTIATE(T)                                                                    \
    template struct ModelParams<T>;                                                             \
    template ModelParams<T> init_params<T>(const ArchConfig&, std::uint64_t);                    \
    template void forward_sample<T>(const ModelParams<T>&, const Tensor<T>&, Workspace<T>&);     \
    template void backward_sample<T>(const ModelParams<T>&, const Workspace<T>&,                 \
                                     const Tensor<T>&, std::uint16_t, const LossWeights&,        \
                                     std::size_t, ModelParams<T>&);                              \
    template std::pair<Tensor<T>, std::vector<PoolRecord>> extract_features<T>(                  \
        const Tensor<T>&, const ModelParams<T>&);                                                \
    template Tensor<T> classify<T>(const Tensor<T>&, const ModelParams<T>&);                     \
    template Tensor<T> decode<T>(const Tensor<T>&, const std::vector<PoolRecord>&,               \
                                 const ModelParams<T>&);

SR2CNN_INSTANTIATE(float)
SR2CNN_INSTANTIATE(double)

#undef SR2CNN_INSTANTIATE

}  // namespace sr2cnn
