#include "sr2cnn/nn.hpp"

#include <algorithm>
#include <cmath>

namespace sr2cnn {

namespace {

// valid output-coordinate range [lo, hi] for one axis so that
// in_coord = out_coord * stride + k - pad stays inside [0, in_extent)
inline void valid_out_range(std::ptrdiff_t out_extent, std::ptrdiff_t in_extent,
                            std::ptrdiff_t stride, std::ptrdiff_t k, std::ptrdiff_t pad,
                            std::ptrdiff_t& lo, std::ptrdiff_t& hi) {
    std::ptrdiff_t shift = k - pad;
    // lo: smallest o with o*stride + shift >= 0
    lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
    // hi: largest o with o*stride + shift <= in_extent - 1
    hi = (in_extent - 1 - shift) / stride;
    if (in_extent - 1 - shift < 0) hi = -1;
    lo = std::max<std::ptrdiff_t>(lo, 0);
    hi = std::min<std::ptrdiff_t>(hi, out_extent - 1);
}

template <typename T>
void check_conv_input(const Tensor<T>& input, const ConvSpec<T>& spec) {
    spec.validate();
    if (input.rank() != 3)
        throw Error(ErrorCode::shape_mismatch, "conv input must be (channels, H, W)");
    if (input.extent(0) != spec.in_channels())
        throw Error(ErrorCode::shape_mismatch, "conv input channels != kernel in channels");
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvSpec<T>& spec) {
    check_conv_input(input, spec);
    require_finite(input, "conv2d input");

    const std::size_t IC = spec.in_channels(), OC = spec.out_channels();
    const std::size_t H = input.extent(1), W = input.extent(2);
    const std::size_t KH = spec.kernel_h(), KW = spec.kernel_w();
    const std::size_t OH = conv_out_extent(H, KH, spec.stride_h, spec.pad_h);
    const std::size_t OW = conv_out_extent(W, KW, spec.stride_w, spec.pad_w);

    Tensor<T> out({OC, OH, OW});
    const T* in = input.ptr();
    const T* k = spec.kernel.ptr();
    T* o = out.ptr();

    const std::ptrdiff_t sh = spec.stride_h, sw = spec.stride_w;
    const std::ptrdiff_t ph = spec.pad_h, pw = spec.pad_w;

    for (std::size_t oc = 0; oc < OC; ++oc) {
        T b = spec.bias.numel() ? spec.bias(oc) : T(0);
        std::fill(o + oc * OH * OW, o + (oc + 1) * OH * OW, b);
    }
    for (std::size_t oc = 0; oc < OC; ++oc) {
        for (std::size_t ic = 0; ic < IC; ++ic) {
            for (std::size_t kh = 0; kh < KH; ++kh) {
                std::ptrdiff_t oh_lo, oh_hi;
                valid_out_range(OH, H, sh, (std::ptrdiff_t)kh, ph, oh_lo, oh_hi);
                for (std::size_t kw = 0; kw < KW; ++kw) {
                    const T w = k[((oc * IC + ic) * KH + kh) * KW + kw];
                    if (w == T(0)) continue;
                    std::ptrdiff_t ow_lo, ow_hi;
                    valid_out_range(OW, W, sw, (std::ptrdiff_t)kw, pw, ow_lo, ow_hi);
                    const std::ptrdiff_t shift = (std::ptrdiff_t)kw - pw;
                    for (std::ptrdiff_t oh = oh_lo; oh <= oh_hi; ++oh) {
                        const std::ptrdiff_t ih = oh * sh + (std::ptrdiff_t)kh - ph;
                        const T* in_row = in + (ic * H + ih) * W;
                        T* out_row = o + (oc * OH + oh) * OW;
                        if (sw == 1) {
                            for (std::ptrdiff_t ow = ow_lo; ow <= ow_hi; ++ow)
                                out_row[ow] += w * in_row[ow + shift];
                        } else {
                            for (std::ptrdiff_t ow = ow_lo; ow <= ow_hi; ++ow)
                                out_row[ow] += w * in_row[ow * sw + shift];
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_grad(const Tensor<T>& upstream, const Tensor<T>& input,
                         const ConvSpec<T>& spec) {
    check_conv_input(input, spec);
    const std::size_t IC = spec.in_channels(), OC = spec.out_channels();
    const std::size_t H = input.extent(1), W = input.extent(2);
    const std::size_t KH = spec.kernel_h(), KW = spec.kernel_w();
    const std::size_t OH = conv_out_extent(H, KH, spec.stride_h, spec.pad_h);
    const std::size_t OW = conv_out_extent(W, KW, spec.stride_w, spec.pad_w);
    require_shape(upstream, {OC, OH, OW}, "conv2d_grad upstream");

    ConvGrads<T> g;
    g.input = Tensor<T>({IC, H, W});
    g.kernel = Tensor<T>(spec.kernel.shape);
    g.bias = Tensor<T>({OC});

    const T* up = upstream.ptr();
    const T* in = input.ptr();
    const T* k = spec.kernel.ptr();

    for (std::size_t oc = 0; oc < OC; ++oc) {
        T acc = T(0);
        const T* plane = up + oc * OH * OW;
        for (std::size_t i = 0; i < OH * OW; ++i) acc += plane[i];
        g.bias(oc) = acc;
    }

    const std::ptrdiff_t sh = spec.stride_h, sw = spec.stride_w;
    const std::ptrdiff_t ph = spec.pad_h, pw = spec.pad_w;

    for (std::size_t oc = 0; oc < OC; ++oc) {
        for (std::size_t ic = 0; ic < IC; ++ic) {
            for (std::size_t kh = 0; kh < KH; ++kh) {
                std::ptrdiff_t oh_lo, oh_hi;
                valid_out_range(OH, H, sh, (std::ptrdiff_t)kh, ph, oh_lo, oh_hi);
                for (std::size_t kw = 0; kw < KW; ++kw) {
                    std::ptrdiff_t ow_lo, ow_hi;
                    valid_out_range(OW, W, sw, (std::ptrdiff_t)kw, pw, ow_lo, ow_hi);
                    const T w = k[((oc * IC + ic) * KH + kh) * KW + kw];
                    const std::ptrdiff_t shift = (std::ptrdiff_t)kw - pw;
                    T wg = T(0);
                    for (std::ptrdiff_t oh = oh_lo; oh <= oh_hi; ++oh) {
                        const std::ptrdiff_t ih = oh * sh + (std::ptrdiff_t)kh - ph;
                        const T* in_row = in + (ic * H + ih) * W;
                        const T* up_row = up + (oc * OH + oh) * OW;
                        T* gi_row = g.input.ptr() + (ic * H + ih) * W;
                        if (sw == 1) {
                            for (std::ptrdiff_t ow = ow_lo; ow <= ow_hi; ++ow) {
                                wg += in_row[ow + shift] * up_row[ow];
                                gi_row[ow + shift] += w * up_row[ow];
                            }
                        } else {
                            for (std::ptrdiff_t ow = ow_lo; ow <= ow_hi; ++ow) {
                                wg += in_row[ow * sw + shift] * up_row[ow];
                                gi_row[ow * sw + shift] += w * up_row[ow];
                            }
                        }
                    }
                    g.kernel(oc, ic, kh, kw) = wg;
                }
            }
        }
    }
    return g;
}

template <typename T>
Tensor<T> deconv2d(const Tensor<T>& input, const ConvSpec<T>& spec) {
    spec.validate();
    if (input.rank() != 3)
        throw Error(ErrorCode::shape_mismatch, "deconv input must be (channels, H, W)");
    if (input.extent(0) != spec.in_channels())
        throw Error(ErrorCode::shape_mismatch, "deconv input channels != kernel in channels");

    const std::size_t CS = spec.in_channels(), CB = spec.out_channels();
    const std::size_t h = input.extent(1), w = input.extent(2);
    const std::size_t KH = spec.kernel_h(), KW = spec.kernel_w();
    const std::size_t H = deconv_out_extent(h, KH, spec.stride_h, spec.pad_h);
    const std::size_t W = deconv_out_extent(w, KW, spec.stride_w, spec.pad_w);

    Tensor<T> out({CB, H, W});
    const T* in = input.ptr();
    const T* k = spec.kernel.ptr();
    T* o = out.ptr();

    for (std::size_t cb = 0; cb < CB; ++cb) {
        T b = spec.bias.numel() ? spec.bias(cb) : T(0);
        std::fill(o + cb * H * W, o + (cb + 1) * H * W, b);
    }

    const std::ptrdiff_t sh = spec.stride_h, sw = spec.stride_w;
    const std::ptrdiff_t ph = spec.pad_h, pw = spec.pad_w;

    for (std::size_t cb = 0; cb < CB; ++cb) {
        for (std::size_t cs = 0; cs < CS; ++cs) {
            for (std::size_t kh = 0; kh < KH; ++kh) {
                std::ptrdiff_t oh_lo, oh_hi;
                valid_out_range(h, H, sh, (std::ptrdiff_t)kh, ph, oh_lo, oh_hi);
                for (std::size_t kw = 0; kw < KW; ++kw) {
                    const T wv = k[((cb * CS + cs) * KH + kh) * KW + kw];
                    if (wv == T(0)) continue;
                    std::ptrdiff_t ow_lo, ow_hi;
                    valid_out_range(w, W, sw, (std::ptrdiff_t)kw, pw, ow_lo, ow_hi);
                    const std::ptrdiff_t shift = (std::ptrdiff_t)kw - pw;
                    for (std::ptrdiff_t oh = oh_lo; oh <= oh_hi; ++oh) {
                        const std::ptrdiff_t ih = oh * sh + (std::ptrdiff_t)kh - ph;
                        const T* in_row = in + (cs * h + oh) * w;
                        T* out_row = o + (cb * H + ih) * W;
                        if (sw == 1) {
                            for (std::ptrdiff_t ow = ow_lo; ow <= ow_hi; ++ow)
                                out_row[ow + shift] += wv * in_row[ow];
                        } else {
                            for (std::ptrdiff_t ow = ow_lo; ow <= ow_hi; ++ow)
                                out_row[ow * sw + shift] += wv * in_row[ow];
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
ConvGrads<T> deconv2d_grad(const Tensor<T>& upstream, const Tensor<T>& input,
                           const ConvSpec<T>& spec) {
    spec.validate();
    const std::size_t CS = spec.in_channels(), CB = spec.out_channels();
    const std::size_t h = input.extent(1), w = input.extent(2);
    const std::size_t KH = spec.kernel_h(), KW = spec.kernel_w();
    const std::size_t H = deconv_out_extent(h, KH, spec.stride_h, spec.pad_h);
    const std::size_t W = deconv_out_extent(w, KW, spec.stride_w, spec.pad_w);
    require_shape(upstream, {CB, H, W}, "deconv2d_grad upstream");

    ConvGrads<T> g;
    g.input = Tensor<T>({CS, h, w});
    g.kernel = Tensor<T>(spec.kernel.shape);
    g.bias = Tensor<T>({CB});

    const T* up = upstream.ptr();
    const T* in = input.ptr();
    const T* k = spec.kernel.ptr();

    for (std::size_t cb = 0; cb < CB; ++cb) {
        T acc = T(0);
        const T* plane = up + cb * H * W;
        for (std::size_t i = 0; i < H * W; ++i) acc += plane[i];
        g.bias(cb) = acc;
    }

    const std::ptrdiff_t sh = spec.stride_h, sw = spec.stride_w;
    const std::ptrdiff_t ph = spec.pad_h, pw = spec.pad_w;

    for (std::size_t cb = 0; cb < CB; ++cb) {
        for (std::size_t cs = 0; cs < CS; ++cs) {
            for (std::size_t kh = 0; kh < KH; ++kh) {
                std::ptrdiff_t oh_lo, oh_hi;
                valid_out_range(h, H, sh, (std::ptrdiff_t)kh, ph, oh_lo, oh_hi);
                for (std::size_t kw = 0; kw < KW; ++kw) {
                    const T wv = k[((cb * CS + cs) * KH + kh) * KW + kw];
                    std::ptrdiff_t ow_lo, ow_hi;
                    valid_out_range(w, W, sw, (std::ptrdiff_t)kw, pw, ow_lo, ow_hi);
                    const std::ptrdiff_t shift = (std::ptrdiff_t)kw - pw;
                    T wg = T(0);
                    for (std::ptrdiff_t oh = oh_lo; oh <= oh_hi; ++oh) {
                        const std::ptrdiff_t ih = oh * sh + (std::ptrdiff_t)kh - ph;
                        const T* up_row = up + (cb * H + ih) * W;
                        const T* in_row = in + (cs * h + oh) * w;
                        T* gi_row = g.input.ptr() + (cs * h + oh) * w;
                        if (sw == 1) {
                            for (std::ptrdiff_t ow = ow_lo; ow <= ow_hi; ++ow) {
                                wg += in_row[ow] * up_row[ow + shift];
                                gi_row[ow] += wv * up_row[ow + shift];
                            }
                        } else {
                            for (std::ptrdiff_t ow = ow_lo; ow <= ow_hi; ++ow) {
                                wg += in_row[ow] * up_row[ow * sw + shift];
                                gi_row[ow] += wv * up_row[ow * sw + shift];
                            }
                        }
                    }
                    g.kernel(cb, cs, kh, kw) = wg;
                }
            }
        }
    }
    return g;
}

template <typename T>
Tensor<T> build_conv_matrix(const ConvSpec<T>& spec, std::size_t in_h, std::size_t in_w) {
    spec.validate();
    if (spec.in_channels() != 1 || spec.out_channels() != 1)
        throw Error(ErrorCode::invalid_argument,
                    "build_conv_matrix supports single-channel specs only");
    const std::size_t KH = spec.kernel_h(), KW = spec.kernel_w();
    const std::size_t OH = conv_out_extent(in_h, KH, spec.stride_h, spec.pad_h);
    const std::size_t OW = conv_out_extent(in_w, KW, spec.stride_w, spec.pad_w);

    Tensor<T> m({OH * OW, in_h * in_w});
    for (std::size_t oh = 0; oh < OH; ++oh) {
        for (std::size_t ow = 0; ow < OW; ++ow) {
            const std::size_t row = oh * OW + ow;
            for (std::size_t kh = 0; kh < KH; ++kh) {
                std::ptrdiff_t ih = (std::ptrdiff_t)(oh * spec.stride_h + kh) - (std::ptrdiff_t)spec.pad_h;
                if (ih < 0 || ih >= (std::ptrdiff_t)in_h) continue;
                for (std::size_t kw = 0; kw < KW; ++kw) {
                    std::ptrdiff_t iw = (std::ptrdiff_t)(ow * spec.stride_w + kw) - (std::ptrdiff_t)spec.pad_w;
                    if (iw < 0 || iw >= (std::ptrdiff_t)in_w) continue;
                    m(row, (std::size_t)ih * in_w + (std::size_t)iw) = spec.kernel(0, 0, kh, kw);
                }
            }
        }
    }
    return m;
}

template <typename T>
std::pair<Tensor<T>, PoolRecord> pool2d(const Tensor<T>& input, PoolMode mode,
                                        std::size_t window_h, std::size_t window_w,
                                        std::size_t stride_h, std::size_t stride_w) {
    if (input.rank() != 3)
        throw Error(ErrorCode::shape_mismatch, "pool input must be (channels, H, W)");
    const std::size_t C = input.extent(0), H = input.extent(1), W = input.extent(2);
    if (window_h == 0 || window_w == 0 || stride_h != window_h || stride_w != window_w ||
        H % window_h != 0 || W % window_w != 0)
        throw Error(ErrorCode::invalid_argument, "pool window/stride must tile the input exactly");

    const std::size_t OH = H / window_h, OW = W / window_w;
    Tensor<T> out({C, OH, OW});
    PoolRecord rec;
    rec.mode = mode;
    rec.window_h = window_h;
    rec.window_w = window_w;
    rec.stride_h = stride_h;
    rec.stride_w = stride_w;
    rec.in_shape = {C, H, W};
    if (mode == PoolMode::max) rec.argmax.resize(out.numel());

    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t oh = 0; oh < OH; ++oh) {
            for (std::size_t ow = 0; ow < OW; ++ow) {
                const std::size_t out_idx = (c * OH + oh) * OW + ow;
                if (mode == PoolMode::max) {
                    T best = input(c, oh * window_h, ow * window_w);
                    std::size_t best_off = (c * H + oh * window_h) * W + ow * window_w;
                    for (std::size_t i = 0; i < window_h; ++i) {
                        for (std::size_t j = 0; j < window_w; ++j) {
                            T v = input(c, oh * window_h + i, ow * window_w + j);
                            if (v > best) {
                                best = v;
                                best_off = (c * H + oh * window_h + i) * W + ow * window_w + j;
                            }
                        }
                    }
                    out.data[out_idx] = best;
                    rec.argmax[out_idx] = static_cast<std::uint32_t>(best_off);
                } else {
                    T acc = T(0);
                    for (std::size_t i = 0; i < window_h; ++i)
                        for (std::size_t j = 0; j < window_w; ++j)
                            acc += input(c, oh * window_h + i, ow * window_w + j);
                    out.data[out_idx] = acc / static_cast<T>(window_h * window_w);
                }
            }
        }
    }
    return {std::move(out), std::move(rec)};
}

template <typename T>
Tensor<T> unpool2d(const Tensor<T>& input, const PoolRecord& record) {
    if (record.in_shape.size() != 3)
        throw Error(ErrorCode::invalid_argument, "pool record missing input shape");
    const std::size_t C = record.in_shape[0], H = record.in_shape[1], W = record.in_shape[2];
    const std::size_t OH = H / record.window_h, OW = W / record.window_w;
    require_shape(input, {C, OH, OW}, "unpool2d input");

    Tensor<T> out({C, H, W});
    if (record.mode == PoolMode::max) {
        if (record.argmax.size() != input.numel())
            throw Error(ErrorCode::invalid_argument, "stale pool record: argmax count mismatch");
        for (std::size_t i = 0; i < input.numel(); ++i) {
            std::size_t off = record.argmax[i];
            if (off >= out.numel())
                throw Error(ErrorCode::invalid_argument, "stale pool record: offset out of range");
            out.data[off] = input.data[i];
        }
    } else {
        // copy semantics: each pooled value fills its whole window
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t oh = 0; oh < OH; ++oh)
                for (std::size_t ow = 0; ow < OW; ++ow) {
                    T v = input(c, oh, ow);
                    for (std::size_t i = 0; i < record.window_h; ++i)
                        for (std::size_t j = 0; j < record.window_w; ++j)
                            out(c, oh * record.window_h + i, ow * record.window_w + j) = v;
                }
    }
    return out;
}

template <typename T>
Tensor<T> pool2d_grad(const Tensor<T>& upstream, const PoolRecord& record) {
    const std::size_t C = record.in_shape[0], H = record.in_shape[1], W = record.in_shape[2];
    const std::size_t OH = H / record.window_h, OW = W / record.window_w;
    require_shape(upstream, {C, OH, OW}, "pool2d_grad upstream");
    Tensor<T> out({C, H, W});
    if (record.mode == PoolMode::max) {
        for (std::size_t i = 0; i < upstream.numel(); ++i)
            out.data[record.argmax[i]] += upstream.data[i];
    } else {
        const T inv = T(1) / static_cast<T>(record.window_h * record.window_w);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t oh = 0; oh < OH; ++oh)
                for (std::size_t ow = 0; ow < OW; ++ow) {
                    T v = upstream(c, oh, ow) * inv;
                    for (std::size_t i = 0; i < record.window_h; ++i)
                        for (std::size_t j = 0; j < record.window_w; ++j)
                            out(c, oh * record.window_h + i, ow * record.window_w + j) = v;
                }
    }
    return out;
}

template <typename T>
Tensor<T> unpool2d_grad(const Tensor<T>& upstream, const PoolRecord& record) {
    const std::size_t C = record.in_shape[0], H = record.in_shape[1], W = record.in_shape[2];
    require_shape(upstream, {C, H, W}, "unpool2d_grad upstream");
    const std::size_t OH = H / record.window_h, OW = W / record.window_w;
    Tensor<T> out({C, OH, OW});
    if (record.mode == PoolMode::max) {
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = upstream.data[record.argmax[i]];
    } else {
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t oh = 0; oh < OH; ++oh)
                for (std::size_t ow = 0; ow < OW; ++ow) {
                    T acc = T(0);
                    for (std::size_t i = 0; i < record.window_h; ++i)
                        for (std::size_t j = 0; j < record.window_w; ++j)
                            acc += upstream(c, oh * record.window_h + i, ow * record.window_w + j);
                    out(c, oh, ow) = acc;
                }
    }
    return out;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
    if (weights.rank() != 2)
        throw Error(ErrorCode::shape_mismatch, "dense weights must be (out, in)");
    const std::size_t OUT = weights.extent(0), IN = weights.extent(1);
    if (input.numel() != IN)
        throw Error(ErrorCode::shape_mismatch, "dense input length != weight columns");
    if (bias.numel() != 0 && bias.numel() != OUT)
        throw Error(ErrorCode::shape_mismatch, "dense bias length != weight rows");

    Tensor<T> out({OUT});
    const T* x = input.ptr();
    const T* w = weights.ptr();
    for (std::size_t r = 0; r < OUT; ++r) {
        T acc = bias.numel() ? bias(r) : T(0);
        const T* row = w + r * IN;
        for (std::size_t c = 0; c < IN; ++c) acc += row[c] * x[c];
        out(r) = acc;
    }
    return out;
}

template <typename T>
DenseGrads<T> dense_grad(const Tensor<T>& upstream, const Tensor<T>& input,
                         const Tensor<T>& weights) {
    const std::size_t OUT = weights.extent(0), IN = weights.extent(1);
    if (upstream.numel() != OUT)
        throw Error(ErrorCode::shape_mismatch, "dense upstream length != weight rows");
    if (input.numel() != IN)
        throw Error(ErrorCode::shape_mismatch, "dense input length != weight columns");

    DenseGrads<T> g;
    g.input = Tensor<T>({IN});
    g.weights = Tensor<T>(weights.shape);
    g.bias = Tensor<T>({OUT});
    const T* up = upstream.ptr();
    const T* x = input.ptr();
    const T* w = weights.ptr();
    for (std::size_t r = 0; r < OUT; ++r) {
        const T u = up[r];
        g.bias(r) = u;
        T* gw_row = g.weights.ptr() + r * IN;
        const T* w_row = w + r * IN;
        T* gx = g.input.ptr();
        for (std::size_t c = 0; c < IN; ++c) {
            gw_row[c] = u * x[c];
            gx[c] += u * w_row[c];
        }
    }
    return g;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
    Tensor<T> out(input.shape);
    for (std::size_t i = 0; i < input.numel(); ++i)
        out.data[i] = input.data[i] > T(0) ? input.data[i] : T(0);
    return out;
}

template <typename T>
Tensor<T> relu_grad(const Tensor<T>& upstream, const Tensor<T>& input) {
    if (!upstream.same_shape(input))
        throw Error(ErrorCode::shape_mismatch, "relu_grad shape mismatch");
    Tensor<T> out(input.shape);
    for (std::size_t i = 0; i < input.numel(); ++i)
        out.data[i] = input.data[i] > T(0) ? upstream.data[i] : T(0);
    return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    require_finite(logits, "softmax input");
    if (logits.numel() == 0) throw Error(ErrorCode::invalid_argument, "softmax of empty tensor");
    Tensor<T> out(logits.shape);
    T mx = logits.data[0];
    for (T v : logits.data) mx = std::max(mx, v);
    T sum = T(0);
    for (std::size_t i = 0; i < logits.numel(); ++i) {
        out.data[i] = std::exp(logits.data[i] - mx);
        sum += out.data[i];
    }
    for (std::size_t i = 0; i < logits.numel(); ++i) out.data[i] /= sum;
    return out;
}

template <typename T>
Tensor<T> softmax_grad(const Tensor<T>& upstream, const Tensor<T>& probs) {
    if (!upstream.same_shape(probs))
        throw Error(ErrorCode::shape_mismatch, "softmax_grad shape mismatch");
    T dot = T(0);
    for (std::size_t i = 0; i < probs.numel(); ++i) dot += upstream.data[i] * probs.data[i];
    Tensor<T> out(probs.shape);
    for (std::size_t i = 0; i < probs.numel(); ++i)
        out.data[i] = probs.data[i] * (upstream.data[i] - dot);
    return out;
}

template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
               AdamState<T>& state, T eta) {
    if (!(eta > T(0))) throw Error(ErrorCode::invalid_argument, "adam eta must be > 0");
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw Error(ErrorCode::shape_mismatch, "adam parameter/gradient/state count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(state.m[i]))
            throw Error(ErrorCode::shape_mismatch, "adam tensor shape mismatch");
        if (!grads[i]->all_finite())
            throw Error(ErrorCode::numeric, "non-finite gradient in adam_step; step aborted");
    }

    state.step += 1;
    const T b1 = state.beta1, b2 = state.beta2;
    const T c1 = T(1) - std::pow(b1, static_cast<T>(state.step));
    const T c2 = T(1) - std::pow(b2, static_cast<T>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        T* p = params[i]->ptr();
        const T* g = grads[i]->ptr();
        T* m = state.m[i].ptr();
        T* v = state.v[i].ptr();
        const std::size_t n = params[i]->numel();
        for (std::size_t j = 0; j < n; ++j) {
            m[j] = b1 * m[j] + (T(1) - b1) * g[j];
            v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
            const T mhat = m[j] / c1;
            const T vhat = v[j] / c2;
            p[j] -= eta * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double grad_check(const std::function<double(const Tensor<double>&)>& f,
                  const Tensor<double>& point, const Tensor<double>& analytic_grad, double step,
                  const std::vector<std::size_t>& probe_indices) {
    if (!point.same_shape(analytic_grad))
        throw Error(ErrorCode::shape_mismatch, "grad_check point/gradient shape mismatch");
    std::vector<std::size_t> probes = probe_indices;
    if (probes.empty()) {
        probes.resize(point.numel());
        for (std::size_t i = 0; i < probes.size(); ++i) probes[i] = i;
    }
    Tensor<double> x = point;
    double worst = 0.0;
    for (std::size_t idx : probes) {
        const double orig = x.data[idx];
        x.data[idx] = orig + step;
        const double fp = f(x);
        x.data[idx] = orig - step;
        const double fm = f(x);
        x.data[idx] = orig;
        const double num = (fp - fm) / (2.0 * step);
        const double ana = analytic_grad.data[idx];
        const double denom = std::max({1.0, std::abs(num), std::abs(ana)});
        worst = std::max(worst, std::abs(num - ana) / denom);
    }
    return worst;
}

#define SR2CNN_INSTANTIATE(T)                                                                  \
    template Tensor<T> conv2d<T>(const Tensor<T>&, const ConvSpec<T>&);                        \
    template ConvGrads<T> conv2d_grad<T>(const Tensor<T>&, const Tensor<T>&,                  \
                                         const ConvSpec<T>&);                                  \
    template Tensor<T> deconv2d<T>(const Tensor<T>&, const ConvSpec<T>&);                      \
    template ConvGrads<T> deconv2d_grad<T>(const Tensor<T>&, const Tensor<T>&,                \
                                           const ConvSpec<T>&);                                \
    template Tensor<T> build_conv_matrix<T>(const ConvSpec<T>&, std::size_t, std::size_t);     \
    template std::pair<Tensor<T>, PoolRecord> pool2d<T>(const Tensor<T>&, PoolMode,            \
                                                        std::size_t, std::size_t, std::size_t, \
                                                        std::size_t);                          \
    template Tensor<T> unpool2d<T>(const Tensor<T>&, const PoolRecord&);                       \
    template Tensor<T> pool2d_grad<T>(const Tensor<T>&, const PoolRecord&);                    \
    template Tensor<T> unpool2d_grad<T>(const Tensor<T>&, const PoolRecord&);                  \
    template Tensor<T> dense<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);         \
    template DenseGrads<T> dense_grad<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);\
    template Tensor<T> relu<T>(const Tensor<T>&);                                              \
    template Tensor<T> relu_grad<T>(const Tensor<T>&, const Tensor<T>&);                       \
    template Tensor<T> softmax<T>(const Tensor<T>&);                                           \
    template Tensor<T> softmax_grad<T>(const Tensor<T>&, const Tensor<T>&);                    \
    template void adam_step<T>(const std::vector<Tensor<T>*>&,                                 \
                               const std::vector<const Tensor<T>*>&, AdamState<T>&, T);

SR2CNN_INSTANTIATE(float)
SR2CNN_INSTANTIATE(double)

#undef SR2CNN_INSTANTIATE

}  // namespace sr2cnn
