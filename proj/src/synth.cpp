#include "sr2cnn/synth.hpp"

#include <algorithm>
#include <cmath>

#include "sr2cnn/rng.hpp"
#include "sr2cnn/threading.hpp"

namespace sr2cnn::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;
using cplx = std::complex<double>;

const char* kNames[kNumModulations] = {"BPSK", "QPSK", "8PSK",  "16QAM",  "64QAM", "PAM4",
                                       "GFSK", "CPFSK", "B-FM", "AM-DSB", "AM-SSB"};

// unit-average-power constellations
std::vector<cplx> constellation(ModulationType type) {
    switch (type) {
        case ModulationType::BPSK:
            return {{1, 0}, {-1, 0}};
        case ModulationType::QPSK: {
            const double s = 1.0 / std::sqrt(2.0);
            return {{s, s}, {-s, s}, {-s, -s}, {s, -s}};
        }
        case ModulationType::PSK8: {
            std::vector<cplx> pts;
            for (int k = 0; k < 8; ++k)
                pts.push_back({std::cos(kPi * k / 4.0), std::sin(kPi * k / 4.0)});
            return pts;
        }
        case ModulationType::QAM16: {
            std::vector<cplx> pts;
            const double s = 1.0 / std::sqrt(10.0);
            for (int i : {-3, -1, 1, 3})
                for (int q : {-3, -1, 1, 3}) pts.push_back({i * s, q * s});
            return pts;
        }
        case ModulationType::QAM64: {
            std::vector<cplx> pts;
            const double s = 1.0 / std::sqrt(42.0);
            for (int i = -7; i <= 7; i += 2)
                for (int q = -7; q <= 7; q += 2) pts.push_back({i * s, q * s});
            return pts;
        }
        case ModulationType::PAM4: {
            const double s = 1.0 / std::sqrt(5.0);
            return {{-3 * s, 0}, {-s, 0}, {s, 0}, {3 * s, 0}};
        }
        default:
            throw Error(ErrorCode::invalid_argument, "not a linear modulation");
    }
}

// root-raised-cosine taps over [-span*T, span*T], T = sps samples
std::vector<double> rrc_taps(double beta, std::size_t sps, std::size_t span) {
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(span * sps);
    std::vector<double> g(2 * half + 1);
    for (std::ptrdiff_t n = -half; n <= half; ++n) {
        const double t = static_cast<double>(n) / static_cast<double>(sps);
        double v;
        if (std::abs(t) < 1e-12) {
            v = 1.0 - beta + 4.0 * beta / kPi;
        } else if (std::abs(std::abs(4.0 * beta * t) - 1.0) < 1e-9) {
            v = beta / std::sqrt(2.0) *
                ((1 + 2 / kPi) * std::sin(kPi / (4 * beta)) +
                 (1 - 2 / kPi) * std::cos(kPi / (4 * beta)));
        } else {
            v = (std::sin(kPi * t * (1 - beta)) + 4 * beta * t * std::cos(kPi * t * (1 + beta))) /
                (kPi * t * (1 - std::pow(4 * beta * t, 2)));
        }
        g[n + half] = v;
    }
    return g;
}

// gaussian-smoothed rectangular frequency pulse, sum normalized to 1
std::vector<double> gfsk_freq_pulse(double bt, std::size_t sps) {
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(2 * sps);  // +-2 symbols
    std::vector<double> q(2 * half + 1, 0.0);
    const double sigma_t = std::sqrt(std::log(2.0)) / (2.0 * kPi * bt);  // in symbol units
    for (std::ptrdiff_t n = -half; n <= half; ++n) {
        // integrate the gaussian over the rectangular symbol window
        double acc = 0.0;
        const int steps = 32;
        for (int s = 0; s < steps; ++s) {
            double u = (static_cast<double>(n) / sps) - 0.5 + (s + 0.5) / steps;
            acc += std::exp(-u * u / (2.0 * sigma_t * sigma_t));
        }
        q[n + half] = acc;
    }
    double sum = 0.0;
    for (double v : q) sum += v;
    for (double& v : q) v /= sum;
    return q;
}

// seeded band-limited message: sum of low-frequency tones with max |m| = 1;
// also returns the exact Hilbert transform
void analog_message(Rng& rng, const WaveformParams& wp, std::size_t n, std::vector<double>& m,
                    std::vector<double>& mh) {
    struct Tone {
        double a, f, p;
    };
    std::vector<Tone> tones(wp.analog_tones);
    for (auto& t : tones) {
        t.a = rng.uniform(0.2, 1.0);
        t.f = rng.uniform(0.008, wp.analog_bandwidth);
        t.p = rng.uniform(0.0, 2.0 * kPi);
    }
    m.assign(n, 0.0);
    mh.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (const Tone& t : tones) {
            m[i] += t.a * std::sin(2.0 * kPi * t.f * i + t.p);
            mh[i] -= t.a * std::cos(2.0 * kPi * t.f * i + t.p);  // H{sin} = -cos
        }
    }
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::abs(m[i]));
    if (peak > 0)
        for (std::size_t i = 0; i < n; ++i) {
            m[i] /= peak;
            mh[i] /= peak;
        }
}

std::vector<cplx> synth_linear(ModulationType type, const FrameSpec& spec,
                               const WaveformParams& wp, Rng& rng, FrameMeta* meta) {
    const std::size_t sps = spec.samples_per_symbol;
    const std::size_t n_frame_syms = spec.frame_len / sps;
    const std::size_t span = wp.rrc_span;
    const std::size_t n_syms = n_frame_syms + 2 * span;  // guard symbols keep edges stationary
    const std::vector<cplx> pts = constellation(type);
    std::vector<double> g = rrc_taps(wp.rrc_rolloff, sps, span);
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(span * sps);

    std::vector<cplx> syms(n_syms);
    for (auto& s : syms) s = pts[rng.uniform_index(pts.size())];

    std::vector<cplx> out(spec.frame_len, cplx{0, 0});
    // symbol k's pulse center sits at sample (k - span) * sps
    for (std::size_t k = 0; k < n_syms; ++k) {
        const std::ptrdiff_t center =
            (static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(span)) *
            static_cast<std::ptrdiff_t>(sps);
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, center - half);
        const std::ptrdiff_t hi =
            std::min<std::ptrdiff_t>(spec.frame_len - 1, center + half);
        for (std::ptrdiff_t n = lo; n <= hi; ++n) out[n] += syms[k] * g[n - center + half];
    }
    if (meta) {
        meta->symbols = syms;
        meta->pulse = g;
        meta->first_center = -static_cast<std::ptrdiff_t>(span * sps);
        meta->is_linear = true;
    }
    return out;
}

std::vector<cplx> synth_fsk(ModulationType type, const FrameSpec& spec, const WaveformParams& wp,
                            Rng& rng, FrameMeta* meta) {
    const std::size_t sps = spec.samples_per_symbol;
    const std::size_t n_frame_syms = spec.frame_len / sps;
    const bool gaussian = type == ModulationType::GFSK;
    // frequency pulse: per-sample phase increments summing to pi*h per symbol
    std::vector<double> q;
    std::size_t span;
    if (gaussian) {
        q = gfsk_freq_pulse(wp.gfsk_bt, sps);
        span = 2;
    } else {
        q.assign(sps, 1.0 / static_cast<double>(sps));
        span = 0;
    }
    for (double& v : q) v *= kPi * wp.fsk_index;

    const std::size_t n_syms = n_frame_syms + 2 * span;
    std::vector<double> bits(n_syms);
    for (auto& b : bits) b = rng.uniform_index(2) ? 1.0 : -1.0;
    const double phi0 = rng.uniform(0.0, 2.0 * kPi);

    // instantaneous per-sample phase increment
    std::vector<double> inc(spec.frame_len, 0.0);
    const std::ptrdiff_t qhalf = static_cast<std::ptrdiff_t>(q.size() / 2);
    for (std::size_t k = 0; k < n_syms; ++k) {
        // symbol k's pulse center aligned to the middle of its symbol period
        const std::ptrdiff_t start =
            (static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(span)) *
            static_cast<std::ptrdiff_t>(sps);
        const std::ptrdiff_t center = start + static_cast<std::ptrdiff_t>(sps / 2);
        for (std::size_t j = 0; j < q.size(); ++j) {
            const std::ptrdiff_t n = center - qhalf + static_cast<std::ptrdiff_t>(j);
            if (n < 0 || n >= static_cast<std::ptrdiff_t>(spec.frame_len)) continue;
            inc[n] += bits[k] * q[j];
        }
    }
    std::vector<cplx> out(spec.frame_len);
    double phase = phi0;
    for (std::size_t n = 0; n < spec.frame_len; ++n) {
        phase += inc[n];
        out[n] = cplx{std::cos(phase), std::sin(phase)};
    }
    if (meta) {
        meta->symbols.assign(bits.size(), cplx{0, 0});
        for (std::size_t i = 0; i < bits.size(); ++i) meta->symbols[i] = cplx{bits[i], 0};
        meta->pulse = q;
        meta->first_center = -static_cast<std::ptrdiff_t>(span * sps) +
                             static_cast<std::ptrdiff_t>(sps / 2) - qhalf;
        meta->is_fsk = true;
    }
    return out;
}

std::vector<cplx> synth_analog(ModulationType type, const FrameSpec& spec,
                               const WaveformParams& wp, Rng& rng) {
    std::vector<double> m, mh;
    analog_message(rng, wp, spec.frame_len, m, mh);
    std::vector<cplx> out(spec.frame_len);
    switch (type) {
        case ModulationType::BFM: {
            double phase = rng.uniform(0.0, 2.0 * kPi);
            for (std::size_t n = 0; n < spec.frame_len; ++n) {
                phase += 2.0 * kPi * wp.fm_deviation * m[n];
                out[n] = cplx{std::cos(phase), std::sin(phase)};
            }
            break;
        }
        case ModulationType::AMDSB:
            for (std::size_t n = 0; n < spec.frame_len; ++n)
                out[n] = cplx{1.0 + wp.am_depth * m[n], 0.0};
            break;
        case ModulationType::AMSSB:
            for (std::size_t n = 0; n < spec.frame_len; ++n) out[n] = cplx{m[n], mh[n]};
            break;
        default:
            throw Error(ErrorCode::invalid_argument, "not an analog modulation");
    }
    return out;
}

Tensor<float> to_frame_tensor(const std::vector<cplx>& s) {
    Tensor<float> out({2, s.size()});
    for (std::size_t n = 0; n < s.size(); ++n) {
        out(0, n) = static_cast<float>(s[n].real());
        out(1, n) = static_cast<float>(s[n].imag());
    }
    return out;
}

}  // namespace

const char* modulation_name(ModulationType m) { return kNames[static_cast<std::size_t>(m)]; }

ModulationType modulation_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kNumModulations; ++i)
        if (name == kNames[i]) return static_cast<ModulationType>(i);
    throw Error(ErrorCode::invalid_argument, "unknown modulation: " + name);
}

std::vector<ModulationType> all_modulations() {
    std::vector<ModulationType> v;
    for (std::size_t i = 0; i < kNumModulations; ++i) v.push_back(static_cast<ModulationType>(i));
    return v;
}

Tensor<float> modulate_frame(ModulationType type, const FrameSpec& spec,
                             const WaveformParams& params, std::uint64_t seed, FrameMeta* meta) {
    spec.validate();
    Rng rng(seed);
    std::vector<cplx> s;
    switch (type) {
        case ModulationType::BPSK:
        case ModulationType::QPSK:
        case ModulationType::PSK8:
        case ModulationType::QAM16:
        case ModulationType::QAM64:
        case ModulationType::PAM4:
            s = synth_linear(type, spec, params, rng, meta);
            break;
        case ModulationType::GFSK:
        case ModulationType::CPFSK:
            s = synth_fsk(type, spec, params, rng, meta);
            break;
        case ModulationType::BFM:
        case ModulationType::AMDSB:
        case ModulationType::AMSSB:
            s = synth_analog(type, spec, params, rng);
            break;
    }
    double power = 0.0;
    for (const cplx& v : s) power += std::norm(v);
    power /= static_cast<double>(s.size());
    const double scale = power > 0 ? 1.0 / std::sqrt(power) : 1.0;
    for (cplx& v : s) v *= scale;
    if (meta) {
        meta->scale = scale;
        meta->clean = s;
    }
    return to_frame_tensor(s);
}

Tensor<float> apply_channel(const Tensor<float>& frame, const ChannelConfig& cfg) {
    if (frame.rank() != 2 || frame.extent(0) != 2)
        throw Error(ErrorCode::shape_mismatch, "channel input must be a (2, N) frame");
    const std::size_t n = frame.extent(1);
    Rng rng(cfg.seed);
    std::vector<cplx> s(n);
    for (std::size_t i = 0; i < n; ++i)
        s[i] = cplx{static_cast<double>(frame(0, i)), static_cast<double>(frame(1, i))};

    // multipath FIR, tap gains normalized to unit total power
    if (cfg.multipath || cfg.rayleigh_fading) {
        if (cfg.taps.empty())
            throw Error(ErrorCode::invalid_argument, "multipath enabled without taps");
        std::vector<std::pair<std::size_t, cplx>> gains;
        double total = 0.0;
        for (const auto& [delay, power] : cfg.taps) {
            cplx g;
            if (cfg.rayleigh_fading) {
                g = cplx{rng.gaussian(), rng.gaussian()} * std::sqrt(power / 2.0);
            } else {
                g = cplx{std::sqrt(power), 0.0};
            }
            gains.emplace_back(delay, g);
            total += std::norm(g);
        }
        if (total > 0) {
            const double inv = 1.0 / std::sqrt(total);
            for (auto& [d, g] : gains) g *= inv;
        }
        std::vector<cplx> y(n, cplx{0, 0});
        for (const auto& [delay, g] : gains)
            for (std::size_t i = delay; i < n; ++i) y[i] += g * s[i - delay];
        s = std::move(y);
    }

    // sample-clock offset via fractional resampling (linear interpolation)
    if (cfg.clock_ppm != 0.0) {
        const double eps = rng.uniform(-cfg.clock_ppm, cfg.clock_ppm) * 1e-6;
        std::vector<cplx> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double pos = i * (1.0 + eps);
            if (pos < 0) pos = 0;
            if (pos > static_cast<double>(n - 1)) pos = static_cast<double>(n - 1);
            const std::size_t i0 = static_cast<std::size_t>(pos);
            const std::size_t i1 = std::min(i0 + 1, n - 1);
            const double frac = pos - i0;
            y[i] = s[i0] * (1.0 - frac) + s[i1] * frac;
        }
        s = std::move(y);
    }

    if (cfg.cfo_max != 0.0) {
        const double f = rng.uniform(-cfg.cfo_max, cfg.cfo_max);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = 2.0 * kPi * f * static_cast<double>(i);
            s[i] *= cplx{std::cos(a), std::sin(a)};
        }
    }

    // AWGN at the target SNR relative to post-channel signal power
    if (cfg.awgn && cfg.snr_db != kSnrClean) {
        double power = 0.0;
        for (const cplx& v : s) power += std::norm(v);
        power /= static_cast<double>(n);
        const double noise_power = power * std::pow(10.0, -static_cast<double>(cfg.snr_db) / 10.0);
        const double sigma = std::sqrt(noise_power / 2.0);
        for (cplx& v : s) v += cplx{rng.gaussian() * sigma, rng.gaussian() * sigma};
    }
    return to_frame_tensor(s);
}

Corpus generate_dataset(const std::vector<ModulationType>& classes, std::size_t frames_per_class,
                        const std::vector<int>& snr_values, std::uint64_t seed,
                        const ChannelConfig& channel_template, const FrameSpec& spec,
                        const WaveformParams& params) {
    spec.validate();
    if (classes.empty() || snr_values.empty())
        throw Error(ErrorCode::invalid_argument, "need at least one class and one SNR");
    if (frames_per_class == 0 || frames_per_class % snr_values.size() != 0)
        throw Error(ErrorCode::invalid_argument,
                    "frames_per_class must divide evenly across the SNR grid");

    Corpus corpus;
    corpus.channels = 2;
    corpus.frame_len = spec.frame_len;
    for (ModulationType m : classes) corpus.class_names.push_back(modulation_name(m));

    const std::size_t per_cell = frames_per_class / snr_values.size();
    const std::size_t total = classes.size() * frames_per_class;
    corpus.records.resize(total);
    corpus.frames.resize(total * corpus.frame_elems());

    parallel_chunks(32, [&](std::size_t chunk) {
        auto [lo, hi] = chunk_range(total, 32, chunk);
        for (std::size_t r = lo; r < hi; ++r) {
            const std::size_t ci = r / frames_per_class;
            const std::size_t within = r % frames_per_class;
            const std::size_t cell = within / per_cell;
            const std::uint64_t frame_seed = derive_seed(seed, ci, within);

            Tensor<float> clean =
                modulate_frame(classes[ci], spec, params, derive_seed(frame_seed, 1));
            ChannelConfig ch = channel_template;
            ch.snr_db = static_cast<std::int16_t>(snr_values[cell]);
            ch.seed = derive_seed(frame_seed, 2);
            Tensor<float> impaired = apply_channel(clean, ch);

            corpus.records[r] = {static_cast<std::uint16_t>(ci),
                                 static_cast<std::int16_t>(snr_values[cell])};
            std::copy(impaired.data.begin(), impaired.data.end(),
                      corpus.frames.begin() + r * corpus.frame_elems());
        }
    });
    return corpus;
}

}  // namespace sr2cnn::synth
