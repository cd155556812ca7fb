#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "sr2cnn/dataset.hpp"
#include "sr2cnn/tensor.hpp"

namespace sr2cnn::synth {

enum class ModulationType : std::uint8_t {
    BPSK, QPSK, PSK8, QAM16, QAM64, PAM4, GFSK, CPFSK, BFM, AMDSB, AMSSB
};

constexpr std::size_t kNumModulations = 11;

const char* modulation_name(ModulationType m);
ModulationType modulation_from_name(const std::string& name);
std::vector<ModulationType> all_modulations();

struct FrameSpec {
    std::size_t samples_per_symbol = 8;
    std::size_t frame_len = 128;

    void validate() const {
        if (samples_per_symbol == 0 || frame_len == 0 || frame_len % samples_per_symbol != 0)
            throw Error(ErrorCode::invalid_argument,
                        "frame length must be a positive multiple of samples per symbol");
    }
};

/// Waveform knobs. Defaults: RRC roll-off 0.35 (span 6 symbols each side),
/// GFSK BT 0.5, CPFSK/GFSK modulation index 0.5, FM peak deviation 0.375 of
/// the sample rate (75 kHz at a 200 kHz-equivalent rate), AM depth 0.8,
/// analog message band-limited to 1/8 of the sample rate.
struct WaveformParams {
    double rrc_rolloff = 0.35;
    std::size_t rrc_span = 6;
    double gfsk_bt = 0.5;
    double fsk_index = 0.5;
    double fm_deviation = 0.375;
    double am_depth = 0.8;
    double analog_bandwidth = 0.125;
    std::size_t analog_tones = 8;
};

/// Ground-truth synthesis metadata for test oracles: the symbol stream, the
/// pulse taps, the position of the first symbol center, and the final
/// power-normalization scale applied to the frame.
struct FrameMeta {
    std::vector<std::complex<double>> symbols;
    std::vector<double> pulse;     // linear: RRC taps; FSK: frequency pulse
    std::ptrdiff_t first_center = 0;   // sample index of symbols[0]'s pulse center
    double scale = 1.0;
    bool is_linear = false;        // linear constellation (LS-recoverable)
    bool is_fsk = false;           // phase-continuous FSK
    std::vector<std::complex<double>> clean;  // double-precision frame, post scale
};

/// Unit-average-power clean baseband frame (I row, Q row), fully determined
/// by (type, spec, params, seed).
Tensor<float> modulate_frame(ModulationType type, const FrameSpec& spec,
                             const WaveformParams& params, std::uint64_t seed,
                             FrameMeta* meta = nullptr);

struct ChannelConfig {
    std::int16_t snr_db = 20;          // kSnrClean disables noise
    bool awgn = true;
    bool rayleigh_fading = false;      // random complex tap gains per frame
    bool multipath = false;            // FIR channel with the taps below
    std::vector<std::pair<std::size_t, double>> taps = {{0, 1.0}, {1, 0.5}, {2, 0.25}};
    double clock_ppm = 50.0;           // sample-clock offset bound, uniform draw
    double cfo_max = 0.0;              // optional carrier-frequency offset bound
    std::uint64_t seed = 0;
};

/// Multipath FIR, then clock-offset resampling, then AWGN scaled to the
/// target SNR relative to the post-channel signal power.
Tensor<float> apply_channel(const Tensor<float>& frame, const ChannelConfig& cfg);

/// Stratified corpus: frames_per_class must divide evenly across the SNR
/// grid; per-frame seeds derive from (seed, class, record index).
Corpus generate_dataset(const std::vector<ModulationType>& classes, std::size_t frames_per_class,
                        const std::vector<int>& snr_values, std::uint64_t seed,
                        const ChannelConfig& channel_template,
                        const FrameSpec& spec = FrameSpec{},
                        const WaveformParams& params = WaveformParams{});

}  // namespace sr2cnn::synth
