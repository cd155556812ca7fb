#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sr2cnn/tensor.hpp"
#include "sr2cnn/trainer.hpp"

namespace sr2cnn {

/// SNR value standing in for a clean (noise-free) channel.
constexpr std::int16_t kSnrClean = 32767;

struct CorpusRecord {
    std::uint16_t class_idx;
    std::int16_t snr_db;
};

/// In-memory corpus: per-record class/SNR plus contiguous f32 frames
/// (I row then Q row per frame).
struct Corpus {
    std::vector<std::string> class_names;
    std::size_t channels = 2;
    std::size_t frame_len = 128;
    std::vector<CorpusRecord> records;
    std::vector<float> frames;

    std::size_t count() const { return records.size(); }
    std::size_t frame_elems() const { return channels * frame_len; }
    float* frame(std::size_t i) { return frames.data() + i * frame_elems(); }
    const float* frame(std::size_t i) const { return frames.data() + i * frame_elems(); }

    void validate() const {
        if (frames.size() != records.size() * frame_elems())
            throw Error(ErrorCode::shape_mismatch, "corpus frame buffer size mismatch");
        for (const CorpusRecord& r : records)
            if (r.class_idx >= class_names.size())
                throw Error(ErrorCode::invalid_argument, "corpus record with unnamed class");
    }
};

/// SIGDS container format. Record layout: u16 class_index, i16 snr_dB,
/// then channels*frame_len little-endian f32 samples.
void write_sigds(const Corpus& corpus, const std::string& path);
Corpus read_sigds(const std::string& path);

/// Keeps records with snr >= min_snr, preserving order. An empty result is
/// allowed (a warning is printed to stderr).
Corpus sieve_by_snr(const Corpus& corpus, int min_snr_db);

struct SplitSpec {
    double train_frac = 0.70, val_frac = 0.15, test_frac = 0.15;
    std::vector<std::string> unknown;                 // withheld classes U
    std::optional<std::vector<std::string>> known;    // explicit K; default: complement of U
    std::uint64_t seed = 1;
};

struct SplitResult {
    Corpus train, val_known, test_known, test_unknown;
    std::vector<std::uint16_t> known_ids;    // corpus class ids, ascending
    std::vector<std::uint16_t> unknown_ids;  // corpus class ids, ascending
};

/// Per-class seeded shuffle, then 70/15/15 for known classes; unknown
/// classes contribute only their test fraction. Fractional remainders go
/// to the training split.
SplitResult split_dataset(const Corpus& corpus, const SplitSpec& spec);

/// Remaps corpus class ids onto contiguous training labels (position within
/// known_ids) and converts frames to T.
template <typename T>
LabeledFrames<T> to_labeled(const Corpus& corpus, const std::vector<std::uint16_t>& known_ids);

/// FNV-1a 64 over a file's bytes; used for dataset hashes in run manifests.
std::uint64_t hash_file(const std::string& path);

}  // namespace sr2cnn
