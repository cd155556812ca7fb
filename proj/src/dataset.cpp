#include "sr2cnn/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>

#include "sr2cnn/rng.hpp"

namespace sr2cnn {

namespace {

constexpr char kMagic[4] = {'S', 'I', 'G', '1'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::ostream& os, std::uint16_t v) {
    os.put(static_cast<char>(v & 0xFF));
    os.put(static_cast<char>(v >> 8));
}
void put_u32(std::ostream& os, std::uint32_t v) {
    put_u16(os, v & 0xFFFF);
    put_u16(os, v >> 16);
}
std::uint16_t get_u16(std::istream& is) {
    int lo = is.get(), hi = is.get();
    if (lo == EOF || hi == EOF) throw Error(ErrorCode::data_format, "truncated SIGDS file");
    return static_cast<std::uint16_t>(lo | (hi << 8));
}
std::uint32_t get_u32(std::istream& is) {
    std::uint32_t lo = get_u16(is), hi = get_u16(is);
    return lo | (hi << 16);
}

}  // namespace

void write_sigds(const Corpus& corpus, const std::string& path) {
    corpus.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::io, "cannot open for writing: " + path);
    os.write(kMagic, 4);
    put_u16(os, kVersion);
    put_u16(os, static_cast<std::uint16_t>(corpus.class_names.size()));
    put_u32(os, static_cast<std::uint32_t>(corpus.count()));
    put_u16(os, static_cast<std::uint16_t>(corpus.channels));
    put_u16(os, static_cast<std::uint16_t>(corpus.frame_len));
    for (const std::string& name : corpus.class_names) {
        put_u16(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (std::size_t i = 0; i < corpus.count(); ++i) {
        put_u16(os, corpus.records[i].class_idx);
        put_u16(os, static_cast<std::uint16_t>(corpus.records[i].snr_db));
        os.write(reinterpret_cast<const char*>(corpus.frame(i)),
                 static_cast<std::streamsize>(corpus.frame_elems() * sizeof(float)));
    }
    os.flush();
    if (!os) throw Error(ErrorCode::io, "failed writing SIGDS file: " + path);
}

Corpus read_sigds(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::io, "cannot open SIGDS file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw Error(ErrorCode::data_format, "bad SIGDS magic");
    if (get_u16(is) != kVersion) throw Error(ErrorCode::data_format, "unsupported SIGDS version");

    Corpus c;
    const std::uint16_t num_classes = get_u16(is);
    const std::uint32_t frame_count = get_u32(is);
    c.channels = get_u16(is);
    c.frame_len = get_u16(is);
    if (c.channels == 0 || c.frame_len == 0)
        throw Error(ErrorCode::data_format, "bad SIGDS geometry");
    for (std::uint16_t i = 0; i < num_classes; ++i) {
        std::uint16_t len = get_u16(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (is.gcount() != len) throw Error(ErrorCode::data_format, "truncated SIGDS file");
        c.class_names.push_back(std::move(name));
    }
    c.records.resize(frame_count);
    c.frames.resize(static_cast<std::size_t>(frame_count) * c.frame_elems());
    for (std::uint32_t i = 0; i < frame_count; ++i) {
        c.records[i].class_idx = get_u16(is);
        c.records[i].snr_db = static_cast<std::int16_t>(get_u16(is));
        if (c.records[i].class_idx >= num_classes)
            throw Error(ErrorCode::data_format, "SIGDS record references unknown class");
        is.read(reinterpret_cast<char*>(c.frame(i)),
                static_cast<std::streamsize>(c.frame_elems() * sizeof(float)));
        if (static_cast<std::size_t>(is.gcount()) != c.frame_elems() * sizeof(float))
            throw Error(ErrorCode::data_format, "truncated SIGDS file");
    }
    is.peek();
    if (!is.eof()) throw Error(ErrorCode::data_format, "trailing bytes in SIGDS file");
    return c;
}

Corpus sieve_by_snr(const Corpus& corpus, int min_snr_db) {
    Corpus out;
    out.class_names = corpus.class_names;
    out.channels = corpus.channels;
    out.frame_len = corpus.frame_len;
    for (std::size_t i = 0; i < corpus.count(); ++i) {
        if (corpus.records[i].snr_db < min_snr_db) continue;
        out.records.push_back(corpus.records[i]);
        out.frames.insert(out.frames.end(), corpus.frame(i),
                          corpus.frame(i) + corpus.frame_elems());
    }
    if (out.records.empty())
        std::cerr << "warning: SNR sieve at " << min_snr_db << " dB left no records\n";
    return out;
}

namespace {

std::uint16_t class_id_of(const Corpus& corpus, const std::string& name) {
    for (std::size_t i = 0; i < corpus.class_names.size(); ++i)
        if (corpus.class_names[i] == name) return static_cast<std::uint16_t>(i);
    throw Error(ErrorCode::invalid_argument, "class not present in corpus: " + name);
}

void append_record(Corpus& dst, const Corpus& src, std::size_t i) {
    dst.records.push_back(src.records[i]);
    dst.frames.insert(dst.frames.end(), src.frame(i), src.frame(i) + src.frame_elems());
}

Corpus empty_like(const Corpus& src) {
    Corpus c;
    c.class_names = src.class_names;
    c.channels = src.channels;
    c.frame_len = src.frame_len;
    return c;
}

}  // namespace

SplitResult split_dataset(const Corpus& corpus, const SplitSpec& spec) {
    corpus.validate();
    if (std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9)
        throw Error(ErrorCode::invalid_argument, "split fractions must sum to 1");

    std::set<std::uint16_t> unknown_set;
    for (const std::string& name : spec.unknown) unknown_set.insert(class_id_of(corpus, name));

    std::set<std::uint16_t> known_set;
    if (spec.known) {
        for (const std::string& name : *spec.known) known_set.insert(class_id_of(corpus, name));
        for (std::uint16_t id : unknown_set)
            if (known_set.count(id))
                throw Error(ErrorCode::invalid_argument,
                            "class assigned to both known and unknown: " + corpus.class_names[id]);
    } else {
        for (std::size_t i = 0; i < corpus.class_names.size(); ++i)
            if (!unknown_set.count(static_cast<std::uint16_t>(i)))
                known_set.insert(static_cast<std::uint16_t>(i));
    }

    // every class present in the corpus must be assigned somewhere
    std::vector<std::vector<std::size_t>> per_class(corpus.class_names.size());
    for (std::size_t i = 0; i < corpus.count(); ++i) {
        const std::uint16_t cls = corpus.records[i].class_idx;
        if (!known_set.count(cls) && !unknown_set.count(cls))
            throw Error(ErrorCode::invalid_argument,
                        "class present in corpus but unassigned: " + corpus.class_names[cls]);
        per_class[cls].push_back(i);
    }

    SplitResult out;
    out.known_ids.assign(known_set.begin(), known_set.end());
    out.unknown_ids.assign(unknown_set.begin(), unknown_set.end());
    out.train = empty_like(corpus);
    out.val_known = empty_like(corpus);
    out.test_known = empty_like(corpus);
    out.test_unknown = empty_like(corpus);

    for (std::size_t cls = 0; cls < per_class.size(); ++cls) {
        auto& idx = per_class[cls];
        if (idx.empty()) continue;
        Rng rng(derive_seed(spec.seed, 0x5EED, cls));
        rng.shuffle(idx);
        const std::size_t m = idx.size();
        if (unknown_set.count(static_cast<std::uint16_t>(cls))) {
            const std::size_t n_test = static_cast<std::size_t>(spec.test_frac * m);
            for (std::size_t i = 0; i < n_test; ++i) append_record(out.test_unknown, corpus, idx[i]);
        } else {
            const std::size_t n_val = static_cast<std::size_t>(spec.val_frac * m);
            const std::size_t n_test = static_cast<std::size_t>(spec.test_frac * m);
            const std::size_t n_train = m - n_val - n_test;  // remainder goes to train
            std::size_t p = 0;
            for (std::size_t i = 0; i < n_train; ++i) append_record(out.train, corpus, idx[p++]);
            for (std::size_t i = 0; i < n_val; ++i) append_record(out.val_known, corpus, idx[p++]);
            for (std::size_t i = 0; i < n_test; ++i) append_record(out.test_known, corpus, idx[p++]);
        }
    }
    return out;
}

template <typename T>
LabeledFrames<T> to_labeled(const Corpus& corpus, const std::vector<std::uint16_t>& known_ids) {
    LabeledFrames<T> out;
    out.channels = corpus.channels;
    out.frame_len = corpus.frame_len;
    out.frames.reserve(corpus.frames.size());
    out.labels.reserve(corpus.count());
    for (std::size_t i = 0; i < corpus.count(); ++i) {
        auto it = std::find(known_ids.begin(), known_ids.end(), corpus.records[i].class_idx);
        if (it == known_ids.end())
            throw Error(ErrorCode::invalid_argument, "record class not in the known set");
        out.labels.push_back(static_cast<std::uint16_t>(it - known_ids.begin()));
        const float* f = corpus.frame(i);
        for (std::size_t j = 0; j < corpus.frame_elems(); ++j)
            out.frames.push_back(static_cast<T>(f[j]));
    }
    return out;
}

template LabeledFrames<float> to_labeled<float>(const Corpus&, const std::vector<std::uint16_t>&);
template LabeledFrames<double> to_labeled<double>(const Corpus&, const std::vector<std::uint16_t>&);

std::uint64_t hash_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::io, "cannot open file for hashing: " + path);
    std::uint64_t h = 0xCBF29CE484222325ull;
    char buf[65536];
    while (is) {
        is.read(buf, sizeof(buf));
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ull;
        }
    }
    return h;
}

}  // namespace sr2cnn
