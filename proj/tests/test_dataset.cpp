#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "sr2cnn/dataset.hpp"
#include "sr2cnn/rng.hpp"

using namespace sr2cnn;
namespace fs = std::filesystem;

namespace {

Corpus synthetic_corpus(const std::vector<std::string>& names, std::size_t per_class,
                        const std::vector<int>& snrs, std::uint64_t seed) {
    Corpus c;
    c.class_names = names;
    Rng rng(seed);
    const std::size_t per_cell = per_class / snrs.size();
    for (std::uint16_t cls = 0; cls < names.size(); ++cls) {
        for (int snr : snrs) {
            for (std::size_t i = 0; i < per_cell; ++i) {
                c.records.push_back({cls, static_cast<std::int16_t>(snr)});
                for (std::size_t j = 0; j < c.frame_elems(); ++j)
                    c.frames.push_back(static_cast<float>(rng.gaussian()));
            }
        }
    }
    return c;
}

std::string read_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
}

struct TempDir {
    fs::path dir;
    TempDir() : dir(fs::temp_directory_path() / ("sr2cnn_ds_" + std::to_string(::getpid()))) {
        fs::create_directories(dir);
    }
    ~TempDir() { fs::remove_all(dir); }
    std::string path(const char* name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("SIGDS write/read round trip is byte-identical with the documented size") {
    TempDir tmp;
    Corpus c = synthetic_corpus({"A", "B"}, 10, {0, 10}, 3);
    const std::string p1 = tmp.path("a.sigds"), p2 = tmp.path("b.sigds");
    write_sigds(c, p1);
    Corpus back = read_sigds(p1);
    write_sigds(back, p2);
    CHECK(read_bytes(p1) == read_bytes(p2));
    CHECK(back.class_names == c.class_names);
    CHECK(back.frames == c.frames);

    // header: magic(4) + version(2) + classes(2) + count(4) + channels(2) +
    // frame_len(2) + name table; record: 2 + 2 + 1024
    const std::size_t header = 4 + 2 + 2 + 4 + 2 + 2 + (2 + 1) + (2 + 1);
    CHECK(fs::file_size(p1) == header + c.count() * (2 + 2 + 1024));
}

TEST_CASE("a 1100-record corpus has the documented file size") {
    TempDir tmp;
    std::vector<std::string> names;
    std::vector<int> snrs;
    for (int i = 0; i < 11; ++i) names.push_back("M" + std::to_string(i));
    for (int v = 2; v <= 40; v += 2) snrs.push_back(v);
    Corpus c = synthetic_corpus(names, 100, snrs, 5);
    REQUIRE(c.count() == 1100);
    const std::string p = tmp.path("c.sigds");
    write_sigds(c, p);
    std::size_t names_bytes = 0;
    for (const auto& n : names) names_bytes += 2 + n.size();
    CHECK(fs::file_size(p) == 16 + names_bytes + 1100 * (2 + 2 + 1024));
}

TEST_CASE("corrupt SIGDS files are rejected cleanly") {
    TempDir tmp;
    Corpus c = synthetic_corpus({"A"}, 4, {0}, 7);
    const std::string p = tmp.path("x.sigds");
    write_sigds(c, p);
    std::string bytes = read_bytes(p);

    SUBCASE("bad magic") {
        bytes[0] = 'Z';
        std::ofstream(p, std::ios::binary) << bytes;
        CHECK_THROWS_AS(read_sigds(p), Error);
    }
    SUBCASE("truncation") {
        std::ofstream(p, std::ios::binary) << bytes.substr(0, bytes.size() - 100);
        CHECK_THROWS_AS(read_sigds(p), Error);
    }
    SUBCASE("trailing garbage") {
        bytes += "extra";
        std::ofstream(p, std::ios::binary) << bytes;
        CHECK_THROWS_AS(read_sigds(p), Error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_sigds(tmp.path("nope.sigds")), Error);
    }
}

TEST_CASE("SNR sieve keeps exactly the high-SNR tail, preserving order") {
    std::vector<int> radioml_grid;
    for (int v = -20; v <= 18; v += 2) radioml_grid.push_back(v);
    REQUIRE(radioml_grid.size() == 20);
    Corpus c = synthetic_corpus({"A", "B"}, 200, radioml_grid, 11);

    Corpus kept = sieve_by_snr(c, 16);
    CHECK(kept.count() == c.count() / 10);  // two of twenty SNRs survive
    std::set<int> seen;
    for (const CorpusRecord& r : kept.records) seen.insert(r.snr_db);
    CHECK(seen == std::set<int>{16, 18});

    SUBCASE("order preserved") {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < c.count() && pos < kept.count(); ++i) {
            if (c.records[i].snr_db >= 16) {
                CHECK(kept.records[pos].class_idx == c.records[i].class_idx);
                pos++;
            }
        }
        CHECK(pos == kept.count());
    }
    SUBCASE("very low threshold is the identity") {
        Corpus all = sieve_by_snr(c, -32768);
        CHECK(all.count() == c.count());
        CHECK(all.frames == c.frames);
    }
    SUBCASE("threshold above the maximum leaves an empty corpus") {
        Corpus none = sieve_by_snr(c, 100);
        CHECK(none.count() == 0);
    }
}

TEST_CASE("70/15/15 split matches the documented counts on the 11x2000 layout") {
    std::vector<std::string> names = {"8PSK", "AM-DSB", "AM-SSB", "BPSK", "CPFSK", "GFSK",
                                      "PAM4", "QAM16", "QAM64", "QPSK", "WBFM"};
    Corpus c = synthetic_corpus(names, 2000, {16, 18}, 13);
    SplitSpec spec;
    spec.unknown = {"AM-SSB", "GFSK"};
    spec.seed = 1;
    SplitResult split = split_dataset(c, spec);

    CHECK(split.train.count() == 12600);
    CHECK(split.val_known.count() == 2700);
    CHECK(split.test_known.count() == 2700);
    CHECK(split.test_unknown.count() == 600);
    CHECK(split.known_ids.size() == 9);
    CHECK(split.unknown_ids.size() == 2);

    SUBCASE("no unknown-class record reaches train or validation") {
        std::set<std::uint16_t> unknown(split.unknown_ids.begin(), split.unknown_ids.end());
        for (const CorpusRecord& r : split.train.records) CHECK(unknown.count(r.class_idx) == 0);
        for (const CorpusRecord& r : split.val_known.records)
            CHECK(unknown.count(r.class_idx) == 0);
        for (const CorpusRecord& r : split.test_unknown.records)
            CHECK(unknown.count(r.class_idx) == 1);
    }
    SUBCASE("same seed reproduces the same split") {
        SplitResult again = split_dataset(c, spec);
        CHECK(split.train.frames == again.train.frames);
        CHECK(split.test_unknown.frames == again.test_unknown.frames);
    }
    SUBCASE("splits partition the known records") {
        CHECK(split.train.count() + split.val_known.count() + split.test_known.count() ==
              9 * 2000);
    }
}

TEST_CASE("degenerate split fractions and misconfigured classes") {
    Corpus c = synthetic_corpus({"A", "B", "C"}, 40, {10}, 17);
    SUBCASE("everything to train with no unknowns") {
        SplitSpec spec;
        spec.train_frac = 1.0;
        spec.val_frac = 0.0;
        spec.test_frac = 0.0;
        SplitResult split = split_dataset(c, spec);
        CHECK(split.train.count() == 120);
        CHECK(split.test_unknown.count() == 0);
    }
    SUBCASE("fractions must sum to one") {
        SplitSpec spec;
        spec.train_frac = 0.5;
        CHECK_THROWS_AS(split_dataset(c, spec), Error);
    }
    SUBCASE("unknown class must exist in the corpus") {
        SplitSpec spec;
        spec.unknown = {"Nope"};
        CHECK_THROWS_AS(split_dataset(c, spec), Error);
    }
    SUBCASE("class in corpus but in neither set is an error") {
        SplitSpec spec;
        spec.known = std::vector<std::string>{"A"};
        spec.unknown = {"B"};  // C unassigned
        CHECK_THROWS_AS(split_dataset(c, spec), Error);
    }
    SUBCASE("class in both sets is an error") {
        SplitSpec spec;
        spec.known = std::vector<std::string>{"A", "B"};
        spec.unknown = {"B", "C"};
        CHECK_THROWS_AS(split_dataset(c, spec), Error);
    }
}

TEST_CASE("to_labeled remaps class ids onto contiguous known labels") {
    Corpus c = synthetic_corpus({"A", "B", "C"}, 4, {10}, 19);
    std::vector<std::uint16_t> known_ids = {0, 2};  // drop class B
    Corpus filtered;
    filtered.class_names = c.class_names;
    for (std::size_t i = 0; i < c.count(); ++i) {
        if (c.records[i].class_idx == 1) continue;
        filtered.records.push_back(c.records[i]);
        filtered.frames.insert(filtered.frames.end(), c.frame(i), c.frame(i) + c.frame_elems());
    }
    LabeledFrames<float> data = to_labeled<float>(filtered, known_ids);
    CHECK(data.count() == 8);
    for (std::size_t i = 0; i < data.count(); ++i) CHECK(data.labels[i] <= 1);

    SUBCASE("record outside the known set is rejected") {
        CHECK_THROWS_AS(to_labeled<float>(c, known_ids), Error);
    }
}

TEST_CASE("file hashing is stable and content-sensitive") {
    TempDir tmp;
    Corpus c = synthetic_corpus({"A"}, 4, {0}, 23);
    const std::string p = tmp.path("h.sigds");
    write_sigds(c, p);
    std::uint64_t h1 = hash_file(p);
    CHECK(h1 == hash_file(p));
    c.frames[0] += 1.0f;
    write_sigds(c, p);
    CHECK(h1 != hash_file(p));
}
