#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "sr2cnn.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path dir;
    TempDir() : dir(fs::temp_directory_path() / ("sr2cnn_capi_" + std::to_string(::getpid()))) {
        fs::create_directories(dir);
    }
    ~TempDir() { fs::remove_all(dir); }
    std::string path(const char* name) const { return (dir / name).string(); }
};

std::string take(char* s) {
    std::string out = s ? s : "";
    sr2_string_free(s);
    return out;
}

std::string read_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
}

sr2_corpus* tiny_corpus() {
    sr2_channel_opts ch;
    sr2_channel_opts_init(&ch);
    ch.rayleigh = 0;
    ch.multipath = 0;
    ch.clock_ppm = 0.0;
    sr2_corpus* corpus = nullptr;
    REQUIRE(sr2_corpus_generate("BPSK,QPSK,GFSK,CPFSK,B-FM,AM-DSB", 60, "20,30", 7, &ch,
                                &corpus) == SR2_OK);
    return corpus;
}

sr2_train_opts tiny_train_opts() {
    sr2_train_opts opts;
    sr2_train_opts_init(&opts);
    opts.unknown_csv = "CPFSK,B-FM";
    opts.batch = 32;
    opts.max_epochs = 3;
    opts.semantic_dim = 16;
    return opts;
}

}  // namespace

TEST_CASE("version and error text are always available") {
    CHECK(std::strlen(sr2_version()) > 0);
    CHECK(sr2_last_error() != nullptr);
}

TEST_CASE("corpus generate/write/read/sieve/info round trip") {
    TempDir tmp;
    sr2_corpus* corpus = tiny_corpus();
    uint32_t frames = 0;
    uint16_t classes = 0, channels = 0, frame_len = 0;
    REQUIRE(sr2_corpus_info(corpus, &frames, &classes, &channels, &frame_len) == SR2_OK);
    CHECK(frames == 360);
    CHECK(classes == 6);
    CHECK(channels == 2);
    CHECK(frame_len == 128);

    const std::string p1 = tmp.path("a.sigds");
    REQUIRE(sr2_corpus_write(corpus, p1.c_str()) == SR2_OK);

    sr2_corpus* back = nullptr;
    REQUIRE(sr2_corpus_read(p1.c_str(), &back) == SR2_OK);
    const std::string p2 = tmp.path("b.sigds");
    REQUIRE(sr2_corpus_write(back, p2.c_str()) == SR2_OK);
    CHECK(read_bytes(p1) == read_bytes(p2));

    sr2_corpus* sieved = nullptr;
    REQUIRE(sr2_corpus_sieve(corpus, 25, &sieved) == SR2_OK);
    uint32_t kept = 0;
    sr2_corpus_info(sieved, &kept, nullptr, nullptr, nullptr);
    CHECK(kept == 180);

    SUBCASE("generation is deterministic at the byte level") {
        sr2_corpus* again = tiny_corpus();
        const std::string p3 = tmp.path("c.sigds");
        REQUIRE(sr2_corpus_write(again, p3.c_str()) == SR2_OK);
        CHECK(read_bytes(p1) == read_bytes(p3));
        sr2_corpus_free(again);
    }

    sr2_corpus_free(sieved);
    sr2_corpus_free(back);
    sr2_corpus_free(corpus);
}

TEST_CASE("full train / save / load / eval / discriminate / sweep cycle") {
    TempDir tmp;
    sr2_corpus* corpus = tiny_corpus();
    sr2_train_opts topts = tiny_train_opts();

    const std::string history = tmp.path("history.csv");
    sr2_model* model = nullptr;
    REQUIRE(sr2_train(corpus, &topts, history.c_str(), &model) == SR2_OK);
    CHECK(fs::exists(history));
    {
        std::ifstream is(history);
        std::string line;
        std::getline(is, line);
        CHECK(line == "epoch,ce,ct,r,total,val_softmax_acc");
    }

    int num_known = 0, dim = 0;
    REQUIRE(sr2_model_info(model, &num_known, &dim) == SR2_OK);
    CHECK(num_known == 4);
    CHECK(dim == 16);

    const std::string ckpt = tmp.path("model.sr2c");
    REQUIRE(sr2_model_save(model, ckpt.c_str()) == SR2_OK);
    sr2_model* loaded = nullptr;
    REQUIRE(sr2_model_load(ckpt.c_str(), &loaded) == SR2_OK);
    const std::string ckpt2 = tmp.path("model2.sr2c");
    REQUIRE(sr2_model_save(loaded, ckpt2.c_str()) == SR2_OK);
    CHECK(read_bytes(ckpt) == read_bytes(ckpt2));

    sr2_disc_opts dopts;
    sr2_disc_opts_init(&dopts);
    dopts.unknown_csv = "CPFSK,B-FM";
    dopts.lambda1 = 0.5;

    char* eval_json = nullptr;
    REQUIRE(sr2_evaluate(loaded, corpus, &dopts, &eval_json) == SR2_OK);
    std::string eval_text = take(eval_json);
    CHECK(eval_text.find("\"softmax\"") != std::string::npos);
    CHECK(eval_text.find("\"cluster\"") != std::string::npos);

    char* report = nullptr;
    char* registry = nullptr;
    REQUIRE(sr2_discriminate(loaded, corpus, &dopts, &report, &registry) == SR2_OK);
    std::string report_text = take(report);
    std::string registry_text = take(registry);
    CHECK(report_text.find("\"tkr\"") != std::string::npos);
    CHECK(registry_text.find("\"labels\"") != std::string::npos);

    SUBCASE("a replay with the same seeds reproduces the report byte for byte") {
        char* report2 = nullptr;
        REQUIRE(sr2_discriminate(loaded, corpus, &dopts, &report2, nullptr) == SR2_OK);
        CHECK(take(report2) == report_text);
    }

    SUBCASE("sweep emits one CSV row per lambda and an interval summary") {
        const double lambdas[3] = {0.2, 0.5, 0.8};
        char* csv = nullptr;
        char* summary = nullptr;
        REQUIRE(sr2_sweep(loaded, corpus, &dopts, lambdas, 3, &csv, &summary) == SR2_OK);
        std::string csv_text = take(csv);
        std::string summary_text = take(summary);
        CHECK(std::count(csv_text.begin(), csv_text.end(), '\n') == 4);  // header + 3 rows
        CHECK(summary_text.find("total_width") != std::string::npos);
    }

    sr2_model_free(loaded);
    sr2_model_free(model);
    sr2_corpus_free(corpus);
}

TEST_CASE("status codes distinguish usage, data and numeric failures") {
    TempDir tmp;
    SUBCASE("null arguments are usage errors") {
        CHECK(sr2_corpus_read(nullptr, nullptr) == SR2_E_USAGE);
        CHECK(sr2_model_load(nullptr, nullptr) == SR2_E_USAGE);
    }
    SUBCASE("missing files are data errors") {
        sr2_corpus* corpus = nullptr;
        CHECK(sr2_corpus_read(tmp.path("missing.sigds").c_str(), &corpus) == SR2_E_DATA);
        sr2_model* model = nullptr;
        CHECK(sr2_model_load(tmp.path("missing.sr2c").c_str(), &model) == SR2_E_DATA);
        CHECK(std::strlen(sr2_last_error()) > 0);
    }
    SUBCASE("bad class and metric names are usage errors") {
        sr2_channel_opts ch;
        sr2_channel_opts_init(&ch);
        sr2_corpus* corpus = nullptr;
        CHECK(sr2_corpus_generate("NOPE", 10, "10", 1, &ch, &corpus) == SR2_E_USAGE);
        CHECK(sr2_corpus_generate("BPSK", 3, "10,20", 1, &ch, &corpus) == SR2_E_USAGE);
    }
    SUBCASE("checkpoint/dataset mismatch is a data error") {
        sr2_corpus* corpus = tiny_corpus();
        sr2_train_opts topts = tiny_train_opts();
        topts.max_epochs = 1;
        sr2_model* model = nullptr;
        REQUIRE(sr2_train(corpus, &topts, nullptr, &model) == SR2_OK);
        sr2_disc_opts dopts;
        sr2_disc_opts_init(&dopts);
        dopts.unknown_csv = "";  // six known classes, model has four
        char* out = nullptr;
        CHECK(sr2_evaluate(model, corpus, &dopts, &out) == SR2_E_DATA);
        sr2_model_free(model);
        sr2_corpus_free(corpus);
    }
}
