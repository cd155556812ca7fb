#include "sr2cnn.h"

#include <cstring>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "sr2cnn/pipeline.hpp"
#include "sr2cnn/synth.hpp"

#define SR2CNN_VERSION_STRING "1.0.0"

struct sr2_corpus {
    sr2cnn::Corpus corpus;
};
struct sr2_model {
    sr2cnn::ModelParams<float> params;
};

namespace {

thread_local std::string g_last_error;

int map_error(const sr2cnn::Error& e) {
    g_last_error = e.what();
    switch (e.code()) {
        case sr2cnn::ErrorCode::invalid_argument:
            return SR2_E_USAGE;
        case sr2cnn::ErrorCode::shape_mismatch:
        case sr2cnn::ErrorCode::data_format:
        case sr2cnn::ErrorCode::io:
            return SR2_E_DATA;
        case sr2cnn::ErrorCode::non_finite:
        case sr2cnn::ErrorCode::numeric:
            return SR2_E_NUMERIC;
    }
    return SR2_E_INTERNAL;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        return SR2_OK;
    } catch (const sr2cnn::Error& e) {
        return map_error(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SR2_E_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return SR2_E_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

std::vector<std::string> split_csv(const char* csv) {
    std::vector<std::string> out;
    if (!csv || !*csv) return out;
    std::istringstream is(csv);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

int require(bool ok, const char* msg) {
    if (!ok) {
        g_last_error = msg;
        return SR2_E_USAGE;
    }
    return SR2_OK;
}

sr2cnn::synth::ChannelConfig to_channel(const sr2_channel_opts* opts) {
    sr2cnn::synth::ChannelConfig ch;
    if (opts) {
        ch.awgn = opts->awgn != 0;
        ch.rayleigh_fading = opts->rayleigh != 0;
        ch.multipath = opts->multipath != 0;
        ch.clock_ppm = opts->clock_ppm;
        ch.cfo_max = opts->cfo_max;
    }
    return ch;
}

std::optional<int> sieve_of(int min_snr) {
    if (min_snr == SR2_SNR_NO_SIEVE) return std::nullopt;
    return min_snr;
}

sr2cnn::DiscriminateRunConfig to_disc_config(const sr2_disc_opts* opts) {
    sr2cnn::DiscriminateRunConfig cfg;
    cfg.split.unknown = split_csv(opts->unknown_csv);
    cfg.split.seed = opts->split_seed;
    cfg.min_snr = sieve_of(opts->min_snr);
    cfg.order_seed = opts->order_seed;
    cfg.disc.lambda1 = opts->lambda1;
    cfg.disc.lambda2 = opts->lambda2;
    cfg.disc.metric = sr2cnn::metric_from_name(opts->metric ? opts->metric : "mahalanobis");
    cfg.disc.update_known = opts->update_known != 0;
    cfg.disc.fit_unknown_cov = opts->fit_unknown_cov != 0;
    cfg.disc.shrinkage = opts->shrinkage;
    return cfg;
}

}  // namespace

extern "C" {

const char* sr2_version(void) { return SR2CNN_VERSION_STRING; }

const char* sr2_last_error(void) { return g_last_error.c_str(); }

void sr2_string_free(char* s) { delete[] s; }

void sr2_channel_opts_init(sr2_channel_opts* opts) {
    if (!opts) return;
    opts->awgn = 1;
    opts->rayleigh = 1;
    opts->multipath = 1;
    opts->clock_ppm = 50.0;
    opts->cfo_max = 0.0;
}

int sr2_corpus_generate(const char* classes_csv, int frames_per_class, const char* snr_grid,
                        uint64_t seed, const sr2_channel_opts* channel, sr2_corpus** out) {
    if (int rc = require(out && classes_csv && snr_grid, "null argument")) return rc;
    return guarded([&] {
        std::vector<sr2cnn::synth::ModulationType> classes;
        if (std::string(classes_csv) == "all") {
            classes = sr2cnn::synth::all_modulations();
        } else {
            for (const std::string& name : split_csv(classes_csv))
                classes.push_back(sr2cnn::synth::modulation_from_name(name));
        }
        std::vector<int> snrs = sr2cnn::parse_int_grid(snr_grid);
        if (frames_per_class <= 0)
            throw sr2cnn::Error(sr2cnn::ErrorCode::invalid_argument,
                                "frames_per_class must be positive");
        auto corpus = sr2cnn::synth::generate_dataset(
            classes, static_cast<std::size_t>(frames_per_class), snrs, seed, to_channel(channel));
        *out = new sr2_corpus{std::move(corpus)};
    });
}

int sr2_corpus_read(const char* path, sr2_corpus** out) {
    if (int rc = require(out && path, "null argument")) return rc;
    return guarded([&] { *out = new sr2_corpus{sr2cnn::read_sigds(path)}; });
}

int sr2_corpus_write(const sr2_corpus* corpus, const char* path) {
    if (int rc = require(corpus && path, "null argument")) return rc;
    return guarded([&] { sr2cnn::write_sigds(corpus->corpus, path); });
}

int sr2_corpus_sieve(const sr2_corpus* corpus, int min_snr_db, sr2_corpus** out) {
    if (int rc = require(corpus && out, "null argument")) return rc;
    return guarded([&] {
        *out = new sr2_corpus{sr2cnn::sieve_by_snr(corpus->corpus, min_snr_db)};
    });
}

int sr2_corpus_info(const sr2_corpus* corpus, uint32_t* frame_count, uint16_t* num_classes,
                    uint16_t* channels, uint16_t* frame_len) {
    if (int rc = require(corpus != nullptr, "null corpus")) return rc;
    if (frame_count) *frame_count = static_cast<uint32_t>(corpus->corpus.count());
    if (num_classes) *num_classes = static_cast<uint16_t>(corpus->corpus.class_names.size());
    if (channels) *channels = static_cast<uint16_t>(corpus->corpus.channels);
    if (frame_len) *frame_len = static_cast<uint16_t>(corpus->corpus.frame_len);
    return SR2_OK;
}

void sr2_corpus_free(sr2_corpus* corpus) { delete corpus; }

void sr2_train_opts_init(sr2_train_opts* opts) {
    if (!opts) return;
    opts->unknown_csv = "";
    opts->min_snr = SR2_SNR_NO_SIEVE;
    opts->batch = 256;
    opts->lr = 1e-3;
    opts->center_alpha = 0.5;
    opts->lambda_ct = 0.1;
    opts->lambda_r = 1.0;
    opts->ce_on = 1;
    opts->ct_on = 1;
    opts->r_on = 1;
    opts->max_epochs = 250;
    opts->patience = 25;
    opts->semantic_dim = 64;
    opts->seed = 1;
    opts->split_seed = 1;
}

int sr2_train(const sr2_corpus* corpus, const sr2_train_opts* opts, const char* history_csv_path,
              sr2_model** out) {
    if (int rc = require(corpus && opts && out, "null argument")) return rc;
    return guarded([&] {
        sr2cnn::TrainRunConfig cfg;
        cfg.split.unknown = split_csv(opts->unknown_csv);
        cfg.split.seed = opts->split_seed;
        cfg.min_snr = sieve_of(opts->min_snr);
        cfg.semantic_dim = static_cast<std::size_t>(opts->semantic_dim);
        cfg.train.batch = static_cast<std::size_t>(opts->batch);
        cfg.train.lr = opts->lr;
        cfg.train.center_alpha = opts->center_alpha;
        cfg.train.weights.lambda_ct = opts->lambda_ct;
        cfg.train.weights.lambda_r = opts->lambda_r;
        cfg.train.weights.ce_on = opts->ce_on != 0;
        cfg.train.weights.ct_on = opts->ct_on != 0;
        cfg.train.weights.r_on = opts->r_on != 0;
        cfg.train.max_epochs = static_cast<std::size_t>(opts->max_epochs);
        cfg.train.patience = static_cast<std::size_t>(opts->patience);
        cfg.train.seed = opts->seed;
        sr2cnn::TrainRunResult res = sr2cnn::run_training(corpus->corpus, cfg);
        if (history_csv_path) sr2cnn::write_history_csv(res.history, history_csv_path);
        *out = new sr2_model{std::move(res.model)};
    });
}

int sr2_model_save(const sr2_model* model, const char* path) {
    if (int rc = require(model && path, "null argument")) return rc;
    return guarded([&] { sr2cnn::save_checkpoint(model->params, path); });
}

int sr2_model_load(const char* path, sr2_model** out) {
    if (int rc = require(path && out, "null argument")) return rc;
    return guarded([&] { *out = new sr2_model{sr2cnn::load_checkpoint(path)}; });
}

int sr2_model_info(const sr2_model* model, int* num_known, int* semantic_dim) {
    if (int rc = require(model != nullptr, "null model")) return rc;
    if (num_known) *num_known = static_cast<int>(model->params.cfg.num_known);
    if (semantic_dim) *semantic_dim = static_cast<int>(model->params.cfg.semantic_dim);
    return SR2_OK;
}

void sr2_model_free(sr2_model* model) { delete model; }

void sr2_disc_opts_init(sr2_disc_opts* opts) {
    if (!opts) return;
    opts->unknown_csv = "";
    opts->min_snr = SR2_SNR_NO_SIEVE;
    opts->split_seed = 1;
    opts->order_seed = 1;
    opts->lambda1 = 0.4;
    opts->lambda2 = 1.0;
    opts->metric = "mahalanobis";
    opts->update_known = 0;
    opts->fit_unknown_cov = 0;
    opts->shrinkage = 1e-3;
}

int sr2_evaluate(const sr2_model* model, const sr2_corpus* corpus, const sr2_disc_opts* opts,
                 char** json_out) {
    if (int rc = require(model && corpus && opts && json_out, "null argument")) return rc;
    return guarded([&] {
        sr2cnn::EvalRunConfig cfg;
        cfg.split.unknown = split_csv(opts->unknown_csv);
        cfg.split.seed = opts->split_seed;
        cfg.min_snr = sieve_of(opts->min_snr);
        cfg.metric = sr2cnn::metric_from_name(opts->metric ? opts->metric : "mahalanobis");
        cfg.shrinkage = opts->shrinkage;
        sr2cnn::EvalRunResult res = sr2cnn::run_eval(model->params, corpus->corpus, cfg);
        *json_out = dup_string(res.to_json());
    });
}

int sr2_discriminate(const sr2_model* model, const sr2_corpus* corpus, const sr2_disc_opts* opts,
                     char** report_json_out, char** registry_json_out) {
    if (int rc = require(model && corpus && opts && report_json_out, "null argument")) return rc;
    return guarded([&] {
        sr2cnn::DiscriminateRunResult res =
            sr2cnn::run_discriminate(model->params, corpus->corpus, to_disc_config(opts));
        *report_json_out = dup_string(res.report.to_json());
        if (registry_json_out) *registry_json_out = dup_string(res.registry_json);
    });
}

int sr2_sweep(const sr2_model* model, const sr2_corpus* corpus, const sr2_disc_opts* opts,
              const double* lambdas, int n_lambdas, char** csv_out, char** summary_json_out) {
    if (int rc = require(model && corpus && opts && lambdas && csv_out, "null argument")) return rc;
    if (int rc = require(n_lambdas > 0, "empty lambda1 grid")) return rc;
    return guarded([&] {
        std::vector<double> grid(lambdas, lambdas + n_lambdas);
        sr2cnn::SweepRunResult res =
            sr2cnn::run_sweep(model->params, corpus->corpus, to_disc_config(opts), grid);
        std::string csv = sr2cnn::ZslReport::csv_header() + "\n";
        for (const auto& row : res.rows) csv += row.csv_row() + "\n";
        *csv_out = dup_string(csv);
        if (summary_json_out) {
            nlohmann::json j;
            j["total_width"] = res.interval.total_width;
            j["intervals"] = nlohmann::json::array();
            for (const auto& [lo, hi] : res.interval.intervals)
                j["intervals"].push_back({{"lo", lo}, {"hi", hi}});
            *summary_json_out = dup_string(j.dump(2));
        }
    });
}

int sr2_hash_file(const char* path, uint64_t* out) {
    if (int rc = require(path && out, "null argument")) return rc;
    return guarded([&] { *out = sr2cnn::hash_file(path); });
}

}  // extern "C"
