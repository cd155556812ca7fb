// sigzsl: corpus synthesis, training, evaluation and zero-shot
// discrimination from the command line. Talks to the sr2cnn shared library
// through its C interface only.

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sr2cnn.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Cleanup {
    sr2_corpus* corpus = nullptr;
    sr2_model* model = nullptr;
    ~Cleanup() {
        if (corpus) sr2_corpus_free(corpus);
        if (model) sr2_model_free(model);
    }
};

int fail(int rc, const std::string& what) {
    std::fprintf(stderr, "sigzsl: %s: %s\n", what.c_str(), sr2_last_error());
    return rc;
}

std::string take_string(char* s) {
    std::string out = s ? s : "";
    sr2_string_free(s);
    return out;
}

std::string timestamp() {
    char buf[64];
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    os << text;
    if (!os) throw std::runtime_error("cannot write " + path.string());
}

void write_manifest(const fs::path& out_dir, const std::string& command, json config,
                    json outputs) {
    json m;
    m["command"] = command;
    m["version"] = sr2_version();
    m["config"] = std::move(config);
    m["outputs"] = std::move(outputs);
    const char* threads = std::getenv("SIGZSL_THREADS");
    m["threads"] = threads ? json(threads) : json("auto");
    m["timestamp"] = timestamp();
    write_text(out_dir / "manifest.json", m.dump(2) + "\n");
}

std::string hash_hex(const std::string& path) {
    uint64_t h = 0;
    if (sr2_hash_file(path.c_str(), &h) != SR2_OK) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<double> parse_lambda_grid(const std::string& spec) {
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        double lo, hi, step;
        if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0)
            throw CLI::ValidationError("--grid", "expected lo:hi:step");
        for (double v = lo; v <= hi + 1e-12; v += step) out.push_back(v);
    } else {
        std::stringstream is(spec);
        std::string tok;
        while (std::getline(is, tok, ',')) out.push_back(std::stod(tok));
    }
    if (out.empty()) throw CLI::ValidationError("--grid", "empty grid");
    return out;
}

// eval JSON -> per-class CSV
std::string eval_json_to_csv(const std::string& text) {
    json j = json::parse(text);
    std::string csv = "class,softmax_acc,cluster_acc\n";
    const auto& names = j["known_classes"];
    for (std::size_t i = 0; i < names.size(); ++i) {
        csv += names[i].get<std::string>() + "," +
               std::to_string(j["softmax"]["per_class"][i].get<double>()) + "," +
               std::to_string(j["cluster"]["per_class"][i].get<double>()) + "\n";
    }
    csv += "macro," + std::to_string(j["softmax"]["macro"].get<double>()) + "," +
           std::to_string(j["cluster"]["macro"].get<double>()) + "\n";
    return csv;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot signal recognition toolkit"};
    app.require_subcommand(1);

    std::string out_dir = ".";
    app.add_option("--out", out_dir, "output directory for artifacts and the run manifest")
        ->capture_default_str();

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "synthesize a SIGDS corpus");
    std::string g_classes = "all", g_snr = "2:40:2";
    int g_frames = 20000;
    std::uint64_t g_seed = 1;
    sr2_channel_opts g_ch;
    sr2_channel_opts_init(&g_ch);
    bool g_awgn = true, g_rayleigh = true, g_multipath = true;
    gen->add_option("--classes", g_classes, "'all' or a comma list of modulation names")
        ->capture_default_str();
    gen->add_option("--frames-per-class", g_frames)->capture_default_str();
    gen->add_option("--snr", g_snr, "SNR grid, lo:hi:step or comma list (dB)")
        ->capture_default_str();
    gen->add_option("--seed", g_seed)->capture_default_str();
    gen->add_flag("--awgn,!--no-awgn", g_awgn, "additive white Gaussian noise");
    gen->add_flag("--rayleigh,!--no-rayleigh", g_rayleigh, "Rayleigh-drawn multipath tap gains");
    gen->add_flag("--multipath,!--no-multipath", g_multipath, "3-tap multipath channel");
    gen->add_option("--clock-ppm", g_ch.clock_ppm, "sample-clock offset bound (ppm)")
        ->capture_default_str();
    gen->add_option("--cfo", g_ch.cfo_max, "carrier-frequency-offset bound (cycles/sample)")
        ->capture_default_str();

    // ---- shared train/eval/disc options ----
    std::string data_path, model_path, unknown_csv;
    int min_snr = SR2_SNR_NO_SIEVE;
    std::uint64_t split_seed = 1;

    auto add_data_opts = [&](CLI::App* cmd, bool needs_model) {
        cmd->add_option("--data", data_path, "SIGDS corpus path")->required();
        if (needs_model) cmd->add_option("--model", model_path, "checkpoint path")->required();
        cmd->add_option("--unknown", unknown_csv, "comma list of withheld (unknown) classes");
        cmd->add_option("--min-snr", min_snr, "drop records below this SNR before splitting");
        cmd->add_option("--split-seed", split_seed)->capture_default_str();
    };

    // ---- train ----
    auto* train = app.add_subcommand("train", "train a model on the known classes");
    sr2_train_opts t_opts;
    sr2_train_opts_init(&t_opts);
    int t_batch = 256, t_epochs = 250, t_patience = 25, t_dim = 64;
    double t_lr = 1e-3, t_alpha = 0.5, t_lct = 0.1, t_lr_weight = 1.0;
    bool t_no_ce = false, t_no_ct = false, t_no_r = false;
    std::uint64_t t_seed = 1;
    add_data_opts(train, false);
    train->add_option("--batch", t_batch)->capture_default_str();
    train->add_option("--lr", t_lr)->capture_default_str();
    train->add_option("--alpha", t_alpha, "center update rate")->capture_default_str();
    train->add_option("--lambda-ct", t_lct)->capture_default_str();
    train->add_option("--lambda-r", t_lr_weight)->capture_default_str();
    train->add_flag("--no-ce", t_no_ce, "ablation: disable cross-entropy loss");
    train->add_flag("--no-ct", t_no_ct, "ablation: disable center loss");
    train->add_flag("--no-r", t_no_r, "ablation: disable reconstruction loss");
    train->add_option("--epochs", t_epochs)->capture_default_str();
    train->add_option("--patience", t_patience)->capture_default_str();
    train->add_option("--t", t_dim, "semantic dimension")->capture_default_str();
    train->add_option("--seed", t_seed)->capture_default_str();

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "softmax and cluster accuracy report");
    std::string e_metric = "mahalanobis";
    double e_shrinkage = 1e-3;
    add_data_opts(eval, true);
    eval->add_option("--metric", e_metric)->capture_default_str();
    eval->add_option("--shrinkage", e_shrinkage)->capture_default_str();

    // ---- discriminate ----
    auto* disc = app.add_subcommand("discriminate", "zero-shot known/unknown discrimination");
    double d_lambda1 = 0.4, d_lambda2 = 1.0, d_shrinkage = 1e-3;
    std::string d_metric = "mahalanobis";
    bool d_update_known = false, d_fit_unknown = false;
    std::uint64_t d_order_seed = 1;
    add_data_opts(disc, true);
    disc->add_option("--lambda1", d_lambda1, "discrimination coefficient")->capture_default_str();
    disc->add_option("--lambda2", d_lambda2)->capture_default_str();
    disc->add_option("--metric", d_metric,
                     "mahalanobis | euclidean | diagonal | scaled_identity")
        ->capture_default_str();
    disc->add_flag("--update-known", d_update_known, "refresh known centers too");
    disc->add_flag("--fit-unknown-cov", d_fit_unknown,
                   "fit unknown-class covariances once member sets are large enough");
    disc->add_option("--shrinkage", d_shrinkage)->capture_default_str();
    disc->add_option("--order-seed", d_order_seed, "test presentation order seed")
        ->capture_default_str();

    // ---- sweep ----
    auto* sweep = app.add_subcommand("sweep", "lambda1 sweep with interval summary");
    std::string s_grid = "0.05:1.0:0.05";
    add_data_opts(sweep, true);
    sweep->add_option("--grid", s_grid, "lambda1 grid, lo:hi:step or comma list")
        ->capture_default_str();
    sweep->add_option("--lambda2", d_lambda2)->capture_default_str();
    sweep->add_option("--metric", d_metric)->capture_default_str();
    sweep->add_flag("--update-known", d_update_known);
    sweep->add_flag("--fit-unknown-cov", d_fit_unknown);
    sweep->add_option("--shrinkage", d_shrinkage)->capture_default_str();
    sweep->add_option("--order-seed", d_order_seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : SR2_E_USAGE;
    }

    try {
        fs::create_directories(out_dir);
        const fs::path out(out_dir);
        Cleanup owned;

        if (gen->parsed()) {
            g_ch.awgn = g_awgn ? 1 : 0;
            g_ch.rayleigh = g_rayleigh ? 1 : 0;
            g_ch.multipath = g_multipath ? 1 : 0;
            if (int rc = sr2_corpus_generate(g_classes.c_str(), g_frames, g_snr.c_str(), g_seed,
                                             &g_ch, &owned.corpus))
                return fail(rc, "gen");
            const std::string path = (out / "corpus.sigds").string();
            if (int rc = sr2_corpus_write(owned.corpus, path.c_str())) return fail(rc, "gen");
            json cfg = {{"classes", g_classes},   {"frames_per_class", g_frames},
                        {"snr", g_snr},           {"seed", g_seed},
                        {"awgn", g_awgn},         {"rayleigh", g_rayleigh},
                        {"multipath", g_multipath}, {"clock_ppm", g_ch.clock_ppm},
                        {"cfo", g_ch.cfo_max}};
            json outputs = {{"corpus", path}, {"corpus_hash", hash_hex(path)}};
            write_manifest(out, "gen", cfg, outputs);
            std::printf("wrote %s\n", path.c_str());
            return 0;
        }

        if (train->parsed()) {
            if (int rc = sr2_corpus_read(data_path.c_str(), &owned.corpus))
                return fail(rc, "train: read corpus");
            t_opts.unknown_csv = unknown_csv.c_str();
            t_opts.min_snr = min_snr;
            t_opts.batch = t_batch;
            t_opts.lr = t_lr;
            t_opts.center_alpha = t_alpha;
            t_opts.lambda_ct = t_lct;
            t_opts.lambda_r = t_lr_weight;
            t_opts.ce_on = t_no_ce ? 0 : 1;
            t_opts.ct_on = t_no_ct ? 0 : 1;
            t_opts.r_on = t_no_r ? 0 : 1;
            t_opts.max_epochs = t_epochs;
            t_opts.patience = t_patience;
            t_opts.semantic_dim = t_dim;
            t_opts.seed = t_seed;
            t_opts.split_seed = split_seed;
            const std::string history = (out / "history.csv").string();
            if (int rc = sr2_train(owned.corpus, &t_opts, history.c_str(), &owned.model))
                return fail(rc, "train");
            const std::string model_out = (out / "model.sr2c").string();
            if (int rc = sr2_model_save(owned.model, model_out.c_str())) return fail(rc, "train");
            json cfg = {{"data", data_path},       {"data_hash", hash_hex(data_path)},
                        {"unknown", unknown_csv},  {"min_snr", min_snr},
                        {"batch", t_batch},        {"lr", t_lr},
                        {"alpha", t_alpha},        {"lambda_ct", t_lct},
                        {"lambda_r", t_lr_weight}, {"ce_on", t_opts.ce_on != 0},
                        {"ct_on", t_opts.ct_on != 0}, {"r_on", t_opts.r_on != 0},
                        {"epochs", t_epochs},      {"patience", t_patience},
                        {"semantic_dim", t_dim},   {"seed", t_seed},
                        {"split_seed", split_seed}};
            json outputs = {{"model", model_out},
                            {"model_hash", hash_hex(model_out)},
                            {"history", history}};
            write_manifest(out, "train", cfg, outputs);
            std::printf("wrote %s\n", model_out.c_str());
            return 0;
        }

        // remaining commands need a corpus and a model
        if (int rc = sr2_corpus_read(data_path.c_str(), &owned.corpus))
            return fail(rc, "read corpus");
        if (int rc = sr2_model_load(model_path.c_str(), &owned.model))
            return fail(rc, "load model");

        sr2_disc_opts opts;
        sr2_disc_opts_init(&opts);
        opts.unknown_csv = unknown_csv.c_str();
        opts.min_snr = min_snr;
        opts.split_seed = split_seed;
        opts.order_seed = d_order_seed;
        opts.lambda1 = d_lambda1;
        opts.lambda2 = d_lambda2;
        opts.metric = d_metric.c_str();
        opts.update_known = d_update_known ? 1 : 0;
        opts.fit_unknown_cov = d_fit_unknown ? 1 : 0;
        opts.shrinkage = d_shrinkage;

        json common = {{"data", data_path},      {"data_hash", hash_hex(data_path)},
                       {"model", model_path},    {"model_hash", hash_hex(model_path)},
                       {"unknown", unknown_csv}, {"min_snr", min_snr},
                       {"split_seed", split_seed}};

        if (eval->parsed()) {
            opts.metric = e_metric.c_str();
            opts.shrinkage = e_shrinkage;
            char* json_text = nullptr;
            if (int rc = sr2_evaluate(owned.model, owned.corpus, &opts, &json_text))
                return fail(rc, "eval");
            std::string text = take_string(json_text);
            write_text(out / "eval.json", text + "\n");
            write_text(out / "eval.csv", eval_json_to_csv(text));
            common["metric"] = e_metric;
            common["shrinkage"] = e_shrinkage;
            write_manifest(out, "eval", common,
                           json{{"eval_json", (out / "eval.json").string()},
                                {"eval_csv", (out / "eval.csv").string()}});
            std::printf("%s\n", text.c_str());
            return 0;
        }

        if (disc->parsed()) {
            char* report = nullptr;
            char* registry = nullptr;
            if (int rc = sr2_discriminate(owned.model, owned.corpus, &opts, &report, &registry))
                return fail(rc, "discriminate");
            std::string report_text = take_string(report);
            write_text(out / "zsl_report.json", report_text + "\n");
            write_text(out / "registry.json", take_string(registry) + "\n");
            common["lambda1"] = d_lambda1;
            common["lambda2"] = d_lambda2;
            common["metric"] = d_metric;
            common["update_known"] = d_update_known;
            common["fit_unknown_cov"] = d_fit_unknown;
            common["shrinkage"] = d_shrinkage;
            common["order_seed"] = d_order_seed;
            write_manifest(out, "discriminate", common,
                           json{{"report", (out / "zsl_report.json").string()},
                                {"registry", (out / "registry.json").string()}});
            std::printf("%s\n", report_text.c_str());
            return 0;
        }

        if (sweep->parsed()) {
            std::vector<double> grid = parse_lambda_grid(s_grid);
            char* csv = nullptr;
            char* summary = nullptr;
            if (int rc = sr2_sweep(owned.model, owned.corpus, &opts, grid.data(),
                                   static_cast<int>(grid.size()), &csv, &summary))
                return fail(rc, "sweep");
            write_text(out / "sweep.csv", take_string(csv));
            std::string summary_text = take_string(summary);
            write_text(out / "sweep_summary.json", summary_text + "\n");
            common["grid"] = s_grid;
            common["lambda2"] = d_lambda2;
            common["metric"] = d_metric;
            common["update_known"] = d_update_known;
            common["fit_unknown_cov"] = d_fit_unknown;
            common["shrinkage"] = d_shrinkage;
            common["order_seed"] = d_order_seed;
            write_manifest(out, "sweep", common,
                           json{{"csv", (out / "sweep.csv").string()},
                                {"summary", (out / "sweep_summary.json").string()}});
            std::printf("%s\n", summary_text.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "sigzsl: %s\n", e.what());
        return SR2_E_DATA;
    }
    return 0;
}
