#include "sr2cnn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sr2cnn/rng.hpp"
#include "sr2cnn/threading.hpp"

namespace sr2cnn {

namespace {

Corpus maybe_sieve(const Corpus& corpus, const std::optional<int>& min_snr) {
    if (!min_snr) return corpus;
    return sieve_by_snr(corpus, *min_snr);
}

std::vector<std::string> known_names_of(const Corpus& corpus,
                                        const std::vector<std::uint16_t>& known_ids) {
    std::vector<std::string> names;
    for (std::uint16_t id : known_ids) names.push_back(corpus.class_names[id]);
    return names;
}

// per-known-class feature lists from the training split
std::vector<std::vector<std::vector<double>>> features_by_class(
    const ModelParams<float>& model, const LabeledFrames<float>& data, std::size_t num_known) {
    std::vector<std::vector<double>> feats = extract_all_features(model, data);
    std::vector<std::vector<std::vector<double>>> by_class(num_known);
    for (std::size_t i = 0; i < feats.size(); ++i)
        by_class[data.labels[i]].push_back(std::move(feats[i]));
    return by_class;
}

}  // namespace

TrainRunResult run_training(const Corpus& corpus, const TrainRunConfig& cfg,
                            const std::function<void(const HistoryRow&)>& on_epoch) {
    Corpus sieved = maybe_sieve(corpus, cfg.min_snr);
    SplitResult split = split_dataset(sieved, cfg.split);
    if (split.known_ids.empty())
        throw Error(ErrorCode::invalid_argument, "no known classes left to train on");

    LabeledFrames<float> train = to_labeled<float>(split.train, split.known_ids);
    LabeledFrames<float> val = to_labeled<float>(split.val_known, split.known_ids);

    ArchConfig arch = ArchConfig::defaults(split.known_ids.size(),
                                           known_names_of(sieved, split.known_ids));
    arch.in_h = sieved.channels;
    arch.in_w = sieved.frame_len;
    arch.semantic_dim = cfg.semantic_dim;
    arch.validate();

    ModelParams<float> model = init_params<float>(arch, cfg.train.seed);
    FitResult<float> fitted = fit(std::move(model), train, val, cfg.train, nullptr, on_epoch);

    TrainRunResult out;
    out.model = std::move(fitted.best);
    out.history = std::move(fitted.history);
    out.best_epoch = fitted.best_epoch;
    out.best_val_acc = fitted.best_val_acc;
    out.known_ids = split.known_ids;
    out.unknown_ids = split.unknown_ids;
    return out;
}

void check_model_matches(const ModelParams<float>& model, const Corpus& corpus,
                         const std::vector<std::uint16_t>& known_ids) {
    if (model.cfg.num_known != known_ids.size())
        throw Error(ErrorCode::data_format,
                    "checkpoint/dataset mismatch: known class count differs (" +
                        std::to_string(model.cfg.num_known) + " vs " +
                        std::to_string(known_ids.size()) + ")");
    for (std::size_t i = 0; i < known_ids.size(); ++i) {
        const std::string& name = corpus.class_names[known_ids[i]];
        if (!model.cfg.class_names.empty() && model.cfg.class_names[i] != name)
            throw Error(ErrorCode::data_format,
                        "checkpoint/dataset mismatch: class " + std::to_string(i) + " is '" +
                            model.cfg.class_names[i] + "' in the checkpoint but '" + name +
                            "' in the dataset");
    }
    if (model.cfg.in_h != corpus.channels || model.cfg.in_w != corpus.frame_len)
        throw Error(ErrorCode::data_format, "checkpoint/dataset mismatch: frame geometry");
}

template <typename T>
AccuracyReport evaluate_cluster(const ModelParams<T>& model, const LabeledFrames<T>& data,
                                const ClassStats& stats, MetricKind metric) {
    const std::size_t k = stats.classes.size();
    for (std::uint16_t l : data.labels)
        if (l >= k) throw Error(ErrorCode::invalid_argument, "label outside known classes");
    std::vector<std::vector<double>> feats = extract_all_features(model, data);
    AccuracyReport rep;
    rep.per_class.assign(k, 0.0);
    rep.per_class_count.assign(k, 0);
    std::vector<std::size_t> correct(k, 0);
    for (std::size_t i = 0; i < feats.size(); ++i) {
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            double d = distance(feats[i], stats.classes[c], metric);
            if (c == 0 || d < best) {
                best = d;
                arg = c;
            }
        }
        rep.per_class_count[data.labels[i]]++;
        if (arg == data.labels[i]) correct[data.labels[i]]++;
    }
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < k; ++c) {
        if (rep.per_class_count[c] == 0) continue;
        rep.per_class[c] = static_cast<double>(correct[c]) / rep.per_class_count[c];
        sum += rep.per_class[c];
        present++;
    }
    rep.macro = present ? sum / present : 0.0;
    return rep;
}

template AccuracyReport evaluate_cluster<float>(const ModelParams<float>&,
                                                const LabeledFrames<float>&, const ClassStats&,
                                                MetricKind);
template AccuracyReport evaluate_cluster<double>(const ModelParams<double>&,
                                                 const LabeledFrames<double>&, const ClassStats&,
                                                 MetricKind);

std::string EvalRunResult::to_json() const {
    nlohmann::json j;
    j["known_classes"] = known_names;
    j["softmax"] = {{"macro", softmax.macro}, {"per_class", softmax.per_class}};
    j["cluster"] = {{"macro", cluster.macro}, {"per_class", cluster.per_class}};
    return j.dump(2);
}

std::string EvalRunResult::to_csv() const {
    std::ostringstream os;
    os << "class,softmax_acc,cluster_acc\n";
    for (std::size_t i = 0; i < known_names.size(); ++i)
        os << known_names[i] << "," << softmax.per_class[i] << "," << cluster.per_class[i] << "\n";
    os << "macro," << softmax.macro << "," << cluster.macro << "\n";
    return os.str();
}

EvalRunResult run_eval(const ModelParams<float>& model, const Corpus& corpus,
                       const EvalRunConfig& cfg) {
    Corpus sieved = maybe_sieve(corpus, cfg.min_snr);
    SplitResult split = split_dataset(sieved, cfg.split);
    check_model_matches(model, sieved, split.known_ids);

    LabeledFrames<float> train = to_labeled<float>(split.train, split.known_ids);
    LabeledFrames<float> test = to_labeled<float>(split.test_known, split.known_ids);

    EvalRunResult out;
    out.known_names = known_names_of(sieved, split.known_ids);
    out.softmax = evaluate_softmax(model, test);
    ClassStats stats =
        fit_statistics(features_by_class(model, train, split.known_ids.size()), cfg.shrinkage);
    out.cluster = evaluate_cluster(model, test, stats, cfg.metric);
    return out;
}

namespace {

struct TestStream {
    std::vector<std::vector<double>> features;  // shuffled presentation order
    std::vector<TruthLabel> truth;
};

TestStream build_test_stream(const ModelParams<float>& model, const SplitResult& split,
                             std::uint64_t order_seed) {
    LabeledFrames<float> known = to_labeled<float>(split.test_known, split.known_ids);
    std::vector<std::vector<double>> known_feats = extract_all_features(model, known);

    // unknown test frames keep their true class index (within unknown_ids)
    LabeledFrames<float> unknown;
    unknown.channels = split.test_unknown.channels;
    unknown.frame_len = split.test_unknown.frame_len;
    std::vector<std::size_t> unknown_truth;
    for (std::size_t i = 0; i < split.test_unknown.count(); ++i) {
        const auto cls = split.test_unknown.records[i].class_idx;
        auto it = std::find(split.unknown_ids.begin(), split.unknown_ids.end(), cls);
        unknown_truth.push_back(static_cast<std::size_t>(it - split.unknown_ids.begin()));
        const float* f = split.test_unknown.frame(i);
        unknown.frames.insert(unknown.frames.end(), f, f + split.test_unknown.frame_elems());
        unknown.labels.push_back(0);  // placeholder; features only
    }
    std::vector<std::vector<double>> unknown_feats = extract_all_features(model, unknown);

    TestStream stream;
    for (std::size_t i = 0; i < known_feats.size(); ++i) {
        stream.features.push_back(std::move(known_feats[i]));
        stream.truth.push_back({true, known.labels[i]});
    }
    for (std::size_t i = 0; i < unknown_feats.size(); ++i) {
        stream.features.push_back(std::move(unknown_feats[i]));
        stream.truth.push_back({false, unknown_truth[i]});
    }
    std::vector<std::size_t> order(stream.features.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(order_seed, 0x0DE6));
    rng.shuffle(order);
    TestStream shuffled;
    shuffled.features.reserve(order.size());
    shuffled.truth.reserve(order.size());
    for (std::size_t i : order) {
        shuffled.features.push_back(std::move(stream.features[i]));
        shuffled.truth.push_back(stream.truth[i]);
    }
    return shuffled;
}

}  // namespace

DiscriminateRunResult run_discriminate(const ModelParams<float>& model, const Corpus& corpus,
                                       const DiscriminateRunConfig& cfg) {
    cfg.disc.validate();
    Corpus sieved = maybe_sieve(corpus, cfg.min_snr);
    SplitResult split = split_dataset(sieved, cfg.split);
    check_model_matches(model, sieved, split.known_ids);
    if (split.unknown_ids.empty())
        std::fprintf(stderr, "warning: no unknown classes declared; running open-set only\n");

    LabeledFrames<float> train = to_labeled<float>(split.train, split.known_ids);
    ClassStats stats =
        fit_statistics(features_by_class(model, train, split.known_ids.size()),
                       cfg.disc.shrinkage);
    TestStream stream = build_test_stream(model, split, cfg.order_seed);

    UnknownRegistry registry;
    registry.dim = stats.dim;
    std::vector<Prediction> preds;
    preds.reserve(stream.features.size());
    for (const auto& z : stream.features)
        preds.push_back(discriminate(z, stats, registry, cfg.disc));

    OutcomeCounts counts =
        tally(preds, stream.truth, split.known_ids.size(), split.unknown_ids.size());
    DiscriminateRunResult out;
    out.report = build_report(counts, cfg.disc.lambda1, cfg.disc.lambda2, cfg.disc.metric);
    out.registry_json = registry_to_json(registry);
    return out;
}

SweepRunResult run_sweep(const ModelParams<float>& model, const Corpus& corpus,
                         const DiscriminateRunConfig& base, const std::vector<double>& lambdas) {
    if (lambdas.empty()) throw Error(ErrorCode::invalid_argument, "empty lambda1 grid");
    std::vector<double> grid = lambdas;
    std::sort(grid.begin(), grid.end());

    Corpus sieved = maybe_sieve(corpus, base.min_snr);
    SplitResult split = split_dataset(sieved, base.split);
    check_model_matches(model, sieved, split.known_ids);

    LabeledFrames<float> train = to_labeled<float>(split.train, split.known_ids);
    ClassStats frozen_stats =
        fit_statistics(features_by_class(model, train, split.known_ids.size()),
                       base.disc.shrinkage);
    TestStream stream = build_test_stream(model, split, base.order_seed);

    SweepRunResult out;
    std::vector<std::pair<double, double>> wtr_points;
    for (double l1 : grid) {
        DiscriminatorConfig dc = base.disc;
        dc.lambda1 = l1;
        ClassStats stats = frozen_stats;  // update_known mutations stay private to a run
        UnknownRegistry registry;
        registry.dim = stats.dim;
        std::vector<Prediction> preds;
        preds.reserve(stream.features.size());
        for (const auto& z : stream.features) preds.push_back(discriminate(z, stats, registry, dc));
        OutcomeCounts counts =
            tally(preds, stream.truth, split.known_ids.size(), split.unknown_ids.size());
        ZslReport rep = build_report(counts, l1, dc.lambda2, dc.metric);
        if (rep.wtr) wtr_points.emplace_back(l1, *rep.wtr);
        out.rows.push_back(std::move(rep));
    }
    if (!wtr_points.empty()) out.interval = discrimination_interval(wtr_points);
    return out;
}

std::vector<double> parse_grid(const std::string& spec) {
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        double lo, hi, step;
        char c1, c2;
        std::istringstream is(spec);
        if (!(is >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0)
            throw Error(ErrorCode::invalid_argument, "bad grid spec: " + spec);
        for (double v = lo; v <= hi + 1e-12; v += step) out.push_back(v);
    } else {
        std::istringstream is(spec);
        std::string tok;
        while (std::getline(is, tok, ',')) out.push_back(std::stod(tok));
    }
    if (out.empty()) throw Error(ErrorCode::invalid_argument, "empty grid spec");
    return out;
}

std::vector<int> parse_int_grid(const std::string& spec) {
    std::vector<int> out;
    if (spec.find(':') != std::string::npos) {
        int lo, hi, step;
        char c1, c2;
        std::istringstream is(spec);
        if (!(is >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0)
            throw Error(ErrorCode::invalid_argument, "bad SNR grid spec: " + spec);
        for (int v = lo; v <= hi; v += step) out.push_back(v);
    } else {
        std::istringstream is(spec);
        std::string tok;
        while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
    }
    if (out.empty()) throw Error(ErrorCode::invalid_argument, "empty SNR grid spec");
    return out;
}

}  // namespace sr2cnn
