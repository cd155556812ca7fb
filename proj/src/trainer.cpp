#include "sr2cnn/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>

#include "sr2cnn/rng.hpp"
#include "sr2cnn/threading.hpp"

namespace sr2cnn {

namespace {

constexpr std::size_t kGradChunks = 16;  // fixed so results don't depend on thread count

template <typename T>
void zero_params(ModelParams<T>& p) {
    for (auto& [name, t] : p.named_tensors()) t->zero();
}

template <typename T>
void accumulate_params(ModelParams<T>& dst, const ModelParams<T>& src) {
    auto d = dst.named_tensors();
    auto s = src.named_tensors();
    for (std::size_t i = 0; i < d.size(); ++i) {
        T* a = d[i].second->ptr();
        const T* b = s[i].second->ptr();
        for (std::size_t j = 0; j < d[i].second->numel(); ++j) a[j] += b[j];
    }
}

}  // namespace

template <typename T>
EpochStats train_epoch(ModelParams<T>& model, const LabeledFrames<T>& data,
                       const TrainConfig& cfg, AdamState<T>& adam, std::uint64_t epoch_index,
                       const TrainHooks* hooks) {
    cfg.validate();
    const std::size_t n = data.count();
    if (n < cfg.batch)
        throw Error(ErrorCode::invalid_argument, "training set smaller than one batch");
    for (std::uint16_t l : data.labels)
        if (l >= model.cfg.num_known)
            throw Error(ErrorCode::invalid_argument, "training label outside known classes");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, 0xBA7C4, epoch_index));
    shuffle_rng.shuffle(order);

    const std::size_t n_batches = n / cfg.batch;  // last partial batch dropped
    const std::size_t N = cfg.batch;
    const std::size_t t = model.cfg.semantic_dim;

    std::vector<Workspace<T>> ws(N);
    std::vector<ModelParams<T>> grad_chunks(kGradChunks);
    for (auto& g : grad_chunks) g.allocate(model.cfg);
    ModelParams<T> grad_total;
    grad_total.allocate(model.cfg);

    std::vector<Tensor<T>*> params = model.trainable();
    std::vector<const Tensor<T>*> grads;
    for (Tensor<T>* g : grad_total.trainable()) grads.push_back(g);

    EpochStats stats;
    for (std::size_t b = 0; b < n_batches; ++b) {
        const std::size_t* idx = nullptr;
        std::vector<std::size_t> batch_idx(order.begin() + b * N, order.begin() + (b + 1) * N);
        idx = batch_idx.data();

        parallel_chunks(kGradChunks, [&](std::size_t c) {
            auto [lo, hi] = chunk_range(N, kGradChunks, c);
            for (std::size_t i = lo; i < hi; ++i)
                forward_sample(model, data.frame_tensor(idx[i]), ws[i]);
        });

        Tensor<T> features({N, t});
        std::vector<std::uint16_t> labels(N);
        for (std::size_t i = 0; i < N; ++i) {
            std::copy(ws[i].z.data.begin(), ws[i].z.data.end(), features.ptr() + i * t);
            labels[i] = data.labels[idx[i]];
        }

        // statement order per training loop contract: center update first,
        // then the losses, then the parameter updates
        CenterTable<T> table{model.centers, static_cast<T>(cfg.center_alpha)};
        Tensor<T> delta = center_delta(features, labels, table, cfg.classic_center_update);
        apply_center_delta(table, delta);
        model.centers = table.centers;
        if (hooks && hooks->on_center_update) hooks->on_center_update(b);

        double ct = center_loss(features, labels, table);
        Tensor<T> probs({N, model.cfg.num_known});
        for (std::size_t i = 0; i < N; ++i)
            std::copy(ws[i].probs.data.begin(), ws[i].probs.data.end(),
                      probs.ptr() + i * model.cfg.num_known);
        double ce = cross_entropy(probs, labels);
        Tensor<T> recon({N, data.frame_elems()});
        Tensor<T> orig({N, data.frame_elems()});
        for (std::size_t i = 0; i < N; ++i) {
            std::copy(ws[i].recon.data.begin(), ws[i].recon.data.end(),
                      recon.ptr() + i * data.frame_elems());
            std::copy(data.frame(idx[i]), data.frame(idx[i]) + data.frame_elems(),
                      orig.ptr() + i * data.frame_elems());
        }
        double r = reconstruction_loss(recon, orig);
        BatchLoss loss = combine_losses(ce, ct, r, cfg.weights);
        if (!std::isfinite(loss.total))
            throw Error(ErrorCode::numeric,
                        "non-finite loss in batch " + std::to_string(b) + " (ce=" +
                            std::to_string(ce) + " ct=" + std::to_string(ct) +
                            " r=" + std::to_string(r) + ")");
        if (hooks && hooks->on_loss) hooks->on_loss(b, loss);

        for (auto& g : grad_chunks) zero_params(g);
        parallel_chunks(kGradChunks, [&](std::size_t c) {
            auto [lo, hi] = chunk_range(N, kGradChunks, c);
            for (std::size_t i = lo; i < hi; ++i)
                backward_sample(model, ws[i], data.frame_tensor(idx[i]), labels[i], cfg.weights,
                                N, grad_chunks[c]);
        });
        zero_params(grad_total);
        for (const auto& g : grad_chunks) accumulate_params(grad_total, g);

        adam_step(params, grads, adam, static_cast<T>(cfg.lr));
        if (hooks && hooks->on_param_update) hooks->on_param_update(b);

        stats.ce += ce;
        stats.ct += ct;
        stats.r += r;
        stats.total += loss.total;
        stats.batches += 1;
    }
    if (stats.batches > 0) {
        stats.ce /= stats.batches;
        stats.ct /= stats.batches;
        stats.r /= stats.batches;
        stats.total /= stats.batches;
    }
    return stats;
}

template <typename T>
AccuracyReport evaluate_softmax(const ModelParams<T>& model, const LabeledFrames<T>& data) {
    const std::size_t k = model.cfg.num_known;
    for (std::uint16_t l : data.labels)
        if (l >= k) throw Error(ErrorCode::invalid_argument, "label outside known classes");
    std::vector<std::vector<std::size_t>> correct(kGradChunks, std::vector<std::size_t>(k, 0));
    std::vector<std::vector<std::size_t>> total(kGradChunks, std::vector<std::size_t>(k, 0));
    parallel_chunks(kGradChunks, [&](std::size_t c) {
        auto [lo, hi] = chunk_range(data.count(), kGradChunks, c);
        for (std::size_t i = lo; i < hi; ++i) {
            auto [z, recs] = extract_features(data.frame_tensor(i), model);
            Tensor<T> probs = classify(z, model);
            std::size_t arg = 0;
            for (std::size_t j = 1; j < probs.numel(); ++j)
                if (probs(j) > probs(arg)) arg = j;
            total[c][data.labels[i]]++;
            if (arg == data.labels[i]) correct[c][data.labels[i]]++;
        }
    });
    AccuracyReport rep;
    rep.per_class.assign(k, 0.0);
    rep.per_class_count.assign(k, 0);
    std::vector<std::size_t> corr(k, 0);
    for (std::size_t c = 0; c < kGradChunks; ++c)
        for (std::size_t j = 0; j < k; ++j) {
            corr[j] += correct[c][j];
            rep.per_class_count[j] += total[c][j];
        }
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t j = 0; j < k; ++j) {
        if (rep.per_class_count[j] == 0) continue;
        rep.per_class[j] = static_cast<double>(corr[j]) / rep.per_class_count[j];
        sum += rep.per_class[j];
        present++;
    }
    rep.macro = present ? sum / present : 0.0;
    return rep;
}

template <typename T>
std::vector<std::vector<double>> extract_all_features(const ModelParams<T>& model,
                                                      const LabeledFrames<T>& data) {
    std::vector<std::vector<double>> out(data.count());
    parallel_chunks(kGradChunks, [&](std::size_t c) {
        auto [lo, hi] = chunk_range(data.count(), kGradChunks, c);
        for (std::size_t i = lo; i < hi; ++i) {
            auto [z, recs] = extract_features(data.frame_tensor(i), model);
            out[i].assign(z.data.begin(), z.data.end());
        }
    });
    return out;
}

template <typename T>
FitResult<T> fit(ModelParams<T> model, const LabeledFrames<T>& train, const LabeledFrames<T>& val,
                 const TrainConfig& cfg, const TrainHooks* hooks,
                 const std::function<void(const HistoryRow&)>& on_epoch) {
    cfg.validate();
    if (train.count() == 0 || val.count() == 0)
        throw Error(ErrorCode::invalid_argument, "empty dataset");

    AdamState<T> adam = AdamState<T>::for_params(model.trainable());
    FitResult<T> result;
    result.best = model;
    result.best_val_acc = -1.0;

    std::size_t stale = 0;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        EpochStats es = train_epoch(model, train, cfg, adam, epoch, hooks);
        AccuracyReport acc = evaluate_softmax(model, val);
        HistoryRow row{epoch, es.ce, es.ct, es.r, es.total, acc.macro};
        result.history.push_back(row);
        if (on_epoch) on_epoch(row);
        if (acc.macro > result.best_val_acc) {
            result.best_val_acc = acc.macro;
            result.best_epoch = epoch;
            result.best = model;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    return result;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error(ErrorCode::io, "cannot open history file: " + path);
    os << "epoch,ce,ct,r,total,val_softmax_acc\n";
    char buf[256];
    for (const HistoryRow& row : history) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.epoch, row.ce,
                      row.ct, row.r, row.total, row.val_softmax_acc);
        os << buf;
    }
    if (!os) throw Error(ErrorCode::io, "failed writing history file: " + path);
}

#define SR2CNN_INSTANTIATE(T)                                                                    \
    template EpochStats train_epoch<T>(ModelParams<T>&, const LabeledFrames<T>&,                 \
                                       const TrainConfig&, AdamState<T>&, std::uint64_t,         \
                                       const TrainHooks*);                                        \
    template AccuracyReport evaluate_softmax<T>(const ModelParams<T>&, const LabeledFrames<T>&); \
    template std::vector<std::vector<double>> extract_all_features<T>(const ModelParams<T>&,     \
                                                                      const LabeledFrames<T>&);  \
    template FitResult<T> fit<T>(ModelParams<T>, const LabeledFrames<T>&, const LabeledFrames<T>&,\
                                 const TrainConfig&, const TrainHooks*,                          \
                                 const std::function<void(const HistoryRow&)>&);

SR2CNN_INSTANTIATE(float)
SR2CNN_INSTANTIATE(double)

#undef SR2CNN_INSTANTIATE

}  // namespace sr2cnn
