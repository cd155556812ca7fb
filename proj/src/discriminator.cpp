#include "sr2cnn/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

namespace sr2cnn {

const char* metric_name(MetricKind m) {
    switch (m) {
        case MetricKind::mahalanobis: return "mahalanobis";
        case MetricKind::euclidean: return "euclidean";
        case MetricKind::diagonal: return "diagonal";
        case MetricKind::scaled_identity: return "scaled_identity";
    }
    return "?";
}

MetricKind metric_from_name(const std::string& name) {
    if (name == "mahalanobis") return MetricKind::mahalanobis;
    if (name == "euclidean") return MetricKind::euclidean;
    if (name == "diagonal") return MetricKind::diagonal;
    if (name == "scaled_identity" || name == "scaled") return MetricKind::scaled_identity;
    throw Error(ErrorCode::invalid_argument, "unknown metric: " + name);
}

namespace {

// in-place Cholesky of a symmetric positive-definite matrix; returns false
// if a non-positive pivot shows up
bool cholesky(std::vector<double>& a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (s <= 0.0) return false;
                a[i * n + i] = std::sqrt(s);
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
        for (std::size_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
    }
    return true;
}

// squared Mahalanobis via forward substitution with the Cholesky factor
double chol_quadform(const std::vector<double>& chol, const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<double> y(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = v[i];
        for (std::size_t k = 0; k < i; ++k) s -= chol[i * n + k] * y[k];
        y[i] = s / chol[i * n + i];
        acc += y[i] * y[i];
    }
    return acc;
}

}  // namespace

ClassStatsEntry fit_entry(const std::vector<std::vector<double>>& features, std::size_t dim,
                          double shrinkage) {
    if (features.empty())
        throw Error(ErrorCode::invalid_argument, "cannot fit statistics for an empty class");
    ClassStatsEntry e;
    e.count = features.size();
    e.mean.assign(dim, 0.0);
    for (const auto& f : features) {
        if (f.size() != dim)
            throw Error(ErrorCode::shape_mismatch, "feature dimension mismatch in fit");
        for (std::size_t i = 0; i < dim; ++i) e.mean[i] += f[i];
    }
    for (double& m : e.mean) m /= static_cast<double>(e.count);

    e.identity_cov = true;
    e.sigma2 = 1.0;
    e.diag.assign(dim, 1.0);
    if (e.count < 2) return e;  // singleton: identity metric is the only choice

    std::vector<double> cov(dim * dim, 0.0);
    std::vector<double> d(dim);
    for (const auto& f : features) {
        for (std::size_t i = 0; i < dim; ++i) d[i] = f[i] - e.mean[i];
        for (std::size_t i = 0; i < dim; ++i) {
            const double di = d[i];
            for (std::size_t j = 0; j <= i; ++j) cov[i * dim + j] += di * d[j];
        }
    }
    const double norm = 1.0 / static_cast<double>(e.count - 1);
    double trace = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            cov[i * dim + j] *= norm;
            cov[j * dim + i] = cov[i * dim + j];
        }
        trace += cov[i * dim + i];
    }
    if (!(trace > 0.0)) return e;  // degenerate (all features equal): keep identity

    const double ridge = shrinkage * trace / static_cast<double>(dim);
    for (std::size_t i = 0; i < dim; ++i) cov[i * dim + i] += ridge;

    std::vector<double> chol = cov;
    if (!cholesky(chol, dim)) return e;  // numerically unusable: keep identity

    e.identity_cov = false;
    e.cov = std::move(cov);
    e.chol = std::move(chol);
    e.diag.resize(dim);
    double shrunk_trace = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        e.diag[i] = e.cov[i * dim + i];
        shrunk_trace += e.diag[i];
    }
    e.sigma2 = shrunk_trace / static_cast<double>(dim);
    return e;
}

ClassStats fit_statistics(const std::vector<std::vector<std::vector<double>>>& features_per_class,
                          double shrinkage) {
    if (features_per_class.empty())
        throw Error(ErrorCode::invalid_argument, "no classes to fit");
    ClassStats stats;
    stats.shrinkage = shrinkage;
    for (const auto& cls : features_per_class) {
        if (cls.empty())
            throw Error(ErrorCode::invalid_argument, "cannot fit statistics for an empty class");
        if (stats.dim == 0) stats.dim = cls.front().size();
        stats.classes.push_back(fit_entry(cls, stats.dim, shrinkage));
    }
    return stats;
}

double distance(const std::vector<double>& z, const ClassStatsEntry& entry, MetricKind metric) {
    const std::size_t n = entry.mean.size();
    if (z.size() != n) throw Error(ErrorCode::shape_mismatch, "distance dimension mismatch");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = z[i] - entry.mean[i];

    const bool ident = entry.identity_cov;
    switch (metric) {
        case MetricKind::euclidean: {
            double s = 0.0;
            for (double x : v) s += x * x;
            return std::sqrt(s);
        }
        case MetricKind::diagonal: {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += v[i] * v[i] / (ident ? 1.0 : entry.diag[i]);
            return std::sqrt(s);
        }
        case MetricKind::scaled_identity: {
            double s = 0.0;
            for (double x : v) s += x * x;
            return std::sqrt(s / (ident ? 1.0 : entry.sigma2));
        }
        case MetricKind::mahalanobis: {
            if (ident) {
                double s = 0.0;
                for (double x : v) s += x * x;
                return std::sqrt(s);
            }
            return std::sqrt(chol_quadform(entry.chol, v));
        }
    }
    throw Error(ErrorCode::invalid_argument, "bad metric kind");
}

double theta1(double lambda1, std::size_t t) {
    if (!(lambda1 > 0) || t < 1)
        throw Error(ErrorCode::invalid_argument, "theta1 requires lambda1 > 0 and t >= 1");
    return lambda1 * 3.0 * std::sqrt(static_cast<double>(t));
}

double theta2(double theta1_value, double lambda2, double d1) {
    if (lambda2 < 0 || d1 < 0)
        throw Error(ErrorCode::invalid_argument, "theta2 requires lambda2 >= 0 and d1 >= 0");
    return (theta1_value + lambda2 * d1) / (1.0 + lambda2);
}

UnknownEntry* UnknownRegistry::find(int label) {
    for (auto& e : entries)
        if (e.label == label) return &e;
    return nullptr;
}

const UnknownEntry* UnknownRegistry::find(int label) const {
    for (const auto& e : entries)
        if (e.label == label) return &e;
    return nullptr;
}

void registry_update(UnknownRegistry& registry, int label, const std::vector<double>& z) {
    UnknownEntry* e = registry.find(label);
    if (!e) throw Error(ErrorCode::invalid_argument, "unknown registry label");
    if (z.size() != registry.dim)
        throw Error(ErrorCode::shape_mismatch, "registry feature dimension mismatch");
    e->members.push_back(z);
    for (std::size_t i = 0; i < z.size(); ++i) e->sum[i] += z[i];
    e->metric_dirty = true;
}

std::vector<double> unknown_metric_matrix(const UnknownRegistry& registry, int label,
                                          MetricKind metric, double shrinkage) {
    const UnknownEntry* e = registry.find(label);
    if (!e) throw Error(ErrorCode::invalid_argument, "unknown registry label");
    const std::size_t t = registry.dim;
    std::vector<double> identity(t * t, 0.0);
    for (std::size_t i = 0; i < t; ++i) identity[i * t + i] = 1.0;
    if (e->members.size() < t + 1) return identity;  // covariance rank-deficient

    ClassStatsEntry fitted = fit_entry(e->members, t, shrinkage);
    if (fitted.identity_cov) return identity;
    switch (metric) {
        case MetricKind::euclidean:
            return identity;
        case MetricKind::mahalanobis:
            return fitted.cov;
        case MetricKind::diagonal: {
            std::vector<double> a(t * t, 0.0);
            for (std::size_t i = 0; i < t; ++i) a[i * t + i] = fitted.diag[i];
            return a;
        }
        case MetricKind::scaled_identity: {
            std::vector<double> a(t * t, 0.0);
            for (std::size_t i = 0; i < t; ++i) a[i * t + i] = fitted.sigma2;
            return a;
        }
    }
    return identity;
}

namespace {

// metric entry for an unknown label under the footnote rule: identity until
// #(G) >= t+1 (and only when unknown covariances are enabled)
const ClassStatsEntry& unknown_entry_metric(UnknownEntry& e, std::size_t dim,
                                            const DiscriminatorConfig& cfg) {
    if (e.metric_dirty) {
        e.metric_entry = ClassStatsEntry{};
        e.metric_entry.mean = e.center();
        e.metric_entry.count = e.members.size();
        e.metric_entry.identity_cov = true;
        e.metric_entry.diag.assign(dim, 1.0);
        if (cfg.fit_unknown_cov && e.members.size() >= dim + 1) {
            ClassStatsEntry fitted = fit_entry(e.members, dim, cfg.shrinkage);
            fitted.mean = e.metric_entry.mean;
            e.metric_entry = std::move(fitted);
        }
        e.metric_dirty = false;
    }
    return e.metric_entry;
}

ClassStatsEntry frozen_unknown_metric(const UnknownEntry& e, std::size_t dim,
                                      const DiscriminatorConfig& cfg) {
    ClassStatsEntry entry;
    entry.mean = e.center();
    entry.count = e.members.size();
    entry.identity_cov = true;
    entry.diag.assign(dim, 1.0);
    if (cfg.fit_unknown_cov && e.members.size() >= dim + 1) {
        ClassStatsEntry fitted = fit_entry(e.members, dim, cfg.shrinkage);
        fitted.mean = entry.mean;
        entry = std::move(fitted);
    }
    return entry;
}

struct Step1 {
    double d1;
    std::size_t argmin;
};

Step1 step1(const std::vector<double>& z, const ClassStats& stats, MetricKind metric) {
    if (stats.classes.empty())
        throw Error(ErrorCode::invalid_argument, "discriminator needs fitted class statistics");
    Step1 s{0.0, 0};
    for (std::size_t k = 0; k < stats.classes.size(); ++k) {
        double d = distance(z, stats.classes[k], metric);
        if (k == 0 || d < s.d1) {
            s.d1 = d;
            s.argmin = k;  // ties keep the lowest class index
        }
    }
    return s;
}

}  // namespace

Prediction discriminate(const std::vector<double>& z, ClassStats& stats,
                        UnknownRegistry& registry, const DiscriminatorConfig& cfg) {
    cfg.validate();
    if (registry.dim == 0) registry.dim = stats.dim;

    Prediction pred;
    Step1 s1 = step1(z, stats, cfg.metric);
    pred.d1 = s1.d1;
    pred.theta1 = theta1(cfg.lambda1, stats.dim);

    if (s1.d1 < pred.theta1) {
        pred.known = true;
        pred.label = static_cast<int>(s1.argmin);
        if (cfg.update_known) {
            // literal pseudocode mode: the predicted class center keeps
            // absorbing accepted samples as a running mean
            ClassStatsEntry& e = stats.classes[s1.argmin];
            const double n = static_cast<double>(e.count);
            for (std::size_t i = 0; i < e.mean.size(); ++i)
                e.mean[i] = (e.mean[i] * n + z[i]) / (n + 1.0);
            e.count += 1;
        }
        return pred;
    }

    if (registry.entries.empty()) {
        UnknownEntry e;
        e.label = 1;
        e.members.push_back(z);
        e.sum = z;
        registry.entries.push_back(std::move(e));
        pred.known = false;
        pred.label = 1;
        return pred;
    }

    double d2v = 0.0;
    std::size_t arg = 0;
    for (std::size_t u = 0; u < registry.entries.size(); ++u) {
        const ClassStatsEntry& me =
            unknown_entry_metric(registry.entries[u], registry.dim, cfg);
        double d = distance(z, me, cfg.metric);
        if (u == 0 || d < d2v) {
            d2v = d;
            arg = u;
        }
    }
    pred.d2 = d2v;
    pred.theta2 = theta2(pred.theta1, cfg.lambda2, s1.d1);

    if (d2v > *pred.theta2) {
        const int new_label = static_cast<int>(registry.entries.size()) + 1;
        UnknownEntry e;
        e.label = new_label;
        e.members.push_back(z);
        e.sum = z;
        registry.entries.push_back(std::move(e));
        pred.known = false;
        pred.label = new_label;
        return pred;
    }

    pred.known = false;
    pred.label = registry.entries[arg].label;
    registry_update(registry, pred.label, z);
    return pred;
}

Prediction discriminate_frozen(const std::vector<double>& z, const ClassStats& stats,
                               const UnknownRegistry& registry, const DiscriminatorConfig& cfg) {
    cfg.validate();
    Prediction pred;
    Step1 s1 = step1(z, stats, cfg.metric);
    pred.d1 = s1.d1;
    pred.theta1 = theta1(cfg.lambda1, stats.dim);
    if (s1.d1 < pred.theta1) {
        pred.known = true;
        pred.label = static_cast<int>(s1.argmin);
        return pred;
    }
    pred.known = false;
    pred.label = 0;  // would open a new label; frozen mode reports "no existing unknown"
    if (registry.entries.empty()) return pred;
    double d2v = 0.0;
    std::size_t arg = 0;
    const std::size_t dim = registry.dim ? registry.dim : stats.dim;
    for (std::size_t u = 0; u < registry.entries.size(); ++u) {
        ClassStatsEntry me = frozen_unknown_metric(registry.entries[u], dim, cfg);
        double d = distance(z, me, cfg.metric);
        if (u == 0 || d < d2v) {
            d2v = d;
            arg = u;
        }
    }
    pred.d2 = d2v;
    pred.theta2 = theta2(pred.theta1, cfg.lambda2, s1.d1);
    if (d2v <= *pred.theta2) pred.label = registry.entries[arg].label;
    return pred;
}

std::string registry_to_json(const UnknownRegistry& registry) {
    nlohmann::json j;
    j["dim"] = registry.dim;
    j["labels"] = nlohmann::json::array();
    for (const auto& e : registry.entries) {
        nlohmann::json entry;
        entry["label"] = e.label;
        entry["member_count"] = e.members.size();
        entry["center"] = e.center();
        j["labels"].push_back(std::move(entry));
    }
    return j.dump(2);
}

}  // namespace sr2cnn
