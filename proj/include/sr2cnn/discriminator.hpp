#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sr2cnn/tensor.hpp"

namespace sr2cnn {

enum class MetricKind : std::uint8_t {
    mahalanobis,      // A = class covariance
    euclidean,        // A = identity
    diagonal,         // A = diag(covariance), the "second distance"
    scaled_identity,  // A = (trace(cov)/t) * identity, the "third distance"
};

const char* metric_name(MetricKind m);
MetricKind metric_from_name(const std::string& name);

/// Per-class semantic statistics. Covariance is stored after shrinkage
/// (cov + eps * (trace/t) * I) together with its Cholesky factor; classes
/// without a usable covariance fall back to the identity metric.
struct ClassStatsEntry {
    std::vector<double> mean;
    std::size_t count = 0;
    bool identity_cov = true;
    std::vector<double> cov;   // t*t row-major, shrunk (empty when identity)
    std::vector<double> chol;  // lower-triangular factor of cov
    std::vector<double> diag;  // diagonal of shrunk covariance
    double sigma2 = 1.0;       // trace(cov)/t
};

struct ClassStats {
    std::size_t dim = 0;
    double shrinkage = 1e-3;
    std::vector<ClassStatsEntry> classes;
};

/// Means, covariances and derived metrics from per-class feature lists.
/// Singleton or degenerate classes get the identity metric.
ClassStats fit_statistics(const std::vector<std::vector<std::vector<double>>>& features_per_class,
                          double shrinkage = 1e-3);

/// Builds one entry (mean/covariance/metric) from a feature list.
ClassStatsEntry fit_entry(const std::vector<std::vector<double>>& features, std::size_t dim,
                          double shrinkage);

/// Generalized distance sqrt((z-S)^T A^{-1} (z-S)) under the chosen metric.
double distance(const std::vector<double>& z, const ClassStatsEntry& entry, MetricKind metric);

double theta1(double lambda1, std::size_t t);
double theta2(double theta1, double lambda2, double d1);

struct DiscriminatorConfig {
    double lambda1 = 0.4;
    double lambda2 = 1.0;
    MetricKind metric = MetricKind::mahalanobis;
    bool update_known = false;      // literal pseudocode mode: refresh known centers too
    bool fit_unknown_cov = false;   // fit unknown-class covariances once large enough
    double shrinkage = 1e-3;

    void validate() const {
        if (!(lambda1 > 0)) throw Error(ErrorCode::invalid_argument, "lambda1 must be > 0");
        if (lambda2 < 0) throw Error(ErrorCode::invalid_argument, "lambda2 must be >= 0");
    }
};

/// One discovered unknown class: label, member features, running sum for
/// the exact-mean center, and an optional fitted metric.
struct UnknownEntry {
    int label = 0;
    std::vector<std::vector<double>> members;
    std::vector<double> sum;
    ClassStatsEntry metric_entry;  // identity until fit_unknown_cov kicks in
    bool metric_dirty = true;

    std::vector<double> center() const {
        std::vector<double> c(sum.size());
        for (std::size_t i = 0; i < c.size(); ++i)
            c[i] = sum[i] / static_cast<double>(members.size());
        return c;
    }
};

struct UnknownRegistry {
    std::size_t dim = 0;
    std::vector<UnknownEntry> entries;  // labels 1..n in discovery order

    std::size_t size() const { return entries.size(); }
    UnknownEntry* find(int label);
    const UnknownEntry* find(int label) const;
};

struct Prediction {
    bool known = false;
    int label = 0;  // known-class index, or unknown label (1-based)
    double d1 = 0.0;
    double theta1 = 0.0;
    std::optional<double> d2;
    std::optional<double> theta2;
};

/// Adds z to an existing unknown label and refreshes its center as the exact
/// arithmetic mean of the member set.
void registry_update(UnknownRegistry& registry, int label, const std::vector<double>& z);

/// Metric matrix A for an unknown label: identity while the member set is
/// smaller than dim+1 or degenerate, otherwise the metric-appropriate matrix
/// from the member sample covariance with shrinkage. Returned dense t x t.
std::vector<double> unknown_metric_matrix(const UnknownRegistry& registry, int label,
                                          MetricKind metric, double shrinkage = 1e-3);

/// The two-step known/unknown discriminator. Mutates the registry on
/// unknown predictions (and known stats when update_known is set).
Prediction discriminate(const std::vector<double>& z, ClassStats& stats,
                        UnknownRegistry& registry, const DiscriminatorConfig& cfg);

/// Frozen-registry variant: same decision rule, no state updates.
Prediction discriminate_frozen(const std::vector<double>& z, const ClassStats& stats,
                               const UnknownRegistry& registry, const DiscriminatorConfig& cfg);

/// Audit snapshot (labels, member counts, centers) as JSON text.
std::string registry_to_json(const UnknownRegistry& registry);

}  // namespace sr2cnn
