#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sr2cnn/discriminator.hpp"

namespace sr2cnn {

/// Ground truth for one test sample: either a known-class index or a true
/// unknown-class index (both zero-based within their own sets).
struct TruthLabel {
    bool known = false;
    std::size_t idx = 0;
};

struct OutcomeCounts {
    std::size_t tk = 0, tu = 0, fk = 0, fu = 0;
    std::size_t s_correct = 0;                    // known samples hitting their exact class
    std::vector<std::size_t> known_total, known_correct;
    std::vector<std::size_t> unknown_total;
    // discovered unknown label -> per-true-unknown-class counts
    std::map<int, std::vector<std::size_t>> contingency;
};

OutcomeCounts tally(const std::vector<Prediction>& predictions,
                    const std::vector<TruthLabel>& truth, std::size_t num_known,
                    std::size_t num_unknown);

struct PrecisionScores {
    std::optional<double> kp, up;
    std::size_t u_dominantly_correct = 0;
};

/// KP = s_correct / (TK + FK); UP counts, per true unknown class, only the
/// dominant discovered label (isotopic-class rule). 0/0 stays undefined.
PrecisionScores precision_scores(const OutcomeCounts& counts);

/// 2*a*p/(a+p); undefined when both are zero or either input is undefined.
std::optional<double> f1(std::optional<double> accuracy, std::optional<double> precision);

/// weighted true rate 0.4*TKR + 0.6*TUR
double wtr(double tkr, double tur);

struct IntervalResult {
    std::vector<std::pair<double, double>> intervals;  // contiguous lambda1 ranges
    double total_width = 0.0;
};

/// Maximal contiguous lambda1 sub-ranges with WTR > 0.8 in a sweep sorted by
/// lambda1 (piecewise-constant between grid points).
IntervalResult discrimination_interval(const std::vector<std::pair<double, double>>& sweep);

struct ZslReport {
    double lambda1 = 0.0, lambda2 = 1.0;
    std::string metric;
    std::size_t num_known = 0, num_unknown = 0;
    std::size_t tk = 0, tu = 0, fk = 0, fu = 0;
    std::optional<double> tkr, tur, wtr;
    std::optional<double> kp, up;
    std::optional<double> macro_known_acc, macro_unknown_acc;
    std::optional<double> f1_known, f1_unknown;
    std::vector<double> known_class_acc;        // -1 marks classes with no samples
    std::vector<double> unknown_class_acc;      // dominant-label accuracy per true class
    std::vector<std::size_t> isotopic_census;   // discovered labels attributed per true class
    std::size_t discovered_labels = 0;

    std::string to_json() const;
    static ZslReport from_json(const std::string& text);
    static std::string csv_header();
    std::string csv_row() const;
};

/// Builds the full report from tallied outcomes.
ZslReport build_report(const OutcomeCounts& counts, double lambda1, double lambda2,
                       MetricKind metric);

}  // namespace sr2cnn
