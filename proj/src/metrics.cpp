#include "sr2cnn/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

namespace sr2cnn {

OutcomeCounts tally(const std::vector<Prediction>& predictions,
                    const std::vector<TruthLabel>& truth, std::size_t num_known,
                    std::size_t num_unknown) {
    if (predictions.size() != truth.size())
        throw Error(ErrorCode::invalid_argument, "prediction/truth count mismatch");
    OutcomeCounts c;
    c.known_total.assign(num_known, 0);
    c.known_correct.assign(num_known, 0);
    c.unknown_total.assign(num_unknown, 0);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const Prediction& p = predictions[i];
        const TruthLabel& t = truth[i];
        if (t.known) {
            if (t.idx >= num_known)
                throw Error(ErrorCode::invalid_argument, "unlabeled sample: bad known index");
            c.known_total[t.idx]++;
            if (p.known) {
                c.tk++;
                if (p.label >= 0 && static_cast<std::size_t>(p.label) == t.idx) {
                    c.s_correct++;
                    c.known_correct[t.idx]++;
                }
            } else {
                c.fu++;
            }
        } else {
            if (t.idx >= num_unknown)
                throw Error(ErrorCode::invalid_argument, "unlabeled sample: bad unknown index");
            c.unknown_total[t.idx]++;
            if (p.known) {
                c.fk++;
            } else {
                c.tu++;
                auto it = c.contingency.find(p.label);
                if (it == c.contingency.end())
                    it = c.contingency.emplace(p.label, std::vector<std::size_t>(num_unknown, 0))
                             .first;
                it->second[t.idx]++;
            }
        }
    }
    return c;
}

PrecisionScores precision_scores(const OutcomeCounts& counts) {
    PrecisionScores s;
    const std::size_t known_pred = counts.tk + counts.fk;
    if (known_pred > 0) s.kp = static_cast<double>(counts.s_correct) / known_pred;

    std::size_t u_dom = 0;
    for (std::size_t j = 0; j < counts.unknown_total.size(); ++j) {
        std::size_t best = 0;
        for (const auto& [label, per_class] : counts.contingency)
            best = std::max(best, per_class[j]);
        u_dom += best;  // isotopic rule: only the dominant discovered label counts
    }
    s.u_dominantly_correct = u_dom;
    const std::size_t unknown_pred = counts.tu + counts.fu;
    if (unknown_pred > 0) s.up = static_cast<double>(u_dom) / unknown_pred;
    return s;
}

std::optional<double> f1(std::optional<double> accuracy, std::optional<double> precision) {
    if (!accuracy || !precision) return std::nullopt;
    const double a = *accuracy, p = *precision;
    if (a < 0 || a > 1 || p < 0 || p > 1)
        throw Error(ErrorCode::invalid_argument, "f1 inputs must be rates in [0, 1]");
    if (a + p == 0.0) return std::nullopt;
    return 2.0 * a * p / (a + p);
}

double wtr(double tkr, double tur) {
    if (tkr < 0 || tkr > 1 || tur < 0 || tur > 1)
        throw Error(ErrorCode::invalid_argument, "wtr inputs must be rates in [0, 1]");
    return 0.4 * tkr + 0.6 * tur;
}

IntervalResult discrimination_interval(const std::vector<std::pair<double, double>>& sweep) {
    if (sweep.empty()) throw Error(ErrorCode::invalid_argument, "empty sweep");
    for (std::size_t i = 1; i < sweep.size(); ++i)
        if (sweep[i].first < sweep[i - 1].first)
            throw Error(ErrorCode::invalid_argument, "sweep must be sorted by lambda1");
    IntervalResult out;
    std::size_t i = 0;
    while (i < sweep.size()) {
        if (sweep[i].second > 0.8) {
            std::size_t j = i;
            while (j + 1 < sweep.size() && sweep[j + 1].second > 0.8) ++j;
            out.intervals.emplace_back(sweep[i].first, sweep[j].first);
            out.total_width += sweep[j].first - sweep[i].first;
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

ZslReport build_report(const OutcomeCounts& c, double lambda1, double lambda2,
                       MetricKind metric) {
    ZslReport r;
    r.lambda1 = lambda1;
    r.lambda2 = lambda2;
    r.metric = metric_name(metric);
    r.num_known = c.known_total.size();
    r.num_unknown = c.unknown_total.size();
    r.tk = c.tk;
    r.tu = c.tu;
    r.fk = c.fk;
    r.fu = c.fu;

    if (c.tk + c.fu > 0) r.tkr = static_cast<double>(c.tk) / (c.tk + c.fu);
    if (c.tu + c.fk > 0) r.tur = static_cast<double>(c.tu) / (c.tu + c.fk);
    if (r.tkr && r.tur) r.wtr = wtr(*r.tkr, *r.tur);

    PrecisionScores ps = precision_scores(c);
    r.kp = ps.kp;
    r.up = ps.up;

    double known_sum = 0.0;
    std::size_t known_present = 0;
    r.known_class_acc.assign(r.num_known, -1.0);
    for (std::size_t k = 0; k < r.num_known; ++k) {
        if (c.known_total[k] == 0) continue;
        r.known_class_acc[k] = static_cast<double>(c.known_correct[k]) / c.known_total[k];
        known_sum += r.known_class_acc[k];
        known_present++;
    }
    if (known_present) r.macro_known_acc = known_sum / known_present;

    double unk_sum = 0.0;
    std::size_t unk_present = 0;
    r.unknown_class_acc.assign(r.num_unknown, -1.0);
    for (std::size_t j = 0; j < r.num_unknown; ++j) {
        if (c.unknown_total[j] == 0) continue;
        std::size_t best = 0;
        for (const auto& [label, per_class] : c.contingency) best = std::max(best, per_class[j]);
        r.unknown_class_acc[j] = static_cast<double>(best) / c.unknown_total[j];
        unk_sum += r.unknown_class_acc[j];
        unk_present++;
    }
    if (unk_present) r.macro_unknown_acc = unk_sum / unk_present;

    r.f1_known = f1(r.macro_known_acc, r.kp);
    r.f1_unknown = f1(r.macro_unknown_acc, r.up);

    // attribute each discovered label to its majority true class
    r.isotopic_census.assign(r.num_unknown, 0);
    r.discovered_labels = c.contingency.size();
    for (const auto& [label, per_class] : c.contingency) {
        std::size_t arg = 0;
        for (std::size_t j = 1; j < per_class.size(); ++j)
            if (per_class[j] > per_class[arg]) arg = j;
        if (!per_class.empty() && per_class[arg] > 0) r.isotopic_census[arg]++;
    }
    return r;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

std::optional<double> opt_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

std::string opt_csv(const std::optional<double>& v) {
    if (!v) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    return buf;
}

}  // namespace

std::string ZslReport::to_json() const {
    nlohmann::json j;
    j["lambda1"] = lambda1;
    j["lambda2"] = lambda2;
    j["metric"] = metric;
    j["num_known"] = num_known;
    j["num_unknown"] = num_unknown;
    j["tk"] = tk;
    j["tu"] = tu;
    j["fk"] = fk;
    j["fu"] = fu;
    j["tkr"] = opt_json(tkr);
    j["tur"] = opt_json(tur);
    j["wtr"] = opt_json(wtr);
    j["kp"] = opt_json(kp);
    j["up"] = opt_json(up);
    j["macro_known_acc"] = opt_json(macro_known_acc);
    j["macro_unknown_acc"] = opt_json(macro_unknown_acc);
    j["f1_known"] = opt_json(f1_known);
    j["f1_unknown"] = opt_json(f1_unknown);
    j["known_class_acc"] = known_class_acc;
    j["unknown_class_acc"] = unknown_class_acc;
    j["isotopic_census"] = isotopic_census;
    j["discovered_labels"] = discovered_labels;
    return j.dump(2);
}

ZslReport ZslReport::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::data_format, "bad report JSON");
    ZslReport r;
    r.lambda1 = j.at("lambda1").get<double>();
    r.lambda2 = j.at("lambda2").get<double>();
    r.metric = j.at("metric").get<std::string>();
    r.num_known = j.at("num_known").get<std::size_t>();
    r.num_unknown = j.at("num_unknown").get<std::size_t>();
    r.tk = j.at("tk").get<std::size_t>();
    r.tu = j.at("tu").get<std::size_t>();
    r.fk = j.at("fk").get<std::size_t>();
    r.fu = j.at("fu").get<std::size_t>();
    r.tkr = opt_from(j.at("tkr"));
    r.tur = opt_from(j.at("tur"));
    r.wtr = opt_from(j.at("wtr"));
    r.kp = opt_from(j.at("kp"));
    r.up = opt_from(j.at("up"));
    r.macro_known_acc = opt_from(j.at("macro_known_acc"));
    r.macro_unknown_acc = opt_from(j.at("macro_unknown_acc"));
    r.f1_known = opt_from(j.at("f1_known"));
    r.f1_unknown = opt_from(j.at("f1_unknown"));
    r.known_class_acc = j.at("known_class_acc").get<std::vector<double>>();
    r.unknown_class_acc = j.at("unknown_class_acc").get<std::vector<double>>();
    r.isotopic_census = j.at("isotopic_census").get<std::vector<std::size_t>>();
    r.discovered_labels = j.at("discovered_labels").get<std::size_t>();
    return r;
}

std::string ZslReport::csv_header() {
    return "lambda1,lambda2,metric,tk,tu,fk,fu,tkr,tur,wtr,kp,up,macro_known_acc,"
           "macro_unknown_acc,f1_known,f1_unknown,discovered_labels";
}

std::string ZslReport::csv_row() const {
    char head[128];
    std::snprintf(head, sizeof(head), "%.17g,%.17g,", lambda1, lambda2);
    std::string row = std::string(head) + metric;
    row += "," + std::to_string(tk) + "," + std::to_string(tu) + "," + std::to_string(fk) + "," +
           std::to_string(fu);
    for (const auto& v : {tkr, tur, wtr, kp, up, macro_known_acc, macro_unknown_acc, f1_known,
                          f1_unknown})
        row += "," + opt_csv(v);
    row += "," + std::to_string(discovered_labels);
    return row;
}

}  // namespace sr2cnn
