#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sr2cnn/metrics.hpp"

using namespace sr2cnn;

namespace {

Prediction known_pred(int label) {
    Prediction p;
    p.known = true;
    p.label = label;
    return p;
}

Prediction unknown_pred(int label) {
    Prediction p;
    p.known = false;
    p.label = label;
    return p;
}

}  // namespace

TEST_CASE("tally: exact counts and the contingency table") {
    SUBCASE("all predictions correct leaves FK = FU = 0") {
        std::vector<Prediction> preds = {known_pred(0), known_pred(1), unknown_pred(1),
                                         unknown_pred(1)};
        std::vector<TruthLabel> truth = {{true, 0}, {true, 1}, {false, 0}, {false, 0}};
        OutcomeCounts c = tally(preds, truth, 2, 1);
        CHECK(c.tk == 2);
        CHECK(c.tu == 2);
        CHECK(c.fk == 0);
        CHECK(c.fu == 0);
        CHECK(c.s_correct == 2);
        CHECK(c.contingency.at(1)[0] == 2);
    }
    SUBCASE("all known samples predicted unknown zeroes TKR") {
        std::vector<Prediction> preds = {unknown_pred(1), unknown_pred(1), unknown_pred(2)};
        std::vector<TruthLabel> truth = {{true, 0}, {true, 0}, {true, 1}};
        OutcomeCounts c = tally(preds, truth, 2, 1);
        CHECK(c.tk == 0);
        CHECK(c.fu == 3);
        ZslReport r = build_report(c, 0.4, 1.0, MetricKind::mahalanobis);
        CHECK(*r.tkr == 0.0);
    }
    SUBCASE("paper-anchored rates reproduce from raw counts") {
        std::vector<Prediction> preds;
        std::vector<TruthLabel> truth;
        for (int i = 0; i < 959; ++i) {
            preds.push_back(known_pred(0));
            truth.push_back({true, 0});
        }
        for (int i = 0; i < 41; ++i) {
            preds.push_back(unknown_pred(1));
            truth.push_back({true, 0});
        }
        for (int i = 0; i < 995; ++i) {
            preds.push_back(unknown_pred(2));
            truth.push_back({false, 0});
        }
        for (int i = 0; i < 5; ++i) {
            preds.push_back(known_pred(0));
            truth.push_back({false, 0});
        }
        OutcomeCounts c = tally(preds, truth, 1, 1);
        ZslReport r = build_report(c, 0.4, 1.0, MetricKind::mahalanobis);
        CHECK(*r.tkr == doctest::Approx(0.959).epsilon(1e-12));
        CHECK(*r.tur == doctest::Approx(0.995).epsilon(1e-12));
        CHECK(*r.wtr == doctest::Approx(0.9806).epsilon(1e-12));
    }
    SUBCASE("invariants: TKR + FU/known = 1 and TUR + FK/unknown = 1") {
        std::vector<Prediction> preds = {known_pred(0), unknown_pred(1), known_pred(1),
                                         unknown_pred(1), known_pred(0)};
        std::vector<TruthLabel> truth = {{true, 0}, {true, 1}, {false, 0}, {false, 0}, {false, 0}};
        OutcomeCounts c = tally(preds, truth, 2, 1);
        double known_n = c.tk + c.fu, unknown_n = c.tu + c.fk;
        CHECK(c.tk / known_n + c.fu / known_n == doctest::Approx(1.0));
        CHECK(c.tu / unknown_n + c.fk / unknown_n == doctest::Approx(1.0));
    }
    SUBCASE("unlabeled sample rejected") {
        std::vector<Prediction> preds = {known_pred(0)};
        std::vector<TruthLabel> truth = {{true, 7}};
        CHECK_THROWS_AS(tally(preds, truth, 2, 1), Error);
    }
}

TEST_CASE("precision scores: KP formula and the isotopic rule") {
    SUBCASE("perfect run has KP = UP = 1") {
        std::vector<Prediction> preds = {known_pred(0), unknown_pred(1)};
        std::vector<TruthLabel> truth = {{true, 0}, {false, 0}};
        PrecisionScores s = precision_scores(tally(preds, truth, 1, 1));
        CHECK(*s.kp == 1.0);
        CHECK(*s.up == 1.0);
    }
    SUBCASE("a 60/40 isotopic split counts only the dominant label") {
        std::vector<Prediction> preds;
        std::vector<TruthLabel> truth;
        for (int i = 0; i < 60; ++i) {
            preds.push_back(unknown_pred(1));
            truth.push_back({false, 0});
        }
        for (int i = 0; i < 40; ++i) {
            preds.push_back(unknown_pred(2));
            truth.push_back({false, 0});
        }
        OutcomeCounts c = tally(preds, truth, 1, 1);
        PrecisionScores s = precision_scores(c);
        CHECK(s.u_dominantly_correct == 60);
        CHECK(*s.up == doctest::Approx(0.60));
        ZslReport r = build_report(c, 0.4, 1.0, MetricKind::mahalanobis);
        CHECK(r.isotopic_census[0] == 2);
        CHECK(r.discovered_labels == 2);
    }
    SUBCASE("KP = 76.8% from constructed counts") {
        std::vector<Prediction> preds;
        std::vector<TruthLabel> truth;
        for (int i = 0; i < 768; ++i) {
            preds.push_back(known_pred(0));
            truth.push_back({true, 0});
        }
        for (int i = 0; i < 182; ++i) {
            preds.push_back(known_pred(1));  // wrong known class
            truth.push_back({true, 0});
        }
        for (int i = 0; i < 50; ++i) {
            preds.push_back(known_pred(0));  // false known
            truth.push_back({false, 0});
        }
        PrecisionScores s = precision_scores(tally(preds, truth, 2, 1));
        CHECK(*s.kp == doctest::Approx(0.768).epsilon(1e-12));
    }
    SUBCASE("zero denominators stay undefined") {
        std::vector<Prediction> preds = {unknown_pred(1)};
        std::vector<TruthLabel> truth = {{false, 0}};
        PrecisionScores s = precision_scores(tally(preds, truth, 1, 1));
        CHECK_FALSE(s.kp.has_value());
        CHECK(s.up.has_value());
    }
}

TEST_CASE("f1 follows the stated formula") {
    CHECK(*f1(0.5, 0.5) == doctest::Approx(0.5));
    CHECK(*f1(0.737, 0.768) == doctest::Approx(0.75218).epsilon(1e-4));
    CHECK(*f1(0.737, 0.768) >= 0.7515);
    CHECK(*f1(0.737, 0.768) <= 0.7530);
    CHECK(*f1(0.0, 0.9) == 0.0);
    CHECK_FALSE(f1(0.0, 0.0).has_value());
    CHECK_FALSE(f1(std::nullopt, 0.5).has_value());
    CHECK_THROWS_AS(f1(1.5, 0.5), Error);
}

TEST_CASE("wtr is the 0.4/0.6 weighted combination") {
    CHECK(wtr(1.0, 1.0) == 1.0);
    CHECK(wtr(1.0, 0.0) == doctest::Approx(0.4));
    // exact to the last representable bit: 0.4*0.959 + 0.6*0.995 and the
    // literal 0.9806 differ by at most one double ulp
    double v = wtr(0.959, 0.995);
    CHECK(std::abs(v - 0.9806) <= std::nextafter(0.9806, 1.0) - 0.9806);
    CHECK_THROWS_AS(wtr(-0.1, 0.5), Error);
}

TEST_CASE("discrimination interval over piecewise-constant sweeps") {
    SUBCASE("all above 0.8 spans the whole grid") {
        std::vector<std::pair<double, double>> sweep;
        for (double l = 0.05; l <= 1.0 + 1e-9; l += 0.05) sweep.emplace_back(l, 0.9);
        IntervalResult r = discrimination_interval(sweep);
        REQUIRE(r.intervals.size() == 1);
        CHECK(r.total_width == doctest::Approx(0.95));
    }
    SUBCASE("all below 0.8 yields an empty interval") {
        std::vector<std::pair<double, double>> sweep = {{0.1, 0.5}, {0.2, 0.5}, {0.3, 0.5}};
        IntervalResult r = discrimination_interval(sweep);
        CHECK(r.intervals.empty());
        CHECK(r.total_width == 0.0);
    }
    SUBCASE("unimodal sweep crossing at 0.2 and 0.6 has width 0.4") {
        std::vector<std::pair<double, double>> sweep;
        for (double l = 0.05; l <= 1.0 + 1e-9; l += 0.05) {
            double w = (l >= 0.2 - 1e-12 && l <= 0.6 + 1e-12) ? 0.85 : 0.7;
            sweep.emplace_back(l, w);
        }
        IntervalResult r = discrimination_interval(sweep);
        REQUIRE(r.intervals.size() == 1);
        CHECK(r.intervals[0].first == doctest::Approx(0.2));
        CHECK(r.intervals[0].second == doctest::Approx(0.6));
        CHECK(r.total_width == doctest::Approx(0.4));
    }
    SUBCASE("empty sweep rejected") {
        CHECK_THROWS_AS(discrimination_interval({}), Error);
    }
    SUBCASE("unsorted sweep rejected") {
        CHECK_THROWS_AS(discrimination_interval({{0.5, 0.9}, {0.1, 0.9}}), Error);
    }
}

TEST_CASE("reports serialize losslessly and render CSV rows") {
    std::vector<Prediction> preds = {known_pred(0), known_pred(1), unknown_pred(1),
                                     unknown_pred(2), unknown_pred(1)};
    std::vector<TruthLabel> truth = {{true, 0}, {true, 0}, {false, 0}, {false, 1}, {false, 1}};
    ZslReport r = build_report(tally(preds, truth, 2, 2), 0.35, 1.0, MetricKind::diagonal);

    std::string j1 = r.to_json();
    ZslReport back = ZslReport::from_json(j1);
    CHECK(back.to_json() == j1);
    CHECK(back.metric == "diagonal");
    CHECK(back.lambda1 == r.lambda1);
    CHECK(back.tk == r.tk);
    CHECK(back.isotopic_census == r.isotopic_census);

    std::string header = ZslReport::csv_header();
    std::string row = r.csv_row();
    CHECK(std::count(header.begin(), header.end(), ',') ==
          std::count(row.begin(), row.end(), ','));
    CHECK(row.find("diagonal") != std::string::npos);

    SUBCASE("undefined rates render as NA, not zero") {
        std::vector<Prediction> ponly = {unknown_pred(1)};
        std::vector<TruthLabel> tonly = {{false, 0}};
        ZslReport r2 = build_report(tally(ponly, tonly, 1, 1), 0.1, 1.0, MetricKind::euclidean);
        CHECK_FALSE(r2.tkr.has_value());
        CHECK(r2.csv_row().find("NA") != std::string::npos);
        ZslReport rt = ZslReport::from_json(r2.to_json());
        CHECK_FALSE(rt.tkr.has_value());
    }
}
