#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sr2cnn/discriminator.hpp"
#include "sr2cnn/metrics.hpp"
#include "sr2cnn/rng.hpp"

using namespace sr2cnn;

namespace {

using Vec = std::vector<double>;

ClassStatsEntry identity_entry(Vec mean) {
    ClassStatsEntry e;
    e.mean = std::move(mean);
    e.count = 1;
    e.identity_cov = true;
    e.diag.assign(e.mean.size(), 1.0);
    e.sigma2 = 1.0;
    return e;
}

ClassStats two_known_classes() {
    ClassStats stats;
    stats.dim = 2;
    stats.classes.push_back(identity_entry({0.0, 0.0}));
    stats.classes.push_back(identity_entry({10.0, 0.0}));
    return stats;
}

}  // namespace

TEST_CASE("fit_statistics: means, singletons, sigma^2") {
    SUBCASE("mean of (0,0) and (2,2) is (1,1)") {
        ClassStats stats = fit_statistics({{{0.0, 0.0}, {2.0, 2.0}}});
        CHECK(stats.classes[0].mean == Vec{1.0, 1.0});
        CHECK(stats.classes[0].count == 2);
    }
    SUBCASE("singleton class gets the identity metric") {
        ClassStats stats = fit_statistics({{{3.0, 4.0}}});
        CHECK(stats.classes[0].identity_cov);
        CHECK(distance({3.0, 4.0}, stats.classes[0], MetricKind::mahalanobis) == 0.0);
        CHECK(distance({0.0, 0.0}, stats.classes[0], MetricKind::mahalanobis) ==
              doctest::Approx(5.0));
    }
    SUBCASE("sigma^2 = trace/t: diag(2,4) gives 3 with shrinkage disabled") {
        // features along the axes with variances 2 and 4
        std::vector<Vec> feats;
        Rng rng(5);
        for (int i = 0; i < 4000; ++i)
            feats.push_back({std::sqrt(2.0) * rng.gaussian(), 2.0 * rng.gaussian()});
        ClassStats stats = fit_statistics({feats}, 0.0);
        CHECK(stats.classes[0].sigma2 == doctest::Approx(3.0).epsilon(0.1));
        // exact arithmetic check on a hand-made 2-sample set: cov = diag(2, 8)
        ClassStats tiny = fit_statistics({{{1.0, 2.0}, {3.0, 6.0}}}, 0.0);
        CHECK(tiny.classes[0].sigma2 == doctest::Approx((2.0 + 8.0) / 2.0));
    }
    SUBCASE("empty class rejected") {
        CHECK_THROWS_AS(fit_statistics({{}}), Error);
    }
    SUBCASE("degenerate identical members keep the identity metric") {
        ClassStats stats = fit_statistics({{{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}}});
        CHECK(stats.classes[0].identity_cov);
    }
}

TEST_CASE("distance: metric examples") {
    ClassStatsEntry e = identity_entry({0.0, 0.0});
    SUBCASE("euclidean (3,4) -> 5") {
        CHECK(distance({3.0, 4.0}, e, MetricKind::euclidean) == doctest::Approx(5.0));
    }
    SUBCASE("diagonal with variance 4 per axis halves components") {
        ClassStatsEntry d = e;
        d.identity_cov = false;
        d.diag = {4.0, 4.0};
        d.sigma2 = 4.0;
        d.cov = {4.0, 0.0, 0.0, 4.0};
        d.chol = {2.0, 0.0, 0.0, 2.0};
        CHECK(distance({3.0, 4.0}, d, MetricKind::diagonal) == doctest::Approx(2.5));
        CHECK(distance({3.0, 4.0}, d, MetricKind::scaled_identity) == doctest::Approx(2.5));
        CHECK(distance({3.0, 4.0}, d, MetricKind::mahalanobis) == doctest::Approx(2.5));
    }
    SUBCASE("zero at the center for every metric") {
        for (MetricKind m : {MetricKind::mahalanobis, MetricKind::euclidean, MetricKind::diagonal,
                             MetricKind::scaled_identity})
            CHECK(distance({0.0, 0.0}, e, m) == 0.0);
    }
    SUBCASE("scaled_identity equals euclidean / sigma on random data") {
        Rng rng(7);
        std::vector<Vec> feats;
        for (int i = 0; i < 500; ++i) feats.push_back({rng.gaussian() * 2, rng.gaussian() * 3});
        ClassStats stats = fit_statistics({feats});
        for (int i = 0; i < 20; ++i) {
            Vec z{rng.gaussian() * 5, rng.gaussian() * 5};
            double lhs = distance(z, stats.classes[0], MetricKind::scaled_identity);
            double rhs = distance(z, stats.classes[0], MetricKind::euclidean) /
                         std::sqrt(stats.classes[0].sigma2);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
    }
    SUBCASE("mahalanobis whitens an anisotropic cloud") {
        Rng rng(9);
        std::vector<Vec> feats;
        for (int i = 0; i < 2000; ++i) feats.push_back({rng.gaussian() * 10, rng.gaussian() * 0.1});
        // shrinkage off: the ridge is relative to the mean eigenvalue and
        // would swamp the small-variance axis of this extreme cloud
        ClassStats stats = fit_statistics({feats}, 0.0);
        double along = distance({10.0, 0.0}, stats.classes[0], MetricKind::mahalanobis);
        double across = distance({0.0, 0.1}, stats.classes[0], MetricKind::mahalanobis);
        CHECK(along == doctest::Approx(1.0).epsilon(0.1));
        CHECK(across == doctest::Approx(1.0).epsilon(0.1));
    }
}

TEST_CASE("theta formulas") {
    CHECK(theta1(0.4, 64) == doctest::Approx(9.6));
    CHECK(theta1(1.0, 64) == doctest::Approx(24.0));
    CHECK(theta2(9.6, 1.0, 4.0) == doctest::Approx((9.6 + 4.0) / 2.0));
    CHECK(theta2(9.6, 0.0, 123.0) == doctest::Approx(9.6));
    CHECK_THROWS_AS(theta1(0.0, 64), Error);
    CHECK_THROWS_AS(theta2(9.6, -1.0, 1.0), Error);
}

TEST_CASE("discriminate follows the two-step branch structure") {
    ClassStats stats = two_known_classes();
    DiscriminatorConfig cfg;
    cfg.lambda1 = 1.0;  // theta1 = 3*sqrt(2) ~ 4.24
    cfg.metric = MetricKind::euclidean;
    UnknownRegistry reg;
    reg.dim = 2;

    SUBCASE("sample at a known center is accepted with d1 = 0") {
        Prediction p = discriminate({0.0, 0.0}, stats, reg, cfg);
        CHECK(p.known);
        CHECK(p.label == 0);
        CHECK(p.d1 == 0.0);
        CHECK(reg.size() == 0);
    }
    SUBCASE("far sample with empty registry opens R_1 centered on it") {
        Vec z{5.0, 5.0};
        Prediction p = discriminate(z, stats, reg, cfg);
        CHECK_FALSE(p.known);
        CHECK(p.label == 1);
        REQUIRE(reg.size() == 1);
        CHECK(reg.entries[0].members.size() == 1);
        CHECK(reg.entries[0].center() == z);

        SUBCASE("close second sample joins R_1 and the center becomes the mean") {
            Vec z2{5.0, 6.0};
            Prediction p2 = discriminate(z2, stats, reg, cfg);
            CHECK_FALSE(p2.known);
            CHECK(p2.label == 1);
            REQUIRE(reg.entries[0].members.size() == 2);
            CHECK(reg.entries[0].center() == Vec{5.0, 5.5});
            CHECK(p2.d2.has_value());
            CHECK(*p2.d2 <= *p2.theta2);
        }
        SUBCASE("far third sample opens R_2") {
            Vec z3{-40.0, -40.0};
            Prediction p3 = discriminate(z3, stats, reg, cfg);
            CHECK_FALSE(p3.known);
            CHECK(p3.label == 2);
            CHECK(reg.size() == 2);
            CHECK(*p3.d2 > *p3.theta2);
        }
    }
    SUBCASE("threshold dichotomy: known iff d1 < theta1") {
        Rng rng(11);
        for (int i = 0; i < 200; ++i) {
            Vec z{rng.uniform(-30, 30), rng.uniform(-30, 30)};
            Prediction p = discriminate(z, stats, reg, cfg);
            CHECK(p.known == (p.d1 < p.theta1));
        }
    }
}

TEST_CASE("update_known refreshes known centers only when enabled") {
    ClassStats stats = two_known_classes();
    DiscriminatorConfig cfg;
    cfg.lambda1 = 1.0;
    cfg.metric = MetricKind::euclidean;
    UnknownRegistry reg;
    reg.dim = 2;

    Vec z{1.0, 1.0};
    discriminate(z, stats, reg, cfg);
    CHECK(stats.classes[0].mean == Vec{0.0, 0.0});

    cfg.update_known = true;
    discriminate(z, stats, reg, cfg);
    CHECK(stats.classes[0].mean == Vec{0.5, 0.5});  // running mean over count 1 -> 2
    CHECK(stats.classes[0].count == 2);
}

TEST_CASE("registry_update keeps exact means") {
    UnknownRegistry reg;
    reg.dim = 2;
    UnknownEntry e;
    e.label = 1;
    e.members.push_back({0.0, 0.0});
    e.sum = {0.0, 0.0};
    reg.entries.push_back(e);

    registry_update(reg, 1, {2.0, 2.0});
    CHECK(reg.entries[0].center() == Vec{1.0, 1.0});

    SUBCASE("adding the current center leaves it unchanged") {
        Vec c = reg.entries[0].center();
        registry_update(reg, 1, c);
        CHECK(reg.entries[0].center() == c);
    }
    SUBCASE("random additions match the brute-force mean to 1e-12") {
        Rng rng(13);
        for (int i = 0; i < 500; ++i)
            registry_update(reg, 1, {rng.uniform(-5, 5), rng.uniform(-5, 5)});
        Vec brute(2, 0.0);
        for (const auto& m : reg.entries[0].members)
            for (std::size_t j = 0; j < 2; ++j) brute[j] += m[j];
        for (auto& v : brute) v /= reg.entries[0].members.size();
        Vec center = reg.entries[0].center();
        CHECK(std::abs(center[0] - brute[0]) <= 1e-12);
        CHECK(std::abs(center[1] - brute[1]) <= 1e-12);
    }
    SUBCASE("unknown label rejected") {
        CHECK_THROWS_AS(registry_update(reg, 9, {0.0, 0.0}), Error);
    }
}

TEST_CASE("unknown_metric_matrix honors the footnote rule") {
    UnknownRegistry reg;
    reg.dim = 2;
    UnknownEntry e;
    e.label = 1;
    e.members.push_back({1.0, 1.0});
    e.sum = {1.0, 1.0};
    reg.entries.push_back(e);

    SUBCASE("singleton member set gives the identity") {
        std::vector<double> a = unknown_metric_matrix(reg, 1, MetricKind::mahalanobis);
        CHECK(a == std::vector<double>{1.0, 0.0, 0.0, 1.0});
    }
    SUBCASE("identical members still give the identity") {
        registry_update(reg, 1, {1.0, 1.0});
        registry_update(reg, 1, {1.0, 1.0});
        std::vector<double> a = unknown_metric_matrix(reg, 1, MetricKind::mahalanobis);
        CHECK(a == std::vector<double>{1.0, 0.0, 0.0, 1.0});
    }
    SUBCASE("large isotropic member set approaches variance * identity") {
        Rng rng(17);
        const double sigma = 2.0;  // variance 4
        for (int i = 0; i < 3000; ++i)
            registry_update(reg, 1, {1.0 + sigma * rng.gaussian(), 1.0 + sigma * rng.gaussian()});
        std::vector<double> a = unknown_metric_matrix(reg, 1, MetricKind::mahalanobis);
        CHECK(a[0] == doctest::Approx(4.0).epsilon(0.10));
        CHECK(a[3] == doctest::Approx(4.0).epsilon(0.10));
        CHECK(std::abs(a[1]) < 0.4);
    }
}

TEST_CASE("step-1 decisions are monotone in lambda1 over a frozen test set") {
    Rng rng(19);
    // two tight known clusters, one far unknown cluster
    std::vector<Vec> known_class0, known_class1;
    for (int i = 0; i < 100; ++i) {
        known_class0.push_back({rng.gaussian(), rng.gaussian()});
        known_class1.push_back({8.0 + rng.gaussian(), rng.gaussian()});
    }
    ClassStats stats = fit_statistics({known_class0, known_class1});

    std::vector<Vec> test_set;
    std::vector<TruthLabel> truth;
    for (int i = 0; i < 60; ++i) {
        test_set.push_back({rng.gaussian(), rng.gaussian()});
        truth.push_back({true, 0});
        test_set.push_back({8.0 + rng.gaussian(), rng.gaussian()});
        truth.push_back({true, 1});
        test_set.push_back({4.0 + 0.5 * rng.gaussian(), 14.0 + 0.5 * rng.gaussian()});
        truth.push_back({false, 0});
    }

    DiscriminatorConfig cfg;
    cfg.metric = MetricKind::mahalanobis;
    double prev_tkr = -1.0, prev_tur = 2.0;
    for (double l1 = 0.05; l1 <= 1.0 + 1e-9; l1 += 0.05) {
        cfg.lambda1 = l1;
        ClassStats frozen = stats;
        UnknownRegistry reg;
        reg.dim = 2;
        std::vector<Prediction> preds;
        for (const Vec& z : test_set) preds.push_back(discriminate(z, frozen, reg, cfg));
        OutcomeCounts counts = tally(preds, truth, 2, 1);
        double tkr = static_cast<double>(counts.tk) / (counts.tk + counts.fu);
        double tur = static_cast<double>(counts.tu) / (counts.tu + counts.fk);
        CHECK(tkr >= prev_tkr);
        CHECK(tur <= prev_tur);
        prev_tkr = tkr;
        prev_tur = tur;
    }
}

TEST_CASE("frozen discriminate never mutates and matches online step-1") {
    ClassStats stats = two_known_classes();
    DiscriminatorConfig cfg;
    cfg.lambda1 = 1.0;
    cfg.metric = MetricKind::euclidean;
    UnknownRegistry reg;
    reg.dim = 2;
    discriminate({20.0, 20.0}, stats, reg, cfg);  // seed one unknown label
    const std::size_t members_before = reg.entries[0].members.size();

    Rng rng(23);
    for (int i = 0; i < 50; ++i) {
        Vec z{rng.uniform(-30, 30), rng.uniform(-30, 30)};
        Prediction frozen = discriminate_frozen(z, stats, reg, cfg);
        CHECK(frozen.known == (frozen.d1 < frozen.theta1));
    }
    CHECK(reg.entries[0].members.size() == members_before);
}

TEST_CASE("registry snapshot JSON lists labels, counts and centers") {
    UnknownRegistry reg;
    reg.dim = 2;
    UnknownEntry e;
    e.label = 1;
    e.members = {{1.0, 2.0}, {3.0, 4.0}};
    e.sum = {4.0, 6.0};
    reg.entries.push_back(e);
    std::string json = registry_to_json(reg);
    CHECK(json.find("\"label\": 1") != std::string::npos);
    CHECK(json.find("\"member_count\": 2") != std::string::npos);
    CHECK(json.find("2.0") != std::string::npos);
}
