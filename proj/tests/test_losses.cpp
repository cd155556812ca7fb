#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sr2cnn/losses.hpp"
#include "sr2cnn/nn.hpp"
#include "sr2cnn/rng.hpp"

using namespace sr2cnn;

TEST_CASE("cross entropy analytic values") {
    SUBCASE("true-class probability 1 gives zero loss") {
        Tensor<double> p({1, 3}, {0.0, 1.0, 0.0});
        CHECK(cross_entropy(p, {1}) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("uniform over 4 classes gives ln 4") {
        Tensor<double> p({1, 4}, {0.25, 0.25, 0.25, 0.25});
        CHECK(cross_entropy(p, {2}) == doctest::Approx(std::log(4.0)));
        CHECK(cross_entropy(p, {2}) == doctest::Approx(1.386294).epsilon(1e-6));
    }
    SUBCASE("two samples at probability one half give ln 2") {
        Tensor<double> p({2, 2}, {0.5, 0.5, 0.5, 0.5});
        CHECK(cross_entropy(p, {0, 1}) == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("labels outside the known set are rejected") {
        Tensor<double> p({1, 2}, {0.5, 0.5});
        CHECK_THROWS_AS(cross_entropy(p, {2}), Error);
    }
    SUBCASE("log floor keeps saturated probabilities finite") {
        Tensor<double> p({1, 2}, {0.0, 1.0});
        double v = cross_entropy(p, {0});
        CHECK(std::isfinite(v));
        CHECK(v == doctest::Approx(-std::log(1e-12)));
    }
    SUBCASE("nonnegative, zero only at certainty") {
        Rng rng(3);
        for (int rep = 0; rep < 50; ++rep) {
            Tensor<double> logits({4});
            for (auto& v : logits.data) v = rng.gaussian();
            Tensor<double> probs = softmax(logits);
            Tensor<double> row({1, 4}, probs.data);
            double v = cross_entropy(row, {1});
            CHECK(v >= 0.0);
            if (probs(1) < 1.0) CHECK(v > 0.0);
        }
    }
}

TEST_CASE("center loss values and gradient") {
    CenterTable<double> table;
    table.centers = Tensor<double>({2, 2}, {0.0, 0.0, 1.0, 1.0});

    SUBCASE("features at their centers give zero") {
        Tensor<double> f({2, 2}, {0.0, 0.0, 1.0, 1.0});
        CHECK(center_loss(f, {0, 1}, table) == doctest::Approx(0.0));
    }
    SUBCASE("single feature (1,1) against center (0,0) gives 1") {
        Tensor<double> f({1, 2}, {1.0, 1.0});
        CHECK(center_loss(f, {0}, table) == doctest::Approx(1.0));
    }
    SUBCASE("squared distances 4 and 0 over two samples give 1") {
        Tensor<double> f({2, 2}, {2.0, 0.0, 1.0, 1.0});
        CHECK(center_loss(f, {0, 1}, table) == doctest::Approx(1.0));
    }
    SUBCASE("gradient w.r.t. features is (z - c)/N") {
        Rng rng(5);
        Tensor<double> f({3, 2});
        for (auto& v : f.data) v = rng.gaussian();
        std::vector<std::uint16_t> labels{0, 1, 0};
        auto loss = [&](const Tensor<double>& fi) { return center_loss(fi, labels, table); };
        Tensor<double> grad({3, 2});
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                grad(i, j) = (f(i, j) - table.centers(labels[i], j)) / 3.0;
        CHECK(grad_check(loss, f, grad, 1e-4) < 1e-5);
    }
    SUBCASE("missing center rejected") {
        Tensor<double> f({1, 2}, {0.0, 0.0});
        CHECK_THROWS_AS(center_loss(f, {5}, table), Error);
    }
}

TEST_CASE("center delta follows the batch rule") {
    CenterTable<double> table;
    table.centers = Tensor<double>({3, 2}, {1.0, 0.0, 5.0, 5.0, -2.0, 3.0});
    table.alpha = 0.5;

    SUBCASE("absent classes keep delta zero") {
        Tensor<double> f({1, 2}, {0.0, 0.0});
        Tensor<double> d = center_delta(f, {0}, table);
        CHECK(d(1, 0) == 0.0);
        CHECK(d(1, 1) == 0.0);
        CHECK(d(2, 0) == 0.0);
    }
    SUBCASE("one sample: delta = c - z; alpha 0.5 moves the center halfway") {
        Tensor<double> f({1, 2}, {0.0, 0.0});
        Tensor<double> d = center_delta(f, {0}, table);
        CHECK(d(0, 0) == doctest::Approx(1.0));
        CHECK(d(0, 1) == doctest::Approx(0.0));
        apply_center_delta(table, d);
        CHECK(table.centers(0, 0) == doctest::Approx(0.5));
        CHECK(table.centers(0, 1) == doctest::Approx(0.0));
    }
    SUBCASE("center already at the batch mean stays put") {
        Tensor<double> f({2, 2}, {0.0, 0.0, 2.0, 0.0});
        Tensor<double> d = center_delta(f, {0, 0}, table);
        CHECK(d(0, 0) == doctest::Approx(0.0));
        CHECK(d(0, 1) == doctest::Approx(0.0));
    }
    SUBCASE("alpha = 1 lands every present center exactly on its batch mean") {
        Rng rng(7);
        CenterTable<double> t2;
        t2.centers = Tensor<double>({4, 3});
        for (auto& v : t2.centers.data) v = rng.gaussian();
        t2.alpha = 1.0;
        Tensor<double> f({6, 3});
        for (auto& v : f.data) v = rng.gaussian();
        std::vector<std::uint16_t> labels{0, 1, 1, 2, 2, 2};
        Tensor<double> d = center_delta(f, labels, t2);
        apply_center_delta(t2, d);
        // class means
        for (std::uint16_t cls : {0, 1, 2}) {
            std::vector<double> mean(3, 0.0);
            std::size_t count = 0;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] != cls) continue;
                count++;
                for (std::size_t j = 0; j < 3; ++j) mean[j] += f(i, j);
            }
            for (std::size_t j = 0; j < 3; ++j) {
                mean[j] /= count;
                CHECK(std::abs(t2.centers(cls, j) - mean[j]) <= 1e-12);
            }
        }
        // class 3 absent: center unchanged by a zero delta
        CHECK(d(3, 0) == 0.0);
    }
    SUBCASE("classic +1 denominator variant") {
        Tensor<double> f({1, 2}, {0.0, 0.0});
        Tensor<double> d = center_delta(f, {0}, table, true);
        CHECK(d(0, 0) == doctest::Approx(0.5));  // (c - z) / (1 + 1)
    }
}

TEST_CASE("reconstruction loss values") {
    SUBCASE("perfect reconstruction gives zero") {
        Tensor<double> a({2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
        CHECK(reconstruction_loss(a, a) == doctest::Approx(0.0));
    }
    SUBCASE("single residual of 2 gives 2") {
        Tensor<double> x({1, 4});
        Tensor<double> y({1, 4});
        y(0, 2) = 2.0;
        CHECK(reconstruction_loss(y, x) == doctest::Approx(2.0));
    }
    SUBCASE("doubling residuals quadruples the loss") {
        Rng rng(11);
        Tensor<double> x({3, 5});
        Tensor<double> y({3, 5});
        for (std::size_t i = 0; i < x.numel(); ++i) {
            x.data[i] = rng.gaussian();
            y.data[i] = x.data[i] + rng.gaussian();
        }
        double base = reconstruction_loss(y, x);
        Tensor<double> y2 = x;
        for (std::size_t i = 0; i < x.numel(); ++i)
            y2.data[i] = x.data[i] + 2.0 * (y.data[i] - x.data[i]);
        CHECK(reconstruction_loss(y2, x) == doctest::Approx(4.0 * base));
    }
    SUBCASE("shape mismatch rejected") {
        Tensor<double> a({1, 4});
        Tensor<double> b({1, 5});
        CHECK_THROWS_AS(reconstruction_loss(a, b), Error);
    }
}

TEST_CASE("total loss combination and ablation switches") {
    LossWeights w;
    SUBCASE("zero lambdas reduce to cross entropy") {
        w.lambda_ct = 0.0;
        w.lambda_r = 0.0;
        CHECK(total_loss(1.7, 9.0, 4.0, w) == doctest::Approx(1.7));
    }
    SUBCASE("weighted sum") {
        w.lambda_ct = 0.1;
        w.lambda_r = 1.0;
        CHECK(total_loss(1.0, 2.0, 3.0, w) == doctest::Approx(4.2));
    }
    SUBCASE("switch off removes the term regardless of its weight") {
        w.lambda_ct = 100.0;
        w.ct_on = false;
        CHECK(total_loss(1.0, 2.0, 3.0, w) == doctest::Approx(1.0 + 3.0));
        BatchLoss b = combine_losses(1.0, 2.0, 3.0, w);
        CHECK(b.total == doctest::Approx(4.0));
        CHECK(b.ct == 2.0);  // component reported, contribution zeroed
    }
}
