#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "pairforge/metrics.hpp"
#include "pairforge/rng.hpp"
#include "support/oracles.hpp"

using namespace pairforge;
using pairforge::testing::metrics_reference;

TEST_CASE("confusion matrix") {
    const std::vector<double> s{0.9, 0.1};
    const std::vector<int> y{1, 0};
    CHECK(confusion_matrix(s, y, 0.5) == ConfusionMatrix{1, 0, 1, 0});
    CHECK(confusion_matrix(std::vector<double>{0.5}, std::vector<int>{1}, 0.5).fn == 1);
    CHECK(confusion_matrix(std::vector<double>{0.9, 0.8}, std::vector<int>{0, 0}, 0.5).fp == 2);
    CHECK_THROWS_WITH(confusion_matrix(s, std::vector<int>{1}, 0.5), doctest::Contains("LENGTH_MISMATCH"));
    CHECK_THROWS_WITH(confusion_matrix({}, {}, 0.5), doctest::Contains("EMPTY_INPUT"));
}

TEST_CASE("metric fixtures") {
    auto m = classification_metrics({2, 0, 2, 0});
    CHECK(m.accuracy == 1.0);
    CHECK(m.f1 == 1.0);
    CHECK(m.specificity == 1.0);
    CHECK(m.mcc == 1.0);
    m = classification_metrics({1, 1, 1, 1});
    CHECK(m.accuracy == 0.5);
    CHECK(m.mcc == 0.0);
    m = classification_metrics({3, 1, 4, 2});
    CHECK(m.accuracy == doctest::Approx(0.7));
    CHECK(m.recall == doctest::Approx(0.6));
    CHECK(m.precision == doctest::Approx(0.75));
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(m.specificity == doctest::Approx(0.8));
    CHECK(std::abs(m.mcc - 10.0 / std::sqrt(600.0)) <= 1e-12);
    CHECK(std::abs(m.mcc - 0.4082) <= 1e-4);
    CHECK_THROWS_WITH(classification_metrics({0, 0, 0, 0}), doctest::Contains("EMPTY_MATRIX"));
    m = classification_metrics({0, 0, 5, 0});
    CHECK(m.precision == 0.0);
    CHECK(m.recall == 0.0);
    CHECK(m.mcc == 0.0);
}

TEST_CASE("metrics agree with brute force on every small matrix") {
    std::size_t checked = 0;
    for (std::uint64_t tp = 0; tp <= 6; ++tp)
        for (std::uint64_t fp = 0; fp <= 6; ++fp)
            for (std::uint64_t tn = 0; tn <= 6; ++tn)
                for (std::uint64_t fn = 0; fn <= 6; ++fn) {
                    if (tp + fp + tn + fn == 0) continue;
                    const auto m = classification_metrics({tp, fp, tn, fn});
                    const auto r = metrics_reference(static_cast<double>(tp), static_cast<double>(fp),
                                                     static_cast<double>(tn), static_cast<double>(fn));
                    CHECK(std::abs(m.accuracy - r.accuracy) <= 1e-12);
                    CHECK(std::abs(m.recall - r.recall) <= 1e-12);
                    CHECK(std::abs(m.precision - r.precision) <= 1e-12);
                    CHECK(std::abs(m.f1 - r.f1) <= 1e-12);
                    CHECK(std::abs(m.specificity - r.specificity) <= 1e-12);
                    CHECK(std::abs(m.mcc - r.mcc) <= 1e-12);
                    CHECK((m.mcc == 1.0) == (fp == 0 && fn == 0 && tp > 0 && tn > 0));
                    ++checked;
                }
    CHECK(checked == 2400);
}

TEST_CASE("threshold tuning") {
    const std::vector<double> s{0.2, 0.4, 0.6, 0.8};
    const std::vector<int> y{0, 0, 1, 1};
    auto t = tune_threshold(s, y);
    CHECK(t.threshold == doctest::Approx(0.5));
    CHECK(t.value == 1.0);
    t = tune_threshold(std::vector<double>{0.8, 0.2, 0.6, 0.4}, std::vector<int>{1, 0, 1, 0});
    CHECK(t.threshold == doctest::Approx(0.5));

    const auto same = tune_threshold(s, std::vector<int>{1, 1, 1, 1});
    CHECK(same.threshold < 0.2);
    CHECK(same.value == 0.0);
    CHECK(tune_threshold(s, y, Objective::accuracy).value == 1.0);
    CHECK_THROWS_WITH(tune_threshold({}, {}), doctest::Contains("EMPTY_INPUT"));

    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(40);
        std::vector<double> sc(n);
        std::vector<int> lab(n);
        for (std::size_t i = 0; i < n; ++i) {
            sc[i] = std::round(rng.uniform01() * 20) / 20;
            lab[i] = rng.uniform01() < 0.4;
        }
        const auto got = tune_threshold(sc, lab);
        const auto want = pairforge::testing::threshold_reference(sc, lab);
        CHECK(got.threshold == doctest::Approx(want.threshold).epsilon(1e-12));
        CHECK(got.value == doctest::Approx(want.value).epsilon(1e-12));

        // Monotone transform leaves the chosen confusion matrix unchanged.
        std::vector<double> squashed(n);
        for (std::size_t i = 0; i < n; ++i) squashed[i] = sigmoid(4 * sc[i] - 1);
        const auto tt = tune_threshold(squashed, lab);
        CHECK(confusion_matrix(squashed, lab, tt.threshold) == confusion_matrix(sc, lab, got.threshold));
    }
}

TEST_CASE("temperature calibration") {
    CHECK(fit_temperature(std::vector<double>(10, 0.0), std::vector<int>{1, 0, 1, 0, 1, 0, 1, 0, 1, 0}) == 1.0);

    std::vector<double> z;
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) {
        z.push_back(i % 2 ? 2.0 : -2.0);
        y.push_back(i % 2);
    }
    CHECK(fit_temperature(z, y) == kMinTemperature);

    Rng rng(4);
    z.clear();
    y.clear();
    for (int i = 0; i < 500; ++i) {
        const int label = i % 2;
        z.push_back(label ? 4.0 : -4.0);
        y.push_back(rng.uniform01() < 0.2 ? 1 - label : label);
    }
    const double t = fit_temperature(z, y);
    CHECK(t > 1.0);
    CHECK(calibration_nll(z, y, t) <= calibration_nll(z, y, 1.0) + 1e-4);

    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> lz(60);
        std::vector<int> ly(60);
        for (std::size_t i = 0; i < 60; ++i) {
            ly[i] = rng.uniform01() < 0.5;
            lz[i] = (ly[i] ? 1.0 : -1.0) * rng.uniform(-1, 5) * 3;
        }
        const double ft = fit_temperature(lz, ly);
        CHECK(ft >= kMinTemperature);
        CHECK(ft <= kMaxTemperature);
        CHECK(calibration_nll(lz, ly, ft) <= calibration_nll(lz, ly, 1.0) + 1e-4);
    }
    CHECK(softplus(800.0) == doctest::Approx(800.0));
    CHECK(softplus(-800.0) >= 0.0);
    CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("metrics export") {
    const auto m = classification_metrics({3, 1, 4, 2});
    const auto j = to_json(m);
    CHECK(j.at("tp") == 3);
    CHECK(j.at("mcc").get<double>() == m.mcc);
    const auto tsv = metrics_tsv(m, "test");
    CHECK(tsv.find("mcc") != std::string::npos);
    CHECK(tsv.find("\ntest\t") != std::string::npos);
}
