#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gvdoc/metrics.hpp"
#include "gvdoc/rng.hpp"

using namespace gvdoc;

namespace {

// Pairwise Mann-Whitney count, the O(|P|*|N|) reference.
double auroc_pairwise(const std::vector<double>& pos, const std::vector<double>& neg) {
    double score = 0.0;
    for (double p : pos) {
        for (double n : neg) {
            if (p > n) score += 1.0;
            else if (p == n) score += 0.5;
        }
    }
    return score / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Reference FPR@TPR: walk every candidate threshold, keep the largest one
// whose TPR still reaches the floor.
double fpr_sweep(const std::vector<double>& pos, const std::vector<double>& neg, double min_tpr) {
    std::vector<double> thresholds = pos;
    thresholds.insert(thresholds.end(), neg.begin(), neg.end());
    std::sort(thresholds.begin(), thresholds.end());
    double best_t = -1e300;
    bool found = false;
    for (double t : thresholds) {
        int tp = 0;
        for (double p : pos)
            if (p >= t) ++tp;
        if (static_cast<double>(tp) / static_cast<double>(pos.size()) >= min_tpr) {
            if (!found || t > best_t) best_t = t, found = true;
        }
    }
    int fp = 0;
    for (double n : neg)
        if (n >= best_t) ++fp;
    return static_cast<double>(fp) / static_cast<double>(neg.size());
}

std::vector<double> random_scores(Rng& rng, int n, bool quantized) {
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = quantized ? static_cast<double>(rng.bounded(20)) / 10.0 : rng.uniform();
    return v;
}

}  // namespace

TEST_CASE("msp analytic values") {
    CHECK(msp({0.0, 0.0, 0.0, 0.0}) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(msp({2.0, 1.0, 0.0}) == doctest::Approx(0.6652409557748218).epsilon(1e-5));
    CHECK(msp({5.0, 5.0}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("msp shift invariance is exact") {
    std::vector<double> z = {3.0, -1.0, 2.0, 0.0};
    std::vector<double> shifted = z;
    for (auto& v : shifted) v += 1000.0;
    CHECK(msp(z) == msp(shifted));
    std::vector<double> big = {1000.0, 999.0, 998.0};
    CHECK(msp(big) == msp({2.0, 1.0, 0.0}));
}

TEST_CASE("energy analytic values") {
    CHECK(energy_score({0.0, 0.0}, 1.0) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
    CHECK(energy_score({1.0, 2.0, 3.0}, 1.0) ==
          doctest::Approx(-3.4076059644443806).epsilon(1e-5));
    // T rescales: E(z, T) = -T * logsumexp(z / T).
    CHECK(energy_score({0.0, 0.0}, 2.0) == doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("energy strictly decreases when any logit increases") {
    std::vector<double> z = {0.5, -0.25, 1.5};
    double base = energy_score(z, 1.0);
    for (size_t i = 0; i < z.size(); ++i) {
        auto bumped = z;
        bumped[i] += 0.01;
        CHECK(energy_score(bumped, 1.0) < base);
    }
}

TEST_CASE("accuracy micro macro per-class") {
    // class 0: 2/2 correct, class 1: 0/1.
    auto rep = accuracy({0, 0, 0}, {0, 0, 1});
    CHECK(rep.micro == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(rep.macro == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.per_class.at(0) == doctest::Approx(1.0));
    CHECK(rep.per_class.at(1) == doctest::Approx(0.0));
    CHECK(rep.per_class.count(2) == 0);  // absent classes never drag the macro mean

    auto perfect = accuracy({1, 2, 3}, {1, 2, 3});
    CHECK(perfect.micro == doctest::Approx(1.0));
    CHECK(perfect.macro == doctest::Approx(1.0));
}

TEST_CASE("accuracy micro equals macro on balanced equal-recall splits") {
    // Two classes, two samples each, one correct per class.
    auto rep = accuracy({0, 1, 1, 0}, {0, 0, 1, 1});
    CHECK(rep.micro == doctest::Approx(rep.macro).epsilon(1e-15));
}

TEST_CASE("auroc endpoint and tie cases") {
    CHECK(auroc({1.0, 1.0}, {0.0, 0.0}) == doctest::Approx(1.0));
    CHECK(auroc({0.0, 0.0}, {1.0, 1.0}) == doctest::Approx(0.0));
    CHECK(auroc({0.3, 0.7}, {0.3, 0.7}) == doctest::Approx(0.5));
    CHECK(auroc({0.9, 0.8}, {0.85, 0.1}) == doctest::Approx(0.75));
}

TEST_CASE("auroc equals the pairwise oracle exactly on random instances") {
    Rng rng(0x41u);
    for (int it = 0; it < 100; ++it) {
        int np = 1 + static_cast<int>(rng.bounded(200));
        int nn = 1 + static_cast<int>(rng.bounded(200));
        bool quantized = (it % 2) == 0;  // quantized scores force plenty of ties
        auto pos = random_scores(rng, np, quantized);
        auto neg = random_scores(rng, nn, quantized);
        CHECK(auroc(pos, neg) == auroc_pairwise(pos, neg));
    }
}

TEST_CASE("auroc duality and monotone-transform invariance") {
    Rng rng(0x42u);
    for (int it = 0; it < 20; ++it) {
        auto pos = random_scores(rng, 40, false);
        auto neg = random_scores(rng, 30, false);
        CHECK(auroc(pos, neg) == doctest::Approx(1.0 - auroc(neg, pos)).epsilon(1e-12));

        auto fp = pos, fn = neg;
        for (auto& v : fp) v = std::exp(3.0 * v);  // strictly increasing map
        for (auto& v : fn) v = std::exp(3.0 * v);
        CHECK(auroc(fp, fn) == auroc(pos, neg));
        CHECK(fpr_at_tpr(fp, fn, 0.95) == fpr_at_tpr(pos, neg, 0.95));
    }
}

TEST_CASE("fpr at 95 tpr pinned example") {
    // 3/4 positives misses the floor, so the threshold drops to 0.4 and one of
    // the two negatives (0.5) crosses it.
    CHECK(fpr_at_tpr({0.9, 0.8, 0.6, 0.4}, {0.5, 0.3}, 0.95) == doctest::Approx(0.5));
    CHECK(fpr_at_tpr({1.0, 1.0}, {0.0, 0.0}, 0.95) == doctest::Approx(0.0));
    CHECK(fpr_at_tpr({0.1, 0.2}, {0.8, 0.9}, 0.95) == doctest::Approx(1.0));
}

TEST_CASE("fpr at tpr matches the threshold sweep oracle") {
    Rng rng(0x43u);
    for (int it = 0; it < 100; ++it) {
        int np = 1 + static_cast<int>(rng.bounded(60));
        int nn = 1 + static_cast<int>(rng.bounded(60));
        auto pos = random_scores(rng, np, (it % 2) == 0);
        auto neg = random_scores(rng, nn, (it % 2) == 0);
        double tpr = (it % 3 == 0) ? 0.95 : (it % 3 == 1 ? 0.8 : 1.0);
        CHECK(fpr_at_tpr(pos, neg, tpr) == doctest::Approx(fpr_sweep(pos, neg, tpr)).epsilon(1e-15));
    }
}
