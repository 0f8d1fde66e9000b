#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "rsrae/data.hpp"
#include "rsrae/error.hpp"
#include "rsrae/metrics.hpp"
#include "rsrae/rng.hpp"

using namespace rsrae;

namespace {

// Random instance with heavy ties: scores drawn from a small grid.
void random_instance(Rng& rng, std::vector<double>& s, std::vector<int>& y) {
    const std::size_t n = 2 + rng.below(199);
    const std::uint64_t levels = 1 + rng.below(12);
    s.resize(n);
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<double>(rng.below(levels)) * 0.25;
        y[i] = rng.uniform() < 0.35 ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
}

}  // namespace

TEST_CASE("auc examples") {
    CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}) == 1.0);
    CHECK(roc_auc(std::vector<double>{0.9, 0.4, 0.8, 0.1}, std::vector<int>{1, 0, 0, 1}) == 0.5);
    CHECK(roc_auc(std::vector<double>{3, 3, 3, 3}, std::vector<int>{1, 0, 1, 0}) == 0.5);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), ConfigError);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{1, 2}, std::vector<int>{1}), ShapeError);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{1, 2}, std::vector<int>{1, 2}), ConfigError);
}

TEST_CASE("ap examples") {
    CHECK(average_precision(std::vector<double>{0.9, 0.8, 0.7}, std::vector<int>{1, 0, 1}) ==
          doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(average_precision(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}) == 1.0);
    CHECK(average_precision(std::vector<double>{0.1, 0.5, 0.3}, std::vector<int>{1, 1, 1}) == 1.0);
    CHECK_THROWS_AS(average_precision(std::vector<double>{1, 2}, std::vector<int>{0, 0}), ConfigError);
}

TEST_CASE("auc and ap match brute force with ties") {
    Rng rng(100);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> s;
        std::vector<int> y;
        random_instance(rng, s, y);
        CHECK(std::abs(roc_auc(s, y) - oracle::auc(s, y)) <= 1e-12);
        CHECK(std::abs(average_precision(s, y) - oracle::ap(s, y)) <= 1e-12);
    }
}

TEST_CASE("metrics are invariant to increasing transforms") {
    Rng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s;
        std::vector<int> y;
        random_instance(rng, s, y);
        std::vector<double> t(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
        CHECK(roc_auc(s, y) == roc_auc(t, y));
        CHECK(average_precision(s, y) == average_precision(t, y));
    }
}

TEST_CASE("auc of negated scores is the complement") {
    Rng rng(102);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 10 + rng.below(50);
        std::vector<double> s(n), neg(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = rng.normal();
            neg[i] = -s[i];
            y[i] = i % 3 == 0;
        }
        CHECK(std::abs(roc_auc(s, y) + roc_auc(neg, y) - 1.0) < 1e-12);
    }
}

TEST_CASE("threshold labels") {
    std::vector<double> s{0.1, 0.5, 0.5, 2.0};
    CHECK(threshold_labels(s, -1.0) == std::vector<int>{1, 1, 1, 1});
    CHECK(threshold_labels(s, 2.0) == std::vector<int>{0, 0, 0, 0});
    CHECK(threshold_labels(s, 0.5) == std::vector<int>{0, 0, 0, 1});
}

TEST_CASE("thresholding at midpoints reproduces the roc curve") {
    Rng rng(103);
    std::vector<double> s;
    std::vector<int> y;
    random_instance(rng, s, y);
    auto curve = roc_curve(s, y);
    std::vector<double> distinct = s;
    std::sort(distinct.begin(), distinct.end(), std::greater<>());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    double pos = 0, neg = 0;
    for (int l : y) (l ? pos : neg) += 1;
    REQUIRE(curve.size() == distinct.size() + 1);
    CHECK(curve.front().fpr == 0.0);
    CHECK(curve.front().tpr == 0.0);
    for (std::size_t k = 0; k < distinct.size(); ++k) {
        // a threshold just below distinct[k] flags exactly the scores >= distinct[k]
        const double thr = k + 1 < distinct.size() ? 0.5 * (distinct[k] + distinct[k + 1]) : distinct[k] - 1.0;
        auto pred = threshold_labels(s, thr);
        double tp = 0, fp = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!pred[i]) continue;
            (y[i] ? tp : fp) += 1;
        }
        CHECK(curve[k + 1].tpr == doctest::Approx(tp / pos));
        CHECK(curve[k + 1].fpr == doctest::Approx(fp / neg));
    }
    // Trapezoids under the curve give the same AUC.
    double area = 0;
    for (std::size_t k = 1; k < curve.size(); ++k)
        area += (curve[k].fpr - curve[k - 1].fpr) * 0.5 * (curve[k].tpr + curve[k - 1].tpr);
    CHECK(std::abs(area - roc_auc(s, y)) < 1e-12);
}

TEST_CASE("report json") {
    auto r = make_report({0.9, 0.8, 0.7}, {1, 0, 1}, 7);
    auto j = report_json(r);
    CHECK(j["n"] == 3);
    CHECK(j["n_outliers"] == 2);
    CHECK(j["seed"] == 7);
    CHECK(j["ap"].get<double>() == doctest::Approx(5.0 / 6.0));
    auto u = make_report({0.1, 0.2}, {});
    CHECK_FALSE(u.auc.has_value());
    CHECK(report_json(u)["auc"].is_null());
}

TEST_CASE("swiss roll examples") {
    auto p = swiss_roll_point(0.0, 2 * std::numbers::pi);
    CHECK(p[0] == doctest::Approx(6.283185307179586));
    CHECK(p[1] == 0.0);
    CHECK(std::abs(p[2]) < 1e-12);
    auto q = swiss_roll_point(10.5, 1.5 * std::numbers::pi);
    CHECK(std::abs(q[0]) < 1e-12);
    CHECK(q[1] == 10.5);
    CHECK(q[2] == doctest::Approx(-4.71238898038469));

    auto d = swiss_roll(1000, 5);
    CHECK(d.size() == 1000);
    CHECK(d.outlier_count() == 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double r = std::hypot(d.x(i, 0), d.x(i, 2));
        CHECK(r >= kSwissRollAngleMin - 1e-12);
        CHECK(r <= kSwissRollAngleMax + 1e-12);
        // The angle is recoverable: (r cos r, r sin r) reproduces the point.
        CHECK(std::abs(r * std::cos(r) - d.x(i, 0)) < 1e-9);
        CHECK(std::abs(r * std::sin(r) - d.x(i, 2)) < 1e-9);
        CHECK(d.x(i, 1) >= 0.0);
        CHECK(d.x(i, 1) <= kSwissRollHeight);
    }
    CHECK(max_abs(swiss_roll(50, 9).x - swiss_roll(50, 9).x) == 0.0);
    CHECK_THROWS_AS(swiss_roll(0, 1), ConfigError);
}

TEST_CASE("gaussian outliers") {
    auto big = gaussian_outliers(100000, 2.0, 3);
    CHECK(big.outlier_count() == 100000);
    for (std::size_t j = 0; j < 3; ++j) {
        double m = 0, v = 0;
        for (std::size_t i = 0; i < big.size(); ++i) m += big.x(i, j);
        m /= 1e5;
        for (std::size_t i = 0; i < big.size(); ++i) v += (big.x(i, j) - m) * (big.x(i, j) - m);
        v /= 1e5;
        CHECK(v >= 3.9);
        CHECK(v <= 4.1);
    }
    auto zero = gaussian_outliers(10, 0.0, 3);
    CHECK(max_abs(zero.x) == 0.0);
    CHECK(max_abs(gaussian_outliers(20, 2.0, 4).x - gaussian_outliers(20, 2.0, 4).x) == 0.0);
    CHECK_THROWS_AS(gaussian_outliers(0, 2.0, 1), ConfigError);
}

TEST_CASE("mix") {
    auto in = swiss_roll(1000, 1);
    auto out = gaussian_outliers(500, 2.0, 2);
    auto m = mix(in, out, 3);
    CHECK(m.size() == 1500);
    CHECK(m.outlier_count() == 500);
    // Rows and labels are a permutation of the concatenation.
    for (std::size_t i = 0; i < m.size(); ++i) {
        const std::size_t src = m.source_index[i];
        const bool is_out = src >= 1000;
        CHECK(m.labels[i] == (is_out ? 1 : 0));
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(m.x(i, j) == (is_out ? out.x(src - 1000, j) : in.x(src, j)));
    }
    auto pure = mix(in, std::nullopt, 3);
    CHECK(pure.size() == 1000);
    CHECK(pure.outlier_count() == 0);
    CHECK_THROWS_AS(mix(in, gaussian_outliers(5, 1.0, 1, 4), 1), ShapeError);

    // Scoring the shuffled set and undoing the shuffle gives the unshuffled scores.
    auto score = [](const Tensor& x, std::size_t i) { return std::hypot(x(i, 0), x(i, 1), x(i, 2)); };
    std::vector<double> unshuffled(1500);
    for (std::size_t i = 0; i < 1500; ++i) unshuffled[m.source_index[i]] = score(m.x, i);
    for (std::size_t i = 0; i < 1000; ++i) CHECK(unshuffled[i] == score(in.x, i));
}

TEST_CASE("corrupt") {
    auto in = swiss_roll(100, 1);
    auto pool = gaussian_outliers(80, 2.0, 2);
    auto c = corrupt(in, pool, CorruptionSpec{0.3, 100}, 5);
    CHECK(c.size() == 130);
    CHECK(c.outlier_count() == 30);
    CHECK_THROWS_AS(corrupt(in, pool, CorruptionSpec{0.9, 100}, 5), ConfigError);
    CHECK_THROWS_AS(CorruptionSpec({1.5, 10}).validate(), ConfigError);
}

TEST_CASE("csv round trip and errors") {
    auto d = mix(swiss_roll(20, 1), gaussian_outliers(7, 2.0, 2), 3);
    std::stringstream ss;
    write_csv(ss, d);
    auto back = parse_csv(ss, true);
    CHECK(back.labels == d.labels);
    for (std::size_t i = 0; i < d.x.size(); ++i) CHECK(back.x[i] == d.x[i]);

    std::istringstream three("a,b,label\n1,2,0\n3,4,1\n");
    auto t = parse_csv(three, true);
    CHECK(t.dim() == 2);
    CHECK(t.labels == std::vector<int>{0, 1});

    std::istringstream ragged("1,2\n3,4\n5,6\n7,8\n9,10\n11,12\n13\n");
    try {
        parse_csv(ragged, false);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("line 7") != std::string::npos);
    }
    std::istringstream text("1,2\n3,x\n");
    CHECK_THROWS_AS(parse_csv(text, false), IoError);
    std::istringstream bad_label("1,2,3\n");
    CHECK_THROWS_AS(parse_csv(bad_label, true), IoError);
}

TEST_CASE("score csv round trip") {
    auto r = make_report({0.1, 1.0 / 3.0, 2e-17}, {0, 1, 0});
    std::stringstream ss;
    write_scores(ss, r);
    CHECK(ss.str().rfind("index,score,label\n", 0) == 0);
    auto back = parse_scores(ss);
    CHECK(back.scores == r.scores);
    CHECK(back.labels == r.labels);
    auto u = make_report({0.5}, {});
    std::stringstream su;
    write_scores(su, u);
    CHECK(parse_scores(su).labels.empty());
}
