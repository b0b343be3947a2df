#include "bobw/mwu.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace bobw;
using bobw::test::basis;
using bobw::test::vec;

namespace {

bobw::test::Moments sample_moments(const Vec& coeff, int n, Rng& rng) {
    bobw::test::Moments m;
    for (int i = 0; i < n; ++i) m.add(sample_exp_weights(coeff, rng));
    return m;
}

}  // namespace

TEST_SUITE("mwu") {

TEST_CASE("flat coefficients give uniform simplex means") {
    Rng rng = make_rng(1);
    const auto m = sample_moments(Vec::Zero(3), 100'000, rng);
    CHECK(bobw::test::within_se(m, Vec::Constant(3, 1.0 / 3.0)));
}

TEST_CASE("K = 2 marginal matches the truncated exponential mean") {
    Rng rng = make_rng(2);
    const double c = 2.0;
    const auto m = sample_moments(vec({c, 0.0}), 100'000, rng);
    const double exact = (std::exp(c) * (c - 1.0) + 1.0) / (c * (std::exp(c) - 1.0));
    CHECK(std::abs(m.mean()(0) - exact) <= 3.0 * m.se()(0));
}

TEST_CASE("permuting coefficients permutes the means") {
    Rng rng = make_rng(3);
    const auto a = sample_moments(vec({1.5, -0.5, 0.0}), 40'000, rng);
    const auto b = sample_moments(vec({0.0, 1.5, -0.5}), 40'000, rng);
    for (int i = 0; i < 3; ++i) {
        const int j = (i + 1) % 3;
        const double se = std::hypot(a.se()(i), b.se()(j));
        CHECK(std::abs(a.mean()(i) - b.mean()(j)) <= 3.5 * se);
    }
}

TEST_CASE("hit-and-run moments match quadrature") {
    Rng rng = make_rng(4);
    for (const Vec& c : {vec({0.0, 0.0, 0.0}), vec({3.0, -1.0, 0.5}), vec({-4.0, 2.0, 0.0})}) {
        const auto ref = oracle::simplex_quadrature(c, 1000);
        bobw::test::Moments mean, second;
        for (int i = 0; i < 20'000; ++i) {
            const Vec r = sample_exp_weights(c, rng);
            mean.add(r);
            second.add(r.cwiseProduct(r));
        }
        // Eighteen comparisons in all, hence 4 standard errors.
        CHECK(bobw::test::within_se(mean, ref.mean, 4.0, 1e-6));
        CHECK(bobw::test::within_se(second, ref.second, 4.0, 1e-6));
    }
}

TEST_CASE("quadrature oracle reproduces the uniform simplex moments") {
    const auto u3 = oracle::simplex_quadrature(Vec::Zero(3), 400);
    for (int a = 0; a < 3; ++a) {
        CHECK(u3.mean(a) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
        CHECK(u3.second(a) == doctest::Approx(2.0 / 12.0).epsilon(1e-5));
    }
}

TEST_CASE("truncation with an infinite threshold is plain sampling") {
    TruncationSpec t;
    t.sigma_bar_inv = {Mat::Identity(2, 2), Mat::Identity(2, 2)};
    t.threshold = std::numeric_limits<double>::infinity();
    Rng a = make_rng(5), b = make_rng(5);
    const Vec c = vec({0.4, -0.2});
    for (int i = 0; i < 50; ++i) {
        const auto d = truncated_sample(basis(2, 0), c, t, a);
        CHECK(d.rejections == 0);
        CHECK(d.point == sample_exp_weights(c, b));
    }
}

TEST_CASE("unsatisfiable truncation hits the rejection cap") {
    TruncationSpec t;
    t.sigma_bar_inv = {1e6 * Mat::Identity(2, 2), 1e6 * Mat::Identity(2, 2)};
    t.threshold = 2 * 2 * std::pow(truncation_level(2, 2, 1), 2);
    t.max_rejections = 200;
    Rng rng = make_rng(6);
    CHECK_THROWS_AS(truncated_sample(basis(2, 0), Vec::Zero(2), t, rng), std::runtime_error);
}

TEST_CASE("truncation keeps density ratios inside the acceptance region") {
    // K = 2: region r_0^2 + r_1^2 <= 0.7 is an interval around 1/2.
    TruncationSpec t;
    t.sigma_bar_inv = {Mat::Identity(1, 1), Mat::Identity(1, 1)};
    t.threshold = 0.7;
    const Vec c = vec({2.0, 0.0});
    Rng rng = make_rng(7);
    long lo = 0, hi = 0;
    for (int i = 0; i < 100'000; ++i) {
        const double r = truncated_sample(vec({1.0}), c, t, rng).point(0);
        REQUIRE(r * r + (1 - r) * (1 - r) <= 0.7 + 1e-12);
        if (r >= 0.35 && r < 0.45) ++lo;
        if (r >= 0.55 && r < 0.65) ++hi;
    }
    const double ratio = static_cast<double>(hi) / lo;
    // The bins are translates by 0.2, so the ratio is exactly exp(2 * 0.2).
    const double expected = std::exp(0.4);
    const double se = ratio * std::sqrt(1.0 / hi + 1.0 / lo);
    CHECK(std::abs(ratio - expected) <= 3.0 * se);
}

TEST_CASE("covariance estimates for K = 1 and flat coefficients") {
    const auto dist = ContextDistribution::finite_uniform({vec({1.0}), vec({-1.0})});
    TruncationSpec t;
    Rng rng = make_rng(8);
    const auto one = estimate_covariances(dist, [](const Vec&) { return Vec::Zero(1); }, t, 1, 2000, rng);
    CHECK(one.sigma_bar[0](0, 0) == doctest::Approx(1.0 + kCovarianceRidge));
    CHECK(one.sigma_tilde[0](0, 0) == doctest::Approx(1.0 + kCovarianceRidge));

    const auto d2 = ContextDistribution::finite_uniform({vec({1.0, 0.0}), vec({0.6, 0.8})});
    bobw::test::Moments bar;
    for (int rep = 0; rep < 40; ++rep) {
        const auto est = estimate_covariances(d2, [](const Vec&) { return Vec::Zero(3); }, t, 3, 2000, rng);
        bar.add(vec({est.sigma_bar[0](0, 0) - kCovarianceRidge}));
    }
    const double exact = 2.0 / 12.0 * 0.5 * (1.0 + 0.36);
    CHECK(bobw::test::within_se(bar, vec({exact})));
}

TEST_CASE("serial and parallel covariance kernels agree bit for bit") {
    Rng inst = make_rng(9);
    const auto dist = ContextDistribution::random_finite(2, 10, inst);
    TruncationSpec t;
    t.sigma_bar_inv = {3.0 * Mat::Identity(2, 2), 3.0 * Mat::Identity(2, 2)};
    t.threshold = 2.0;
    CoeffFn c = [](const Vec& x) { return vec({x(0), -x(1)}); };
    const auto s = estimate_covariances(dist, c, t, 2, 1500, kBurnInPerArm, 77, Exec::Serial);
    const auto p = estimate_covariances(dist, c, t, 2, 1500, kBurnInPerArm, 77, Exec::Parallel);
    for (int a = 0; a < 2; ++a) {
        CHECK(s.sigma_bar[a] == p.sigma_bar[a]);
        CHECK(s.sigma_tilde[a] == p.sigma_tilde[a]);
    }
    CHECK(s.rejections == p.rejections);
}

TEST_CASE("mwu estimator basics") {
    const std::vector<Vec> m = {vec({0.1, 0.2}), vec({-0.3, 0.0})};
    const std::vector<Mat> inv = {Mat::Identity(2, 2), Mat::Identity(2, 2)};
    const auto none = mwu_estimate(vec({0.5, 0.5}), basis(2, 0), 0.7, 0, m, inv, 0, 0.5);
    CHECK(none[0] == m[0]);
    CHECK(none[1] == m[1]);
    const std::vector<Vec> zero = {Vec::Zero(2), Vec::Zero(2)};
    const auto plain = mwu_estimate(vec({1.0, 0.0}), vec({0.6, 0.8}), 0.5, 0, zero, inv, 1, 1.0);
    CHECK((plain[0] - 0.5 * vec({0.6, 0.8})).norm() < 1e-15);
    CHECK(plain[1].isZero());
    CHECK_THROWS(mwu_estimate(vec({1.0, 0.0}), vec({0.6, 0.8}), 0.5, 0, zero, inv, 1, 0.0));
}

TEST_CASE("mwu estimator is unbiased with an exactly enumerated covariance") {
    const auto dist = ContextDistribution::finite_uniform({vec({1.0, 0.0}), vec({0.0, 1.0}), vec({0.6, 0.8})});
    // Q is drawn from a small finite set of simplex points, context-dependent.
    const std::vector<std::vector<oracle::WeightedPoint>> points = {
        {{vec({0.7, 0.3}), 0.5}, {vec({0.2, 0.8}), 0.5}},
        {{vec({0.5, 0.5}), 1.0}},
        {{vec({0.9, 0.1}), 0.25}, {vec({0.4, 0.6}), 0.75}},
    };
    std::vector<Mat> tilde(2, Mat::Zero(2, 2));
    for (int i = 0; i < 3; ++i)
        for (const auto& wp : points[i])
            for (int a = 0; a < 2; ++a)
                tilde[a] += wp.prob / 3.0 * wp.point(a) * wp.point(a) * dist.support[i] * dist.support[i].transpose();
    std::vector<Mat> inv = {tilde[0].inverse(), tilde[1].inverse()};
    const std::vector<Vec> theta = {vec({0.5, -0.3}), vec({-0.2, 0.6})};
    const std::vector<Vec> m = {vec({0.1, 0.1}), vec({0.0, -0.2})};
    Rng rng = make_rng(10);
    std::vector<bobw::test::Moments> mom(2);
    const double q = 0.6;
    for (int n = 0; n < 400'000; ++n) {
        const int i = std::min(static_cast<int>(uniform01(rng) * 3), 2);
        const auto& pts = points[i];
        const auto& wp = pts.size() == 1 || uniform01(rng) < pts[0].prob ? pts[0] : pts[1];
        const int a = uniform01(rng) < wp.point(0) ? 0 : 1;
        const int upd = uniform01(rng) < q ? 1 : 0;
        const Vec& x = dist.support[i];
        const auto est = mwu_estimate(wp.point, x, theta[a].dot(x), a, m, inv, upd, q);
        for (int b = 0; b < 2; ++b) mom[b].add(est[b]);
    }
    for (int b = 0; b < 2; ++b) CHECK(bobw::test::within_se(mom[b], theta[b]));
}

TEST_CASE("mwu learning rate") {
    MwuState s;
    s.dim = 2;
    s.num_actions = 2;
    s.t = 1;
    const double g = 4.0 * std::log(40.0);
    CHECK(mwu_learning_rate(s) == doctest::Approx(1.0 / std::sqrt(3200.0 * g * g)));
    CHECK(mwu_learning_rate(s) == doctest::Approx(1.199e-3).epsilon(1e-3));
    s.beta_sum_over_q = 0.0;
    s.t = 50;
    const double g50 = truncation_level(2, 2, 50);
    CHECK(mwu_learning_rate(s) == doctest::Approx(1.0 / std::sqrt(3200.0 * g50 * g50)));
}

TEST_CASE("learner keeps the eta bound and positive beta") {
    const auto dist = ContextDistribution::finite_uniform({vec({1.0, 0.0}), vec({0.0, 1.0}), vec({0.6, 0.8})});
    MwuOptions o;
    o.n_mc = 1000;
    MwuLcPolicy p(dist, 2, o);
    Rng rng = make_rng(11);
    double prev_beta = 0.0;
    for (long t = 1; t <= 30; ++t) {
        const Vec x = sample_context(dist, rng);
        const int a = p.act(x, rng);
        p.observe(x, a, 0.3 * x(0) - 0.2, rng);
        CHECK(p.learner().state().beta_sum_over_q >= prev_beta);
        CHECK(std::abs(p.learner().last().xi) <= 2.0);
        CHECK(p.learner().last().eta > 0.0);
        prev_beta = p.learner().state().beta_sum_over_q;
    }
    CHECK(p.invariant_violations() == 0);
}

TEST_CASE("predictor basics") {
    auto p = make_predictor(Mat::Identity(2, 2), 2, {basis(2, 0), basis(2, 1)});
    CHECK(predictor_solve(p, 0).isZero());
    predictor_update(p, basis(2, 0), 0, 1.0);
    CHECK((p.m[0] - 0.5 * basis(2, 0)).norm() < 1e-15);
}

TEST_CASE("predictor output stays inside the support constraint") {
    auto p = make_predictor(0.01 * Mat::Identity(2, 2), 1, {vec({1.0, 0.0}), vec({0.0, 1.0})});
    for (int i = 0; i < 20; ++i) predictor_update(p, vec({1.0, 0.0}), 0, 1.0);
    predictor_update(p, vec({0.6, 0.8}), 0, 1.0);
    for (const auto& x : p.support) CHECK(std::abs(x.dot(p.m[0])) <= 1.0 + 1e-12);
}

TEST_CASE("noiseless predictor converges to the true losses") {
    Rng rng = make_rng(12);
    const auto dist = ContextDistribution::random_finite(3, 30, rng);
    const auto sp = barycentric_spanner(dist.support);
    auto p = make_predictor(sp.S, 1, dist.support);
    const Vec theta = vec({0.3, -0.5, 0.2});
    for (int i = 0; i < 10'000; ++i) {
        const Vec x = sample_context(dist, rng);
        predictor_update(p, x, 0, theta.dot(x));
    }
    for (const auto& x : dist.support) CHECK(std::abs(x.dot(p.m[0]) - theta.dot(x)) <= 0.01);
}

TEST_CASE("fraction-free determinant") {
    Rng rng = make_rng(13);
    for (int n = 1; n <= 6; ++n) {
        const Mat m = Mat::Random(n, n);
        CHECK(fraction_free_determinant(m) == doctest::Approx(m.determinant()).epsilon(1e-10));
    }
    Mat sing = Mat::Ones(3, 3);
    CHECK(std::abs(fraction_free_determinant(sing)) < 1e-15);
}

TEST_CASE("spanner on orthonormal and small supports") {
    const auto sp = barycentric_spanner({basis(3, 0), basis(3, 1), basis(3, 2)});
    CHECK((sp.S - Mat::Identity(3, 3)).norm() < 1e-15);
    const std::vector<Vec> small = {basis(2, 0), basis(2, 1), vec({std::sqrt(0.5), std::sqrt(0.5)})};
    const auto s2 = barycentric_spanner(small);
    for (const auto& x : small) {
        // Solve the 2x2 system by Cramer's rule, independently of the library.
        const Mat& b = s2.basis_matrix;
        const double det = b(0, 0) * b(1, 1) - b(0, 1) * b(1, 0);
        const double c0 = (x(0) * b(1, 1) - b(0, 1) * x(1)) / det;
        const double c1 = (b(0, 0) * x(1) - x(0) * b(1, 0)) / det;
        CHECK(std::abs(c0) <= 2.0 + 1e-12);
        CHECK(std::abs(c1) <= 2.0 + 1e-12);
    }
    CHECK_THROWS_AS(barycentric_spanner({basis(2, 0), basis(2, 0)}), std::domain_error);
}

TEST_CASE("spanner swap count and geometry on random supports") {
    Rng rng = make_rng(14);
    for (int d = 2; d <= 6; ++d) {
        const auto dist = ContextDistribution::random_finite(d, 50, rng);
        const auto sp = barycentric_spanner(dist.support);
        // Each swap at least doubles |det|, and Hadamard caps it at 1.
        CHECK(sp.swaps <= std::log2(sp.final_det / sp.initial_det) + 1e-9);
        CHECK(sp.final_det <= 1.0 + 1e-12);
        const Eigen::LDLT<Mat> s(sp.S);
        for (const auto& x : dist.support) {
            CHECK(spanner_coefficients(sp, x).cwiseAbs().maxCoeff() <= 2.0 + 1e-9);
            CHECK(x.dot(s.solve(x)) <= 4.0 * d + 1e-9);
        }
        auto p = make_predictor(sp.S, 1, dist.support);
        for (int i = 0; i < 200; ++i) {
            const Vec x = sample_context(dist, rng);
            predictor_update(p, x, 0, 2.0 * uniform01(rng) - 1.0);
            CHECK(p.m[0].dot(sp.S * p.m[0]) <= d + 1e-9);
        }
    }
}

}  // TEST_SUITE
