#include "bobw/estimators.hpp"
#include "bobw/kernels.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace bobw;
using bobw::test::basis;
using bobw::test::vec;

namespace {

ContextDistribution four_contexts() {
    return ContextDistribution::finite_uniform(
        {vec({1.0, 0.0}), vec({0.0, 1.0}), vec({std::sqrt(0.5), std::sqrt(0.5)}), vec({0.6, -0.8})});
}

void fixed_policy(const double* x, double* p) {
    // Context-dependent but fixed: K = 3.
    const double s = 0.5 + 0.4 * x[0];
    p[0] = 0.5 * s;
    p[1] = 0.5 * (1.0 - s);
    p[2] = 0.5;
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("uniform policy on an orthonormal support") {
    const auto dist = ContextDistribution::finite_uniform({basis(3, 0), basis(3, 1), basis(3, 2)});
    PolicyFn pi = [](const double*, double* p) { p[0] = p[1] = 0.5; };
    const auto cov = exact_arm_covariance(dist, pi, 2, 1);
    CHECK((cov.matrix - Mat::Identity(3, 3) / 6.0).norm() < 1e-15);
}

TEST_CASE("point-mass policy gives the context second moment") {
    const auto dist = four_contexts();
    PolicyFn pi = [](const double*, double* p) { p[0] = 1.0; p[1] = 0.0; };
    Mat sigma = Mat::Zero(2, 2);
    for (const auto& x : dist.support) sigma += x * x.transpose() / 4.0;
    CHECK((exact_arm_covariance(dist, pi, 2, 0).matrix - sigma).norm() < 1e-15);
}

TEST_CASE("exact arm covariance matches enumeration of (context, arm) pairs") {
    Rng rng = make_rng(6);
    const auto dist = ContextDistribution::random_finite(2, 4, rng);
    std::vector<std::array<double, 3>> table(4);
    for (auto& row : table) {
        double s = 0.0;
        for (auto& v : row) s += (v = uniform01(rng) + 0.05);
        for (auto& v : row) v /= s;
    }
    int idx = 0;
    PolicyFn pi = [&](const double*, double* p) {
        for (int a = 0; a < 3; ++a) p[a] = table[idx][a];
        ++idx;
    };
    FinitePolicyTable tab(dist, pi, 3);
    for (int a = 0; a < 3; ++a) {
        Mat brute = Mat::Zero(2, 2);
        for (int i = 0; i < 4; ++i)
            for (int b = 0; b < 3; ++b)
                if (b == a) brute += 0.25 * table[i][b] * dist.support[i] * dist.support[i].transpose();
        CHECK((exact_arm_covariance(tab, a).matrix - brute).norm() < 1e-15);
    }
}

TEST_CASE("mgr with zero iterations is rho I") {
    const auto dist = four_contexts();
    PolicyFn pi = [](const double*, double* p) { p[0] = p[1] = 0.5; };
    FinitePolicyTable tab(dist, pi, 2);
    Rng rng = make_rng(1);
    CHECK((mgr(tab, 0, 0, rng).matrix - 0.5 * Mat::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("mgr mean at M = 3 with identity covariance") {
    const auto dist = ContextDistribution::finite_uniform({vec({1.0}), vec({-1.0})});
    PolicyFn pi = [](const double*, double* p) { p[0] = 1.0; p[1] = 0.0; };
    FinitePolicyTable tab(dist, pi, 2);
    const auto mom = mgr_moments(tab, 0, 3, 100'000, 21, Exec::Serial);
    // Sigma = I so every draw hits: the output is deterministic.
    CHECK(mom.mean(0, 0) == doctest::Approx(0.9375).epsilon(1e-14));
    CHECK(mgr_expected_output(Mat::Identity(1, 1), 3)(0, 0) == doctest::Approx(0.9375).epsilon(1e-14));
}

TEST_CASE("mgr draws stay within the operator-norm cap and the mean is symmetric") {
    const auto dist = four_contexts();
    PolicyFn pi = [](const double*, double* p) { p[0] = 0.3; p[1] = 0.7; };
    FinitePolicyTable tab(dist, pi, 2);
    Rng rng = make_rng(2);
    for (long m : {1L, 4L, 20L, 100L}) {
        for (int r = 0; r < 50; ++r) {
            const Mat out = mgr(tab, 1, m, rng).matrix;
            // A single draw is a product of non-commuting factors.
            CHECK(operator_norm(out) <= 0.5 * (m + 1) + 1e-12);
        }
        const Mat e = mgr_expected_output(exact_arm_covariance(tab, 1).matrix, m);
        CHECK((e - e.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("vector mode equals matrix mode for identical streams") {
    const auto dist = four_contexts();
    PolicyFn pi = [](const double*, double* p) { p[0] = 0.4; p[1] = 0.6; };
    FinitePolicyTable tab(dist, pi, 2);
    PolicyResampler res(dist, pi, 2);
    const Vec x = dist.support[3];
    for (long m : {0L, 1L, 7L, 300L}) {
        Rng a = make_rng(m + 1), b = make_rng(m + 1);
        CHECK((mgr(tab, 0, m, a).matrix * x - mgr_apply(tab, 0, m, x, b)).norm() <= 1e-12);
        Rng c = make_rng(m + 2), e = make_rng(m + 2);
        CHECK((mgr(res, 0, m, c).matrix * x - mgr_apply(res, 0, m, x, e)).norm() <= 1e-12);
    }
}

TEST_CASE("closed-form mgr mean") {
    CHECK((mgr_expected_output(Mat::Identity(2, 2), 0) - 0.5 * Mat::Identity(2, 2)).norm() == 0.0);
    Mat s = Mat::Zero(2, 2);
    s.diagonal() << 1.0, 0.5;
    const Mat lim = mgr_expected_output(s, 200);
    CHECK(std::abs(lim(0, 0) - 1.0) < 1e-8);
    CHECK(std::abs(lim(1, 1) - 2.0) < 1e-8);
    // Singular direction: the series gives rho (M + 1).
    Mat z = Mat::Zero(2, 2);
    z(0, 0) = 1.0;
    CHECK(mgr_expected_output(z, 9)(1, 1) == doctest::Approx(5.0));
}

TEST_CASE("mgr bias contraction on diagonal covariances") {
    Mat s = Mat::Zero(3, 3);
    s.diagonal() << 0.9, 0.4, 0.15;
    for (long m : {1L, 5L, 20L}) {
        const double lhs = operator_norm(mgr_expected_output(s, m) * s - Mat::Identity(3, 3));
        CHECK(lhs <= std::pow(1.0 - 0.5 * 0.15, m) + 1e-12);
    }
}

TEST_CASE("biased estimator") {
    const Mat id = Mat::Identity(2, 2);
    CHECK(biased_theta(id, basis(2, 0), 1.0, 1, 0).vector.isZero());
    CHECK((biased_theta(id, basis(2, 0), -1.0, 0, 0).vector + basis(2, 0)).norm() == 0.0);
    CHECK(biased_theta(id, basis(2, 0), -1.0, 0, 0).biased);
}

TEST_CASE("unbiased estimator basics") {
    const Mat id = Mat::Identity(2, 2);
    CHECK(unbiased_theta(id, basis(2, 1), 1.0, 0, 0, 0, 0.5).vector.isZero());
    CHECK((unbiased_theta(id, basis(2, 1), 1.0, 0, 0, 1, 1.0).vector - basis(2, 1)).norm() == 0.0);
    CHECK_THROWS_AS(unbiased_theta(id, basis(2, 1), 1.0, 0, 0, 1, 0.0), std::invalid_argument);
}

TEST_CASE("unbiased estimator mean over a fixed policy") {
    const auto dist = four_contexts();
    FinitePolicyTable tab(dist, fixed_policy, 3);
    const Vec theta = vec({0.3, -0.5});
    Rng rng = make_rng(12);
    std::vector<Mat> inv;
    for (int a = 0; a < 3; ++a) inv.push_back(exact_arm_covariance(tab, a).matrix.inverse());
    std::vector<bobw::test::Moments> mom(3);
    Vec x(2);
    for (int r = 0; r < 200'000; ++r) {
        const int act = tab.draw(rng, x.data());
        const double l = theta.dot(x);
        for (int a = 0; a < 3; ++a) mom[a].add(unbiased_theta(inv[a], x, l, act, a, 1, 1.0).vector);
    }
    for (int a = 0; a < 3; ++a) CHECK(bobw::test::within_se(mom[a], theta));
}

TEST_CASE("estimates are orthogonal on basis supports") {
    const auto dist = ContextDistribution::finite_uniform({basis(3, 0), basis(3, 1), basis(3, 2)});
    PolicyFn pi = [](const double* x, double* p) {
        p[0] = 0.2 + 0.5 * x[0];
        p[1] = 1.0 - p[0];
    };
    FinitePolicyTable tab(dist, pi, 2);
    Rng rng = make_rng(3);
    for (int j = 0; j < 3; ++j) {
        const Vec x = basis(3, j);
        const Vec est = mgr_apply(tab, 0, 200, x, rng);
        for (int i = 0; i < 3; ++i)
            if (i != j) CHECK(est(i) == 0.0);
    }
}

}  // TEST_SUITE
