#include "bobw/ftrl_lc.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace bobw;
using bobw::test::basis;
using bobw::test::vec;

TEST_SUITE("ftrl_lc") {

TEST_CASE("softmax of equal losses is uniform") {
    const Mat cum = Mat::Constant(2, 4, 0.7);
    for (double p : ftrl_probabilities(vec({0.6, 0.8}), cum, 0.3).probs) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("softmax with a ln 2 / eta gap") {
    const double eta = 0.2;
    Mat cum = Mat::Zero(1, 2);
    cum(0, 1) = std::log(2.0) / eta;
    const auto p = ftrl_probabilities(vec({1.0}), cum, eta).probs;
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax is invariant to a common shift") {
    Rng rng = make_rng(4);
    const Vec x = vec({0.6, 0.8});
    Mat cum = Mat::Random(2, 3) * 50.0;
    const auto p = ftrl_probabilities(x, cum, 0.1).probs;
    // Shift every arm's <x, .> by the same amount, chosen so the stabilized
    // logits are unchanged.
    Mat shifted = cum;
    shifted.colwise() += 3.0 * x;
    const auto q = ftrl_probabilities(x, shifted, 0.1).probs;
    for (int a = 0; a < 3; ++a) CHECK(p[a] == doctest::Approx(q[a]).epsilon(1e-12));
    double total = 0.0;
    for (double v : p) total += v;
    CHECK(std::abs(total - 1.0) <= 1e-12);
}

TEST_CASE("uniform mixing") {
    PolicyDistribution p{{1.0, 0.0, 0.0, 0.0}};
    const auto m = mix_with_uniform(p, 0.5).probs;
    CHECK(m[0] == doctest::Approx(0.625));
    for (int a = 1; a < 4; ++a) CHECK(m[a] == doctest::Approx(0.125));
    CHECK(mix_with_uniform(p, 0.0).probs == p.probs);
    PolicyDistribution u{{0.25, 0.25, 0.25, 0.25}};
    for (double v : mix_with_uniform(u, 0.37).probs) CHECK(v == doctest::Approx(0.25));
    CHECK_THROWS(mix_with_uniform(p, 0.6));
}

TEST_CASE("Shannon entropy") {
    CHECK(shannon_entropy({{0.25, 0.25, 0.25, 0.25}}) == doctest::Approx(std::log(4.0)));
    CHECK(shannon_entropy({{1.0, 0.0}}) == 0.0);
    CHECK(shannon_entropy({{0.75, 0.25}}) == doctest::Approx(0.562335).epsilon(1e-6));
}

TEST_CASE("rate constants") {
    const auto c = FtrlLcConstants::make(2, 2, static_cast<long>(std::round(std::exp(4.0))), 0.5);
    // T must be an integer, so log T differs from 4 by log(55 / e^4).
    const double log_t = std::log(55.0);
    CHECK(c.c2 == doctest::Approx(32.0));
    CHECK(c.c1 == doctest::Approx(std::sqrt((12.0 + 8.0 * log_t) * log_t / std::log(2.0))));
    // The exact e^4 evaluation by hand.
    CHECK(std::sqrt((12.0 + 32.0) * 4.0 / std::log(2.0)) == doctest::Approx(15.936).epsilon(1e-4));
}

TEST_CASE("first round has no exploration") {
    const auto s = initial_ftrl_state(FtrlLcConstants::make(3, 2, 1000, 0.4));
    CHECK(s.gamma == 0.0);
    CHECK(s.m_iters == 1);
    CHECK(s.eta > 0.0);
    CHECK(s.eta <= 0.5);
}

TEST_CASE("MGR iteration count") {
    CHECK(mgr_iterations(0.3, 1, 2, 0.5) == 1);
    CHECK(mgr_iterations(0.0, 10, 2, 0.5) == 1);
    CHECK(mgr_iterations(0.5, 3, 4, 1.0) == static_cast<long>(std::ceil(32.0 * std::log(3.0))));
    // t = e is not an integer; the formula itself gives 32 there.
    CHECK(std::ceil(4.0 * 4 / (0.5 * 1.0) * std::log(std::exp(1.0))) == 32.0);
    for (long t = 1; t < 100; ++t) CHECK(mgr_iterations(0.5, t, 2, 0.9) >= 1);
}

TEST_CASE("rate schedule invariants over many rounds") {
    auto s = initial_ftrl_state(FtrlLcConstants::make(3, 4, 100'000, 0.2));
    Rng rng = make_rng(1);
    for (long t = 1; t < 100'000; ++t) {
        const double prev = s.beta_prime;
        s = update_rates(std::move(s), uniform01(rng) * std::log(3.0));
        CHECK(s.beta_prime > prev);
        CHECK(s.eta > 0.0);
        CHECK(s.eta <= 0.5);
        CHECK(s.gamma >= 0.0);
        CHECK(s.gamma <= 0.5);
        CHECK(s.entropy_sum <= t * std::log(3.0) + 1e-9);
        const double tt = static_cast<double>(s.t);
        CHECK(std::exp(-s.gamma * 0.2 * s.m_iters / 6.0) <= (1.0 + 1e-12) / (tt * tt));
    }
}

TEST_CASE("round one plays uniformly") {
    Rng rng = make_rng(2);
    const auto dist = ContextDistribution::random_finite(2, 10, rng);
    FtrlLc learner(dist, FtrlLcConstants::make(3, 2, 1000, 0.2));
    learner.act(dist.support[0], rng);
    for (double p : learner.last_pi().probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("a short run keeps every invariant and is deterministic") {
    Rng inst = make_rng(3);
    const auto dist = ContextDistribution::random_finite(2, 20, inst);
    LossModel model;
    model.dim = 2;
    model.theta = generate_stochastic_theta(2, 2, inst);
    Rng r1 = make_rng(9), r2 = make_rng(9);
    FtrlLcOptions o;
    o.throw_on_violation = true;
    FtrlLc a(dist, FtrlLcConstants::make(2, 2, 2000, 0.3), o), b(dist, FtrlLcConstants::make(2, 2, 2000, 0.3), o);
    for (long t = 1; t <= 2000; ++t) {
        const Vec x = sample_context(dist, r1);
        sample_context(dist, r2);
        const int aa = a.act(x, r1), ab = b.act(x, r2);
        REQUIRE(aa == ab);
        const double l = loss(model, t, x, aa, r1);
        loss(model, t, x, ab, r2);
        a.observe(x, aa, l, r1);
        b.observe(x, ab, l, r2);
        CHECK(a.last().bound_check <= 1.0);
    }
    CHECK(a.invariant_violations() == 0);
    CHECK(a.extra_draws() > 0);
}

TEST_CASE("matrix and vector MGR modes give identical learners") {
    Rng inst = make_rng(5);
    const auto dist = ContextDistribution::random_finite(2, 8, inst);
    FtrlLcOptions vo, mo;
    mo.mgr_mode = MgrMode::Matrix;
    const auto c = FtrlLcConstants::make(2, 2, 300, 0.3);
    FtrlLc v(dist, c, vo), m(dist, c, mo);
    Rng r1 = make_rng(1), r2 = make_rng(1);
    for (long t = 1; t <= 300; ++t) {
        const Vec x = dist.support[t % 8];
        const int a1 = v.act(x, r1), a2 = m.act(x, r2);
        REQUIRE(a1 == a2);
        v.observe(x, a1, 0.4, r1);
        m.observe(x, a2, 0.4, r2);
        CHECK((v.last_estimates() - m.last_estimates()).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("FTRL-LC estimates never leak across basis coordinates") {
    const auto dist = ContextDistribution::finite_uniform({basis(3, 0), basis(3, 1), basis(3, 2)});
    FtrlLc learner(dist, FtrlLcConstants::make(2, 3, 3000, 1.0 / 3.0));
    Rng rng = make_rng(4);
    for (long t = 1; t <= 3000; ++t) {
        const int j = static_cast<int>(t % 3);
        const Vec x = basis(3, j);
        const int a = learner.act(x, rng);
        learner.observe(x, a, a == 0 ? 0.2 : -0.1, rng);
        for (int arm = 0; arm < 2; ++arm)
            for (int i = 0; i < 3; ++i)
                if (i != j) REQUIRE(learner.last_estimates()(i, arm) == 0.0);
    }
}

}  // TEST_SUITE
