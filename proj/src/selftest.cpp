#include "bobw/selftest.hpp"

#include "bobw/baselines.hpp"
#include "bobw/ftrl_lc.hpp"
#include "bobw/harness.hpp"
#include "bobw/mwu.hpp"
#include "bobw/reduction.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

namespace bobw {

namespace {

ContextDistribution two_context_support() {
    Vec a(2), b(2);
    a << 1.0, 0.0;
    b << std::sqrt(0.5), std::sqrt(0.5);
    return ContextDistribution::finite_uniform({a, b});
}

bool mgr_mean_check() {
    const auto dist = two_context_support();
    PolicyFn pi = [](const double*, double* p) { p[0] = 0.3; p[1] = 0.7; };
    FinitePolicyTable table(dist, pi, 2);
    const Mat sigma = exact_arm_covariance(table, 0).matrix;
    const long m = 5, runs = 20'000;
    const auto mom = mgr_moments(table, 0, m, runs, 7, Exec::Serial);
    const Mat expected = mgr_expected_output(sigma, m);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            if (std::abs(mom.mean(i, j) - expected(i, j)) > 4.0 * std::sqrt(mom.variance(i, j) / runs) + 1e-12) return false;
    return true;
}

bool corral_solver_check() {
    Rng rng = make_rng(11);
    for (int c = 0; c < 10; ++c) {
        const double l1 = 20.0 * (uniform01(rng) - 0.5), l2 = 20.0 * (uniform01(rng) - 0.5);
        const double eta = 0.01 + uniform01(rng), beta = 0.01 + uniform01(rng);
        const double q = corral_argmin_iw(l1, l2, eta, beta)[0];
        double best = q, best_v = corral_objective_iw(q, l1, l2, eta, beta);
        for (int i = 1; i < 100'000; ++i) {
            const double g = i / 100'000.0;
            const double v = corral_objective_iw(g, l1, l2, eta, beta);
            if (v < best_v) best = g, best_v = v;
        }
        if (std::abs(best - q) > 2e-5) return false;
    }
    return true;
}

bool sampler_check() {
    Rng rng = make_rng(5);
    const double c = 2.0;
    Vec coeff(2);
    coeff << c, 0.0;
    const int n = 20'000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = sample_exp_weights(coeff, rng)(0);
        sum += r;
        sq += r * r;
    }
    const double mean = sum / n, sd = std::sqrt(sq / n - mean * mean);
    const double exact = (std::exp(c) * (c - 1.0) + 1.0) / (c * (std::exp(c) - 1.0));
    return std::abs(mean - exact) <= 4.0 * sd / std::sqrt(static_cast<double>(n));
}

bool spanner_check() {
    Rng rng = make_rng(3);
    const auto dist = ContextDistribution::random_finite(4, 50, rng);
    const auto sp = barycentric_spanner(dist.support);
    for (const auto& x : dist.support)
        if (spanner_coefficients(sp, x).cwiseAbs().maxCoeff() > 2.0 + 1e-9) return false;
    return true;
}

bool ftrl_run_check() {
    ExperimentConfig c;
    c.policies = {"ftrl_lc"};
    c.horizon = 500;
    c.replications = 1;
    const auto traces = run(c);
    return traces.size() == 1 && traces[0].error.empty() && traces[0].invariant_violations == 0;
}

bool determinism_per_policy() {
    ExperimentConfig c;
    c.horizon = 300;
    c.replications = 2;
    for (const std::string p : {"ftrl_lc", "oful"}) {
        c.policies = {p};
        std::ostringstream a, b;
        write_csv(run(c), a);
        write_csv(run(c), b);
        if (a.str() != b.str()) return false;
        std::istringstream in(a.str());
        const auto parsed = parse_csv(in);
        std::ostringstream again;
        write_csv(parsed, again);
        if (again.str() != a.str()) return false;
    }
    return true;
}

}  // namespace

int run_selftest(std::ostream& out) {
    const std::pair<const char*, std::function<bool()>> checks[] = {
        {"mgr mean matches closed form", mgr_mean_check},
        {"corral argmin matches grid search", corral_solver_check},
        {"hit-and-run mean matches 1-D closed form", sampler_check},
        {"spanner coefficients within [-2, 2]", spanner_check},
        {"ftrl_lc short run without invariant violations", ftrl_run_check},
        {"identical seeds give identical CSV, CSV round-trips", determinism_per_policy},
    };
    int failed = 0;
    for (const auto& [name, fn] : checks) {
        bool ok = false;
        try {
            ok = fn();
        } catch (const std::exception& e) {
            out << "  error: " << e.what() << '\n';
        }
        out << (ok ? "PASS " : "FAIL ") << name << '\n';
        failed += ok ? 0 : 1;
    }
    return failed;
}

}  // namespace bobw
