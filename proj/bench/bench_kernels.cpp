// Wall-clock comparison of the serial reference kernels against the OpenMP
// versions. Results must match bit for bit; the timings are printed.

#include "bobw/kernels.hpp"
#include "bobw/mwu.hpp"

#include <chrono>
#include <cstdio>

using namespace bobw;

namespace {

template <class F>
double seconds(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* name, double serial, double parallel, bool same) {
    std::printf("%-22s serial %8.3f s  parallel %8.3f s  speedup %5.2fx  %s\n", name, serial, parallel, serial / parallel,
                same ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
    std::printf("threads: %d\n", available_threads());
    Rng inst = make_rng(1);
    const auto dist = ContextDistribution::random_finite(4, 20, inst);

    PolicyFn policy = [](const double* x, double* out) {
        const double a = std::exp(x[0]), b = std::exp(-x[1]);
        out[0] = a / (a + b);
        out[1] = b / (a + b);
    };
    const FinitePolicyTable table(dist, policy, 2);
    MgrMoments ms, mp;
    const double s1 = seconds([&] { ms = mgr_moments(table, 0, 400, 20'000, 5, Exec::Serial); });
    const double p1 = seconds([&] { mp = mgr_moments(table, 0, 400, 20'000, 5, Exec::Parallel); });
    report("mgr_moments", s1, p1, ms.mean == mp.mean && ms.variance == mp.variance);

    TruncationSpec trunc;
    trunc.sigma_bar_inv = {4.0 * Mat::Identity(4, 4), 4.0 * Mat::Identity(4, 4)};
    trunc.threshold = 4 * 2 * std::pow(truncation_level(4, 2, 100), 2);
    CoeffFn coeff = [](const Vec& x) { return Vec(x.head(2)); };
    CovarianceEstimates cs, cp;
    const double s2 = seconds([&] { cs = estimate_covariances(dist, coeff, trunc, 2, 20'000, kBurnInPerArm, 5, Exec::Serial); });
    const double p2 = seconds([&] { cp = estimate_covariances(dist, coeff, trunc, 2, 20'000, kBurnInPerArm, 5, Exec::Parallel); });
    bool same = cs.rejections == cp.rejections;
    for (int a = 0; a < 2; ++a) same = same && cs.sigma_bar[a] == cp.sigma_bar[a] && cs.sigma_tilde[a] == cp.sigma_tilde[a];
    report("estimate_covariances", s2, p2, same);
    return 0;
}
