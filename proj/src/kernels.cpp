#include "bobw/kernels.hpp"
#include "bobw/mwu.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bobw {

void parallel_for(long count, Exec exec, const std::function<void(long)>& body) {
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < count; ++i) body(i);
    } else {
        for (long i = 0; i < count; ++i) body(i);
    }
}

int available_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace {

long chunk_count(long n) { return (n + kKernelChunk - 1) / kKernelChunk; }

}  // namespace

MgrMoments mgr_moments(const ResampleSource& source, int arm, long iterations, long runs, std::uint64_t seed, Exec exec) {
    const int d = source.dim();
    const long chunks = chunk_count(runs);
    struct Partial {
        Mat sum, sum_sq;
        double max_norm = 0.0;
    };
    std::vector<Partial> partials(chunks);
    parallel_for(chunks, exec, [&](long c) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(c));
        Partial& p = partials[c];
        p.sum = Mat::Zero(d, d);
        p.sum_sq = Mat::Zero(d, d);
        const long end = std::min(runs, (c + 1) * kKernelChunk);
        for (long r = c * kKernelChunk; r < end; ++r) {
            const Mat out = mgr(source, arm, iterations, rng).matrix;
            p.sum += out;
            p.sum_sq += out.cwiseProduct(out);
            p.max_norm = std::max(p.max_norm, operator_norm(out));
        }
    });
    MgrMoments m;
    m.runs = runs;
    Mat sum = Mat::Zero(d, d), sum_sq = Mat::Zero(d, d);
    for (const auto& p : partials) {
        sum += p.sum;
        sum_sq += p.sum_sq;
        m.max_operator_norm = std::max(m.max_operator_norm, p.max_norm);
    }
    const double n = static_cast<double>(runs);
    m.mean = sum / n;
    m.variance = (sum_sq / n - m.mean.cwiseProduct(m.mean)).cwiseMax(0.0);
    return m;
}

CovarianceEstimates estimate_covariances(const ContextDistribution& dist, const CoeffFn& coeff, const TruncationSpec& trunc,
                                         int num_actions, long n_mc, int burn_in_per_arm, std::uint64_t seed, Exec exec) {
    if (n_mc < 1) throw std::invalid_argument("estimate_covariances needs n_mc >= 1");
    const int d = dist.dim;
    const int k = num_actions;
    const long chunks = chunk_count(n_mc);
    struct Partial {
        std::vector<Mat> bar, tilde;
        long rejections = 0;
    };
    std::vector<Partial> partials(chunks);
    parallel_for(chunks, exec, [&](long c) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(c));
        Partial& p = partials[c];
        p.bar.assign(k, Mat::Zero(d, d));
        p.tilde.assign(k, Mat::Zero(d, d));
        Vec x(d);
        const long end = std::min(n_mc, (c + 1) * kKernelChunk);
        for (long i = c * kKernelChunk; i < end; ++i) {
            sample_context_into(dist, rng, x.data());
            const Vec cf = coeff(x);
            const Vec y = sample_exp_weights(cf, rng, burn_in_per_arm);
            const TruncatedDraw q = truncated_sample(x, cf, trunc, rng, burn_in_per_arm);
            p.rejections += q.rejections;
            const Mat xx = x * x.transpose();
            for (int a = 0; a < k; ++a) {
                p.bar[a].noalias() += (y(a) * y(a)) * xx;
                p.tilde[a].noalias() += (q.point(a) * q.point(a)) * xx;
            }
        }
    });
    CovarianceEstimates out;
    out.sigma_bar.assign(k, Mat::Zero(d, d));
    out.sigma_tilde.assign(k, Mat::Zero(d, d));
    for (const auto& p : partials) {
        for (int a = 0; a < k; ++a) {
            out.sigma_bar[a] += p.bar[a];
            out.sigma_tilde[a] += p.tilde[a];
        }
        out.rejections += p.rejections;
    }
    const Mat ridge = kCovarianceRidge * Mat::Identity(d, d);
    for (int a = 0; a < k; ++a) {
        out.sigma_bar[a] = out.sigma_bar[a] / static_cast<double>(n_mc) + ridge;
        out.sigma_tilde[a] = out.sigma_tilde[a] / static_cast<double>(n_mc) + ridge;
    }
    return out;
}

}  // namespace bobw
