#pragma once

// Data-parallel Monte-Carlo kernels. Every kernel splits its work into fixed
// chunks, each driven by its own sub-stream of `seed`, and reduces the chunk
// partials in chunk order: the serial reference and the OpenMP version
// therefore return bit-identical results.

#include "bobw/estimators.hpp"

#include <functional>

namespace bobw {

enum class Exec { Serial, Parallel };

inline constexpr long kKernelChunk = 256;

// Entrywise mean and variance (population, over `runs`) of MGR outputs.
struct MgrMoments {
    Mat mean;
    Mat variance;
    long runs = 0;
    double max_operator_norm = 0.0;
};

MgrMoments mgr_moments(const ResampleSource& source, int arm, long iterations, long runs, std::uint64_t seed, Exec exec);

// Simplex covariance estimates for the continuous-weights learner.
using CoeffFn = std::function<Vec(const Vec& x)>;

struct TruncationSpec {
    std::vector<Mat> sigma_bar_inv;  // one per arm
    double threshold = 0.0;          // d K gamma~^2
    long max_rejections = 10'000;
};

struct CovarianceEstimates {
    std::vector<Mat> sigma_bar;
    std::vector<Mat> sigma_tilde;
    long rejections = 0;
};

inline constexpr double kCovarianceRidge = 1e-6;

// Mean over n_mc draws of y_a^2 X X^T (y ~ p_t(.|X)) and Q_a^2 X X^T
// (Q ~ truncated p_t(.|X)), plus a ridge floor.
CovarianceEstimates estimate_covariances(const ContextDistribution& dist, const CoeffFn& coeff, const TruncationSpec& trunc,
                                         int num_actions, long n_mc, int burn_in_per_arm, std::uint64_t seed, Exec exec);

// Runs `body(i)` for i in [0, count), serially or under OpenMP.
void parallel_for(long count, Exec exec, const std::function<void(long)>& body);

int available_threads();

}  // namespace bobw
