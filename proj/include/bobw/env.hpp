#pragma once

// Context distributions, loss models for the supported regimes, and the
// second-moment information the learners consume.

#include "bobw/types.hpp"

#include <functional>
#include <optional>

namespace bobw {

enum class ContextKind { FiniteUniform, SphericalNormal };

struct ContextDistribution {
    ContextKind kind = ContextKind::SphericalNormal;
    int dim = 1;
    double per_coordinate_variance = 0.3;
    std::vector<Vec> support;  // FiniteUniform only; unit norm

    static ContextDistribution finite_uniform(std::vector<Vec> support);
    // `n` normalized N(0, variance) draws, fixed once.
    static ContextDistribution random_finite(int dim, int n, Rng& rng, double variance = 0.3);
    static ContextDistribution spherical_normal(int dim, double variance = 0.3);

    bool finite() const { return kind == ContextKind::FiniteUniform; }
    int size() const { return static_cast<int>(support.size()); }
};

Vec sample_context(const ContextDistribution& dist, Rng& rng);
// Writes a unit-norm context into `out` (length dist.dim); returns the support
// index for finite distributions and -1 otherwise.
int sample_context_into(const ContextDistribution& dist, Rng& rng, double* out);

enum class Regime { Adversarial, Stochastic, CorruptedStochastic, StochasticPhase };

const char* regime_name(Regime r);
std::optional<Regime> parse_regime(const std::string& s);

// Oblivious adversary: theta_{t,a} for every action at round t (1-based).
using ThetaSchedule = std::function<std::vector<Vec>(long t)>;

struct LossModel {
    Regime regime = Regime::Stochastic;
    int num_actions = 2;
    int dim = 1;
    std::vector<Vec> theta;  // stochastic kinds
    long corruption_horizon = 0;
    double phase_factor = 1.6;
    double phase_gap = 0.125;
    long phase_initial_length = 10;
    int phase_optimal_arm = 0;
    double noise_std = 0.5477225575051661;  // sqrt(0.3)
    ThetaSchedule schedule;                  // Adversarial only

    static constexpr long kMaxRejections = 1'000'000;
};

std::vector<Vec> generate_stochastic_theta(int num_actions, int dim, Rng& rng);

// Phase index (0-based) containing round t for the StochasticPhase schedule.
long phase_index(const LossModel& model, long t);

// Noiseless expected loss (before the truncation that rejection sampling
// induces); this is the quantity pseudo-regret is measured in.
double expected_loss(const LossModel& model, long t, const Vec& x, int action);

// One loss draw in [-1, 1]. Noise is resampled until the total lands in range.
double loss(const LossModel& model, long t, const Vec& x, int action, Rng& rng);

// E[Y | -1 <= Y <= 1] for Y ~ N(mean, sd^2): the mean of what `loss` emits.
double truncated_noise_mean(double mean, double sd);

struct SecondMomentInfo {
    Mat sigma;
    double lambda_min = 0.0;
    bool exact = false;
};

// Exact over a finite support; Monte-Carlo (mc_samples draws) otherwise.
SecondMomentInfo second_moment(const ContextDistribution& dist, long mc_samples, Rng& rng);

// The per-context comparator. For stochastic kinds the argmin of <x, theta_a>
// (rejection-truncated means are monotone in <x, theta_a>, so the argmin is
// unchanged by truncation); for the phase schedule the fixed optimal arm; for
// a generic adversary the argmin of <x, sum_t theta_{t,a}> over the horizon.
class OptimalPolicy {
public:
    OptimalPolicy(const LossModel& model, long horizon);
    int operator()(const Vec& x) const;

private:
    Regime regime_;
    int fixed_arm_ = 0;
    std::vector<Vec> directions_;
};

int optimal_action(const LossModel& model, const Vec& x, long horizon = 1);

}  // namespace bobw
