#pragma once

// Black-box best-of-both-worlds reduction: an epoch-restarting wrapper over a
// learner that takes a candidate action, and the two-point Corral learners
// (importance-weighted with a Tsallis/log-barrier hybrid, and data-dependent
// with a log-barrier) that turn a stable base into such a learner.

#include "bobw/baselines.hpp"
#include "bobw/mwu.hpp"

#include <array>
#include <functional>
#include <memory>
#include <optional>

namespace bobw {

// A learner initialized with a candidate action, advanced one round at a time.
class LsbLearner {
public:
    virtual ~LsbLearner() = default;
    virtual int act(const Vec& x, Rng& rng) = 0;
    virtual void observe(const Vec& x, int action, double loss, Rng& rng) = 0;
    // q_{t,1}, B_t, meta learning rate of the last round.
    virtual std::array<double, 3> meta_diagnostics() const { return {0.0, 0.0, 0.0}; }
    virtual long clip_violations() const { return 0; }
    virtual long extra_draws() const { return 0; }
};

using LsbFactory = std::function<std::unique_ptr<LsbLearner>(int candidate)>;

struct EpochState {
    long k = 1;
    double t_k = 0.0;     // T_k
    double t_prev = 0.0;  // T_{k-1}; T_0 = -c2 log T is not an integer
    int candidate = 0;
    std::vector<long> pull_counts;
    long t = 0;                   // rounds completed
    std::vector<long> boundaries;  // T_1 = 0, T_2, ...
};

EpochState initial_epoch_state(int num_actions, double c2_log_t, int candidate);

// The action the next epoch would use as candidate if the switch fires after
// round t: requires t - T_k >= 2 (T_k - T_{k-1}) and some a != candidate with
// N_k(a) >= (t - T_k)/2. The largest count wins, ties to the lowest index.
std::optional<int> epoch_switch(const EpochState& state, long t);

class BobwEpochs final : public Policy {
public:
    // c2_log_t is the offset c2 log T that places T_0.
    BobwEpochs(std::string name, int num_actions, double c2_log_t, LsbFactory factory, int first_candidate);

    std::string name() const override { return name_; }
    int act(const Vec& x, Rng& rng) override { return learner_->act(x, rng); }
    void observe(const Vec& x, int action, double loss, Rng& rng) override;
    std::vector<std::string> diagnostic_names() const override;
    std::vector<double> diagnostics() const override;
    long invariant_violations() const override { return clip_violations_ + learner_->clip_violations(); }
    long extra_draws() const override { return finished_draws_ + learner_->extra_draws(); }

    const EpochState& epochs() const { return state_; }

private:
    std::string name_;
    LsbFactory factory_;
    EpochState state_;
    std::unique_ptr<LsbLearner> learner_;
    long clip_violations_ = 0;
    long finished_draws_ = 0;
    std::array<double, 3> last_meta_{0.0, 0.0, 0.0};
};

// --- two-point Corral ------------------------------------------------------

// psi(q) = -(2/eta) sum sqrt(q_i) + (1/beta) sum log(1/q_i) plus <q, L>.
double corral_objective_iw(double q1, double l1, double l2, double eta, double beta);
// psi(q) = sum (1/eta_i) log(1/q_i) plus <q, L>.
double corral_objective_dd(double q1, double l1, double l2, double eta1, double eta2);

inline constexpr int kCorralBisectionIterations = 200;

// Minimizers over the 2-simplex via bisection on the (increasing) derivative in q_1.
std::array<double, 2> corral_argmin_iw(double l1, double l2, double eta, double beta);
std::array<double, 2> corral_argmin_dd(double l1, double l2, double eta1, double eta2);

// q_t = (1 - 1/(2t^2)) q_bar + 1/(4t^2).
std::array<double, 2> corral_clip(const std::array<double, 2>& q_bar, long t);

enum class CorralMode { Iw, Dd };

struct CorralState {
    CorralMode mode = CorralMode::Iw;
    std::array<double, 2> z_sum{0.0, 0.0};
    std::array<double, 2> y{0.0, 0.0};  // dd only, current round predictions
    double bonus = 0.0;                 // B_{t-1}
    double c1 = 1.0;
    double c2 = 1.0;
    long horizon = 2;
    // iw: sum 1/q_{tau,2}; dd: sum xi^2 1{i=2} / q_{tau,2}^2.
    double bonus_sum = 0.0;
    double min_q2 = 1.0;
    std::array<double, 2> deviation_sum{0.0, 0.0};  // dd only
    std::array<double, 2> eta{0.0, 0.0};
    double beta = 0.0;
    std::array<double, 2> q{0.5, 0.5};
    long t = 0;
};

// Sets eta (and beta) for round t and returns the clipped q_t.
std::array<double, 2> corral_meta_distribution(CorralState& state, long t);

// z_{t,i} = (loss + 1) 1{i_t = i} / q_{t,i} - 1.
std::array<double, 2> corral_iw_losses(const std::array<double, 2>& q, int meta_arm, double loss);
// z_{t,i} = (loss - y_i) 1{i_t = i} / q_{t,i} + y_i.
std::array<double, 2> corral_dd_losses(const std::array<double, 2>& q, const std::array<double, 2>& y, int meta_arm, double loss);

// Global actions other than `candidate`, in increasing order.
std::vector<int> arms_excluding(int num_actions, int candidate);

// Constants for the Adaptive-RealLinExp3 base: c1 = 36 log K K^2 (d + 1/lambda)^2, c2 = 2 K log K / lambda.
std::array<double, 2> reallinexp3_stability_constants(int num_actions, int dim, double lambda_min);
// Constants for the MWU-LC base: kappa = 32 K d log(10 d K T) log T, c1 = kappa^2, c2 = kappa sqrt(50 d K).
std::array<double, 2> mwu_stability_constants(int num_actions, int dim, long horizon);

class CorralIw final : public LsbLearner {
public:
    CorralIw(const ContextDistribution& dist, int num_actions, int candidate, double lambda_min, double c1, double c2, long horizon);
    int act(const Vec& x, Rng& rng) override;
    void observe(const Vec& x, int action, double loss, Rng& rng) override;
    std::array<double, 3> meta_diagnostics() const override { return {state_.q[0], state_.bonus, state_.eta[0]}; }
    long clip_violations() const override { return clip_violations_; }
    const CorralState& state() const { return state_; }

private:
    int candidate_;
    std::vector<int> arm_map_;
    RealLinExp3 base_;
    CorralState state_;
    int meta_arm_ = 0;
    int base_local_ = 0;
    long clip_violations_ = 0;
};

class CorralDd final : public LsbLearner {
public:
    // The predictor is shared across epochs; this learner updates it with
    // every observed loss.
    CorralDd(const ContextDistribution& dist, int num_actions, int candidate, std::shared_ptr<PredictorState> predictor,
             double c1, double c2, long horizon, MwuOptions options);
    int act(const Vec& x, Rng& rng) override;
    void observe(const Vec& x, int action, double loss, Rng& rng) override;
    std::array<double, 3> meta_diagnostics() const override { return {state_.q[0], state_.bonus, state_.eta[0]}; }
    long clip_violations() const override { return clip_violations_; }
    const CorralState& state() const { return state_; }

private:
    int candidate_;
    std::vector<int> arm_map_;
    std::shared_ptr<PredictorState> predictor_;
    MwuLc base_;
    CorralState state_;
    int meta_arm_ = 0;
    int base_local_ = 0;
    long clip_violations_ = 0;
};

struct ReductionOptions {
    std::optional<double> c1;  // overrides of the base stability constants
    std::optional<double> c2;
    MwuOptions mwu;
};

// Epoch wrapper + iw-Corral + Adaptive-RealLinExp3 (finite support).
std::unique_ptr<BobwEpochs> make_bobw_iw(const ContextDistribution& dist, int num_actions, double lambda_min, long horizon,
                                         Rng& rng, const ReductionOptions& options = {});
// Epoch wrapper + dd-Corral + MWU-LC with spanner-regularized predictors.
std::unique_ptr<BobwEpochs> make_bobw_dd(const ContextDistribution& dist, int num_actions, long horizon, Rng& rng,
                                         const ReductionOptions& options = {});

}  // namespace bobw
