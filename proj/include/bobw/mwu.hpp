#pragma once

// Continuous multiplicative weights over the simplex (MWU-LC): hit-and-run
// sampling of exp(<c, r>) on Delta([K]), truncation by rejection, the
// optimistic unbiased estimator, the data-dependent learning rate, ridge loss
// predictors, and barycentric spanners for the predictor regularizer.

#include "bobw/env.hpp"
#include "bobw/kernels.hpp"
#include "bobw/policy.hpp"

#include <memory>

namespace bobw {

inline constexpr int kBurnInPerArm = 50;

// gamma~_t = 4 log(10 d K t).
double truncation_level(int dim, int num_actions, long t);

// Draw from the density proportional to exp(<coeff, r>) on the simplex:
// hit-and-run from the barycenter, burn_in_per_arm * K steps.
Vec sample_exp_weights(const Vec& coeff, Rng& rng, int burn_in_per_arm = kBurnInPerArm);

// sum_a r_a^2 ||x||^2_{Sigma_bar_a^{-1}}.
double truncation_statistic(const Vec& r, const Vec& x, const TruncationSpec& trunc);

struct TruncatedDraw {
    Vec point;
    long rejections = 0;
};

TruncatedDraw truncated_sample(const Vec& x, const Vec& coeff, const TruncationSpec& trunc, Rng& rng,
                               int burn_in_per_arm = kBurnInPerArm);

// Serial convenience wrapper over the chunked kernel.
CovarianceEstimates estimate_covariances(const ContextDistribution& dist, const CoeffFn& coeff, const TruncationSpec& trunc,
                                         int num_actions, long n_mc, Rng& rng);

// theta^_{t,a} = m_a + (upd/q) Q(a) Sigma~_a^{-1} x xi_a 1{chosen = a}, xi_a = loss - <x, m_a>.
std::vector<Vec> mwu_estimate(const Vec& q_point, const Vec& x, double loss, int chosen, const std::vector<Vec>& m,
                              const std::vector<Mat>& sigma_tilde_inv, int upd, double q);

struct MwuState {
    Mat cum_est;  // d x K
    double beta_sum_over_q = 0.0;
    double min_q = 1.0;
    long t = 0;  // current round once act() has started it
    int dim = 1;
    int num_actions = 2;
};

// eta_t = (800 d K gamma~_t^2 / min_{j<=t} q_j + sum_{j<t} beta_j / q_j)^{-1/2}.
double mwu_learning_rate(const MwuState& state);

struct PredictorState {
    Mat S;
    std::vector<Mat> design;
    std::vector<Vec> response;
    std::vector<Vec> m;
    std::vector<Vec> support;  // contexts the set M is checked on
};

PredictorState make_predictor(const Mat& S, int num_actions, const std::vector<Vec>& support);
// Regularized least squares (S + design_a) m = response_a, then scaled into
// {m : |<x, m>| <= 1 on the support}.
Vec predictor_solve(const PredictorState& state, int arm);
void predictor_update(PredictorState& state, const Vec& x, int arm, double loss);

struct Spanner {
    std::vector<int> indices;
    std::vector<Vec> basis;
    Mat S;
    Mat basis_matrix;  // columns are the basis contexts
    long swaps = 0;
    double initial_det = 0.0;
    double final_det = 0.0;
    double coeff_bound = 2.0;
};

// Determinant by fraction-free (Bareiss) elimination with row pivoting.
double fraction_free_determinant(Mat m);

Spanner barycentric_spanner(const std::vector<Vec>& support, double coeff_bound = 2.0);
Vec spanner_coefficients(const Spanner& spanner, const Vec& x);

struct MwuOptions {
    long n_mc = 2000;
    double smoothing = 0.2;
    int burn_in_per_arm = kBurnInPerArm;
    long max_rejections = 10'000;
    Exec exec = Exec::Serial;
};

struct MwuRoundDiagnostics {
    long rejections = 0;
    double eta = 0.0;
    double xi = 0.0;
    double gamma_tilde = 0.0;
    double cond_tilde = 1.0;
    double sandwich_lo = 1.0;  // eigenvalue range of Sigma~^{-1/2} Sigma_bar Sigma~^{-1/2}
    double sandwich_hi = 1.0;
};

// Base learner over `num_actions` local arms. Predictors are shared with an
// enclosing wrapper through `predictor`; `arm_map` translates local arms to
// predictor arms. When `owns_predictor` is set, observed losses update it.
// The update probability q_t is only known to the data-dependent wrapper after
// the base has proposed its action, so it arrives with the feedback and eta_t
// uses min_{j<t} q_j.
class MwuLc {
public:
    MwuLc(const ContextDistribution& dist, int num_actions, std::shared_ptr<PredictorState> predictor,
          std::vector<int> arm_map, bool owns_predictor, MwuOptions options = {});

    int act(const Vec& x, Rng& rng);
    void feedback(const Vec& x, int action, double loss, int upd, double q);
    long eta_bound_violations() const { return eta_bound_violations_; }
    const std::vector<Mat>& sigma_tilde() const { return tilde_; }
    const std::vector<Mat>& sigma_bar() const { return bar_; }

    const MwuState& state() const { return state_; }
    const MwuRoundDiagnostics& last() const { return last_; }
    const Vec& last_point() const { return point_; }
    int num_actions() const { return k_; }
    int predictor_arm(int local) const { return arm_map_[local]; }

private:
    const ContextDistribution* dist_;
    int k_;
    std::shared_ptr<PredictorState> predictor_;
    std::vector<int> arm_map_;
    bool owns_predictor_;
    MwuOptions options_;
    MwuState state_;
    Mat sigma_;
    std::vector<Mat> bar_, tilde_, tilde_inv_;
    bool have_estimates_ = false;
    double q_ = 1.0;
    Vec point_;
    std::vector<Vec> m_now_;
    MwuRoundDiagnostics last_;
    long eta_bound_violations_ = 0;
};

class MwuLcPolicy final : public Policy {
public:
    MwuLcPolicy(const ContextDistribution& dist, int num_actions, MwuOptions options = {});
    std::string name() const override { return "mwu_lc"; }
    int act(const Vec& x, Rng& rng) override { return learner_->act(x, rng); }
    void observe(const Vec& x, int action, double loss, Rng&) override { learner_->feedback(x, action, loss, 1, 1.0); }
    long invariant_violations() const override { return learner_->eta_bound_violations(); }
    std::vector<std::string> diagnostic_names() const override;
    std::vector<double> diagnostics() const override;
    const MwuLc& learner() const { return *learner_; }

private:
    std::unique_ptr<MwuLc> learner_;
};

}  // namespace bobw
