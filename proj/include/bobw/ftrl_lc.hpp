#pragma once

// FTRL with Shannon entropy over K arms, uniform-exploration mixing, the
// adaptive (eta, gamma, beta, beta') schedule and the adaptive MGR iteration
// count. All logarithms are natural.

#include "bobw/estimators.hpp"
#include "bobw/policy.hpp"

namespace bobw {

struct PolicyDistribution {
    std::vector<double> probs;
};

struct FtrlLcConstants {
    int num_actions = 2;
    int dim = 1;
    long horizon = 1;
    double lambda_min = 1.0;
    double c1 = 0.0;  // c'_1
    double c2 = 0.0;  // c'_2

    // c'_1 = sqrt((3Kd + 2K log T / lambda_min) log T / log K), c'_2 = 8K / lambda_min.
    static FtrlLcConstants make(int num_actions, int dim, long horizon, double lambda_min);
};

struct FtrlLcState {
    Mat cum_theta;  // d x K, column a holds sum_{s<t} theta~_{s,a}
    double entropy_sum = 0.0;
    double beta_prime = 0.0;
    double beta = 0.0;
    double eta = 0.0;
    double gamma = 0.0;
    long m_iters = 1;
    long t = 1;
    FtrlLcConstants constants;
};

FtrlLcState initial_ftrl_state(const FtrlLcConstants& c);

// p(a) proportional to exp(-eta <x, cum_theta_a>), max-subtracted.
PolicyDistribution ftrl_probabilities(const Vec& x, const Mat& cum_theta, double eta);
void ftrl_probabilities_into(const double* x, const Mat& cum_theta, double eta, double* out);

PolicyDistribution mix_with_uniform(const PolicyDistribution& p, double gamma);
double shannon_entropy(const PolicyDistribution& p);

// Advances round t -> t+1 given H(p_t(.|X_t)).
FtrlLcState update_rates(FtrlLcState state, double entropy);

long mgr_iterations(double gamma, long t, int num_actions, double lambda_min);

enum class MgrMode { Vector, Matrix };

struct FtrlLcOptions {
    bool mgr_all_arms = true;  // run MGR for every arm (the algorithm as written)
    MgrMode mgr_mode = MgrMode::Vector;
    bool throw_on_violation = false;
};

struct FtrlRoundDiagnostics {
    long t = 0;
    double eta = 0.0;
    double gamma = 0.0;
    long m_iters = 0;
    double entropy = 0.0;
    double bound_check = 0.0;  // max_a |eta <X_t, theta~_{t,a}>|
    double bound_sup = 0.0;    // max_a eta ||theta~_{t,a}||_2, covers every ||x|| <= 1
    double bias_factor = 0.0;  // exp(-gamma lambda_min M / (2K))
};

struct FtrlInvariantCounters {
    long eta_range = 0;
    long gamma_range = 0;
    long bound = 0;
    long m_positive = 0;
    long bias = 0;
    long beta_monotone = 0;
    long entropy = 0;
    long total() const { return eta_range + gamma_range + bound + m_positive + bias + beta_monotone + entropy; }
};

// The learner. `dist` must outlive it; MGR draws fresh contexts from it.
class FtrlLc final : public Policy {
public:
    FtrlLc(const ContextDistribution& dist, const FtrlLcConstants& constants, FtrlLcOptions options = {});

    std::string name() const override { return "ftrl_lc"; }
    int act(const Vec& x, Rng& rng) override;
    void observe(const Vec& x, int action, double loss, Rng& rng) override;

    std::vector<std::string> diagnostic_names() const override;
    std::vector<double> diagnostics() const override;
    long extra_draws() const override { return extra_draws_; }
    long invariant_violations() const override { return counters_.total(); }

    const FtrlLcState& state() const { return state_; }
    const FtrlRoundDiagnostics& last() const { return last_; }
    const FtrlInvariantCounters& counters() const { return counters_; }
    const PolicyDistribution& last_p() const { return p_; }
    const PolicyDistribution& last_pi() const { return pi_; }
    // theta~_{t,a} of the last completed round, one column per arm.
    const Mat& last_estimates() const { return last_theta_; }

private:
    void policy_probs(const double* x, double* out) const;
    void violation(long& counter, const char* what);

    const ContextDistribution* dist_;
    FtrlLcOptions options_;
    FtrlLcState state_;
    PolicyDistribution p_, pi_;
    Mat last_theta_;
    FtrlRoundDiagnostics last_;
    FtrlInvariantCounters counters_;
    long extra_draws_ = 0;
};

}  // namespace bobw
