#pragma once

// Comparison policies: Adaptive-RealLinExp3 (known covariance, feedback
// observed with probability q_t), per-arm OFUL, and uniform random.

#include "bobw/estimators.hpp"
#include "bobw/ftrl_lc.hpp"
#include "bobw/policy.hpp"

namespace bobw {

struct RealLinExp3State {
    Mat cum_theta_hat;  // d x K
    std::vector<double> q_history;
    double inv_q_sum = 0.0;
    double min_q = 1.0;
    double eta = 0.0;
    double gamma = 0.0;
    int num_actions = 2;
    double lambda_min = 1.0;
    double c() const { return num_actions / lambda_min; }
};

struct Rates {
    double eta = 0.0;
    double gamma = 0.0;
};

// eta_t = min{ sqrt(log K / sum 1/q_s), min_s q_s / (2c) }, gamma_t = c eta_t / q_t.
Rates reallinexp3_rates(const RealLinExp3State& state);

// Requires a finite support: Sigma_{t,a} is recomputed exactly every round.
class RealLinExp3 {
public:
    RealLinExp3(const ContextDistribution& dist, int num_actions, double lambda_min);

    // Starts round t with update probability q_t and samples an action.
    int act(const Vec& x, double q, Rng& rng);
    // upd = 1 when the loss was observed (with probability q_t).
    void feedback(const Vec& x, int action, double loss, int upd);

    const RealLinExp3State& state() const { return state_; }
    const PolicyDistribution& last_pi() const { return pi_; }
    const Vec& last_estimate() const { return last_estimate_; }
    int last_action() const { return last_action_; }

private:
    const ContextDistribution* dist_;
    RealLinExp3State state_;
    double q_ = 1.0;
    PolicyDistribution pi_;
    Vec last_estimate_;
    int last_action_ = -1;
};

class RealLinExp3Policy final : public Policy {
public:
    RealLinExp3Policy(const ContextDistribution& dist, int num_actions, double lambda_min)
        : learner_(dist, num_actions, lambda_min) {}
    std::string name() const override { return "reallinexp3"; }
    int act(const Vec& x, Rng& rng) override { return learner_.act(x, 1.0, rng); }
    void observe(const Vec& x, int action, double loss, Rng&) override { learner_.feedback(x, action, loss, 1); }
    std::vector<std::string> diagnostic_names() const override { return {"eta", "gamma"}; }
    std::vector<double> diagnostics() const override { return {learner_.state().eta, learner_.state().gamma}; }
    const RealLinExp3& learner() const { return learner_; }

private:
    RealLinExp3 learner_;
};

struct OfulState {
    std::vector<Mat> cov;
    std::vector<Eigen::LLT<Mat>> cov_factor;
    std::vector<Vec> cum_b;
    std::vector<Vec> theta_hat;
    double lambda_reg = 1.0;
    double delta = 0.05;
    long t = 0;
};

OfulState make_oful_state(int num_actions, int dim, double lambda_reg, double delta);
double oful_radius(const OfulState& state, int dim);
// argmin_a <theta_hat_a, x> - rad_t ||x||_{cov_a^{-1}}, ties to the lowest index.
int oful_predict(const OfulState& state, const Vec& x);
void oful_update(OfulState& state, const Vec& x, int action, double loss);

class OfulPolicy final : public Policy {
public:
    OfulPolicy(int num_actions, int dim, double lambda_reg = 1.0, double delta = 0.05)
        : state_(make_oful_state(num_actions, dim, lambda_reg, delta)) {}
    std::string name() const override { return "oful"; }
    int act(const Vec& x, Rng&) override { return oful_predict(state_, x); }
    void observe(const Vec& x, int action, double loss, Rng&) override { oful_update(state_, x, action, loss); }
    std::vector<std::string> diagnostic_names() const override { return {"radius"}; }
    std::vector<double> diagnostics() const override { return {oful_radius(state_, static_cast<int>(state_.cum_b[0].size()))}; }
    const OfulState& state() const { return state_; }

private:
    OfulState state_;
};

class UniformPolicy final : public Policy {
public:
    explicit UniformPolicy(int num_actions) : k_(num_actions) {}
    std::string name() const override { return "uniform"; }
    int act(const Vec&, Rng& rng) override { return std::uniform_int_distribution<int>(0, k_ - 1)(rng); }
    void observe(const Vec&, int, double, Rng&) override {}

private:
    int k_;
};

}  // namespace bobw
