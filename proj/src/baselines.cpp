#include "bobw/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bobw {

Rates reallinexp3_rates(const RealLinExp3State& s) {
    if (s.q_history.empty()) throw std::invalid_argument("reallinexp3_rates needs at least one q_t");
    for (double q : s.q_history)
        if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("update probability outside (0, 1]");
    Rates r;
    const double log_k = std::log(static_cast<double>(s.num_actions));
    r.eta = std::min(std::sqrt(log_k / s.inv_q_sum), s.min_q / (2.0 * s.c()));
    r.gamma = s.c() * r.eta / s.q_history.back();
    return r;
}

RealLinExp3::RealLinExp3(const ContextDistribution& dist, int num_actions, double lambda_min) : dist_(&dist) {
    if (!dist.finite()) throw std::invalid_argument("RealLinExp3 needs a finite context support for exact covariances");
    if (num_actions < 1) throw std::invalid_argument("RealLinExp3 needs at least one action");
    state_.num_actions = num_actions;
    state_.lambda_min = lambda_min;
    state_.cum_theta_hat = Mat::Zero(dist.dim, num_actions);
    last_estimate_ = Vec::Zero(dist.dim);
}

int RealLinExp3::act(const Vec& x, double q, Rng& rng) {
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("update probability outside (0, 1]");
    q_ = q;
    state_.q_history.push_back(q);
    state_.inv_q_sum += 1.0 / q;
    state_.min_q = state_.q_history.size() == 1 ? q : std::min(state_.min_q, q);
    const Rates r = reallinexp3_rates(state_);
    state_.eta = r.eta;
    state_.gamma = r.gamma;

    const int k = state_.num_actions;
    pi_.probs.resize(k);
    ftrl_probabilities_into(x.data(), state_.cum_theta_hat, state_.eta, pi_.probs.data());
    for (auto& v : pi_.probs) v = (1.0 - state_.gamma) * v + state_.gamma / k;
    last_action_ = sample_discrete(pi_.probs, rng);
    return last_action_;
}

void RealLinExp3::feedback(const Vec& x, int action, double loss, int upd) {
    last_estimate_.setZero();
    if (upd == 0) return;
    const int k = state_.num_actions;
    const double eta = state_.eta;
    const double gamma = state_.gamma;
    const Mat& cum = state_.cum_theta_hat;
    PolicyFn pi = [&](const double* ctx, double* out) {
        ftrl_probabilities_into(ctx, cum, eta, out);
        for (int a = 0; a < k; ++a) out[a] = (1.0 - gamma) * out[a] + gamma / k;
    };
    const ArmCovariance cov = exact_arm_covariance(*dist_, pi, k, action);
    Eigen::LLT<Mat> llt(cov.matrix);
    if (llt.info() != Eigen::Success) throw std::domain_error("RealLinExp3: singular arm covariance");
    last_estimate_ = llt.solve(x) * (loss / q_);
    state_.cum_theta_hat.col(action) += last_estimate_;
}

OfulState make_oful_state(int num_actions, int dim, double lambda_reg, double delta) {
    if (!(lambda_reg > 0.0)) throw std::invalid_argument("OFUL needs lambda > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("OFUL needs delta in (0, 1)");
    OfulState s;
    s.lambda_reg = lambda_reg;
    s.delta = delta;
    s.cov.assign(num_actions, lambda_reg * Mat::Identity(dim, dim));
    for (const auto& c : s.cov) s.cov_factor.emplace_back(c);
    s.cum_b.assign(num_actions, Vec::Zero(dim));
    s.theta_hat.assign(num_actions, Vec::Zero(dim));
    return s;
}

double oful_radius(const OfulState& s, int dim) {
    const double t = static_cast<double>(s.t);
    return std::sqrt(dim * std::log((1.0 + t / s.lambda_reg) / s.delta)) + std::sqrt(s.lambda_reg);
}

int oful_predict(const OfulState& s, const Vec& x) {
    const double rad = oful_radius(s, static_cast<int>(x.size()));
    int best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (int a = 0; a < static_cast<int>(s.cov.size()); ++a) {
        const double width = std::sqrt(std::max(0.0, x.dot(s.cov_factor[a].solve(x))));
        const double v = s.theta_hat[a].dot(x) - rad * width;
        if (v < best_v) {
            best_v = v;
            best = a;
        }
    }
    return best;
}

void oful_update(OfulState& s, const Vec& x, int action, double loss) {
    s.cov[action].noalias() += x * x.transpose();
    s.cum_b[action] += loss * x;
    s.cov_factor[action].compute(s.cov[action]);
    s.theta_hat[action] = s.cov_factor[action].solve(s.cum_b[action]);
    s.t += 1;
}

}  // namespace bobw
