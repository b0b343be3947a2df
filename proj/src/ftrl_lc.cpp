#include "bobw/ftrl_lc.hpp"

#include <algorithm>
#include <cmath>

namespace bobw {

FtrlLcConstants FtrlLcConstants::make(int num_actions, int dim, long horizon, double lambda_min) {
    if (num_actions < 2) throw std::invalid_argument("FTRL-LC needs K >= 2");
    if (horizon < 2) throw std::invalid_argument("FTRL-LC needs T >= 2");
    if (!(lambda_min > 0.0)) throw std::invalid_argument("FTRL-LC needs lambda_min > 0");
    FtrlLcConstants c;
    c.num_actions = num_actions;
    c.dim = dim;
    c.horizon = horizon;
    c.lambda_min = lambda_min;
    const double k = num_actions;
    const double log_t = std::log(static_cast<double>(horizon));
    c.c1 = std::sqrt((3.0 * k * dim + 2.0 * k * log_t / lambda_min) * log_t / std::log(k));
    c.c2 = 8.0 * k / lambda_min;
    return c;
}

FtrlLcState initial_ftrl_state(const FtrlLcConstants& c) {
    FtrlLcState s;
    s.constants = c;
    s.cum_theta = Mat::Zero(c.dim, c.num_actions);
    s.beta_prime = c.c1;
    s.beta = std::max({2.0, c.c2 * std::log(static_cast<double>(c.horizon)), s.beta_prime});
    s.eta = 1.0 / s.beta;
    s.gamma = 0.0;  // alpha_1 = 4K log(1) / lambda_min = 0
    s.m_iters = 1;
    s.t = 1;
    return s;
}

void ftrl_probabilities_into(const double* x, const Mat& cum_theta, double eta, double* out) {
    const int k = static_cast<int>(cum_theta.cols());
    const int d = static_cast<int>(cum_theta.rows());
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < k; ++a) {
        const double* col = cum_theta.data() + static_cast<std::ptrdiff_t>(a) * d;
        double v = 0.0;
        for (int i = 0; i < d; ++i) v += x[i] * col[i];
        out[a] = -eta * v;
        max_logit = std::max(max_logit, out[a]);
    }
    double total = 0.0;
    for (int a = 0; a < k; ++a) {
        double w = std::exp(out[a] - max_logit);
        if (w < 1e-300) w = 0.0;
        out[a] = w;
        total += w;
    }
    for (int a = 0; a < k; ++a) out[a] /= total;
}

PolicyDistribution ftrl_probabilities(const Vec& x, const Mat& cum_theta, double eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("ftrl_probabilities needs eta > 0");
    PolicyDistribution p;
    p.probs.resize(cum_theta.cols());
    ftrl_probabilities_into(x.data(), cum_theta, eta, p.probs.data());
    return p;
}

PolicyDistribution mix_with_uniform(const PolicyDistribution& p, double gamma) {
    if (gamma < 0.0 || gamma > 0.5) throw std::invalid_argument("mix_with_uniform needs gamma in [0, 1/2]");
    PolicyDistribution out = p;
    const double k = static_cast<double>(p.probs.size());
    for (auto& v : out.probs) v = (1.0 - gamma) * v + gamma / k;
    return out;
}

double shannon_entropy(const PolicyDistribution& p) {
    double h = 0.0;
    for (double v : p.probs)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

long mgr_iterations(double gamma, long t, int num_actions, double lambda_min) {
    if (t < 1) throw std::invalid_argument("mgr_iterations needs t >= 1");
    if (t == 1 || gamma <= 0.0) return 1;
    const double m = std::ceil(4.0 * num_actions / (gamma * lambda_min) * std::log(static_cast<double>(t)));
    return std::max(1L, static_cast<long>(m));
}

FtrlLcState update_rates(FtrlLcState s, double entropy) {
    const auto& c = s.constants;
    const double log_k = std::log(static_cast<double>(c.num_actions));
    s.entropy_sum += entropy;
    s.beta_prime += c.c1 / std::sqrt(1.0 + s.entropy_sum / log_k);
    s.t += 1;
    s.beta = std::max({2.0, c.c2 * std::log(static_cast<double>(c.horizon)), s.beta_prime});
    s.eta = 1.0 / s.beta;
    const double alpha = 4.0 * c.num_actions * std::log(static_cast<double>(s.t)) / c.lambda_min;
    s.gamma = alpha * s.eta;
    s.m_iters = mgr_iterations(s.gamma, s.t, c.num_actions, c.lambda_min);
    return s;
}

FtrlLc::FtrlLc(const ContextDistribution& dist, const FtrlLcConstants& constants, FtrlLcOptions options)
    : dist_(&dist), options_(options), state_(initial_ftrl_state(constants)) {
    if (constants.dim != dist.dim) throw std::invalid_argument("FTRL-LC dimension does not match the context distribution");
    last_theta_ = Mat::Zero(constants.dim, constants.num_actions);
}

void FtrlLc::policy_probs(const double* x, double* out) const {
    ftrl_probabilities_into(x, state_.cum_theta, state_.eta, out);
    const int k = state_.constants.num_actions;
    for (int a = 0; a < k; ++a) out[a] = (1.0 - state_.gamma) * out[a] + state_.gamma / k;
}

void FtrlLc::violation(long& counter, const char* what) {
    ++counter;
    if (options_.throw_on_violation)
        throw InvariantViolation(std::string("FTRL-LC invariant violated at t=") + std::to_string(state_.t) + ": " + what);
}

int FtrlLc::act(const Vec& x, Rng& rng) {
    p_ = ftrl_probabilities(x, state_.cum_theta, state_.eta);
    pi_ = mix_with_uniform(p_, state_.gamma);
    return sample_discrete(pi_.probs, rng);
}

void FtrlLc::observe(const Vec& x, int action, double loss, Rng& rng) {
    const auto& c = state_.constants;
    const int k = c.num_actions;
    const long m = state_.m_iters;

    PolicyFn fn = [this](const double* ctx, double* out) { policy_probs(ctx, out); };
    std::unique_ptr<ResampleSource> source;
    if (dist_->finite())
        source = std::make_unique<FinitePolicyTable>(*dist_, fn, k);
    else
        source = std::make_unique<PolicyResampler>(*dist_, fn, k);

    last_theta_.setZero();
    for (int a = 0; a < k; ++a) {
        if (!options_.mgr_all_arms && a != action) continue;
        extra_draws_ += m;
        const double weight = a == action ? loss : 0.0;
        if (options_.mgr_mode == MgrMode::Vector) {
            last_theta_.col(a) = mgr_apply(*source, a, m, x, rng) * weight;
        } else {
            const auto est = mgr(*source, a, m, rng);
            last_theta_.col(a) = biased_theta(est.matrix, x, weight, a, a).vector;
        }
    }

    last_.t = state_.t;
    last_.eta = state_.eta;
    last_.gamma = state_.gamma;
    last_.m_iters = m;
    last_.entropy = shannon_entropy(p_);
    last_.bound_check = 0.0;
    last_.bound_sup = 0.0;
    for (int a = 0; a < k; ++a) {
        last_.bound_check = std::max(last_.bound_check, std::abs(state_.eta * x.dot(last_theta_.col(a))));
        last_.bound_sup = std::max(last_.bound_sup, state_.eta * last_theta_.col(a).norm());
    }
    last_.bias_factor = std::exp(-state_.gamma * c.lambda_min * static_cast<double>(m) / (2.0 * k));

    if (!(state_.eta > 0.0 && state_.eta <= 0.5)) violation(counters_.eta_range, "eta outside (0, 1/2]");
    if (!(state_.gamma >= 0.0 && state_.gamma <= 0.5)) violation(counters_.gamma_range, "gamma outside [0, 1/2]");
    if (last_.bound_check > 1.0 || last_.bound_sup > 1.0) violation(counters_.bound, "|eta <x, theta~>| > 1");
    if (m < 1) violation(counters_.m_positive, "M_t < 1");
    if (state_.t >= 2) {
        const double tt = static_cast<double>(state_.t);
        if (last_.bias_factor > (1.0 + 1e-12) / (tt * tt)) violation(counters_.bias, "MGR bias factor above 1/t^2");
    }

    state_.cum_theta += last_theta_;
    const double previous_beta_prime = state_.beta_prime;
    state_ = update_rates(std::move(state_), last_.entropy);
    if (!(state_.beta_prime > previous_beta_prime)) violation(counters_.beta_monotone, "beta' not increasing");
    if (state_.entropy_sum > static_cast<double>(state_.t - 1) * std::log(static_cast<double>(k)) + 1e-9)
        violation(counters_.entropy, "entropy sum above t log K");
}

std::vector<std::string> FtrlLc::diagnostic_names() const {
    return {"eta", "gamma", "M_t", "entropy", "bound_check"};
}

std::vector<double> FtrlLc::diagnostics() const {
    return {last_.eta, last_.gamma, static_cast<double>(last_.m_iters), last_.entropy, last_.bound_check};
}

}  // namespace bobw
