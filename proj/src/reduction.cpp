#include "bobw/reduction.hpp"

#include <algorithm>
#include <cmath>

namespace bobw {

EpochState initial_epoch_state(int num_actions, double c2_log_t, int candidate) {
    EpochState s;
    s.t_prev = -c2_log_t;
    s.candidate = candidate;
    s.pull_counts.assign(num_actions, 0);
    s.boundaries.push_back(0);
    return s;
}

std::optional<int> epoch_switch(const EpochState& s, long t) {
    const double elapsed = static_cast<double>(t) - s.t_k;
    if (elapsed < 2.0 * (s.t_k - s.t_prev)) return std::nullopt;
    std::optional<int> best;
    for (int a = 0; a < static_cast<int>(s.pull_counts.size()); ++a) {
        if (a == s.candidate) continue;
        if (static_cast<double>(s.pull_counts[a]) >= elapsed / 2.0 && (!best || s.pull_counts[a] > s.pull_counts[*best]))
            best = a;
    }
    return best;
}

BobwEpochs::BobwEpochs(std::string name, int num_actions, double c2_log_t, LsbFactory factory, int first_candidate)
    : name_(std::move(name)), factory_(std::move(factory)), state_(initial_epoch_state(num_actions, c2_log_t, first_candidate)) {
    learner_ = factory_(first_candidate);
}

void BobwEpochs::observe(const Vec& x, int action, double loss, Rng& rng) {
    learner_->observe(x, action, loss, rng);
    last_meta_ = learner_->meta_diagnostics();
    state_.t += 1;
    state_.pull_counts[action] += 1;
    if (const auto next = epoch_switch(state_, state_.t)) {
        clip_violations_ += learner_->clip_violations();
        finished_draws_ += learner_->extra_draws();
        state_.k += 1;
        state_.t_prev = state_.t_k;
        state_.t_k = static_cast<double>(state_.t);
        state_.candidate = *next;
        std::fill(state_.pull_counts.begin(), state_.pull_counts.end(), 0L);
        state_.boundaries.push_back(state_.t);
        learner_ = factory_(*next);
    }
}

std::vector<std::string> BobwEpochs::diagnostic_names() const { return {"epoch", "candidate", "q1", "B", "eta_meta"}; }

std::vector<double> BobwEpochs::diagnostics() const {
    return {static_cast<double>(state_.k), static_cast<double>(state_.candidate), last_meta_[0], last_meta_[1], last_meta_[2]};
}

double corral_objective_iw(double q1, double l1, double l2, double eta, double beta) {
    const double q2 = 1.0 - q1;
    return l1 * q1 + l2 * q2 - 2.0 / eta * (std::sqrt(q1) + std::sqrt(q2)) - (std::log(q1) + std::log(q2)) / beta;
}

double corral_objective_dd(double q1, double l1, double l2, double eta1, double eta2) {
    const double q2 = 1.0 - q1;
    return l1 * q1 + l2 * q2 - std::log(q1) / eta1 - std::log(q2) / eta2;
}

namespace {

template <class Derivative>
double bisect_increasing(Derivative g, const char* who) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < kCorralBisectionIterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double v = g(mid);
        if (std::isnan(v)) throw std::runtime_error(std::string(who) + ": derivative is NaN");
        (v > 0.0 ? hi : lo) = mid;
    }
    if (!(hi - lo <= 1e-12)) throw std::runtime_error(std::string(who) + ": bisection did not converge");
    return 0.5 * (lo + hi);
}

}  // namespace

std::array<double, 2> corral_argmin_iw(double l1, double l2, double eta, double beta) {
    const double diff = l1 - l2;
    const double q1 = bisect_increasing(
        [&](double q) {
            const double p = 1.0 - q;
            return diff - (1.0 / std::sqrt(q) - 1.0 / std::sqrt(p)) / eta - (1.0 / q - 1.0 / p) / beta;
        },
        "corral_argmin_iw");
    return {q1, 1.0 - q1};
}

std::array<double, 2> corral_argmin_dd(double l1, double l2, double eta1, double eta2) {
    const double diff = l1 - l2;
    const double q1 =
        bisect_increasing([&](double q) { return diff - 1.0 / (eta1 * q) + 1.0 / (eta2 * (1.0 - q)); }, "corral_argmin_dd");
    return {q1, 1.0 - q1};
}

std::array<double, 2> corral_clip(const std::array<double, 2>& q_bar, long t) {
    const double tt = static_cast<double>(t);
    const double floor = 1.0 / (4.0 * tt * tt);
    const double keep = 1.0 - 1.0 / (2.0 * tt * tt);
    return {keep * q_bar[0] + floor, keep * q_bar[1] + floor};
}

std::array<double, 2> corral_meta_distribution(CorralState& s, long t) {
    if (t < 1) throw std::invalid_argument("corral_meta_distribution needs t >= 1");
    std::array<double, 2> q_bar;
    if (s.mode == CorralMode::Iw) {
        s.eta[0] = s.eta[1] = 1.0 / (std::sqrt(static_cast<double>(t)) + 8.0 * std::sqrt(s.c1));
        s.beta = 1.0 / (8.0 * s.c2);
        q_bar = corral_argmin_iw(s.z_sum[0], s.z_sum[1] - s.bonus, s.eta[0], s.beta);
    } else {
        const double log_t = std::log(static_cast<double>(s.horizon));
        for (int i = 0; i < 2; ++i)
            s.eta[i] = 0.25 * std::sqrt(log_t) / std::sqrt(s.deviation_sum[i] + (s.c1 + s.c2 * s.c2) * log_t);
        q_bar = corral_argmin_dd(s.z_sum[0] + s.y[0], s.z_sum[1] + s.y[1] - s.bonus, s.eta[0], s.eta[1]);
    }
    s.q = corral_clip(q_bar, t);
    return s.q;
}

std::array<double, 2> corral_iw_losses(const std::array<double, 2>& q, int meta_arm, double loss) {
    std::array<double, 2> z{-1.0, -1.0};
    z[meta_arm] += (loss + 1.0) / q[meta_arm];
    return z;
}

std::array<double, 2> corral_dd_losses(const std::array<double, 2>& q, const std::array<double, 2>& y, int meta_arm, double loss) {
    std::array<double, 2> z = y;
    z[meta_arm] += (loss - y[meta_arm]) / q[meta_arm];
    return z;
}

std::vector<int> arms_excluding(int num_actions, int candidate) {
    std::vector<int> arms;
    for (int a = 0; a < num_actions; ++a)
        if (a != candidate) arms.push_back(a);
    return arms;
}

std::array<double, 2> reallinexp3_stability_constants(int num_actions, int dim, double lambda_min) {
    const double k = num_actions;
    const double log_k = std::log(k);
    const double s = dim + 1.0 / lambda_min;
    return {36.0 * log_k * k * k * s * s, 2.0 * k * log_k / lambda_min};
}

std::array<double, 2> mwu_stability_constants(int num_actions, int dim, long horizon) {
    const double k = num_actions;
    const double log_t = std::log(static_cast<double>(horizon));
    const double kappa = 32.0 * k * dim * std::log(10.0 * dim * k * static_cast<double>(horizon)) * log_t;
    return {kappa * kappa, kappa * std::sqrt(50.0 * dim * k)};
}

namespace {

bool below_clip_floor(const std::array<double, 2>& q, long t) {
    const double floor = 1.0 / (4.0 * static_cast<double>(t) * static_cast<double>(t));
    return q[0] < floor * (1.0 - 1e-12) || q[1] < floor * (1.0 - 1e-12) || std::abs(q[0] + q[1] - 1.0) > 1e-12;
}

int sample_meta(const std::array<double, 2>& q, Rng& rng) { return uniform01(rng) < q[0] ? 0 : 1; }

}  // namespace

CorralIw::CorralIw(const ContextDistribution& dist, int num_actions, int candidate, double lambda_min, double c1, double c2,
                   long horizon)
    : candidate_(candidate), arm_map_(arms_excluding(num_actions, candidate)), base_(dist, num_actions - 1, lambda_min) {
    state_.mode = CorralMode::Iw;
    state_.c1 = c1;
    state_.c2 = c2;
    state_.horizon = horizon;
}

int CorralIw::act(const Vec& x, Rng& rng) {
    const long t = ++state_.t;
    const auto q = corral_meta_distribution(state_, t);
    if (below_clip_floor(q, t)) ++clip_violations_;
    base_local_ = base_.act(x, q[1], rng);
    meta_arm_ = sample_meta(q, rng);
    return meta_arm_ == 0 ? candidate_ : arm_map_[base_local_];
}

void CorralIw::observe(const Vec& x, int, double loss, Rng&) {
    const auto z = corral_iw_losses(state_.q, meta_arm_, loss);
    state_.z_sum[0] += z[0];
    state_.z_sum[1] += z[1];
    state_.bonus_sum += 1.0 / state_.q[1];
    state_.min_q2 = std::min(state_.min_q2, state_.q[1]);
    state_.bonus = std::sqrt(state_.c1 * state_.bonus_sum) + state_.c2 / state_.min_q2;
    base_.feedback(x, base_local_, loss, meta_arm_ == 1 ? 1 : 0);
}

CorralDd::CorralDd(const ContextDistribution& dist, int num_actions, int candidate, std::shared_ptr<PredictorState> predictor,
                   double c1, double c2, long horizon, MwuOptions options)
    : candidate_(candidate),
      arm_map_(arms_excluding(num_actions, candidate)),
      predictor_(predictor),
      base_(dist, num_actions - 1, predictor, arm_map_, false, options) {
    state_.mode = CorralMode::Dd;
    state_.c1 = c1;
    state_.c2 = c2;
    state_.horizon = horizon;
}

int CorralDd::act(const Vec& x, Rng& rng) {
    const long t = ++state_.t;
    base_local_ = base_.act(x, rng);
    state_.y = {x.dot(predictor_->m[candidate_]), x.dot(predictor_->m[arm_map_[base_local_]])};
    const auto q = corral_meta_distribution(state_, t);
    if (below_clip_floor(q, t)) ++clip_violations_;
    meta_arm_ = sample_meta(q, rng);
    return meta_arm_ == 0 ? candidate_ : arm_map_[base_local_];
}

void CorralDd::observe(const Vec& x, int action, double loss, Rng&) {
    const auto& q = state_.q;
    const auto z = corral_dd_losses(q, state_.y, meta_arm_, loss);
    state_.z_sum[0] += z[0];
    state_.z_sum[1] += z[1];
    const double xi = loss - state_.y[meta_arm_];
    for (int i = 0; i < 2; ++i) {
        const double dev = (meta_arm_ == i ? 1.0 : 0.0) - q[i];
        state_.deviation_sum[i] += dev * dev * xi * xi;
    }
    if (meta_arm_ == 1) state_.bonus_sum += xi * xi / (q[1] * q[1]);
    state_.min_q2 = std::min(state_.min_q2, q[1]);
    state_.bonus = std::sqrt(state_.c1 * state_.bonus_sum) + state_.c2 / state_.min_q2;
    base_.feedback(x, base_local_, loss, meta_arm_ == 1 ? 1 : 0, q[1]);
    predictor_update(*predictor_, x, action, loss);
}

std::unique_ptr<BobwEpochs> make_bobw_iw(const ContextDistribution& dist, int num_actions, double lambda_min, long horizon,
                                         Rng& rng, const ReductionOptions& options) {
    const auto c = reallinexp3_stability_constants(num_actions, dist.dim, lambda_min);
    const double c1 = options.c1.value_or(c[0]);
    const double c2 = options.c2.value_or(c[1]);
    const int first = std::uniform_int_distribution<int>(0, num_actions - 1)(rng);
    LsbFactory factory = [&dist, num_actions, lambda_min, c1, c2, horizon](int candidate) -> std::unique_ptr<LsbLearner> {
        return std::make_unique<CorralIw>(dist, num_actions, candidate, lambda_min, c1, c2, horizon);
    };
    return std::make_unique<BobwEpochs>("bobw_iw", num_actions, c2 * std::log(static_cast<double>(horizon)), factory, first);
}

std::unique_ptr<BobwEpochs> make_bobw_dd(const ContextDistribution& dist, int num_actions, long horizon, Rng& rng,
                                         const ReductionOptions& options) {
    const auto c = mwu_stability_constants(num_actions, dist.dim, horizon);
    const double c1 = options.c1.value_or(c[0]);
    const double c2 = options.c2.value_or(c[1]);
    const Spanner sp = barycentric_spanner(dist.support);
    auto predictor = std::make_shared<PredictorState>(make_predictor(sp.S, num_actions, dist.support));
    const int first = std::uniform_int_distribution<int>(0, num_actions - 1)(rng);
    const MwuOptions mwu = options.mwu;
    LsbFactory factory = [&dist, num_actions, predictor, c1, c2, horizon, mwu](int candidate) -> std::unique_ptr<LsbLearner> {
        return std::make_unique<CorralDd>(dist, num_actions, candidate, predictor, c1, c2, horizon, mwu);
    };
    return std::make_unique<BobwEpochs>("bobw_dd", num_actions, c2 * std::log(static_cast<double>(horizon)), factory, first);
}

}  // namespace bobw
