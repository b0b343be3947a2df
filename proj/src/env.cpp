#include "bobw/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bobw {

namespace {

void normalized_gaussian(int dim, double variance, Rng& rng, double* out) {
    std::normal_distribution<double> normal(0.0, std::sqrt(variance));
    for (;;) {
        double norm2 = 0.0;
        for (int i = 0; i < dim; ++i) {
            out[i] = normal(rng);
            norm2 += out[i] * out[i];
        }
        if (norm2 > 0.0) {
            const double inv = 1.0 / std::sqrt(norm2);
            for (int i = 0; i < dim; ++i) out[i] *= inv;
            return;
        }
    }
}

}  // namespace

ContextDistribution ContextDistribution::finite_uniform(std::vector<Vec> support) {
    if (support.empty()) throw std::invalid_argument("finite context support is empty");
    ContextDistribution d;
    d.kind = ContextKind::FiniteUniform;
    d.dim = static_cast<int>(support.front().size());
    for (const auto& x : support) {
        if (x.size() != d.dim) throw std::invalid_argument("context support has mixed dimensions");
        if (std::abs(x.norm() - 1.0) > 1e-9) throw std::invalid_argument("support contexts must have unit norm");
    }
    d.support = std::move(support);
    return d;
}

ContextDistribution ContextDistribution::random_finite(int dim, int n, Rng& rng, double variance) {
    if (dim < 1 || n < 1) throw std::invalid_argument("random_finite needs dim >= 1 and n >= 1");
    std::vector<Vec> support(n, Vec(dim));
    for (auto& x : support) normalized_gaussian(dim, variance, rng, x.data());
    auto d = finite_uniform(std::move(support));
    d.per_coordinate_variance = variance;
    return d;
}

ContextDistribution ContextDistribution::spherical_normal(int dim, double variance) {
    if (dim < 1) throw std::invalid_argument("spherical_normal needs dim >= 1");
    ContextDistribution d;
    d.kind = ContextKind::SphericalNormal;
    d.dim = dim;
    d.per_coordinate_variance = variance;
    return d;
}

int sample_context_into(const ContextDistribution& dist, Rng& rng, double* out) {
    if (dist.finite()) {
        const int i = std::min(static_cast<int>(uniform01(rng) * dist.size()), dist.size() - 1);
        const Vec& x = dist.support[i];
        for (int k = 0; k < dist.dim; ++k) out[k] = x[k];
        return i;
    }
    normalized_gaussian(dist.dim, dist.per_coordinate_variance, rng, out);
    return -1;
}

Vec sample_context(const ContextDistribution& dist, Rng& rng) {
    Vec x(dist.dim);
    sample_context_into(dist, rng, x.data());
    return x;
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::Adversarial: return "adversarial";
        case Regime::Stochastic: return "stochastic";
        case Regime::CorruptedStochastic: return "corrupted";
        case Regime::StochasticPhase: return "phase";
    }
    return "?";
}

std::optional<Regime> parse_regime(const std::string& s) {
    if (s == "adversarial") return Regime::Adversarial;
    if (s == "stochastic") return Regime::Stochastic;
    if (s == "corrupted" || s == "corrupted_stochastic") return Regime::CorruptedStochastic;
    if (s == "phase" || s == "stochastic_phase") return Regime::StochasticPhase;
    return std::nullopt;
}

std::vector<Vec> generate_stochastic_theta(int num_actions, int dim, Rng& rng) {
    if (num_actions < 2 || dim < 1) throw std::invalid_argument("generate_stochastic_theta needs K >= 2, d >= 1");
    std::vector<Vec> theta(num_actions, Vec(dim));
    for (auto& th : theta) normalized_gaussian(dim, 1.0, rng, th.data());
    return theta;
}

long phase_index(const LossModel& model, long t) {
    long len = model.phase_initial_length;
    long end = len;  // last round of the current phase
    long k = 0;
    while (end < t) {
        len = static_cast<long>(std::ceil(model.phase_factor * static_cast<double>(len) - 1e-9));
        end += len;
        ++k;
    }
    return k;
}

double expected_loss(const LossModel& model, long t, const Vec& x, int action) {
    switch (model.regime) {
        case Regime::Stochastic:
            return model.theta[action].dot(x);
        case Regime::CorruptedStochastic: {
            const double v = model.theta[action].dot(x);
            return t <= model.corruption_horizon ? -v : v;
        }
        case Regime::StochasticPhase: {
            const double base = phase_index(model, t) % 2 == 0 ? 0.0 : 1.0 - model.phase_gap;
            return action == model.phase_optimal_arm ? base : base + model.phase_gap;
        }
        case Regime::Adversarial:
            return model.schedule(t)[action].dot(x);
    }
    return 0.0;
}

double loss(const LossModel& model, long t, const Vec& x, int action, Rng& rng) {
    const double mean = expected_loss(model, t, x, action);
    if (model.regime == Regime::Adversarial || model.noise_std <= 0.0) {
        if (mean < -1.0 || mean > 1.0) throw std::domain_error("noiseless loss outside [-1, 1]");
        return mean;
    }
    std::normal_distribution<double> noise(0.0, model.noise_std);
    for (long i = 0; i < LossModel::kMaxRejections; ++i) {
        const double v = mean + noise(rng);
        if (v >= -1.0 && v <= 1.0) return v;
    }
    throw std::domain_error("loss rejection sampling exceeded its redraw cap (mean " + std::to_string(mean) + ")");
}

double truncated_noise_mean(double mean, double sd) {
    if (sd <= 0.0) return mean;
    const double a = (-1.0 - mean) / sd;
    const double b = (1.0 - mean) / sd;
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    const double pdf_a = inv_sqrt2pi * std::exp(-0.5 * a * a);
    const double pdf_b = inv_sqrt2pi * std::exp(-0.5 * b * b);
    // Phi(b) - Phi(a) via erfc keeps precision in both tails.
    const double mass = 0.5 * (std::erfc(-b * inv_sqrt2) - std::erfc(-a * inv_sqrt2));
    return mean + sd * (pdf_a - pdf_b) / mass;
}

SecondMomentInfo second_moment(const ContextDistribution& dist, long mc_samples, Rng& rng) {
    SecondMomentInfo info;
    info.sigma = Mat::Zero(dist.dim, dist.dim);
    if (dist.finite()) {
        for (const auto& x : dist.support) info.sigma.noalias() += x * x.transpose();
        info.sigma /= static_cast<double>(dist.size());
        info.exact = true;
    } else {
        if (mc_samples < 1) throw std::invalid_argument("second_moment needs mc_samples >= 1");
        Vec x(dist.dim);
        for (long i = 0; i < mc_samples; ++i) {
            sample_context_into(dist, rng, x.data());
            info.sigma.noalias() += x * x.transpose();
        }
        info.sigma /= static_cast<double>(mc_samples);
    }
    info.sigma = 0.5 * (info.sigma + info.sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(info.sigma, Eigen::EigenvaluesOnly);
    info.lambda_min = eig.eigenvalues()(0);
    if (info.lambda_min <= 1e-10) throw std::domain_error("degenerate context support: lambda_min <= 1e-10");
    return info;
}

OptimalPolicy::OptimalPolicy(const LossModel& model, long horizon) : regime_(model.regime) {
    switch (model.regime) {
        case Regime::Stochastic:
        case Regime::CorruptedStochastic:
            directions_ = model.theta;
            break;
        case Regime::StochasticPhase:
            fixed_arm_ = model.phase_optimal_arm;
            break;
        case Regime::Adversarial: {
            if (!model.schedule) throw std::invalid_argument("adversarial model without a schedule");
            directions_.assign(model.num_actions, Vec::Zero(model.dim));
            for (long t = 1; t <= horizon; ++t) {
                const auto th = model.schedule(t);
                for (int a = 0; a < model.num_actions; ++a) directions_[a] += th[a];
            }
            break;
        }
    }
}

int OptimalPolicy::operator()(const Vec& x) const {
    if (regime_ == Regime::StochasticPhase) return fixed_arm_;
    int best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (int a = 0; a < static_cast<int>(directions_.size()); ++a) {
        const double v = directions_[a].dot(x);
        if (v < best_v) {
            best_v = v;
            best = a;
        }
    }
    return best;
}

int optimal_action(const LossModel& model, const Vec& x, long horizon) {
    return OptimalPolicy(model, horizon)(x);
}

}  // namespace bobw
