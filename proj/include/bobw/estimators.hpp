#pragma once

// Loss-vector estimation: exact per-arm policy covariances, the known-inverse
// unbiased estimator, Matrix Geometric Resampling and its closed-form mean.

#include "bobw/env.hpp"

#include <algorithm>
#include <memory>

namespace bobw {

inline constexpr double kMgrRho = 0.5;

// A stochastic policy on contexts: fills `probs` (length K) for context x.
using PolicyFn = std::function<void(const double* x, double* probs)>;

// Source of fresh (X, A) pairs with X ~ D and A ~ pi(.|X).
class ResampleSource {
public:
    virtual ~ResampleSource() = default;
    virtual int dim() const = 0;
    virtual int num_actions() const = 0;
    // Writes X into `x` and returns the sampled action.
    virtual int draw(Rng& rng, double* x) const = 0;
    // One (X, A) draw reduced to the event {A = arm}: on a hit, points `x` at
    // the context and returns true. Same law as draw(), possibly fewer
    // random numbers.
    virtual bool draw_hit(Rng& rng, int arm, const double*& x) const;
};

// Finite support with the policy tabulated once per support point.
class FinitePolicyTable final : public ResampleSource {
public:
    FinitePolicyTable(const ContextDistribution& dist, int num_actions);
    FinitePolicyTable(const ContextDistribution& dist, const PolicyFn& policy, int num_actions);

    void refresh(const PolicyFn& policy);
    int dim() const override { return dist_->dim; }
    int num_actions() const override { return k_; }
    int draw(Rng& rng, double* x) const override;
    // A single uniform picks the context (integer part) and the action test
    // (fractional part).
    bool draw_hit(Rng& rng, int arm, const double*& x) const override;

    double prob(int context, int action) const { return probs_[static_cast<std::size_t>(context) * k_ + action]; }
    // Branch-free form of draw_hit for the resampling hot loop: always points
    // `x` at the drawn context and returns 1 on a hit, 0 otherwise.
    double hit_weight(Rng& rng, int arm, const double*& x) const {
        const int n = static_cast<int>(dist_->support.size());
        const double u = uniform01(rng) * n;
        const int i = std::min(static_cast<int>(u), n - 1);
        x = dist_->support[i].data();
        return u - i < probs_[static_cast<std::size_t>(i) * k_ + arm] ? 1.0 : 0.0;
    }
    const ContextDistribution& distribution() const { return *dist_; }

private:
    const ContextDistribution* dist_;
    int k_;
    std::vector<double> probs_;  // n x K, row-major
    std::vector<double> cdf_;
};

// Any distribution; the policy is evaluated at every draw.
class PolicyResampler final : public ResampleSource {
public:
    PolicyResampler(const ContextDistribution& dist, PolicyFn policy, int num_actions)
        : dist_(&dist), policy_(std::move(policy)), k_(num_actions) {}
    int dim() const override { return dist_->dim; }
    int num_actions() const override { return k_; }
    int draw(Rng& rng, double* x) const override;

private:
    const ContextDistribution* dist_;
    PolicyFn policy_;
    int k_;
};

struct ArmCovariance {
    Mat matrix;
    int arm = 0;
    bool exact = true;
};

// (1/n) sum_i pi(a | x_i) x_i x_i^T over a finite support.
ArmCovariance exact_arm_covariance(const FinitePolicyTable& table, int arm);
ArmCovariance exact_arm_covariance(const ContextDistribution& dist, const PolicyFn& policy, int num_actions, int arm);

struct CovarianceInverseEstimate {
    Mat matrix;
    long iterations = 0;
    double rho = kMgrRho;
};

// Matrix Geometric Resampling with running product A_k = (I - rho B_k) A_{k-1}:
// returns rho I + rho sum_{k=1}^{M} A_k. Consumes exactly M draws.
CovarianceInverseEstimate mgr(const ResampleSource& source, int arm, long iterations, Rng& rng);

// Vector mode of the same recursion: rho x + rho sum_k A_k x without forming
// any matrix. For identical rng state it equals mgr(...).matrix * x.
Vec mgr_apply(const ResampleSource& source, int arm, long iterations, const Vec& x, Rng& rng);

// E[mgr output] = rho sum_{k=0}^{M} (I - rho Sigma_{t,a})^k, evaluated through an
// eigendecomposition. Well defined for singular Sigma_{t,a}.
Mat mgr_expected_output(const Mat& sigma_ta, long iterations);

struct ThetaEstimate {
    Vec vector;
    int arm = 0;
    bool biased = false;
};

ThetaEstimate biased_theta(const Mat& sigma_plus, const Vec& x, double loss, int chosen, int arm);

// (upd / q) Sigma_{t,a}^{-1} x loss 1{chosen = arm}.
ThetaEstimate unbiased_theta(const Mat& sigma_inv, const Vec& x, double loss, int chosen, int arm, int upd, double q);

double operator_norm(const Mat& m);

}  // namespace bobw
