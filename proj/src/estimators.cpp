#include "bobw/estimators.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

namespace bobw {

namespace {

// The running product decays geometrically and spends most of a long run in
// the subnormal range, where x86 arithmetic is very slow. Flushing to zero
// only drops terms far below the rounding unit of the accumulated sum.
class FlushDenormals {
public:
#if defined(__SSE2__)
    FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
    ~FlushDenormals() { _mm_setcsr(saved_); }

private:
    unsigned saved_;
#endif
};

}  // namespace

FinitePolicyTable::FinitePolicyTable(const ContextDistribution& dist, int num_actions)
    : dist_(&dist), k_(num_actions) {
    if (!dist.finite()) throw std::invalid_argument("FinitePolicyTable needs a finite support");
    probs_.assign(static_cast<std::size_t>(dist.size()) * k_, 1.0 / k_);
    cdf_.resize(probs_.size());
    for (int i = 0; i < dist.size(); ++i) {
        double acc = 0.0;
        for (int a = 0; a < k_; ++a) {
            acc += probs_[static_cast<std::size_t>(i) * k_ + a];
            cdf_[static_cast<std::size_t>(i) * k_ + a] = acc;
        }
    }
}

FinitePolicyTable::FinitePolicyTable(const ContextDistribution& dist, const PolicyFn& policy, int num_actions)
    : FinitePolicyTable(dist, num_actions) {
    refresh(policy);
}

void FinitePolicyTable::refresh(const PolicyFn& policy) {
    const int n = dist_->size();
    for (int i = 0; i < n; ++i) {
        double* row = probs_.data() + static_cast<std::size_t>(i) * k_;
        policy(dist_->support[i].data(), row);
        double acc = 0.0;
        for (int a = 0; a < k_; ++a) {
            acc += row[a];
            cdf_[static_cast<std::size_t>(i) * k_ + a] = acc;
        }
    }
}

int FinitePolicyTable::draw(Rng& rng, double* x) const {
    const int i = sample_context_into(*dist_, rng, x);
    const double* cdf = cdf_.data() + static_cast<std::size_t>(i) * k_;
    const double u = uniform01(rng) * cdf[k_ - 1];
    for (int a = 0; a < k_ - 1; ++a)
        if (u < cdf[a]) return a;
    return k_ - 1;
}

bool ResampleSource::draw_hit(Rng& rng, int arm, const double*& x) const {
    thread_local std::vector<double> buffer;
    buffer.resize(dim());
    const bool hit = draw(rng, buffer.data()) == arm;
    x = buffer.data();
    return hit;
}

bool FinitePolicyTable::draw_hit(Rng& rng, int arm, const double*& x) const { return hit_weight(rng, arm, x) != 0.0; }

int PolicyResampler::draw(Rng& rng, double* x) const {
    thread_local std::vector<double> scratch;
    scratch.resize(k_);
    sample_context_into(*dist_, rng, x);
    policy_(x, scratch.data());
    return sample_discrete(scratch, rng);
}

ArmCovariance exact_arm_covariance(const FinitePolicyTable& table, int arm) {
    const auto& dist = table.distribution();
    ArmCovariance out;
    out.arm = arm;
    out.matrix = Mat::Zero(dist.dim, dist.dim);
    for (int i = 0; i < dist.size(); ++i)
        out.matrix.noalias() += table.prob(i, arm) * dist.support[i] * dist.support[i].transpose();
    out.matrix /= static_cast<double>(dist.size());
    return out;
}

ArmCovariance exact_arm_covariance(const ContextDistribution& dist, const PolicyFn& policy, int num_actions, int arm) {
    return exact_arm_covariance(FinitePolicyTable(dist, policy, num_actions), arm);
}

CovarianceInverseEstimate mgr(const ResampleSource& source, int arm, long iterations, Rng& rng) {
    const int d = source.dim();
    CovarianceInverseEstimate out;
    out.iterations = iterations;
    Mat running = Mat::Identity(d, d);
    Mat sum = Mat::Zero(d, d);
    Eigen::RowVectorXd w(d);
    const double* xp = nullptr;
    const FlushDenormals ftz;
    for (long k = 0; k < iterations; ++k) {
        if (source.draw_hit(rng, arm, xp)) {
            const Eigen::Map<const Vec> x(xp, d);
            w.noalias() = x.transpose() * running;
            running.noalias() -= kMgrRho * x * w;
        }
        sum += running;
    }
    out.matrix = kMgrRho * (Mat::Identity(d, d) + sum);
    return out;
}

namespace {

// `hit` returns the 0/1 weight of the rank-one term; a miss still points at
// some context so the update can run without a branch.
template <int D, class Hit>
void mgr_apply_loop(Hit&& hit, long iterations, int, double* vp, double* sp) {
    // Local copies keep the running vectors in registers.
    std::array<double, D> v, sum;
    std::copy(vp, vp + D, v.begin());
    std::copy(sp, sp + D, sum.begin());
    const double* dp = nullptr;
    for (long k = 0; k < iterations; ++k) {
        const double w = hit(dp);
        double proj = 0.0;
        for (int i = 0; i < D; ++i) proj += dp[i] * v[i];
        proj *= kMgrRho * w;
        for (int i = 0; i < D; ++i) v[i] -= proj * dp[i];
        for (int i = 0; i < D; ++i) sum[i] += v[i];
    }
    std::copy(v.begin(), v.end(), vp);
    std::copy(sum.begin(), sum.end(), sp);
}

template <class Hit>
void mgr_apply_loop_dyn(Hit&& hit, long iterations, int d, double* vp, double* sp) {
    const double* dp = nullptr;
    for (long k = 0; k < iterations; ++k) {
        const double w = hit(dp);
        double proj = 0.0;
        for (int i = 0; i < d; ++i) proj += dp[i] * vp[i];
        proj *= kMgrRho * w;
        for (int i = 0; i < d; ++i) vp[i] -= proj * dp[i];
        for (int i = 0; i < d; ++i) sp[i] += vp[i];
    }
}

template <class Hit>
void mgr_apply_dispatch(Hit&& hit, long iterations, int d, double* vp, double* sp) {
    switch (d) {
        case 2: return mgr_apply_loop<2>(hit, iterations, d, vp, sp);
        case 3: return mgr_apply_loop<3>(hit, iterations, d, vp, sp);
        case 4: return mgr_apply_loop<4>(hit, iterations, d, vp, sp);
        default: return mgr_apply_loop_dyn(hit, iterations, d, vp, sp);
    }
}

}  // namespace

Vec mgr_apply(const ResampleSource& source, int arm, long iterations, const Vec& x, Rng& rng) {
    const int d = source.dim();
    Vec v = x;
    Vec sum = Vec::Zero(d);
    const Vec zeros = Vec::Zero(d);
    const FlushDenormals ftz;
    if (const auto* table = dynamic_cast<const FinitePolicyTable*>(&source)) {
        mgr_apply_dispatch([&](const double*& p) { return table->hit_weight(rng, arm, p); }, iterations, d, v.data(), sum.data());
    } else {
        mgr_apply_dispatch(
            [&](const double*& p) {
                if (source.draw_hit(rng, arm, p)) return 1.0;
                p = zeros.data();
                return 0.0;
            },
            iterations, d, v.data(), sum.data());
    }
    return kMgrRho * (x + sum);
}

Mat mgr_expected_output(const Mat& sigma_ta, long iterations) {
    if (iterations < 0) throw std::invalid_argument("mgr_expected_output needs M >= 0");
    const Mat sym = 0.5 * (sigma_ta + sigma_ta.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
    Vec f(sym.rows());
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        const double r = 1.0 - kMgrRho * eig.eigenvalues()(i);
        // rho * sum_{k=0}^{M} r^k, summed directly: exact for r == 1 and
        // stable when (1 - r) is tiny.
        double term = 1.0, acc = 0.0;
        if (std::abs(1.0 - r) < 1e-3) {
            for (long k = 0; k <= iterations; ++k) {
                acc += term;
                term *= r;
            }
        } else {
            acc = (1.0 - std::pow(r, static_cast<double>(iterations + 1))) / (1.0 - r);
        }
        f(i) = kMgrRho * acc;
    }
    return eig.eigenvectors() * f.asDiagonal() * eig.eigenvectors().transpose();
}

ThetaEstimate biased_theta(const Mat& sigma_plus, const Vec& x, double loss, int chosen, int arm) {
    ThetaEstimate out;
    out.arm = arm;
    out.biased = true;
    out.vector = chosen == arm ? Vec(sigma_plus * x * loss) : Vec::Zero(x.size());
    return out;
}

ThetaEstimate unbiased_theta(const Mat& sigma_inv, const Vec& x, double loss, int chosen, int arm, int upd, double q) {
    if (!(q > 0.0)) throw std::invalid_argument("unbiased_theta needs q > 0");
    ThetaEstimate out;
    out.arm = arm;
    out.biased = false;
    out.vector = (upd != 0 && chosen == arm) ? Vec(sigma_inv * x * (loss / q)) : Vec::Zero(x.size());
    return out;
}

double operator_norm(const Mat& m) {
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues()(0);
}

}  // namespace bobw
