#include "bobw/mwu.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bobw {

double truncation_level(int dim, int num_actions, long t) {
    return 4.0 * std::log(10.0 * dim * num_actions * static_cast<double>(std::max(1L, t)));
}

namespace {

// Inverse-CDF draw of s in [lo, hi] with density proportional to exp(kappa s).
double sample_chord(double kappa, double lo, double hi, double u) {
    const double len = hi - lo;
    if (std::abs(kappa * len) < 1e-12) return lo + u * len;
    if (kappa > 0.0) return hi + std::log(u + (1.0 - u) * std::exp(-kappa * len)) / kappa;
    return lo + std::log(u + (1.0 - u) * std::exp(kappa * len)) / kappa;
}

}  // namespace

Vec sample_exp_weights(const Vec& coeff, Rng& rng, int burn_in_per_arm) {
    const int k = static_cast<int>(coeff.size());
    if (k < 1) throw std::invalid_argument("sample_exp_weights needs K >= 1");
    for (int i = 0; i < k; ++i)
        if (!std::isfinite(coeff(i))) throw std::invalid_argument("sample_exp_weights needs finite coefficients");
    Vec r = Vec::Constant(k, 1.0 / k);
    if (k == 1) return r;
    std::normal_distribution<double> normal;
    Vec u(k);
    const long steps = static_cast<long>(burn_in_per_arm) * k;
    for (long step = 0; step < steps; ++step) {
        for (int i = 0; i < k; ++i) u(i) = normal(rng);
        u.array() -= u.mean();
        const double norm = u.norm();
        const double uu = uniform01(rng);
        if (norm == 0.0) continue;
        u /= norm;
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        for (int i = 0; i < k; ++i) {
            if (u(i) > 0.0) lo = std::max(lo, -r(i) / u(i));
            else if (u(i) < 0.0) hi = std::min(hi, -r(i) / u(i));
        }
        if (!(hi > lo)) continue;
        const double s = sample_chord(coeff.dot(u), lo, hi, uu);
        r += s * u;
        r = r.cwiseMax(0.0);
        r /= r.sum();
    }
    return r;
}

double truncation_statistic(const Vec& r, const Vec& x, const TruncationSpec& trunc) {
    double s = 0.0;
    for (std::size_t a = 0; a < trunc.sigma_bar_inv.size(); ++a)
        s += r(static_cast<Eigen::Index>(a)) * r(static_cast<Eigen::Index>(a)) * x.dot(trunc.sigma_bar_inv[a] * x);
    return s;
}

TruncatedDraw truncated_sample(const Vec& x, const Vec& coeff, const TruncationSpec& trunc, Rng& rng, int burn_in_per_arm) {
    TruncatedDraw out;
    for (;;) {
        out.point = sample_exp_weights(coeff, rng, burn_in_per_arm);
        if (trunc.sigma_bar_inv.empty() || truncation_statistic(out.point, x, trunc) <= trunc.threshold) return out;
        if (++out.rejections >= trunc.max_rejections)
            throw std::runtime_error("truncated_sample: rejection cap of " + std::to_string(trunc.max_rejections) + " reached");
    }
}

CovarianceEstimates estimate_covariances(const ContextDistribution& dist, const CoeffFn& coeff, const TruncationSpec& trunc,
                                         int num_actions, long n_mc, Rng& rng) {
    return estimate_covariances(dist, coeff, trunc, num_actions, n_mc, kBurnInPerArm, rng(), Exec::Serial);
}

std::vector<Vec> mwu_estimate(const Vec& q_point, const Vec& x, double loss, int chosen, const std::vector<Vec>& m,
                              const std::vector<Mat>& sigma_tilde_inv, int upd, double q) {
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("mwu_estimate needs q in (0, 1]");
    std::vector<Vec> out(m.begin(), m.end());
    if (upd != 0) {
        const double xi = loss - x.dot(m[chosen]);
        out[chosen] += (q_point(chosen) * xi / q) * (sigma_tilde_inv[chosen] * x);
    }
    return out;
}

double mwu_learning_rate(const MwuState& s) {
    const double g = truncation_level(s.dim, s.num_actions, s.t);
    return 1.0 / std::sqrt(800.0 * s.dim * s.num_actions * g * g / s.min_q + s.beta_sum_over_q);
}

PredictorState make_predictor(const Mat& S, int num_actions, const std::vector<Vec>& support) {
    PredictorState p;
    p.S = S;
    p.design.assign(num_actions, S);
    p.response.assign(num_actions, Vec::Zero(S.rows()));
    p.m.assign(num_actions, Vec::Zero(S.rows()));
    p.support = support;
    return p;
}

Vec predictor_solve(const PredictorState& p, int arm) {
    Eigen::LDLT<Mat> ldlt(p.design[arm]);
    if (ldlt.info() != Eigen::Success) throw std::domain_error("predictor_solve: singular system");
    Vec m = ldlt.solve(p.response[arm]);
    double worst = 1.0;
    for (const auto& x : p.support) worst = std::max(worst, std::abs(x.dot(m)));
    return m / worst;
}

void predictor_update(PredictorState& p, const Vec& x, int arm, double loss) {
    p.design[arm].noalias() += x * x.transpose();
    p.response[arm] += loss * x;
    p.m[arm] = predictor_solve(p, arm);
}

double fraction_free_determinant(Mat m) {
    const Eigen::Index n = m.rows();
    if (n != m.cols()) throw std::invalid_argument("determinant of a non-square matrix");
    if (n == 0) return 1.0;
    double sign = 1.0, prev = 1.0;
    for (Eigen::Index k = 0; k < n - 1; ++k) {
        Eigen::Index piv = k;
        for (Eigen::Index i = k + 1; i < n; ++i)
            if (std::abs(m(i, k)) > std::abs(m(piv, k))) piv = i;
        if (m(piv, k) == 0.0) return 0.0;
        if (piv != k) {
            m.row(k).swap(m.row(piv));
            sign = -sign;
        }
        for (Eigen::Index i = k + 1; i < n; ++i) {
            for (Eigen::Index j = k + 1; j < n; ++j) m(i, j) = (m(i, j) * m(k, k) - m(i, k) * m(k, j)) / prev;
            m(i, k) = 0.0;
        }
        prev = m(k, k);
    }
    return sign * m(n - 1, n - 1);
}

Spanner barycentric_spanner(const std::vector<Vec>& support, double coeff_bound) {
    if (support.empty()) throw std::invalid_argument("barycentric_spanner needs a non-empty support");
    const int d = static_cast<int>(support[0].size());
    const int n = static_cast<int>(support.size());
    Mat basis = Mat::Identity(d, d);
    std::vector<int> idx(d, -1);

    auto det_with = [&](int col, const Vec& x) {
        Mat trial = basis;
        trial.col(col) = x;
        return std::abs(fraction_free_determinant(trial));
    };

    for (int i = 0; i < d; ++i) {
        double best = -1.0;
        int arg = -1;
        for (int j = 0; j < n; ++j) {
            const double v = det_with(i, support[j]);
            if (v > best) {
                best = v;
                arg = j;
            }
        }
        basis.col(i) = support[arg];
        idx[i] = arg;
    }

    Spanner s;
    s.coeff_bound = coeff_bound;
    s.initial_det = std::abs(fraction_free_determinant(basis));
    if (!(s.initial_det > 1e-12)) throw std::domain_error("barycentric_spanner: support does not span R^d");

    double current = s.initial_det;
    for (bool swapped = true; swapped;) {
        swapped = false;
        for (int j = 0; j < n && !swapped; ++j) {
            for (int i = 0; i < d; ++i) {
                const double v = det_with(i, support[j]);
                if (v > coeff_bound * current * (1.0 + 1e-12)) {
                    basis.col(i) = support[j];
                    idx[i] = j;
                    current = std::abs(fraction_free_determinant(basis));
                    ++s.swaps;
                    swapped = true;
                    break;
                }
            }
        }
    }

    s.final_det = current;
    s.indices = idx;
    s.basis_matrix = basis;
    for (int i = 0; i < d; ++i) s.basis.push_back(basis.col(i));
    s.S = basis * basis.transpose();
    return s;
}

Vec spanner_coefficients(const Spanner& spanner, const Vec& x) { return spanner.basis_matrix.fullPivLu().solve(x); }

MwuLc::MwuLc(const ContextDistribution& dist, int num_actions, std::shared_ptr<PredictorState> predictor,
             std::vector<int> arm_map, bool owns_predictor, MwuOptions options)
    : dist_(&dist),
      k_(num_actions),
      predictor_(std::move(predictor)),
      arm_map_(std::move(arm_map)),
      owns_predictor_(owns_predictor),
      options_(options) {
    if (!dist.finite()) throw std::invalid_argument("MWU-LC needs a finite context support");
    if (k_ < 1 || static_cast<int>(arm_map_.size()) != k_) throw std::invalid_argument("MWU-LC arm map size mismatch");
    const int d = dist.dim;
    state_.cum_est = Mat::Zero(d, k_);
    state_.dim = d;
    state_.num_actions = k_;
    Rng unused;
    sigma_ = second_moment(dist, 0, unused).sigma;
    // Second moment of a uniform simplex coordinate: exact for the flat first round.
    const Mat start = 2.0 / (k_ * (k_ + 1.0)) * sigma_ + kCovarianceRidge * Mat::Identity(d, d);
    bar_.assign(k_, start);
    tilde_.assign(k_, start);
    tilde_inv_.assign(k_, start.inverse());
    m_now_.assign(k_, Vec::Zero(d));
    point_ = Vec::Constant(k_, 1.0 / k_);
}

int MwuLc::act(const Vec& x, Rng& rng) {
    const int d = state_.dim;
    state_.t += 1;
    const double eta = mwu_learning_rate(state_);
    const double g = truncation_level(d, k_, state_.t);
    last_ = {};
    last_.eta = eta;
    last_.gamma_tilde = g;
    for (int a = 0; a < k_; ++a) m_now_[a] = predictor_->m[arm_map_[a]];

    if (k_ == 1) {
        point_ = Vec::Ones(1);
        return 0;
    }

    const Mat cum = state_.cum_est;
    const std::vector<Vec> m = m_now_;
    CoeffFn coeff = [cum, m, eta](const Vec& ctx) {
        Vec c(cum.cols());
        for (Eigen::Index a = 0; a < cum.cols(); ++a) c(a) = -eta * (ctx.dot(cum.col(a)) + ctx.dot(m[a]));
        return c;
    };

    // The truncation region is fixed by the smoothed Sigma_bar from the
    // previous rounds; both the Sigma~ estimate and the played sample use it.
    TruncationSpec trunc;
    trunc.threshold = d * k_ * g * g;
    trunc.max_rejections = options_.max_rejections;
    for (int a = 0; a < k_; ++a) trunc.sigma_bar_inv.push_back(bar_[a].inverse());

    const CovarianceEstimates est =
        estimate_covariances(*dist_, coeff, trunc, k_, options_.n_mc, options_.burn_in_per_arm, rng(), options_.exec);
    const double w = options_.smoothing;
    last_.cond_tilde = 1.0;
    last_.sandwich_lo = std::numeric_limits<double>::infinity();
    last_.sandwich_hi = 0.0;
    for (int a = 0; a < k_; ++a) {
        bar_[a] = (1.0 - w) * bar_[a] + w * est.sigma_bar[a];
        tilde_[a] = (1.0 - w) * tilde_[a] + w * est.sigma_tilde[a];
        tilde_inv_[a] = tilde_[a].inverse();
        Eigen::SelfAdjointEigenSolver<Mat> eig(tilde_[a], Eigen::EigenvaluesOnly);
        last_.cond_tilde = std::max(last_.cond_tilde, eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff());
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat> gen(bar_[a], tilde_[a], Eigen::EigenvaluesOnly);
        last_.sandwich_lo = std::min(last_.sandwich_lo, gen.eigenvalues().minCoeff());
        last_.sandwich_hi = std::max(last_.sandwich_hi, gen.eigenvalues().maxCoeff());
    }

    const TruncatedDraw draw = truncated_sample(x, coeff(x), trunc, rng, options_.burn_in_per_arm);
    point_ = draw.point;
    last_.rejections = draw.rejections;
    std::vector<double> probs(point_.data(), point_.data() + k_);
    return sample_discrete(probs, rng);
}

void MwuLc::feedback(const Vec& x, int action, double loss, int upd, double q) {
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("MWU-LC: update probability outside (0, 1]");
    q_ = q;
    state_.min_q = std::min(state_.min_q, q);
    const double bound = 2.0 * std::sqrt(q) / (std::sqrt(800.0 * state_.dim * k_) * last_.gamma_tilde);
    if (last_.eta > bound * (1.0 + 1e-12)) ++eta_bound_violations_;
    last_.xi = loss - x.dot(m_now_[action]);
    if (k_ > 1) {
        const auto est = mwu_estimate(point_, x, loss, action, m_now_, tilde_inv_, upd, q_);
        for (int a = 0; a < k_; ++a) state_.cum_est.col(a) += est[a];
    }
    if (upd != 0) {
        const double g = truncation_level(state_.dim, k_, state_.t);
        state_.beta_sum_over_q += 16.0 * g * g * last_.xi * last_.xi / q_;
        if (owns_predictor_) predictor_update(*predictor_, x, arm_map_[action], loss);
    }
}

MwuLcPolicy::MwuLcPolicy(const ContextDistribution& dist, int num_actions, MwuOptions options) {
    const Spanner sp = barycentric_spanner(dist.support);
    auto pred = std::make_shared<PredictorState>(make_predictor(sp.S, num_actions, dist.support));
    std::vector<int> arms(num_actions);
    for (int a = 0; a < num_actions; ++a) arms[a] = a;
    learner_ = std::make_unique<MwuLc>(dist, num_actions, pred, arms, true, options);
}

std::vector<std::string> MwuLcPolicy::diagnostic_names() const {
    return {"rejection_count", "eta_mwu", "xi", "cond_sigma_tilde", "sandwich_lo", "sandwich_hi"};
}

std::vector<double> MwuLcPolicy::diagnostics() const {
    const auto& l = learner_->last();
    return {static_cast<double>(l.rejections), l.eta, l.xi, l.cond_tilde, l.sandwich_lo, l.sandwich_hi};
}

}  // namespace bobw
