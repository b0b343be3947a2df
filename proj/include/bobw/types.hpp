#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace bobw {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// All randomness flows through explicitly owned engines so that a
// (config, seed) pair fixes every draw.
using Rng = std::mt19937_64;

// Derives an independent engine for sub-stream `stream` of `seed`.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x5eedu};
    return Rng(seq);
}

// 53 random bits in [0, 1); spelled out so streams do not depend on the
// standard library's distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Inverse-CDF draw from a probability vector; the last index absorbs rounding.
inline int sample_discrete(const std::vector<double>& probs, Rng& rng) {
    double u = uniform01(rng);
    double acc = 0.0;
    const int n = static_cast<int>(probs.size());
    for (int i = 0; i < n; ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    for (int i = n - 1; i >= 0; --i)
        if (probs[i] > 0.0) return i;
    return n - 1;
}

// Raised when a runtime invariant of one of the learners is violated.
class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bobw
