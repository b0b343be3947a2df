#pragma once

#include "bobw/types.hpp"

#include <cmath>
#include <vector>

namespace bobw::test {

// Streaming mean and standard error of a vector-valued sample.
struct Moments {
    Vec sum, sq;
    long n = 0;

    void add(const Vec& v) {
        if (n == 0) {
            sum = Vec::Zero(v.size());
            sq = Vec::Zero(v.size());
        }
        sum += v;
        sq += v.cwiseProduct(v);
        ++n;
    }
    Vec mean() const { return sum / static_cast<double>(n); }
    Vec se() const {
        const Vec m = mean();
        Vec var = sq / static_cast<double>(n) - m.cwiseProduct(m);
        return (var.cwiseMax(0.0) / static_cast<double>(n)).cwiseSqrt();
    }
};

// |mean - target| <= z * se per coordinate, with a floor for exact cases.
inline bool within_se(const Moments& m, const Vec& target, double z = 3.0, double floor = 1e-12) {
    const Vec mean = m.mean(), se = m.se();
    for (Eigen::Index i = 0; i < target.size(); ++i)
        if (std::abs(mean(i) - target(i)) > z * se(i) + floor) return false;
    return true;
}

inline Vec vec(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

inline Vec basis(int d, int i) {
    Vec e = Vec::Zero(d);
    e(i) = 1.0;
    return e;
}

}  // namespace bobw::test
