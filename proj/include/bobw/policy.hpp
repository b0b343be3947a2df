#pragma once

#include "bobw/types.hpp"

#include <string>
#include <vector>

namespace bobw {

// A learner driven by the harness: one act() then one observe() per round.
class Policy {
public:
    virtual ~Policy() = default;

    virtual std::string name() const = 0;
    virtual int act(const Vec& x, Rng& rng) = 0;
    virtual void observe(const Vec& x, int action, double loss, Rng& rng) = 0;

    // Per-round diagnostics of the last completed round, streamed to traces.
    virtual std::vector<std::string> diagnostic_names() const { return {}; }
    virtual std::vector<double> diagnostics() const { return {}; }

    // Extra context draws consumed outside the trajectory (MGR resampling).
    virtual long extra_draws() const { return 0; }
    virtual long invariant_violations() const { return 0; }
};

}  // namespace bobw
