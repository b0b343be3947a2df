#pragma once

#include <iosfwd>

namespace bobw {

// Fast invariant suite behind `bobw selftest`. Prints one line per check and
// returns the number of failed checks.
int run_selftest(std::ostream& out);

}  // namespace bobw
