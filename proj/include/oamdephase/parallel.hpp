#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace oamd {

/// Worker count from the OAMDEPHASE_WORKERS environment variable, or 1.
unsigned default_workers();

/// Runs body(begin, end) over a static partition of [0, n) on `workers`
/// threads. Callers must only write to per-index slots.
void parallel_for(std::size_t n, unsigned workers,
                  const std::function<void(std::size_t, std::size_t)>& body);

/// Pairwise summation with a split point that depends only on the length,
/// so the rounding is identical however the values were produced.
double pairwise_sum(std::span<const double> values);

}  // namespace oamd
