/// @file util.hpp
/// @brief Small shared helpers: bounded worker fan-out and number formatting.

#pragma once

#include <functional>
#include <string>

namespace hydropinn {

/// Worker cap: HYDROPINN_THREADS when set (>=1), else hardware concurrency.
[[nodiscard]] int worker_count();

/// Runs fn(0..n-1), fanning out to at most worker_count() threads. Callers
/// own determinism: results must be combined in index order afterwards.
/// The first exception thrown by any worker is rethrown.
void parallel_for(int n, const std::function<void(int)>& fn);

/// Shortest decimal form that round-trips a double (used by every CSV writer
/// so identical runs emit identical bytes).
[[nodiscard]] std::string format_double(double x);

}  // namespace hydropinn
