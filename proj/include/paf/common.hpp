#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

namespace paf {

using Rng = std::mt19937_64;

// Hashes (seed, stream) into an independent seed so that per-worker and
// per-episode generators never share state.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

inline double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive bounds
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

int default_workers();

// Runs fn(begin, end, worker) on `workers` threads over a static contiguous
// partition of [0, n). Chunk boundaries depend only on (n, workers), so any
// reduction done per worker and merged in worker order is reproducible.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t, std::size_t, int)>& fn);

// Shortest decimal forms that round-trip exactly.
std::string fmt_f32(float v);    // 9 significant digits
std::string fmt_f64(double v);   // 17 significant digits
std::string fmt_fixed(double v, int decimals);

}  // namespace paf
