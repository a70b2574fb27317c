#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ambig {

/// Seeded generator with a fully specified draw procedure, so samples are
/// reproducible across standard libraries and machines.
///
/// The engine is std::mt19937_64 (bit-exact by the standard) seeded with
/// splitmix64(seed). Bounded draws use rejection sampling on the raw 64-bit
/// output rather than std::uniform_int_distribution, whose algorithm is
/// implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  /// Generator for a named stream under `seed`, e.g. one per domain.
  static SeededRng for_stream(std::uint64_t seed, std::string_view stream);

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Picks min(k, n) distinct indices from [0, n) uniformly, via a partial
  /// Fisher-Yates shuffle of 0..n-1. Order is the draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);

}  // namespace ambig
