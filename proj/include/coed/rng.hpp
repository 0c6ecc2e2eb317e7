#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "coed/types.hpp"

namespace coed::rng {

uint64_t splitmix64(uint64_t& state);
uint64_t fnv1a(std::string_view s);

// Deterministic random stream. Substreams are derived from a root seed and a
// name (plus an optional index) so that independent consumers (noise, sketch,
// mc, random-designs, ...) never share draws and results do not depend on
// evaluation order or thread count.
class Stream {
 public:
  explicit Stream(uint64_t seed) : gen_(seed) {}

  static Stream substream(uint64_t root, std::string_view name, uint64_t index = 0);

  // Uniform on [0,1) with 53-bit resolution.
  double uniform();

  // Standard normal via Box-Muller (pair cached); avoids the
  // implementation-defined std::normal_distribution.
  double normal();

  // Uniform integer in [0, n) by rejection.
  uint64_t below(uint64_t n);

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

Vec normal_vector(Stream& s, Eigen::Index n);

// k distinct indices from {0,...,n-1}, returned sorted.
std::vector<int> sample_indices(Stream& s, int n, int k);

// Order-independent deterministic reduction (pairwise/tree summation).
double pairwise_sum(const std::vector<double>& v);

}  // namespace coed::rng
