#include "coed/rng.hpp"

#include <algorithm>
#include <cmath>

namespace coed::rng {

uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

Stream Stream::substream(uint64_t root, std::string_view name, uint64_t index) {
  uint64_t state = root;
  uint64_t a = splitmix64(state);
  state = a ^ fnv1a(name);
  uint64_t b = splitmix64(state);
  state = b ^ (index * 0x9e3779b97f4a7c15ull + 0x632be59bd9b4e019ull);
  return Stream(splitmix64(state));
}

double Stream::uniform() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Stream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

uint64_t Stream::below(uint64_t n) {
  if (n == 0) throw ContractViolation("Stream::below requires n > 0");
  uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
  uint64_t x = 0;
  do {
    x = gen_();
  } while (x >= limit);
  return x % n;
}

Vec normal_vector(Stream& s, Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = s.normal();
  return v;
}

std::vector<int> sample_indices(Stream& s, int n, int k) {
  if (k < 0 || k > n) throw ContractViolation("sample_indices requires 0 <= k <= n");
  // Partial Fisher-Yates on an explicit index array.
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < k; ++i) {
    int j = i + static_cast<int>(s.below(static_cast<uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  std::vector<int> out(idx.begin(), idx.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

double pairwise_sum(const std::vector<double>& v) {
  // Fixed binary tree reduction: result depends only on the element order,
  // never on thread count or chunking.
  std::vector<double> buf(v);
  size_t n = buf.size();
  if (n == 0) return 0.0;
  while (n > 1) {
    size_t half = n / 2;
    for (size_t i = 0; i < half; ++i) buf[i] = buf[2 * i] + buf[2 * i + 1];
    if (n % 2 == 1) {
      buf[half] = buf[n - 1];
      n = half + 1;
    } else {
      n = half;
    }
  }
  return buf[0];
}

}  // namespace coed::rng
