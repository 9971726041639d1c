#include "mlap/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace mlap {

namespace {
// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
  std::uint64_t s = mix64(base);
  s = mix64(s ^ mix64(a + 0x1ull));
  s = mix64(s ^ mix64(b + 0x2ull));
  s = mix64(s ^ mix64(c + 0x3ull));
  return s;
}

std::mt19937_64 make_engine(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                            std::uint64_t c) {
  return std::mt19937_64(mix_seed(base, a, b, c));
}

void fill_normal(std::mt19937_64& eng, std::span<double> out, double mean, double sd) {
  std::normal_distribution<double> dist(mean, sd);
  for (double& x : out) x = dist(eng);
}

void fill_uniform(std::mt19937_64& eng, std::span<double> out, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& x : out) x = dist(eng);
}

std::vector<std::size_t> shuffle_indices(std::mt19937_64& eng, std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> dist(0, i - 1);
    std::swap(idx[i - 1], idx[dist(eng)]);
  }
  return idx;
}

std::vector<std::size_t> sample_distinct(std::mt19937_64& eng, std::size_t n,
                                         std::size_t k) {
  if (k > n) throw std::invalid_argument("sample_distinct: k > n");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t t = 0; t < k; ++t) {
    std::uniform_int_distribution<std::size_t> dist(t, n - 1);
    std::swap(idx[t], idx[dist(eng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace mlap
