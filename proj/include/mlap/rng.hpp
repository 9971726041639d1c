#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mlap {

/// Deterministic seed derivation. Every random stream in the library is an
/// mt19937_64 engine seeded by mixing a base seed with purpose tags, so
/// parallel workers can draw from disjoint streams without shared state.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a = 0, std::uint64_t b = 0,
                       std::uint64_t c = 0);

std::mt19937_64 make_engine(std::uint64_t base, std::uint64_t a = 0,
                            std::uint64_t b = 0, std::uint64_t c = 0);

/// Fills `out` with i.i.d. normal draws. A fresh distribution object is used
/// per call so the draw sequence depends only on the engine state and count.
void fill_normal(std::mt19937_64& eng, std::span<double> out, double mean = 0.0,
                 double sd = 1.0);

void fill_uniform(std::mt19937_64& eng, std::span<double> out, double lo, double hi);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffle_indices(std::mt19937_64& eng, std::size_t n);

/// k distinct indices from 0..n-1, returned sorted.
std::vector<std::size_t> sample_distinct(std::mt19937_64& eng, std::size_t n,
                                         std::size_t k);

}  // namespace mlap
