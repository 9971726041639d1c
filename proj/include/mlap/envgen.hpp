#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include "mlap/dataset.hpp"

namespace mlap {

enum class Provenance { SyntheticBlobs, IdxFiles };

struct BaseDataset {
  Mat inputs;  // N x D, features in [0,1]
  std::vector<int> labels;
  std::size_t class_count = 0;
  Provenance provenance = Provenance::SyntheticBlobs;
  std::string source_path;

  std::size_t size() const { return inputs.rows; }
  void validate() const;
};

/// Gaussian clusters with seeded centers in [0,1]^dim; samples clamped to
/// the unit cube; labels by cluster.
BaseDataset gen_blobs(std::size_t class_count, std::size_t dim,
                      std::size_t per_class, double spread, std::uint64_t seed);

/// Disjoint seeded train/test subsample with labels relabeled through a
/// seeded uniform class permutation.
TaskDataset make_permuted_labels_task(const BaseDataset& base, std::uint64_t seed,
                                      std::size_t m_train, std::size_t m_test);

/// Disjoint seeded train/test subsample with n_swaps seeded index-pair
/// transpositions applied (in order) to every input vector of both splits.
TaskDataset make_permuted_pixels_task(const BaseDataset& base, std::uint64_t seed,
                                      std::size_t n_swaps, std::size_t m_train,
                                      std::size_t m_test);

/// Applies a swap list to one feature vector in order (helper, exposed for
/// tests).
void apply_swaps(std::span<double> x,
                 const std::vector<std::pair<std::size_t, std::size_t>>& swaps);

// IDX ingestion. Distinct error types so callers can tell failures apart.
struct IdxBadMagic : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IdxTruncated : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IdxCountMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses big-endian IDX image (magic 0x00000803) and label (0x00000801)
/// files; pixels rescaled to [0,1].
BaseDataset load_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace mlap
