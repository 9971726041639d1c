#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mlap/stochnet.hpp"

namespace mlap {

enum class TransformKind { None, LabelPerm, PixelSwaps };

struct TaskTransform {
  TransformKind kind = TransformKind::None;
  std::vector<int> label_perm;  // class bijection (LabelPerm)
  std::vector<std::pair<std::size_t, std::size_t>> swaps;  // applied in order
};

struct TaskDataset {
  Batch train;
  Batch test;
  TaskTransform transform;
  std::uint64_t seed = 0;
  std::string name;

  std::size_t m() const { return train.size(); }
};

Batch gather(const Batch& full, const std::vector<std::size_t>& idx);

}  // namespace mlap
