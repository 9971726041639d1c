#include "mlap/envgen.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>

#include "mlap/rng.hpp"

namespace mlap {

namespace {
constexpr std::uint64_t kTagCenters = 201;
constexpr std::uint64_t kTagPoints = 202;
constexpr std::uint64_t kTagSplit = 203;
constexpr std::uint64_t kTagLabelPerm = 204;
constexpr std::uint64_t kTagSwaps = 205;
}  // namespace

Batch gather(const Batch& full, const std::vector<std::size_t>& idx) {
  Batch b;
  b.inputs = Mat(idx.size(), full.inputs.cols);
  b.labels.resize(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    check_dim(idx[r] < full.inputs.rows, "gather: index out of range");
    const double* src = full.inputs.row(idx[r]);
    std::copy(src, src + full.inputs.cols, b.inputs.row(r));
    b.labels[r] = full.labels[idx[r]];
  }
  return b;
}

void BaseDataset::validate() const {
  check_dim(inputs.rows == labels.size(), "BaseDataset: inputs/labels mismatch");
  if (size() < class_count)
    throw std::invalid_argument("BaseDataset: fewer samples than classes");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= class_count)
      throw std::invalid_argument("BaseDataset: label out of range");
}

BaseDataset gen_blobs(std::size_t class_count, std::size_t dim,
                      std::size_t per_class, double spread, std::uint64_t seed) {
  if (class_count < 1 || dim < 1 || per_class < 1)
    throw std::invalid_argument("gen_blobs: counts must be >= 1");
  if (!(spread > 0.0)) throw std::invalid_argument("gen_blobs: spread must be > 0");

  Mat centers(class_count, dim);
  auto ceng = make_engine(mix_seed(seed, kTagCenters));
  fill_uniform(ceng, centers.data, 0.0, 1.0);

  BaseDataset ds;
  ds.class_count = class_count;
  ds.provenance = Provenance::SyntheticBlobs;
  ds.inputs = Mat(class_count * per_class, dim);
  ds.labels.resize(class_count * per_class);
  auto peng = make_engine(mix_seed(seed, kTagPoints));
  Vec noise(dim);
  std::size_t r = 0;
  for (std::size_t c = 0; c < class_count; ++c) {
    for (std::size_t p = 0; p < per_class; ++p, ++r) {
      fill_normal(peng, noise, 0.0, spread);
      double* row = ds.inputs.row(r);
      const double* ctr = centers.row(c);
      for (std::size_t k = 0; k < dim; ++k)
        row[k] = std::clamp(ctr[k] + noise[k], 0.0, 1.0);
      ds.labels[r] = static_cast<int>(c);
    }
  }
  return ds;
}

namespace {

Batch take(const BaseDataset& base, const std::vector<std::size_t>& idx) {
  Batch b;
  b.inputs = Mat(idx.size(), base.inputs.cols);
  b.labels.resize(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const double* src = base.inputs.row(idx[r]);
    std::copy(src, src + base.inputs.cols, b.inputs.row(r));
    b.labels[r] = base.labels[idx[r]];
  }
  return b;
}

/// Disjoint train/test row indices drawn without replacement.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const BaseDataset& base, std::uint64_t seed, std::size_t m_train,
    std::size_t m_test) {
  if (m_train < 2) throw std::invalid_argument("task split: m_train >= 2 required");
  if (m_train + m_test > base.size())
    throw std::invalid_argument("task split: not enough samples in base dataset");
  auto eng = make_engine(mix_seed(seed, kTagSplit));
  const std::vector<std::size_t> order = shuffle_indices(eng, base.size());
  std::vector<std::size_t> tr(order.begin(),
                              order.begin() + static_cast<std::ptrdiff_t>(m_train));
  std::vector<std::size_t> te(
      order.begin() + static_cast<std::ptrdiff_t>(m_train),
      order.begin() + static_cast<std::ptrdiff_t>(m_train + m_test));
  return {std::move(tr), std::move(te)};
}

}  // namespace

TaskDataset make_permuted_labels_task(const BaseDataset& base, std::uint64_t seed,
                                      std::size_t m_train, std::size_t m_test) {
  base.validate();
  auto [tr, te] = split_indices(base, seed, m_train, m_test);
  auto eng = make_engine(mix_seed(seed, kTagLabelPerm));
  const std::vector<std::size_t> p = shuffle_indices(eng, base.class_count);
  TaskDataset task;
  task.seed = seed;
  task.transform.kind = TransformKind::LabelPerm;
  task.transform.label_perm.assign(p.begin(), p.end());
  task.train = take(base, tr);
  task.test = take(base, te);
  for (int& y : task.train.labels) y = task.transform.label_perm[static_cast<std::size_t>(y)];
  for (int& y : task.test.labels) y = task.transform.label_perm[static_cast<std::size_t>(y)];
  task.name = "permuted-labels/" + std::to_string(seed);
  return task;
}

void apply_swaps(std::span<double> x,
                 const std::vector<std::pair<std::size_t, std::size_t>>& swaps) {
  for (const auto& [a, b] : swaps) {
    check_dim(a < x.size() && b < x.size(), "apply_swaps: index out of range");
    std::swap(x[a], x[b]);
  }
}

TaskDataset make_permuted_pixels_task(const BaseDataset& base, std::uint64_t seed,
                                      std::size_t n_swaps, std::size_t m_train,
                                      std::size_t m_test) {
  base.validate();
  auto [tr, te] = split_indices(base, seed, m_train, m_test);
  const std::size_t dim = base.inputs.cols;
  auto eng = make_engine(mix_seed(seed, kTagSwaps));
  std::uniform_int_distribution<std::size_t> dist(0, dim - 1);
  TaskDataset task;
  task.seed = seed;
  task.transform.kind = TransformKind::PixelSwaps;
  task.transform.swaps.reserve(n_swaps);
  for (std::size_t s = 0; s < n_swaps; ++s) {
    const std::size_t a = dist(eng);
    const std::size_t b = dist(eng);
    task.transform.swaps.emplace_back(a, b);
  }
  task.train = take(base, tr);
  task.test = take(base, te);
  for (std::size_t r = 0; r < task.train.inputs.rows; ++r)
    apply_swaps({task.train.inputs.row(r), dim}, task.transform.swaps);
  for (std::size_t r = 0; r < task.test.inputs.rows; ++r)
    apply_swaps({task.test.inputs.row(r), dim}, task.transform.swaps);
  task.name = "permuted-pixels/" + std::to_string(seed);
  return task;
}

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw IdxTruncated("idx: truncated header in " + path);
  return (static_cast<std::uint32_t>(buf[0]) << 24) |
         (static_cast<std::uint32_t>(buf[1]) << 16) |
         (static_cast<std::uint32_t>(buf[2]) << 8) | static_cast<std::uint32_t>(buf[3]);
}

}  // namespace

BaseDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);

  const std::uint32_t img_magic = read_be_u32(img, images_path);
  if (img_magic != 0x00000803u)
    throw IdxBadMagic("idx: bad image magic in " + images_path);
  const std::uint32_t n_img = read_be_u32(img, images_path);
  const std::uint32_t rows = read_be_u32(img, images_path);
  const std::uint32_t cols = read_be_u32(img, images_path);

  const std::uint32_t lab_magic = read_be_u32(lab, labels_path);
  if (lab_magic != 0x00000801u)
    throw IdxBadMagic("idx: bad label magic in " + labels_path);
  const std::uint32_t n_lab = read_be_u32(lab, labels_path);
  if (n_img != n_lab)
    throw IdxCountMismatch("idx: image count " + std::to_string(n_img) +
                           " != label count " + std::to_string(n_lab));

  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  BaseDataset ds;
  ds.provenance = Provenance::IdxFiles;
  ds.source_path = images_path;
  ds.inputs = Mat(n_img, dim);
  ds.labels.resize(n_img);

  std::vector<unsigned char> pix(dim);
  for (std::uint32_t i = 0; i < n_img; ++i) {
    img.read(reinterpret_cast<char*>(pix.data()), static_cast<std::streamsize>(dim));
    if (!img) throw IdxTruncated("idx: truncated pixel data in " + images_path);
    double* row = ds.inputs.row(i);
    for (std::size_t k = 0; k < dim; ++k)
      row[k] = static_cast<double>(pix[k]) / 255.0;
  }
  std::vector<unsigned char> lbl(n_lab);
  lab.read(reinterpret_cast<char*>(lbl.data()), static_cast<std::streamsize>(n_lab));
  if (!lab) throw IdxTruncated("idx: truncated label data in " + labels_path);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_lab; ++i) {
    ds.labels[i] = static_cast<int>(lbl[i]);
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.class_count = static_cast<std::size_t>(max_label) + 1;
  ds.validate();
  return ds;
}

}  // namespace mlap
