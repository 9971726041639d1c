#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "mlap/envgen.hpp"

using namespace mlap;

namespace {

/// Index of the unique base row whose input vector equals `row` exactly
/// (task rows are byte copies of base rows, modulo recorded transforms).
std::size_t find_base_row(const BaseDataset& base, const double* row) {
  for (std::size_t r = 0; r < base.size(); ++r) {
    if (std::equal(row, row + base.inputs.cols, base.inputs.row(r))) return r;
  }
  REQUIRE(false);
  return 0;
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(bool(out));
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void push_be_u32(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(static_cast<unsigned char>(x >> 24));
  v.push_back(static_cast<unsigned char>(x >> 16));
  v.push_back(static_cast<unsigned char>(x >> 8));
  v.push_back(static_cast<unsigned char>(x));
}

std::vector<unsigned char> idx_images(std::uint32_t n, std::uint32_t rows,
                                      std::uint32_t cols,
                                      const std::vector<unsigned char>& pixels) {
  std::vector<unsigned char> v;
  push_be_u32(v, 0x00000803u);
  push_be_u32(v, n);
  push_be_u32(v, rows);
  push_be_u32(v, cols);
  v.insert(v.end(), pixels.begin(), pixels.end());
  return v;
}

std::vector<unsigned char> idx_labels(std::uint32_t n,
                                      const std::vector<unsigned char>& labels) {
  std::vector<unsigned char> v;
  push_be_u32(v, 0x00000801u);
  push_be_u32(v, n);
  v.insert(v.end(), labels.begin(), labels.end());
  return v;
}

}  // namespace

TEST_CASE("gen_blobs: shapes, balance, range, determinism") {
  const BaseDataset ds = gen_blobs(3, 5, 7, 0.1, 42);
  CHECK(ds.size() == 21);
  CHECK(ds.inputs.cols == 5);
  CHECK(ds.class_count == 3);
  std::vector<int> counts(3, 0);
  for (int y : ds.labels) counts[static_cast<std::size_t>(y)]++;
  CHECK(counts == std::vector<int>{7, 7, 7});
  for (double x : ds.inputs.data) {
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
  const BaseDataset again = gen_blobs(3, 5, 7, 0.1, 42);
  CHECK(ds.inputs.data == again.inputs.data);
  const BaseDataset other = gen_blobs(3, 5, 7, 0.1, 43);
  CHECK(ds.inputs.data != other.inputs.data);
}

TEST_CASE("gen_blobs rejects bad parameters") {
  CHECK_THROWS_AS(gen_blobs(0, 5, 7, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_blobs(3, 0, 7, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_blobs(3, 5, 7, 0.0, 1), std::invalid_argument);
}

TEST_CASE("BaseDataset::validate catches inconsistencies") {
  BaseDataset ds = gen_blobs(3, 4, 5, 0.1, 7);
  ds.labels.pop_back();
  CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
  ds.labels.push_back(3);  // out of range for class_count = 3
  CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
}

TEST_CASE("permuted-labels task: sizes, bijection, disjoint splits") {
  const BaseDataset base = gen_blobs(4, 6, 20, 0.05, 9);
  const TaskDataset task = make_permuted_labels_task(base, 17, 30, 25);
  CHECK(task.train.size() == 30);
  CHECK(task.test.size() == 25);
  CHECK(task.transform.kind == TransformKind::LabelPerm);

  // The recorded permutation is a bijection on classes.
  std::set<int> image(task.transform.label_perm.begin(),
                      task.transform.label_perm.end());
  CHECK(image.size() == 4);
  CHECK(*image.begin() == 0);
  CHECK(*image.rbegin() == 3);

  // Every task label equals the permutation applied to its base row's label.
  auto check_batch = [&](const Batch& b) {
    for (std::size_t r = 0; r < b.size(); ++r) {
      const std::size_t br = find_base_row(base, b.inputs.row(r));
      CHECK(b.labels[r] ==
            task.transform.label_perm[static_cast<std::size_t>(base.labels[br])]);
    }
  };
  check_batch(task.train);
  check_batch(task.test);

  // Train and test draw disjoint base rows.
  std::set<std::size_t> tr_rows, te_rows;
  for (std::size_t r = 0; r < task.train.size(); ++r)
    tr_rows.insert(find_base_row(base, task.train.inputs.row(r)));
  for (std::size_t r = 0; r < task.test.size(); ++r)
    te_rows.insert(find_base_row(base, task.test.inputs.row(r)));
  std::vector<std::size_t> overlap;
  std::set_intersection(tr_rows.begin(), tr_rows.end(), te_rows.begin(),
                        te_rows.end(), std::back_inserter(overlap));
  CHECK(overlap.empty());
}

TEST_CASE("permuted-labels tasks differ across seeds but share the pool") {
  const BaseDataset base = gen_blobs(5, 6, 30, 0.05, 11);
  const TaskDataset a = make_permuted_labels_task(base, 1, 40, 20);
  const TaskDataset b = make_permuted_labels_task(base, 2, 40, 20);
  const bool perm_differs = a.transform.label_perm != b.transform.label_perm;
  const bool rows_differ = a.train.inputs.data != b.train.inputs.data;
  CHECK((perm_differs || rows_differ));
  const TaskDataset a2 = make_permuted_labels_task(base, 1, 40, 20);
  CHECK(a.train.inputs.data == a2.train.inputs.data);
  CHECK(a.train.labels == a2.train.labels);
  CHECK(a.transform.label_perm == a2.transform.label_perm);
}

TEST_CASE("task split rejects oversized requests") {
  const BaseDataset base = gen_blobs(2, 4, 10, 0.1, 3);
  CHECK_THROWS_AS(make_permuted_labels_task(base, 1, 15, 10), std::invalid_argument);
  CHECK_THROWS_AS(make_permuted_labels_task(base, 1, 1, 2), std::invalid_argument);
}

TEST_CASE("apply_swaps: ordered transpositions") {
  std::vector<double> x{1.0, 2.0, 3.0};
  apply_swaps(x, {{0, 1}, {1, 2}});
  // (a,b,c) -> swap01 -> (b,a,c) -> swap12 -> (b,c,a)
  CHECK(x == std::vector<double>{2.0, 3.0, 1.0});
  CHECK_THROWS_AS(apply_swaps(x, {{0, 3}}), std::invalid_argument);
}

TEST_CASE("permuted-pixels task: swaps recorded and applied; 0 swaps = subsample") {
  const BaseDataset base = gen_blobs(3, 8, 20, 0.05, 13);
  const TaskDataset task = make_permuted_pixels_task(base, 21, 30, 20, 15);
  CHECK(task.transform.kind == TransformKind::PixelSwaps);
  CHECK(task.transform.swaps.size() == 30);
  for (const auto& [a, b] : task.transform.swaps) {
    CHECK(a < 8);
    CHECK(b < 8);
  }
  // Undoing the swaps (reverse order) must recover an exact base row.
  std::vector<std::pair<std::size_t, std::size_t>> undo(
      task.transform.swaps.rbegin(), task.transform.swaps.rend());
  for (std::size_t r = 0; r < task.train.size(); ++r) {
    std::vector<double> row(task.train.inputs.row(r),
                            task.train.inputs.row(r) + 8);
    apply_swaps(row, undo);
    find_base_row(base, row.data());  // REQUIREs a match internally
  }
  // Labels are untouched in this family.
  const TaskDataset plain = make_permuted_pixels_task(base, 21, 0, 20, 15);
  for (std::size_t r = 0; r < plain.train.size(); ++r) {
    const std::size_t br = find_base_row(base, plain.train.inputs.row(r));
    CHECK(plain.train.labels[r] == base.labels[br]);
  }
}

TEST_CASE("idx round trip and error taxonomy") {
  const std::string dir = "idx_fixture_tmp";
  std::remove((dir + "_img").c_str());

  // 2 images of 2x2 pixels; labels 1 and 0.
  const std::vector<unsigned char> pixels{0, 51, 102, 255, 255, 204, 153, 0};
  const std::string img_path = dir + "_img";
  const std::string lab_path = dir + "_lab";
  write_bytes(img_path, idx_images(2, 2, 2, pixels));
  write_bytes(lab_path, idx_labels(2, {1, 0}));

  const BaseDataset ds = load_idx(img_path, lab_path);
  CHECK(ds.size() == 2);
  CHECK(ds.inputs.cols == 4);
  CHECK(ds.class_count == 2);
  CHECK(ds.provenance == Provenance::IdxFiles);
  CHECK(ds.inputs(0, 0) == doctest::Approx(0.0));
  CHECK(ds.inputs(0, 1) == doctest::Approx(51.0 / 255.0));
  CHECK(ds.inputs(0, 3) == doctest::Approx(1.0));
  CHECK(ds.labels == std::vector<int>{1, 0});

  // Bad magic in the image file.
  write_bytes(img_path + ".bad", idx_labels(2, {0, 0}));
  CHECK_THROWS_AS(load_idx(img_path + ".bad", lab_path), IdxBadMagic);

  // Image/label count mismatch.
  write_bytes(lab_path + ".n3", idx_labels(3, {0, 0, 1}));
  CHECK_THROWS_AS(load_idx(img_path, lab_path + ".n3"), IdxCountMismatch);

  // Truncated pixel payload.
  write_bytes(img_path + ".cut", idx_images(2, 2, 2, {0, 51, 102}));
  CHECK_THROWS_AS(load_idx(img_path + ".cut", lab_path), IdxTruncated);

  // Missing file.
  CHECK_THROWS_AS(load_idx("no_such_file.idx", lab_path), std::runtime_error);

  for (const char* suffix : {"_img", "_lab", "_img.bad", "_lab.n3", "_img.cut"})
    std::remove((dir + suffix).c_str());
}
