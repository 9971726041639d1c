#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "mlap/envgen.hpp"
#include "mlap/kernels.hpp"
#include "mlap/meta_trainer.hpp"
#include "mlap/rng.hpp"

using namespace mlap;

namespace {

struct ThreadGuard {
  ~ThreadGuard() { kernels::set_threads(1); }
};

Mat random_mat(std::mt19937_64& eng, std::size_t r, std::size_t c) {
  Mat m(r, c);
  fill_uniform(eng, m.data, -1.0, 1.0);
  return m;
}

Vec random_vec(std::mt19937_64& eng, std::size_t n, double lo = -1.0,
               double hi = 1.0) {
  Vec v(n);
  fill_uniform(eng, v, lo, hi);
  return v;
}

}  // namespace

TEST_CASE("kernels: parallel variants are bit-identical to the serial reference") {
  ThreadGuard guard;
  auto eng = make_engine(99);
  // Shapes straddle the parallel grain sizes: tiny, odd, and larger-than-core.
  const std::vector<std::array<std::size_t, 3>> shapes{
      {1, 1, 1}, {3, 5, 2}, {17, 7, 13}, {64, 33, 10}, {5, 128, 67}};
  for (int threads : {2, 3, 8}) {
    for (const auto& [batch, fi, fo] : shapes) {
      const Mat x = random_mat(eng, batch, fi);
      const Vec mu_w = random_vec(eng, fi * fo);
      const Vec s2_w = random_vec(eng, fi * fo, 0.01, 1.0);
      const Vec mu_b = random_vec(eng, fo);
      const Vec s2_b = random_vec(eng, fo, 0.01, 1.0);
      const Mat dz = random_mat(eng, batch, fo);
      const Mat dv = random_mat(eng, batch, fo);

      Mat mean_s(batch, fo), var_s(batch, fo), mean_p(batch, fo), var_p(batch, fo);
      kernels::serial::dense_mean_var(x, mu_w, s2_w, mu_b, s2_b, fo, mean_s, var_s);
      kernels::set_threads(threads);
      kernels::par::dense_mean_var(x, mu_w, s2_w, mu_b, s2_b, fo, mean_p, var_p);
      kernels::set_threads(1);
      CHECK(mean_s.data == mean_p.data);
      CHECK(var_s.data == var_p.data);

      Vec dmw_s(fi * fo, 0.0), dsw_s(fi * fo, 0.0), dmb_s(fo, 0.0), dsb_s(fo, 0.0);
      Vec dmw_p(fi * fo, 0.0), dsw_p(fi * fo, 0.0), dmb_p(fo, 0.0), dsb_p(fo, 0.0);
      kernels::serial::dense_grad_params(x, dz, dv, dmw_s, dsw_s, dmb_s, dsb_s);
      kernels::set_threads(threads);
      kernels::par::dense_grad_params(x, dz, dv, dmw_p, dsw_p, dmb_p, dsb_p);
      kernels::set_threads(1);
      CHECK(dmw_s == dmw_p);
      CHECK(dsw_s == dsw_p);
      CHECK(dmb_s == dmb_p);
      CHECK(dsb_s == dsb_p);

      Mat dx_s(batch, fi), dx_p(batch, fi);
      kernels::serial::dense_grad_input(x, dz, dv, mu_w, s2_w, fo, dx_s);
      kernels::set_threads(threads);
      kernels::par::dense_grad_input(x, dz, dv, mu_w, s2_w, fo, dx_p);
      kernels::set_threads(1);
      CHECK(dx_s.data == dx_p.data);

      Mat m2_s(batch, fo), m2_p(batch, fo);
      kernels::serial::dense_mean(x, mu_w, mu_b, fo, m2_s);
      kernels::set_threads(threads);
      kernels::par::dense_mean(x, mu_w, mu_b, fo, m2_p);
      kernels::set_threads(1);
      CHECK(m2_s.data == m2_p.data);

      Vec gmw_s(fi * fo, 0.0), gmb_s(fo, 0.0), gmw_p(fi * fo, 0.0), gmb_p(fo, 0.0);
      kernels::serial::dense_grad_params_mean(x, dz, gmw_s, gmb_s);
      kernels::set_threads(threads);
      kernels::par::dense_grad_params_mean(x, dz, gmw_p, gmb_p);
      kernels::set_threads(1);
      CHECK(gmw_s == gmw_p);
      CHECK(gmb_s == gmb_p);

      Mat gx_s(batch, fi), gx_p(batch, fi);
      kernels::serial::dense_grad_input_mean(dz, mu_w, fi, gx_s);
      kernels::set_threads(threads);
      kernels::par::dense_grad_input_mean(dz, mu_w, fi, gx_p);
      kernels::set_threads(1);
      CHECK(gx_s.data == gx_p.data);
    }
  }
}

TEST_CASE("dispatcher respects the thread setting") {
  ThreadGuard guard;
  kernels::set_threads(1);
  CHECK(kernels::threads() == 1);
  kernels::set_threads(4);
  CHECK(kernels::threads() == 4);
  kernels::set_threads(0);  // clamps to at least 1
  CHECK(kernels::threads() >= 1);
}

TEST_CASE("joint_eval: worker count does not change values or gradients") {
  ThreadGuard guard;
  const NetworkArch arch{{6, 8, 3}};
  StochasticNet prior = make_net(arch);
  auto eng = make_engine(7);
  init_net(prior, eng);
  std::vector<StochasticNet> phis(3, prior);
  for (auto& p : phis) {
    Vec f = flatten(p);
    Vec jitter(f.size());
    fill_uniform(eng, jitter, -0.05, 0.05);
    for (std::size_t k = 0; k < f.size(); ++k) f[k] += jitter[k];
    unflatten(p, f);
  }
  std::vector<Batch> batches(3);
  for (auto& b : batches) {
    b.inputs = random_mat(eng, 16, 6);
    b.labels.assign(16, 0);
    for (std::size_t i = 0; i < 16; ++i) b.labels[i] = static_cast<int>(i % 3);
  }
  std::vector<TaskSlice> slices;
  for (std::size_t i = 0; i < 3; ++i)
    slices.push_back({&phis[i], &batches[i], 64});

  TrainConfig cfg;
  cfg.objective.kind = ObjectiveKind::Seeger;
  cfg.objective.n_tasks = 3;
  cfg.mc_samples = 2;

  TrainConfig c1 = cfg, c4 = cfg;
  c1.workers = 1;
  c4.workers = 4;
  const JointEval a = joint_eval(prior, slices, c1, true, 111);
  const JointEval b = joint_eval(prior, slices, c4, true, 111);
  CHECK(a.value == b.value);
  CHECK(a.d_theta == b.d_theta);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.d_phi[i] == b.d_phi[i]);
}

TEST_CASE("meta_train: worker count does not change the trained parameters") {
  ThreadGuard guard;
  const BaseDataset base = gen_blobs(3, 6, 40, 0.05, 21);
  std::vector<TaskDataset> tasks;
  for (std::uint64_t i = 0; i < 3; ++i)
    tasks.push_back(make_permuted_labels_task(base, 50 + i, 30, 20));
  const NetworkArch arch{{6, 8, 3}};

  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 16;
  cfg.lr = 5e-3;
  cfg.seed = 13;
  cfg.objective.kind = ObjectiveKind::McAllester;

  TrainConfig c1 = cfg, c3 = cfg;
  c1.workers = 1;
  c3.workers = 3;
  const MetaTrainResult r1 = meta_train(tasks, arch, c1);
  const MetaTrainResult r3 = meta_train(tasks, arch, c3);
  CHECK(flatten(r1.prior) == flatten(r3.prior));
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(flatten(r1.posteriors[i]) == flatten(r3.posteriors[i]));
  for (std::size_t e = 0; e < r1.history.size(); ++e)
    CHECK(r1.history[e].objective == r3.history[e].objective);
}
