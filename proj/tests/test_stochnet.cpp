#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mlap/rng.hpp"
#include "mlap/stochnet.hpp"

using namespace mlap;

namespace {

StochasticNet seeded_net(const NetworkArch& arch, std::uint64_t seed) {
  StochasticNet net = make_net(arch);
  auto eng = make_engine(seed);
  init_net(net, eng);
  return net;
}

Mat random_inputs(std::mt19937_64& eng, std::size_t n, std::size_t d) {
  Mat x(n, d);
  fill_uniform(eng, x.data, -1.0, 1.0);
  return x;
}

}  // namespace

TEST_CASE("arch validation") {
  CHECK_THROWS_AS(NetworkArch{{5}}.validate(), std::invalid_argument);
  CHECK_THROWS_AS((NetworkArch{{5, 0, 2}}).validate(), std::invalid_argument);
  const NetworkArch ok{{5, 3, 2}};
  ok.validate();
  CHECK(ok.n_layers() == 2);
  CHECK(ok.input_dim() == 5);
  CHECK(ok.output_dim() == 2);
}

TEST_CASE("init ranges: glorot mu, zero bias mu, rho near -10") {
  const NetworkArch arch{{6, 4, 3}};
  const StochasticNet net = seeded_net(arch, 3);
  for (const auto& l : net.layers) {
    const double a = std::sqrt(6.0 / static_cast<double>(l.fan_in + l.fan_out));
    for (double w : l.w.mu) CHECK(std::fabs(w) <= a);
    for (double b : l.b.mu) CHECK(b == 0.0);
    for (double r : l.w.rho) CHECK(std::fabs(r + 10.0) < 1.0);
    for (double r : l.b.rho) CHECK(std::fabs(r + 10.0) < 1.0);
  }
}

TEST_CASE("flatten/unflatten round trip") {
  const NetworkArch arch{{4, 5, 2}};
  StochasticNet a = seeded_net(arch, 4);
  const Vec flat = flatten(a);
  CHECK(flat.size() == a.n_flat());
  StochasticNet b = make_net(arch);
  unflatten(b, flat);
  CHECK(flatten(b) == flat);
  CHECK_THROWS_AS(unflatten(b, Vec(3, 0.0)), std::invalid_argument);
}

TEST_CASE("forward_mean matches a hand computation") {
  // Single layer 2 -> 1 (identity output): z = x . mu_w + mu_b.
  StochasticNet net = make_net(NetworkArch{{2, 1}});
  net.layers[0].w.mu = {1.0, 2.0};
  net.layers[0].w.rho = {-10.0, -10.0};
  net.layers[0].b.mu = {0.5};
  net.layers[0].b.rho = {-10.0};
  Mat x(1, 2);
  x(0, 0) = 1.0;
  x(0, 1) = 2.0;
  const Mat out = forward_mean(net, x);
  CHECK(out(0, 0) == doctest::Approx(1.0 + 4.0 + 0.5).epsilon(1e-15));
}

TEST_CASE("elu hidden activation on the mean path") {
  // 1 -> 1 -> 1 with unit weight, so hidden preact = x; ELU(-1) = e^-1 - 1.
  StochasticNet net = make_net(NetworkArch{{1, 1, 1}});
  for (auto& l : net.layers) {
    l.w.mu = {1.0};
    l.w.rho = {-10.0};
    l.b.mu = {0.0};
    l.b.rho = {-10.0};
  }
  Mat x(2, 1);
  x(0, 0) = -1.0;
  x(1, 0) = 2.0;  // positive branch is the identity
  const Mat out = forward_mean(net, x);
  CHECK(out(0, 0) == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-14));
  CHECK(out(1, 0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("forward_stochastic is deterministic given the engine seed") {
  const NetworkArch arch{{5, 4, 3}};
  const StochasticNet net = seeded_net(arch, 5);
  auto xin = make_engine(6);
  const Mat x = random_inputs(xin, 7, 5);
  auto e1 = make_engine(7), e2 = make_engine(7), e3 = make_engine(8);
  const ForwardRecord a = forward_stochastic(net, x, e1);
  const ForwardRecord b = forward_stochastic(net, x, e2);
  const ForwardRecord c = forward_stochastic(net, x, e3);
  CHECK(a.logits.data == b.logits.data);
  CHECK(a.logits.data != c.logits.data);
  CHECK(a.logits.rows == 7);
  CHECK(a.logits.cols == 3);
  for (const auto& l : a.layers)
    for (double v : l.var.data) CHECK(v > 0.0);
}

TEST_CASE("cross entropy: uniform logits, shift invariance, label checks") {
  Mat logits(2, 4, 0.0);
  const std::vector<int> labels{0, 3};
  const Vec ps = ce_per_sample(logits, labels);
  CHECK(ps[0] == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(ps[1] == doctest::Approx(std::log(4.0)).epsilon(1e-14));

  Mat shifted = logits;
  for (double& v : shifted.data) v += 100.0;
  const Vec ps2 = ce_per_sample(shifted, labels);
  CHECK(ps2[0] == doctest::Approx(ps[0]).epsilon(1e-12));

  CHECK_THROWS_AS(ce_per_sample(logits, {0, 4}), std::invalid_argument);
  CHECK_THROWS_AS(ce_per_sample(logits, {-1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(ce_per_sample(logits, {0}), std::invalid_argument);
}

TEST_CASE("loss_terms clips per sample at 1") {
  Mat logits(2, 2);
  // Sample 0: wildly wrong (CE >> 1). Sample 1: confident right (CE ~ 0).
  logits(0, 0) = -20.0;
  logits(0, 1) = 20.0;
  logits(1, 0) = 20.0;
  logits(1, 1) = -20.0;
  const std::vector<int> labels{0, 0};
  const LossTerms lt = loss_terms(logits, labels);
  CHECK(lt.ce > 10.0);
  CHECK(lt.clipped_err == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("argmax ties break toward the lowest class index") {
  Mat logits(2, 3, 0.0);     // all-equal row: predict class 0
  logits(1, 1) = 1.0;        // unique max: class 1
  logits(1, 2) = 1.0;        // tie between 1 and 2 at the max: still 1
  const std::vector<int> pred = predict(logits);
  CHECK(pred[0] == 0);
  CHECK(pred[1] == 1);
  CHECK(error_rate(logits, {0, 1}) == doctest::Approx(0.0));
  CHECK(error_rate(logits, {2, 2}) == doctest::Approx(1.0));
}

TEST_CASE("ce_grad rows sum to zero and scale linearly") {
  Mat logits(2, 3);
  auto eng = make_engine(9);
  fill_uniform(eng, logits.data, -1.0, 1.0);
  const std::vector<int> labels{2, 0};
  const Mat g1 = ce_grad(logits, labels, 1.0);
  const Mat g3 = ce_grad(logits, labels, 3.0);
  for (std::size_t r = 0; r < 2; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 3; ++c) s += g1(r, c);
    CHECK(s == doctest::Approx(0.0).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < g1.data.size(); ++i)
    CHECK(g3.data[i] == doctest::Approx(3.0 * g1.data[i]).epsilon(1e-12));
}

TEST_CASE("backward matches finite differences with frozen noise") {
  const NetworkArch arch{{2, 3, 2}};
  StochasticNet net = seeded_net(arch, 10);
  auto xin = make_engine(11);
  const Mat x = random_inputs(xin, 5, 2);
  const std::vector<int> labels{0, 1, 1, 0, 1};
  const std::uint64_t noise_seed = 12;

  auto loss_at = [&](const Vec& flat) {
    StochasticNet n2 = net;
    unflatten(n2, flat);
    auto eng = make_engine(noise_seed);
    const ForwardRecord rec = forward_stochastic(n2, x, eng);
    const Vec ps = ce_per_sample(rec.logits, labels);
    double s = 0.0;
    for (double v : ps) s += v;
    return s / static_cast<double>(ps.size());
  };

  const Vec flat0 = flatten(net);
  auto eng = make_engine(noise_seed);
  const ForwardRecord rec = forward_stochastic(net, x, eng);
  NetGrads g = make_grads(net);
  backward(net, rec, ce_grad(rec.logits, labels, 1.0), g);
  const Vec analytic = flatten(g);

  double worst = 0.0;
  for (std::size_t j = 0; j < flat0.size(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::fabs(flat0[j]));
    Vec up = flat0, dn = flat0;
    up[j] += h;
    dn[j] -= h;
    const double fd = (loss_at(up) - loss_at(dn)) / (2 * h);
    worst = std::max(worst, std::fabs(fd - analytic[j]) /
                                std::max(1e-2, std::fabs(fd) + std::fabs(analytic[j])));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("backward_mean matches finite differences and leaves rho grads zero") {
  const NetworkArch arch{{3, 4, 2}};
  StochasticNet net = seeded_net(arch, 13);
  auto xin = make_engine(14);
  const Mat x = random_inputs(xin, 6, 3);
  const std::vector<int> labels{0, 1, 0, 1, 1, 0};

  auto loss_at = [&](const Vec& flat) {
    StochasticNet n2 = net;
    unflatten(n2, flat);
    const Mat logits = forward_mean(n2, x);
    const Vec ps = ce_per_sample(logits, labels);
    double s = 0.0;
    for (double v : ps) s += v;
    return s / static_cast<double>(ps.size());
  };

  const ForwardMeanRecord rec = forward_mean_record(net, x);
  NetGrads g = make_grads(net);
  backward_mean(net, rec, ce_grad(rec.logits, labels, 1.0), g);
  for (const auto& lw : g.w)
    for (double v : lw.d_rho) CHECK(v == 0.0);

  const Vec flat0 = flatten(net);
  const Vec analytic = flatten(g);
  double worst = 0.0;
  for (std::size_t j = 0; j < flat0.size(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::fabs(flat0[j]));
    Vec up = flat0, dn = flat0;
    up[j] += h;
    dn[j] -= h;
    const double fd = (loss_at(up) - loss_at(dn)) / (2 * h);
    worst = std::max(worst, std::fabs(fd - analytic[j]) /
                                std::max(1e-2, std::fabs(fd) + std::fabs(analytic[j])));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("backward rejects a stale forward record") {
  const NetworkArch arch{{2, 2, 2}};
  StochasticNet net = seeded_net(arch, 15);
  auto xin = make_engine(16);
  const Mat x = random_inputs(xin, 3, 2);
  auto eng = make_engine(17);
  const ForwardRecord rec = forward_stochastic(net, x, eng);

  const StochasticNet other = seeded_net(NetworkArch{{2, 5, 2}}, 18);
  NetGrads g = make_grads(other);
  CHECK_THROWS_AS(backward(other, rec, ce_grad(rec.logits, {0, 1, 0}, 1.0), g),
                  std::invalid_argument);
}

TEST_CASE("net_kl sums layer KLs and vanishes at q == p") {
  const NetworkArch arch{{3, 3, 2}};
  const StochasticNet q = seeded_net(arch, 19);
  const StochasticNet p = seeded_net(arch, 20);
  CHECK(net_kl(q, q) == doctest::Approx(0.0).epsilon(1e-12));

  double manual = 0.0;
  for (std::size_t l = 0; l < q.layers.size(); ++l) {
    manual += kl_diag_gaussian(q.layers[l].w, p.layers[l].w);
    manual += kl_diag_gaussian(q.layers[l].b, p.layers[l].b);
  }
  CHECK(net_kl(q, p) == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("net_kl_grad matches per-layer kl grads") {
  const NetworkArch arch{{2, 2, 2}};
  const StochasticNet q = seeded_net(arch, 21);
  const StochasticNet p = seeded_net(arch, 22);
  NetGrads gq = make_grads(q), gp = make_grads(p);
  net_kl_grad(q, p, 2.0, gq, gp);

  DiagGaussianGrad mq(q.layers[0].w.size()), mp(q.layers[0].w.size());
  kl_diag_gaussian_grad(q.layers[0].w, p.layers[0].w, 2.0, mq, mp);
  for (std::size_t i = 0; i < mq.d_mu.size(); ++i) {
    CHECK(gq.w[0].d_mu[i] == doctest::Approx(mq.d_mu[i]).epsilon(1e-14));
    CHECK(gp.w[0].d_rho[i] == doctest::Approx(mp.d_rho[i]).epsilon(1e-14));
  }
}
