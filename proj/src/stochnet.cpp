#include "mlap/stochnet.hpp"

#include <algorithm>
#include <cmath>

#include "mlap/kernels.hpp"
#include "mlap/rng.hpp"

namespace mlap {

namespace {

double elu(double z) { return z > 0.0 ? z : std::expm1(z); }
double elu_prime(double z) { return z > 0.0 ? 1.0 : std::exp(z); }

Vec sigma2_vec(const Vec& rho) {
  Vec s2(rho.size());
  for (std::size_t k = 0; k < rho.size(); ++k) s2[k] = sigma2_of_rho(rho[k]);
  return s2;
}

}  // namespace

void NetworkArch::validate() const {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("NetworkArch: need at least input and output dims");
  for (std::size_t s : layer_sizes)
    if (s < 1) throw std::invalid_argument("NetworkArch: layer sizes must be >= 1");
}

std::size_t StochasticNet::n_weights() const {
  std::size_t d = 0;
  for (const auto& l : layers) d += l.w.size() + l.b.size();
  return d;
}

StochasticNet make_net(const NetworkArch& arch) {
  arch.validate();
  StochasticNet net;
  net.arch = arch;
  for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
    LayerDist ld;
    ld.fan_in = arch.layer_sizes[l];
    ld.fan_out = arch.layer_sizes[l + 1];
    ld.w.mu.assign(ld.fan_in * ld.fan_out, 0.0);
    ld.w.rho.assign(ld.fan_in * ld.fan_out, kRhoMin);
    ld.b.mu.assign(ld.fan_out, 0.0);
    ld.b.rho.assign(ld.fan_out, kRhoMin);
    net.layers.push_back(std::move(ld));
  }
  return net;
}

void init_net(StochasticNet& net, std::mt19937_64& eng) {
  for (auto& l : net.layers) {
    const double a =
        std::sqrt(6.0 / static_cast<double>(l.fan_in + l.fan_out));
    fill_uniform(eng, l.w.mu, -a, a);
    std::fill(l.b.mu.begin(), l.b.mu.end(), 0.0);
    fill_normal(eng, l.w.rho, -10.0, 0.1);
    fill_normal(eng, l.b.rho, -10.0, 0.1);
  }
}

Vec flatten(const StochasticNet& net) {
  Vec flat;
  flat.reserve(net.n_flat());
  for (const auto& l : net.layers) {
    flat.insert(flat.end(), l.w.mu.begin(), l.w.mu.end());
    flat.insert(flat.end(), l.w.rho.begin(), l.w.rho.end());
    flat.insert(flat.end(), l.b.mu.begin(), l.b.mu.end());
    flat.insert(flat.end(), l.b.rho.begin(), l.b.rho.end());
  }
  return flat;
}

void unflatten(StochasticNet& net, const Vec& flat) {
  check_dim(flat.size() == net.n_flat(), "unflatten: length mismatch");
  std::size_t at = 0;
  auto take = [&](Vec& dst) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(at),
              flat.begin() + static_cast<std::ptrdiff_t>(at + dst.size()),
              dst.begin());
    at += dst.size();
  };
  for (auto& l : net.layers) {
    take(l.w.mu);
    take(l.w.rho);
    take(l.b.mu);
    take(l.b.rho);
  }
}

void NetGrads::zero() {
  for (auto& g : w) {
    std::fill(g.d_mu.begin(), g.d_mu.end(), 0.0);
    std::fill(g.d_rho.begin(), g.d_rho.end(), 0.0);
  }
  for (auto& g : b) {
    std::fill(g.d_mu.begin(), g.d_mu.end(), 0.0);
    std::fill(g.d_rho.begin(), g.d_rho.end(), 0.0);
  }
}

NetGrads make_grads(const StochasticNet& net) {
  NetGrads g;
  for (const auto& l : net.layers) {
    g.w.emplace_back(l.w.size());
    g.b.emplace_back(l.b.size());
  }
  return g;
}

Vec flatten(const NetGrads& g) {
  Vec flat;
  for (std::size_t l = 0; l < g.w.size(); ++l) {
    flat.insert(flat.end(), g.w[l].d_mu.begin(), g.w[l].d_mu.end());
    flat.insert(flat.end(), g.w[l].d_rho.begin(), g.w[l].d_rho.end());
    flat.insert(flat.end(), g.b[l].d_mu.begin(), g.b[l].d_mu.end());
    flat.insert(flat.end(), g.b[l].d_rho.begin(), g.b[l].d_rho.end());
  }
  return flat;
}

void axpy_grads(double a, const NetGrads& x, NetGrads& y) {
  check_dim(x.w.size() == y.w.size(), "axpy_grads: layer count");
  auto acc = [a](const Vec& src, Vec& dst) {
    check_dim(src.size() == dst.size(), "axpy_grads: block size");
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] += a * src[k];
  };
  for (std::size_t l = 0; l < x.w.size(); ++l) {
    acc(x.w[l].d_mu, y.w[l].d_mu);
    acc(x.w[l].d_rho, y.w[l].d_rho);
    acc(x.b[l].d_mu, y.b[l].d_mu);
    acc(x.b[l].d_rho, y.b[l].d_rho);
  }
}

ForwardRecord forward_stochastic(const StochasticNet& net, const Mat& inputs,
                                 std::mt19937_64& eng) {
  check_dim(inputs.cols == net.arch.input_dim(), "forward: input dim mismatch");
  ForwardRecord rec;
  Mat x = inputs;
  const std::size_t L = net.layers.size();
  for (std::size_t l = 0; l < L; ++l) {
    const auto& ld = net.layers[l];
    LayerFwd lf;
    lf.x = std::move(x);
    const Vec s2w = sigma2_vec(ld.w.rho);
    const Vec s2b = sigma2_vec(ld.b.rho);
    kernels::dense_mean_var(lf.x, ld.w.mu, s2w, ld.b.mu, s2b, ld.fan_out, lf.mean,
                            lf.var);
    lf.eps = Mat(lf.x.rows, ld.fan_out);
    fill_normal(eng, lf.eps.data, 0.0, 1.0);
    lf.z = Mat(lf.x.rows, ld.fan_out);
    for (std::size_t k = 0; k < lf.z.data.size(); ++k)
      lf.z.data[k] = lf.mean.data[k] + std::sqrt(lf.var.data[k]) * lf.eps.data[k];
    if (l + 1 < L) {
      x = Mat(lf.z.rows, lf.z.cols);
      for (std::size_t k = 0; k < x.data.size(); ++k) x.data[k] = elu(lf.z.data[k]);
    } else {
      rec.logits = lf.z;
    }
    rec.layers.push_back(std::move(lf));
  }
  return rec;
}

Mat forward_mean(const StochasticNet& net, const Mat& inputs) {
  check_dim(inputs.cols == net.arch.input_dim(), "forward: input dim mismatch");
  Mat x = inputs;
  const std::size_t L = net.layers.size();
  for (std::size_t l = 0; l < L; ++l) {
    const auto& ld = net.layers[l];
    Mat z;
    kernels::dense_mean(x, ld.w.mu, ld.b.mu, ld.fan_out, z);
    if (l + 1 < L) {
      for (double& v : z.data) v = elu(v);
      x = std::move(z);
    } else {
      return z;
    }
  }
  return x;  // unreachable for valid archs
}

ForwardMeanRecord forward_mean_record(const StochasticNet& net, const Mat& inputs) {
  check_dim(inputs.cols == net.arch.input_dim(), "forward: input dim mismatch");
  ForwardMeanRecord rec;
  Mat x = inputs;
  const std::size_t L = net.layers.size();
  for (std::size_t l = 0; l < L; ++l) {
    const auto& ld = net.layers[l];
    LayerFwdMean lf;
    lf.x = std::move(x);
    kernels::dense_mean(lf.x, ld.w.mu, ld.b.mu, ld.fan_out, lf.z);
    if (l + 1 < L) {
      x = Mat(lf.z.rows, lf.z.cols);
      for (std::size_t k = 0; k < x.data.size(); ++k) x.data[k] = elu(lf.z.data[k]);
    } else {
      rec.logits = lf.z;
    }
    rec.layers.push_back(std::move(lf));
  }
  return rec;
}

Vec ce_per_sample(const Mat& logits, const std::vector<int>& labels) {
  check_dim(logits.rows == labels.size(), "loss: batch size mismatch");
  const std::size_t B = logits.rows, C = logits.cols;
  Vec out(B);
  for (std::size_t b = 0; b < B; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= C)
      throw std::invalid_argument("loss: label out of range");
    const double* row = logits.row(b);
    double mx = row[0];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    double lse = 0.0;
    for (std::size_t c = 0; c < C; ++c) lse += std::exp(row[c] - mx);
    out[b] = std::log(lse) + mx - row[static_cast<std::size_t>(y)];
  }
  return out;
}

LossTerms loss_terms(const Mat& logits, const std::vector<int>& labels) {
  const Vec ps = ce_per_sample(logits, labels);
  LossTerms t;
  for (double v : ps) {
    t.ce += v;
    t.clipped_err += std::min(1.0, v);
  }
  const double n = static_cast<double>(ps.size());
  t.ce /= n;
  t.clipped_err /= n;
  return t;
}

Mat ce_grad(const Mat& logits, const std::vector<int>& labels, double scale) {
  check_dim(logits.rows == labels.size(), "loss: batch size mismatch");
  const std::size_t B = logits.rows, C = logits.cols;
  Mat g(B, C);
  const double s = scale / static_cast<double>(B);
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = logits.row(b);
    double* gr = g.row(b);
    double mx = row[0];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    double lse = 0.0;
    for (std::size_t c = 0; c < C; ++c) lse += std::exp(row[c] - mx);
    for (std::size_t c = 0; c < C; ++c) gr[c] = s * std::exp(row[c] - mx) / lse;
    gr[static_cast<std::size_t>(labels[b])] -= s;
  }
  return g;
}

std::vector<int> predict(const Mat& logits) {
  std::vector<int> out(logits.rows);
  for (std::size_t b = 0; b < logits.rows; ++b) {
    const double* row = logits.row(b);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols; ++c)
      if (row[c] > row[best]) best = c;  // strict > keeps the lowest index on ties
    out[b] = static_cast<int>(best);
  }
  return out;
}

double error_rate(const Mat& logits, const std::vector<int>& labels) {
  check_dim(logits.rows == labels.size(), "error_rate: batch size mismatch");
  const std::vector<int> pred = predict(logits);
  std::size_t wrong = 0;
  for (std::size_t b = 0; b < pred.size(); ++b)
    if (pred[b] != labels[b]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

void backward(const StochasticNet& net, const ForwardRecord& rec, const Mat& d_logits,
              NetGrads& g) {
  const std::size_t L = net.layers.size();
  check_dim(rec.layers.size() == L, "backward: record/net layer mismatch");
  check_dim(g.w.size() == L, "backward: grad buffer mismatch");
  check_dim(d_logits.rows == rec.logits.rows && d_logits.cols == rec.logits.cols,
            "backward: d_logits shape");
  Mat dz = d_logits;
  for (std::size_t li = L; li-- > 0;) {
    const auto& ld = net.layers[li];
    const auto& lf = rec.layers[li];
    check_dim(lf.z.rows == dz.rows && lf.z.cols == dz.cols,
              "backward: stale forward record");
    check_dim(lf.x.cols == ld.fan_in && lf.z.cols == ld.fan_out,
              "backward: record shape mismatch");
    // z = mean + sqrt(var)*eps  =>  d_mean = dz, d_var = dz*eps/(2*sqrt(var))
    Mat dv(dz.rows, dz.cols);
    for (std::size_t k = 0; k < dz.data.size(); ++k)
      dv.data[k] =
          dz.data[k] * lf.eps.data[k] / (2.0 * std::sqrt(lf.var.data[k]));
    Vec d_s2w(ld.w.size(), 0.0), d_s2b(ld.b.size(), 0.0);
    kernels::dense_grad_params(lf.x, dz, dv, g.w[li].d_mu, d_s2w, g.b[li].d_mu,
                               d_s2b);
    for (std::size_t k = 0; k < d_s2w.size(); ++k)
      g.w[li].d_rho[k] += d_s2w[k] * dsigma2_drho(ld.w.rho[k]);
    for (std::size_t k = 0; k < d_s2b.size(); ++k)
      g.b[li].d_rho[k] += d_s2b[k] * dsigma2_drho(ld.b.rho[k]);
    if (li > 0) {
      const Vec s2w = sigma2_vec(ld.w.rho);
      Mat dx;
      kernels::dense_grad_input(lf.x, dz, dv, ld.w.mu, s2w, ld.fan_out, dx);
      // through the ELU of the layer below
      const Mat& zprev = rec.layers[li - 1].z;
      for (std::size_t k = 0; k < dx.data.size(); ++k)
        dx.data[k] *= elu_prime(zprev.data[k]);
      dz = std::move(dx);
    }
  }
}

void backward_mean(const StochasticNet& net, const ForwardMeanRecord& rec,
                   const Mat& d_logits, NetGrads& g) {
  const std::size_t L = net.layers.size();
  check_dim(rec.layers.size() == L, "backward_mean: record/net layer mismatch");
  Mat dz = d_logits;
  for (std::size_t li = L; li-- > 0;) {
    const auto& ld = net.layers[li];
    const auto& lf = rec.layers[li];
    check_dim(lf.z.rows == dz.rows && lf.z.cols == dz.cols,
              "backward_mean: stale forward record");
    kernels::dense_grad_params_mean(lf.x, dz, g.w[li].d_mu, g.b[li].d_mu);
    if (li > 0) {
      Mat dx;
      kernels::dense_grad_input_mean(dz, ld.w.mu, ld.fan_in, dx);
      const Mat& zprev = rec.layers[li - 1].z;
      for (std::size_t k = 0; k < dx.data.size(); ++k)
        dx.data[k] *= elu_prime(zprev.data[k]);
      dz = std::move(dx);
    }
  }
}

double net_kl(const StochasticNet& q, const StochasticNet& p) {
  check_dim(q.layers.size() == p.layers.size(), "net_kl: layer count mismatch");
  double kl = 0.0;
  for (std::size_t l = 0; l < q.layers.size(); ++l) {
    kl += kl_diag_gaussian(q.layers[l].w, p.layers[l].w);
    kl += kl_diag_gaussian(q.layers[l].b, p.layers[l].b);
  }
  return kl;
}

void net_kl_grad(const StochasticNet& q, const StochasticNet& p, double scale,
                 NetGrads& gq, NetGrads& gp) {
  check_dim(q.layers.size() == p.layers.size(), "net_kl_grad: layer count mismatch");
  for (std::size_t l = 0; l < q.layers.size(); ++l) {
    kl_diag_gaussian_grad(q.layers[l].w, p.layers[l].w, scale, gq.w[l], gp.w[l]);
    kl_diag_gaussian_grad(q.layers[l].b, p.layers[l].b, scale, gq.b[l], gp.b[l]);
  }
}

}  // namespace mlap
