#pragma once

#include <random>
#include <vector>

#include "mlap/gauss.hpp"
#include "mlap/mat.hpp"

namespace mlap {

/// Fully connected architecture: input dim, hidden dims..., output dim
/// (= class count). Hidden activations are ELU(alpha=1), output is identity.
struct NetworkArch {
  std::vector<std::size_t> layer_sizes;

  void validate() const;
  std::size_t n_layers() const { return layer_sizes.size() - 1; }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
};

/// One dense layer: factorized Gaussians over weights (fan_in*fan_out,
/// row-major [in][out]) and biases (fan_out).
struct LayerDist {
  DiagGaussian w;
  DiagGaussian b;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
};

struct StochasticNet {
  NetworkArch arch;
  std::vector<LayerDist> layers;

  /// d: total number of weight entries; the flattened (mu,rho) vector has
  /// length 2d.
  std::size_t n_weights() const;
  std::size_t n_flat() const { return 2 * n_weights(); }
};

/// Allocates parameter blocks for the architecture without initializing them.
StochasticNet make_net(const NetworkArch& arch);

/// Glorot-uniform mu for weights, zero mu for biases, rho ~ N(-10, 0.1^2).
void init_net(StochasticNet& net, std::mt19937_64& eng);

/// Flat parameter order: per layer, w.mu, w.rho, b.mu, b.rho.
Vec flatten(const StochasticNet& net);
void unflatten(StochasticNet& net, const Vec& flat);

struct NetGrads {
  std::vector<DiagGaussianGrad> w;
  std::vector<DiagGaussianGrad> b;

  void zero();
};

NetGrads make_grads(const StochasticNet& net);
Vec flatten(const NetGrads& g);
void axpy_grads(double a, const NetGrads& x, NetGrads& y);  // y += a*x

struct Batch {
  Mat inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.rows; }
};

/// Per-layer forward state kept for exact backprop.
struct LayerFwd {
  Mat x;     // layer input (batch x fan_in)
  Mat mean;  // activation mean
  Mat var;   // activation variance (> 0: bias variance floor)
  Mat eps;   // standard-normal draws, one per data point per unit
  Mat z;     // pre-activation mean + sqrt(var).*eps
};

struct ForwardRecord {
  std::vector<LayerFwd> layers;
  Mat logits;
};

/// Local reparametrization trick: noise is drawn on activations, not weights.
ForwardRecord forward_stochastic(const StochasticNet& net, const Mat& inputs,
                                 std::mt19937_64& eng);

struct LayerFwdMean {
  Mat x;
  Mat z;
};

struct ForwardMeanRecord {
  std::vector<LayerFwdMean> layers;
  Mat logits;
};

/// Deterministic mean-parameter pass (test-time prediction; Scratch-D path).
Mat forward_mean(const StochasticNet& net, const Mat& inputs);
ForwardMeanRecord forward_mean_record(const StochasticNet& net, const Mat& inputs);

struct LossTerms {
  double ce = 0.0;           // mean cross-entropy (unbounded)
  double clipped_err = 0.0;  // mean of min(1, per-sample CE)
};

LossTerms loss_terms(const Mat& logits, const std::vector<int>& labels);

/// Per-sample cross-entropy values.
Vec ce_per_sample(const Mat& logits, const std::vector<int>& labels);

/// scale * d(mean CE)/d(logits) = scale/B * (softmax - onehot)
Mat ce_grad(const Mat& logits, const std::vector<int>& labels, double scale);

/// Argmax prediction; ties broken toward the lowest class index.
std::vector<int> predict(const Mat& logits);
double error_rate(const Mat& logits, const std::vector<int>& labels);

/// Exact reverse-mode gradients of the sampled loss w.r.t. every (mu, rho),
/// treating the recorded eps as constants. Accumulates into g.
void backward(const StochasticNet& net, const ForwardRecord& rec, const Mat& d_logits,
              NetGrads& g);

/// Mean-path gradients (mu only; rho untouched).
void backward_mean(const StochasticNet& net, const ForwardMeanRecord& rec,
                   const Mat& d_logits, NetGrads& g);

/// Sum over layers of KL(q_layer || p_layer); gradient form accumulates both
/// sides with the given chain weights.
double net_kl(const StochasticNet& q, const StochasticNet& p);
void net_kl_grad(const StochasticNet& q, const StochasticNet& p, double scale,
                 NetGrads& gq, NetGrads& gp);

}  // namespace mlap
