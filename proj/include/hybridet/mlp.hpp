#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hybridet/data.hpp"
#include "hybridet/kernels.hpp"

namespace hybridet {

struct LinearLayer {
  kernels::Mat w;          // out x in
  std::vector<double> b;   // out

  LinearLayer() = default;
  LinearLayer(int out, int in) : w(out, in), b(static_cast<std::size_t>(out), 0.0) {}
  int out_dim() const { return w.rows; }
  int in_dim() const { return w.cols; }
};

// Three-layer ReLU classifier head, optionally preceded by a d x d linear
// adapter. The adapter starts at exact identity and takes the low-learning-
// rate parameter group, standing in for a fine-tunable backbone.
struct MlpParams {
  std::optional<LinearLayer> adapter;
  LinearLayer l1, l2, l3;

  int in_dim() const { return l1.in_dim(); }
  int k() const { return l3.out_dim(); }

  // He-style uniform init (bound sqrt(6/fan_in)) for the head, zeros for
  // biases, exact identity for the adapter. Deterministic per seed.
  static MlpParams init(int d, int h1, int h2, int k, bool with_adapter,
                        std::uint64_t seed);
};

struct MlpGradients {
  std::optional<LinearLayer> adapter;
  LinearLayer l1, l2, l3;

  static MlpGradients zeros_like(const MlpParams& p);
};

// Scratch buffers reused across forward/backward calls.
struct ForwardCache {
  kernels::Mat a, z1, r1, z2, r2, logits, probs;
};

// probs = softmax(logits) with max-subtraction. x rows are promoted from
// whatever storage the caller has into the double matrix ahead of time.
void forward_batch(const MlpParams& p, const kernels::Mat& x, ForwardCache& cache);

// Single-sample convenience wrapper: returns (logits, probs).
std::pair<std::vector<double>, std::vector<double>> forward(const MlpParams& p,
                                                            std::span<const float> x);
std::pair<std::vector<double>, std::vector<double>> forward(const MlpParams& p,
                                                            std::span<const double> x);

// L = -sum_k target_k * ln(probs_k + 1e-12)
double soft_ce_loss(std::span<const double> probs, const SoftTarget& target);

// Analytic gradients of the mean soft cross-entropy over the batch with
// respect to every parameter (the epsilon in the loss is differentiated
// exactly). Returns the mean loss.
double backward(const MlpParams& p, const kernels::Mat& x,
                const std::vector<SoftTarget>& targets, MlpGradients& grads,
                ForwardCache& cache);

struct SgdConfig {
  double lr_head = 3e-4;
  double lr_adapter = 3e-6;
  double weight_decay = 0.0;
  double momentum = 0.0;
};

struct SgdState {
  MlpGradients velocity;
  bool initialized = false;
};

// p <- p - lr_group * (g + weight_decay * p); with momentum mu > 0,
// v <- mu*v + (g + weight_decay*p), p <- p - lr_group * v.
void sgd_step(MlpParams& p, const MlpGradients& g, const SgdConfig& cfg, SgdState& state);

}  // namespace hybridet
