#include "hybridet/mlp.hpp"

#include <cmath>

#include "hybridet/error.hpp"
#include "hybridet/rng.hpp"

namespace hybridet {

using kernels::Mat;

namespace {

constexpr double kLossEps = 1e-12;

void he_uniform(LinearLayer& layer, Rng& rng) {
  const double bound = std::sqrt(6.0 / layer.in_dim());
  for (double& v : layer.w.v) v = rng.uniform(-bound, bound);
  // biases stay zero
}

void check_dims(const MlpParams& p) {
  if (p.adapter && (p.adapter->in_dim() != p.in_dim() || p.adapter->out_dim() != p.in_dim()))
    throw ConfigError("adapter must be square d x d");
  if (p.l2.in_dim() != p.l1.out_dim() || p.l3.in_dim() != p.l2.out_dim())
    throw ConfigError("layer dimensions do not chain");
}

}  // namespace

MlpParams MlpParams::init(int d, int h1, int h2, int k, bool with_adapter,
                          std::uint64_t seed) {
  if (d < 1 || h1 < 1 || h2 < 1 || k < 2)
    throw ConfigError("mlp dims must be positive with k >= 2");
  MlpParams p;
  if (with_adapter) {
    p.adapter.emplace(d, d);
    for (int i = 0; i < d; ++i) p.adapter->w(i, i) = 1.0;
  }
  p.l1 = LinearLayer(h1, d);
  p.l2 = LinearLayer(h2, h1);
  p.l3 = LinearLayer(k, h2);
  Rng rng(seed);
  he_uniform(p.l1, rng);
  he_uniform(p.l2, rng);
  he_uniform(p.l3, rng);
  return p;
}

MlpGradients MlpGradients::zeros_like(const MlpParams& p) {
  MlpGradients g;
  if (p.adapter) g.adapter.emplace(p.adapter->out_dim(), p.adapter->in_dim());
  g.l1 = LinearLayer(p.l1.out_dim(), p.l1.in_dim());
  g.l2 = LinearLayer(p.l2.out_dim(), p.l2.in_dim());
  g.l3 = LinearLayer(p.l3.out_dim(), p.l3.in_dim());
  return g;
}

void forward_batch(const MlpParams& p, const Mat& x, ForwardCache& c) {
  check_dims(p);
  if (x.cols != p.in_dim()) throw ConfigError("input dimension mismatch");
  const int n = x.rows;
  auto ensure = [n](Mat& m, int cols) {
    if (m.rows != n || m.cols != cols) m = Mat(n, cols);
  };
  ensure(c.a, p.in_dim());
  ensure(c.z1, p.l1.out_dim());
  ensure(c.r1, p.l1.out_dim());
  ensure(c.z2, p.l2.out_dim());
  ensure(c.r2, p.l2.out_dim());
  ensure(c.logits, p.k());
  ensure(c.probs, p.k());

  if (p.adapter) {
    kernels::linear_forward(x, p.adapter->w, p.adapter->b, c.a);
  } else {
    c.a = x;
  }
  kernels::linear_forward(c.a, p.l1.w, p.l1.b, c.z1);
  c.r1 = c.z1;
  kernels::relu_inplace(c.r1);
  kernels::linear_forward(c.r1, p.l2.w, p.l2.b, c.z2);
  c.r2 = c.z2;
  kernels::relu_inplace(c.r2);
  kernels::linear_forward(c.r2, p.l3.w, p.l3.b, c.logits);
  kernels::softmax_rows(c.logits, c.probs);
}

std::pair<std::vector<double>, std::vector<double>> forward(const MlpParams& p,
                                                            std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.in_dim())
    throw ConfigError("input dimension mismatch");
  Mat xm(1, p.in_dim());
  for (int i = 0; i < p.in_dim(); ++i) xm(0, i) = x[static_cast<std::size_t>(i)];
  ForwardCache c;
  forward_batch(p, xm, c);
  return {c.logits.v, c.probs.v};
}

std::pair<std::vector<double>, std::vector<double>> forward(const MlpParams& p,
                                                            std::span<const float> x) {
  std::vector<double> xd(x.begin(), x.end());
  return forward(p, std::span<const double>(xd));
}

double soft_ce_loss(std::span<const double> probs, const SoftTarget& target) {
  if (probs.size() != target.size())
    throw ConfigError("probs/target length mismatch");
  double loss = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k)
    if (target[k] != 0.0) loss -= target[k] * std::log(probs[k] + kLossEps);
  return loss;
}

double backward(const MlpParams& p, const Mat& x,
                const std::vector<SoftTarget>& targets, MlpGradients& grads,
                ForwardCache& c) {
  const int n = x.rows;
  if (n == 0) throw ConfigError("backward: empty batch");
  if (targets.size() != static_cast<std::size_t>(n))
    throw ConfigError("backward: target count does not match batch");

  forward_batch(p, x, c);
  const int k = p.k();

  // d(mean loss)/d(logits). The loss log(p + eps) is differentiated exactly:
  // dL/dz_j = p_j * sum_k t_k p_k/(p_k+eps) - t_j p_j/(p_j+eps), per sample.
  Mat dlogits(n, k);
  double loss_sum = 0.0;
  for (int r = 0; r < n; ++r) {
    const auto& t = targets[static_cast<std::size_t>(r)];
    if (static_cast<int>(t.size()) != k)
      throw ConfigError("backward: target length does not match class count");
    double weighted = 0.0;
    for (int j = 0; j < k; ++j) {
      const double pj = c.probs(r, j);
      if (t[static_cast<std::size_t>(j)] != 0.0) {
        weighted += t[static_cast<std::size_t>(j)] * pj / (pj + kLossEps);
        loss_sum -= t[static_cast<std::size_t>(j)] * std::log(pj + kLossEps);
      }
    }
    for (int j = 0; j < k; ++j) {
      const double pj = c.probs(r, j);
      const double tj = t[static_cast<std::size_t>(j)];
      double g = pj * weighted;
      if (tj != 0.0) g -= tj * pj / (pj + kLossEps);
      dlogits(r, j) = g / n;
    }
  }

  kernels::linear_grad_params(c.r2, dlogits, grads.l3.w, grads.l3.b);
  Mat dr2(n, p.l2.out_dim());
  kernels::linear_grad_input(dlogits, p.l3.w, dr2);
  kernels::relu_backward_inplace(c.z2, dr2);

  kernels::linear_grad_params(c.r1, dr2, grads.l2.w, grads.l2.b);
  Mat dr1(n, p.l1.out_dim());
  kernels::linear_grad_input(dr2, p.l2.w, dr1);
  kernels::relu_backward_inplace(c.z1, dr1);

  kernels::linear_grad_params(c.a, dr1, grads.l1.w, grads.l1.b);
  if (p.adapter) {
    Mat da(n, p.in_dim());
    kernels::linear_grad_input(dr1, p.l1.w, da);
    kernels::linear_grad_params(x, da, grads.adapter->w, grads.adapter->b);
  }
  return loss_sum / n;
}

namespace {

void step_layer(LinearLayer& p, const LinearLayer& g, LinearLayer& v, double lr,
                double wd, double mu) {
  for (std::size_t i = 0; i < p.w.v.size(); ++i) {
    const double grad = g.w.v[i] + wd * p.w.v[i];
    if (mu > 0.0) {
      v.w.v[i] = mu * v.w.v[i] + grad;
      p.w.v[i] -= lr * v.w.v[i];
    } else {
      p.w.v[i] -= lr * grad;
    }
  }
  for (std::size_t i = 0; i < p.b.size(); ++i) {
    const double grad = g.b[i] + wd * p.b[i];
    if (mu > 0.0) {
      v.b[i] = mu * v.b[i] + grad;
      p.b[i] -= lr * v.b[i];
    } else {
      p.b[i] -= lr * grad;
    }
  }
}

}  // namespace

void sgd_step(MlpParams& p, const MlpGradients& g, const SgdConfig& cfg, SgdState& state) {
  if (!(cfg.lr_head > 0.0) || !(cfg.lr_adapter >= 0.0))
    throw ConfigError("sgd: learning rates must be positive");
  if (cfg.momentum < 0.0 || cfg.momentum > 0.99)
    throw ConfigError("sgd: momentum must be in [0, 0.99]");
  if (!state.initialized) {
    state.velocity = MlpGradients::zeros_like(p);
    state.initialized = true;
  }
  if (p.adapter)
    step_layer(*p.adapter, *g.adapter, *state.velocity.adapter, cfg.lr_adapter,
               cfg.weight_decay, cfg.momentum);
  step_layer(p.l1, g.l1, state.velocity.l1, cfg.lr_head, cfg.weight_decay, cfg.momentum);
  step_layer(p.l2, g.l2, state.velocity.l2, cfg.lr_head, cfg.weight_decay, cfg.momentum);
  step_layer(p.l3, g.l3, state.velocity.l3, cfg.lr_head, cfg.weight_decay, cfg.momentum);
}

}  // namespace hybridet
