#include "hybridet/kernels.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace hybridet::kernels {

namespace {

std::atomic<Mode> g_mode{Mode::Parallel};

// The element-level primitives are noinline so the serial and parallel
// drivers execute the exact same machine code for each output element.
// Inlining them into differently shaped loops could change FP contraction
// and break serial/parallel bit-identity.

__attribute__((noinline)) double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

__attribute__((noinline)) double dot_strided(const double* a, std::size_t sa,
                                             const double* b, std::size_t sb,
                                             int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[static_cast<std::size_t>(i) * sa] * b[static_cast<std::size_t>(i) * sb];
  return s;
}

__attribute__((noinline)) void softmax_row(const double* logits, double* probs, int k) {
  double m = logits[0];
  for (int i = 1; i < k; ++i) m = std::max(m, logits[i]);
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    probs[i] = std::exp(logits[i] - m);
    sum += probs[i];
  }
  for (int i = 0; i < k; ++i) probs[i] /= sum;
}

void check_linear_shapes(const Mat& x, const Mat& w, std::size_t b_size, const Mat& y) {
  if (x.cols != w.cols || y.rows != x.rows || y.cols != w.rows ||
      b_size != static_cast<std::size_t>(w.rows)) {
    throw std::invalid_argument("linear_forward: inconsistent shapes");
  }
}

}  // namespace

Mode mode() { return g_mode.load(std::memory_order_relaxed); }
void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }

namespace serial {

void linear_forward(const Mat& x, const Mat& w, const std::vector<double>& b, Mat& y) {
  check_linear_shapes(x, w, b.size(), y);
  const int n = x.rows, in = x.cols, out = w.rows;
  for (int r = 0; r < n; ++r)
    for (int o = 0; o < out; ++o)
      y(r, o) = b[o] + dot(x.row(r), w.row(o), in);
}

void linear_grad_params(const Mat& x, const Mat& dy, Mat& dw, std::vector<double>& db) {
  const int n = x.rows, in = x.cols, out = dy.cols;
  for (int o = 0; o < out; ++o)
    for (int i = 0; i < in; ++i)
      dw(o, i) = dot_strided(dy.data() + o, out, x.data() + i, in, n);
  for (int o = 0; o < out; ++o) {
    double s = 0.0;
    for (int r = 0; r < n; ++r) s += dy(r, o);
    db[o] = s;
  }
}

void linear_grad_input(const Mat& dy, const Mat& w, Mat& dx) {
  const int n = dy.rows, out = dy.cols, in = w.cols;
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < in; ++i)
      dx(r, i) = dot_strided(dy.row(r), 1, w.data() + i, in, out);
}

void relu_inplace(Mat& z) {
  for (double& v : z.v) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(const Mat& z, Mat& dz) {
  for (std::size_t i = 0; i < z.v.size(); ++i)
    if (z.v[i] <= 0.0) dz.v[i] = 0.0;
}

void softmax_rows(const Mat& logits, Mat& probs) {
  for (int r = 0; r < logits.rows; ++r)
    softmax_row(logits.row(r), probs.row(r), logits.cols);
}

}  // namespace serial

namespace par {

void linear_forward(const Mat& x, const Mat& w, const std::vector<double>& b, Mat& y) {
  check_linear_shapes(x, w, b.size(), y);
  const int n = x.rows, in = x.cols, out = w.rows;
  const long total = static_cast<long>(n) * out;
#pragma omp parallel for schedule(static)
  for (long idx = 0; idx < total; ++idx) {
    const int r = static_cast<int>(idx / out);
    const int o = static_cast<int>(idx % out);
    y(r, o) = b[o] + dot(x.row(r), w.row(o), in);
  }
}

void linear_grad_params(const Mat& x, const Mat& dy, Mat& dw, std::vector<double>& db) {
  const int n = x.rows, in = x.cols, out = dy.cols;
  const long total = static_cast<long>(out) * in;
#pragma omp parallel for schedule(static)
  for (long idx = 0; idx < total; ++idx) {
    const int o = static_cast<int>(idx / in);
    const int i = static_cast<int>(idx % in);
    dw(o, i) = dot_strided(dy.data() + o, out, x.data() + i, in, n);
  }
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out; ++o) {
    double s = 0.0;
    for (int r = 0; r < n; ++r) s += dy(r, o);
    db[o] = s;
  }
}

void linear_grad_input(const Mat& dy, const Mat& w, Mat& dx) {
  const int n = dy.rows, out = dy.cols, in = w.cols;
  const long total = static_cast<long>(n) * in;
#pragma omp parallel for schedule(static)
  for (long idx = 0; idx < total; ++idx) {
    const int r = static_cast<int>(idx / in);
    const int i = static_cast<int>(idx % in);
    dx(r, i) = dot_strided(dy.row(r), 1, w.data() + i, in, out);
  }
}

void relu_inplace(Mat& z) {
  const long total = static_cast<long>(z.v.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < total; ++i) z.v[i] = z.v[i] > 0.0 ? z.v[i] : 0.0;
}

void relu_backward_inplace(const Mat& z, Mat& dz) {
  const long total = static_cast<long>(z.v.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < total; ++i)
    if (z.v[i] <= 0.0) dz.v[i] = 0.0;
}

void softmax_rows(const Mat& logits, Mat& probs) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < logits.rows; ++r)
    softmax_row(logits.row(r), probs.row(r), logits.cols);
}

}  // namespace par

void linear_forward(const Mat& x, const Mat& w, const std::vector<double>& b, Mat& y) {
  mode() == Mode::Serial ? serial::linear_forward(x, w, b, y) : par::linear_forward(x, w, b, y);
}
void linear_grad_params(const Mat& x, const Mat& dy, Mat& dw, std::vector<double>& db) {
  mode() == Mode::Serial ? serial::linear_grad_params(x, dy, dw, db)
                         : par::linear_grad_params(x, dy, dw, db);
}
void linear_grad_input(const Mat& dy, const Mat& w, Mat& dx) {
  mode() == Mode::Serial ? serial::linear_grad_input(dy, w, dx) : par::linear_grad_input(dy, w, dx);
}
void relu_inplace(Mat& z) {
  mode() == Mode::Serial ? serial::relu_inplace(z) : par::relu_inplace(z);
}
void relu_backward_inplace(const Mat& z, Mat& dz) {
  mode() == Mode::Serial ? serial::relu_backward_inplace(z, dz) : par::relu_backward_inplace(z, dz);
}
void softmax_rows(const Mat& logits, Mat& probs) {
  mode() == Mode::Serial ? serial::softmax_rows(logits, probs) : par::softmax_rows(logits, probs);
}

}  // namespace hybridet::kernels
