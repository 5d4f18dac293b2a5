#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace hybridet::kernels {

// The parallel kernels distribute independent output elements across OpenMP
// threads and keep every floating-point reduction in index order, so they
// produce bit-identical results to the serial reference regardless of the
// thread count. Training determinism relies on this.

enum class Mode { Serial, Parallel };

Mode mode();
void set_mode(Mode m);

// Row-major dense matrix of doubles.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

  double* data() { return v.data(); }
  const double* data() const { return v.data(); }
  double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
  double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
  std::size_t size() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

// y[n x out] = x[n x in] * w[out x in]^T + b[out]
// dw[out x in] = dy[n x out]^T * x[n x in], db[out] = column sums of dy
// dx[n x in] = dy[n x out] * w[out x in]

namespace serial {
void linear_forward(const Mat& x, const Mat& w, const std::vector<double>& b, Mat& y);
void linear_grad_params(const Mat& x, const Mat& dy, Mat& dw, std::vector<double>& db);
void linear_grad_input(const Mat& dy, const Mat& w, Mat& dx);
void relu_inplace(Mat& z);
void relu_backward_inplace(const Mat& z, Mat& dz);
void softmax_rows(const Mat& logits, Mat& probs);
}  // namespace serial

namespace par {
void linear_forward(const Mat& x, const Mat& w, const std::vector<double>& b, Mat& y);
void linear_grad_params(const Mat& x, const Mat& dy, Mat& dw, std::vector<double>& db);
void linear_grad_input(const Mat& dy, const Mat& w, Mat& dx);
void relu_inplace(Mat& z);
void relu_backward_inplace(const Mat& z, Mat& dz);
void softmax_rows(const Mat& logits, Mat& probs);
}  // namespace par

// Dispatch on the global mode.
void linear_forward(const Mat& x, const Mat& w, const std::vector<double>& b, Mat& y);
void linear_grad_params(const Mat& x, const Mat& dy, Mat& dw, std::vector<double>& db);
void linear_grad_input(const Mat& dy, const Mat& w, Mat& dx);
void relu_inplace(Mat& z);
void relu_backward_inplace(const Mat& z, Mat& dz);
void softmax_rows(const Mat& logits, Mat& probs);

}  // namespace hybridet::kernels
