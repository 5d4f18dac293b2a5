#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "hybridet/kernels.hpp"
#include "hybridet/rng.hpp"

using namespace hybridet;
using kernels::Mat;

namespace {

Mat random_mat(int rows, int cols, Rng& rng) {
  Mat m(rows, cols);
  for (auto& v : m.v) v = rng.normal();
  return m;
}

bool bit_equal(const Mat& a, const Mat& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bit for bit") {
  Rng rng(99);
  for (auto [n, in, out] : {std::tuple{1, 3, 2}, {7, 8, 5}, {32, 32, 256},
                            {33, 256, 4}, {5, 128, 128}}) {
    const Mat x = random_mat(n, in, rng);
    const Mat w = random_mat(out, in, rng);
    std::vector<double> b(static_cast<std::size_t>(out));
    for (auto& v : b) v = rng.normal();

    Mat y_s(n, out), y_p(n, out);
    kernels::serial::linear_forward(x, w, b, y_s);
    kernels::par::linear_forward(x, w, b, y_p);
    CHECK(bit_equal(y_s, y_p));

    const Mat dy = random_mat(n, out, rng);
    Mat dw_s(out, in), dw_p(out, in);
    std::vector<double> db_s(static_cast<std::size_t>(out)), db_p(db_s);
    kernels::serial::linear_grad_params(x, dy, dw_s, db_s);
    kernels::par::linear_grad_params(x, dy, dw_p, db_p);
    CHECK(bit_equal(dw_s, dw_p));
    CHECK(bit_equal(db_s, db_p));

    Mat dx_s(n, in), dx_p(n, in);
    kernels::serial::linear_grad_input(dy, w, dx_s);
    kernels::par::linear_grad_input(dy, w, dx_p);
    CHECK(bit_equal(dx_s, dx_p));

    Mat z = random_mat(n, out, rng);
    Mat z_s = z, z_p = z;
    kernels::serial::relu_inplace(z_s);
    kernels::par::relu_inplace(z_p);
    CHECK(bit_equal(z_s, z_p));

    Mat probs_s(n, out), probs_p(n, out);
    kernels::serial::softmax_rows(dy, probs_s);
    kernels::par::softmax_rows(dy, probs_p);
    CHECK(bit_equal(probs_s, probs_p));
  }
}

TEST_CASE("linear_forward computes x*w^T + b") {
  Mat x(2, 3);
  x.v = {1, 2, 3, 4, 5, 6};
  Mat w(2, 3);
  w.v = {1, 0, 0, 0, 1, 1};
  std::vector<double> b{10, 20};
  Mat y(2, 2);
  kernels::serial::linear_forward(x, w, b, y);
  CHECK(y(0, 0) == 11.0);
  CHECK(y(0, 1) == 25.0);
  CHECK(y(1, 0) == 14.0);
  CHECK(y(1, 1) == 31.0);
}

TEST_CASE("grad kernels agree with naive triple loops") {
  Rng rng(3);
  const int n = 6, in = 5, out = 4;
  const Mat x = random_mat(n, in, rng);
  const Mat dy = random_mat(n, out, rng);
  const Mat w = random_mat(out, in, rng);

  Mat dw(out, in);
  std::vector<double> db(out);
  kernels::serial::linear_grad_params(x, dy, dw, db);
  for (int o = 0; o < out; ++o) {
    double expect_b = 0.0;
    for (int r = 0; r < n; ++r) expect_b += dy(r, o);
    CHECK(db[static_cast<std::size_t>(o)] == doctest::Approx(expect_b).epsilon(1e-14));
    for (int i = 0; i < in; ++i) {
      double expect = 0.0;
      for (int r = 0; r < n; ++r) expect += dy(r, o) * x(r, i);
      CHECK(dw(o, i) == doctest::Approx(expect).epsilon(1e-14));
    }
  }

  Mat dx(n, in);
  kernels::serial::linear_grad_input(dy, w, dx);
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < in; ++i) {
      double expect = 0.0;
      for (int o = 0; o < out; ++o) expect += dy(r, o) * w(o, i);
      CHECK(dx(r, i) == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("mode dispatch is bit-stable") {
  Rng rng(17);
  const Mat x = random_mat(16, 24, rng);
  const Mat w = random_mat(12, 24, rng);
  std::vector<double> b(12);
  for (auto& v : b) v = rng.normal();

  Mat y1(16, 12), y2(16, 12);
  kernels::set_mode(kernels::Mode::Serial);
  kernels::linear_forward(x, w, b, y1);
  kernels::set_mode(kernels::Mode::Parallel);
  kernels::linear_forward(x, w, b, y2);
  kernels::set_mode(kernels::Mode::Parallel);
  CHECK(bit_equal(y1, y2));
}
