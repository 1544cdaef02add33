#include <cmath>
#include <limits>

#include "toricq/simd/kernels.hpp"

namespace toricq::simd {

namespace {

template <int m>
SoftmaxMoments softmax_moments_fixed(const LatticeView& lat, const double* bias, const double* u, double* w) {
  SoftmaxMoments out;
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < lat.count; ++a) {
    double l = bias[a];
    for (int j = 0; j < m; ++j) l += 2.0 * lat.coords[j][a] * u[j];
    w[a] = l;
    if (l > hi) hi = l;
  }
  double sum = 0.0;
  double first[m] = {};
  for (std::size_t a = 0; a < lat.count; ++a) {
    const double t = w[a] - hi;
    const double e = t < kCutoff ? 0.0 : std::exp(t);
    w[a] = e;
    sum += e;
    for (int j = 0; j < m; ++j) first[j] += e * lat.coords[j][a];
  }
  for (std::size_t a = lat.count; a < lat.padded; ++a) w[a] = 0.0;
  for (int j = 0; j < m; ++j) out.mean[j] = first[j] / sum;
  double second[m][m] = {};
  for (std::size_t a = 0; a < lat.count; ++a) {
    double d[m] = {};
    for (int j = 0; j < m; ++j) d[j] = lat.coords[j][a] - out.mean[j];
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) second[i][j] += w[a] * d[i] * d[j];
  }
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) out.cov[i][j] = out.cov[j][i] = second[i][j] / sum;
  out.sum = sum;
  out.log_sum = hi + std::log(sum);
  return out;
}

SoftmaxMoments softmax_moments_scalar(const LatticeView& lat, const double* bias, const double* u, double* w) {
  switch (lat.dim) {
    case 1:
      return softmax_moments_fixed<1>(lat, bias, u, w);
    case 2:
      return softmax_moments_fixed<2>(lat, bias, u, w);
    default:
      return softmax_moments_fixed<3>(lat, bias, u, w);
  }
}

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void exp_scalar(std::size_t n, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{softmax_moments_scalar, axpy_scalar, dot_scalar, exp_scalar};
  return table;
}

}  // namespace toricq::simd
