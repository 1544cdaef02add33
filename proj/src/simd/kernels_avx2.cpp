// Built with -mavx2 -mfma; only reached through the dispatch table after a
// CPUID check.

#include <immintrin.h>

#include <cmath>

#include "toricq/simd/kernels.hpp"

namespace toricq::simd {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp(x) by 2^n * P(r), |r| <= ln2/2, degree-13 Taylor polynomial.
// Inputs below -708 flush to zero; the callers only pass x <= 0.
inline __m256d exp_pd(__m256d x) {
  const __m256d lower = _mm256_set1_pd(-708.0);
  const __m256d underflow = _mm256_cmp_pd(x, lower, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lower), _mm256_set1_pd(709.0));
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125e-1), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212e-6), r);

  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  const __m256i ni = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n));
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
  const __m256d res = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
  return _mm256_andnot_pd(underflow, res);
}

// The dimension is a template parameter so the accumulators stay in registers.
template <int m>
SoftmaxMoments softmax_moments_fixed(const LatticeView& lat, const double* bias, const double* u, double* w) {
  const std::size_t n = lat.padded;
  SoftmaxMoments out;

  __m256d two_u[m];
  for (int j = 0; j < m; ++j) two_u[j] = _mm256_set1_pd(2.0 * u[j]);

  __m256d vmax = _mm256_set1_pd(-INFINITY);
  for (std::size_t a = 0; a < n; a += kLanes) {
    __m256d l = _mm256_loadu_pd(bias + a);
    for (int j = 0; j < m; ++j) l = _mm256_fmadd_pd(_mm256_loadu_pd(lat.coords[j] + a), two_u[j], l);
    _mm256_storeu_pd(w + a, l);
    vmax = _mm256_max_pd(vmax, l);
  }
  const double hi = hmax(vmax);
  const __m256d vhi = _mm256_set1_pd(hi);
  const __m256d cutoff = _mm256_set1_pd(kCutoff);

  __m256d vsum = _mm256_setzero_pd();
  __m256d vfirst[m];
  for (int j = 0; j < m; ++j) vfirst[j] = _mm256_setzero_pd();
  for (std::size_t a = 0; a < n; a += kLanes) {
    const __m256d t = _mm256_sub_pd(_mm256_loadu_pd(w + a), vhi);
    const __m256d e = _mm256_andnot_pd(_mm256_cmp_pd(t, cutoff, _CMP_LT_OQ), exp_pd(t));
    _mm256_storeu_pd(w + a, e);
    vsum = _mm256_add_pd(vsum, e);
    for (int j = 0; j < m; ++j) vfirst[j] = _mm256_fmadd_pd(e, _mm256_loadu_pd(lat.coords[j] + a), vfirst[j]);
  }
  const double sum = hsum(vsum);
  __m256d vmean[m];
  for (int j = 0; j < m; ++j) {
    out.mean[j] = hsum(vfirst[j]) / sum;
    vmean[j] = _mm256_set1_pd(out.mean[j]);
  }

  __m256d vsecond[m][m];
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) vsecond[i][j] = _mm256_setzero_pd();
  for (std::size_t a = 0; a < n; a += kLanes) {
    const __m256d e = _mm256_loadu_pd(w + a);
    __m256d d[m];
    for (int j = 0; j < m; ++j) d[j] = _mm256_sub_pd(_mm256_loadu_pd(lat.coords[j] + a), vmean[j]);
    for (int i = 0; i < m; ++i) {
      const __m256d ed = _mm256_mul_pd(e, d[i]);
      for (int j = i; j < m; ++j) vsecond[i][j] = _mm256_fmadd_pd(ed, d[j], vsecond[i][j]);
    }
  }
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) out.cov[i][j] = out.cov[j][i] = hsum(vsecond[i][j]) / sum;
  out.sum = sum;
  out.log_sum = hi + std::log(sum);
  return out;
}

SoftmaxMoments softmax_moments_avx2(const LatticeView& lat, const double* bias, const double* u, double* w) {
  switch (lat.dim) {
    case 1:
      return softmax_moments_fixed<1>(lat, bias, u, w);
    case 2:
      return softmax_moments_fixed<2>(lat, bias, u, w);
    default:
      return softmax_moments_fixed<3>(lat, bias, u, w);
  }
}

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void exp_avx2(std::size_t n, const double* x, double* y) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) _mm256_storeu_pd(y + i, exp_pd(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = std::exp(x[i]);
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{softmax_moments_avx2, axpy_avx2, dot_avx2, exp_avx2};
  return table;
}

}  // namespace toricq::simd
