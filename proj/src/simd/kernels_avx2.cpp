// Compiled with -mavx2 (and without -mfma, so mul/add are never fused).
#include <fdadd/simd/kernels.hpp>

#include <immintrin.h>

#include <cstddef>

namespace fdadd::simd::detail {
namespace {

double fold(__m256d acc) {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, prod);
  }
  double sum = fold(acc);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double weighted_dot_avx2(const double* w, const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d wa = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(a + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(wa, _mm256_loadu_pd(b + i)));
  }
  double sum = fold(acc);
  for (; i < n; ++i) sum += (w[i] * a[i]) * b[i];
  return sum;
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double sum = fold(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

}  // namespace

const kernel_table& avx2_kernels() {
  static const kernel_table table{dot_avx2, weighted_dot_avx2, squared_distance_avx2};
  return table;
}

}  // namespace fdadd::simd::detail
