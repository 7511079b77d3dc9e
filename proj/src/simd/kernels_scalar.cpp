#include <fdadd/simd/kernels.hpp>

#include <cstddef>

namespace fdadd::simd::detail {
namespace {

double fold(const double (&lane)[4]) { return (lane[0] + lane[1]) + (lane[2] + lane[3]); }

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t j = 0; j < 4; ++j) lane[j] += a[i + j] * b[i + j];
  }
  double sum = fold(lane);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double weighted_dot_scalar(const double* w, const double* a, const double* b, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t j = 0; j < 4; ++j) lane[j] += (w[i + j] * a[i + j]) * b[i + j];
  }
  double sum = fold(lane);
  for (; i < n; ++i) sum += (w[i] * a[i]) * b[i];
  return sum;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t j = 0; j < 4; ++j) {
      const double d = a[i + j] - b[i + j];
      lane[j] += d * d;
    }
  }
  double sum = fold(lane);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

}  // namespace

const kernel_table& scalar_kernels() {
  static const kernel_table table{dot_scalar, weighted_dot_scalar, squared_distance_scalar};
  return table;
}

}  // namespace fdadd::simd::detail
