#include <fdadd/simd/kernels.hpp>

#include <atomic>
#include <cstdlib>
#include <string>

#include <fdadd/error.hpp>

namespace fdadd::simd {
namespace {

bool cpu_has_avx2() {
#if defined(FDADD_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

isa startup_isa() {
  if (const char* env = std::getenv("FDADD_SIMD")) {
    if (std::string(env) == "scalar") return isa::scalar;
  }
  return cpu_has_avx2() ? isa::avx2 : isa::scalar;
}

std::atomic<isa>& current() {
  static std::atomic<isa> value{startup_isa()};
  return value;
}

const detail::kernel_table& table() {
#if defined(FDADD_HAVE_AVX2)
  if (current().load(std::memory_order_relaxed) == isa::avx2) return detail::avx2_kernels();
#endif
  return detail::scalar_kernels();
}

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) throw invalid_input("simd kernel: operand lengths differ");
}

}  // namespace

std::string_view isa_name(isa which) { return which == isa::avx2 ? "avx2" : "scalar"; }

bool isa_supported(isa which) { return which == isa::scalar || cpu_has_avx2(); }

isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(isa which) {
  if (!isa_supported(which)) {
    throw invalid_input("simd: " + std::string(isa_name(which)) + " not supported on this CPU");
  }
  current().store(which, std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size());
  return table().dot(a.data(), b.data(), a.size());
}

double weighted_dot(std::span<const double> w, std::span<const double> a,
                    std::span<const double> b) {
  require_same_length(w.size(), a.size());
  require_same_length(a.size(), b.size());
  return table().weighted_dot(w.data(), a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size());
  return table().squared_distance(a.data(), b.data(), a.size());
}

}  // namespace fdadd::simd
