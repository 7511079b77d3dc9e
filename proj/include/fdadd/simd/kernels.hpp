#pragma once

#include <span>
#include <string_view>

// Reduction kernels used by quadrature, Gram assembly and error metrics.
//
// Every reduction accumulates in four interleaved lanes (element i goes to
// lane i % 4), folds the lanes as (l0 + l1) + (l2 + l3), then adds the tail
// sequentially. The scalar reference and the AVX2 variant follow that order
// exactly and never fuse multiply-add, so both produce bit-identical results.

namespace fdadd::simd {

enum class isa { scalar, avx2 };

std::string_view isa_name(isa which);

bool isa_supported(isa which);

// ISA picked at startup: AVX2 when the CPU has it, unless the FDADD_SIMD
// environment variable says "scalar".
isa active_isa();

// Overrides the runtime choice (tests use this to compare variants).
// Throws fdadd::invalid_input when the CPU lacks the requested ISA.
void set_isa(isa which);

// sum_i a_i * b_i
double dot(std::span<const double> a, std::span<const double> b);

// sum_i (w_i * a_i) * b_i
double weighted_dot(std::span<const double> w, std::span<const double> a,
                    std::span<const double> b);

// sum_i (a_i - b_i)^2
double squared_distance(std::span<const double> a, std::span<const double> b);

namespace detail {

struct kernel_table {
  double (*dot)(const double*, const double*, std::size_t);
  double (*weighted_dot)(const double*, const double*, const double*, std::size_t);
  double (*squared_distance)(const double*, const double*, std::size_t);
};

const kernel_table& scalar_kernels();
// Only valid to call when isa_supported(isa::avx2).
const kernel_table& avx2_kernels();

}  // namespace detail

}  // namespace fdadd::simd
