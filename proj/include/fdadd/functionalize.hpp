#pragma once

#include <optional>
#include <span>
#include <vector>

#include <fdadd/basis.hpp>

namespace fdadd {

// One subject's measurements. Times need not be sorted or distinct.
class longitudinal_sample {
 public:
  // Throws invalid_input on length mismatch, an empty sample or non-finite entries.
  longitudinal_sample(std::vector<double> times, std::vector<double> values);

  std::size_t size() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const longitudinal_sample&, const longitudinal_sample&) = default;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

// A fitted function t -> w^T phi(t).
class functional_datum {
 public:
  // Throws invalid_input when w does not have spec.size() finite entries.
  functional_datum(basis::basis_spec spec, linalg::Vector w);

  const basis::basis_spec& spec() const { return spec_; }
  const linalg::Vector& coefficients() const { return w_; }

 private:
  basis::basis_spec spec_;
  linalg::Vector w_;
};

// Minimum-norm least-squares coefficients of the sample in the basis.
// rcond defaults to the linear-algebra default cutoff.
functional_datum fit_coefficients(const longitudinal_sample& sample, const basis::basis_spec& spec,
                                  std::optional<double> rcond = std::nullopt);

// fit_coefficients over many samples, in order. Consecutive samples with
// identical times share one factorization.
std::vector<functional_datum> fit_coefficients(std::span<const longitudinal_sample* const> samples,
                                               const basis::basis_spec& spec,
                                               std::optional<double> rcond = std::nullopt);

double evaluate(const functional_datum& datum, double t);

// Residual vector x - Phi w at the sample's own times.
linalg::Vector fit_residuals(const functional_datum& datum, const longitudinal_sample& sample);

}  // namespace fdadd
