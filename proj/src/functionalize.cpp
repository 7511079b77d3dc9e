#include <fdadd/functionalize.hpp>

#include <cmath>
#include <string>

#include <fdadd/error.hpp>

namespace fdadd {

longitudinal_sample::longitudinal_sample(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.empty()) throw invalid_input("longitudinal sample is empty");
  if (times_.size() != values_.size())
    throw invalid_input("longitudinal sample has " + std::to_string(times_.size()) +
                        " times but " + std::to_string(values_.size()) + " values");
  for (std::size_t i = 0; i < times_.size(); ++i)
    if (!std::isfinite(times_[i]) || !std::isfinite(values_[i]))
      throw invalid_input("longitudinal sample has a non-finite entry at index " +
                          std::to_string(i));
}

functional_datum::functional_datum(basis::basis_spec spec, linalg::Vector w)
    : spec_(std::move(spec)), w_(std::move(w)) {
  if (w_.size() != spec_.size())
    throw invalid_input("coefficient vector has length " + std::to_string(w_.size()) +
                        ", basis has " + std::to_string(spec_.size()) + " functions");
  if (!w_.allFinite()) throw invalid_input("coefficient vector is not finite");
}

functional_datum fit_coefficients(const longitudinal_sample& sample, const basis::basis_spec& spec,
                                  std::optional<double> rcond) {
  const linalg::Matrix phi = basis::design_matrix(spec, sample.times());
  const linalg::Vector x = Eigen::Map<const linalg::Vector>(
      sample.values().data(), static_cast<Eigen::Index>(sample.size()));
  return functional_datum(spec, linalg::min_norm_lsq(phi, x, rcond));
}

std::vector<functional_datum> fit_coefficients(std::span<const longitudinal_sample* const> samples,
                                               const basis::basis_spec& spec,
                                               std::optional<double> rcond) {
  std::vector<functional_datum> out;
  out.reserve(samples.size());
  std::size_t begin = 0;
  while (begin < samples.size()) {
    std::size_t end = begin + 1;
    while (end < samples.size() && samples[end]->times() == samples[begin]->times()) ++end;
    const auto m = static_cast<Eigen::Index>(samples[begin]->size());
    linalg::Matrix x(m, static_cast<Eigen::Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i)
      x.col(static_cast<Eigen::Index>(i - begin)) =
          Eigen::Map<const linalg::Vector>(samples[i]->values().data(), m);
    const linalg::Matrix w =
        linalg::min_norm_lsq(basis::design_matrix(spec, samples[begin]->times()), x, rcond);
    for (Eigen::Index c = 0; c < w.cols(); ++c) out.emplace_back(spec, linalg::Vector(w.col(c)));
    begin = end;
  }
  return out;
}

double evaluate(const functional_datum& datum, double t) {
  return basis::eval_basis(datum.spec(), t).dot(datum.coefficients());
}

linalg::Vector fit_residuals(const functional_datum& datum, const longitudinal_sample& sample) {
  const linalg::Matrix phi = basis::design_matrix(datum.spec(), sample.times());
  const linalg::Vector x = Eigen::Map<const linalg::Vector>(
      sample.values().data(), static_cast<Eigen::Index>(sample.size()));
  return x - phi * datum.coefficients();
}

}  // namespace fdadd
