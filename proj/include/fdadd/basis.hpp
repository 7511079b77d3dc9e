#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fdadd/linalg.hpp>

namespace fdadd::basis {

using linalg::Matrix;
using linalg::Vector;

enum class family { natural_cubic_spline, fourier, monomial_test };

std::string_view family_name(family f);
// Accepts "natural-cubic-spline", "fourier", "monomial-test".
family parse_family(std::string_view name);

struct interval {
  double lo = 0.0;
  double hi = 1.0;

  double length() const { return hi - lo; }
  friend bool operator==(const interval&, const interval&) = default;
};

// A basis family, its dimension K, and the domain it lives on.
//
// Natural cubic splines use K knots equispaced over the domain, both endpoints
// included. They are represented through the clamped cubic B-spline basis on
// those knots, projected onto the null space of the two natural boundary
// conditions (zero second derivative at both ends), and extend linearly
// beyond the boundary knots.
class basis_spec {
 public:
  // Throws invalid_spec when K is below the family minimum or the domain is
  // empty or non-finite.
  basis_spec(family f, int k, interval domain);

  family kind() const { return family_; }
  int size() const { return k_; }
  const interval& domain() const { return domain_; }

  // Boundary and interior knots (natural splines only; empty otherwise).
  const std::vector<double>& knots() const { return knots_; }

  // Whether eval() accepts t: anywhere for splines, inside the domain otherwise.
  bool accepts(double t) const;

  // Writes (phi_1(t), ..., phi_K(t)) into out, which must hold K values.
  void eval_into(double t, std::span<double> out) const;

  friend bool operator==(const basis_spec& a, const basis_spec& b) {
    return a.family_ == b.family_ && a.k_ == b.k_ && a.domain_ == b.domain_;
  }

 private:
  void eval_spline(double t, std::span<double> out) const;

  family family_;
  int k_;
  interval domain_;
  std::vector<double> knots_;
  // Clamped knot vector (boundary knots repeated four times).
  std::vector<double> clamped_;
  // (K + 2) x K map from B-spline coefficients to the natural basis.
  Matrix natural_map_;
  // Natural basis values and slopes at both boundary knots.
  Vector lo_value_, lo_slope_, hi_value_, hi_slope_;
};

std::string describe(const basis_spec& spec);

// (phi_1(t), ..., phi_K(t)).
Vector eval_basis(const basis_spec& spec, double t);

// Row j equals eval_basis(spec, times[j]).
Matrix design_matrix(const basis_spec& spec, std::span<const double> times);

// Pairwise L2 inner products of the basis over its domain.
class gram_matrix {
 public:
  gram_matrix(basis_spec spec, Matrix entries);

  const basis_spec& spec() const { return spec_; }
  const Matrix& entries() const { return entries_; }

 private:
  basis_spec spec_;
  Matrix entries_;
};

// Composite 16-point Gauss-Legendre quadrature on 64 equal panels, with the
// panels further split at spline knots so every piece is polynomial.
gram_matrix make_gram(const basis_spec& spec);

// Quadrature nodes and weights used by make_gram, exposed for reuse.
struct quadrature_rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
quadrature_rule gram_quadrature(const basis_spec& spec);

}  // namespace fdadd::basis
