#pragma once

#include <optional>
#include <span>

#include <fdadd/basis.hpp>
#include <fdadd/functionalize.hpp>

namespace fdadd::regression {

using linalg::Matrix;
using linalg::Vector;

// Scalar-on-function model: y = integral of x(s) beta(s), beta = b^T phi.
class sonf_model {
 public:
  // Throws invalid_input if b_hat does not match the Gram matrix dimension.
  sonf_model(basis::gram_matrix gram_x, Vector b_hat);

  const basis::basis_spec& spec_x() const { return gram_x_.spec(); }
  const basis::gram_matrix& gram_x() const { return gram_x_; }
  const Vector& b_hat() const { return b_hat_; }

 private:
  basis::gram_matrix gram_x_;
  Vector b_hat_;
};

// Function-on-function model: beta(s, t) = phi(s)^T B psi(t).
class fonf_model {
 public:
  fonf_model(basis::gram_matrix gram_x, basis::gram_matrix gram_y, Matrix b_hat);

  const basis::basis_spec& spec_x() const { return gram_x_.spec(); }
  const basis::basis_spec& spec_y() const { return gram_y_.spec(); }
  const basis::gram_matrix& gram_x() const { return gram_x_; }
  const basis::gram_matrix& gram_y() const { return gram_y_; }
  const Matrix& b_hat() const { return b_hat_; }

 private:
  basis::gram_matrix gram_x_;
  basis::gram_matrix gram_y_;
  Matrix b_hat_;
};

// Row i is (G w_i)^T. Every datum must use the Gram matrix's basis.
Matrix sonf_design(std::span<const functional_datum> data, const basis::gram_matrix& gram);

// Coefficient matrix with row i equal to w_i^T.
Matrix coefficient_rows(std::span<const functional_datum> data, const basis::basis_spec& spec);

// Minimum-norm least squares b = pinv(Z) y.
Vector sonf_fit(const Matrix& z, const Vector& y, std::optional<double> rcond = std::nullopt);

// w^T G b_hat.
double sonf_predict(const sonf_model& model, const functional_datum& x);

// B = pinv(Psi kron Z^T Z) vec(Z^T V Psi), solved in Kronecker structure.
Matrix fonf_fit(const Matrix& z, const Matrix& v, const basis::gram_matrix& psi,
                std::optional<double> rcond = std::nullopt);

// Coefficients B^T G_x w of the predicted response curve.
functional_datum fonf_predict(const fonf_model& model, const functional_datum& x);

}  // namespace fdadd::regression
