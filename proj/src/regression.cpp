#include <fdadd/regression.hpp>

#include <string>

#include <fdadd/error.hpp>

namespace fdadd::regression {

namespace {

void require_spec(const basis::basis_spec& have, const basis::basis_spec& want, const char* what) {
  if (!(have == want))
    throw invalid_input(std::string(what) + ": basis " + basis::describe(have) +
                        " does not match " + basis::describe(want));
}

}  // namespace

sonf_model::sonf_model(basis::gram_matrix gram_x, Vector b_hat)
    : gram_x_(std::move(gram_x)), b_hat_(std::move(b_hat)) {
  if (b_hat_.size() != gram_x_.spec().size())
    throw invalid_input("scalar-on-function coefficients have length " +
                        std::to_string(b_hat_.size()) + ", expected " +
                        std::to_string(gram_x_.spec().size()));
  if (!b_hat_.allFinite()) throw numerical_error("scalar-on-function coefficients are not finite");
}

fonf_model::fonf_model(basis::gram_matrix gram_x, basis::gram_matrix gram_y, Matrix b_hat)
    : gram_x_(std::move(gram_x)), gram_y_(std::move(gram_y)), b_hat_(std::move(b_hat)) {
  if (b_hat_.rows() != gram_x_.spec().size() || b_hat_.cols() != gram_y_.spec().size())
    throw invalid_input("function-on-function coefficient matrix is " +
                        std::to_string(b_hat_.rows()) + "x" + std::to_string(b_hat_.cols()) +
                        ", expected " + std::to_string(gram_x_.spec().size()) + "x" +
                        std::to_string(gram_y_.spec().size()));
  if (!b_hat_.allFinite())
    throw numerical_error("function-on-function coefficients are not finite");
}

Matrix coefficient_rows(std::span<const functional_datum> data, const basis::basis_spec& spec) {
  if (data.empty()) throw invalid_input("no functional data");
  Matrix w(static_cast<Eigen::Index>(data.size()), spec.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    require_spec(data[i].spec(), spec, "coefficient_rows");
    w.row(static_cast<Eigen::Index>(i)) = data[i].coefficients().transpose();
  }
  return w;
}

Matrix sonf_design(std::span<const functional_datum> data, const basis::gram_matrix& gram) {
  // G is symmetric, so W G has rows (G w_i)^T.
  return coefficient_rows(data, gram.spec()) * gram.entries();
}

Vector sonf_fit(const Matrix& z, const Vector& y, std::optional<double> rcond) {
  if (z.rows() != y.size())
    throw invalid_input("design has " + std::to_string(z.rows()) + " rows but " +
                        std::to_string(y.size()) + " responses");
  return linalg::min_norm_lsq(z, y, rcond);
}

double sonf_predict(const sonf_model& model, const functional_datum& x) {
  require_spec(x.spec(), model.spec_x(), "sonf_predict");
  return x.coefficients().dot(model.gram_x().entries() * model.b_hat());
}

Matrix fonf_fit(const Matrix& z, const Matrix& v, const basis::gram_matrix& psi,
                std::optional<double> rcond) {
  if (z.rows() != v.rows())
    throw invalid_input("predictor design has " + std::to_string(z.rows()) +
                        " rows, response coefficients have " + std::to_string(v.rows()));
  if (v.cols() != psi.spec().size())
    throw invalid_input("response coefficients have " + std::to_string(v.cols()) +
                        " columns, response basis has " + std::to_string(psi.spec().size()));
  const Matrix& p = psi.entries();
  const Matrix q = z.transpose() * z;
  const Matrix c = z.transpose() * v * p;
  return linalg::kron_min_norm_solve(p, q, c, rcond);
}

functional_datum fonf_predict(const fonf_model& model, const functional_datum& x) {
  require_spec(x.spec(), model.spec_x(), "fonf_predict");
  Vector v = model.b_hat().transpose() * (model.gram_x().entries() * x.coefficients());
  return functional_datum(model.spec_y(), std::move(v));
}

}  // namespace fdadd::regression
