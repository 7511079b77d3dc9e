#include <fdadd/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <fdadd/error.hpp>

namespace fdadd::linalg {
namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kNegativeEigenTol = 1e-10;

void require_finite(const Matrix& a, const char* what) {
  if (a.size() == 0) throw invalid_input(std::string(what) + ": empty matrix");
  if (!all_finite(a)) throw invalid_input(std::string(what) + ": non-finite entry");
}

double resolve_rcond(std::optional<double> rcond, Eigen::Index rows, Eigen::Index cols) {
  if (!rcond) return default_rcond(rows, cols);
  if (!(*rcond >= 0.0 && *rcond < 1.0)) throw invalid_input("rcond must lie in [0, 1)");
  return *rcond;
}

// One-sided Jacobi with QR preconditioning. The divide-and-conquer SVD can
// return a wrong factorization for tall matrices of low numerical rank.
Eigen::JacobiSVD<Matrix> thin_svd(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw numerical_error("SVD failed to converge");
  return svd;
}

// Reciprocal singular values with the cutoff applied.
Vector inverted_spectrum(const Vector& sigma, double rcond) {
  Vector inv = Vector::Zero(sigma.size());
  if (sigma.size() == 0) return inv;
  const double cutoff = rcond * sigma(0);
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff && sigma(i) > 0.0) inv(i) = 1.0 / sigma(i);
  }
  return inv;
}

struct psd_eigen {
  Vector values;
  Matrix vectors;
};

psd_eigen symmetric_psd_eigen(const Matrix& m, const char* name) {
  require_finite(m, name);
  if (m.rows() != m.cols()) throw invalid_input(std::string(name) + " must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw invalid_input(std::string(name) + " is not symmetric");
  }
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw numerical_error(std::string("eigendecomposition of ") + name + " failed");
  }
  Vector values = eig.eigenvalues();
  const double top = values.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < 0.0) {
      if (-values(i) > kNegativeEigenTol * top) {
        throw invalid_input(std::string(name) + " is indefinite");
      }
      values(i) = 0.0;
    }
  }
  return {std::move(values), eig.eigenvectors()};
}

}  // namespace

bool all_finite(const Matrix& a) { return a.allFinite(); }

double default_rcond(Eigen::Index rows, Eigen::Index cols) {
  return std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(rows, cols));
}

Matrix svd_pinv(const Matrix& a, std::optional<double> rcond) {
  require_finite(a, "svd_pinv");
  const double tol = resolve_rcond(rcond, a.rows(), a.cols());
  const auto svd = thin_svd(a);
  const Vector inv = inverted_spectrum(svd.singularValues(), tol);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Vector min_norm_lsq(const Matrix& a, const Vector& b, std::optional<double> rcond) {
  require_finite(a, "min_norm_lsq");
  if (b.size() != a.rows()) throw invalid_input("min_norm_lsq: dimension mismatch");
  if (!b.allFinite()) throw invalid_input("min_norm_lsq: non-finite right-hand side");
  const double tol = resolve_rcond(rcond, a.rows(), a.cols());
  const auto svd = thin_svd(a);
  const Vector inv = inverted_spectrum(svd.singularValues(), tol);
  return svd.matrixV() * (inv.asDiagonal() * (svd.matrixU().transpose() * b));
}

Matrix min_norm_lsq(const Matrix& a, const Matrix& b, std::optional<double> rcond) {
  require_finite(a, "min_norm_lsq");
  if (b.rows() != a.rows()) throw invalid_input("min_norm_lsq: dimension mismatch");
  if (!b.allFinite()) throw invalid_input("min_norm_lsq: non-finite right-hand side");
  const double tol = resolve_rcond(rcond, a.rows(), a.cols());
  const auto svd = thin_svd(a);
  const Vector inv = inverted_spectrum(svd.singularValues(), tol);
  return svd.matrixV() * (inv.asDiagonal() * (svd.matrixU().transpose() * b));
}

Matrix kron_min_norm_solve(const Matrix& p, const Matrix& q, const Matrix& c,
                           std::optional<double> rcond) {
  const auto ep = symmetric_psd_eigen(p, "P");
  const auto eq = symmetric_psd_eigen(q, "Q");
  require_finite(c, "kron_min_norm_solve");
  if (c.rows() != q.rows() || c.cols() != p.rows()) {
    throw invalid_input("kron_min_norm_solve: C must be rows(Q) x rows(P)");
  }
  const double tol = resolve_rcond(rcond, p.rows() * q.rows(), p.rows() * q.rows());

  // (P kron Q) = (U_P kron U_Q) diag(lp_j * lq_i) (U_P kron U_Q)^T, so in the
  // rotated frame the solve is elementwise.
  Matrix rotated = eq.vectors.transpose() * c * ep.vectors;
  const double top = ep.values.cwiseAbs().maxCoeff() * eq.values.cwiseAbs().maxCoeff();
  const double cutoff = tol * top;
  for (Eigen::Index j = 0; j < rotated.cols(); ++j) {
    for (Eigen::Index i = 0; i < rotated.rows(); ++i) {
      const double lambda = eq.values(i) * ep.values(j);
      rotated(i, j) = (lambda > cutoff && lambda > 0.0) ? rotated(i, j) / lambda : 0.0;
    }
  }
  return eq.vectors * rotated * ep.vectors.transpose();
}

Eigen::Index numerical_rank(const Matrix& a, std::optional<double> rcond) {
  require_finite(a, "numerical_rank");
  const double tol = resolve_rcond(rcond, a.rows(), a.cols());
  Eigen::JacobiSVD<Matrix> svd(a);
  if (svd.info() != Eigen::Success) throw numerical_error("SVD failed to converge");
  const Vector& sigma = svd.singularValues();
  const double cutoff = tol * sigma(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff && sigma(i) > 0.0) ++rank;
  }
  return rank;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace fdadd::linalg
