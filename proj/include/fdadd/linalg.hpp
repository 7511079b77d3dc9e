#pragma once

#include <optional>

#include <Eigen/Core>

namespace fdadd::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// machine epsilon * max(rows, cols)
double default_rcond(Eigen::Index rows, Eigen::Index cols);

// Moore-Penrose pseudo-inverse through a thin SVD. Singular values at or below
// rcond * sigma_max are treated as zero.
Matrix svd_pinv(const Matrix& a, std::optional<double> rcond = std::nullopt);

// Minimum-norm minimizer of ||b - A x||, i.e. pinv(A) * b, from one SVD.
Vector min_norm_lsq(const Matrix& a, const Vector& b, std::optional<double> rcond = std::nullopt);

// Same as min_norm_lsq applied to every column of `b`.
Matrix min_norm_lsq(const Matrix& a, const Matrix& b, std::optional<double> rcond = std::nullopt);

// Solves vec(B) = pinv(P kron Q) vec(C) for symmetric PSD P (q x q), Q (p x p)
// and C (p x q), with column-major vec so that (P kron Q) vec(B) = vec(Q B P^T).
// Uses the eigendecompositions of P and Q; the pq x pq product is never formed.
// rcond applies to the eigenvalue products |lambda_Q(i) * lambda_P(j)| relative to
// the largest product; the default is machine epsilon * p * q.
Matrix kron_min_norm_solve(const Matrix& p, const Matrix& q, const Matrix& c,
                           std::optional<double> rcond = std::nullopt);

// Numerical rank: count of singular values above rcond * sigma_max.
Eigen::Index numerical_rank(const Matrix& a, std::optional<double> rcond = std::nullopt);

// Dense Kronecker product, for diagnostics and tests.
Matrix kron(const Matrix& a, const Matrix& b);

bool all_finite(const Matrix& a);

}  // namespace fdadd::linalg
