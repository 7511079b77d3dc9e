#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include <fdadd/error.hpp>
#include <fdadd/linalg.hpp>

#include "support/oracles.hpp"

using namespace fdadd;
using namespace fdadd::testing;
using linalg::Matrix;
using linalg::Vector;

TEST_CASE("svd_pinv of the identity is the identity") {
  const Matrix eye = Matrix::Identity(3, 3);
  CHECK(rel_diff(linalg::svd_pinv(eye), eye) < 1e-15);
}

TEST_CASE("svd_pinv zeroes a null singular value") {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 2.0;
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 0.5;
  CHECK(rel_diff(linalg::svd_pinv(a), expected) < 1e-15);
}

TEST_CASE("svd_pinv matches normal equations for full column rank") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix a = random_matrix(rng, 4, 2);
    const Matrix oracle = gauss_solve(a.transpose() * a, a.transpose());
    CHECK(rel_diff(linalg::svd_pinv(a), oracle) < 1e-10);
  }
}

TEST_CASE("svd_pinv rejects bad input") {
  Matrix a = Matrix::Identity(2, 2);
  a(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(linalg::svd_pinv(a), invalid_input);
  CHECK_THROWS_AS(linalg::svd_pinv(Matrix::Identity(2, 2), 1.5), invalid_input);
  CHECK_THROWS_AS(linalg::svd_pinv(Matrix::Identity(2, 2), -0.1), invalid_input);
}

TEST_CASE("Penrose conditions on random matrices including rank-deficient ones") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 130);
  for (int rep = 0; rep < 60; ++rep) {
    const Eigen::Index m = std::min(60, dim(rng));
    const Eigen::Index n = dim(rng);
    const Eigen::Index r = std::max<Eigen::Index>(1, std::min(m, n) - rep % 4);
    const Matrix a = rep % 3 == 0 ? random_matrix(rng, m, n) : random_rank_deficient(rng, m, n, r);
    const Matrix p = linalg::svd_pinv(a);
    CHECK((a * p * a - a).norm() <= 1e-10 * a.norm());
    CHECK((p * a * p - p).norm() <= 1e-10 * p.norm());
    const Matrix ap = a * p;
    const Matrix pa = p * a;
    CHECK((ap - ap.transpose()).norm() <= 1e-10 * std::max(1.0, ap.norm()));
    CHECK((pa - pa.transpose()).norm() <= 1e-10 * std::max(1.0, pa.norm()));
  }
}

TEST_CASE("min_norm_lsq trivial cases") {
  Vector b(2);
  b << 3.0, -1.0;
  CHECK(rel_diff(linalg::min_norm_lsq(Matrix::Identity(2, 2), b), b) < 1e-15);

  Matrix row(1, 2);
  row << 1.0, 1.0;
  Vector rhs(1);
  rhs << 2.0;
  const Vector x = linalg::min_norm_lsq(row, rhs);
  CHECK(x(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(x(1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("min_norm_lsq matches the ridge-limit oracle on wide systems") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix a = random_matrix(rng, 5, 9);
    const Vector b = random_vector(rng, 5);
    const Vector x = linalg::min_norm_lsq(a, b);
    CHECK(rel_diff(x, ridge_limit_wide(a, b)) < 1e-10);
    CHECK(rel_diff(x, linalg::svd_pinv(a) * b) < 1e-10);
  }
}

TEST_CASE("min_norm_lsq minimizes the residual and the norm") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 30; ++rep) {
    const Eigen::Index m = 3 + rep % 7;
    const Eigen::Index n = 2 + (rep * 5) % 11;
    const Matrix a = random_rank_deficient(rng, m, n, std::max<Eigen::Index>(1, std::min(m, n) - 1));
    const Vector b = random_vector(rng, m);
    const Vector x = linalg::min_norm_lsq(a, b);
    const double best = (b - a * x).norm();

    // Perturbations can only increase the residual.
    for (int k = 0; k < 5; ++k) {
      const Vector delta = 0.1 * random_vector(rng, n);
      CHECK((b - a * (x + delta)).norm() >= best - 1e-9);
    }
    // Among exact interpolants of a consistent system, x has minimal norm:
    // x + (I - pinv(A) A) z interpolates too, and is never shorter.
    const Vector consistent = a * random_vector(rng, n);
    const Vector xc = linalg::min_norm_lsq(a, consistent);
    for (int k = 0; k < 5; ++k) {
      // z minus its row-space component lies in the null space of A.
      const Vector z = random_vector(rng, n);
      const Vector null_part = z - linalg::min_norm_lsq(a, Vector(a * z));
      const Vector other = xc + null_part;
      CHECK((a * other - consistent).norm() <= 1e-8 * std::max(1.0, consistent.norm()));
      CHECK(xc.norm() <= other.norm() + 1e-12);
    }
  }
}

TEST_CASE("min_norm_lsq errors") {
  CHECK_THROWS_AS(linalg::min_norm_lsq(Matrix::Identity(3, 3), Vector(Vector::Ones(2))), invalid_input);
  Vector b = Vector::Ones(3);
  b(0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(linalg::min_norm_lsq(Matrix::Identity(3, 3), b), invalid_input);
}

TEST_CASE("kron_min_norm_solve trivial cases") {
  std::mt19937_64 rng(3);
  const Matrix c = random_matrix(rng, 3, 2);
  CHECK(rel_diff(linalg::kron_min_norm_solve(Matrix::Identity(2, 2), Matrix::Identity(3, 3), c), c) <
        1e-14);

  Matrix p = Matrix::Zero(2, 2);
  p(0, 0) = 2.0;
  const Matrix twos = Matrix::Constant(2, 2, 2.0);
  Matrix expected(2, 2);
  expected << 1.0, 0.0, 1.0, 0.0;
  CHECK(rel_diff(linalg::kron_min_norm_solve(p, Matrix::Identity(2, 2), twos), expected) < 1e-14);
}

namespace {

Matrix dense_kron_oracle(const Matrix& p, const Matrix& q, const Matrix& c) {
  const Matrix big = linalg::kron(p, q);
  const Vector vec_c = Eigen::Map<const Vector>(c.data(), c.size());
  const Vector vec_b = linalg::svd_pinv(big) * vec_c;
  return Eigen::Map<const Matrix>(vec_b.data(), c.rows(), c.cols());
}

}  // namespace

TEST_CASE("kron_min_norm_solve matches the dense Kronecker oracle") {
  std::mt19937_64 rng(99);
  const Matrix p = random_psd(rng, 4, 4);
  const Matrix q = random_psd(rng, 5, 5);
  const Matrix c = random_matrix(rng, 5, 4);
  CHECK(rel_diff(linalg::kron_min_norm_solve(p, q, c), dense_kron_oracle(p, q, c)) < 1e-8);

  for (int rep = 0; rep < 40; ++rep) {
    const Eigen::Index pq = 1 + rep % 12;
    const Eigen::Index qq = 1 + (rep * 7) % 12;
    const Matrix pp = random_psd(rng, pq, std::max<Eigen::Index>(1, pq - rep % 3));
    const Matrix qm = random_psd(rng, qq, std::max<Eigen::Index>(1, qq - rep % 2));
    const Matrix cc = random_matrix(rng, qq, pq);
    CHECK(rel_diff(linalg::kron_min_norm_solve(pp, qm, cc), dense_kron_oracle(pp, qm, cc)) < 1e-8);
  }
}

TEST_CASE("kron_min_norm_solve validates its operands") {
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(linalg::kron_min_norm_solve(asym, Matrix::Identity(2, 2), Matrix::Ones(2, 2)),
                  invalid_input);

  Matrix indefinite = Matrix::Identity(2, 2);
  indefinite(1, 1) = -1.0;
  CHECK_THROWS_AS(
      linalg::kron_min_norm_solve(indefinite, Matrix::Identity(2, 2), Matrix::Ones(2, 2)),
      invalid_input);

  // Tiny negative eigenvalues are clamped rather than rejected.
  Matrix almost = Matrix::Identity(2, 2);
  almost(1, 1) = -1e-13;
  CHECK_NOTHROW(linalg::kron_min_norm_solve(almost, Matrix::Identity(2, 2), Matrix::Ones(2, 2)));

  CHECK_THROWS_AS(
      linalg::kron_min_norm_solve(Matrix::Identity(2, 2), Matrix::Identity(3, 3), Matrix::Ones(2, 3)),
      invalid_input);
}

TEST_CASE("numerical_rank counts singular values above the cutoff") {
  std::mt19937_64 rng(8);
  CHECK(linalg::numerical_rank(random_rank_deficient(rng, 12, 30, 7)) == 7);
  CHECK(linalg::numerical_rank(Matrix::Identity(4, 4)) == 4);
}
