#include <fdadd/basis.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/QR>
#include <boost/math/quadrature/gauss.hpp>

#include <fdadd/error.hpp>
#include <fdadd/simd/kernels.hpp>

namespace fdadd::basis {
namespace {

constexpr int kDegree = 3;
constexpr int kOrder = kDegree + 1;
constexpr int kGaussPoints = 16;
constexpr int kPanels = 64;

// Nonzero cubic B-splines at t and their derivatives up to order 2
// (Piegl & Tiller, algorithm A2.3). ders[d][r] is the d-th derivative of
// basis function span - 3 + r.
struct local_bspline {
  int span = 0;
  std::array<std::array<double, kOrder>, 3> ders{};
};

int find_span(const std::vector<double>& u, int n_basis, double t) {
  // Last nonempty span when t sits on the right boundary.
  if (t >= u[n_basis]) return n_basis - 1;
  const auto it = std::upper_bound(u.begin() + kDegree, u.begin() + n_basis + 1, t);
  return static_cast<int>(it - u.begin()) - 1;
}

local_bspline bspline_ders(const std::vector<double>& u, int n_basis, double t) {
  local_bspline out;
  const int span = find_span(u, n_basis, t);
  out.span = span;

  double ndu[kOrder][kOrder];
  double left[kOrder];
  double right[kOrder];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= kDegree; ++j) {
    left[j] = t - u[span + 1 - j];
    right[j] = u[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  for (int j = 0; j <= kDegree; ++j) out.ders[0][j] = ndu[j][kDegree];

  double a[2][kOrder];
  for (int r = 0; r <= kDegree; ++r) {
    int s1 = 0;
    int s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= 2; ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = kDegree - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : kDegree - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      out.ders[k][r] = d;
      std::swap(s1, s2);
    }
  }
  double factor = kDegree;
  for (int k = 1; k <= 2; ++k) {
    for (int j = 0; j <= kDegree; ++j) out.ders[k][j] *= factor;
    factor *= kDegree - k;
  }
  return out;
}

int family_minimum(family f) { return f == family::natural_cubic_spline ? 2 : 1; }

}  // namespace

std::string_view family_name(family f) {
  switch (f) {
    case family::natural_cubic_spline:
      return "natural-cubic-spline";
    case family::fourier:
      return "fourier";
    case family::monomial_test:
      return "monomial-test";
  }
  return "unknown";
}

family parse_family(std::string_view name) {
  if (name == "natural-cubic-spline") return family::natural_cubic_spline;
  if (name == "fourier") return family::fourier;
  if (name == "monomial-test") return family::monomial_test;
  throw invalid_spec("unknown basis family '" + std::string(name) + "'");
}

basis_spec::basis_spec(family f, int k, interval domain) : family_(f), k_(k), domain_(domain) {
  if (!std::isfinite(domain.lo) || !std::isfinite(domain.hi) || !(domain.lo < domain.hi)) {
    throw invalid_spec("basis domain must be a finite interval with lo < hi");
  }
  if (k < family_minimum(f)) {
    throw invalid_spec(std::string(family_name(f)) + " needs K >= " +
                       std::to_string(family_minimum(f)) + ", got " + std::to_string(k));
  }
  if (f != family::natural_cubic_spline) return;

  knots_.resize(static_cast<std::size_t>(k));
  const double step = domain.length() / static_cast<double>(k - 1);
  for (int i = 0; i < k; ++i) knots_[static_cast<std::size_t>(i)] = domain.lo + step * i;
  knots_.back() = domain.hi;

  clamped_.assign(kDegree, domain.lo);
  clamped_.insert(clamped_.end(), knots_.begin(), knots_.end());
  clamped_.insert(clamped_.end(), kDegree, domain.hi);
  const int n_basis = k + 2;

  // Second derivatives of every B-spline at both ends; the natural basis
  // spans their common null space.
  Matrix constraints = Matrix::Zero(n_basis, 2);
  const auto at_lo = bspline_ders(clamped_, n_basis, domain.lo);
  const auto at_hi = bspline_ders(clamped_, n_basis, domain.hi);
  for (int r = 0; r < kOrder; ++r) {
    constraints(at_lo.span - kDegree + r, 0) = at_lo.ders[2][static_cast<std::size_t>(r)];
    constraints(at_hi.span - kDegree + r, 1) = at_hi.ders[2][static_cast<std::size_t>(r)];
  }
  Eigen::HouseholderQR<Matrix> qr(constraints);
  const Matrix q = qr.householderQ() * Matrix::Identity(n_basis, n_basis);
  natural_map_ = q.rightCols(k);

  lo_value_ = Vector::Zero(k);
  lo_slope_ = Vector::Zero(k);
  hi_value_ = Vector::Zero(k);
  hi_slope_ = Vector::Zero(k);
  for (int r = 0; r < kOrder; ++r) {
    const auto row_lo = natural_map_.row(at_lo.span - kDegree + r);
    const auto row_hi = natural_map_.row(at_hi.span - kDegree + r);
    lo_value_ += at_lo.ders[0][static_cast<std::size_t>(r)] * row_lo.transpose();
    lo_slope_ += at_lo.ders[1][static_cast<std::size_t>(r)] * row_lo.transpose();
    hi_value_ += at_hi.ders[0][static_cast<std::size_t>(r)] * row_hi.transpose();
    hi_slope_ += at_hi.ders[1][static_cast<std::size_t>(r)] * row_hi.transpose();
  }
}

bool basis_spec::accepts(double t) const {
  if (!std::isfinite(t)) return false;
  if (family_ == family::natural_cubic_spline) return true;
  return t >= domain_.lo && t <= domain_.hi;
}

void basis_spec::eval_spline(double t, std::span<double> out) const {
  if (t < domain_.lo) {
    const double d = t - domain_.lo;
    for (int k = 0; k < k_; ++k) out[static_cast<std::size_t>(k)] = lo_value_(k) + d * lo_slope_(k);
    return;
  }
  if (t > domain_.hi) {
    const double d = t - domain_.hi;
    for (int k = 0; k < k_; ++k) out[static_cast<std::size_t>(k)] = hi_value_(k) + d * hi_slope_(k);
    return;
  }
  const auto local = bspline_ders(clamped_, k_ + 2, t);
  std::fill(out.begin(), out.end(), 0.0);
  for (int r = 0; r < kOrder; ++r) {
    const double b = local.ders[0][static_cast<std::size_t>(r)];
    const auto row = natural_map_.row(local.span - kDegree + r);
    for (int k = 0; k < k_; ++k) out[static_cast<std::size_t>(k)] += b * row(k);
  }
}

void basis_spec::eval_into(double t, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(k_)) {
    throw invalid_input("eval_into: output holds " + std::to_string(out.size()) +
                        " values, basis has " + std::to_string(k_));
  }
  if (!accepts(t)) {
    std::ostringstream msg;
    msg << family_name(family_) << " basis cannot be evaluated at t = " << t << " outside ["
        << domain_.lo << ", " << domain_.hi << "]";
    throw invalid_input(msg.str());
  }
  switch (family_) {
    case family::natural_cubic_spline:
      eval_spline(t, out);
      return;
    case family::fourier: {
      const double len = domain_.length();
      const double c0 = 1.0 / std::sqrt(len);
      const double c1 = std::sqrt(2.0 / len);
      const double phase = 2.0 * std::numbers::pi * (t - domain_.lo) / len;
      out[0] = c0;
      for (int k = 1; k < k_; ++k) {
        const int j = (k + 1) / 2;
        const double arg = phase * j;
        out[static_cast<std::size_t>(k)] = c1 * ((k % 2 == 1) ? std::sin(arg) : std::cos(arg));
      }
      return;
    }
    case family::monomial_test: {
      double power = 1.0;
      for (int k = 0; k < k_; ++k) {
        out[static_cast<std::size_t>(k)] = power;
        power *= t;
      }
      return;
    }
  }
}

std::string describe(const basis_spec& spec) {
  std::ostringstream out;
  out << family_name(spec.kind()) << "(K=" << spec.size() << ", [" << spec.domain().lo << ", "
      << spec.domain().hi << "])";
  return out.str();
}

Vector eval_basis(const basis_spec& spec, double t) {
  Vector out(spec.size());
  spec.eval_into(t, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

Matrix design_matrix(const basis_spec& spec, std::span<const double> times) {
  if (times.empty()) throw invalid_input("design_matrix: no time points");
  Matrix out(static_cast<Eigen::Index>(times.size()), spec.size());
  Vector row(spec.size());
  const std::span<double> row_view(row.data(), static_cast<std::size_t>(row.size()));
  for (std::size_t j = 0; j < times.size(); ++j) {
    spec.eval_into(times[j], row_view);
    out.row(static_cast<Eigen::Index>(j)) = row.transpose();
  }
  return out;
}

gram_matrix::gram_matrix(basis_spec spec, Matrix entries)
    : spec_(std::move(spec)), entries_(std::move(entries)) {
  if (entries_.rows() != spec_.size() || entries_.cols() != spec_.size()) {
    throw invalid_input("gram_matrix: entries must be K x K");
  }
}

quadrature_rule gram_quadrature(const basis_spec& spec) {
  const interval dom = spec.domain();
  std::vector<double> breaks;
  breaks.reserve(kPanels + spec.knots().size() + 1);
  for (int i = 0; i <= kPanels; ++i) {
    breaks.push_back(dom.lo + dom.length() * static_cast<double>(i) / kPanels);
  }
  breaks.back() = dom.hi;
  breaks.insert(breaks.end(), spec.knots().begin(), spec.knots().end());
  std::sort(breaks.begin(), breaks.end());
  const double merge_tol = 1e-12 * dom.length();
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [&](double a, double b) { return std::abs(a - b) <= merge_tol; }),
               breaks.end());

  using rule = boost::math::quadrature::gauss<double, kGaussPoints>;
  const auto& abscissa = rule::abscissa();
  const auto& weight = rule::weights();

  quadrature_rule out;
  out.nodes.reserve((breaks.size() - 1) * kGaussPoints);
  out.weights.reserve(out.nodes.capacity());
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double half = 0.5 * (breaks[p + 1] - breaks[p]);
    const double mid = 0.5 * (breaks[p + 1] + breaks[p]);
    // boost stores the nonnegative half of the symmetric rule.
    for (std::size_t i = abscissa.size(); i-- > 0;) {
      out.nodes.push_back(mid - half * abscissa[i]);
      out.weights.push_back(half * weight[i]);
    }
    for (std::size_t i = 0; i < abscissa.size(); ++i) {
      out.nodes.push_back(mid + half * abscissa[i]);
      out.weights.push_back(half * weight[i]);
    }
  }
  return out;
}

gram_matrix make_gram(const basis_spec& spec) {
  const auto rule = gram_quadrature(spec);
  // Column-major: each basis function's values over the nodes are contiguous.
  const Matrix values = design_matrix(spec, rule.nodes);
  const auto n = static_cast<std::size_t>(values.rows());
  const std::span<const double> w(rule.weights);
  const int k = spec.size();
  Matrix g(k, k);
  for (int i = 0; i < k; ++i) {
    const std::span<const double> ci(values.col(i).data(), n);
    for (int j = i; j < k; ++j) {
      const std::span<const double> cj(values.col(j).data(), n);
      g(i, j) = simd::weighted_dot(w, ci, cj);
      g(j, i) = g(i, j);
    }
  }
  return gram_matrix(spec, std::move(g));
}

}  // namespace fdadd::basis
