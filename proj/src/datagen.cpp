#include <fdadd/datagen.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Cholesky>

#include <fdadd/error.hpp>

namespace fdadd::datagen {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream roles.
enum : std::uint64_t {
  role_x_curve = 1,
  role_x_observe = 2,
  role_beta = 3,
  role_y_noise = 4,
  role_y_observe = 5,
  role_shared_times = 6,
  role_demo = 7,
};

std::vector<double> equispaced(const basis::interval& d, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    g[static_cast<std::size_t>(i)] = d.lo + d.length() * static_cast<double>(i) / (n - 1);
  g.back() = d.hi;
  return g;
}

std::vector<double> trapezoid(const std::vector<double>& grid) {
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double half = 0.5 * (grid[i + 1] - grid[i]);
    w[i] += half;
    w[i + 1] += half;
  }
  return w;
}

// m distinct indices from [0, n), in increasing order.
std::vector<std::size_t> draw_without_replacement(std::mt19937_64& rng, std::size_t n, int m) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(m));
  std::sort(pool.begin(), pool.end());
  return pool;
}

void check_positive(const gp_params& p, const char* what) {
  if (!(p.theta > 0.0) || !(p.h > 0.0) || !std::isfinite(p.theta) || !std::isfinite(p.h))
    throw config_error(std::string(what) + ": theta and h must be positive and finite");
}

}  // namespace

double rbf_kernel(double t1, double t2, const gp_params& p) {
  const double d = t1 - t2;
  return p.theta * p.theta * std::exp(-(d * d) / (p.h * p.h));
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replicate, std::uint64_t role,
                          std::uint64_t index) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ replicate);
  s = splitmix64(s ^ role);
  return splitmix64(s ^ index);
}

gp_sampler::gp_sampler(std::vector<double> grid, gp_params p) : grid_(std::move(grid)), params_(p) {
  if (grid_.empty()) throw invalid_input("Gaussian-process grid is empty");
  for (std::size_t i = 0; i + 1 < grid_.size(); ++i)
    if (!(grid_[i] < grid_[i + 1])) throw invalid_input("Gaussian-process grid must be strictly increasing");
  if (!(p.theta > 0.0) || !(p.h > 0.0)) throw invalid_input("Gaussian-process theta and h must be positive");

  const auto g = static_cast<Eigen::Index>(grid_.size());
  Matrix cov(g, g);
  for (Eigen::Index j = 0; j < g; ++j)
    for (Eigen::Index i = 0; i < g; ++i)
      cov(i, j) = rbf_kernel(grid_[static_cast<std::size_t>(i)], grid_[static_cast<std::size_t>(j)], p);

  const double scale = p.theta * p.theta;
  for (double level = 1e-8; level <= 1e-4 * (1.0 + 1e-9); level *= 10.0) {
    Matrix jittered = cov;
    jittered.diagonal().array() += level * scale;
    Eigen::LLT<Matrix> llt(jittered);
    if (llt.info() == Eigen::Success) {
      jitter_ = level * scale;
      factor_ = llt.matrixL();
      return;
    }
  }
  throw numerical_error("Gaussian-process covariance is not positive definite even with jitter 1e-4 theta^2");
}

Vector gp_sampler::sample(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(factor_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return factor_.triangularView<Eigen::Lower>() * z;
}

Vector sample_gp(const std::vector<double>& grid, const gp_params& p, std::uint64_t seed) {
  return gp_sampler(grid, p).sample(seed);
}

std::string_view scenario_name(scenario s) {
  switch (s) {
    case scenario::a:
      return "A";
    case scenario::b:
      return "B";
    case scenario::c:
      return "C";
    case scenario::d:
      return "D";
    case scenario::fig1_demo:
      return "fig1-demo";
  }
  return "unknown";
}

scenario parse_scenario(std::string_view name) {
  if (name.size() == 1) {
    switch (std::toupper(static_cast<unsigned char>(name[0]))) {
      case 'A':
        return scenario::a;
      case 'B':
        return scenario::b;
      case 'C':
        return scenario::c;
      case 'D':
        return scenario::d;
    }
  }
  if (name == "fig1-demo") return scenario::fig1_demo;
  throw config_error("unknown scenario '" + std::string(name) + "'");
}

std::string_view centering_name(centering c) {
  switch (c) {
    case centering::cross_sample:
      return "cross-sample";
    case centering::per_curve:
      return "per-curve";
    case centering::none:
      return "none";
  }
  return "unknown";
}

centering parse_centering(std::string_view name) {
  if (name == "cross-sample") return centering::cross_sample;
  if (name == "per-curve") return centering::per_curve;
  if (name == "none") return centering::none;
  throw config_error("unknown centering '" + std::string(name) + "'");
}

bool has_function_response(scenario s) { return s == scenario::c || s == scenario::d; }

scenario_config default_config(scenario s) {
  scenario_config cfg;
  cfg.kind = s;
  switch (s) {
    case scenario::a:
      cfg.n_train = 10;
      cfg.m1 = 75;
      break;
    case scenario::b:
      cfg.n_train = 50;
      cfg.m1 = 10;
      break;
    case scenario::c:
      cfg.n_train = 50;
      cfg.m1 = 75;
      cfg.m2 = 5;
      break;
    case scenario::d:
      cfg.n_train = 10;
      cfg.m1 = 75;
      cfg.m2 = 75;
      break;
    case scenario::fig1_demo:
      cfg.n_train = 1;
      cfg.n_test = 0;
      cfg.m1 = 15;
      cfg.domain = {0.0, 100.0};
      break;
  }
  return cfg;
}

void validate(const scenario_config& cfg) {
  if (cfg.kind == scenario::fig1_demo) throw config_error("the curve-fitting demo has its own configuration");
  if (cfg.n_train < 1) throw config_error("n_train must be at least 1");
  if (cfg.n_test < 1) throw config_error("n_test must be at least 1");
  if (cfg.latent_grid_size < 2) throw config_error("latent_grid_size must be at least 2");
  if (cfg.m1 < 1 || cfg.m1 > cfg.latent_grid_size)
    throw config_error("M (observation points for x) must lie in [1, latent_grid_size]");
  if (has_function_response(cfg.kind)) {
    if (cfg.beta_t_grid_size < 2) throw config_error("beta_t_grid_size must be at least 2");
    if (cfg.m2 < 1 || cfg.m2 > cfg.beta_t_grid_size)
      throw config_error("M2 (observation points for y) must lie in [1, beta_t_grid_size]");
  }
  if (!(cfg.noise_sd >= 0.0) || !std::isfinite(cfg.noise_sd)) throw config_error("noise_sd must be non-negative");
  if (!std::isfinite(cfg.domain.lo) || !std::isfinite(cfg.domain.hi) || !(cfg.domain.lo < cfg.domain.hi))
    throw config_error("domain must be a finite interval with lo < hi");
  check_positive(cfg.gp_x, "gp_x");
  check_positive(cfg.gp_beta, "gp_beta");
}

generator::generator(scenario_config cfg) : cfg_(cfg) {
  validate(cfg_);
  grid_ = equispaced(cfg_.domain, cfg_.latent_grid_size);
  weights_ = trapezoid(grid_);
  x_sampler_ = std::make_shared<gp_sampler>(grid_, cfg_.gp_x);
  beta_sampler_ = std::make_shared<gp_sampler>(grid_, cfg_.gp_beta);
  if (has_function_response(cfg_.kind)) {
    t_grid_ = equispaced(cfg_.domain, cfg_.beta_t_grid_size);
    if (cfg_.beta_smooth_in_t) t_sampler_ = std::make_shared<gp_sampler>(t_grid_, gp_params{1.0, cfg_.gp_beta.h});
  }
}

Matrix generator::latent_x(std::uint64_t master_seed, std::uint64_t replicate) const {
  const int n = cfg_.n_train + cfg_.n_test;
  const auto g = static_cast<Eigen::Index>(grid_.size());
  Matrix x(n, g);
  for (int i = 0; i < n; ++i)
    x.row(i) = x_sampler_->sample(stream_seed(master_seed, replicate, role_x_curve,
                                              static_cast<std::uint64_t>(i)))
                   .transpose();
  switch (cfg_.center) {
    case centering::cross_sample:
      x.rowwise() -= x.colwise().mean();
      break;
    case centering::per_curve: {
      // Zero time-average under the trapezoid rule.
      const Eigen::Map<const Vector> w(weights_.data(), g);
      const double length = cfg_.domain.length();
      for (int i = 0; i < n; ++i) x.row(i).array() -= x.row(i).dot(w) / length;
      break;
    }
    case centering::none:
      break;
  }
  return x;
}

Matrix generator::latent_beta(std::uint64_t master_seed, std::uint64_t replicate) const {
  const auto cols = has_function_response(cfg_.kind) ? static_cast<Eigen::Index>(t_grid_.size()) : 1;
  Matrix beta(static_cast<Eigen::Index>(grid_.size()), cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    beta.col(j) = beta_sampler_->sample(
        stream_seed(master_seed, replicate, role_beta, static_cast<std::uint64_t>(j)));
  // Independent columns times the t factor give covariance K_s (x) K_t.
  if (t_sampler_) return beta * t_sampler_->factor().transpose();
  return beta;
}

std::vector<std::size_t> generator::observation_indices(std::uint64_t seed, std::size_t grid_size,
                                                        int m) const {
  std::mt19937_64 rng(seed);
  return draw_without_replacement(rng, grid_size, m);
}

sonf_dataset generator::scalar_response(std::uint64_t master_seed, std::uint64_t replicate) const {
  if (has_function_response(cfg_.kind)) throw invalid_input("scenario has a function response");
  const Matrix x = latent_x(master_seed, replicate);
  const Vector wb =
      Eigen::Map<const Vector>(weights_.data(), static_cast<Eigen::Index>(weights_.size()))
          .cwiseProduct(latent_beta(master_seed, replicate).col(0));

  std::vector<std::size_t> shared;
  if (cfg_.shared_observation_times)
    shared = observation_indices(stream_seed(master_seed, replicate, role_shared_times, 0),
                                 grid_.size(), cfg_.m1);

  sonf_dataset out;
  const int n = cfg_.n_train + cfg_.n_test;
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    std::mt19937_64 rng(stream_seed(master_seed, replicate, role_x_observe, idx));
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto points =
        cfg_.shared_observation_times ? shared : draw_without_replacement(rng, grid_.size(), cfg_.m1);
    std::vector<double> t(points.size()), v(points.size());
    for (std::size_t j = 0; j < points.size(); ++j) {
      t[j] = grid_[points[j]];
      v[j] = x(i, static_cast<Eigen::Index>(points[j])) + cfg_.noise_sd * noise(rng);
    }
    const double signal = x.row(i).dot(wb);
    std::mt19937_64 yrng(stream_seed(master_seed, replicate, role_y_noise, idx));
    const double y = signal + cfg_.noise_sd * noise(yrng);
    auto& dest = i < cfg_.n_train ? out.train : out.test;
    dest.push_back({longitudinal_sample(std::move(t), std::move(v)), y, signal});
  }
  return out;
}

fonf_dataset generator::function_response(std::uint64_t master_seed, std::uint64_t replicate) const {
  if (!has_function_response(cfg_.kind)) throw invalid_input("scenario has a scalar response");
  const Matrix x = latent_x(master_seed, replicate);
  const auto g = static_cast<Eigen::Index>(grid_.size());

  // y_i(t_j) = sum_s w_s x_i(s) beta(s, t_j) on the response grid.
  const Matrix wbeta =
      Eigen::Map<const Vector>(weights_.data(), g).asDiagonal() * latent_beta(master_seed, replicate);
  const Matrix y_true = x * wbeta;

  std::vector<std::size_t> shared_x, shared_y;
  if (cfg_.shared_observation_times)
    shared_x = observation_indices(stream_seed(master_seed, replicate, role_shared_times, 0),
                                   grid_.size(), cfg_.m1);
  if (cfg_.shared_response_times)
    shared_y = observation_indices(stream_seed(master_seed, replicate, role_shared_times, 1),
                                   t_grid_.size(), cfg_.m2);

  fonf_dataset out;
  const int n = cfg_.n_train + cfg_.n_test;
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::mt19937_64 xrng(stream_seed(master_seed, replicate, role_x_observe, idx));
    const auto xp = cfg_.shared_observation_times ? shared_x
                                                  : draw_without_replacement(xrng, grid_.size(), cfg_.m1);
    std::vector<double> xt(xp.size()), xv(xp.size());
    for (std::size_t j = 0; j < xp.size(); ++j) {
      xt[j] = grid_[xp[j]];
      xv[j] = x(i, static_cast<Eigen::Index>(xp[j])) + cfg_.noise_sd * noise(xrng);
    }

    std::mt19937_64 yrng(stream_seed(master_seed, replicate, role_y_observe, idx));
    const auto yp = cfg_.shared_response_times ? shared_y
                                                  : draw_without_replacement(yrng, t_grid_.size(), cfg_.m2);
    std::vector<double> yt(yp.size()), yv(yp.size()), sig(yp.size());
    for (std::size_t j = 0; j < yp.size(); ++j) {
      yt[j] = t_grid_[yp[j]];
      sig[j] = y_true(i, static_cast<Eigen::Index>(yp[j]));
      yv[j] = sig[j] + cfg_.noise_sd * noise(yrng);
    }
    auto& dest = i < cfg_.n_train ? out.train : out.test;
    dest.push_back({longitudinal_sample(std::move(xt), std::move(xv)),
                    longitudinal_sample(std::move(yt), std::move(yv)), std::move(sig)});
  }
  return out;
}

demo_sample gen_fig1_demo(const demo_config& cfg, std::uint64_t seed) {
  if (cfg.points < 1 || cfg.points > cfg.latent_grid_size)
    throw config_error("demo points must lie in [1, latent_grid_size]");
  if (!(cfg.domain.lo < cfg.domain.hi)) throw config_error("demo domain must have lo < hi");
  check_positive(cfg.gp, "demo gp");
  auto grid = equispaced(cfg.domain, cfg.latent_grid_size);
  const Vector curve = sample_gp(grid, cfg.gp, stream_seed(seed, 0, role_demo, 0));
  std::mt19937_64 rng(stream_seed(seed, 0, role_demo, 1));
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto points = draw_without_replacement(rng, grid.size(), cfg.points);
  std::vector<double> t(points.size()), v(points.size());
  for (std::size_t j = 0; j < points.size(); ++j) {
    t[j] = grid[points[j]];
    v[j] = curve(static_cast<Eigen::Index>(points[j])) + cfg.noise_sd * noise(rng);
  }
  std::vector<double> truth(curve.data(), curve.data() + curve.size());
  return {longitudinal_sample(std::move(t), std::move(v)), std::move(grid), std::move(truth), cfg.domain};
}

}  // namespace fdadd::datagen
