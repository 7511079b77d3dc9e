#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include <fdadd/basis.hpp>
#include <fdadd/functionalize.hpp>

namespace fdadd::datagen {

using linalg::Matrix;
using linalg::Vector;

struct gp_params {
  double theta = 10.0;  // amplitude
  double h = 10.0;      // length scale
};

// theta^2 exp(-(t1 - t2)^2 / h^2)
double rbf_kernel(double t1, double t2, const gp_params& p);

// Seed of an independent random stream. Streams are addressed by
// (master, replicate, role, index) and mixed with splitmix64, so a subject's
// draws never depend on how many other subjects were generated before it.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replicate, std::uint64_t role,
                          std::uint64_t index);

// Zero-mean Gaussian process on a fixed grid. The covariance factor is
// computed once; sampling is then a matrix-vector product. The jitter starts
// at 1e-8 theta^2 on the diagonal and grows tenfold up to 1e-4 theta^2 until
// the Cholesky factorization succeeds.
class gp_sampler {
 public:
  // Throws invalid_input unless the grid is strictly increasing and the
  // parameters are positive; numerical_error if no jitter level works.
  gp_sampler(std::vector<double> grid, gp_params p);

  const std::vector<double>& grid() const { return grid_; }
  double jitter() const { return jitter_; }
  const Matrix& factor() const { return factor_; }  // lower Cholesky factor, jitter included

  // One draw using the standard normal stream of `seed`.
  Vector sample(std::uint64_t seed) const;

 private:
  std::vector<double> grid_;
  gp_params params_;
  double jitter_ = 0.0;
  Matrix factor_;  // lower Cholesky factor
};

// Convenience wrapper: factorizes and draws once.
Vector sample_gp(const std::vector<double>& grid, const gp_params& p, std::uint64_t seed);

enum class scenario { a, b, c, d, fig1_demo };
std::string_view scenario_name(scenario s);
// Accepts "A", "B", "C", "D", "fig1-demo" (letters in either case).
scenario parse_scenario(std::string_view name);

enum class centering { cross_sample, per_curve, none };
std::string_view centering_name(centering c);
centering parse_centering(std::string_view name);

struct scenario_config {
  scenario kind = scenario::a;
  int n_train = 10;
  int n_test = 150;
  int m1 = 75;  // observation points for x
  int m2 = 75;  // observation points for y (function responses only)
  gp_params gp_x{10.0, 10.0};
  gp_params gp_beta{15.0, 10.0};
  double noise_sd = 1.0;
  int latent_grid_size = 1001;
  int beta_t_grid_size = 101;  // t columns of beta(s, t) for function responses
  // When set, beta(s, t) is a separable GP: RBF in s with gp_beta, and RBF
  // correlation in t with length scale gp_beta.h. Otherwise every t column is
  // an independent draw over s.
  bool beta_smooth_in_t = true;
  basis::interval domain{0.0, 1.0};
  centering center = centering::cross_sample;
  // One draw of observation points per replicate, used by every subject,
  // instead of a fresh draw per subject.
  bool shared_observation_times = true;
  // The same for y observation points of function responses.
  bool shared_response_times = false;
};

// Defaults for each scenario.
scenario_config default_config(scenario s);

// Throws config_error when a field is out of range for the scenario.
void validate(const scenario_config& cfg);

bool has_function_response(scenario s);

struct scalar_subject {
  longitudinal_sample x;
  double y = 0.0;       // observed response
  double signal = 0.0;  // noiseless response (observed response for real data)
};

struct curve_subject {
  longitudinal_sample x;
  longitudinal_sample y;       // observed response curve
  std::vector<double> signal;  // noiseless response at y.times()
};

struct sonf_dataset {
  std::vector<scalar_subject> train;
  std::vector<scalar_subject> test;
};

struct fonf_dataset {
  std::vector<curve_subject> train;
  std::vector<curve_subject> test;
};

// Immutable per-config state shared by every replicate: latent grids and the
// Gaussian-process factors. Safe to share across threads.
class generator {
 public:
  explicit generator(scenario_config cfg);

  const scenario_config& config() const { return cfg_; }
  const std::vector<double>& latent_grid() const { return grid_; }
  const std::vector<double>& response_grid() const { return t_grid_; }

  // Scenarios A and B. Throws invalid_input for function-response scenarios.
  sonf_dataset scalar_response(std::uint64_t master_seed, std::uint64_t replicate) const;
  // Scenarios C and D.
  fonf_dataset function_response(std::uint64_t master_seed, std::uint64_t replicate) const;

  // Latent curves of one replicate (rows = subjects, train first), after
  // centering; exposed for property tests.
  Matrix latent_x(std::uint64_t master_seed, std::uint64_t replicate) const;
  // beta on the latent grid: one column for scalar responses, one column per
  // response-grid point for function responses.
  Matrix latent_beta(std::uint64_t master_seed, std::uint64_t replicate) const;

 private:
  std::vector<std::size_t> observation_indices(std::uint64_t seed, std::size_t grid_size,
                                               int m) const;

  scenario_config cfg_;
  std::vector<double> grid_;
  std::vector<double> weights_;  // trapezoid weights on grid_
  std::vector<double> t_grid_;
  std::shared_ptr<const gp_sampler> x_sampler_;
  std::shared_ptr<const gp_sampler> beta_sampler_;
  std::shared_ptr<const gp_sampler> t_sampler_;  // correlation across t, smooth beta only
};

// A single GP curve observed at a few random points, for the curve-fitting demo.
struct demo_sample {
  longitudinal_sample observed;
  std::vector<double> grid;  // latent grid
  std::vector<double> truth;  // noiseless curve on the grid
  basis::interval domain;
};

struct demo_config {
  int points = 15;
  gp_params gp{10.0, 10.0};
  double noise_sd = 1.0;
  int latent_grid_size = 1001;
  basis::interval domain{0.0, 100.0};
};

demo_sample gen_fig1_demo(const demo_config& cfg, std::uint64_t seed);

}  // namespace fdadd::datagen
