// Acceptance checks: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,5] [--expect-fail 6,8] [--threads n] [--fixtures dir]
//
// Exit status is non-zero when a criterion fails that is not listed in
// --expect-fail. Listed criteria still run and still print FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <fdadd/basis.hpp>
#include <fdadd/error.hpp>
#include <fdadd/experiment.hpp>
#include <fdadd/functionalize.hpp>
#include <fdadd/linalg.hpp>
#include <fdadd/regression.hpp>
#include <fdadd/selection.hpp>

#include "support/oracles.hpp"

using namespace fdadd;
using namespace fdadd::testing;
namespace ex = fdadd::experiment;
using datagen::scenario;
using selection::method;

namespace {

struct outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "" : "!! ") + what);
  }
  void note(const std::string& what) { notes.push_back(what); }
};

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

int g_threads = 1;
std::filesystem::path g_fixtures;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Pseudo-inverse through a complete orthogonal decomposition, a different
// algorithm from the library's SVD path.
Matrix cod_pinv(const Matrix& a, double threshold) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  cod.setThreshold(threshold);
  return cod.pseudoInverse();
}

double fro(const Matrix& a) { return a.norm(); }

std::vector<double> stratified_times(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> t(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) t[static_cast<std::size_t>(j)] = (j + u(rng)) / m;
  return t;
}

// Median MSE per K across replicates.
std::map<int, double> median_curve(const ex::sweep_result& r) {
  std::map<int, double> out;
  for (const auto& row : ex::summarize(r).curve) out[row.k] = row.median;
  return out;
}

std::pair<int, double> peak_of(const std::map<int, double>& curve) {
  auto best = curve.begin();
  for (auto it = curve.begin(); it != curve.end(); ++it)
    if (it->second > best->second) best = it;
  return *best;
}

std::map<method, double> method_means(const ex::sweep_result& r) {
  std::map<method, double> out;
  for (const auto& m : ex::summarize(r).methods) out[m.kind] = m.mean_mse;
  return out;
}

ex::sweep_config scenario_sweep(scenario s, int replicates) {
  auto cfg = ex::default_sweep(s);
  cfg.replicates = replicates;
  cfg.threads = g_threads;
  return cfg;
}

// ---- criteria ---------------------------------------------------------------

outcome linear_algebra_oracles() {
  outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 60), wide(1, 130);
  double worst = 0.0;
  int deficient = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const int m = dim(rng);
    const int n = rep % 2 ? wide(rng) : dim(rng);
    Matrix a;
    if (rep % 3 == 0 && std::min(m, n) > 1) {
      const int r = 1 + static_cast<int>(rng() % static_cast<unsigned>(std::min(m, n) - 1));
      a = random_rank_deficient(rng, m, n, r);
      ++deficient;
    } else {
      a = random_matrix(rng, m, n);
    }
    const Matrix p = linalg::svd_pinv(a);
    const double na = fro(a), np = fro(p);
    const double e1 = fro(a * p * a - a) / na;
    const double e2 = fro(p * a * p - p) / np;
    const double e3 = fro((a * p).transpose() - a * p) / fro(a * p);
    const double e4 = fro((p * a).transpose() - p * a) / fro(p * a);
    worst = std::max({worst, e1, e2, e3, e4});
  }
  o.require(worst <= 1e-10, "Penrose conditions, 200 matrices up to 60x130 (" + std::to_string(deficient) +
                                " rank-deficient): worst relative residual " + num(worst, 3) + " <= 1e-10");

  double kron_worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index pd = 1 + static_cast<Eigen::Index>(rng() % 12);
    const Eigen::Index qd = 1 + static_cast<Eigen::Index>(rng() % 12);
    const Eigen::Index pr = rep % 2 ? pd : std::max<Eigen::Index>(1, pd - static_cast<Eigen::Index>(rng() % 3));
    const Eigen::Index qr = rep % 3 ? qd : std::max<Eigen::Index>(1, qd - static_cast<Eigen::Index>(rng() % 3));
    const Matrix pm = random_psd(rng, pd, pr);
    const Matrix qm = random_psd(rng, qd, qr);
    const Matrix c = random_matrix(rng, qd, pd);
    // Dense (P kron Q), column-major vec.
    Matrix big(pd * qd, pd * qd);
    for (Eigen::Index i = 0; i < pd; ++i)
      for (Eigen::Index j = 0; j < pd; ++j) big.block(i * qd, j * qd, qd, qd) = pm(i, j) * qm;
    const Vector vc = Eigen::Map<const Vector>(c.data(), c.size());
    const Vector vb = cod_pinv(big, 1e-10) * vc;
    const Matrix oracle = Eigen::Map<const Matrix>(vb.data(), qd, pd);
    const Matrix got = linalg::kron_min_norm_solve(pm, qm, c);
    kron_worst = std::max(kron_worst, rel_diff(got, oracle));
  }
  o.require(kron_worst <= 1e-8, "Kronecker solve vs materialized pseudo-inverse, 100 cases p, q <= 12: worst " +
                                    num(kron_worst, 3) + " <= 1e-8");
  const double secs = seconds_since(t0);
  o.require(secs < 30.0, "runtime " + num(secs, 3) + " s < 30 s");
  return o;
}

outcome interpolation_regime() {
  outcome o;
  std::mt19937_64 rng(77);
  double worst_resid = 0.0, worst_ols = 0.0;
  int interp = 0, ols = 0, skipped = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const int m = 5 + static_cast<int>(rng() % 36);
    const int k = 2 + static_cast<int>(rng() % static_cast<unsigned>(2 * m));
    const basis::basis_spec spec(basis::family::natural_cubic_spline, k, {0.0, 1.0});
    const auto t = stratified_times(rng, m);
    const Vector x = random_vector(rng, m) * 5.0;
    const longitudinal_sample sample(t, std::vector<double>(x.data(), x.data() + m));
    const Matrix phi = basis::design_matrix(spec, t);
    const auto w = fit_coefficients(sample, spec);
    if (k >= m) {
      Eigen::FullPivLU<Matrix> lu(phi);
      lu.setThreshold(1e-10);
      if (lu.rank() != m) {
        ++skipped;
        continue;
      }
      ++interp;
      worst_resid = std::max(worst_resid, (x - phi * w.coefficients()).norm() / x.norm());
    }
    if (k <= m) {
      Eigen::JacobiSVD<Matrix> sv(phi);
      const double cond = sv.singularValues()(0) / sv.singularValues()(k - 1);
      if (!(cond < 1e4)) {
        ++skipped;
        continue;
      }
      ++ols;
      const Vector oracle = phi.householderQr().solve(x);
      worst_ols = std::max(worst_ols, rel_diff(w.coefficients(), oracle));
    }
  }
  o.require(interp >= 50, std::to_string(interp) + " full-row-rank cases with K >= M");
  o.require(worst_resid <= 1e-6, "interpolation residual / ||x||: worst " + num(worst_resid, 3) + " <= 1e-6");
  o.require(ols >= 50, std::to_string(ols) + " cases with K <= M");
  o.require(worst_ols <= 1e-8, "coefficients vs Householder-QR least squares: worst " + num(worst_ols, 3) + " <= 1e-8");
  o.note(std::to_string(skipped) + " draws skipped as rank-deficient or with condition number >= 1e4");
  return o;
}

outcome fonf_identity() {
  outcome o;
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 3 + static_cast<int>(rng() % 13);
    const int k1 = 2 + static_cast<int>(rng() % 14);
    const int k2 = 2 + static_cast<int>(rng() % 14);
    const Matrix z = rep % 4 == 0 ? random_rank_deficient(rng, n, k1, std::max(1, std::min(n, k1) - 1))
                                  : random_matrix(rng, n, k1);
    const Matrix v = random_matrix(rng, n, k2);
    const auto psi = basis::make_gram(basis::basis_spec(basis::family::natural_cubic_spline, k2, {0.0, 1.0}));
    const Matrix ztz = z.transpose() * z;
    const Matrix oracle = cod_pinv(ztz, 1e-10) * z.transpose() * v;
    const Matrix got = regression::fonf_fit(z, v, psi);
    worst = std::max(worst, rel_diff(got, oracle));
  }
  o.require(worst <= 1e-8, "50 instances with full-rank response Gram: worst relative difference " + num(worst, 3) +
                               " <= 1e-8");
  return o;
}

outcome curve_fitting_demo() {
  outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  int good = 0;
  std::vector<int> peaks;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto cfg = ex::default_sweep(scenario::fig1_demo);
    cfg.replicates = 1;
    cfg.seed = seed;
    cfg.threads = g_threads;
    const auto curve = median_curve(ex::run_sweep(cfg));
    const auto [pk, pv] = peak_of(curve);
    peaks.push_back(pk);
    if (std::abs(pk - 15) <= 1 && curve.at(120) < pv / 5.0) ++good;
  }
  std::string list;
  for (int p : peaks) list += (list.empty() ? "" : " ") + std::to_string(p);
  o.require(good >= 18, std::to_string(good) + "/20 seeds peak at K = 15 +- 1 with MSE(120) < peak / 5 (need >= 18)");
  o.note("peak K per seed: " + list);
  const double secs = seconds_since(t0);
  o.require(secs < 60.0, "runtime " + num(secs, 3) + " s < 60 s");
  return o;
}

outcome scenario_a_double_descent() {
  outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = scenario_sweep(scenario::a, 20);
  cfg.methods.clear();
  const auto curve = median_curve(ex::run_sweep(cfg));
  const auto [pk, pv] = peak_of(curve);
  o.require(pk >= 8 && pk <= 12, "median MSE peaks at K = " + std::to_string(pk) + " (need 8..12)");
  o.require(curve.at(50) < 0.5 * pv, "median MSE(50) = " + num(curve.at(50)) + " < 0.5 x peak " + num(pv));
  const double secs = seconds_since(t0);
  o.require(secs < 300.0, "runtime " + num(secs, 3) + " s < 300 s");
  return o;
}

outcome scenario_a_method_ordering() {
  outcome o;
  for (int n : {5, 10}) {
    auto cfg = scenario_sweep(scenario::a, 50);
    cfg.scenario.n_train = n;
    cfg.k_grid = {4};  // only the selection runs matter here
    const auto r = ex::run_sweep(cfg);
    const auto means = method_means(r);
    const double cv = means.at(method::cv), fx = means.at(method::fixed), ca = means.at(method::caic);
    o.require(cv <= fx && fx <= ca, "N = " + std::to_string(n) + ": mean MSE CV " + num(cv) + " <= Fixed " + num(fx) +
                                        " <= cAIC " + num(ca));
    int below = 0, total = 0;
    for (const auto& m : r.methods)
      if (m.kind == method::caic) {
        ++total;
        below += m.chosen_k < n;
      }
    o.require(total == 50 && below == total,
              "N = " + std::to_string(n) + ": cAIC-chosen K < N in " + std::to_string(below) + "/" + std::to_string(total));
  }
  return o;
}

outcome scenario_b_plateau() {
  outcome o;
  auto cfg = scenario_sweep(scenario::b, 50);
  cfg.methods.clear();
  const auto curve = median_curve(ex::run_sweep(cfg));
  double lo = INFINITY, hi = 0.0;
  for (const auto& [k, v] : curve)
    if (k >= 20) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double spread = (hi - lo) / lo;
  o.require(spread <= 0.15, "median MSE over K >= 20 varies " + num(100 * spread, 3) + "% (need <= 15%)");
  const int m = cfg.scenario.m1;
  double after = INFINITY;
  for (const auto& [k, v] : curve)
    if (k > m) after = std::min(after, v);
  o.require(after >= 0.85 * curve.at(m), "no secondary descent: min median for K > M is " + num(after) +
                                             ", median at K = M is " + num(curve.at(m)));
  return o;
}

outcome scenario_c_response_basis() {
  outcome o;
  const auto cfg = scenario_sweep(scenario::c, 50);
  const auto r = ex::run_sweep(cfg);
  const auto means = method_means(r);
  const double cv = means.at(method::cv), ca = means.at(method::caic);
  o.require(ca >= 10.0 * cv, "mean MSE cAIC " + num(ca) + " >= 10 x CV " + num(cv));
  const auto curve = median_curve(r);
  const auto [pk, pv] = peak_of(curve);
  const int n = cfg.scenario.n_train;
  o.require(std::abs(pk - n) <= 2, "median MSE peaks at K2 = " + std::to_string(pk) + " (need N +- 2 = " +
                                       std::to_string(n - 2) + ".." + std::to_string(n + 2) + ")");
  o.note("fixed mean MSE " + num(means.at(method::fixed)) + ", peak median " + num(pv));
  return o;
}

outcome scenario_d_double_descent() {
  outcome o;
  auto cfg = scenario_sweep(scenario::d, 50);
  cfg.methods.clear();
  const auto curve = median_curve(ex::run_sweep(cfg));
  const auto [pk, pv] = peak_of(curve);
  const int n = cfg.scenario.n_train;
  o.require(std::abs(pk - n) <= 2, "median MSE peaks at K1 = " + std::to_string(pk) + " (need N +- 2)");
  const double tail = curve.rbegin()->second;
  o.require(tail < pv, "decreases after the peak: median at K1 = " + std::to_string(curve.rbegin()->first) + " is " +
                           num(tail) + " < peak " + num(pv));
  return o;
}

outcome model_selection_suite() {
  outcome o;
  std::mt19937_64 rng(5);
  bool partition_ok = true, deterministic = true;
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t folds = 2 + rng() % 9;
    const std::size_t n = folds + rng() % 60;
    const std::uint64_t seed = rng();
    const auto split = selection::kfold_split(n, folds, seed);
    std::vector<int> seen(n, 0);
    for (const auto& f : split) {
      partition_ok &= f.size() == n / folds || f.size() == n / folds + 1;
      for (auto i : f) partition_ok &= i < n && ++seen[i] == 1;
    }
    partition_ok &= split.size() == folds && std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
    deterministic &= selection::kfold_split(n, folds, seed) == split;
  }
  bool rejects = false;
  try {
    (void)selection::kfold_split(3, 5, 1);
  } catch (const invalid_input&) {
    rejects = true;
  }
  o.require(partition_ok, "k-fold splits are partitions with fold sizes floor/ceil(n / folds), 300 draws");
  o.require(deterministic, "k-fold splits are deterministic per seed");
  o.require(rejects, "n < folds is rejected");

  bool monotone = true;
  for (std::size_t n : {10u, 25u, 200u})
    for (double rss : {0.01, 1.0, 1e4}) {
      double prev = -INFINITY;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const auto s = selection::caic_score(rss, n, k);
        if (!s) {
          monotone &= n - k - 1 == 0;
          continue;
        }
        monotone &= *s > prev;
        prev = *s;
      }
    }
  o.require(monotone, "cAIC strictly increases in the parameter count at fixed RSS");

  bool bound = true;
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = 3 + rng() % 30;
    std::vector<selection::caic_candidate> cands;
    double rss = 1e3;
    for (int k = 1; k <= 50; ++k) {
      rss *= std::uniform_real_distribution<double>(0.01, 1.0)(rng);  // falls fast, tempting large K
      cands.push_back({k, rss, static_cast<std::size_t>(k), n});
    }
    try {
      const auto sel = selection::caic_select(cands);
      bound &= static_cast<std::size_t>(sel.chosen_k) + 1 < n;
    } catch (const no_viable_candidate&) {
      bound &= n <= 2;
    }
  }
  std::vector<selection::caic_candidate> grid;
  for (int k = 4; k <= 50; ++k) grid.push_back({k, std::pow(0.001, k), static_cast<std::size_t>(k), 10});
  bound &= selection::caic_select(grid).chosen_k <= 8;
  o.require(bound, "no K with N - K - 1 <= 0 is ever chosen (500 adversarial draws; grid 4..50 with n = 10 picks <= 8)");
  return o;
}

outcome determinism() {
  outcome o;
  const auto root = std::filesystem::temp_directory_path() / ("fdadd-acceptance-" + std::to_string(::getpid()));
  for (auto s : {scenario::a, scenario::b, scenario::c, scenario::d, scenario::fig1_demo}) {
    auto cfg = ex::default_sweep(s);
    cfg.replicates = 4;
    if (s == scenario::fig1_demo) {
      cfg.k_grid = {4, 10, 15, 16, 40, 120};
    } else {
      cfg.k_grid = {4, 8, 10, 12, 30, 50};
    }
    std::string bytes[2];
    int slot = 0;
    for (int threads : {1, 4}) {
      cfg.threads = threads;
      const auto dir = root / (std::string(datagen::scenario_name(s)) + "-" + std::to_string(threads));
      const auto r = ex::run_sweep(cfg);
      ex::emit_outputs(r, ex::summarize(r), dir);
      std::ifstream in(dir / "records.csv", std::ios::binary);
      bytes[slot++] = std::string(std::istreambuf_iterator<char>(in), {});
    }
    o.require(!bytes[0].empty() && bytes[0] == bytes[1],
              std::string("scenario ") + std::string(datagen::scenario_name(s)) +
                  ": records.csv byte-identical with 1 and 4 threads");
  }
  std::filesystem::remove_all(root);
  return o;
}

outcome real_data_loaders() {
  outcome o;
  const auto toy = ex::load_sonf_csv(g_fixtures / "toy_x.csv", g_fixtures / "toy_y.csv");
  o.require(toy.x.size() == 2 && toy.times.size() == 3 && toy.dropped == 0, "2x3 toy fixture gives N = 2, M = 3");
  const auto na = ex::load_sonf_csv(g_fixtures / "na_x.csv", g_fixtures / "na_y.csv");
  o.require(na.x.size() == 2 && na.dropped == 2 && na.warnings.size() == 2,
            "rows with NA in x or y are dropped with a warning (2 of 4)");

  // Gasoline-shaped fixture: 60 rows, 401 wavelengths.
  const auto dir = std::filesystem::temp_directory_path() / ("fdadd-gasoline-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  ex::loaded_data g;
  std::mt19937_64 rng(60);
  std::normal_distribution<double> z;
  for (int j = 0; j < 401; ++j) g.times.push_back(900 + 2 * j);
  for (int i = 0; i < 60; ++i) {
    std::vector<double> row;
    for (int j = 0; j < 401; ++j) row.push_back(0.5 + 0.01 * z(rng));
    g.x.push_back(row);
    g.y.push_back(85 + z(rng));
  }
  ex::write_sonf_csv(g, dir / "x.csv", dir / "y.csv");
  const auto back = ex::load_sonf_csv(dir / "x.csv", dir / "y.csv");
  o.require(back.x.size() == 60 && back.times.size() == 401 && back.x == g.x && back.y == g.y,
            "60 x 401 spectra-shaped fixture parses and round-trips exactly");
  std::filesystem::remove_all(dir);

  struct real_set {
    const char* name;
    const char* x_env;
    const char* y_env;
    int train;
  };
  for (const auto& set : {real_set{"gasoline", "FDADD_GASOLINE_X", "FDADD_GASOLINE_Y", 10},
                          real_set{"DTI", "FDADD_DTI_X", "FDADD_DTI_Y", 20}}) {
    const char* xp = std::getenv(set.x_env);
    const char* yp = std::getenv(set.y_env);
    if (!xp || !yp) {
      o.note(std::string(set.name) + " data not supplied (" + set.x_env + ", " + set.y_env + "): skipped");
      continue;
    }
    auto cfg = ex::default_sweep(scenario::a);
    cfg.dataset = ex::dataset_source{xp, yp, set.train};
    cfg.methods.clear();
    cfg.replicates = 20;
    cfg.threads = g_threads;
    const auto [pk, pv] = peak_of(median_curve(ex::run_sweep(cfg)));
    o.require(std::abs(pk - set.train) <= 2, std::string(set.name) + ": median MSE peaks at K = " +
                                                 std::to_string(pk) + " (need " + std::to_string(set.train) + " +- 2)");
  }
  return o;
}

struct criterion {
  int id;
  const char* title;
  std::function<outcome()> run;
};

std::set<int> parse_ids(const std::string& s) {
  std::set<int> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ','))
    if (!tok.empty()) out.insert(std::stoi(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string only, expect_fail;
  g_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  g_fixtures = FDADD_FIXTURE_DIR;
  app.add_option("--only", only, "Comma-separated criterion numbers to run");
  app.add_option("--expect-fail", expect_fail, "Criteria known to fail; reported but not fatal");
  app.add_option("--threads", g_threads, "Worker threads for sweeps");
  app.add_option("--fixtures", g_fixtures, "Directory with CSV fixtures");
  CLI11_PARSE(app, argc, argv);
  const auto selected = parse_ids(only);
  const auto tolerated = parse_ids(expect_fail);

  const std::vector<criterion> all{
      {1, "linear-algebra oracles", linear_algebra_oracles},
      {2, "interpolation and least-squares regimes", interpolation_regime},
      {3, "function-on-function algebraic identity", fonf_identity},
      {4, "single-curve double descent", curve_fitting_demo},
      {5, "scenario A double descent", scenario_a_double_descent},
      {6, "scenario A selection-method ordering", scenario_a_method_ordering},
      {7, "scenario B plateau", scenario_b_plateau},
      {8, "scenario C response-basis effects", scenario_c_response_basis},
      {9, "scenario D double descent", scenario_d_double_descent},
      {10, "model-selection properties", model_selection_suite},
      {11, "determinism across thread counts", determinism},
      {12, "real-data loaders", real_data_loaders},
  };

  int unexpected = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("threw: ") + e.what());
    }
    const bool known = tolerated.count(c.id) > 0;
    if (!o.pass && !known) ++unexpected;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << c.id << "  " << c.title << "  ("
              << num(seconds_since(t0), 3) << " s)" << (!o.pass && known ? "  [known failure, see notes]" : "")
              << (o.pass && known ? "  [listed as known failure but passed]" : "") << '\n';
    for (const auto& n : o.notes) std::cout << "          " << n << '\n';
    std::cout.flush();
  }
  return unexpected == 0 ? 0 : 1;
}
