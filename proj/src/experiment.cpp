#include <fdadd/experiment.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include <fdadd/error.hpp>

namespace fdadd::experiment {

namespace {

using json = nlohmann::json;
using linalg::Matrix;
using linalg::Vector;

constexpr std::uint64_t role_split = 101;
constexpr std::uint64_t role_folds = 102;
constexpr std::uint64_t role_demo_replicate = 103;

std::vector<int> range_grid(int lo, int hi) {
  std::vector<int> g;
  for (int k = lo; k <= hi; ++k) g.push_back(k);
  return g;
}

int family_minimum(basis::family f) { return f == basis::family::natural_cubic_spline ? 2 : 1; }

// Runs fn(i) for i in [0, n) on up to `threads` workers. If any call throws,
// the exception from the lowest index is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::size_t failure_index = n;
  std::exception_ptr failure;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (i < failure_index) {
          failure_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

// ---- configuration -------------------------------------------------------

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw config_error("config field '" + field + "': " + why);
}

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw config_error("unknown config key '" + where + key + "'");
  }
}

template <class T>
T get_as(const json& v, const std::string& field) {
  try {
    if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) bad_field(field, "expected an integer");
      const auto i = v.get<std::int64_t>();
      if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max())
        bad_field(field, "integer out of range");
      return static_cast<int>(i);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        bad_field(field, "expected a non-negative integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) bad_field(field, "expected a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) bad_field(field, "expected true or false");
      return v.get<bool>();
    } else {
      if (!v.is_string()) bad_field(field, "expected a string");
      return v.get<std::string>();
    }
  } catch (const json::exception& e) {
    bad_field(field, e.what());
  }
}

datagen::gp_params parse_gp(const json& v, const std::string& field, datagen::gp_params base) {
  if (!v.is_object()) bad_field(field, "expected an object with theta and h");
  reject_unknown(v, field + ".", {"theta", "h"});
  if (v.contains("theta")) base.theta = get_as<double>(v["theta"], field + ".theta");
  if (v.contains("h")) base.h = get_as<double>(v["h"], field + ".h");
  return base;
}

std::vector<int> parse_grid(const json& v, const std::string& field) {
  if (v.is_array()) {
    std::vector<int> g;
    for (std::size_t i = 0; i < v.size(); ++i) g.push_back(get_as<int>(v[i], field + "[" + std::to_string(i) + "]"));
    return g;
  }
  if (v.is_object()) {
    reject_unknown(v, field + ".", {"min", "max"});
    if (!v.contains("min") || !v.contains("max")) bad_field(field, "needs both min and max");
    const int lo = get_as<int>(v["min"], field + ".min");
    const int hi = get_as<int>(v["max"], field + ".max");
    if (lo > hi) bad_field(field, "min exceeds max");
    return range_grid(lo, hi);
  }
  bad_field(field, "expected an array of integers or {\"min\": a, \"max\": b}");
}

void check_grid(const std::vector<int>& g, const std::string& field, int minimum) {
  if (g.empty()) bad_field(field, "must not be empty");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] < minimum) bad_field(field, "K = " + std::to_string(g[i]) + " is below the basis minimum " + std::to_string(minimum));
    if (i > 0 && g[i] <= g[i - 1]) bad_field(field, "must be strictly increasing");
  }
}

bool is_demo(const sweep_config& cfg) { return cfg.scenario.kind == datagen::scenario::fig1_demo; }

datagen::demo_config demo_of(const sweep_config& cfg) {
  datagen::demo_config d;
  d.points = cfg.scenario.m1;
  d.gp = cfg.scenario.gp_x;
  d.noise_sd = cfg.scenario.noise_sd;
  d.latent_grid_size = cfg.scenario.latent_grid_size;
  d.domain = cfg.scenario.domain;
  return d;
}

// ---- sweep internals ------------------------------------------------------

std::vector<functional_datum> functionalize_all(const std::vector<const longitudinal_sample*>& samples,
                                                const basis::basis_spec& spec, std::optional<double> rcond) {
  return fit_coefficients(std::span<const longitudinal_sample* const>(samples), spec, rcond);
}

template <class Subject>
std::vector<const longitudinal_sample*> x_of(const std::vector<Subject>& subjects) {
  std::vector<const longitudinal_sample*> out;
  for (const auto& s : subjects) out.push_back(&s.x);
  return out;
}

std::vector<const longitudinal_sample*> y_of(const std::vector<datagen::curve_subject>& subjects) {
  std::vector<const longitudinal_sample*> out;
  for (const auto& s : subjects) out.push_back(&s.y);
  return out;
}

template <class T>
std::vector<T> pick_rows(const std::vector<T>& all, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

Matrix pick_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw numerical_error(what + " is not finite");
}

// Caches Gram matrices per (family, K, domain) for the lifetime of a sweep.
class gram_cache {
 public:
  gram_cache(basis::family f, basis::interval domain) : family_(f), domain_(domain) {}

  void prepare(const std::vector<int>& ks, int threads) {
    std::vector<int> todo;
    for (int k : ks)
      if (!grams_.count(k)) todo.push_back(k);
    std::vector<std::optional<basis::gram_matrix>> built(todo.size());
    parallel_for(todo.size(), threads, [&](std::size_t i) {
      built[i] = basis::make_gram(basis::basis_spec(family_, todo[i], domain_));
    });
    for (std::size_t i = 0; i < todo.size(); ++i) grams_.emplace(todo[i], std::move(*built[i]));
  }

  const basis::gram_matrix& at(int k) const { return grams_.at(k); }

 private:
  basis::family family_;
  basis::interval domain_;
  std::map<int, basis::gram_matrix> grams_;
};

struct cell_result {
  double mse = 0.0;
  double rss = 0.0;
  std::size_t n = 0;
  std::size_t k_params = 0;
};

struct replicate_data {
  std::optional<datagen::sonf_dataset> scalar;
  std::optional<datagen::fonf_dataset> curves;
  std::optional<datagen::demo_sample> demo;
};

std::vector<double> signals_of(const std::vector<datagen::scalar_subject>& s) {
  std::vector<double> out;
  for (const auto& x : s) out.push_back(x.signal);
  return out;
}

Vector responses_of(const std::vector<datagen::scalar_subject>& s) {
  Vector out(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) out(static_cast<Eigen::Index>(i)) = s[i].y;
  return out;
}

// Squared error of a predicted curve at the observation points of `target`.
double curve_sq_error(const functional_datum& pred, const std::vector<double>& times, const std::vector<double>& truth) {
  double s = 0.0;
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double e = evaluate(pred, times[j]) - truth[j];
    s += e * e;
  }
  return s;
}

struct sweep_plan {
  const sweep_config& cfg;
  basis::interval domain;
  int n_train = 0;
};

// Scalar-response cell.
cell_result sonf_cell(const sweep_plan& plan, const gram_cache& grams, const datagen::sonf_dataset& data, int k) {
  const auto& g = grams.at(k);
  const auto train = functionalize_all(x_of(data.train), g.spec(), plan.cfg.functionalize_rcond);
  const auto test = functionalize_all(x_of(data.test), g.spec(), plan.cfg.functionalize_rcond);
  const Matrix z = regression::sonf_design(train, g);
  const Vector y = responses_of(data.train);
  const regression::sonf_model model(g, regression::sonf_fit(z, y, plan.cfg.rcond));
  cell_result r;
  const auto sig = signals_of(data.test);
  r.mse = test_mse_sonf(model, test, sig);
  r.rss = (y - z * model.b_hat()).squaredNorm();
  r.n = data.train.size();
  r.k_params = static_cast<std::size_t>(k);
  return r;
}

// Function-response cell; `k` is K2 in scenario C and K1 in scenario D.
cell_result fonf_cell(const sweep_plan& plan, const gram_cache& grams, const datagen::fonf_dataset& data, int k) {
  const bool vary_response = plan.cfg.scenario.kind == datagen::scenario::c;
  const int kx = vary_response ? plan.cfg.other_k : k;
  const int ky = vary_response ? k : plan.cfg.other_k;
  const auto& gx = grams.at(kx);
  const auto& gy = grams.at(ky);
  const auto frc = plan.cfg.functionalize_rcond;

  const auto wx = functionalize_all(x_of(data.train), gx.spec(), frc);
  const auto wy = functionalize_all(y_of(data.train), gy.spec(), frc);
  const Matrix z = regression::sonf_design(wx, gx);
  const Matrix v = regression::coefficient_rows(wy, gy.spec());
  const regression::fonf_model model(gx, gy, regression::fonf_fit(z, v, gy, plan.cfg.rcond));
  const auto test_x = functionalize_all(x_of(data.test), gx.spec(), frc);

  cell_result r;
  r.mse = test_mse_fonf(model, test_x, data.test);
  if (vary_response) {
    // Functionalization residual of the responses, pooled over subjects.
    double rss = 0.0;
    std::size_t points = 0;
    for (std::size_t i = 0; i < data.train.size(); ++i) {
      rss += fit_residuals(wy[i], data.train[i].y).squaredNorm();
      points += data.train[i].y.size();
    }
    r.rss = rss;
    r.n = points;
    r.k_params = data.train.size() * static_cast<std::size_t>(ky);
  } else {
    const Matrix resid = v - z * model.b_hat();
    r.rss = (resid * gy.entries() * resid.transpose()).trace();
    r.n = data.train.size();
    r.k_params = static_cast<std::size_t>(kx);
  }
  return r;
}

cell_result demo_cell(const sweep_config& cfg, const datagen::demo_sample& d, int k) {
  const basis::basis_spec spec(cfg.basis_family, k, d.domain);
  const auto w = fit_coefficients(d.observed, spec, cfg.functionalize_rcond);
  double s = 0.0;
  for (std::size_t j = 0; j < d.grid.size(); ++j) {
    const double e = evaluate(w, d.grid[j]) - d.truth[j];
    s += e * e;
  }
  cell_result r;
  r.mse = s / static_cast<double>(d.grid.size());
  return r;
}

// Held-out loss on observed responses for one fold.
double sonf_fold_loss(const sweep_plan& plan, const gram_cache& grams, const datagen::sonf_dataset& data,
                      std::map<int, Matrix>& z_cache, std::span<const std::size_t> train,
                      std::span<const std::size_t> test, int k) {
  const auto& g = grams.at(k);
  auto it = z_cache.find(k);
  if (it == z_cache.end()) {
    const auto w = functionalize_all(x_of(data.train), g.spec(), plan.cfg.functionalize_rcond);
    it = z_cache.emplace(k, regression::sonf_design(w, g)).first;
  }
  const Matrix& z = it->second;
  const Vector y = responses_of(data.train);
  Vector ytr(static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) ytr(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(train[i]));
  const Vector b = regression::sonf_fit(pick_rows(z, train), ytr, plan.cfg.rcond);
  double s = 0.0;
  for (auto i : test) {
    const double e = z.row(static_cast<Eigen::Index>(i)).dot(b) - y(static_cast<Eigen::Index>(i));
    s += e * e;
  }
  return s / static_cast<double>(test.size());
}

struct fonf_fold_state {
  std::map<int, std::pair<std::vector<functional_datum>, Matrix>> x;  // coefficients and design
  std::map<int, std::vector<functional_datum>> y;
};

double fonf_fold_loss(const sweep_plan& plan, const gram_cache& grams, const datagen::fonf_dataset& data,
                      fonf_fold_state& cache, std::span<const std::size_t> train,
                      std::span<const std::size_t> test, int k) {
  const bool vary_response = plan.cfg.scenario.kind == datagen::scenario::c;
  const int kx = vary_response ? plan.cfg.other_k : k;
  const int ky = vary_response ? k : plan.cfg.other_k;
  const auto& gx = grams.at(kx);
  const auto& gy = grams.at(ky);
  const auto frc = plan.cfg.functionalize_rcond;
  if (!cache.x.count(kx)) {
    auto w = functionalize_all(x_of(data.train), gx.spec(), frc);
    Matrix z = regression::sonf_design(w, gx);
    cache.x.emplace(kx, std::make_pair(std::move(w), std::move(z)));
  }
  if (!cache.y.count(ky)) cache.y.emplace(ky, functionalize_all(y_of(data.train), gy.spec(), frc));
  const auto& [wx, z] = cache.x.at(kx);
  const auto& wy = cache.y.at(ky);

  const Matrix v = regression::coefficient_rows(pick_rows(wy, train), gy.spec());
  const regression::fonf_model model(gx, gy, regression::fonf_fit(pick_rows(z, train), v, gy, plan.cfg.rcond));
  double s = 0.0;
  std::size_t points = 0;
  for (auto i : test) {
    const auto pred = regression::fonf_predict(model, wx[i]);
    s += curve_sq_error(pred, data.train[i].y.times(), data.train[i].y.values());
    points += data.train[i].y.size();
  }
  return s / static_cast<double>(points);
}

std::vector<int> union_grid(const sweep_config& cfg) {
  std::vector<int> all = cfg.k_grid;
  if (!is_demo(cfg)) {
    for (auto m : cfg.methods) {
      if (m == selection::method::fixed) all.push_back(cfg.fixed_k);
      else all.insert(all.end(), cfg.selection_grid.begin(), cfg.selection_grid.end());
    }
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

}  // namespace

// ---- configuration API -----------------------------------------------------

sweep_config default_sweep(datagen::scenario s) {
  sweep_config cfg;
  cfg.scenario = datagen::default_config(s);
  if (s == datagen::scenario::fig1_demo) {
    cfg.basis_family = basis::family::fourier;
    cfg.k_grid = range_grid(4, 120);
    cfg.methods.clear();
    cfg.replicates = 20;
  } else {
    cfg.k_grid = range_grid(4, 50);
  }
  cfg.selection_grid = range_grid(family_minimum(cfg.basis_family), cfg.k_grid.back());
  return cfg;
}

sweep_config parse_sweep_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw config_error("config must be a JSON object");
  reject_unknown(doc, "", {"scenario", "n_train", "n_test", "m", "m2", "gp_x", "gp_beta", "noise_sd",
                           "latent_grid_size", "beta_t_grid_size", "domain", "centering",
                           "shared_observation_times", "shared_response_times", "beta_smooth_in_t", "basis", "k_grid", "selection_grid", "methods",
                           "fixed_k", "other_k", "folds", "replicates", "seed", "threads", "rcond",
                           "functionalize_rcond", "output_dir", "dataset"});

  const auto kind = doc.contains("scenario")
                        ? datagen::parse_scenario(get_as<std::string>(doc["scenario"], "scenario"))
                        : datagen::scenario::a;
  sweep_config cfg = default_sweep(kind);
  auto& sc = cfg.scenario;
  bool selection_given = false;

  if (doc.contains("n_train")) sc.n_train = get_as<int>(doc["n_train"], "n_train");
  if (doc.contains("n_test")) sc.n_test = get_as<int>(doc["n_test"], "n_test");
  if (doc.contains("m")) sc.m1 = get_as<int>(doc["m"], "m");
  if (doc.contains("m2")) sc.m2 = get_as<int>(doc["m2"], "m2");
  if (doc.contains("gp_x")) sc.gp_x = parse_gp(doc["gp_x"], "gp_x", sc.gp_x);
  if (doc.contains("gp_beta")) sc.gp_beta = parse_gp(doc["gp_beta"], "gp_beta", sc.gp_beta);
  if (doc.contains("noise_sd")) sc.noise_sd = get_as<double>(doc["noise_sd"], "noise_sd");
  if (doc.contains("latent_grid_size")) sc.latent_grid_size = get_as<int>(doc["latent_grid_size"], "latent_grid_size");
  if (doc.contains("beta_t_grid_size")) sc.beta_t_grid_size = get_as<int>(doc["beta_t_grid_size"], "beta_t_grid_size");
  if (doc.contains("domain")) {
    const auto& d = doc["domain"];
    if (!d.is_array() || d.size() != 2) bad_field("domain", "expected [lo, hi]");
    sc.domain = {get_as<double>(d[0], "domain[0]"), get_as<double>(d[1], "domain[1]")};
  }
  if (doc.contains("centering")) sc.center = datagen::parse_centering(get_as<std::string>(doc["centering"], "centering"));
  if (doc.contains("shared_observation_times"))
    sc.shared_observation_times = get_as<bool>(doc["shared_observation_times"], "shared_observation_times");
  if (doc.contains("shared_response_times"))
    sc.shared_response_times = get_as<bool>(doc["shared_response_times"], "shared_response_times");
  if (doc.contains("beta_smooth_in_t")) sc.beta_smooth_in_t = get_as<bool>(doc["beta_smooth_in_t"], "beta_smooth_in_t");
  if (doc.contains("basis")) {
    try {
      cfg.basis_family = basis::parse_family(get_as<std::string>(doc["basis"], "basis"));
    } catch (const invalid_spec& e) {
      bad_field("basis", e.what());
    }
  }
  if (doc.contains("k_grid")) cfg.k_grid = parse_grid(doc["k_grid"], "k_grid");
  if (doc.contains("selection_grid")) {
    cfg.selection_grid = parse_grid(doc["selection_grid"], "selection_grid");
    selection_given = true;
  }
  if (doc.contains("methods")) {
    const auto& m = doc["methods"];
    if (!m.is_array()) bad_field("methods", "expected an array of method names");
    cfg.methods.clear();
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto name = get_as<std::string>(m[i], "methods[" + std::to_string(i) + "]");
      const auto parsed = selection::parse_method(name);
      if (std::find(cfg.methods.begin(), cfg.methods.end(), parsed) != cfg.methods.end())
        bad_field("methods", "duplicate method '" + name + "'");
      cfg.methods.push_back(parsed);
    }
  }
  if (doc.contains("fixed_k")) cfg.fixed_k = get_as<int>(doc["fixed_k"], "fixed_k");
  if (doc.contains("other_k")) cfg.other_k = get_as<int>(doc["other_k"], "other_k");
  if (doc.contains("folds")) cfg.folds = get_as<int>(doc["folds"], "folds");
  if (doc.contains("replicates")) cfg.replicates = get_as<int>(doc["replicates"], "replicates");
  if (doc.contains("seed")) cfg.seed = get_as<std::uint64_t>(doc["seed"], "seed");
  if (doc.contains("threads")) cfg.threads = get_as<int>(doc["threads"], "threads");
  if (doc.contains("rcond")) cfg.rcond = get_as<double>(doc["rcond"], "rcond");
  if (doc.contains("functionalize_rcond"))
    cfg.functionalize_rcond = get_as<double>(doc["functionalize_rcond"], "functionalize_rcond");
  if (doc.contains("output_dir")) cfg.output_dir = get_as<std::string>(doc["output_dir"], "output_dir");
  if (doc.contains("dataset")) {
    const auto& d = doc["dataset"];
    if (!d.is_object()) bad_field("dataset", "expected an object with x, y and train_size");
    reject_unknown(d, "dataset.", {"x", "y", "train_size"});
    if (!d.contains("x") || !d.contains("y")) bad_field("dataset", "needs both x and y paths");
    dataset_source src;
    src.x_path = get_as<std::string>(d["x"], "dataset.x");
    src.y_path = get_as<std::string>(d["y"], "dataset.y");
    if (d.contains("train_size")) src.train_size = get_as<int>(d["train_size"], "dataset.train_size");
    cfg.dataset = src;
  }
  if (!selection_given && !cfg.k_grid.empty())
    cfg.selection_grid = range_grid(family_minimum(cfg.basis_family), std::max(family_minimum(cfg.basis_family), cfg.k_grid.back()));
  validate(cfg);
  return cfg;
}

sweep_config load_sweep_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_sweep_config(buf.str());
  } catch (const config_error& e) {
    throw config_error(path.string() + ": " + e.what());
  }
}

void validate(const sweep_config& cfg) {
  const int kmin = family_minimum(cfg.basis_family);
  check_grid(cfg.k_grid, "k_grid", kmin);
  if (cfg.replicates < 1) bad_field("replicates", "must be at least 1");
  if (cfg.threads < 1) bad_field("threads", "must be at least 1");
  if (cfg.rcond && !(*cfg.rcond >= 0.0 && *cfg.rcond < 1.0)) bad_field("rcond", "must lie in [0, 1)");
  if (cfg.functionalize_rcond && !(*cfg.functionalize_rcond >= 0.0 && *cfg.functionalize_rcond < 1.0))
    bad_field("functionalize_rcond", "must lie in [0, 1)");
  if (is_demo(cfg)) {
    if (cfg.dataset) bad_field("dataset", "not used by the curve-fitting demo");
    const auto d = demo_of(cfg);
    if (d.points < 1 || d.points > d.latent_grid_size) bad_field("m", "demo points must lie in [1, latent_grid_size]");
    if (!(d.domain.lo < d.domain.hi)) bad_field("domain", "must have lo < hi");
    if (!(d.noise_sd >= 0.0)) bad_field("noise_sd", "must be non-negative");
    return;
  }
  const bool needs_selection = std::any_of(cfg.methods.begin(), cfg.methods.end(),
                                           [](auto m) { return m != selection::method::fixed; });
  if (needs_selection) check_grid(cfg.selection_grid, "selection_grid", kmin);
  if (cfg.fixed_k < kmin) bad_field("fixed_k", "below the basis minimum");
  if (cfg.other_k < kmin) bad_field("other_k", "below the basis minimum");
  if (cfg.folds < 2) bad_field("folds", "must be at least 2");
  if (cfg.dataset) {
    if (datagen::has_function_response(cfg.scenario.kind))
      bad_field("dataset", "real-data sweeps support scalar responses only");
    if (cfg.dataset->train_size < 1) bad_field("dataset.train_size", "must be at least 1");
    if (std::find(cfg.methods.begin(), cfg.methods.end(), selection::method::cv) != cfg.methods.end() &&
        cfg.dataset->train_size < cfg.folds)
      bad_field("dataset.train_size", "smaller than the number of folds");
    return;
  }
  datagen::validate(cfg.scenario);
  if (std::find(cfg.methods.begin(), cfg.methods.end(), selection::method::cv) != cfg.methods.end() &&
      cfg.scenario.n_train < cfg.folds)
    bad_field("n_train", "smaller than the number of folds");
}

// ---- metrics ---------------------------------------------------------------

double test_mse_sonf(const regression::sonf_model& model, std::span<const functional_datum> x,
                     std::span<const double> signal) {
  if (x.empty()) throw invalid_input("empty test set");
  if (x.size() != signal.size()) throw invalid_input("test predictors and signals differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = regression::sonf_predict(model, x[i]) - signal[i];
    s += e * e;
  }
  const double mse = s / static_cast<double>(x.size());
  require_finite(mse, "test MSE");
  return mse;
}

double test_mse_fonf(const regression::fonf_model& model, std::span<const functional_datum> x,
                     std::span<const datagen::curve_subject> subjects) {
  if (x.empty()) throw invalid_input("empty test set");
  if (x.size() != subjects.size()) throw invalid_input("test predictors and responses differ in length");
  double s = 0.0;
  std::size_t points = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto pred = regression::fonf_predict(model, x[i]);
    s += curve_sq_error(pred, subjects[i].y.times(), subjects[i].signal);
    points += subjects[i].signal.size();
  }
  if (points == 0) throw invalid_input("test responses have no observation points");
  const double mse = s / static_cast<double>(points);
  require_finite(mse, "test MSE");
  return mse;
}

// ---- sweep -----------------------------------------------------------------

sweep_result run_sweep(const sweep_config& cfg) {
  validate(cfg);
  const auto reps = static_cast<std::size_t>(cfg.replicates);
  sweep_result result;

  std::optional<loaded_data> real;
  if (cfg.dataset) {
    real = load_sonf_csv(cfg.dataset->x_path, cfg.dataset->y_path);
    if (real->dropped > 0)
      result.warnings.push_back("dropped " + std::to_string(real->dropped) + " rows with missing values");
    if (cfg.dataset->train_size >= static_cast<int>(real->y.size()))
      throw config_error("dataset.train_size " + std::to_string(cfg.dataset->train_size) +
                         " leaves no test rows out of " + std::to_string(real->y.size()));
  }

  const bool demo = is_demo(cfg);
  const bool curves = !demo && !real && datagen::has_function_response(cfg.scenario.kind);
  const basis::interval domain =
      real ? basis::interval{real->times.front(), real->times.back()} : cfg.scenario.domain;
  if (real && !(domain.lo < domain.hi)) throw data_error("observation times must span a non-empty interval");
  const sweep_plan plan{cfg, domain, real ? cfg.dataset->train_size : cfg.scenario.n_train};

  // Replicate datasets.
  std::vector<replicate_data> data(reps);
  std::optional<datagen::generator> gen;
  if (!demo && !real) gen.emplace(cfg.scenario);
  parallel_for(reps, cfg.threads, [&](std::size_t r) {
    if (demo) {
      data[r].demo = datagen::gen_fig1_demo(demo_of(cfg), datagen::stream_seed(cfg.seed, r, role_demo_replicate, 0));
    } else if (real) {
      data[r].scalar = split_dataset(*real, cfg.dataset->train_size, datagen::stream_seed(cfg.seed, r, role_split, 0));
    } else if (curves) {
      data[r].curves = gen->function_response(cfg.seed, r);
    } else {
      data[r].scalar = gen->scalar_response(cfg.seed, r);
    }
  });

  // Per-(replicate, K) fits.
  const auto ks = union_grid(cfg);
  gram_cache grams(cfg.basis_family, domain);
  if (!demo) {
    auto need = ks;
    if (curves) need.push_back(cfg.other_k);
    grams.prepare(need, cfg.threads);
  }
  std::vector<cell_result> cells(reps * ks.size());
  parallel_for(cells.size(), cfg.threads, [&](std::size_t c) {
    const std::size_t r = c / ks.size();
    const int k = ks[c % ks.size()];
    if (demo) cells[c] = demo_cell(cfg, *data[r].demo, k);
    else if (curves) cells[c] = fonf_cell(plan, grams, *data[r].curves, k);
    else cells[c] = sonf_cell(plan, grams, *data[r].scalar, k);
  });
  auto cell_at = [&](std::size_t r, int k) -> const cell_result& {
    const auto pos = std::lower_bound(ks.begin(), ks.end(), k) - ks.begin();
    return cells[r * ks.size() + static_cast<std::size_t>(pos)];
  };

  for (std::size_t r = 0; r < reps; ++r)
    for (int k : cfg.k_grid) result.records.push_back({static_cast<int>(r), k, cell_at(r, k).mse});

  // Selection methods.
  if (!demo) {
    std::vector<std::vector<method_record>> per_rep(reps);
    std::vector<std::vector<std::string>> rep_warnings(reps);
    parallel_for(reps, cfg.threads, [&](std::size_t r) {
      for (auto m : cfg.methods) {
        try {
          selection::selection_result sel;
          if (m == selection::method::fixed) {
            sel.kind = m;
            sel.chosen_k = cfg.fixed_k;
          } else if (m == selection::method::caic) {
            std::vector<selection::caic_candidate> cands;
            for (int k : cfg.selection_grid) {
              const auto& c = cell_at(r, k);
              cands.push_back({k, c.rss, c.k_params, c.n});
            }
            sel = selection::caic_select(cands);
          } else {
            const auto folds = selection::kfold_split(static_cast<std::size_t>(plan.n_train),
                                                      static_cast<std::size_t>(cfg.folds),
                                                      datagen::stream_seed(cfg.seed, r, role_folds, 0));
            if (curves) {
              fonf_fold_state cache;
              sel = selection::cv_select(
                  cfg.selection_grid,
                  [&](auto train, auto test, int k) { return fonf_fold_loss(plan, grams, *data[r].curves, cache, train, test, k); },
                  folds);
            } else {
              std::map<int, Matrix> cache;
              sel = selection::cv_select(
                  cfg.selection_grid,
                  [&](auto train, auto test, int k) { return sonf_fold_loss(plan, grams, *data[r].scalar, cache, train, test, k); },
                  folds);
            }
          }
          per_rep[r].push_back({static_cast<int>(r), m, sel.chosen_k, cell_at(r, sel.chosen_k).mse});
        } catch (const no_viable_candidate& e) {
          rep_warnings[r].push_back("replicate " + std::to_string(r) + ": " + e.what());
        }
      }
    });
    for (std::size_t r = 0; r < reps; ++r) {
      auto& rows = per_rep[r];
      std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.kind < b.kind; });
      result.methods.insert(result.methods.end(), rows.begin(), rows.end());
      result.warnings.insert(result.warnings.end(), rep_warnings[r].begin(), rep_warnings[r].end());
    }
  }

  if (demo) {
    result.marker_k = cfg.scenario.m1;
    result.marker_label = "K = M";
  } else if (cfg.scenario.kind == datagen::scenario::b && !real) {
    result.marker_k = cfg.scenario.m1;
    result.marker_label = "K = M";
  } else if (cfg.scenario.kind == datagen::scenario::c) {
    result.marker_k = cfg.scenario.n_train;
    result.marker_label = "K2 = N";
  } else {
    result.marker_k = plan.n_train;
    result.marker_label = "K = N";
  }
  return result;
}

// ---- CSV loading -----------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    else if (ch == ',' && !quoted) {
      cells.push_back(trim(cell));
      cell.clear();
    } else cell.push_back(ch);
  }
  cells.push_back(trim(cell));
  return cells;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "N/A";
}

std::optional<double> parse_number(const std::string& cell) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  // Drop trailing blank lines only.
  while (!out.empty() && trim(out.back()).empty()) out.pop_back();
  if (!out.empty() && out.front().rfind("\xEF\xBB\xBF", 0) == 0) out.front().erase(0, 3);
  return out;
}

}  // namespace

loaded_data parse_sonf_csv(const std::string& x_text, const std::string& y_text, const std::string& x_name,
                           const std::string& y_name) {
  const auto xl = lines_of(x_text);
  const auto yl = lines_of(y_text);
  if (xl.empty()) throw data_error(x_name + ": empty file");
  if (yl.empty()) throw data_error(y_name + ": empty file");

  loaded_data out;
  const auto header = split_csv_line(xl.front());
  for (std::size_t j = 0; j < header.size(); ++j) {
    const auto v = parse_number(header[j]);
    if (!v) throw data_error(x_name + ":1: header cell " + std::to_string(j + 1) + " ('" + header[j] + "') is not a number");
    out.times.push_back(*v);
  }
  for (std::size_t j = 1; j < out.times.size(); ++j)
    if (!(out.times[j] > out.times[j - 1])) throw data_error(x_name + ":1: observation times must be strictly increasing");

  const auto yheader = split_csv_line(yl.front());
  if (yheader.size() != 1) throw data_error(y_name + ":1: expected a single header cell");
  if (xl.size() != yl.size())
    throw data_error(x_name + " has " + std::to_string(xl.size() - 1) + " data rows but " + y_name + " has " +
                     std::to_string(yl.size() - 1));

  for (std::size_t i = 1; i < xl.size(); ++i) {
    const auto cells = split_csv_line(xl[i]);
    const std::string where = x_name + ":" + std::to_string(i + 1);
    if (cells.size() != out.times.size())
      throw data_error(where + ": expected " + std::to_string(out.times.size()) + " cells, found " + std::to_string(cells.size()));
    const auto ycells = split_csv_line(yl[i]);
    const std::string ywhere = y_name + ":" + std::to_string(i + 1);
    if (ycells.size() != 1) throw data_error(ywhere + ": expected 1 cell, found " + std::to_string(ycells.size()));

    bool missing = is_missing(ycells[0]);
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (is_missing(cells[j])) {
        missing = true;
        continue;
      }
      const auto v = parse_number(cells[j]);
      if (!v) throw data_error(where + ": cell " + std::to_string(j + 1) + " ('" + cells[j] + "') is not a number");
      row.push_back(*v);
    }
    std::optional<double> y;
    if (!is_missing(ycells[0])) {
      y = parse_number(ycells[0]);
      if (!y) throw data_error(ywhere + ": '" + ycells[0] + "' is not a number");
    }
    if (missing) {
      ++out.dropped;
      out.warnings.push_back("row " + std::to_string(i + 1) + " dropped: missing value");
      continue;
    }
    out.x.push_back(std::move(row));
    out.y.push_back(*y);
  }
  if (out.y.empty()) throw data_error(x_name + ": no complete data rows");
  return out;
}

loaded_data load_sonf_csv(const std::filesystem::path& x_path, const std::filesystem::path& y_path) {
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw io_error("cannot read " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  return parse_sonf_csv(slurp(x_path), slurp(y_path), x_path.string(), y_path.string());
}

datagen::sonf_dataset split_dataset(const loaded_data& data, int train_size, std::uint64_t seed) {
  const std::size_t n = data.y.size();
  if (train_size < 1 || static_cast<std::size_t>(train_size) >= n)
    throw config_error("train size " + std::to_string(train_size) + " must lie in [1, " + std::to_string(n - 1) + "]");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
  datagen::sonf_dataset out;
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = order[r];
    datagen::scalar_subject s{longitudinal_sample(data.times, data.x[i]), data.y[i], data.y[i]};
    (r < static_cast<std::size_t>(train_size) ? out.train : out.test).push_back(std::move(s));
  }
  return out;
}

void write_sonf_csv(const loaded_data& data, const std::filesystem::path& x_path, const std::filesystem::path& y_path) {
  std::ofstream x(x_path), y(y_path);
  if (!x) throw io_error("cannot write " + x_path.string());
  if (!y) throw io_error("cannot write " + y_path.string());
  for (std::size_t j = 0; j < data.times.size(); ++j) x << (j ? "," : "") << format_double(data.times[j]);
  x << "\n";
  y << "y\n";
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    for (std::size_t j = 0; j < data.x[i].size(); ++j) x << (j ? "," : "") << format_double(data.x[i][j]);
    x << "\n";
    y << format_double(data.y[i]) << "\n";
  }
  if (!x || !y) throw io_error("write failed for " + x_path.string() + " or " + y_path.string());
}

// ---- summaries and output ---------------------------------------------------

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw invalid_input("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

summary summarize(const sweep_result& result) {
  summary s;
  std::map<int, std::vector<double>> by_k;
  for (const auto& r : result.records) by_k[r.k].push_back(r.mse);
  for (const auto& [k, v] : by_k) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    s.curve.push_back({k, mean, quantile(v, 0.5), quantile(v, 0.25), quantile(v, 0.75)});
  }
  std::map<selection::method, std::pair<std::vector<double>, std::vector<double>>> by_method;
  for (const auto& m : result.methods) {
    by_method[m.kind].first.push_back(m.mse);
    by_method[m.kind].second.push_back(static_cast<double>(m.chosen_k));
  }
  for (const auto& [kind, pair] : by_method) {
    const auto& [mse, ks] = pair;
    method_row row;
    row.kind = kind;
    row.mean_mse = std::accumulate(mse.begin(), mse.end(), 0.0) / static_cast<double>(mse.size());
    row.chosen_k = {quantile(ks, 0.0), quantile(ks, 0.25), quantile(ks, 0.5), quantile(ks, 0.75), quantile(ks, 1.0)};
    s.methods.push_back(row);
  }
  return s;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw io_error("cannot write " + p.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& p) {
  out.close();
  if (!out) throw io_error("write failed for " + p.string());
}

std::string svg_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void write_svg(const summary& s, const sweep_result& result, const std::filesystem::path& path) {
  constexpr double width = 720, height = 440, left = 70, right = 20, top = 30, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;

  auto safe_log = [](double v) { return std::log10(std::max(v, 1e-300)); };
  struct series {
    const char* name;
    const char* color;
    double curve_row::*field;
  };
  const series all[] = {{"median", "#1f4e9c", &curve_row::median},
                        {"q25", "#8aa9d6", &curve_row::q25},
                        {"q75", "#8aa9d6", &curve_row::q75}};

  double kmin = s.curve.front().k, kmax = s.curve.back().k;
  if (kmax == kmin) kmax = kmin + 1;
  double ymin = INFINITY, ymax = -INFINITY;
  for (const auto& row : s.curve)
    for (const auto& se : all) {
      ymin = std::min(ymin, safe_log(row.*se.field));
      ymax = std::max(ymax, safe_log(row.*se.field));
    }
  ymin = std::floor(ymin);
  ymax = std::ceil(ymax);
  if (ymax <= ymin) ymax = ymin + 1;
  auto px = [&](double k) { return left + (k - kmin) / (kmax - kmin) * pw; };
  auto py = [&](double l) { return top + (ymax - l) / (ymax - ymin) * ph; };

  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";

  const int ysteps = static_cast<int>(ymax - ymin);
  const int ystride = std::max(1, ysteps / 8);
  for (int i = 0; i <= ysteps; i += ystride) {
    const double l = ymin + i;
    out << "<line x1=\"" << left - 4 << "\" x2=\"" << left << "\" y1=\"" << svg_number(py(l)) << "\" y2=\""
        << svg_number(py(l)) << "\" stroke=\"#444\"/>";
    out << "<text x=\"" << left - 8 << "\" y=\"" << svg_number(py(l) + 4) << "\" text-anchor=\"end\">1e" << l
        << "</text>\n";
  }
  const int kspan = static_cast<int>(kmax - kmin);
  const int kstride = kspan <= 10 ? 1 : (kspan <= 50 ? 5 : (kspan <= 120 ? 10 : 20));
  for (int k = static_cast<int>(std::ceil(kmin / kstride) * kstride); k <= kmax; k += kstride) {
    out << "<line x1=\"" << svg_number(px(k)) << "\" x2=\"" << svg_number(px(k)) << "\" y1=\"" << top + ph
        << "\" y2=\"" << top + ph + 4 << "\" stroke=\"#444\"/>";
    out << "<text x=\"" << svg_number(px(k)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << k
        << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">K</text>\n";
  out << "<text x=\"16\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 16 " << top + ph / 2
      << ")\" text-anchor=\"middle\">test MSE (log scale)</text>\n";

  if (result.marker_k >= kmin && result.marker_k <= kmax) {
    const double mx = px(result.marker_k);
    out << "<line class=\"marker\" x1=\"" << svg_number(mx) << "\" x2=\"" << svg_number(mx) << "\" y1=\"" << top
        << "\" y2=\"" << top + ph << "\" stroke=\"#c0392b\" stroke-dasharray=\"5,4\"/>\n";
    out << "<text x=\"" << svg_number(mx + 4) << "\" y=\"" << top + 14 << "\" fill=\"#c0392b\">"
        << result.marker_label << "</text>\n";
  }

  for (const auto& se : all) {
    out << "<polyline data-series=\"" << se.name << "\" fill=\"none\" stroke=\"" << se.color << "\" stroke-width=\""
        << (std::string_view(se.name) == "median" ? "2" : "1") << "\" points=\"";
    for (std::size_t i = 0; i < s.curve.size(); ++i)
      out << (i ? " " : "") << svg_number(px(s.curve[i].k)) << ',' << svg_number(py(safe_log(s.curve[i].*se.field)));
    out << "\"/>\n";
  }
  out << "<text x=\"" << left + pw - 6 << "\" y=\"" << top + 14
      << "\" text-anchor=\"end\" fill=\"#1f4e9c\">median; quartiles light</text>\n";
  out << "</svg>\n";
  finish(out, path);
}

}  // namespace

void emit_outputs(const sweep_result& result, const summary& s, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create " + out_dir.string() + ": " + ec.message());

  {
    const auto p = out_dir / "records.csv";
    auto out = open_out(p);
    out << "replicate,K,mse\n";
    for (const auto& r : result.records) out << r.replicate << ',' << r.k << ',' << format_double(r.mse) << '\n';
    finish(out, p);
  }
  {
    const auto p = out_dir / "methods.csv";
    auto out = open_out(p);
    out << "replicate,method,chosen_K,mse\n";
    for (const auto& m : result.methods)
      out << m.replicate << ',' << selection::method_name(m.kind) << ',' << m.chosen_k << ',' << format_double(m.mse)
          << '\n';
    finish(out, p);
  }
  {
    const auto p = out_dir / "summary.csv";
    auto out = open_out(p);
    out << "table,label,statistic,value\n";
    for (const auto& c : s.curve) {
      out << "curve," << c.k << ",mean," << format_double(c.mean) << '\n';
      out << "curve," << c.k << ",median," << format_double(c.median) << '\n';
      out << "curve," << c.k << ",q25," << format_double(c.q25) << '\n';
      out << "curve," << c.k << ",q75," << format_double(c.q75) << '\n';
    }
    for (const auto& m : s.methods) {
      const auto name = selection::method_name(m.kind);
      out << "method_mse," << name << ",mean," << format_double(m.mean_mse) << '\n';
      out << "chosen_k," << name << ",min," << format_double(m.chosen_k.min) << '\n';
      out << "chosen_k," << name << ",q1," << format_double(m.chosen_k.q1) << '\n';
      out << "chosen_k," << name << ",median," << format_double(m.chosen_k.median) << '\n';
      out << "chosen_k," << name << ",q3," << format_double(m.chosen_k.q3) << '\n';
      out << "chosen_k," << name << ",max," << format_double(m.chosen_k.max) << '\n';
    }
    finish(out, p);
  }
  if (s.curve.empty()) throw invalid_input("nothing to plot: the sweep has no records");
  write_svg(s, result, out_dir / "curve.svg");
}

}  // namespace fdadd::experiment
