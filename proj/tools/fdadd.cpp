// fdadd: double-descent sweeps for functional-data regression.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <fdadd/error.hpp>
#include <fdadd/experiment.hpp>

namespace ex = fdadd::experiment;

namespace {

void print_summary(const ex::sweep_result& result, const ex::summary& s, const std::filesystem::path& out) {
  const ex::curve_row* peak = nullptr;
  for (const auto& c : s.curve)
    if (!peak || c.median > peak->median) peak = &c;
  if (peak) std::cout << "peak median MSE " << ex::format_double(peak->median) << " at K = " << peak->k << '\n';
  for (const auto& m : s.methods)
    std::cout << fdadd::selection::method_name(m.kind) << ": mean MSE " << ex::format_double(m.mean_mse)
              << ", median chosen K " << m.chosen_k.median << '\n';
  std::cout << result.marker_label << " at " << result.marker_k << '\n';
  std::cout << "wrote " << out.string() << '\n';
}

int execute(const ex::sweep_config& cfg) {
  const auto result = ex::run_sweep(cfg);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  const auto s = ex::summarize(result);
  ex::emit_outputs(result, s, cfg.output_dir);
  print_summary(result, s, cfg.output_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Double-descent sweeps for functional-data regression"};
  app.require_subcommand(1);

  std::string config_path, out_dir, x_path, y_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads, replicates;
  int train_size = 10, k_min = 4, k_max = 50;

  auto* run = app.add_subcommand("run", "Run a sweep described by a JSON config");
  run->add_option("--config", config_path, "JSON config file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--seed", seed, "Master seed (overrides the config)");
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* demo = app.add_subcommand("demo-fig1", "Min-norm curve fitting of one noisy curve over K = 4..120");
  demo->add_option("--seed", seed, "Master seed");
  demo->add_option("--out", out_dir, "Output directory")->default_str("fdadd-demo");
  demo->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* data = app.add_subcommand("sweep-data", "Scalar-on-function sweep over a real dataset");
  data->add_option("--x", x_path, "Predictor CSV (header row holds observation times)")->required();
  data->add_option("--y", y_path, "Response CSV (one header cell, one value per row)")->required();
  data->add_option("--train-size", train_size, "Training rows per replicate")->required();
  data->add_option("--k-min", k_min, "Smallest K in the sweep")->capture_default_str();
  data->add_option("--k-max", k_max, "Largest K in the sweep")->capture_default_str();
  data->add_option("--replicates", replicates, "Random train/test splits");
  data->add_option("--seed", seed, "Master seed");
  data->add_option("--out", out_dir, "Output directory")->default_str("fdadd-data");
  data->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ex::sweep_config cfg;
    if (*run) {
      cfg = ex::load_sweep_config(config_path);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
    } else if (*demo) {
      cfg = ex::default_sweep(fdadd::datagen::scenario::fig1_demo);
      cfg.output_dir = out_dir.empty() ? "fdadd-demo" : out_dir;
    } else {
      cfg = ex::default_sweep(fdadd::datagen::scenario::a);
      cfg.dataset = ex::dataset_source{x_path, y_path, train_size};
      if (k_min > k_max) throw fdadd::config_error("--k-min exceeds --k-max");
      cfg.k_grid.clear();
      for (int k = k_min; k <= k_max; ++k) cfg.k_grid.push_back(k);
      cfg.selection_grid.clear();
      for (int k = 2; k <= k_max; ++k) cfg.selection_grid.push_back(k);
      if (replicates) cfg.replicates = *replicates;
      cfg.output_dir = out_dir.empty() ? "fdadd-data" : out_dir;
    }
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    return execute(cfg);
  } catch (const fdadd::error& e) {
    std::cerr << "fdadd: " << e.what() << '\n';
    return fdadd::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "fdadd: " << e.what() << '\n';
    return 1;
  }
}
