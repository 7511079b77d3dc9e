#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <fdadd/basis.hpp>
#include <fdadd/datagen.hpp>
#include <fdadd/regression.hpp>
#include <fdadd/selection.hpp>

namespace fdadd::experiment {

// Real-data source for scalar-response sweeps.
struct dataset_source {
  std::filesystem::path x_path;
  std::filesystem::path y_path;
  int train_size = 10;
};

struct sweep_config {
  // For the curve-fitting demo, m1 is the number of points, gp_x the curve's
  // kernel, and domain, noise_sd and latent_grid_size apply as usual.
  datagen::scenario_config scenario = datagen::default_config(datagen::scenario::a);
  std::optional<dataset_source> dataset;  // replaces simulation when present

  basis::family basis_family = basis::family::natural_cubic_spline;
  std::vector<int> k_grid;          // swept K (K2 in C, K1 in D)
  std::vector<int> selection_grid;  // candidates for cv and caic
  std::vector<selection::method> methods{selection::method::cv, selection::method::caic,
                                         selection::method::fixed};
  int fixed_k = 50;
  int other_k = 10;  // K1 in scenario C, K2 in scenario D
  int folds = 5;
  int replicates = 50;
  std::uint64_t seed = 1;
  int threads = 1;
  std::optional<double> rcond;  // cutoff for the regression solves
  std::optional<double> functionalize_rcond;
  std::filesystem::path output_dir = "fdadd-out";
};

// Defaults for a scenario: grid 4..50 (4..120 for the demo), selection grid
// from the basis family minimum up to the top of the sweep grid.
sweep_config default_sweep(datagen::scenario s);

// Parses a JSON document. Unknown keys, wrong types and out-of-range values
// raise config_error naming the offending field.
sweep_config parse_sweep_config(const std::string& json_text);
sweep_config load_sweep_config(const std::filesystem::path& path);

// Throws config_error on an inconsistent configuration.
void validate(const sweep_config& cfg);

struct mse_record {
  int replicate = 0;
  int k = 0;
  double mse = 0.0;
};

struct method_record {
  int replicate = 0;
  selection::method kind = selection::method::fixed;
  int chosen_k = 0;
  double mse = 0.0;
};

struct sweep_result {
  std::vector<mse_record> records;   // sorted by (replicate, K)
  std::vector<method_record> methods;  // sorted by (replicate, method)
  int marker_k = 0;                    // interpolation threshold drawn on the plot
  std::string marker_label;
  std::vector<std::string> warnings;
};

// Mean over subjects of (prediction - signal)^2.
double test_mse_sonf(const regression::sonf_model& model, std::span<const functional_datum> x,
                     std::span<const double> signal);

// Mean over subjects and their response observation points of squared error
// of the predicted curve against the noiseless values.
double test_mse_fonf(const regression::fonf_model& model, std::span<const functional_datum> x,
                     std::span<const datagen::curve_subject> subjects);

sweep_result run_sweep(const sweep_config& cfg);

// Scalar-response data from CSV: x has a header of observation times and one
// row per subject; y has a header and one response per row. Rows with a
// missing cell ("", "NA", "NaN") in either file are dropped.
struct loaded_data {
  std::vector<double> times;
  std::vector<std::vector<double>> x;  // subject-major
  std::vector<double> y;
  std::size_t dropped = 0;
  std::vector<std::string> warnings;
};

loaded_data load_sonf_csv(const std::filesystem::path& x_path, const std::filesystem::path& y_path);
loaded_data parse_sonf_csv(const std::string& x_text, const std::string& y_text,
                           const std::string& x_name = "x", const std::string& y_name = "y");

// Seeded shuffle, first train_size rows train, the rest test; the observed
// response doubles as the signal.
datagen::sonf_dataset split_dataset(const loaded_data& data, int train_size, std::uint64_t seed);

// Writes data back in the loader's schema.
void write_sonf_csv(const loaded_data& data, const std::filesystem::path& x_path,
                    const std::filesystem::path& y_path);

struct box_stats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct curve_row {
  int k = 0;
  double mean = 0.0, median = 0.0, q25 = 0.0, q75 = 0.0;
};

struct method_row {
  selection::method kind = selection::method::fixed;
  double mean_mse = 0.0;
  box_stats chosen_k;
};

struct summary {
  std::vector<curve_row> curve;
  std::vector<method_row> methods;
};

// Linear-interpolation quantile (type 7), p in [0, 1].
double quantile(std::vector<double> values, double p);

summary summarize(const sweep_result& result);

// records.csv, methods.csv, summary.csv and curve.svg in out_dir (created if needed).
void emit_outputs(const sweep_result& result, const summary& s, const std::filesystem::path& out_dir);

// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

}  // namespace fdadd::experiment
