#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace fdadd::selection {

enum class method { cv, caic, fixed };

std::string_view method_name(method m);
// Accepts "cv", "caic", "fixed".
method parse_method(std::string_view name);

// Score of one candidate; nullopt marks it ineligible.
struct candidate_score {
  int k = 0;
  std::optional<double> score;
};

struct selection_result {
  method kind = method::fixed;
  int chosen_k = 0;
  std::vector<candidate_score> scores;
};

// Shuffles 0..n-1 with a generator seeded by `seed` and cuts the result into
// `folds` contiguous groups whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t folds,
                                                  std::uint64_t seed);

// Held-out loss of a model with K basis functions trained on `train`.
using fold_loss =
    std::function<double(std::span<const std::size_t> train, std::span<const std::size_t> test, int k)>;

// Mean held-out loss per candidate over kfold_split(n_items, folds, seed); the
// smallest wins, ties go to the smaller K. Candidates with a non-finite loss
// on any fold are ineligible.
selection_result cv_select(std::span<const int> candidates, const fold_loss& loss,
                           std::size_t n_items, std::size_t folds, std::uint64_t seed);

// Same, on folds already drawn.
selection_result cv_select(std::span<const int> candidates, const fold_loss& loss,
                           const std::vector<std::vector<std::size_t>>& folds);

// n ln(rss / n) + 2k + 2k(k + 1) / (n - k - 1); nullopt when n - k - 1 <= 0 or
// rss == 0. Throws invalid_input on negative rss or n == 0.
std::optional<double> caic_score(double rss, std::size_t n, std::size_t k_params);

struct caic_candidate {
  int k = 0;
  double rss = 0.0;
  std::size_t k_params = 0;
  std::size_t n = 0;
};

selection_result caic_select(std::span<const caic_candidate> candidates);

}  // namespace fdadd::selection
