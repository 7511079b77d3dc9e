#include <fdadd/selection.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <fdadd/error.hpp>

namespace fdadd::selection {

std::string_view method_name(method m) {
  switch (m) {
    case method::cv:
      return "cv";
    case method::caic:
      return "caic";
    case method::fixed:
      return "fixed";
  }
  return "unknown";
}

method parse_method(std::string_view name) {
  if (name == "cv") return method::cv;
  if (name == "caic") return method::caic;
  if (name == "fixed") return method::fixed;
  throw config_error("unknown selection method '" + std::string(name) + "'");
}

namespace {

// Lowest eligible score, ties to the smaller K; independent of input order.
selection_result pick(method kind, std::vector<candidate_score> scores) {
  std::sort(scores.begin(), scores.end(),
            [](const candidate_score& a, const candidate_score& b) { return a.k < b.k; });
  const candidate_score* best = nullptr;
  for (const auto& s : scores) {
    if (!s.score) continue;
    if (!best || *s.score < *best->score) best = &s;
  }
  if (!best) throw no_viable_candidate(std::string(method_name(kind)) + ": every candidate K is ineligible");
  const int chosen = best->k;
  return {kind, chosen, std::move(scores)};
}

}  // namespace

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t folds,
                                                  std::uint64_t seed) {
  if (folds < 2) throw invalid_input("cross-validation needs at least 2 folds");
  if (n < folds)
    throw invalid_input("cannot split " + std::to_string(n) + " items into " +
                        std::to_string(folds) + " folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with a modulo draw, so the permutation does not depend on the
  // standard library's distribution implementation.
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

  std::vector<std::vector<std::size_t>> out(folds);
  const std::size_t base = n / folds;
  const std::size_t extra = n % folds;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                  order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

selection_result cv_select(std::span<const int> candidates, const fold_loss& loss,
                           const std::vector<std::vector<std::size_t>>& folds) {
  if (candidates.empty()) throw invalid_input("no candidate K values");
  if (folds.size() < 2) throw invalid_input("cross-validation needs at least 2 folds");
  std::vector<std::vector<std::size_t>> train(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (std::size_t g = 0; g < folds.size(); ++g)
      if (g != f) train[f].insert(train[f].end(), folds[g].begin(), folds[g].end());
    std::sort(train[f].begin(), train[f].end());
  }

  std::vector<candidate_score> scores;
  scores.reserve(candidates.size());
  for (const int k : candidates) {
    double total = 0.0;
    bool eligible = true;
    for (std::size_t f = 0; f < folds.size() && eligible; ++f) {
      const double l = loss(train[f], folds[f], k);
      if (!std::isfinite(l)) eligible = false;
      total += l;
    }
    scores.push_back({k, eligible ? std::optional<double>(total / static_cast<double>(folds.size()))
                                  : std::nullopt});
  }
  return pick(method::cv, std::move(scores));
}

selection_result cv_select(std::span<const int> candidates, const fold_loss& loss,
                           std::size_t n_items, std::size_t folds, std::uint64_t seed) {
  if (candidates.empty()) throw invalid_input("no candidate K values");
  return cv_select(candidates, loss, kfold_split(n_items, folds, seed));
}

std::optional<double> caic_score(double rss, std::size_t n, std::size_t k_params) {
  if (n == 0) throw invalid_input("cAIC needs at least one observation");
  if (!(rss >= 0.0)) throw invalid_input("residual sum of squares must be non-negative");
  const double dn = static_cast<double>(n);
  const double dk = static_cast<double>(k_params);
  if (dn - dk - 1.0 <= 0.0 || rss <= 0.0) return std::nullopt;
  return dn * std::log(rss / dn) + 2.0 * dk + 2.0 * dk * (dk + 1.0) / (dn - dk - 1.0);
}

selection_result caic_select(std::span<const caic_candidate> candidates) {
  if (candidates.empty()) throw invalid_input("no candidate K values");
  std::vector<candidate_score> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back({c.k, caic_score(c.rss, c.n, c.k_params)});
  return pick(method::caic, std::move(scores));
}

}  // namespace fdadd::selection
