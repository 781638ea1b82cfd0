#ifndef XOVA_METRICS_HPP
#define XOVA_METRICS_HPP

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include "xova/dataio.hpp"
#include "xova/model.hpp"

namespace xova {

struct EvalResult {
  std::map<std::size_t, double> p_at;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  std::size_t n_test = 0;
};

namespace detail {

inline void check_test_dim(const OvaModel& model, const Dataset& test) {
  if (test.dim() != model.dim)
    throw DimensionMismatch("test features have dimension " + std::to_string(test.dim()) + ", model expects " +
                            std::to_string(model.dim));
}

inline std::size_t hits(const std::vector<ScoredLabel>& top, std::size_t k, const std::vector<label_t>& relevant) {
  std::size_t h = 0;
  for (std::size_t r = 0; r < k; ++r)
    h += std::binary_search(relevant.begin(), relevant.end(), top[r].first) ? 1 : 0;
  return h;
}

} // namespace detail

/// P@k = mean over test instances of |top_k ∩ relevant| / k.
inline std::map<std::size_t, double> precision_at_k(const OvaModel& model, const Dataset& test,
                                                    std::vector<std::size_t> ks) {
  detail::check_test_dim(model, test);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::map<std::size_t, double> out;
  if (ks.empty()) return out;
  if (ks.front() < 1 || ks.back() > model.n_labels)
    throw ConfigError("k must be in [1, " + std::to_string(model.n_labels) + "]");
  for (auto k : ks) out[k] = 0.0;
  const std::size_t n = test.n_instances();
  if (n == 0) return out;

  const Predictor pred(model);
  std::vector<double> scores;
  std::vector<std::size_t> total(ks.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    pred.scores(test.features.row(i), scores);
    const auto top = top_k(scores, ks.back());
    for (std::size_t q = 0; q < ks.size(); ++q) total[q] += detail::hits(top, ks[q], test.labels[i]);
  }
  for (std::size_t q = 0; q < ks.size(); ++q)
    out[ks[q]] = static_cast<double>(total[q]) / (static_cast<double>(n) * static_cast<double>(ks[q]));
  return out;
}

/// Macro-averaged binary precision and recall with decision rule score > 0.
/// Labels with neither test positives nor predicted positives are skipped;
/// 0/0 counts as 0.
inline std::pair<double, double> macro_binary_pr(const OvaModel& model, const Dataset& test) {
  detail::check_test_dim(model, test);
  const std::size_t l = model.n_labels;
  std::vector<std::size_t> tp(l, 0), fp(l, 0), fn(l, 0);
  const Predictor pred(model);
  std::vector<double> scores;
  for (std::size_t i = 0; i < test.n_instances(); ++i) {
    pred.scores(test.features.row(i), scores);
    const auto& rel = test.labels[i];
    for (std::size_t j = 0; j < l; ++j) {
      const bool predicted = scores[j] > 0.0;
      const bool relevant = std::binary_search(rel.begin(), rel.end(), static_cast<label_t>(j));
      if (predicted && relevant) ++tp[j];
      else if (predicted) ++fp[j];
      else if (relevant) ++fn[j];
    }
  }
  double psum = 0.0, rsum = 0.0;
  std::size_t counted = 0;
  for (std::size_t j = 0; j < l; ++j) {
    if (tp[j] + fp[j] + fn[j] == 0) continue;
    ++counted;
    psum += tp[j] + fp[j] ? static_cast<double>(tp[j]) / static_cast<double>(tp[j] + fp[j]) : 0.0;
    rsum += tp[j] + fn[j] ? static_cast<double>(tp[j]) / static_cast<double>(tp[j] + fn[j]) : 0.0;
  }
  if (counted == 0) return {0.0, 0.0};
  return {psum / static_cast<double>(counted), rsum / static_cast<double>(counted)};
}

inline EvalResult evaluate(const OvaModel& model, const Dataset& test, const std::vector<std::size_t>& ks) {
  EvalResult r;
  r.n_test = test.n_instances();
  r.p_at = precision_at_k(model, test, ks);
  std::tie(r.macro_precision, r.macro_recall) = macro_binary_pr(model, test);
  return r;
}

} // namespace xova

#endif // XOVA_METRICS_HPP
