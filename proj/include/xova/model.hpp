#ifndef XOVA_MODEL_HPP
#define XOVA_MODEL_HPP

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "xova/dataio.hpp"
#include "xova/error.hpp"
#include "xova/loss.hpp"
#include "xova/sparse.hpp"

namespace xova {

/// One sparse weight vector per label, after clipping.
struct OvaModel {
  std::size_t n_labels = 0;
  std::size_t dim = 0;
  std::optional<index_t> bias_index;
  std::vector<SparseVector> weights;
  MarginLoss loss;
  std::string init = "zero";
  std::string config_digest;

  friend bool operator==(const OvaModel&, const OvaModel&) = default;
};

/// Scores w_j·x for every label j.
inline std::vector<double> predict_scores(const OvaModel& model, SparseView x) {
  detail::check_sparse_fits(x, model.dim);
  std::vector<double> scores(model.n_labels);
  for (std::size_t j = 0; j < model.n_labels; ++j) scores[j] = dot(model.weights[j].view(), x);
  return scores;
}

using ScoredLabel = std::pair<label_t, double>;

/// The k best labels by score, descending; ties go to the smaller label id.
inline std::vector<ScoredLabel> top_k(std::span<const double> scores, std::size_t k) {
  if (k < 1 || k > scores.size())
    throw ConfigError("k=" + std::to_string(k) + " outside [1, " + std::to_string(scores.size()) + "]");
  std::vector<label_t> order(scores.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = static_cast<label_t>(j);
  auto better = [&](label_t a, label_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  std::vector<ScoredLabel> out(k);
  for (std::size_t r = 0; r < k; ++r) out[r] = {order[r], scores[order[r]]};
  return out;
}

inline std::vector<ScoredLabel> predict_topk(const OvaModel& model, SparseView x, std::size_t k) {
  return top_k(predict_scores(model, x), k);
}

/// Feature-major copy of a model for scoring many instances.
/// Produces the same sums, in the same order, as predict_scores.
class Predictor {
 public:
  explicit Predictor(const OvaModel& model) : n_labels_(model.n_labels), dim_(model.dim) {
    offsets_.assign(dim_ + 1, 0);
    for (const auto& w : model.weights)
      for (auto f : w.indices()) ++offsets_[f + 1];
    for (std::size_t f = 0; f < dim_; ++f) offsets_[f + 1] += offsets_[f];
    labels_.resize(offsets_.back());
    values_.resize(offsets_.back());
    auto fill = offsets_;
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
      const auto& w = model.weights[j];
      for (std::size_t k = 0; k < w.nnz(); ++k) {
        const auto pos = fill[w.indices()[k]]++;
        labels_[pos] = static_cast<label_t>(j);
        values_[pos] = w.values()[k];
      }
    }
  }

  std::size_t n_labels() const noexcept { return n_labels_; }
  std::size_t dim() const noexcept { return dim_; }

  void scores(SparseView x, std::vector<double>& out) const {
    detail::check_sparse_fits(x, dim_);
    out.assign(n_labels_, 0.0);
    for (std::size_t k = 0; k < x.nnz(); ++k) {
      const auto f = x.indices[k];
      const double xv = x.values[k];
      for (auto q = offsets_[f]; q < offsets_[f + 1]; ++q) out[labels_[q]] += values_[q] * xv;
    }
  }

  std::vector<double> scores(SparseView x) const {
    std::vector<double> out;
    scores(x, out);
    return out;
  }

 private:
  std::size_t n_labels_, dim_;
  std::vector<std::size_t> offsets_;
  std::vector<label_t> labels_;
  std::vector<double> values_;
};

inline void write_model(std::ostream& out, const OvaModel& m) {
  out << "xova v1 " << m.n_labels << ' ' << m.dim << ' ';
  if (m.bias_index)
    out << *m.bias_index;
  else
    out << '-';
  out << ' ' << to_string(m.loss) << ' ' << m.init;
  if (!m.config_digest.empty()) out << ' ' << m.config_digest;
  out << '\n';
  std::string buf;
  for (std::size_t j = 0; j < m.n_labels; ++j) {
    const auto& w = m.weights[j];
    buf = std::to_string(j) + ' ' + std::to_string(w.nnz());
    for (std::size_t k = 0; k < w.nnz(); ++k) {
      buf += ' ';
      buf += std::to_string(w.indices()[k]);
      buf += ':';
      detail::append_double(buf, w.values()[k]);
    }
    buf += '\n';
    out << buf;
  }
}

inline void save_model(const std::string& path, const OvaModel& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model '" + path + "'");
  write_model(out, m);
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Reads the format written by write_model; errors carry the offending line.
inline OvaModel read_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty model file");
  std::vector<std::string_view> head;
  for (auto t : detail::split(detail::trim(line), ' '))
    if (!t.empty()) head.push_back(t);
  if (head.size() < 7 || head.size() > 8 || head[0] != "xova") throw ParseError(1, "not a model header");
  if (head[1] != "v1") throw ParseError(1, "unsupported model version '" + std::string(head[1]) + "'");

  OvaModel m;
  m.n_labels = detail::parse_unsigned<std::size_t>(head[2], 1, "label count");
  m.dim = detail::parse_unsigned<std::size_t>(head[3], 1, "dimension");
  if (head[4] != "-") {
    m.bias_index = detail::parse_unsigned<index_t>(head[4], 1, "bias index");
    if (*m.bias_index >= m.dim) throw ParseError(1, "bias index out of range");
  }
  try {
    m.loss = parse_loss(head[5]);
  } catch (const ConfigError& e) {
    throw ParseError(1, e.what());
  }
  m.init = std::string(head[6]);
  if (head.size() == 8) m.config_digest = std::string(head[7]);

  m.weights.reserve(m.n_labels);
  std::vector<index_t> idx;
  std::vector<double> val;
  for (std::size_t j = 0; j < m.n_labels; ++j) {
    const std::size_t line_no = j + 2;
    if (!std::getline(in, line))
      throw ParseError(line_no, "truncated model: expected " + std::to_string(m.n_labels) + " label lines");
    std::vector<std::string_view> toks;
    for (auto t : detail::split(detail::trim(line), ' '))
      if (!t.empty()) toks.push_back(t);
    if (toks.size() < 2) throw ParseError(line_no, "malformed label line");
    if (detail::parse_unsigned<std::size_t>(toks[0], line_no, "label id") != j)
      throw ParseError(line_no, "expected label " + std::to_string(j));
    const auto nnz = detail::parse_unsigned<std::size_t>(toks[1], line_no, "nnz");
    if (toks.size() != nnz + 2)
      throw ParseError(line_no, "declared " + std::to_string(nnz) + " weights, found " + std::to_string(toks.size() - 2));
    idx.clear();
    val.clear();
    for (std::size_t k = 2; k < toks.size(); ++k) {
      const auto colon = toks[k].find(':');
      if (colon == std::string_view::npos) throw ParseError(line_no, "weight lacks ':'");
      const auto f = detail::parse_unsigned<index_t>(toks[k].substr(0, colon), line_no, "feature index");
      if (f >= m.dim) throw ParseError(line_no, "feature index " + std::to_string(f) + " >= dimension");
      if (!idx.empty() && f <= idx.back()) throw ParseError(line_no, "feature indices not increasing");
      idx.push_back(f);
      val.push_back(detail::parse_double(toks[k].substr(colon + 1), line_no));
    }
    m.weights.emplace_back(idx, val);
  }
  std::size_t line_no = m.n_labels + 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) throw ParseError(line_no, "trailing content after the last label");
  }
  return m;
}

inline OvaModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model '" + path + "'");
  return read_model(in);
}

} // namespace xova

#endif // XOVA_MODEL_HPP
