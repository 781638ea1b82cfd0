#ifndef XOVA_DATAIO_HPP
#define XOVA_DATAIO_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "xova/error.hpp"
#include "xova/sparse.hpp"

namespace xova {

using label_t = std::uint32_t;

/// Instances, their label sets, and the (optional) bias column.
struct Dataset {
  SparseMatrix features;
  std::vector<std::vector<label_t>> labels;  // sorted per instance
  std::size_t n_labels = 0;
  std::optional<index_t> bias_index;

  std::size_t n_instances() const noexcept { return features.n_rows(); }
  std::size_t dim() const noexcept { return features.n_cols(); }

  /// Feature dimension before bias augmentation.
  std::size_t raw_dim() const noexcept { return dim() - (bias_index ? 1 : 0); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_unsigned(std::string_view tok, std::size_t line, const char* what) {
  T value{};
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  if (tok.empty() || ec != std::errc() || ptr != end)
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(tok) + "'");
  return value;
}

inline double parse_double(std::string_view tok, std::size_t line) {
  double value = 0.0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  if (tok.empty() || ec != std::errc() || ptr != end || !std::isfinite(value))
    throw ParseError(line, "invalid feature value '" + std::string(tok) + "'");
  return value;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline void append_double(std::string& out, double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(len));
}

} // namespace detail

/// Parses the extreme-classification repository text format:
/// a header `n d l`, then one line per instance `lbl,lbl,... f:v f:v ...`.
inline Dataset parse_xmc(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(1, "missing header line");

  std::size_t n = 0, d = 0, l = 0;
  {
    std::vector<std::string_view> toks;
    for (auto tok : detail::split(detail::trim(line), ' '))
      if (!tok.empty()) toks.push_back(tok);
    if (toks.size() != 3) throw ParseError(1, "header must be 'n d l'");
    n = detail::parse_unsigned<std::size_t>(toks[0], 1, "instance count");
    d = detail::parse_unsigned<std::size_t>(toks[1], 1, "feature count");
    l = detail::parse_unsigned<std::size_t>(toks[2], 1, "label count");
  }

  Dataset ds;
  ds.n_labels = l;
  ds.labels.reserve(n);
  SparseMatrixBuilder rows(d);
  std::vector<std::pair<index_t, double>> entries;
  std::vector<label_t> labels;

  for (std::size_t i = 0; i < n; ++i) {
    ++line_no;
    if (!std::getline(in, line))
      throw ParseError(line_no, "expected " + std::to_string(n) + " instances, found " + std::to_string(i));
    std::string_view body = line;
    if (!body.empty() && body.back() == '\r') body.remove_suffix(1);

    entries.clear();
    labels.clear();
    auto tokens = detail::split(body, ' ');
    std::size_t first_feature = 0;
    if (!tokens.empty() && !tokens[0].empty() && tokens[0].find(':') == std::string_view::npos) {
      for (auto lt : detail::split(tokens[0], ',')) {
        const auto lab = detail::parse_unsigned<label_t>(lt, line_no, "label id");
        if (lab >= l)
          throw ParseError(line_no, "label id " + std::to_string(lab) + " >= " + std::to_string(l));
        labels.push_back(lab);
      }
      first_feature = 1;
    }
    for (std::size_t k = first_feature; k < tokens.size(); ++k) {
      const auto tok = tokens[k];
      if (tok.empty()) continue;
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos)
        throw ParseError(line_no, "feature token '" + std::string(tok) + "' lacks ':'");
      const auto f = detail::parse_unsigned<index_t>(tok.substr(0, colon), line_no, "feature index");
      if (f >= d)
        throw ParseError(line_no, "feature index " + std::to_string(f) + " >= " + std::to_string(d));
      entries.emplace_back(f, detail::parse_double(tok.substr(colon + 1), line_no));
    }

    std::sort(labels.begin(), labels.end());
    if (std::adjacent_find(labels.begin(), labels.end()) != labels.end())
      throw ParseError(line_no, "duplicate label id");
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 1; k < entries.size(); ++k)
      if (entries[k].first == entries[k - 1].first)
        throw ParseError(line_no, "duplicate feature index " + std::to_string(entries[k].first));

    std::vector<index_t> idx(entries.size());
    std::vector<double> val(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      idx[k] = entries[k].first;
      val[k] = entries[k].second;
    }
    rows.add_row({idx, val});
    ds.labels.push_back(labels);
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty())
      throw ParseError(line_no, "more instances than declared in the header");
  }
  ds.features = std::move(rows).build();
  return ds;
}

inline Dataset load_xmc_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  return parse_xmc(in);
}

/// Writes `ds` in the text format read by parse_xmc. The bias column, if any, is dropped.
inline void write_xmc(std::ostream& out, const Dataset& ds) {
  const std::size_t d = ds.raw_dim();
  out << ds.n_instances() << ' ' << d << ' ' << ds.n_labels << '\n';
  std::string buf;
  for (std::size_t i = 0; i < ds.n_instances(); ++i) {
    buf.clear();
    for (std::size_t k = 0; k < ds.labels[i].size(); ++k) {
      if (k) buf += ',';
      buf += std::to_string(ds.labels[i][k]);
    }
    const auto row = ds.features.row(i);
    for (std::size_t k = 0; k < row.nnz(); ++k) {
      if (ds.bias_index && row.indices[k] == *ds.bias_index) continue;
      buf += ' ';
      buf += std::to_string(row.indices[k]);
      buf += ':';
      detail::append_double(buf, row.values[k]);
    }
    buf += '\n';
    out << buf;
  }
}

inline void save_xmc_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset '" + path + "'");
  write_xmc(out, ds);
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Appends a constant-1 feature at index d. Returns the augmented copy.
inline Dataset augment_bias(Dataset ds) {
  if (ds.bias_index) throw InvalidState("dataset already has a bias feature");
  const std::size_t d = ds.dim();
  SparseMatrixBuilder rows(d + 1);
  rows.reserve(ds.n_instances(), ds.features.nnz() + ds.n_instances());
  std::vector<index_t> idx;
  std::vector<double> val;
  for (std::size_t i = 0; i < ds.n_instances(); ++i) {
    const auto row = ds.features.row(i);
    idx.assign(row.indices.begin(), row.indices.end());
    val.assign(row.values.begin(), row.values.end());
    idx.push_back(static_cast<index_t>(d));
    val.push_back(1.0);
    rows.add_row({idx, val});
  }
  ds.features = std::move(rows).build();
  ds.bias_index = static_cast<index_t>(d);
  return ds;
}

/// Per-label positive sets and their means, plus the global mean.
struct LabelStats {
  std::vector<std::vector<index_t>> positives;  // P(j), sorted instance ids
  std::vector<SparseVector> pbar;               // mean of rows in P(j); empty if P(j) is empty
  DenseVector xbar;
  double xbar_sq = 0.0;
  std::size_t n = 0;
};

inline SparseVector mean_of_rows(const SparseMatrix& x, std::span<const index_t> rows,
                                 std::vector<double>& scratch, std::vector<index_t>& touched) {
  if (rows.empty()) return {};
  scratch.assign(x.n_cols(), 0.0);
  std::vector<char> seen(x.n_cols(), 0);
  touched.clear();
  for (const auto r : rows) {
    const auto row = x.row(r);
    for (std::size_t k = 0; k < row.nnz(); ++k) {
      const auto f = row.indices[k];
      if (!seen[f]) {
        seen[f] = 1;
        touched.push_back(f);
      }
      scratch[f] += row.values[k];
    }
  }
  std::sort(touched.begin(), touched.end());
  const double inv = 1.0 / static_cast<double>(rows.size());
  std::vector<double> vals(touched.size());
  for (std::size_t k = 0; k < touched.size(); ++k) vals[k] = scratch[touched[k]] * inv;
  return SparseVector(touched, std::move(vals));
}

inline LabelStats compute_label_stats(const Dataset& ds) {
  const std::size_t n = ds.n_instances();
  if (n == 0) throw InvalidState("label statistics need at least one instance");
  LabelStats st;
  st.n = n;
  st.positives.resize(ds.n_labels);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto j : ds.labels[i]) st.positives[j].push_back(static_cast<index_t>(i));

  st.xbar = DenseVector(ds.dim());
  for (std::size_t i = 0; i < n; ++i) detail::axpy_unchecked(1.0, ds.features.row(i), st.xbar.data());
  scale(st.xbar, 1.0 / static_cast<double>(n));
  st.xbar_sq = dot(st.xbar.span(), st.xbar.span());

  st.pbar.resize(ds.n_labels);
  std::vector<double> scratch;
  std::vector<index_t> touched;
  for (std::size_t j = 0; j < ds.n_labels; ++j)
    st.pbar[j] = mean_of_rows(ds.features, st.positives[j], scratch, touched);
  return st;
}

/// Parameters for the seeded long-tailed generator.
struct SyntheticOptions {
  std::size_t n = 1000;
  std::size_t d = 100;
  std::size_t l = 50;
  double tail_exponent = 1.2;
  std::uint64_t seed = 0;
  double head_fraction = 0.2;          // share of instances carrying label 0
  std::size_t centroid_features = 4;   // features characterizing each label
  std::size_t noise_features = 3;      // background features per instance
  double noise_level = 0.3;
};

/// Positive count of every label: ceil(head_fraction·n·(j+1)^-tail), clamped to [1, n].
inline std::vector<std::size_t> synthetic_label_counts(std::size_t n, std::size_t l, double tail,
                                                       double head_fraction) {
  std::vector<std::size_t> counts(l);
  const double head = head_fraction * static_cast<double>(n);
  for (std::size_t j = 0; j < l; ++j) {
    const double c = std::ceil(head * std::pow(static_cast<double>(j + 1), -tail));
    counts[j] = std::clamp<std::size_t>(static_cast<std::size_t>(c), 1, n);
  }
  return counts;
}

namespace detail {

// Portable draws from mt19937_64; the std distributions are implementation-defined.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t below(std::size_t bound) {
    // rejection sampling, unbiased
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  /// k distinct values from [0, n), in draw order.
  std::vector<std::size_t> distinct(std::size_t n, std::size_t k, std::vector<std::size_t>& pool) {
    pool.resize(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    k = std::min(k, n);
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + below(n - i)]);
    return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k)};
  }

 private:
  std::mt19937_64 eng_;
};

struct LabelCentroid {
  std::vector<index_t> features;
  std::vector<double> weights;
};

inline std::vector<LabelCentroid> synthetic_centroids(const SyntheticOptions& o) {
  SplitRng rng(o.seed * 0x9E3779B97F4A7C15ull + 1);
  std::vector<std::size_t> pool;
  std::vector<LabelCentroid> out(o.l);
  for (auto& c : out) {
    for (auto f : rng.distinct(o.d, o.centroid_features, pool)) {
      c.features.push_back(static_cast<index_t>(f));
      c.weights.push_back(rng.uniform(0.5, 1.5));
    }
  }
  return out;
}

inline Dataset synthetic_split(const SyntheticOptions& o, const std::vector<LabelCentroid>& centroids,
                               std::size_t n, std::uint64_t stream) {
  Dataset ds;
  ds.n_labels = o.l;
  ds.labels.assign(n, {});
  SplitRng rng(o.seed * 0xD1B54A32D192ED03ull + stream);
  std::vector<std::size_t> pool;

  const auto counts = synthetic_label_counts(n, o.l, o.tail_exponent, o.head_fraction);
  for (std::size_t j = 0; j < o.l; ++j)
    for (auto i : rng.distinct(n, counts[j], pool)) ds.labels[i].push_back(static_cast<label_t>(j));

  SparseMatrixBuilder rows(o.d);
  std::vector<double> acc(o.d, 0.0);
  std::vector<index_t> idx;
  std::vector<double> val;
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (auto f : rng.distinct(o.d, o.noise_features, pool)) acc[f] += rng.uniform(0.0, o.noise_level);
    for (const auto j : ds.labels[i]) {
      const auto& c = centroids[j];
      for (std::size_t k = 0; k < c.features.size(); ++k)
        acc[c.features[k]] += c.weights[k] * rng.uniform(0.8, 1.2);
    }
    idx.clear();
    val.clear();
    double sq = 0.0;
    for (std::size_t f = 0; f < o.d; ++f) {
      if (acc[f] != 0.0) {
        idx.push_back(static_cast<index_t>(f));
        val.push_back(acc[f]);
        sq += acc[f] * acc[f];
      }
    }
    if (sq > 0.0) {
      const double inv = 1.0 / std::sqrt(sq);
      for (auto& v : val) v *= inv;
    }
    rows.add_row({idx, val});
  }
  ds.features = std::move(rows).build();
  return ds;
}

inline void validate(const SyntheticOptions& o) {
  if (o.n < 1 || o.d < 1 || o.l < 1) throw ConfigError("synthetic data needs n, d, l >= 1");
  if (!(o.tail_exponent > 0.0) || !std::isfinite(o.tail_exponent))
    throw ConfigError("tail exponent must be positive");
  if (!(o.head_fraction > 0.0 && o.head_fraction <= 1.0)) throw ConfigError("head fraction must be in (0, 1]");
}

} // namespace detail

/// Long-tailed, approximately separable, non-negative sparse data with unit-norm rows.
/// Each label owns a small set of centroid features that its positives carry.
inline Dataset generate_synthetic(const SyntheticOptions& o) {
  detail::validate(o);
  return detail::synthetic_split(o, detail::synthetic_centroids(o), o.n, 1);
}

inline Dataset generate_synthetic(std::size_t n, std::size_t d, std::size_t l, double tail_exponent,
                                  std::uint64_t seed) {
  SyntheticOptions o;
  o.n = n;
  o.d = d;
  o.l = l;
  o.tail_exponent = tail_exponent;
  o.seed = seed;
  return generate_synthetic(o);
}

/// Held-out instances drawn from the same label centroids as generate_synthetic(o).
inline Dataset generate_synthetic_test(const SyntheticOptions& o, std::size_t n_test) {
  detail::validate(o);
  if (n_test == 0) {
    Dataset empty;
    empty.n_labels = o.l;
    empty.features = SparseMatrixBuilder(o.d).build();
    return empty;
  }
  return detail::synthetic_split(o, detail::synthetic_centroids(o), n_test, 2);
}

/// FNV-1a over the structure of a dataset; identifies it in training reports.
inline std::uint64_t dataset_digest(const Dataset& ds) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t k = 0; k < len; ++k) {
      h ^= b[k];
      h *= 1099511628211ull;
    }
  };
  const std::uint64_t header[3] = {ds.n_instances(), ds.dim(), ds.n_labels};
  mix(header, sizeof header);
  mix(ds.features.offsets().data(), ds.features.offsets().size() * sizeof(std::size_t));
  mix(ds.features.columns().data(), ds.features.columns().size() * sizeof(index_t));
  mix(ds.features.values().data(), ds.features.values().size() * sizeof(double));
  for (const auto& ls : ds.labels) {
    const std::uint64_t sz = ls.size();
    mix(&sz, sizeof sz);
    mix(ls.data(), ls.size() * sizeof(label_t));
  }
  return h;
}

} // namespace xova

#endif // XOVA_DATAIO_HPP
