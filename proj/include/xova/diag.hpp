#ifndef XOVA_DIAG_HPP
#define XOVA_DIAG_HPP

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "xova/trainer.hpp"

namespace xova {

/// Comparison of several training runs on the same dataset.
struct DiagSummary {
  struct BucketStats {
    std::size_t labels = 0;
    double mean_wall_ms = 0.0;
    double mean_outer_iters = 0.0;
    double mean_hvp_touches = 0.0;
  };

  std::vector<std::string> methods;
  std::vector<std::vector<double>> active_fraction;  // [method][iteration]
  std::vector<std::size_t> bucket_edges;             // 0, 1, 2, 4, ...; bucket b is [edge b, edge b+1)
  std::vector<std::vector<BucketStats>> buckets;     // [method][bucket]
};

/// Edges 0, 1, 2, 4, ... with the last edge strictly above max_positives.
inline std::vector<std::size_t> positive_bucket_edges(std::size_t max_positives) {
  std::vector<std::size_t> edges{0, 1};
  while (edges.back() <= max_positives) edges.push_back(edges.back() * 2);
  return edges;
}

inline std::size_t bucket_of(const std::vector<std::size_t>& edges, std::size_t positives) {
  std::size_t b = 0;
  while (b + 2 < edges.size() && positives >= edges[b + 1]) ++b;
  return b;
}

inline DiagSummary summarize_reports(const std::vector<TrainReport>& reports) {
  if (reports.empty()) throw ConfigError("no reports to summarize");
  const auto& ref = reports.front();
  for (const auto& r : reports) {
    if (r.dataset_digest != ref.dataset_digest || r.n_instances != ref.n_instances || r.dim != ref.dim ||
        r.n_labels != ref.n_labels)
      throw InvalidState("incompatible reports: '" + r.init + "' was trained on a different dataset than '" +
                         ref.init + "'");
  }

  DiagSummary s;
  std::size_t max_pos = 0;
  for (const auto& r : reports)
    for (const auto& l : r.labels) max_pos = std::max(max_pos, l.positives);
  s.bucket_edges = positive_bucket_edges(max_pos);
  const std::size_t n_buckets = s.bucket_edges.size() - 1;

  for (std::size_t m = 0; m < reports.size(); ++m) {
    const auto& r = reports[m];
    std::string name = r.init;
    for (std::size_t dup = 2; std::find(s.methods.begin(), s.methods.end(), name) != s.methods.end(); ++dup)
      name = r.init + "#" + std::to_string(dup);
    s.methods.push_back(name);
    s.active_fraction.push_back(mean_active_fraction(r.labels));

    std::vector<DiagSummary::BucketStats> b(n_buckets);
    for (const auto& l : r.labels) {
      auto& bs = b[bucket_of(s.bucket_edges, l.positives)];
      ++bs.labels;
      bs.mean_wall_ms += l.wall_ms;
      bs.mean_outer_iters += static_cast<double>(l.trace.outer_iterations);
      bs.mean_hvp_touches += static_cast<double>(l.trace.hvp_touches);
    }
    for (auto& bs : b) {
      if (bs.labels == 0) continue;
      const double inv = 1.0 / static_cast<double>(bs.labels);
      bs.mean_wall_ms *= inv;
      bs.mean_outer_iters *= inv;
      bs.mean_hvp_touches *= inv;
    }
    s.buckets.push_back(std::move(b));
  }
  return s;
}

/// `iteration,<method>...`; empty cell where a method had no label left running.
inline void write_active_csv(std::ostream& out, const DiagSummary& s) {
  out << "iteration";
  for (const auto& m : s.methods) out << ',' << m;
  out << '\n';
  std::size_t rows = 0;
  for (const auto& a : s.active_fraction) rows = std::max(rows, a.size());
  char buf[40];
  for (std::size_t k = 0; k < rows; ++k) {
    out << k;
    for (const auto& a : s.active_fraction) {
      out << ',';
      if (k < a.size()) {
        std::snprintf(buf, sizeof buf, "%.10g", a[k]);
        out << buf;
      }
    }
    out << '\n';
  }
}

inline void write_bucket_csv(std::ostream& out, const DiagSummary& s) {
  out << "bucket_lo,bucket_hi,method,labels,mean_wall_ms,mean_outer_iters,mean_hvp_touches\n";
  char buf[160];
  for (std::size_t b = 0; b + 1 < s.bucket_edges.size(); ++b) {
    for (std::size_t m = 0; m < s.methods.size(); ++m) {
      const auto& bs = s.buckets[m][b];
      std::snprintf(buf, sizeof buf, "%zu,%zu,", s.bucket_edges[b], s.bucket_edges[b + 1]);
      out << buf << s.methods[m];
      std::snprintf(buf, sizeof buf, ",%zu,%.6f,%.6f,%.6f\n", bs.labels, bs.mean_wall_ms, bs.mean_outer_iters,
                    bs.mean_hvp_touches);
      out << buf;
    }
  }
}

} // namespace xova

#endif // XOVA_DIAG_HPP
