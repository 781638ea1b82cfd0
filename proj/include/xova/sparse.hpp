#ifndef XOVA_SPARSE_HPP
#define XOVA_SPARSE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xova/error.hpp"

namespace xova {

using index_t = std::uint32_t;

/// Non-owning view of a sparse vector: parallel index/value arrays.
struct SparseView {
  std::span<const index_t> indices;
  std::span<const double> values;

  std::size_t nnz() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
};

/// Sparse vector with strictly increasing indices. Explicit zeros are allowed.
class SparseVector {
 public:
  SparseVector() = default;

  SparseVector(std::vector<index_t> indices, std::vector<double> values)
      : indices_(std::move(indices)), values_(std::move(values)) {
    if (indices_.size() != values_.size())
      throw DimensionMismatch("sparse vector: " + std::to_string(indices_.size()) +
                              " indices but " + std::to_string(values_.size()) + " values");
    for (std::size_t k = 1; k < indices_.size(); ++k) {
      if (indices_[k] == indices_[k - 1])
        throw InvalidState("sparse vector: duplicate index " + std::to_string(indices_[k]));
      if (indices_[k] < indices_[k - 1])
        throw InvalidState("sparse vector: indices not increasing at position " +
                           std::to_string(k));
    }
  }

  /// Builds from (index, value) pairs in any order; duplicates are rejected.
  static SparseVector from_pairs(std::vector<std::pair<index_t, double>> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<index_t> idx;
    std::vector<double> val;
    idx.reserve(entries.size());
    val.reserve(entries.size());
    for (const auto& [i, v] : entries) {
      idx.push_back(i);
      val.push_back(v);
    }
    return SparseVector(std::move(idx), std::move(val));
  }

  std::size_t nnz() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  const std::vector<index_t>& indices() const noexcept { return indices_; }
  const std::vector<double>& values() const noexcept { return values_; }

  SparseView view() const noexcept { return {indices_, values_}; }
  operator SparseView() const noexcept { return view(); }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  std::vector<index_t> indices_;
  std::vector<double> values_;
};

/// Fixed-length dense vector of doubles. Single owner, mutable.
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  DenseVector(std::initializer_list<double> init) : values_(init) {}
  explicit DenseVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  operator std::span<double>() noexcept { return values_; }
  operator std::span<const double>() const noexcept { return values_; }

  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const DenseVector&, const DenseVector&) = default;

 private:
  std::vector<double> values_;
};

/// Row-compressed (CSR) matrix. Immutable once built; shared read-only.
class SparseMatrix {
 public:
  SparseMatrix() : offsets_{0} {}

  SparseMatrix(std::size_t n_cols, std::vector<std::size_t> offsets,
               std::vector<index_t> columns, std::vector<double> values)
      : n_cols_(n_cols),
        offsets_(std::move(offsets)),
        columns_(std::move(columns)),
        values_(std::move(values)) {
    if (offsets_.empty() || offsets_.front() != 0)
      throw InvalidState("csr: offsets must start at 0");
    if (offsets_.back() != columns_.size() || columns_.size() != values_.size())
      throw InvalidState("csr: final offset does not match the number of nonzeros");
    for (std::size_t r = 0; r + 1 < offsets_.size(); ++r) {
      if (offsets_[r + 1] < offsets_[r]) throw InvalidState("csr: offsets decrease at row " + std::to_string(r));
      for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
        if (columns_[k] >= n_cols_)
          throw DimensionMismatch("csr: column " + std::to_string(columns_[k]) + " >= " +
                                  std::to_string(n_cols_) + " in row " + std::to_string(r));
        if (k > offsets_[r] && columns_[k] <= columns_[k - 1])
          throw InvalidState("csr: columns not strictly increasing in row " + std::to_string(r));
      }
    }
  }

  std::size_t n_rows() const noexcept { return offsets_.size() - 1; }
  std::size_t n_cols() const noexcept { return n_cols_; }
  std::size_t nnz() const noexcept { return columns_.size(); }

  SparseView row(std::size_t r) const noexcept {
    const auto b = offsets_[r], e = offsets_[r + 1];
    return {std::span<const index_t>(columns_).subspan(b, e - b),
            std::span<const double>(values_).subspan(b, e - b)};
  }

  const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
  const std::vector<index_t>& columns() const noexcept { return columns_; }
  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<index_t> columns_;
  std::vector<double> values_;
};

/// Appends rows one at a time; each row must already be sorted and duplicate-free.
class SparseMatrixBuilder {
 public:
  explicit SparseMatrixBuilder(std::size_t n_cols) : n_cols_(n_cols), offsets_{0} {}

  void add_row(SparseView row) {
    columns_.insert(columns_.end(), row.indices.begin(), row.indices.end());
    values_.insert(values_.end(), row.values.begin(), row.values.end());
    offsets_.push_back(columns_.size());
  }

  void reserve(std::size_t rows, std::size_t nnz) {
    offsets_.reserve(rows + 1);
    columns_.reserve(nnz);
    values_.reserve(nnz);
  }

  SparseMatrix build() && {
    return SparseMatrix(n_cols_, std::move(offsets_), std::move(columns_), std::move(values_));
  }

 private:
  std::size_t n_cols_;
  std::vector<std::size_t> offsets_;
  std::vector<index_t> columns_;
  std::vector<double> values_;
};

namespace detail {

inline void check_sparse_fits(SparseView v, std::size_t dim) {
  // indices are sorted, so the last one bounds them all
  if (!v.empty() && v.indices.back() >= dim)
    throw DimensionMismatch("sparse index " + std::to_string(v.indices.back()) +
                            " out of range for dimension " + std::to_string(dim));
}

inline void check_same_length(std::size_t a, std::size_t b) {
  if (a != b)
    throw DimensionMismatch("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

inline double dot_unchecked(SparseView v, const double* w) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < v.indices.size(); ++k) s += v.values[k] * w[v.indices[k]];
  return s;
}

inline void axpy_unchecked(double a, SparseView v, double* w) noexcept {
  for (std::size_t k = 0; k < v.indices.size(); ++k) w[v.indices[k]] += a * v.values[k];
}

} // namespace detail

/// Σ v[k]·w[idx[k]].
inline double dot(SparseView v, std::span<const double> w) {
  detail::check_sparse_fits(v, w.size());
  return detail::dot_unchecked(v, w.data());
}

/// w += a·v on the stored coordinates of v.
inline void axpy(double a, SparseView v, std::span<double> w) {
  detail::check_sparse_fits(v, w.size());
  detail::axpy_unchecked(a, v, w.data());
}

/// Dot product of two sparse vectors by merging their index lists.
inline double dot(SparseView a, SparseView b) noexcept {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.nnz() && j < b.nnz()) {
    if (a.indices[i] < b.indices[j]) {
      ++i;
    } else if (a.indices[i] > b.indices[j]) {
      ++j;
    } else {
      s += a.values[i++] * b.values[j++];
    }
  }
  return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  detail::check_same_length(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) noexcept {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

inline void scale(std::span<double> a, double factor) noexcept {
  for (double& x : a) x *= factor;
}

/// x += a·y
inline void add_scaled_inplace(std::span<double> x, double a, std::span<const double> y) {
  detail::check_same_length(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += a * y[i];
}

/// Returns x + a·y.
inline DenseVector add_scaled(const DenseVector& x, double a, const DenseVector& y) {
  DenseVector out = x;
  add_scaled_inplace(out, a, y);
  return out;
}

inline double squared_norm(SparseView v) noexcept {
  double s = 0.0;
  for (double x : v.values) s += x * x;
  return s;
}

} // namespace xova

#endif // XOVA_SPARSE_HPP
