#include <random>

#include <gtest/gtest.h>

#include "xova/sparse.hpp"

namespace xova {
namespace {

TEST(SparseDot, ExpandsStoredEntries) {
  const SparseVector v({0, 2}, {1.0, 2.0});
  const DenseVector w{1.0, 5.0, 3.0};
  EXPECT_DOUBLE_EQ(dot(v.view(), w.span()), 7.0);
  EXPECT_DOUBLE_EQ(dot(SparseVector{}.view(), w.span()), 0.0);
  EXPECT_DOUBLE_EQ(dot(SparseVector({1}, {-1.5}).view(), DenseVector{0.0, 2.0, 0.0}.span()), -3.0);
}

TEST(SparseDot, RejectsOutOfRangeIndex) {
  const SparseVector v({0, 3}, {1.0, 1.0});
  const DenseVector w(3);
  EXPECT_THROW(dot(v.view(), w.span()), DimensionMismatch);
  DenseVector acc(3);
  EXPECT_THROW(axpy(1.0, v, acc), DimensionMismatch);
}

TEST(SparseAxpy, UpdatesOnlyStoredCoordinates) {
  DenseVector w(2);
  axpy(2.0, SparseVector({0}, {1.0}), w);
  EXPECT_EQ(w, (DenseVector{2.0, 0.0}));

  DenseVector u{1.0, 1.0};
  axpy(-1.0, SparseVector({1}, {3.0}), u);
  EXPECT_EQ(u, (DenseVector{1.0, -2.0}));

  DenseVector z{4.0, 5.0};
  axpy(0.0, SparseVector({0, 1}, {7.0, 9.0}), z);
  EXPECT_EQ(z, (DenseVector{4.0, 5.0}));
}

TEST(DenseOps, StandardContracts) {
  EXPECT_DOUBLE_EQ(norm2(DenseVector{3.0, 4.0}), 5.0);
  EXPECT_DOUBLE_EQ(dot(DenseVector{1.0, 2.0}.span(), DenseVector{2.0, 1.0}.span()), 4.0);
  EXPECT_EQ(add_scaled(DenseVector{1.0, 0.0}, 0.5, DenseVector{0.0, 2.0}), (DenseVector{1.0, 1.0}));
  DenseVector s{1.0, -2.0};
  scale(s, 3.0);
  EXPECT_EQ(s, (DenseVector{3.0, -6.0}));
  EXPECT_THROW(dot(DenseVector(2).span(), DenseVector(3).span()), DimensionMismatch);
}

TEST(SparseVectorInvariants, RejectsDuplicatesAndDisorder) {
  EXPECT_THROW(SparseVector({1, 1}, {1.0, 2.0}), InvalidState);
  EXPECT_THROW(SparseVector({2, 1}, {1.0, 2.0}), InvalidState);
  EXPECT_THROW(SparseVector({1}, {1.0, 2.0}), DimensionMismatch);
  EXPECT_THROW(SparseVector::from_pairs({{3, 1.0}, {3, 2.0}}), InvalidState);
  const auto v = SparseVector::from_pairs({{4, 1.0}, {0, 2.0}});
  EXPECT_EQ(v.indices(), (std::vector<index_t>{0, 4}));
  // explicit zeros are allowed
  EXPECT_NO_THROW(SparseVector({0, 1}, {0.0, 1.0}));
}

TEST(SparseMatrixInvariants, ValidatesLayout) {
  EXPECT_THROW(SparseMatrix(2, {0, 2, 1}, {0, 1}, {1.0, 1.0}), InvalidState);
  EXPECT_THROW(SparseMatrix(2, {0, 1}, {2}, {1.0}), DimensionMismatch);
  EXPECT_THROW(SparseMatrix(3, {0, 2}, {1, 1}, {1.0, 1.0}), InvalidState);
  const SparseMatrix m(3, {0, 2, 2, 3}, {0, 2, 1}, {1.0, 2.0, 3.0});
  EXPECT_EQ(m.n_rows(), 3u);
  EXPECT_EQ(m.row(1).nnz(), 0u);
  EXPECT_EQ(m.row(2).indices[0], 1u);
}

SparseVector random_sparse(std::mt19937_64& rng, std::size_t d) {
  std::uniform_real_distribution<double> u(-3.0, 3.0), coin(0.0, 1.0);
  std::vector<index_t> idx;
  std::vector<double> val;
  for (std::size_t j = 0; j < d; ++j)
    if (coin(rng) < 0.4) {
      idx.push_back(static_cast<index_t>(j));
      val.push_back(u(rng));
    }
  return SparseVector(idx, val);
}

TEST(SparseProperties, DotIsLinearInTheSparseArgument) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng() % 30;
    const auto v = random_sparse(rng, d);
    DenseVector w(d);
    for (auto& x : w) x = u(rng);
    const double a = u(rng);
    std::vector<double> scaled = v.values();
    for (auto& x : scaled) x *= a;
    const SparseVector av(v.indices(), scaled);
    const double lhs = dot(av.view(), w.span());
    const double rhs = a * dot(v.view(), w.span());
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST(SparseProperties, AxpyThenNegatedAxpyRestores) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng() % 30;
    const auto v = random_sparse(rng, d);
    DenseVector w(d);
    for (auto& x : w) x = u(rng);
    const DenseVector orig = w;
    const double a = u(rng);
    axpy(a, v, w);
    axpy(-a, v, w);
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(w[j], orig[j], 1e-12 * (1.0 + std::abs(orig[j])) * 10);
  }
}

TEST(SparseSparseDot, MergesIndexLists) {
  const SparseVector a({0, 3, 5}, {1.0, 2.0, 3.0});
  const SparseVector b({3, 4, 5}, {10.0, 20.0, 30.0});
  EXPECT_DOUBLE_EQ(dot(a.view(), b.view()), 2.0 * 10.0 + 3.0 * 30.0);
}

} // namespace
} // namespace xova
