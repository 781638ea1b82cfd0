#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "xova/metrics.hpp"
#include "xova/trainer.hpp"

namespace xova {
namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_xmc(in);
}

// label j scores feature j; identity model over d = l
OvaModel identity_model(std::size_t l) {
  OvaModel m;
  m.n_labels = l;
  m.dim = l;
  for (std::size_t j = 0; j < l; ++j) m.weights.push_back(SparseVector::from_pairs({{static_cast<index_t>(j), 1.0}}));
  return m;
}

TEST(PrecisionAtK, Examples) {
  const auto m = identity_model(3);
  EXPECT_DOUBLE_EQ(precision_at_k(m, parse("1 3 3\n1 1:1\n"), {1}).at(1), 1.0);
  EXPECT_DOUBLE_EQ(precision_at_k(m, parse("1 3 3\n 1:1\n"), {1, 2}).at(1), 0.0);
  const auto two = parse("2 3 3\n1 1:1\n0 2:1\n");
  EXPECT_DOUBLE_EQ(precision_at_k(m, two, {1}).at(1), 0.5);
  // k list order and duplicates do not matter
  EXPECT_EQ(precision_at_k(m, two, {3, 1, 3}), precision_at_k(m, two, {1, 3}));
  EXPECT_THROW(precision_at_k(m, two, {4}), ConfigError);
  EXPECT_THROW(precision_at_k(m, two, {0}), ConfigError);
  EXPECT_THROW(precision_at_k(identity_model(2), two, {1}), DimensionMismatch);
}

struct Trained {
  OvaModel model;
  Dataset test;
};

const Trained& trained() {
  static const Trained t = [] {
    SyntheticOptions o;
    o.n = 600;
    o.d = 50;
    o.l = 20;
    o.seed = 13;
    const auto ds = augment_bias(generate_synthetic(o));
    const auto st = compute_label_stats(ds);
    return Trained{train_ova(ds, st, TrainConfig{}).model, augment_bias(generate_synthetic_test(o, 200))};
  }();
  return t;
}

TEST(PrecisionAtKProperties, CumulativeHitsMonotone) {
  const auto& t = trained();
  const auto p = precision_at_k(t.model, t.test, {1, 2, 3, 4, 5, 10, 20});
  double prev = 0.0;
  for (const auto& [k, v] : p) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_GE(static_cast<double>(k) * v, prev - 1e-12);
    prev = static_cast<double>(k) * v;
  }
}

TEST(PrecisionAtKProperties, FullSortOracle) {
  const auto& t = trained();
  const std::vector<std::size_t> ks{1, 3, 5};
  const auto got = precision_at_k(t.model, t.test, ks);
  for (auto k : ks) {
    double hits = 0.0;
    for (std::size_t i = 0; i < t.test.n_instances(); ++i) {
      const auto s = predict_scores(t.model, t.test.features.row(i));
      std::vector<label_t> order(s.size());
      for (std::size_t j = 0; j < s.size(); ++j) order[j] = static_cast<label_t>(j);
      std::stable_sort(order.begin(), order.end(), [&](label_t a, label_t b) { return s[a] > s[b]; });
      const auto& rel = t.test.labels[i];
      for (std::size_t r = 0; r < k; ++r) hits += std::count(rel.begin(), rel.end(), order[r]);
    }
    EXPECT_NEAR(got.at(k), hits / (static_cast<double>(k) * static_cast<double>(t.test.n_instances())), 1e-15);
  }
}

Dataset permuted(const Dataset& ds, std::mt19937_64& rng) {
  std::vector<std::size_t> order(ds.n_instances());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  Dataset out;
  SparseMatrixBuilder b(ds.dim());
  for (auto i : order) {
    b.add_row(ds.features.row(i));
    out.labels.push_back(ds.labels[i]);
  }
  out.features = std::move(b).build();
  out.n_labels = ds.n_labels;
  out.bias_index = ds.bias_index;
  return out;
}

TEST(MetricsProperties, PermutationInvariant) {
  const auto& t = trained();
  std::mt19937_64 rng(42);
  const auto a = evaluate(t.model, t.test, {1, 3, 5});
  for (int rep = 0; rep < 3; ++rep) {
    const auto b = evaluate(t.model, permuted(t.test, rng), {1, 3, 5});
    for (auto k : {1u, 3u, 5u}) EXPECT_NEAR(a.p_at.at(k), b.p_at.at(k), 1e-15);
    EXPECT_NEAR(a.macro_precision, b.macro_precision, 1e-12);
    EXPECT_NEAR(a.macro_recall, b.macro_recall, 1e-12);
  }
  EXPECT_GE(a.macro_precision, 0.0);
  EXPECT_LE(a.macro_precision, 1.0);
  EXPECT_GE(a.macro_recall, 0.0);
  EXPECT_LE(a.macro_recall, 1.0);
  EXPECT_EQ(a.n_test, t.test.n_instances());
}

TEST(MacroPr, Examples) {
  // label 0: perfect separator; label 1: never relevant, never predicted;
  // label 2: predicts everything, one true positive out of ten
  OvaModel m;
  m.n_labels = 3;
  m.dim = 2;
  m.weights = {SparseVector::from_pairs({{0, 1.0}}), SparseVector::from_pairs({{1, -1.0}}),
               SparseVector::from_pairs({{1, 1.0}})};
  std::string text = "10 2 3\n0,2 0:1 1:1\n";
  for (int i = 0; i < 9; ++i) text += " 1:1\n";
  const auto ds = parse(text);
  const auto [p, r] = macro_binary_pr(m, ds);
  EXPECT_DOUBLE_EQ(p, (1.0 + 0.1) / 2.0);
  EXPECT_DOUBLE_EQ(r, (1.0 + 1.0) / 2.0);
}

TEST(MacroPr, ZeroOverZeroAndEmpty) {
  OvaModel m;
  m.n_labels = 1;
  m.dim = 1;
  m.weights = {SparseVector::from_pairs({{0, -1.0}})};
  // relevant but never predicted: precision 0/0 -> 0, recall 0
  const auto [p, r] = macro_binary_pr(m, parse("2 1 1\n0 0:1\n0 0:1\n"));
  EXPECT_EQ(p, 0.0);
  EXPECT_EQ(r, 0.0);
  const auto e = evaluate(m, parse("0 1 1\n"), {1});
  EXPECT_EQ(e.n_test, 0u);
  EXPECT_EQ(e.p_at.at(1), 0.0);
  EXPECT_EQ(e.macro_precision, 0.0);
}

} // namespace
} // namespace xova
