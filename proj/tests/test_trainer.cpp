#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "xova/trainer.hpp"

namespace xova {
namespace {

struct Fixture {
  Dataset ds;
  LabelStats st;
};

const Fixture& small() {
  static const Fixture f = [] {
    Fixture x;
    x.ds = augment_bias(generate_synthetic(400, 40, 12, 1.2, 9));
    x.st = compute_label_stats(x.ds);
    return x;
  }();
  return f;
}

std::string model_text(const OvaModel& m) {
  std::ostringstream s;
  write_model(s, m);
  return s.str();
}

TEST(TrainOva, FinalObjectiveIndependentOfInit) {
  const auto& f = small();
  for (auto loss : {squared_hinge, logistic}) {
    for (label_t j : {0u, 3u, 11u}) {
      TrainConfig cfg;
      cfg.loss = loss;
      cfg.solver.eps_outer = 1e-4;
      cfg.label_subset = std::vector<label_t>{j};
      cfg.init = ZeroInit{};
      const auto z = train_ova(f.ds, f.st, cfg);
      cfg.init = AopInit{};
      const auto a = train_ova(f.ds, f.st, cfg);
      const double lz = z.report.labels[0].trace.final_loss, la = a.report.labels[0].trace.final_loss;
      EXPECT_NEAR(lz, la, 1e-3 * lz) << "label " << j;
    }
  }
}

TEST(TrainOva, ZeroClipKeepsSolverWeights) {
  const auto& f = small();
  TrainConfig cfg;
  cfg.clip_threshold = 0.0;
  cfg.label_subset = std::vector<label_t>{2};
  const auto r = train_ova(f.ds, f.st, cfg);
  const auto p = BinaryProblem::from_positives(f.ds.features, f.st.positives[2], squared_hinge);
  const auto pre = AopPrecompute::from_stats(f.st);
  const auto w0 = aop_init(f.st.pbar[2], f.st.positives[2].size(), pre, 1.0, -2.0);
  const auto sol = newton_cg(p, w0, cfg.solver, reference_gradient_norm(p));
  const auto& w = r.model.weights[2];
  std::size_t nz = 0;
  for (double v : sol.w) nz += v != 0.0;
  EXPECT_EQ(w.nnz(), nz);
  for (std::size_t k = 0; k < w.nnz(); ++k) EXPECT_EQ(w.values()[k], sol.w[w.indices()[k]]);
  // untouched labels stay empty
  EXPECT_EQ(r.model.weights[0].nnz(), 0u);
}

TEST(TrainOva, OptimalStartReportsZeroIterations) {
  // all-negative label: the bias-only OvA-Primal solution, solved tightly,
  // already satisfies the loose criterion
  const Dataset ds = [] {
    std::istringstream in("3 1 2\n1 0:1\n1 0:1\n1 0:1\n");
    return parse_xmc(in);
  }();
  const auto st = compute_label_stats(ds);
  TrainConfig cfg;
  cfg.init = OvaPrimalInit{1e-6};
  cfg.label_subset = std::vector<label_t>{0};
  const auto r = train_ova(ds, st, cfg);
  EXPECT_EQ(r.report.labels[0].positives, 0u);
  EXPECT_EQ(r.report.labels[0].trace.outer_iterations, 0u);
  EXPECT_EQ(r.report.labels[0].trace.termination, Termination::Converged);
}

TEST(TrainOva, ThreadCountDoesNotChangeModel) {
  const auto& f = small();
  for (const InitStrategy& init : std::vector<InitStrategy>{ZeroInit{}, BiasInit{2.0}, OvaPrimalInit{}, AopInit{}}) {
    TrainConfig cfg;
    cfg.init = init;
    cfg.threads = 1;
    const auto a = train_ova(f.ds, f.st, cfg);
    cfg.threads = 8;
    const auto b = train_ova(f.ds, f.st, cfg);
    EXPECT_EQ(model_text(a.model), model_text(b.model)) << describe(init, cfg.loss);
    ASSERT_EQ(a.report.labels.size(), b.report.labels.size());
    for (std::size_t k = 0; k < a.report.labels.size(); ++k) {
      EXPECT_EQ(a.report.labels[k].label, b.report.labels[k].label);
      EXPECT_EQ(a.report.labels[k].trace.hvp_touches, b.report.labels[k].trace.hvp_touches);
    }
  }
}

TEST(TrainOva, ClippingBoundsScoreDrift) {
  const auto& f = small();
  TrainConfig cfg;
  cfg.clip_threshold = 0.0;
  const auto full = train_ova(f.ds, f.st, cfg);
  cfg.clip_threshold = 0.05;
  const auto clipped = train_ova(f.ds, f.st, cfg);
  for (const auto& w : clipped.model.weights)
    for (double v : w.values()) EXPECT_GE(std::abs(v), 0.05);
  for (std::size_t i = 0; i < f.ds.n_instances(); i += 7) {
    const auto x = f.ds.features.row(i);
    double xmax = 0.0;
    for (double v : x.values) xmax = std::max(xmax, std::abs(v));
    const auto s1 = predict_scores(full.model, x), s2 = predict_scores(clipped.model, x);
    for (std::size_t j = 0; j < s1.size(); ++j)
      EXPECT_LE(std::abs(s1[j] - s2[j]), 0.05 * static_cast<double>(x.nnz()) * std::max(1.0, xmax) + 1e-12);
  }
}

TEST(TrainOva, ReportConsistency) {
  const auto& f = small();
  TrainConfig cfg;
  cfg.threads = 3;
  const auto r = train_ova(f.ds, f.st, cfg);
  const auto& rep = r.report;
  ASSERT_EQ(rep.labels.size(), f.ds.n_labels);
  EXPECT_EQ(rep.failed_labels(), 0u);
  std::uint64_t total = 0;
  double max_label_ms = 0.0;
  for (const auto& l : rep.labels) {
    std::uint64_t touches = 0;
    for (const auto& it : l.trace.iterations) {
      EXPECT_EQ(it.hvp_touches, static_cast<std::uint64_t>(it.active) * it.cg_iterations);
      touches += it.hvp_touches;
    }
    EXPECT_EQ(touches, l.trace.hvp_touches);
    EXPECT_EQ(l.positives, f.st.positives[l.label].size());
    EXPECT_GE(l.wall_ms, l.trace.wall_ms);
    total += touches;
    max_label_ms = std::max(max_label_ms, l.wall_ms);
  }
  EXPECT_EQ(total, rep.total_hvp_touches);
  EXPECT_GE(rep.total_wall_ms, max_label_ms);
  EXPECT_EQ(rep.init, "aop:s=1:t=-2");
  EXPECT_EQ(rep.dataset_digest, dataset_digest(f.ds));
  EXPECT_EQ(r.model.init, rep.init);
  EXPECT_EQ(r.model.config_digest, config_digest(cfg));
  EXPECT_FALSE(rep.mean_active_fraction.empty());
  for (double a : rep.mean_active_fraction) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(TrainOva, ConfigErrors) {
  auto raw = generate_synthetic(100, 10, 4, 1.0, 1);
  const auto st_raw = compute_label_stats(raw);
  TrainConfig cfg;
  cfg.init = BiasInit{};
  EXPECT_THROW(train_ova(raw, st_raw, cfg), ConfigError);
  cfg = {};
  cfg.clip_threshold = -1.0;
  EXPECT_THROW(train_ova(raw, st_raw, cfg), ConfigError);
  cfg = {};
  cfg.label_subset = std::vector<label_t>{4};
  EXPECT_THROW(train_ova(raw, st_raw, cfg), ConfigError);
  const auto aug = augment_bias(raw);
  cfg = {};
  EXPECT_THROW(train_ova(aug, st_raw, cfg), InvalidState);
  cfg.init = AopInit{-1.0, 0.0};
  const auto st = compute_label_stats(aug);
  const auto r = train_ova(aug, st, cfg);
  EXPECT_EQ(r.report.warnings.size(), 1u);
}

TEST(ConfigDigest, SensitiveToSettings) {
  TrainConfig a, b;
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.solver.eps_outer = 1e-4;
  EXPECT_NE(config_digest(a), config_digest(b));
  b = a;
  b.threads = 7;  // does not affect weights
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.init = ZeroInit{};
  EXPECT_NE(config_digest(a), config_digest(b));
}

OvaModel hand_model() {
  OvaModel m;
  m.n_labels = 3;
  m.dim = 4;
  m.bias_index = 3;
  m.weights = {SparseVector::from_pairs({{3, -2.0}}), SparseVector{},
               SparseVector::from_pairs({{0, 0.125}, {2, 1.0 / 3.0}})};
  m.loss = logistic;
  m.init = "aop:s=1:t=-3";
  m.config_digest = "00ff";
  return m;
}

TEST(PredictScores, Examples) {
  const auto m = hand_model();
  const auto bias_only = SparseVector::from_pairs({{3, 1.0}});
  EXPECT_EQ(predict_scores(m, bias_only.view()), (std::vector<double>{-2.0, 0.0, 0.0}));
  const auto x = SparseVector::from_pairs({{0, 2.0}, {2, 3.0}, {3, 1.0}});
  const auto xz = SparseVector::from_pairs({{0, 2.0}, {1, 0.0}, {2, 3.0}, {3, 1.0}});
  EXPECT_EQ(predict_scores(m, x.view()), predict_scores(m, xz.view()));
  EXPECT_EQ(Predictor(m).scores(x.view()), predict_scores(m, x.view()));
  OvaModel z = m;
  for (auto& w : z.weights) w = SparseVector{};
  EXPECT_EQ(predict_scores(z, x.view()), std::vector<double>(3, 0.0));
  const auto far = SparseVector::from_pairs({{4, 1.0}});
  EXPECT_THROW(predict_scores(m, far.view()), DimensionMismatch);
}

TEST(TopK, Examples) {
  const std::vector<double> s{0.1, 0.9, 0.5};
  EXPECT_EQ(top_k(s, 2), (std::vector<ScoredLabel>{{1, 0.9}, {2, 0.5}}));
  const std::vector<double> eq{0.3, 0.3, 0.3};
  EXPECT_EQ(top_k(eq, 2), (std::vector<ScoredLabel>{{0, 0.3}, {1, 0.3}}));
  EXPECT_EQ(top_k(s, 3), (std::vector<ScoredLabel>{{1, 0.9}, {2, 0.5}, {0, 0.1}}));
  EXPECT_THROW(top_k(s, 0), ConfigError);
  EXPECT_THROW(top_k(s, 4), ConfigError);
}

TEST(TopK, MatchesFullSort) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> v(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + rng() % 30);
    for (auto& x : s) x = v(rng) * 0.25;
    std::vector<ScoredLabel> all;
    for (std::size_t j = 0; j < s.size(); ++j) all.emplace_back(static_cast<label_t>(j), s[j]);
    std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.second > b.second; });
    const std::size_t k = 1 + rng() % s.size();
    const auto got = top_k(s, k);
    EXPECT_EQ(got, std::vector<ScoredLabel>(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k)));
  }
}

TEST(ModelIo, RoundTrip) {
  const auto m = hand_model();
  const auto text = model_text(m);
  EXPECT_EQ(text.substr(0, text.find('\n')), "xova v1 3 4 3 logistic aop:s=1:t=-3 00ff");
  EXPECT_NE(text.find("\n1 0\n"), std::string::npos);
  std::istringstream in(text);
  EXPECT_EQ(read_model(in), m);

  auto trained = train_ova(small().ds, small().st, TrainConfig{}).model;
  std::istringstream in2(model_text(trained));
  const auto back = read_model(in2);
  EXPECT_EQ(back, trained);
  EXPECT_EQ(model_text(back), model_text(trained));
}

TEST(ModelIo, SevenTokenHeaderAndNoBias) {
  std::istringstream in("xova v1 2 3 - squared-hinge zero\n0 0\n1 1 2:0.5\n");
  const auto m = read_model(in);
  EXPECT_FALSE(m.bias_index);
  EXPECT_TRUE(m.config_digest.empty());
  EXPECT_EQ(m.weights[1], SparseVector::from_pairs({{2, 0.5}}));
}

int error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    read_model(in);
  } catch (const ParseError& e) {
    return static_cast<int>(e.line());
  }
  return -1;
}

TEST(ModelIo, Errors) {
  EXPECT_EQ(error_line("xova v2 1 3 - squared-hinge zero\n0 0\n"), 1);
  EXPECT_EQ(error_line("xova v1 2 3 - squared-hinge zero\n0 0\n"), 3);
  EXPECT_EQ(error_line("xova v1 2 3 - squared-hinge zero\n0 0\n1 2 0:1\n"), 3);
  EXPECT_EQ(error_line("xova v1 1 3 - squared-hinge zero\n0 1 3:1\n"), 2);
  EXPECT_EQ(error_line("xova v1 1 3 - squared-hinge zero\n0 2 1:1 0:1\n"), 2);
  EXPECT_EQ(error_line("xova v1 1 3 - squared-hinge zero\n0 1 1:x\n"), 2);
  EXPECT_EQ(error_line("xova v1 1 3 - hinge zero\n0 0\n"), 1);
  EXPECT_EQ(error_line("xova v1 1 3 - squared-hinge zero\n0 0\n\nextra\n"), 4);
  EXPECT_EQ(error_line(""), 1);
  EXPECT_THROW(load_model("/nonexistent/model.txt"), IoError);
}

TEST(ClipWeights, Rule) {
  const std::vector<double> w{0.0, 0.009, -0.01, 0.5, -0.0099};
  const auto c = clip_weights(w, 0.01);
  EXPECT_EQ(c, SparseVector::from_pairs({{2, -0.01}, {3, 0.5}}));
  const auto all = clip_weights(w, 0.0);
  EXPECT_EQ(all.nnz(), 4u);
}

} // namespace
} // namespace xova
