#ifndef XOVA_TRAINER_HPP
#define XOVA_TRAINER_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "xova/dataio.hpp"
#include "xova/init.hpp"
#include "xova/model.hpp"
#include "xova/solver.hpp"

namespace xova {

struct TrainConfig {
  MarginLoss loss = squared_hinge;
  InitStrategy init = AopInit{};
  SolverConfig solver;
  double c = 1.0;
  double clip_threshold = 0.01;  // |w| below this is dropped after training
  std::size_t threads = 1;
  std::optional<std::vector<label_t>> label_subset;
};

struct LabelReport {
  label_t label = 0;
  std::size_t positives = 0;
  double init_ms = 0.0;
  double wall_ms = 0.0;  // init + solve
  SolverTrace trace;
  std::string error;  // set when the solve failed
};

struct TrainReport {
  std::size_t n_instances = 0;
  std::size_t dim = 0;
  std::size_t n_labels = 0;
  std::uint64_t dataset_digest = 0;
  std::string loss;
  std::string init;
  std::string config_digest;
  std::size_t threads = 1;
  double total_wall_ms = 0.0;
  std::uint64_t total_hvp_touches = 0;
  std::vector<double> mean_active_fraction;  // per outer iteration, over labels still running
  std::optional<SolverTrace> ovap_trace;
  std::vector<LabelReport> labels;
  std::vector<std::string> warnings;

  std::size_t failed_labels() const {
    return static_cast<std::size_t>(
        std::count_if(labels.begin(), labels.end(), [](const auto& l) { return !l.error.empty(); }));
  }
};

struct TrainResult {
  OvaModel model;
  TrainReport report;
};

/// Hex FNV-1a of every setting that influences the trained weights.
inline std::string config_digest(const TrainConfig& cfg) {
  const auto& s = cfg.solver;
  std::string canon = to_string(cfg.loss) + '|' + describe(cfg.init, cfg.loss);
  for (double v : {s.eps_outer, s.eps_cg, s.precond_alpha, s.ls_beta, s.ls_eta, cfg.c, cfg.clip_threshold})
    canon += '|' + detail::short_double(v);
  for (std::size_t v : {s.ls_max_steps, s.max_outer, s.max_cg}) canon += '|' + std::to_string(v);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Drops entries with |w| < threshold (zeros always).
inline SparseVector clip_weights(std::span<const double> w, double threshold) {
  std::vector<index_t> idx;
  std::vector<double> val;
  for (std::size_t f = 0; f < w.size(); ++f) {
    if (w[f] != 0.0 && std::abs(w[f]) >= threshold) {
      idx.push_back(static_cast<index_t>(f));
      val.push_back(w[f]);
    }
  }
  return SparseVector(std::move(idx), std::move(val));
}

/// Mean active fraction at every outer iteration, averaged over the labels
/// that reached that iteration.
inline std::vector<double> mean_active_fraction(const std::vector<LabelReport>& labels) {
  std::vector<double> sum;
  std::vector<std::size_t> cnt;
  for (const auto& l : labels) {
    const auto& its = l.trace.iterations;
    if (its.size() > sum.size()) {
      sum.resize(its.size(), 0.0);
      cnt.resize(its.size(), 0);
    }
    for (std::size_t k = 0; k < its.size(); ++k) {
      sum[k] += its[k].active_fraction;
      ++cnt[k];
    }
  }
  for (std::size_t k = 0; k < sum.size(); ++k) sum[k] /= static_cast<double>(cnt[k]);
  return sum;
}

/// One-vs-all training over every label (or cfg.label_subset).
/// Labels are independent, so results do not depend on the thread count.
inline TrainResult train_ova(const Dataset& ds, const LabelStats& stats, const TrainConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  cfg.solver.validate();
  if (!(cfg.clip_threshold >= 0.0)) throw ConfigError("clip threshold must be >= 0");
  if (ds.n_instances() == 0) throw ConfigError("training set is empty");
  if (stats.n != ds.n_instances() || stats.positives.size() != ds.n_labels || stats.xbar.size() != ds.dim())
    throw InvalidState("label statistics do not match the dataset");
  if (std::holds_alternative<BiasInit>(cfg.init) && !ds.bias_index)
    throw ConfigError("bias initialization needs a bias feature; the dataset is not augmented");

  std::vector<label_t> todo;
  if (cfg.label_subset) {
    todo = *cfg.label_subset;
    for (auto j : todo)
      if (j >= ds.n_labels) throw ConfigError("label " + std::to_string(j) + " out of range");
  } else {
    todo.resize(ds.n_labels);
    for (std::size_t j = 0; j < ds.n_labels; ++j) todo[j] = static_cast<label_t>(j);
  }

  TrainResult res;
  auto& rep = res.report;
  rep.n_instances = ds.n_instances();
  rep.dim = ds.dim();
  rep.n_labels = ds.n_labels;
  rep.dataset_digest = dataset_digest(ds);
  rep.loss = to_string(cfg.loss);
  rep.init = describe(cfg.init, cfg.loss);
  rep.config_digest = config_digest(cfg);
  rep.threads = std::max<std::size_t>(1, cfg.threads);

  std::optional<DenseVector> shared_w0;
  if (const auto* ov = std::get_if<OvaPrimalInit>(&cfg.init)) {
    const auto neg = BinaryProblem::all_negative(ds.features, cfg.loss, cfg.c);
    auto sol = ovap_solve(neg, cfg.solver, ov->stop_rel);
    shared_w0 = std::move(sol.w);
    rep.ovap_trace = std::move(sol.trace);
  }
  std::optional<AopParams> aop;
  if (const auto* a = std::get_if<AopInit>(&cfg.init)) {
    aop = resolve_aop(*a, cfg.loss);
    if (!(aop->s > aop->t))
      rep.warnings.push_back("aop: s=" + detail::short_double(aop->s) + " is not greater than t=" +
                             detail::short_double(aop->t));
  }
  const auto pre = AopPrecompute::from_stats(stats);

  auto initial_weights = [&](label_t j) -> DenseVector {
    return std::visit(
        [&](const auto& v) -> DenseVector {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, ZeroInit>) {
            return zero_init(ds.dim());
          } else if constexpr (std::is_same_v<T, BiasInit>) {
            return bias_init(ds.dim(), ds.bias_index, v.scale);
          } else if constexpr (std::is_same_v<T, OvaPrimalInit>) {
            return *shared_w0;
          } else {
            return aop_init(stats.pbar[j], stats.positives[j].size(), pre, aop->s, aop->t);
          }
        },
        cfg.init);
  };

  auto& model = res.model;
  model.n_labels = ds.n_labels;
  model.dim = ds.dim();
  model.bias_index = ds.bias_index;
  model.weights.assign(ds.n_labels, SparseVector{});
  model.loss = cfg.loss;
  model.init = rep.init;
  model.config_digest = rep.config_digest;
  rep.labels.resize(todo.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mu;
  auto worker = [&] {
    NewtonCg solver(cfg.solver);
    for (;;) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= todo.size()) return;
      const label_t j = todo[slot];
      auto& lr = rep.labels[slot];
      lr.label = j;
      lr.positives = stats.positives[j].size();
      try {
        const auto t_label = clock::now();
        const auto problem = BinaryProblem::from_positives(ds.features, stats.positives[j], cfg.loss, cfg.c);
        const double grad0 = reference_gradient_norm(problem);
        auto w0 = initial_weights(j);
        lr.init_ms = std::chrono::duration<double, std::milli>(clock::now() - t_label).count();
        try {
          auto sol = solver.minimize(problem, std::move(w0), grad0);
          model.weights[j] = clip_weights(sol.w, cfg.clip_threshold);
          lr.trace = std::move(sol.trace);
        } catch (const NumericalFailure& e) {
          lr.error = e.what();
          lr.trace.termination = Termination::NumericalFailure;
        }
        lr.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t_label).count();
      } catch (...) {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        next = todo.size();
        return;
      }
    }
  };

  const std::size_t n_threads = std::min(rep.threads, std::max<std::size_t>(1, todo.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  for (const auto& lr : rep.labels) rep.total_hvp_touches += lr.trace.hvp_touches;
  rep.mean_active_fraction = mean_active_fraction(rep.labels);
  rep.total_wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  return res;
}

} // namespace xova

#endif // XOVA_TRAINER_HPP
