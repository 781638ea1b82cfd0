#ifndef XOVA_INIT_HPP
#define XOVA_INIT_HPP

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <variant>

#include "xova/dataio.hpp"
#include "xova/solver.hpp"
#include "xova/sparse.hpp"

namespace xova {

struct ZeroInit {};

/// w0 = -scale at the bias feature.
struct BiasInit {
  double scale = 1.0;
};

/// Warm start from the solution of an all-negative virtual label, solved once
/// to the loose criterion ||grad|| <= stop_rel * ||grad at 0||.
struct OvaPrimalInit {
  double stop_rel = 0.01;
};

/// Average-of-positives: minimum-norm w0 with <w0, p̄> = s and <w0, n̄> = t.
/// Unset values take the per-loss defaults (see resolve_aop).
struct AopInit {
  std::optional<double> s;
  std::optional<double> t;
};

using InitStrategy = std::variant<ZeroInit, BiasInit, OvaPrimalInit, AopInit>;

struct AopParams {
  double s = 1.0;
  double t = -2.0;
};

/// s = 1 always; t = -2 for squared hinge, -3 for logistic.
inline AopParams resolve_aop(const AopInit& a, MarginLoss loss) {
  return {a.s.value_or(1.0), a.t.value_or(loss.kind == LossKind::Logistic ? -3.0 : -2.0)};
}

namespace detail {
inline std::string short_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
} // namespace detail

inline std::string init_kind(const InitStrategy& s) {
  static constexpr const char* names[] = {"zero", "bias", "ovap", "aop"};
  return names[s.index()];
}

/// Whitespace-free token naming the strategy and its resolved hyperparameters.
inline std::string describe(const InitStrategy& init, MarginLoss loss) {
  return std::visit(
      [&](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ZeroInit>) {
          return "zero";
        } else if constexpr (std::is_same_v<T, BiasInit>) {
          return "bias:scale=" + detail::short_double(v.scale);
        } else if constexpr (std::is_same_v<T, OvaPrimalInit>) {
          return "ovap:stop=" + detail::short_double(v.stop_rel);
        } else {
          const auto p = resolve_aop(v, loss);
          return "aop:s=" + detail::short_double(p.s) + ":t=" + detail::short_double(p.t);
        }
      },
      init);
}

inline DenseVector zero_init(std::size_t dim) {
  if (dim == 0) throw ConfigError("zero-dimensional weight vector");
  return DenseVector(dim);
}

inline DenseVector bias_init(std::size_t dim, std::optional<index_t> bias_index, double scale) {
  if (!bias_index) throw ConfigError("bias initialization needs a bias feature; the dataset is not augmented");
  if (*bias_index >= dim) throw DimensionMismatch("bias index out of range");
  if (!std::isfinite(scale)) throw ConfigError("bias scale must be finite");
  DenseVector w(dim);
  w[*bias_index] = -scale;
  return w;
}

/// Solves the all-negative problem from zero with eps_outer = stop_rel.
inline SolverResult ovap_solve(const BinaryProblem& all_negative, SolverConfig cfg, double stop_rel) {
  for (auto s : all_negative.signs())
    if (s != -1) throw InvalidState("OvA-Primal needs an all-negative problem");
  if (!(stop_rel > 0.0 && stop_rel < 1.0)) throw ConfigError("OvA-Primal stop_rel must be in (0, 1)");
  cfg.eps_outer = stop_rel;
  return newton_cg(all_negative, DenseVector(all_negative.dim()), cfg, reference_gradient_norm(all_negative));
}

inline DenseVector ovap_init(const BinaryProblem& all_negative, const SolverConfig& cfg, double stop_rel) {
  return ovap_solve(all_negative, cfg, stop_rel).w;
}

/// Dataset-wide quantities shared by every label's AOP vector.
struct AopPrecompute {
  DenseVector xbar;
  double xbar_sq = 0.0;
  std::size_t n = 0;

  static AopPrecompute from_stats(const LabelStats& st) { return {st.xbar, st.xbar_sq, st.n}; }
};

/// Which formula produced an AOP vector.
enum class AopBranch { Regular, Dependent, Orthogonal, NoPositives };

struct AopResult {
  DenseVector w;
  AopBranch branch = AopBranch::Regular;
};

inline AopResult aop_init_detailed(SparseView pbar, std::size_t p_count, const AopPrecompute& pre, double s,
                                   double t) {
  const std::size_t dim = pre.xbar.size();
  if (dim == 0) throw ConfigError("zero-dimensional AOP input");
  detail::check_sparse_fits(pbar, dim);
  const double n_all = static_cast<double>(pre.n);
  const double xx = pre.xbar_sq;

  if (p_count == 0) {
    // no positives: put the global mean at margin |t| on the negative side
    DenseVector w(dim);
    if (xx > 0.0) add_scaled_inplace(w, t / xx, pre.xbar);
    return {std::move(w), AopBranch::NoPositives};
  }

  const double pp = squared_norm(pbar);
  const double xp = dot(pbar, pre.xbar);
  const double denom = xp * xp - pp * xx;
  if (std::abs(denom) <= 1e-10 * pp * xx) return {DenseVector(dim), AopBranch::Dependent};

  const double n_pos = static_cast<double>(p_count);
  double u, v;
  AopBranch branch;
  if (std::abs(xp) <= 1e-12 * std::sqrt(xx) * std::sqrt(pp)) {
    u = s / pp;
    v = ((n_all - n_pos) * t + n_pos * s) / (n_all * xx);
    branch = AopBranch::Orthogonal;
  } else {
    const double alpha = n_pos / n_all;
    u = (xp * (t + (s - t) * alpha) - s * xx) / denom;
    v = (s - u * pp) / xp;
    branch = AopBranch::Regular;
  }
  DenseVector w(dim);
  add_scaled_inplace(w, v, pre.xbar);
  detail::axpy_unchecked(u, pbar, w.data());
  return {std::move(w), branch};
}

inline DenseVector aop_init(SparseView pbar, std::size_t p_count, const AopPrecompute& pre, double s, double t) {
  return aop_init_detailed(pbar, p_count, pre, s, t).w;
}

} // namespace xova

#endif // XOVA_INIT_HPP
