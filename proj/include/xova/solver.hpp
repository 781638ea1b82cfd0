#ifndef XOVA_SOLVER_HPP
#define XOVA_SOLVER_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xova/error.hpp"
#include "xova/loss.hpp"
#include "xova/sparse.hpp"

namespace xova {

/// How Hessian-vector products pick their instances.
enum class HessianMode {
  ActiveSet,  // only instances with nonzero curvature (implicit negative mining)
  FullSum,    // every instance, curvature evaluated per instance
};

struct SolverConfig {
  double eps_outer = 0.01;      // stop when ||grad|| <= eps_outer * ||grad at 0||
  double eps_cg = 0.5;          // relative preconditioned residual for CG
  double precond_alpha = 0.01;  // M = alpha*diag(H) + (1-alpha)*I
  double ls_beta = 0.5;
  double ls_eta = 0.01;
  std::size_t ls_max_steps = 20;
  std::size_t max_outer = 100;
  std::size_t max_cg = 250;
  HessianMode hessian = HessianMode::ActiveSet;

  void validate() const {
    if (!(eps_outer > 0.0) || !(eps_cg > 0.0))
      throw ConfigError("solver tolerances must be positive");
    if (!(precond_alpha >= 0.0 && precond_alpha <= 1.0))
      throw ConfigError("preconditioner alpha must be in [0, 1]");
    if (!(ls_beta > 0.0 && ls_beta < 1.0)) throw ConfigError("line-search beta must be in (0, 1)");
    if (!(ls_eta > 0.0 && ls_eta < 0.5)) throw ConfigError("line-search eta must be in (0, 0.5)");
    if (ls_max_steps == 0 || max_cg == 0) throw ConfigError("iteration caps must be positive");
  }
};

/// One binary sub-problem: the shared design matrix, a ±1 sign per instance,
/// the margin loss and the loss weight C.
class BinaryProblem {
 public:
  BinaryProblem(const SparseMatrix& features, std::vector<std::int8_t> signs, MarginLoss loss,
                double c = 1.0)
      : features_(&features), signs_(std::move(signs)), loss_(loss), c_(c) {
    if (signs_.size() != features.n_rows())
      throw DimensionMismatch("problem: " + std::to_string(signs_.size()) + " signs for " +
                              std::to_string(features.n_rows()) + " instances");
    for (auto s : signs_)
      if (s != 1 && s != -1) throw InvalidState("problem: signs must be +1 or -1");
    if (!(c_ > 0.0) || !std::isfinite(c_)) throw ConfigError("loss weight C must be positive");
  }

  /// Sign +1 on the listed instances, -1 everywhere else.
  static BinaryProblem from_positives(const SparseMatrix& features, std::span<const index_t> positives,
                                      MarginLoss loss, double c = 1.0) {
    std::vector<std::int8_t> signs(features.n_rows(), -1);
    for (auto i : positives) {
      if (i >= signs.size()) throw DimensionMismatch("positive instance id out of range");
      signs[i] = 1;
    }
    return BinaryProblem(features, std::move(signs), loss, c);
  }

  static BinaryProblem all_negative(const SparseMatrix& features, MarginLoss loss, double c = 1.0) {
    return from_positives(features, {}, loss, c);
  }

  const SparseMatrix& features() const noexcept { return *features_; }
  std::span<const std::int8_t> signs() const noexcept { return signs_; }
  double sign(std::size_t i) const noexcept { return signs_[i]; }
  MarginLoss loss() const noexcept { return loss_; }
  double c() const noexcept { return c_; }
  std::size_t n() const noexcept { return signs_.size(); }
  std::size_t dim() const noexcept { return features_->n_cols(); }

  void check_dim(std::size_t len) const {
    if (len != dim())
      throw DimensionMismatch("weight length " + std::to_string(len) + " != feature dimension " +
                              std::to_string(dim()));
  }

 private:
  const SparseMatrix* features_;
  std::vector<std::int8_t> signs_;
  MarginLoss loss_;
  double c_;
};

/// Instances whose curvature enters the Hessian at a given w.
struct ActiveSet {
  std::vector<index_t> indices;

  std::size_t size() const noexcept { return indices.size(); }
};

inline ActiveSet active_set(const BinaryProblem& p, std::span<const double> w) {
  p.check_dim(w.size());
  ActiveSet a;
  for (std::size_t i = 0; i < p.n(); ++i) {
    const double m = p.sign(i) * detail::dot_unchecked(p.features().row(i), w.data());
    if (is_active(p.loss(), m)) a.indices.push_back(static_cast<index_t>(i));
  }
  return a;
}

/// ½<w,w> + C Σ φ(y_i <w, x_i>)
inline double objective(const BinaryProblem& p, std::span<const double> w) {
  p.check_dim(w.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < p.n(); ++i)
    loss += phi(p.loss(), p.sign(i) * detail::dot_unchecked(p.features().row(i), w.data()));
  return 0.5 * dot(w, w) + p.c() * loss;
}

/// w + C Σ φ'(m_i) y_i x_i
inline DenseVector gradient(const BinaryProblem& p, std::span<const double> w) {
  p.check_dim(w.size());
  DenseVector g(std::vector<double>(w.begin(), w.end()));
  for (std::size_t i = 0; i < p.n(); ++i) {
    const auto row = p.features().row(i);
    const double y = p.sign(i);
    const double d = dphi(p.loss(), y * detail::dot_unchecked(row, w.data()));
    if (d != 0.0) detail::axpy_unchecked(p.c() * d * y, row, g.data());
  }
  return g;
}

/// d + C Σ_{i in A} φ''(m_i) <x_i, d> x_i
inline DenseVector hessian_vec(const BinaryProblem& p, std::span<const double> w, std::span<const double> d,
                               const ActiveSet& a) {
  p.check_dim(w.size());
  p.check_dim(d.size());
  DenseVector out(std::vector<double>(d.begin(), d.end()));
  for (const auto i : a.indices) {
    if (i >= p.n()) throw DimensionMismatch("active index out of range");
    const auto row = p.features().row(i);
    const double curv = ddphi(p.loss(), p.sign(i) * detail::dot_unchecked(row, w.data()));
    detail::axpy_unchecked(p.c() * curv * detail::dot_unchecked(row, d.data()), row, out.data());
  }
  return out;
}

/// ||grad L(0)||, the stopping reference shared by all initializations.
inline double reference_gradient_norm(const BinaryProblem& p) {
  const DenseVector zero(p.dim());
  return norm2(gradient(p, zero));
}

struct CgResult {
  DenseVector step;
  std::size_t iterations = 0;
};

/// Preconditioned CG for H p = -grad with M = alpha*diag(H) + (1-alpha)*I.
/// Stops once sqrt(r'M⁻¹r) <= eps_cg * sqrt(g'M⁻¹g) or after max_cg iterations.
/// `hvp(in, out)` writes H·in into out.
template <class Hvp>
CgResult cg_solve(std::span<const double> grad, Hvp&& hvp, std::span<const double> diag_h,
                  const SolverConfig& cfg) {
  const std::size_t n = grad.size();
  detail::check_same_length(n, diag_h.size());
  CgResult res{DenseVector(n), 0};

  std::vector<double> minv(n), r(n), z(n), d(n), hd(n);
  for (std::size_t j = 0; j < n; ++j) {
    minv[j] = 1.0 / (cfg.precond_alpha * diag_h[j] + (1.0 - cfg.precond_alpha));
    r[j] = -grad[j];
    z[j] = minv[j] * r[j];
  }
  double rz = 0.0;
  for (std::size_t j = 0; j < n; ++j) rz += r[j] * z[j];
  if (!std::isfinite(rz)) throw NumericalFailure("cg: non-finite gradient");
  if (rz == 0.0) return res;
  const double tol = cfg.eps_cg * std::sqrt(rz);
  d = z;

  auto& p = res.step;
  while (res.iterations < cfg.max_cg) {
    hvp(std::span<const double>(d), std::span<double>(hd));
    ++res.iterations;
    double dhd = 0.0;
    for (std::size_t j = 0; j < n; ++j) dhd += d[j] * hd[j];
    const double alpha = rz / dhd;
    if (!std::isfinite(alpha) || !(dhd > 0.0))
      throw NumericalFailure("cg: curvature d'Hd=" + std::to_string(dhd) + " at iteration " +
                             std::to_string(res.iterations));
    for (std::size_t j = 0; j < n; ++j) {
      p[j] += alpha * d[j];
      r[j] -= alpha * hd[j];
      z[j] = minv[j] * r[j];
    }
    double rz_new = 0.0;
    for (std::size_t j = 0; j < n; ++j) rz_new += r[j] * z[j];
    if (!std::isfinite(rz_new))
      throw NumericalFailure("cg: non-finite residual at iteration " + std::to_string(res.iterations));
    if (std::sqrt(rz_new) <= tol) break;
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t j = 0; j < n; ++j) d[j] = z[j] + beta * d[j];
  }
  return res;
}

struct LineSearchResult {
  double lambda = 0.0;
  bool accepted = false;
  double loss = 0.0;  // objective at the accepted point (f0 when rejected)
  std::size_t trials = 0;
};

/// Tries lambda = 1, beta, beta², ... and takes the first with
/// eval(lambda) <= f0 + eta*lambda*slope.
template <class Eval>
LineSearchResult backtracking(double f0, double slope, Eval&& eval, const SolverConfig& cfg) {
  LineSearchResult res;
  res.loss = f0;
  double lambda = 1.0;
  for (std::size_t k = 0; k < cfg.ls_max_steps; ++k) {
    const double f = eval(lambda);
    ++res.trials;
    if (f <= f0 + cfg.ls_eta * lambda * slope) {
      res.lambda = lambda;
      res.accepted = true;
      res.loss = f;
      return res;
    }
    lambda *= cfg.ls_beta;
  }
  return res;
}

namespace detail {

// Objective along w + lambda*dir from cached projections xw = Xw, xd = X·dir.
inline double objective_along(const BinaryProblem& p, std::span<const double> xw, std::span<const double> xd,
                              double ww, double wd, double dd, double lambda) {
  double loss = 0.0;
  for (std::size_t i = 0; i < p.n(); ++i) loss += phi(p.loss(), p.sign(i) * (xw[i] + lambda * xd[i]));
  return 0.5 * (ww + 2.0 * lambda * wd + lambda * lambda * dd) + p.c() * loss;
}

} // namespace detail

inline LineSearchResult line_search(const BinaryProblem& p, std::span<const double> w,
                                    std::span<const double> dir, const SolverConfig& cfg) {
  p.check_dim(w.size());
  p.check_dim(dir.size());
  std::vector<double> xw(p.n()), xd(p.n());
  for (std::size_t i = 0; i < p.n(); ++i) {
    xw[i] = detail::dot_unchecked(p.features().row(i), w.data());
    xd[i] = detail::dot_unchecked(p.features().row(i), dir.data());
  }
  const double ww = dot(w, w), wd = dot(w, dir), dd = dot(dir, dir);
  const double f0 = objective(p, w);
  const double slope = dot(gradient(p, w).span(), dir);
  return backtracking(
      f0, slope, [&](double lambda) { return detail::objective_along(p, xw, xd, ww, wd, dd, lambda); }, cfg);
}

enum class Termination { Converged, MaxOuter, LineSearchFailure, NumericalFailure };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::MaxOuter: return "max-outer";
    case Termination::LineSearchFailure: return "line-search-failure";
    case Termination::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

inline Termination parse_termination(std::string_view s) {
  if (s == "converged") return Termination::Converged;
  if (s == "max-outer") return Termination::MaxOuter;
  if (s == "line-search-failure") return Termination::LineSearchFailure;
  if (s == "numerical-failure") return Termination::NumericalFailure;
  throw ConfigError("unknown termination '" + std::string(s) + "'");
}

/// State at the start of one Newton iteration plus what the iteration did.
struct IterationRecord {
  double loss = 0.0;
  double grad_norm = 0.0;
  std::size_t active = 0;
  double active_fraction = 0.0;
  std::size_t cg_iterations = 0;
  std::uint64_t hvp_touches = 0;  // active * cg_iterations
  double step = 0.0;              // accepted line-search multiplier (0 if rejected)
  double wall_ms = 0.0;
};

struct SolverTrace {
  std::vector<IterationRecord> iterations;
  std::size_t outer_iterations = 0;  // accepted steps
  std::uint64_t hvp_touches = 0;
  std::size_t active_set_updates = 0;
  std::size_t initial_active = 0;
  double initial_active_fraction = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double final_grad_norm = 0.0;
  double grad0_ref = 0.0;
  Termination termination = Termination::Converged;
  double wall_ms = 0.0;
};

struct SolverResult {
  DenseVector w;
  SolverTrace trace;
};

/// Truncated Newton-CG minimizer for one binary problem. Owns its scratch
/// buffers, so one instance per worker thread can be reused across problems.
class NewtonCg {
 public:
  explicit NewtonCg(SolverConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  const SolverConfig& config() const noexcept { return cfg_; }

  /// Minimizes from w0 until ||grad|| <= eps_outer * grad0_ref.
  SolverResult minimize(const BinaryProblem& p, DenseVector w0, double grad0_ref) {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    p.check_dim(w0.size());
    const std::size_t n = p.n(), dim = p.dim();
    const auto& x = p.features();
    const MarginLoss loss = p.loss();
    const double c = p.c();

    SolverResult res{std::move(w0), {}};
    auto& w = res.w;
    auto& tr = res.trace;
    tr.grad0_ref = grad0_ref;
    const double threshold = cfg_.eps_outer * grad0_ref;

    xw_.resize(n);
    xd_.resize(n);
    for (std::size_t i = 0; i < n; ++i) xw_[i] = detail::dot_unchecked(x.row(i), w.data());
    double f = objective_from_cache(p, w);
    if (!std::isfinite(f)) throw NumericalFailure("non-finite objective at the initial point");
    tr.initial_loss = f;

    DenseVector g(dim), diag(dim);
    for (std::size_t iter = 0;; ++iter) {
      const auto t_iter = clock::now();
      refresh_active(p);
      ++tr.active_set_updates;

      // gradient over the active set; inactive squared-hinge terms are exactly zero
      std::copy(w.begin(), w.end(), g.begin());
      for (std::size_t k = 0; k < active_.size(); ++k) {
        const auto i = active_[k];
        const double y = p.sign(i);
        const double d = dphi(loss, y * xw_[i]);
        if (d != 0.0 || cfg_.hessian == HessianMode::FullSum)
          detail::axpy_unchecked(c * d * y, x.row(i), g.data());
      }
      const double gnorm = norm2(g);
      if (!std::isfinite(gnorm)) throw NumericalFailure("non-finite gradient at iteration " + std::to_string(iter));
      const std::size_t n_active = n_active_;
      if (iter == 0) {
        tr.initial_active = n_active;
        tr.initial_active_fraction = n ? static_cast<double>(n_active) / static_cast<double>(n) : 0.0;
      }
      tr.final_loss = f;
      tr.final_grad_norm = gnorm;
      if (gnorm <= threshold) {
        tr.termination = Termination::Converged;
        break;
      }
      if (iter >= cfg_.max_outer) {
        tr.termination = Termination::MaxOuter;
        break;
      }

      IterationRecord rec;
      rec.loss = f;
      rec.grad_norm = gnorm;
      rec.active = n_active;
      rec.active_fraction = n ? static_cast<double>(n_active) / static_cast<double>(n) : 0.0;

      std::fill(diag.begin(), diag.end(), 1.0);
      for (std::size_t k = 0; k < active_.size(); ++k) {
        const auto row = x.row(active_[k]);
        for (std::size_t q = 0; q < row.nnz(); ++q) diag[row.indices[q]] += coef_[k] * row.values[q] * row.values[q];
      }

      auto hvp = [&](std::span<const double> in, std::span<double> out) {
        std::copy(in.begin(), in.end(), out.begin());
        for (std::size_t k = 0; k < active_.size(); ++k) {
          const auto row = x.row(active_[k]);
          detail::axpy_unchecked(coef_[k] * detail::dot_unchecked(row, in.data()), row, out.data());
        }
      };
      auto cg = cg_solve(g, hvp, diag, cfg_);
      rec.cg_iterations = cg.iterations;
      rec.hvp_touches = static_cast<std::uint64_t>(active_.size()) * cg.iterations;
      tr.hvp_touches += rec.hvp_touches;
      const auto& dir = cg.step;

      for (std::size_t i = 0; i < n; ++i) xd_[i] = detail::dot_unchecked(x.row(i), dir.data());
      const double ww = dot(w.span(), w.span()), wd = dot(w.span(), dir.span()), dd = dot(dir.span(), dir.span());
      const double slope = dot(g.span(), dir.span());
      auto ls = backtracking(
          f, slope, [&](double lambda) { return detail::objective_along(p, xw_, xd_, ww, wd, dd, lambda); }, cfg_);

      if (!ls.accepted) {
        rec.step = 0.0;
        rec.wall_ms = ms_since(t_iter);
        tr.iterations.push_back(rec);
        tr.termination = Termination::LineSearchFailure;
        break;
      }
      add_scaled_inplace(w, ls.lambda, dir);
      for (std::size_t i = 0; i < n; ++i) xw_[i] += ls.lambda * xd_[i];
      f = ls.loss;
      if (!std::isfinite(f)) throw NumericalFailure("non-finite objective after iteration " + std::to_string(iter));
      ++tr.outer_iterations;
      rec.step = ls.lambda;
      rec.wall_ms = ms_since(t_iter);
      tr.iterations.push_back(rec);
    }
    tr.wall_ms = ms_since(t_start);
    return res;
  }

 private:
  static double ms_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t).count();
  }

  double objective_from_cache(const BinaryProblem& p, const DenseVector& w) const {
    double loss = 0.0;
    for (std::size_t i = 0; i < p.n(); ++i) loss += phi(p.loss(), p.sign(i) * xw_[i]);
    return 0.5 * dot(w.span(), w.span()) + p.c() * loss;
  }

  // Active instances and their Hessian weights C*φ''(m_i), fixed for one CG solve.
  void refresh_active(const BinaryProblem& p) {
    active_.clear();
    coef_.clear();
    n_active_ = 0;
    for (std::size_t i = 0; i < p.n(); ++i) {
      const double m = p.sign(i) * xw_[i];
      const bool act = is_active(p.loss(), m);
      n_active_ += act ? 1 : 0;
      if (act || cfg_.hessian == HessianMode::FullSum) {
        active_.push_back(static_cast<index_t>(i));
        coef_.push_back(p.c() * ddphi(p.loss(), m));
      }
    }
  }

  SolverConfig cfg_;
  std::vector<double> xw_, xd_;
  std::vector<index_t> active_;
  std::vector<double> coef_;
  std::size_t n_active_ = 0;
};

inline SolverResult newton_cg(const BinaryProblem& p, DenseVector w0, const SolverConfig& cfg, double grad0_ref) {
  return NewtonCg(cfg).minimize(p, std::move(w0), grad0_ref);
}

} // namespace xova

#endif // XOVA_SOLVER_HPP
