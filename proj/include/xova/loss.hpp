#ifndef XOVA_LOSS_HPP
#define XOVA_LOSS_HPP

#include <cmath>
#include <string>
#include <string_view>

#include "xova/error.hpp"

namespace xova {

enum class LossKind { SquaredHinge, Logistic };

/// Convex margin loss φ(m), m = y·<w, x>.
struct MarginLoss {
  LossKind kind = LossKind::SquaredHinge;

  friend bool operator==(const MarginLoss&, const MarginLoss&) = default;
};

inline constexpr MarginLoss squared_hinge{LossKind::SquaredHinge};
inline constexpr MarginLoss logistic{LossKind::Logistic};

inline std::string to_string(MarginLoss loss) {
  return loss.kind == LossKind::SquaredHinge ? "squared-hinge" : "logistic";
}

inline MarginLoss parse_loss(std::string_view name) {
  if (name == "squared-hinge") return squared_hinge;
  if (name == "logistic") return logistic;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

inline double phi(MarginLoss loss, double m) noexcept {
  if (loss.kind == LossKind::SquaredHinge) {
    const double h = 1.0 - m;
    return h > 0.0 ? h * h : 0.0;
  }
  return m >= 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

inline double dphi(MarginLoss loss, double m) noexcept {
  if (loss.kind == LossKind::SquaredHinge) return m < 1.0 ? -2.0 * (1.0 - m) : 0.0;
  if (m >= 0.0) {
    const double e = std::exp(-m);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(m));
}

/// Generalized second derivative; the squared-hinge kink at m = 1 maps to 0.
inline double ddphi(MarginLoss loss, double m) noexcept {
  if (loss.kind == LossKind::SquaredHinge) return m < 1.0 ? 2.0 : 0.0;
  const double e = std::exp(-std::abs(m));
  const double s = 1.0 + e;
  return e / (s * s);
}

/// Whether an instance at margin m contributes to the Hessian.
/// Squared hinge: strictly inside the margin. Logistic: always.
inline bool is_active(MarginLoss loss, double m) noexcept {
  return loss.kind == LossKind::Logistic || m < 1.0;
}

/// Error of the second-order Taylor model of φ around m0 at offset delta:
/// φ̂(delta) - φ(m0 + delta).
inline double quad_approx_error(MarginLoss loss, double m0, double delta) noexcept {
  const double model = phi(loss, m0) + delta * dphi(loss, m0) + 0.5 * delta * delta * ddphi(loss, m0);
  return model - phi(loss, m0 + delta);
}

} // namespace xova

#endif // XOVA_LOSS_HPP
