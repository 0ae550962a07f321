#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "balance/error.hpp"
#include "balance/tensor.hpp"

namespace balance {

struct LossGrad {
  double loss = 0.0;
  double grad = 0.0;
};

struct LossGradVec {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Balanced L1 parameters. b and c_const are derived from (alpha, gamma) so
/// that alpha*ln(b+1) = gamma and both loss branches meet at |x| = 1.
struct BalancedL1Params {
  double alpha = 0.5;
  double gamma = 1.5;
  double b = 0.0;
  double c_const = 0.0;
};

inline BalancedL1Params derive_balanced_params(double alpha = 0.5, double gamma = 1.5) {
  if (!(alpha > 0.0) || !(gamma > 0.0) || !std::isfinite(alpha) || !std::isfinite(gamma)) {
    throw InvalidArgument("balanced L1: alpha and gamma must be positive");
  }
  const double b = std::expm1(gamma / alpha);
  if (!std::isfinite(b)) throw InvalidArgument("balanced L1: gamma/alpha too large, b overflows");
  // (alpha/b)(b+1)ln(b+1) - alpha = gamma + C with ln(b+1) = gamma/alpha.
  return {alpha, gamma, b, gamma / b - alpha};
}

/// Parameters of the LGR cross-entropy weights.
struct LgrCeParams {
  double alpha = 0.8;
  double gamma = 1.0;
  double b = 0.0;
};

inline LgrCeParams derive_lgr_ce_params(double alpha = 0.8, double gamma = 1.0) {
  const auto p = derive_balanced_params(alpha, gamma);
  return {p.alpha, p.gamma, p.b};
}

inline double sign_of(double x) { return (x > 0.0) - (x < 0.0); }

inline LossGrad smooth_l1(double x) {
  const double ax = std::abs(x);
  if (ax < 1.0) return {0.5 * x * x, x};
  return {ax - 0.5, sign_of(x)};
}

inline LossGrad balanced_l1(double x, const BalancedL1Params& p) {
  const double ax = std::abs(x);
  if (ax < 1.0) {
    const double bx = p.b * ax;
    const double log_term = std::log1p(bx);
    return {p.alpha / p.b * (bx + 1.0) * log_term - p.alpha * ax, sign_of(x) * p.alpha * log_term};
  }
  return {p.gamma * ax + p.c_const, sign_of(x) * p.gamma};
}

/// Ratio G_b / G_s. At x = 0 the 0/0 is replaced by its limit alpha*b. The
/// value is meant to be used as a constant (detached) weight.
inline double lgr_ratio(double x, const BalancedL1Params& p) {
  const double ax = std::abs(x);
  if (ax >= 1.0) return p.gamma;
  if (ax == 0.0) return p.alpha * p.b;
  return p.alpha * std::log1p(p.b * ax) / ax;
}

/// rho(x) * smooth L1, rho held constant. Its gradient equals the balanced L1
/// gradient.
inline LossGrad lgr_smooth_l1(double x, const BalancedL1Params& p) {
  const double rho = lgr_ratio(x, p);
  const LossGrad s = smooth_l1(x);
  return {rho * s.loss, rho * s.grad};
}

/// Regression residuals t^u - v for (x, y, w, h).
struct BoxDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;

  std::array<double, 4> as_array() const { return {dx, dy, dw, dh}; }
};

struct LocalizationLoss {
  double loss = 0.0;
  std::array<double, 4> grads{};
};

inline LocalizationLoss localization_loss(const BoxDelta& delta, const BalancedL1Params& p) {
  LocalizationLoss out;
  const auto d = delta.as_array();
  for (std::size_t i = 0; i < 4; ++i) {
    if (!std::isfinite(d[i])) throw InvalidArgument("localization_loss: non-finite delta");
    const LossGrad lg = balanced_l1(d[i], p);
    out.loss += lg.loss;
    out.grads[i] = lg.grad;
  }
  return out;
}

namespace detail {

inline void check_target(std::span<const double> logits, std::size_t target) {
  if (logits.empty()) throw InvalidArgument("cross entropy: empty logits");
  if (target >= logits.size()) {
    throw InvalidArgument("cross entropy: target " + std::to_string(target) + " out of range for " +
                          std::to_string(logits.size()) + " classes");
  }
}

inline std::vector<double> one_hot(std::size_t n, std::size_t target) {
  std::vector<double> t(n, 0.0);
  t[target] = 1.0;
  return t;
}

}  // namespace detail

/// Softmax cross-entropy; gradient w.r.t. logits is p - t.
inline LossGradVec cross_entropy(std::span<const double> logits, std::size_t target) {
  detail::check_target(logits, target);
  auto p = softmax(logits);
  LossGradVec out{log_sum_exp(logits) - logits[target], std::move(p)};
  out.grad[target] -= 1.0;
  return out;
}

/// Per-class LGR weights rho_c = alpha*ln(b|p_c - t_c| + 1)/|p_c - t_c|, with
/// the limit alpha*b when the gap is below 1e-12.
inline std::vector<double> lgr_ce_ratios(std::span<const double> probs, std::span<const double> targets,
                                         const LgrCeParams& p) {
  std::vector<double> rho(probs.size());
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const double gap = std::abs(probs[c] - targets[c]);
    rho[c] = gap < 1e-12 ? p.alpha * p.b : p.alpha * std::log1p(p.b * gap) / gap;
  }
  return rho;
}

/// -sum_c rho_c t_c ln p_c for fixed weights rho. Gradient w.r.t. logits:
/// p_k * sum_c rho_c t_c - rho_k t_k.
inline LossGradVec weighted_soft_cross_entropy(std::span<const double> logits, std::span<const double> targets,
                                               std::span<const double> rho) {
  if (logits.empty() || targets.size() != logits.size() || rho.size() != logits.size()) {
    throw InvalidArgument("weighted cross entropy: size mismatch");
  }
  const double lse = log_sum_exp(logits);
  const auto p = softmax(logits);
  LossGradVec out{0.0, std::vector<double>(logits.size(), 0.0)};
  double mass = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    if (targets[c] != 0.0) out.loss -= rho[c] * targets[c] * (logits[c] - lse);
    mass += rho[c] * targets[c];
  }
  for (std::size_t k = 0; k < logits.size(); ++k) out.grad[k] = p[k] * mass - rho[k] * targets[k];
  return out;
}

/// LGR cross-entropy with soft targets. The weights are computed from the
/// current probabilities and then treated as constants.
inline LossGradVec lgr_cross_entropy(std::span<const double> logits, std::span<const double> targets,
                                     const LgrCeParams& p) {
  if (targets.size() != logits.size()) throw InvalidArgument("lgr cross entropy: size mismatch");
  const auto probs = softmax(logits);
  const auto rho = lgr_ce_ratios(probs, targets, p);
  return weighted_soft_cross_entropy(logits, targets, rho);
}

inline LossGradVec lgr_cross_entropy(std::span<const double> logits, std::size_t target, const LgrCeParams& p) {
  detail::check_target(logits, target);
  const auto t = detail::one_hot(logits.size(), target);
  return lgr_cross_entropy(logits, t, p);
}

/// L = L_cls + lambda * [foreground] * L_loc.
inline double multitask_loss(double cls_loss, double loc_loss, bool is_foreground, double lambda = 1.0) {
  if (!(lambda > 0.0)) throw InvalidArgument("multitask_loss: lambda must be positive");
  return is_foreground ? cls_loss + lambda * loc_loss : cls_loss;
}

}  // namespace balance
