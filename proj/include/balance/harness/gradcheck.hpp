#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "balance/error.hpp"
#include "balance/losses.hpp"
#include "balance/reweight.hpp"
#include "balance/rng.hpp"

namespace balance {

enum class LossSelector {
  smooth_l1,
  balanced_l1,
  lgr_smooth_l1,
  localization,
  cross_entropy,
  lgr_cross_entropy,
  weighted_ce,
};

inline LossSelector parse_loss_selector(const std::string& name) {
  if (name == "smooth_l1") return LossSelector::smooth_l1;
  if (name == "balanced_l1") return LossSelector::balanced_l1;
  if (name == "lgr_smooth_l1") return LossSelector::lgr_smooth_l1;
  if (name == "localization") return LossSelector::localization;
  if (name == "cross_entropy") return LossSelector::cross_entropy;
  if (name == "lgr_cross_entropy") return LossSelector::lgr_cross_entropy;
  if (name == "weighted_ce") return LossSelector::weighted_ce;
  throw InvalidArgument("unknown loss selector '" + name + "'");
}

inline std::string to_string(LossSelector s) {
  switch (s) {
    case LossSelector::smooth_l1: return "smooth_l1";
    case LossSelector::balanced_l1: return "balanced_l1";
    case LossSelector::lgr_smooth_l1: return "lgr_smooth_l1";
    case LossSelector::localization: return "localization";
    case LossSelector::cross_entropy: return "cross_entropy";
    case LossSelector::lgr_cross_entropy: return "lgr_cross_entropy";
    case LossSelector::weighted_ce: return "weighted_ce";
  }
  return "?";
}

struct GradCheckSpec {
  std::size_t num_points = 1000;
  double lo = -3.0;
  double hi = 3.0;
  double step = 1e-6;
  double kink_exclusion = 1e-4;  // skipped neighbourhood of |x| = 1
  double threshold = 1e-5;
  std::size_t num_classes = 5;  // vector-valued losses
  std::uint64_t seed = 0;
};

struct GradCheckParams {
  BalancedL1Params balanced = derive_balanced_params();
  LgrCeParams lgr_ce = derive_lgr_ce_params();
  BcrParams bcr{};
};

struct GradCheckReport {
  std::string op_name;
  std::size_t num_points = 0;
  double max_rel_error = 0.0;
  double worst_point = 0.0;  // x for scalar losses, sample index otherwise
  double threshold = 1e-5;
  bool passed = false;
};

/// |a - n| / max(|a|, |n|, floor); zero when the scale vanishes.
inline double relative_error(double analytic, double numeric, double floor = 0.0) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

namespace detail {

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Central differences of a vector-input loss at v, one coordinate at a time.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> v, double h) {
  std::vector<double> g(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double x = v[k];
    v[k] = x + h;
    const double up = f(v);
    v[k] = x - h;
    const double down = f(v);
    v[k] = x;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double draw_away_from_kink(RngState& rng, const GradCheckSpec& spec) {
  for (;;) {
    const double x = rng.uniform(spec.lo, spec.hi);
    if (std::abs(std::abs(x) - 1.0) > spec.kink_exclusion) return x;
  }
}

inline std::vector<double> draw_vector(RngState& rng, const GradCheckSpec& spec, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = draw_away_from_kink(rng, spec);
  return v;
}

}  // namespace detail

/// Central finite differences against the analytic gradients. Detached
/// weights (the LGR ratios) are evaluated once at the base point and held
/// fixed while differencing, matching how they enter the gradient.
inline GradCheckReport run_gradcheck(LossSelector sel, const GradCheckParams& params = {},
                                     const GradCheckSpec& spec = {}) {
  if (!(spec.step > 0.0) || spec.num_points == 0 || !(spec.hi > spec.lo)) {
    throw InvalidArgument("gradcheck: invalid grid specification");
  }
  RngState rng(spec.seed);
  GradCheckReport rep{to_string(sel), spec.num_points, 0.0, 0.0, spec.threshold, false};
  auto record = [&](double err, double where) {
    if (err > rep.max_rel_error || !std::isfinite(err)) {
      rep.max_rel_error = std::isfinite(err) ? err : INFINITY;
      rep.worst_point = where;
    }
  };
  const double h = spec.step;
  const auto& bp = params.balanced;

  auto check_scalar = [&](auto&& loss_at, auto&& analytic) {
    for (std::size_t k = 0; k < spec.num_points; ++k) {
      const double x = detail::draw_away_from_kink(rng, spec);
      record(relative_error(analytic(x), detail::central_difference(loss_at(x), x, h)), x);
    }
  };
  auto check_vector = [&](std::size_t dim, auto&& body) {
    for (std::size_t k = 0; k < spec.num_points; ++k) {
      auto v = detail::draw_vector(rng, spec, dim);
      const auto [analytic, numeric] = body(v);
      // Components far below the largest one are judged against 1e-3 of it;
      // their own magnitude is under the differencing noise of the total loss.
      double largest = 0.0;
      for (double a : analytic) largest = std::max(largest, std::abs(a));
      for (std::size_t c = 0; c < analytic.size(); ++c)
        record(relative_error(analytic[c], numeric[c], 1e-3 * largest), double(k));
    }
  };

  switch (sel) {
    case LossSelector::smooth_l1:
      check_scalar([](double) { return std::function<double(double)>([](double t) { return smooth_l1(t).loss; }); },
                   [](double x) { return smooth_l1(x).grad; });
      break;
    case LossSelector::balanced_l1:
      check_scalar(
          [&](double) { return std::function<double(double)>([&](double t) { return balanced_l1(t, bp).loss; }); },
          [&](double x) { return balanced_l1(x, bp).grad; });
      break;
    case LossSelector::lgr_smooth_l1:
      check_scalar(
          [&](double x) {
            const double rho = lgr_ratio(x, bp);
            return std::function<double(double)>([rho](double t) { return rho * smooth_l1(t).loss; });
          },
          [&](double x) { return lgr_smooth_l1(x, bp).grad; });
      break;
    case LossSelector::localization:
      check_vector(4, [&](const std::vector<double>& v) {
        const BoxDelta d{v[0], v[1], v[2], v[3]};
        const auto a = localization_loss(d, bp);
        const auto n = detail::numeric_gradient(
            [&](const std::vector<double>& u) { return localization_loss({u[0], u[1], u[2], u[3]}, bp).loss; }, v, h);
        return std::pair{std::vector<double>(a.grads.begin(), a.grads.end()), n};
      });
      break;
    case LossSelector::cross_entropy:
      check_vector(spec.num_classes, [&](const std::vector<double>& v) {
        const auto target = static_cast<std::size_t>(rng.uniform_below(v.size()));
        const auto a = cross_entropy(v, target).grad;
        const auto n = detail::numeric_gradient(
            [&](const std::vector<double>& u) { return cross_entropy(u, target).loss; }, v, h);
        return std::pair{a, n};
      });
      break;
    case LossSelector::lgr_cross_entropy:
      check_vector(spec.num_classes, [&](const std::vector<double>& v) {
        const auto target = static_cast<std::size_t>(rng.uniform_below(v.size()));
        const auto a = lgr_cross_entropy(v, target, params.lgr_ce).grad;
        std::vector<double> t(v.size(), 0.0);
        t[target] = 1.0;
        const auto rho = lgr_ce_ratios(softmax(v), t, params.lgr_ce);
        const auto n = detail::numeric_gradient(
            [&](const std::vector<double>& u) { return weighted_soft_cross_entropy(u, t, rho).loss; }, v, h);
        return std::pair{a, n};
      });
      break;
    case LossSelector::weighted_ce: {
      const std::size_t classes = std::max<std::size_t>(spec.num_classes, 2) - 1;
      ClassFrequencyTable freqs;
      for (std::size_t c = 0; c < classes; ++c) freqs.counts.push_back(1 + rng.uniform_below(10000));
      const auto table = compute_weights(freqs, params.bcr);
      check_vector(classes + 1, [&](const std::vector<double>& z) {
        const auto target = static_cast<std::size_t>(rng.uniform_below(z.size()));
        auto probs_of = [](const std::vector<double>& u) {
          std::vector<double> p(u.size());
          for (std::size_t i = 0; i < u.size(); ++i) p[i] = sigmoid(u[i]);
          return p;
        };
        const auto a = weighted_ce_loss(probs_of(z), target, table).grad;
        const auto n = detail::numeric_gradient(
            [&](const std::vector<double>& u) { return weighted_ce_loss(probs_of(u), target, table).loss; }, z, h);
        return std::pair{a, n};
      });
      break;
    }
  }
  rep.passed = rep.max_rel_error <= spec.threshold;
  return rep;
}

}  // namespace balance
