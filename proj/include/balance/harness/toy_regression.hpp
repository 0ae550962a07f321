#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "balance/error.hpp"
#include "balance/losses.hpp"
#include "balance/rng.hpp"

namespace balance {

/// Linear regression with one-sided outlier contamination.
///
/// Features are U(-1, 1) plus a trailing constant 1 (true_params' last entry
/// is the bias). Targets get N(0, sigma) noise; an outlier_fraction of them is
/// additionally shifted by +outlier_shift.
struct ToyRegressionTask {
  std::size_t num_samples = 200;
  double inlier_noise_sigma = 0.1;
  double outlier_fraction = 0.1;
  double outlier_shift = 5.0;
  std::uint64_t seed = 0;
  std::vector<double> true_params{0.5, -0.3, 0.2};

  void validate() const {
    if (num_samples == 0) throw InvalidArgument("toy regression: num_samples must be positive");
    if (!(inlier_noise_sigma > 0.0)) throw InvalidArgument("toy regression: noise sigma must be positive");
    if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0)) {
      throw InvalidArgument("toy regression: outlier_fraction must be in [0, 1)");
    }
    if (!(outlier_shift > 0.0)) throw InvalidArgument("toy regression: outlier_shift must be positive");
    if (true_params.empty()) throw InvalidArgument("toy regression: true_params must be non-empty");
  }
};

struct RegressionData {
  std::vector<std::vector<double>> features;  // includes the constant column
  std::vector<double> targets;
  std::vector<bool> is_outlier;  // |residual at true params| >= 1
};

inline RegressionData make_regression_data(const ToyRegressionTask& task) {
  task.validate();
  RngState rng(task.seed);
  RegressionData d;
  const std::size_t dim = task.true_params.size();
  for (std::size_t i = 0; i < task.num_samples; ++i) {
    std::vector<double> x(dim, 1.0);
    for (std::size_t k = 0; k + 1 < dim; ++k) x[k] = rng.uniform(-1.0, 1.0);
    double clean = 0.0;
    for (std::size_t k = 0; k < dim; ++k) clean += task.true_params[k] * x[k];
    double y = clean + rng.normal(0.0, task.inlier_noise_sigma);
    if (rng.bernoulli(task.outlier_fraction)) y += task.outlier_shift;
    d.is_outlier.push_back(std::abs(y - clean) >= 1.0);
    d.features.push_back(std::move(x));
    d.targets.push_back(y);
  }
  return d;
}

enum class RegressionLoss { smooth_l1, balanced_l1 };

inline RegressionLoss parse_regression_loss(const std::string& name) {
  if (name == "smooth_l1") return RegressionLoss::smooth_l1;
  if (name == "balanced_l1") return RegressionLoss::balanced_l1;
  throw InvalidArgument("unknown regression loss '" + name + "' (smooth_l1 | balanced_l1)");
}

struct RegressionOptions {
  RegressionLoss loss = RegressionLoss::balanced_l1;
  std::size_t steps = 300;
  double learning_rate = 0.05;
  std::size_t log_every = 1;
  BalancedL1Params balanced = derive_balanced_params();
};

struct RegressionStep {
  std::size_t step = 0;
  double loss = 0.0;
  double inlier_grad_share = 0.0;
  double outlier_grad_share = 0.0;
};

struct RegressionLog {
  std::vector<RegressionStep> steps;
  std::vector<double> final_params;
  double final_loss = 0.0;
  double final_inlier_mse = 0.0;
  double final_param_error = 0.0;  // Euclidean distance to true_params
};

/// Full-batch gradient descent from zero on mean_i L(w . x_i - y_i).
///
/// Each logged step records the loss before the update and how the summed
/// per-sample gradient magnitude |dL/dr_i| splits between inliers and
/// outliers.
inline RegressionLog run_toy_regression(const ToyRegressionTask& task, const RegressionOptions& opt) {
  if (!(opt.learning_rate > 0.0)) throw InvalidArgument("toy regression: learning rate must be positive");
  const RegressionData data = make_regression_data(task);
  const std::size_t dim = task.true_params.size();
  const double n = static_cast<double>(data.targets.size());
  std::vector<double> w(dim, 0.0);

  auto eval = [&](std::vector<double>* grad, RegressionStep* rec) {
    double loss = 0.0, in_mag = 0.0, out_mag = 0.0;
    if (grad) grad->assign(dim, 0.0);
    for (std::size_t i = 0; i < data.targets.size(); ++i) {
      double pred = 0.0;
      for (std::size_t k = 0; k < dim; ++k) pred += w[k] * data.features[i][k];
      const double r = pred - data.targets[i];
      const LossGrad lg = opt.loss == RegressionLoss::smooth_l1 ? smooth_l1(r) : balanced_l1(r, opt.balanced);
      loss += lg.loss;
      (data.is_outlier[i] ? out_mag : in_mag) += std::abs(lg.grad);
      if (grad)
        for (std::size_t k = 0; k < dim; ++k) (*grad)[k] += lg.grad * data.features[i][k] / n;
    }
    if (rec) {
      const double total = in_mag + out_mag;
      rec->inlier_grad_share = total > 0.0 ? in_mag / total : 0.0;
      rec->outlier_grad_share = total > 0.0 ? out_mag / total : 0.0;
    }
    return loss / n;
  };

  RegressionLog log;
  std::vector<double> grad;
  for (std::size_t step = 0; step < opt.steps; ++step) {
    RegressionStep rec;
    rec.step = step;
    rec.loss = eval(&grad, &rec);
    if (!std::isfinite(rec.loss) || rec.loss > 1e12) throw Diverged(step);
    if (opt.log_every > 0 && step % opt.log_every == 0) log.steps.push_back(rec);
    for (std::size_t k = 0; k < dim; ++k) w[k] -= opt.learning_rate * grad[k];
  }
  log.final_loss = eval(nullptr, nullptr);
  if (!std::isfinite(log.final_loss) || log.final_loss > 1e12) throw Diverged(opt.steps);

  double sq = 0.0, count = 0.0, err = 0.0;
  for (std::size_t i = 0; i < data.targets.size(); ++i) {
    if (data.is_outlier[i]) continue;
    double pred = 0.0;
    for (std::size_t k = 0; k < dim; ++k) pred += w[k] * data.features[i][k];
    sq += (pred - data.targets[i]) * (pred - data.targets[i]);
    count += 1.0;
  }
  for (std::size_t k = 0; k < dim; ++k) err += (w[k] - task.true_params[k]) * (w[k] - task.true_params[k]);
  log.final_params = w;
  log.final_inlier_mse = count > 0.0 ? sq / count : 0.0;
  log.final_param_error = std::sqrt(err);
  return log;
}

}  // namespace balance
