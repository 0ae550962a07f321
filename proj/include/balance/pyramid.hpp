#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "balance/error.hpp"
#include "balance/rng.hpp"
#include "balance/tensor.hpp"

namespace balance {

/// Multi-level features. levels[k] is pyramid level min_level + k; each step
/// halves height and width exactly.
struct FeaturePyramid {
  int min_level = 2;
  std::vector<Tensor> levels;

  int max_level() const { return min_level + static_cast<int>(levels.size()) - 1; }

  bool contains(int level) const { return level >= min_level && level <= max_level(); }

  const Tensor& level(int l) const {
    if (!contains(l)) throw InvalidArgument("pyramid has no level " + std::to_string(l));
    return levels[static_cast<std::size_t>(l - min_level)];
  }

  void validate() const {
    if (levels.size() < 2) throw InvalidArgument("pyramid needs at least two levels");
    for (std::size_t k = 1; k < levels.size(); ++k) {
      const Shape& fine = levels[k - 1].shape();
      const Shape& coarse = levels[k].shape();
      if (coarse.channels != fine.channels) {
        throw InvalidArgument("pyramid channel mismatch: " + fine.str() + " vs " + coarse.str());
      }
      if (fine.height != 2 * coarse.height || fine.width != 2 * coarse.width) {
        throw InvalidArgument("pyramid levels must halve exactly: " + fine.str() + " -> " + coarse.str());
      }
    }
  }

  /// Second-coarsest level, the conventional integration size.
  int default_target_level() const { return max_level() - 1; }

  bool operator==(const FeaturePyramid&) const = default;
};

/// Row-major dense matrix acting as a 1x1 convolution.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  static Matrix zeros(std::size_t r, std::size_t c) { return {r, c, std::vector<double>(r * c, 0.0)}; }

  static Matrix identity(std::size_t n) {
    Matrix m = zeros(n, n);
    for (std::size_t k = 0; k < n; ++k) m.data[k * n + k] = 1.0;
    return m;
  }

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }

  bool is_zero() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return v == 0.0; });
  }

  bool operator==(const Matrix&) const = default;
};

/// theta/phi: embed x channels, g: channels x channels.
struct NonLocalParams {
  Matrix theta;
  Matrix phi;
  Matrix g;

  void validate(std::size_t channels) const {
    if (theta.rows != phi.rows || theta.cols != phi.cols) {
      throw InvalidArgument("non-local: theta and phi must have identical shapes");
    }
    if (theta.rows == 0 || theta.cols != channels) {
      throw InvalidArgument("non-local: theta/phi input channels " + std::to_string(theta.cols) +
                            " do not match feature channels " + std::to_string(channels));
    }
    if (g.rows != channels || g.cols != channels) {
      throw InvalidArgument("non-local: g must be " + std::to_string(channels) + "x" + std::to_string(channels));
    }
    for (const Matrix* m : {&theta, &phi, &g}) {
      if (m->data.size() != m->rows * m->cols) throw InvalidArgument("non-local: matrix data length mismatch");
      for (double v : m->data)
        if (!std::isfinite(v)) throw InvalidArgument("non-local: parameters must be finite");
    }
  }

  /// theta, phi ~ U(-0.1, 0.1); g = 0, so the block starts as the identity.
  static NonLocalParams init(std::size_t channels, RngState& rng, std::optional<std::size_t> embed = std::nullopt) {
    const std::size_t e = embed.value_or((channels + 1) / 2);
    NonLocalParams p{Matrix::zeros(e, channels), Matrix::zeros(e, channels), Matrix::zeros(channels, channels)};
    for (double& v : p.theta.data) v = rng.uniform(-0.1, 0.1);
    for (double& v : p.phi.data) v = rng.uniform(-0.1, 0.1);
    return p;
  }
};

namespace detail {

/// Per-position channel vectors of `t` multiplied by m: result[pos][row].
inline std::vector<std::vector<double>> project(const Tensor& t, const Matrix& m) {
  const std::size_t positions = t.height() * t.width();
  std::vector<std::vector<double>> out(positions, std::vector<double>(m.rows, 0.0));
  for (std::size_t i = 0; i < t.height(); ++i)
    for (std::size_t j = 0; j < t.width(); ++j) {
      auto& v = out[i * t.width() + j];
      for (std::size_t r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) acc += m(r, c) * t(c, i, j);
        v[r] = acc;
      }
    }
  return out;
}

}  // namespace detail

/// Mean of `levels` after rescaling each to (h, w). Finer maps are max-pooled,
/// coarser maps interpolated. The per-element mean is taken over the sorted
/// values as min + sum(v - min)/L, so it does not depend on level order and
/// is exact for equal inputs.
inline Tensor integrate_levels(std::span<const Tensor> levels, std::size_t h, std::size_t w,
                               Interpolation mode = Interpolation::nearest) {
  if (levels.empty()) throw InvalidArgument("integrate: no levels");
  const std::size_t channels = levels.front().channels();
  std::vector<Tensor> rescaled;
  rescaled.reserve(levels.size());
  for (const auto& l : levels) {
    if (l.channels() != channels) {
      throw InvalidArgument("integrate: channel mismatch " + levels.front().shape().str() + " vs " + l.shape().str());
    }
    rescaled.push_back(rescale_to(l, h, w, mode));
  }
  Tensor f(channels, h, w);
  const double count = static_cast<double>(rescaled.size());
  std::vector<double> column(rescaled.size());
  for (std::size_t k = 0; k < f.size(); ++k) {
    for (std::size_t l = 0; l < rescaled.size(); ++l) column[l] = rescaled[l].data()[k];
    std::sort(column.begin(), column.end());
    double excess = 0.0;
    for (double v : column) excess += v - column.front();
    f.data()[k] = column.front() + excess / count;
  }
  return f;
}

inline Tensor integrate(const FeaturePyramid& pyr, int target_level, Interpolation mode = Interpolation::nearest) {
  pyr.validate();
  const Tensor& target = pyr.level(target_level);
  return integrate_levels(pyr.levels, target.height(), target.width(), mode);
}

/// Embedded-Gaussian attention: row i is softmax_j(theta(f_i) . phi(f_j)) over
/// all positions j. Returned as a positions x positions matrix.
inline Matrix attention_weights(const Tensor& f, const NonLocalParams& params) {
  params.validate(f.channels());
  const auto th = detail::project(f, params.theta);
  const auto ph = detail::project(f, params.phi);
  const std::size_t n = th.size();
  Matrix a = Matrix::zeros(n, n);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t e = 0; e < th[i].size(); ++e) s += th[i][e] * ph[j][e];
      row[j] = s;
    }
    const auto p = softmax(row);
    std::copy(p.begin(), p.end(), a.data.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return a;
}

/// f'_i = sum_j a_ij g(f_j) + f_i.
inline Tensor refine_nonlocal(const Tensor& f, const NonLocalParams& params) {
  const Matrix a = attention_weights(f, params);
  const auto gf = detail::project(f, params.g);
  const std::size_t n = gf.size();
  Tensor out = f;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = i / f.width();
    const std::size_t x = i % f.width();
    for (std::size_t c = 0; c < f.channels(); ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += a(i, j) * gf[j][c];
      out(c, y, x) = acc + f(c, y, x);
    }
  }
  out.require_finite();
  return out;
}

/// P_l = C_l + rescale(refined -> size of level l).
inline FeaturePyramid strengthen(const FeaturePyramid& pyr, const Tensor& refined, int target_level,
                                 Interpolation mode = Interpolation::nearest) {
  pyr.validate();
  if (refined.shape() != pyr.level(target_level).shape()) {
    throw InvalidArgument("strengthen: refined map " + refined.shape().str() + " does not match level " +
                          std::to_string(target_level) + " shape " + pyr.level(target_level).shape().str());
  }
  FeaturePyramid out{pyr.min_level, {}};
  out.levels.reserve(pyr.levels.size());
  for (const auto& c : pyr.levels) out.levels.push_back(c + rescale_to(refined, c.height(), c.width(), mode));
  return out;
}

/// Rescale, integrate, refine, strengthen.
inline FeaturePyramid balanced_feature_pyramid(const FeaturePyramid& pyr, const NonLocalParams& params,
                                               std::optional<int> target_level = std::nullopt,
                                               Interpolation mode = Interpolation::nearest) {
  pyr.validate();
  const int t = target_level.value_or(pyr.default_target_level());
  const Tensor f = integrate(pyr, t, mode);
  return strengthen(pyr, refine_nonlocal(f, params), t, mode);
}

}  // namespace balance
