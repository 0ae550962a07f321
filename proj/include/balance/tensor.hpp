#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "balance/error.hpp"

namespace balance {

struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const noexcept { return channels * height * width; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

/// Dense channels x height x width array of finite doubles, row-major in
/// (channel, row, column).
class Tensor {
 public:
  Tensor(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
      : shape_{channels, height, width} {
    check_shape();
    check_finite_value(fill);
    data_.assign(shape_.size(), fill);
  }

  Tensor(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> data)
      : shape_{channels, height, width}, data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_.size()) {
      throw InvalidArgument("tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_.str());
    }
    for (double v : data_) check_finite_value(v);
  }

  Tensor(Shape shape, double fill = 0.0) : Tensor(shape.channels, shape.height, shape.width, fill) {}

  const Shape& shape() const noexcept { return shape_; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  std::size_t size() const noexcept { return data_.size(); }

  double operator()(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_.height + i) * shape_.width + j];
  }
  double& operator()(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * shape_.height + i) * shape_.width + j];
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(other, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
  }

  Tensor& operator*=(double s) {
    check_finite_value(s);
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator*(Tensor a, double s) { return a *= s; }

  bool operator==(const Tensor& other) const = default;

  /// Re-checks the finiteness invariant after in-place writes.
  void require_finite() const {
    for (double v : data_) check_finite_value(v);
  }

 private:
  void check_shape() const {
    if (shape_.channels == 0 || shape_.height == 0 || shape_.width == 0) {
      throw InvalidArgument("tensor dimensions must be positive, got " + shape_.str());
    }
  }

  static void check_finite_value(double v) {
    if (!std::isfinite(v)) throw InvalidArgument("tensor values must be finite");
  }

  void require_same_shape(const Tensor& other, const char* op) const {
    if (shape_ != other.shape_) {
      throw InvalidArgument(std::string("shape mismatch in ") + op + ": " + shape_.str() + " vs " +
                            other.shape_.str());
    }
  }

  Shape shape_;
  std::vector<double> data_;
};

enum class Interpolation { nearest, bilinear };

/// Nearest-neighbour upsampling: out(c, i, j) = src(c, floor(i*H/out_h), floor(j*W/out_w)).
inline Tensor resize_nearest(const Tensor& src, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw InvalidArgument("resize_nearest: output dimensions must be positive");
  if (out_h < src.height() || out_w < src.width()) {
    throw InvalidArgument("resize_nearest: upsampling only, cannot go from " + src.shape().str() + " to " +
                          std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  Tensor out(src.channels(), out_h, out_w);
  for (std::size_t c = 0; c < src.channels(); ++c)
    for (std::size_t i = 0; i < out_h; ++i) {
      const std::size_t si = i * src.height() / out_h;
      for (std::size_t j = 0; j < out_w; ++j) out(c, i, j) = src(c, si, j * src.width() / out_w);
    }
  return out;
}

/// Bilinear upsampling with half-pixel centres. Non-default; results depend on
/// floating-point rounding, unlike the nearest path.
inline Tensor resize_bilinear(const Tensor& src, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw InvalidArgument("resize_bilinear: output dimensions must be positive");
  if (out_h < src.height() || out_w < src.width()) {
    throw InvalidArgument("resize_bilinear: upsampling only, cannot go from " + src.shape().str());
  }
  auto source_coord = [](std::size_t o, std::size_t in_n, std::size_t out_n) {
    const double s = (static_cast<double>(o) + 0.5) * static_cast<double>(in_n) / static_cast<double>(out_n) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in_n - 1));
  };
  Tensor out(src.channels(), out_h, out_w);
  for (std::size_t i = 0; i < out_h; ++i) {
    const double y = source_coord(i, src.height(), out_h);
    const auto y0 = static_cast<std::size_t>(y);
    const std::size_t y1 = std::min(y0 + 1, src.height() - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t j = 0; j < out_w; ++j) {
      const double x = source_coord(j, src.width(), out_w);
      const auto x0 = static_cast<std::size_t>(x);
      const std::size_t x1 = std::min(x0 + 1, src.width() - 1);
      const double fx = x - static_cast<double>(x0);
      for (std::size_t c = 0; c < src.channels(); ++c) {
        const double top = src(c, y0, x0) * (1.0 - fx) + src(c, y0, x1) * fx;
        const double bottom = src(c, y1, x0) * (1.0 - fx) + src(c, y1, x1) * fx;
        out(c, i, j) = top * (1.0 - fy) + bottom * fy;
      }
    }
  }
  return out;
}

inline Tensor resize(const Tensor& src, std::size_t out_h, std::size_t out_w,
                     Interpolation mode = Interpolation::nearest) {
  return mode == Interpolation::nearest ? resize_nearest(src, out_h, out_w) : resize_bilinear(src, out_h, out_w);
}

/// Max-pool down to (out_h, out_w); source dimensions must be exact multiples.
inline Tensor maxpool_to(const Tensor& src, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0 || out_h > src.height() || out_w > src.width() || src.height() % out_h != 0 ||
      src.width() % out_w != 0) {
    throw InvalidArgument("maxpool_to: cannot pool " + src.shape().str() + " to " +
                          Shape{src.channels(), out_h, out_w}.str() + " (dimensions must divide evenly)");
  }
  const std::size_t kh = src.height() / out_h;
  const std::size_t kw = src.width() / out_w;
  Tensor out(src.channels(), out_h, out_w);
  for (std::size_t c = 0; c < src.channels(); ++c)
    for (std::size_t i = 0; i < out_h; ++i)
      for (std::size_t j = 0; j < out_w; ++j) {
        double m = src(c, i * kh, j * kw);
        for (std::size_t di = 0; di < kh; ++di)
          for (std::size_t dj = 0; dj < kw; ++dj) m = std::max(m, src(c, i * kh + di, j * kw + dj));
        out(c, i, j) = m;
      }
  return out;
}

/// Resizes toward (h, w): upsample with `mode`, downsample with max-pooling.
inline Tensor rescale_to(const Tensor& src, std::size_t h, std::size_t w,
                         Interpolation mode = Interpolation::nearest) {
  if (h == src.height() && w == src.width()) return src;
  if (h >= src.height() && w >= src.width()) return resize(src, h, w, mode);
  if (h <= src.height() && w <= src.width()) return maxpool_to(src, h, w);
  throw InvalidArgument("rescale_to: mixed up/down rescale from " + src.shape().str() + " to " +
                        std::to_string(h) + "x" + std::to_string(w));
}

/// Shifted softmax; max(z) is subtracted before exponentiation.
inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("softmax: empty input");
  const double m = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(m)) throw InvalidArgument("softmax: non-finite input");
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (!std::isfinite(logits[k])) throw InvalidArgument("softmax: non-finite input");
    out[k] = std::exp(logits[k] - m);
    total += out[k];
  }
  for (double& v : out) v /= total;
  return out;
}

/// log(sum(exp(z))), shifted.
inline double log_sum_exp(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("log_sum_exp: empty input");
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - m);
  return m + std::log(total);
}

}  // namespace balance
