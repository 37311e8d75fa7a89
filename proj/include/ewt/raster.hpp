#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ewt/grid.hpp"
#include "ewt/parallel.hpp"

namespace ewt {

/// Bilinear interpolation at a continuous pixel position. Samples outside the
/// grid read as zero, so the result fades to 0 within one pixel of the border.
inline double bilinear_sample(const Image& img, Vec2 p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) return 0.0;
  const double fx = std::floor(p.x);
  const double fy = std::floor(p.y);
  if (fx < -1.0 || fy < -1.0 || fx > img.width() || fy > img.height()) return 0.0;
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double ax = p.x - fx;
  const double ay = p.y - fy;
  auto at = [&](int x, int y) -> double {
    if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return 0.0;
    return img(x, y);
  };
  // Exact node reproduction: skip neighbors with zero weight.
  double top = at(x0, y0);
  if (ax != 0.0) top = (1.0 - ax) * top + ax * at(x0 + 1, y0);
  if (ay == 0.0) return top;
  double bottom = at(x0, y0 + 1);
  if (ax != 0.0) bottom = (1.0 - ax) * bottom + ax * at(x0 + 1, y0 + 1);
  return (1.0 - ay) * top + ay * bottom;
}

/// Bilinear interpolation with clamp-to-edge addressing; used for fields,
/// where zero padding would invent spurious displacements.
template <typename T>
T sample_clamped(const Grid<T>& g, Vec2 p) {
  const double px = std::clamp(p.x, 0.0, static_cast<double>(g.width() - 1));
  const double py = std::clamp(p.y, 0.0, static_cast<double>(g.height() - 1));
  const int x0 = std::min(static_cast<int>(px), g.width() - 1);
  const int y0 = std::min(static_cast<int>(py), g.height() - 1);
  const int x1 = std::min(x0 + 1, g.width() - 1);
  const int y1 = std::min(y0 + 1, g.height() - 1);
  const double ax = px - x0;
  const double ay = py - y0;
  T top = g(x0, y0);
  if (ax != 0.0) top = (1.0 - ax) * top + ax * g(x1, y0);
  if (ay == 0.0) return top;
  T bottom = g(x0, y1);
  if (ax != 0.0) bottom = (1.0 - ax) * bottom + ax * g(x1, y1);
  return (1.0 - ay) * top + ay * bottom;
}

/// output(p) = img(p + d(p)), bilinear with zero padding.
inline Image warp(const Image& img, const DisplacementField& d) {
  require_same_shape(img, d, "warp");
  Image out(img.width(), img.height());
  parallel_for(img.height(), [&](int y) {
    for (int x = 0; x < img.width(); ++x) {
      const Vec2 v = d(x, y);
      if (v.x == 0.0 && v.y == 0.0) {
        out(x, y) = img(x, y);
      } else {
        out(x, y) = bilinear_sample(img, Vec2{x + v.x, y + v.y});
      }
    }
  });
  return out;
}

/// Displacement of the composed map (p -> p + outer(p)) followed by inner:
/// result(p) = outer(p) + inner(p + outer(p)).
inline DisplacementField compose(const DisplacementField& inner,
                                 const DisplacementField& outer) {
  require_same_shape(inner, outer, "compose");
  DisplacementField out(inner.width(), inner.height());
  parallel_for(inner.height(), [&](int y) {
    for (int x = 0; x < inner.width(); ++x) {
      const Vec2 e = outer(x, y);
      out(x, y) = e + sample_clamped(inner, Vec2{x + e.x, y + e.y});
    }
  });
  return out;
}

/// Normalized, truncated discrete Gaussian taps for offsets -r..r, r = ceil(3 sigma).
inline std::vector<double> gaussian_taps(double sigma) {
  if (sigma < 0.0 || !std::isfinite(sigma)) {
    throw InvalidArgument("gaussian_smooth: sigma must be finite and >= 0");
  }
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * k * k / (sigma * sigma));
    taps[static_cast<std::size_t>(k + radius)] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

/// Separable Gaussian convolution with replicate-edge boundary.
template <typename T>
Grid<T> gaussian_smooth(const Grid<T>& in, double sigma) {
  const std::vector<double> taps = gaussian_taps(sigma);
  if (taps.size() == 1) return in;
  const int radius = static_cast<int>(taps.size() / 2);
  const int w = in.width();
  const int h = in.height();
  Grid<T> tmp(w, h);
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      // Deviations from the center sample, so constants pass through exactly.
      const T center = in(x, y);
      T acc{};
      for (int k = -radius; k <= radius; ++k) {
        const int xx = std::clamp(x + k, 0, w - 1);
        acc += taps[static_cast<std::size_t>(k + radius)] * (in(xx, y) - center);
      }
      tmp(x, y) = center + acc;
    }
  });
  Grid<T> out(w, h);
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const T center = tmp(x, y);
      T acc{};
      for (int k = -radius; k <= radius; ++k) {
        const int yy = std::clamp(y + k, 0, h - 1);
        acc += taps[static_cast<std::size_t>(k + radius)] * (tmp(x, yy) - center);
      }
      out(x, y) = center + acc;
    }
  });
  return out;
}

enum class Resample { Down, Up };

inline bool is_power_of_two(int f) { return f > 0 && (f & (f - 1)) == 0; }

/// Pyramid resampling by a power-of-two factor. Down: Gaussian pre-smoothing
/// (sigma = factor/2) then decimation, coarse q <-> fine factor*q. Up: bilinear
/// magnification to (target_width, target_height), defaulting to factor times
/// the input size.
template <typename T>
Grid<T> resample(const Grid<T>& in, int factor, Resample direction, int target_width = 0,
                 int target_height = 0) {
  if (!is_power_of_two(factor)) throw InvalidArgument("resample: factor must be a power of two");
  if (factor == 1 && target_width == 0 && target_height == 0) return in;
  if (direction == Resample::Down) {
    const int w = in.width() / factor;
    const int h = in.height() / factor;
    if (w < kMinSide || h < kMinSide) {
      throw InvalidArgument("resample: result smaller than 8 pixels per side");
    }
    const Grid<T> smooth = gaussian_smooth(in, factor / 2.0);
    Grid<T> out(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out(x, y) = smooth(x * factor, y * factor);
    return out;
  }
  const int w = target_width > 0 ? target_width : in.width() * factor;
  const int h = target_height > 0 ? target_height : in.height() * factor;
  if (w < kMinSide || h < kMinSide) {
    throw InvalidArgument("resample: result smaller than 8 pixels per side");
  }
  Grid<T> out(w, h);
  const double inv = 1.0 / factor;
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) out(x, y) = sample_clamped(in, Vec2{x * inv, y * inv});
  });
  return out;
}

}  // namespace ewt
