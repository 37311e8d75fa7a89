#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ewt/error.hpp"

namespace ewt {

/// Smallest admissible side length of an image or pyramid level.
inline constexpr int kMinSide = 8;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
  friend constexpr bool operator==(Vec2 a, Vec2 b) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline constexpr double norm2(Vec2 v) { return v.x * v.x + v.y * v.y; }

/// Dense row-major raster. Element (x, y) lives at index y * width + x.
template <typename T>
class Grid {
public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    detail::require(width > 0 && height > 0, "grid dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid& a, const Grid& b) = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Real-valued spatial image.
using Image = Grid<double>;
/// Complex spectrum on the center-origin frequency grid.
using Spectrum = Grid<std::complex<double>>;
/// Per-pixel displacement d, the total map being p -> p + d(p).
using DisplacementField = Grid<Vec2>;
/// Integer label raster (partitions, segmentations).
using LabelMap = Grid<int>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch (" +
                          std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                          " vs " + std::to_string(b.width()) + "x" +
                          std::to_string(b.height()) + ")");
  }
}

inline bool all_finite(const Image& img) {
  return std::all_of(img.begin(), img.end(), [](double v) { return std::isfinite(v); });
}

inline bool all_finite(const DisplacementField& f) {
  return std::all_of(f.begin(), f.end(),
                     [](Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); });
}

inline void check_image(const Image& img, const char* what) {
  if (img.width() < kMinSide || img.height() < kMinSide) {
    throw InvalidArgument(std::string(what) + ": images must be at least 8x8");
  }
  if (!all_finite(img)) throw NumericError(std::string(what) + ": non-finite pixel value");
}

/// Center-origin frequency grid helpers. Pixel (x, y) sits at offset
/// (x - W/2, y - H/2) from the origin; in normalized units the offset is
/// divided by (W, H), giving xi in [-1/2, 1/2)^2.
struct FrequencyGrid {
  int width = 0;
  int height = 0;

  FrequencyGrid() = default;
  FrequencyGrid(int w, int h) : width(w), height(h) {}
  template <typename T>
  explicit FrequencyGrid(const Grid<T>& g) : width(g.width()), height(g.height()) {}

  int cx() const { return width / 2; }
  int cy() const { return height / 2; }
  Vec2 center() const { return {static_cast<double>(cx()), static_cast<double>(cy())}; }

  /// Pixel offset from the origin.
  Vec2 offset(int x, int y) const {
    return {static_cast<double>(x - cx()), static_cast<double>(y - cy())};
  }

  Vec2 normalized(int x, int y) const {
    return {static_cast<double>(x - cx()) / width, static_cast<double>(y - cy()) / height};
  }

  /// Pixel holding frequency -xi. Nyquist row/column (even sizes) map to themselves.
  int mirror_x(int x) const { return ((2 * cx() - x) % width + width) % width; }
  int mirror_y(int y) const { return ((2 * cy() - y) % height + height) % height; }

  std::size_t mirror_index(std::size_t i) const {
    const int x = static_cast<int>(i % static_cast<std::size_t>(width));
    const int y = static_cast<int>(i / static_cast<std::size_t>(width));
    return static_cast<std::size_t>(mirror_y(y)) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(mirror_x(x));
  }

  bool on_nyquist(int x, int y) const {
    return (width % 2 == 0 && x == 0) || (height % 2 == 0 && y == 0);
  }

  /// Canonical member of a mirror pair: the one with the larger linear index.
  /// Self-mirrored pixels are neither canonical nor non-canonical.
  bool canonical(int x, int y) const {
    const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                          static_cast<std::size_t>(x);
    return i > mirror_index(i);
  }

  bool self_mirrored(int x, int y) const { return mirror_x(x) == x && mirror_y(y) == y; }
};

/// Returns g(mirror(p)) at every p.
template <typename T>
Grid<T> mirrored(const Grid<T>& g) {
  const FrequencyGrid fg(g);
  Grid<T> out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    const int my = fg.mirror_y(y);
    for (int x = 0; x < g.width(); ++x) out(x, y) = g(fg.mirror_x(x), my);
  }
  return out;
}

}  // namespace ewt
