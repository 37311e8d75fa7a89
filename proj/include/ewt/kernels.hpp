#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <string_view>

#include "ewt/grid.hpp"

namespace ewt {

enum class KernelKind { Disk, Square };

inline std::string to_string(KernelKind k) { return k == KernelKind::Disk ? "disk" : "square"; }

inline KernelKind parse_kernel_kind(std::string_view s) {
  if (s == "disk") return KernelKind::Disk;
  if (s == "square") return KernelKind::Square;
  throw InvalidArgument("unknown kernel kind '" + std::string(s) + "' (expected disk|square)");
}

/// Transition polynomial x^4 (35 - 84x + 70x^2 - 20x^3).
inline double beta(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("beta: argument outside [0, 1]");
  const double x2 = x * x;
  return x2 * x2 * (35.0 - 84.0 * x + 70.0 * x2 - 20.0 * x2 * x);
}

/// Any continuous function on [0, 1] with b(0)=0, b(1)=1, b(x)+b(1-x)=1.
using TransitionFn = std::function<double(double)>;

struct KernelSpec {
  KernelKind kind = KernelKind::Disk;
  double tau = 0.2;

  KernelSpec() = default;
  KernelSpec(KernelKind k, double t) : kind(k), tau(t) { validate(); }

  void validate() const {
    if (!(tau > 0.0 && tau < 0.5)) throw InvalidArgument("kernel: tau must lie in (0, 1/2)");
  }

  /// Half-width of the enlarged support Lambda_tau (radius or half-side).
  double enlarged_extent() const { return 0.5 + tau; }
};

namespace detail {
inline void check_tau(double tau) {
  if (!(tau > 0.0 && tau < 0.5)) throw InvalidArgument("kernel: tau must lie in (0, 1/2)");
}

// Profile shared by the 1D and disk kernels; r >= 0.
inline double radial_profile(double r, double tau, const TransitionFn* transition) {
  if (r < 0.5 - tau) return 1.0;
  if (r > 0.5 + tau) return 0.0;
  const double t = std::clamp((tau - 0.5 + r) / (2.0 * tau), 0.0, 1.0);
  const double b = transition != nullptr ? (*transition)(t) : beta(t);
  return std::cos(std::numbers::pi / 2.0 * b);
}
}  // namespace detail

/// 1D band-pass window: 1 on |xi| < 1/2 - tau, cosine transition of width
/// 2 tau, 0 beyond 1/2 + tau.
inline double psi_1d(double xi, double tau) {
  detail::check_tau(tau);
  return detail::radial_profile(std::abs(xi), tau, nullptr);
}

inline double psi_1d(double xi, double tau, const TransitionFn& transition) {
  detail::check_tau(tau);
  return detail::radial_profile(std::abs(xi), tau, &transition);
}

/// Isotropic kernel: the 1D profile applied to the Euclidean norm.
inline double psi_disk(Vec2 xi, double tau) {
  detail::check_tau(tau);
  return detail::radial_profile(norm(xi), tau, nullptr);
}

/// Separable kernel: product of 1D profiles.
inline double psi_square(Vec2 xi, double tau) {
  detail::check_tau(tau);
  const double a = detail::radial_profile(std::abs(xi.x), tau, nullptr);
  if (a == 0.0) return 0.0;
  return a * detail::radial_profile(std::abs(xi.y), tau, nullptr);
}

inline double evaluate(const KernelSpec& k, Vec2 xi) {
  return k.kind == KernelKind::Disk ? psi_disk(xi, k.tau) : psi_square(xi, k.tau);
}

/// True when xi lies in the nominal support Lambda (closed disk of radius 1/2
/// or closed square of half-side 1/2).
inline bool in_support(KernelKind kind, Vec2 xi) {
  if (kind == KernelKind::Disk) return norm2(xi) <= 0.25;
  return std::abs(xi.x) <= 0.5 && std::abs(xi.y) <= 0.5;
}

/// Placement of Lambda on a pixel grid: centered on the origin pixel with
/// radius (half-side) r_target = 0.35 * min(W, H) / 2. Kernel unit 1/2 spans
/// r_target pixels, so kernel coordinate = (q - center) / (2 r_target).
struct SupportFrame {
  Vec2 center;
  double radius = 0.0;

  SupportFrame() = default;
  SupportFrame(int width, int height)
      : center(FrequencyGrid(width, height).center()),
        radius(0.35 * std::min(width, height) / 2.0) {}
  template <typename T>
  explicit SupportFrame(const Grid<T>& g) : SupportFrame(g.width(), g.height()) {}

  Vec2 to_kernel(Vec2 pixel) const { return (pixel - center) / (2.0 * radius); }
  Vec2 to_pixel(Vec2 kernel) const { return center + (2.0 * radius) * kernel; }

  /// Area of Lambda in square pixels.
  double support_area(KernelKind kind) const {
    return kind == KernelKind::Disk ? std::numbers::pi * radius * radius
                                    : 4.0 * radius * radius;
  }
};

}  // namespace ewt
