#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "ewt/grid.hpp"
#include "ewt/kernels.hpp"
#include "ewt/partition.hpp"
#include "ewt/transform.hpp"

namespace ewt {

/// Closed-form partition of the frequency plane into a center disk and four
/// concentric rings, each ring split into the half-planes y >= 0 (label +k)
/// and y < 0 (label -k), together with smooth maps from every region onto
/// Lambda. Used as ground truth for the transform: the maps and their
/// Jacobians are known exactly.
class AnnulusBank {
 public:
  static constexpr int kRings = 4;

  AnnulusBank(int width, int height, KernelKind kind) : grid_(width, height), kind_(kind) {
    detail::require(width >= kMinSide && height >= kMinSide, "annulus bank: grid too small");
    half_ = std::min(width, height) / 2.0;
    radii_ = {0.15 * half_, 0.35 * half_, 0.55 * half_, 0.75 * half_};
    frame_ = SupportFrame(width, height);
    build_labels();
  }

  const Partition& partition() const { return partition_; }
  KernelKind kind() const { return kind_; }
  const std::array<double, 4>& radii() const { return radii_; }

  /// Kernel coordinate of the map of region `label` (>= 0) at pixel offset P.
  Vec2 kernel_point(int label, Vec2 P) const {
    if (label == 0) {
      const Vec2 v = P / (2.0 * radii_[0]);
      return kind_ == KernelKind::Disk ? v : disk_to_square(v);
    }
    const double r = norm(P);
    double theta = std::atan2(P.y, P.x);
    if (theta < -std::numbers::pi / 2.0) theta += 2.0 * std::numbers::pi;
    double inner = radii_[static_cast<std::size_t>(label - 1)];
    double outer = label < kRings ? radii_[static_cast<std::size_t>(label)] : edge_radius(theta);
    const Vec2 v{(r - 0.5 * (inner + outer)) / (outer - inner), (theta - std::numbers::pi / 2.0) / std::numbers::pi};
    return kind_ == KernelKind::Square ? v : square_to_disk(v);
  }

  /// Map of region `label` at pixel p (Lambda frame, pixels) with its
  /// Jacobian determinant; negative labels use xi -> -gamma(-xi).
  SampledMap sampled(int label) const {
    const int w = grid_.width;
    const int h = grid_.height;
    SampledMap m{Grid<Vec2>(w, h), Image(w, h)};
    const double sign = label < 0 ? -1.0 : 1.0;
    const int n = std::abs(label);
    auto gamma = [&](Vec2 P) { return sign * (2.0 * frame_.radius) * kernel_point(n, sign * P); };
    constexpr double step = 1e-4;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const Vec2 P = grid_.offset(x, y);
        m.target(x, y) = frame_.center + gamma(P);
        const Vec2 gx = (gamma(P + Vec2{step, 0}) - gamma(P - Vec2{step, 0})) / (2 * step);
        const Vec2 gy = (gamma(P + Vec2{0, step}) - gamma(P - Vec2{0, step})) / (2 * step);
        m.det(x, y) = std::max(std::abs(gx.x * gy.y - gx.y * gy.x), 1e-8);
      }
    return m;
  }

  FilterBank bank(double tau, bool normalized) const {
    std::vector<int> labels;
    std::vector<SampledMap> plus, minus;
    for (int n = 0; n <= kRings; ++n) {
      labels.push_back(n);
      plus.push_back(sampled(n));
      minus.push_back(n == 0 ? SampledMap{} : sampled(-n));
    }
    return build_bank(labels, plus, minus, KernelSpec(kind_, tau), normalized);
  }

  /// Square [-1/2, 1/2]^2 onto the disk of radius 1/2, radially.
  static Vec2 square_to_disk(Vec2 v) {
    const double l2 = norm(v);
    if (l2 == 0.0) return v;
    return (std::max(std::abs(v.x), std::abs(v.y)) / l2) * v;
  }

  static Vec2 disk_to_square(Vec2 w) {
    const double linf = std::max(std::abs(w.x), std::abs(w.y));
    if (linf == 0.0) return w;
    return (norm(w) / linf) * w;
  }

 private:
  double edge_radius(double theta) const {
    const double c = std::abs(std::cos(theta));
    const double s = std::abs(std::sin(theta));
    const double bx = c > 0.0 ? (grid_.width / 2.0) / c : std::numeric_limits<double>::infinity();
    const double by = s > 0.0 ? (grid_.height / 2.0) / s : std::numeric_limits<double>::infinity();
    return std::min(bx, by);
  }

  void build_labels() {
    partition_.labels = LabelMap(grid_.width, grid_.height);
    for (int y = 0; y < grid_.height; ++y)
      for (int x = 0; x < grid_.width; ++x) {
        const Vec2 P = grid_.offset(x, y);
        const double r = norm(P);
        int ring = 0;
        while (ring < kRings && r >= radii_[static_cast<std::size_t>(ring)]) ++ring;
        int label = ring;
        if (ring > 0 && !(P.y > 0.0 || (P.y == 0.0 && P.x > 0.0))) label = -ring;
        if (grid_.self_mirrored(x, y)) label = ring;
        partition_.labels(x, y) = label;
      }
    const Pixel origin{grid_.cx(), grid_.cy()};
    partition_.centers.push_back(origin);
    for (int k = 1; k <= kRings; ++k) {
      const double rho = k < kRings ? 0.5 * (radii_[static_cast<std::size_t>(k - 1)] + radii_[static_cast<std::size_t>(k)])
                                    : 0.5 * (radii_[3] + half_);
      const int off = static_cast<int>(std::lround(rho));
      partition_.centers.push_back({origin.x, origin.y + off});
      partition_.centers.push_back({origin.x, origin.y - off});
    }
  }

  FrequencyGrid grid_;
  KernelKind kind_;
  double half_ = 0.0;
  std::array<double, 4> radii_{};
  SupportFrame frame_;
  Partition partition_;
};

}  // namespace ewt
