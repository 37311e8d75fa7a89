#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <algorithm>
#include <random>
#include <vector>

#include "ewt/grid.hpp"

namespace ewt::testing {

inline Image random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Image img(w, h);
  for (double& v : img) v = unit(rng);
  return img;
}

inline DisplacementField constant_field(int w, int h, Vec2 c) { return DisplacementField(w, h, c); }

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Cosine grating cos(2 pi (kx x / W + ky y / H)).
inline Image grating(int w, int h, double kx, double ky, double amplitude = 1.0, double offset = 0.0) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img(x, y) = offset + amplitude * std::cos(2.0 * std::numbers::pi *
                                                (kx * x / static_cast<double>(w) +
                                                 ky * y / static_cast<double>(h)));
  return img;
}

/// Binary disk of radius r centered at (cx, cy).
inline Image disk(int w, int h, double cx, double cy, double r) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img(x, y) = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r ? 1.0 : 0.0;
  return img;
}

struct Mosaic {
  Image image;
  LabelMap truth;  // 0-based texture index
};

/// Cosine textures 0.5 + 0.4 cos(...) on known regions. With k = 2 the halves
/// are split left/right; with k = 3 the right half is split top/bottom.
inline Mosaic texture_mosaic(int n, int k) {
  struct Wave {
    double kx, ky;
  };
  const Wave waves[3] = {{10.3, 3.1}, {-4.2, 22.7}, {30.4, -28.6}};
  const double scale = n / 128.0;
  Mosaic m{Image(n, n), LabelMap(n, n, 0)};
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const int t = x < n / 2 ? 0 : (k == 2 || y < n / 2 ? 1 : 2);
      const Wave& w = waves[t];
      m.truth(x, y) = t;
      m.image(x, y) = 0.5 + 0.4 * std::cos(2.0 * std::numbers::pi * scale * (w.kx * x + w.ky * y) / n);
    }
  return m;
}

/// Fraction of pixels where labels (1..k) match truth (0..k-1) under the best
/// relabeling.
inline double best_permutation_accuracy(const LabelMap& labels, const LabelMap& truth, int k) {
  std::vector<int> perm(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::size_t best = 0;
  do {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (perm[static_cast<std::size_t>(labels[i] - 1)] == truth[i]) ++ok;
    best = std::max(best, ok);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

}  // namespace ewt::testing
