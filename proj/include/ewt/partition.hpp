#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>
#include <queue>
#include <tuple>
#include <utility>
#include <vector>

#include "ewt/fft.hpp"
#include "ewt/grid.hpp"
#include "ewt/parallel.hpp"
#include "ewt/raster.hpp"

namespace ewt {

struct Pixel {
  int x = 0;
  int y = 0;
  friend constexpr bool operator==(Pixel, Pixel) = default;
  friend constexpr auto operator<=>(Pixel, Pixel) = default;
};

/// Detected harmonic modes. centers[0] is the origin; the remaining entries
/// come in mirror pairs (canonical, mirror) so that pair n occupies indices
/// 2n-1 and 2n.
struct ModeSet {
  std::vector<Pixel> centers;
  std::vector<double> persistence;

  std::size_t pair_count() const { return centers.empty() ? 0 : (centers.size() - 1) / 2; }
};

/// Label of the i-th center of a ModeSet: 0, +1, -1, +2, -2, ...
inline int label_of_center(std::size_t index) {
  if (index == 0) return 0;
  const int n = static_cast<int>((index + 1) / 2);
  return index % 2 == 1 ? n : -n;
}

/// Inverse of label_of_center; also the tie-break order between labels.
inline int label_rank(int label) { return label == 0 ? 0 : (label > 0 ? 2 * label - 1 : -2 * label); }

/// Symmetric partition of the frequency grid. Region 0 holds the origin;
/// region -n is the mirror image of region n. The (at most three)
/// self-mirrored Nyquist pixels other than the origin carry a non-negative
/// label.
struct Partition {
  LabelMap labels;
  std::vector<Pixel> centers;  // indexed like ModeSet::centers
  double s0 = 0.0;

  int width() const { return labels.width(); }
  int height() const { return labels.height(); }

  /// Largest positive label N; labels range over -N..N.
  int max_label() const {
    int m = 0;
    for (int v : labels) m = std::max(m, std::abs(v));
    return m;
  }

  /// Non-negative labels 0..N, the index set of a symmetric filter bank.
  std::vector<int> positive_labels() const {
    std::vector<int> out;
    for (int n = 0; n <= max_label(); ++n) out.push_back(n);
    return out;
  }

  std::vector<std::pair<int, int>> pairs() const {
    std::vector<std::pair<int, int>> out;
    for (int n = 1; n <= max_label(); ++n) out.emplace_back(n, -n);
    return out;
  }

  std::size_t region_size(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
  }
};

/// log(1 + |f^|) on the center-origin grid, rescaled linearly to [0, 1].
inline Image log_spectrum(const Image& f) {
  check_image(f, "log_spectrum");
  const Spectrum s = dft2(f);
  Image out(f.width(), f.height());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = std::log1p(std::abs(s[i]));
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double min = *lo;
  const double range = *hi - *lo;
  for (double& v : out) v = range > 0.0 ? (v - min) / range : 0.0;
  return out;
}

struct ModeDetectionOptions {
  /// Scale-space step: scale i has standard deviation s0 * sqrt(i).
  double s0 = 0.8;
  /// Largest standard deviation explored, as a fraction of min(W, H).
  double max_sigma_fraction = 0.05;
  /// Maxima within this Chebyshev distance of the origin merge into it.
  int origin_exclusion = 1;
};

namespace detail {

// Differences below this are FFT round-off (log spectra live in [0, 1]);
// without it the numerically flat floor of an exactly band-limited spectrum
// is full of spurious maxima.
inline constexpr double kPeakTolerance = 1e-12;

inline bool strict_local_max(const Image& img, int x, int y) {
  const double v = img(x, y) - kPeakTolerance;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const int xx = x + dx;
      const int yy = y + dy;
      if (xx < 0 || yy < 0 || xx >= img.width() || yy >= img.height()) continue;
      if (img(xx, yy) >= v) return false;
    }
  }
  return true;
}

/// Two-class Otsu threshold over integer-valued samples. Returns the largest
/// value of the lower class, or nullopt-like -1 when all samples coincide.
inline int otsu_threshold(const std::vector<int>& values) {
  if (values.empty()) return -1;
  std::map<int, std::size_t> histogram;
  for (int v : values) ++histogram[v];
  if (histogram.size() < 2) return -1;
  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (auto [v, c] : histogram) sum_all += static_cast<double>(v) * c;
  double best = -1.0;
  int threshold = -1;
  double weight0 = 0.0;
  double sum0 = 0.0;
  for (auto it = histogram.begin(); std::next(it) != histogram.end(); ++it) {
    weight0 += static_cast<double>(it->second);
    sum0 += static_cast<double>(it->first) * it->second;
    const double weight1 = total - weight0;
    const double mean0 = sum0 / weight0;
    const double mean1 = (sum_all - sum0) / weight1;
    const double between = weight0 * weight1 * (mean0 - mean1) * (mean0 - mean1);
    if (between > best) {
      best = between;
      threshold = it->first;
    }
  }
  return threshold;
}

}  // namespace detail

/// Scale-space mode detection on a (log) spectrum. Strict 8-neighborhood
/// maxima at scale 0 are tracked across the Gaussian scale-space (moving at
/// most one pixel per step); persistence is the number of scales a maximum
/// survives. Maxima whose persistence exceeds the Otsu threshold are kept,
/// paired with their mirror image, and the origin is added.
inline ModeSet detect_modes(const Image& logspec, const ModeDetectionOptions& options = {}) {
  if (!(options.s0 > 0.0)) throw InvalidArgument("detect_modes: s0 must be positive");
  const FrequencyGrid fg(logspec);
  const Pixel origin{fg.cx(), fg.cy()};
  ModeSet result;
  result.centers.push_back(origin);

  struct Track {
    Pixel start;
    Pixel at;
    double value0;
    int persistence = 0;
    bool alive = true;
  };
  std::vector<Track> tracks;
  for (int y = 0; y < logspec.height(); ++y) {
    for (int x = 0; x < logspec.width(); ++x) {
      if (detail::strict_local_max(logspec, x, y)) {
        tracks.push_back({{x, y}, {x, y}, logspec(x, y)});
      }
    }
  }
  const double max_sigma = options.max_sigma_fraction * std::min(logspec.width(), logspec.height());
  const int max_scales = std::max(1, static_cast<int>(std::ceil(
                                         (max_sigma * max_sigma) / (options.s0 * options.s0))));
  result.persistence.push_back(static_cast<double>(max_scales));
  if (tracks.empty()) return result;

  Image level = logspec;
  int alive = static_cast<int>(tracks.size());
  for (int scale = 1; scale <= max_scales && alive > 1; ++scale) {
    level = gaussian_smooth(level, options.s0);
    std::map<Pixel, std::size_t> occupied;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      Track& tr = tracks[t];
      if (!tr.alive) continue;
      // Follow the nearest maximum within one pixel; prefer staying put, then
      // the highest neighbor.
      bool found = false;
      Pixel next = tr.at;
      if (detail::strict_local_max(level, tr.at.x, tr.at.y)) {
        found = true;
      } else {
        double best = -std::numeric_limits<double>::infinity();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = tr.at.x + dx;
            const int yy = tr.at.y + dy;
            if (xx < 0 || yy < 0 || xx >= level.width() || yy >= level.height()) continue;
            if ((dx != 0 || dy != 0) && detail::strict_local_max(level, xx, yy) &&
                level(xx, yy) > best) {
              best = level(xx, yy);
              next = {xx, yy};
              found = true;
            }
          }
        }
      }
      if (!found) {
        tr.alive = false;
        --alive;
        continue;
      }
      tr.at = next;
      if (auto it = occupied.find(next); it != occupied.end()) {
        // Two tracks merged: the one that started lower dies.
        Track& other = tracks[it->second];
        Track& loser = (other.value0 >= tr.value0) ? tr : other;
        if (&loser == &other) it->second = t;
        loser.alive = false;
        --alive;
        if (&loser == &tr) continue;
      } else {
        occupied.emplace(next, t);
      }
      ++tracks[occupied[next]].persistence;
    }
  }
  for (Track& tr : tracks) {
    if (tr.alive) tr.persistence = max_scales;
  }

  std::vector<int> persistences;
  for (const Track& tr : tracks) persistences.push_back(tr.persistence);
  const int threshold = detail::otsu_threshold(persistences);

  std::vector<const Track*> kept;
  for (const Track& tr : tracks) {
    if (tr.persistence <= threshold) continue;
    const int dx = std::abs(tr.start.x - origin.x);
    const int dy = std::abs(tr.start.y - origin.y);
    if (std::max(dx, dy) <= options.origin_exclusion) continue;
    if (fg.self_mirrored(tr.start.x, tr.start.y)) continue;
    kept.push_back(&tr);
  }
  // Symmetrize: keep a canonical maximum when some kept maximum lies within
  // one pixel of its mirror, then use the exact mirror position.
  std::vector<Pixel> canon;
  std::vector<double> canon_persistence;
  for (const Track* a : kept) {
    if (!fg.canonical(a->start.x, a->start.y)) continue;
    const Pixel m{fg.mirror_x(a->start.x), fg.mirror_y(a->start.y)};
    const bool paired = std::any_of(kept.begin(), kept.end(), [&](const Track* b) {
      return std::abs(b->start.x - m.x) <= 1 && std::abs(b->start.y - m.y) <= 1;
    });
    if (paired && std::find(canon.begin(), canon.end(), a->start) == canon.end()) {
      canon.push_back(a->start);
      canon_persistence.push_back(static_cast<double>(a->persistence));
    }
  }
  // Order pairs by decreasing persistence, then scan order, so labels are stable.
  std::vector<std::size_t> order(canon.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return canon_persistence[a] > canon_persistence[b];
  });
  for (std::size_t i : order) {
    const Pixel c = canon[i];
    result.centers.push_back(c);
    result.centers.push_back({fg.mirror_x(c.x), fg.mirror_y(c.y)});
    result.persistence.push_back(canon_persistence[i]);
    result.persistence.push_back(canon_persistence[i]);
  }
  return result;
}

inline ModeSet detect_modes(const Image& logspec, double s0) {
  ModeDetectionOptions options;
  options.s0 = s0;
  return detect_modes(logspec, options);
}

/// Forces exact mirror symmetry on a raw labeling: for every mirror pair the
/// candidate labels L(p) and -L(mirror p) compete, the smaller |label| wins
/// (ties keep the canonical pixel's own label). Self-mirrored pixels get |L|.
inline LabelMap symmetrize_labels(const LabelMap& raw) {
  const FrequencyGrid fg(raw);
  LabelMap out(raw.width(), raw.height());
  for (int y = 0; y < raw.height(); ++y) {
    for (int x = 0; x < raw.width(); ++x) {
      if (fg.self_mirrored(x, y)) {
        out(x, y) = std::abs(raw(x, y));
        continue;
      }
      if (!fg.canonical(x, y)) continue;
      const int mx = fg.mirror_x(x);
      const int my = fg.mirror_y(y);
      const int own = raw(x, y);
      const int other = -raw(mx, my);
      const int chosen = std::abs(own) <= std::abs(other) ? own : other;
      out(x, y) = chosen;
      out(mx, my) = -chosen;
    }
  }
  return out;
}

/// Nearest-center labeling (Euclidean pixel distance, ties to the smaller
/// center index), then mirror-symmetrized.
inline Partition voronoi_partition(const ModeSet& modes, int width, int height) {
  if (modes.centers.empty()) throw InvalidArgument("voronoi_partition: no centers");
  LabelMap raw(width, height);
  parallel_for(height, [&](int y) {
    for (int x = 0; x < width; ++x) {
      std::size_t best = 0;
      long best_d = std::numeric_limits<long>::max();
      for (std::size_t i = 0; i < modes.centers.size(); ++i) {
        const long dx = x - modes.centers[i].x;
        const long dy = y - modes.centers[i].y;
        const long d = dx * dx + dy * dy;
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      raw(x, y) = label_of_center(best);
    }
  });
  Partition p;
  p.labels = symmetrize_labels(raw);
  p.centers = modes.centers;
  return p;
}

/// Marker-controlled watershed by immersion on -smooth(logspec, sigma).
/// Pixels are flooded in increasing landscape value (FIFO among equal values);
/// a pixel touching several regions joins the one with the smallest label
/// rank. The result is mirror-symmetrized.
inline Partition watershed_partition(const Image& logspec, const ModeSet& modes,
                                     double sigma = 2.0) {
  if (modes.centers.empty()) throw InvalidArgument("watershed_partition: no centers");
  const int w = logspec.width();
  const int h = logspec.height();
  const Image smooth = gaussian_smooth(logspec, sigma);
  constexpr int kUnset = std::numeric_limits<int>::min();
  LabelMap raw(w, h, kUnset);
  std::vector<std::uint8_t> queued(static_cast<std::size_t>(w) * h, 0);

  using Entry = std::tuple<double, std::uint64_t, int, int>;  // value, order, x, y
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  std::uint64_t counter = 0;
  for (std::size_t i = 0; i < modes.centers.size(); ++i) {
    const Pixel c = modes.centers[i];
    raw(c.x, c.y) = label_of_center(i);
  }
  constexpr int kDx[4] = {1, -1, 0, 0};
  constexpr int kDy[4] = {0, 0, 1, -1};
  auto push_neighbors = [&](int x, int y) {
    for (int k = 0; k < 4; ++k) {
      const int xx = x + kDx[k];
      const int yy = y + kDy[k];
      if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
      const std::size_t idx = raw.index(xx, yy);
      if (raw[idx] != kUnset || queued[idx]) continue;
      queued[idx] = 1;
      queue.emplace(-smooth[idx], counter++, xx, yy);
    }
  };
  for (const Pixel& c : modes.centers) push_neighbors(c.x, c.y);
  while (!queue.empty()) {
    const auto [value, order, x, y] = queue.top();
    queue.pop();
    int chosen = kUnset;
    for (int k = 0; k < 4; ++k) {
      const int xx = x + kDx[k];
      const int yy = y + kDy[k];
      if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
      const int l = raw(xx, yy);
      if (l == kUnset) continue;
      if (chosen == kUnset || label_rank(l) < label_rank(chosen)) chosen = l;
    }
    raw(x, y) = chosen;
    push_neighbors(x, y);
  }
  Partition p;
  p.labels = symmetrize_labels(raw);
  p.centers = modes.centers;
  return p;
}

}  // namespace ewt
