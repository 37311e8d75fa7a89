#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "ewt/demons.hpp"
#include "ewt/grid.hpp"
#include "ewt/parallel.hpp"
#include "ewt/pipeline.hpp"
#include "ewt/raster.hpp"
#include "ewt/transform.hpp"

namespace ewt {

struct CartoonTexture {
  Image cartoon;
  Image texture;
};

/// Gaussian low-pass as cartoon, residual as texture. The cartoon is taken as
/// f - texture, which makes cartoon + texture == f bit for bit whenever the
/// pair is representable (|f| >= |smooth|, or smooth within a factor 2 of f).
/// Near sign changes of f no such pair may exist; the sum is then off by at
/// most one ulp.
inline CartoonTexture cartoon_texture(const Image& f, double sigma_c = 3.0) {
  if (!(sigma_c > 0.0)) throw InvalidArgument("cartoon_texture: sigma_c must be positive");
  const Image smooth = gaussian_smooth(f, sigma_c);
  CartoonTexture out{Image(f.width(), f.height()), Image(f.width(), f.height())};
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double t = f[i] - smooth[i];
    double c = smooth[i];
    if (c + t != f[i]) c = f[i] - t;
    out.texture[i] = t;
    out.cartoon[i] = c;
  }
  return out;
}

struct FeatureStack {
  int width = 0;
  int height = 0;
  std::vector<Image> features;  // one per band, all >= 0

  std::size_t dimension() const { return features.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
};

/// Mean of |E| over a w x w window (replicate edges), per band.
inline FeatureStack local_energy(const CoefficientSet& coeffs, int window = 19) {
  if (window < 1 || window % 2 == 0) throw InvalidArgument("local_energy: window must be odd");
  detail::require(!coeffs.bands.empty(), "local_energy: no coefficients");
  FeatureStack out;
  out.width = coeffs.bands.front().width();
  out.height = coeffs.bands.front().height();
  out.features.resize(coeffs.size());
  const int r = window / 2;
  const double inv = 1.0 / (static_cast<double>(window) * window);
  parallel_for(static_cast<int>(coeffs.size()), [&](int b) {
    const Image& band = coeffs.bands[static_cast<std::size_t>(b)];
    require_same_shape(band, coeffs.bands.front(), "local_energy");
    const int w = band.width();
    const int h = band.height();
    Image rows(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) acc += std::abs(band(std::clamp(x + k, 0, w - 1), y));
        rows(x, y) = acc;
      }
    Image feat(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) acc += rows(x, std::clamp(y + k, 0, h - 1));
        feat(x, y) = acc * inv;
      }
    out.features[static_cast<std::size_t>(b)] = std::move(feat);
  });
  return out;
}

struct Segmentation {
  LabelMap labels;  // 1..k
  int k = 0;
  double cost = 0.0;
  std::vector<double> cost_history;  // total L1 cost after each Lloyd step of the kept restart
  std::vector<std::size_t> cluster_sizes;
};

namespace detail {

struct Points {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> data;  // n x dim, row-major
  const double* row(std::size_t i) const { return data.data() + i * dim; }
};

inline Points to_points(const FeatureStack& fs) {
  Points p;
  p.n = fs.pixels();
  p.dim = fs.dimension();
  p.data.resize(p.n * p.dim);
  for (std::size_t d = 0; d < p.dim; ++d)
    for (std::size_t i = 0; i < p.n; ++i) p.data[i * p.dim + d] = fs.features[d][i];
  return p;
}

inline double l1(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) s += std::abs(a[d] - b[d]);
  return s;
}

/// Nearest centroid in L1 (ties to the lower index) for every point; returns
/// the total cost. Per-chunk partial sums are added in chunk order.
inline double assign(const Points& p, const std::vector<double>& centroids, std::size_t k,
                     std::vector<int>& labels, std::vector<double>& dist) {
  const int chunks = 64;
  std::vector<double> partial(chunks, 0.0);
  const std::size_t per = (p.n + chunks - 1) / chunks;
  parallel_for(chunks, [&](int c) {
    const std::size_t lo = static_cast<std::size_t>(c) * per;
    const std::size_t hi = std::min(p.n, lo + per);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        const double d = l1(p.row(i), centroids.data() + j * p.dim, p.dim);
        if (d < bd) {
          bd = d;
          best = static_cast<int>(j);
        }
      }
      labels[i] = best;
      dist[i] = bd;
      acc += bd;
    }
    partial[static_cast<std::size_t>(c)] = acc;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

inline double median_of(std::vector<double>& v) {
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  const double hi = v[m];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
  return 0.5 * (lo + hi);
}

/// k-means++ seeding with probabilities proportional to squared L1 distance.
inline std::vector<double> seed_centroids(const Points& p, std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> c(k * p.dim);
  auto pick = [&](std::size_t slot, std::size_t i) {
    std::copy(p.row(i), p.row(i) + p.dim, c.begin() + static_cast<std::ptrdiff_t>(slot * p.dim));
  };
  std::size_t first = std::min(p.n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(p.n)));
  pick(0, first);
  std::vector<double> d2(p.n, std::numeric_limits<double>::infinity());
  for (std::size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < p.n; ++i) {
      const double d = l1(p.row(i), c.data() + (j - 1) * p.dim, p.dim);
      d2[i] = std::min(d2[i], d * d);
      total += d2[i];
    }
    std::size_t chosen = 0;
    if (total > 0.0) {
      double target = unit(rng) * total;
      chosen = p.n - 1;
      for (std::size_t i = 0; i < p.n; ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    }
    pick(j, chosen);
  }
  return c;
}

}  // namespace detail

/// Lloyd iterations under the L1 (cityblock) distance with per-dimension
/// median centroids; D^2 seeding, 5 restarts, at most 300 iterations each.
/// The restart with the lowest total cost is kept. Labels are 1..k.
inline Segmentation kmeans_l1(const FeatureStack& features, int k, std::uint64_t seed,
                              int restarts = 5, int max_iterations = 300) {
  detail::require(k >= 1, "kmeans_l1: k must be positive");
  detail::require(features.dimension() > 0 && features.pixels() > 0, "kmeans_l1: empty features");
  const detail::Points p = detail::to_points(features);
  Segmentation best;
  best.k = k;
  best.labels = LabelMap(features.width, features.height, 1);
  if (k == 1) {
    std::vector<double> col(p.n);
    std::vector<double> centroid(p.dim);
    for (std::size_t d = 0; d < p.dim; ++d) {
      for (std::size_t i = 0; i < p.n; ++i) col[i] = p.data[i * p.dim + d];
      centroid[d] = detail::median_of(col);
    }
    for (std::size_t i = 0; i < p.n; ++i) best.cost += detail::l1(p.row(i), centroid.data(), p.dim);
    best.cost_history = {best.cost};
    best.cluster_sizes = {p.n};
    return best;
  }
  {
    std::set<std::vector<double>> distinct;
    for (std::size_t i = 0; i < p.n && distinct.size() < static_cast<std::size_t>(k); ++i)
      distinct.emplace(p.row(i), p.row(i) + p.dim);
    if (distinct.size() < static_cast<std::size_t>(k))
      throw InvalidArgument("kmeans_l1: k exceeds the number of distinct feature vectors");
  }

  const auto kk = static_cast<std::size_t>(k);
  best.cost = std::numeric_limits<double>::infinity();
  std::vector<int> labels(p.n), best_labels;
  std::vector<double> dist(p.n);
  for (int r = 0; r < restarts; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    std::vector<double> centroids = detail::seed_centroids(p, kk, rng);
    std::vector<double> history;
    double cost = detail::assign(p, centroids, kk, labels, dist);
    history.push_back(cost);
    for (int it = 0; it < max_iterations; ++it) {
      // Median update per cluster and dimension.
      std::vector<std::vector<std::size_t>> members(kk);
      for (std::size_t i = 0; i < p.n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
      for (std::size_t j = 0; j < kk; ++j) {
        if (members[j].empty()) {
          // Re-seed at the point farthest from its current centroid.
          const std::size_t far = static_cast<std::size_t>(
              std::max_element(dist.begin(), dist.end()) - dist.begin());
          std::copy(p.row(far), p.row(far) + p.dim,
                    centroids.begin() + static_cast<std::ptrdiff_t>(j * p.dim));
          dist[far] = 0.0;
          continue;
        }
        std::vector<double> col(members[j].size());
        for (std::size_t d = 0; d < p.dim; ++d) {
          for (std::size_t m = 0; m < members[j].size(); ++m) col[m] = p.data[members[j][m] * p.dim + d];
          centroids[j * p.dim + d] = detail::median_of(col);
        }
      }
      const std::vector<int> previous = labels;
      cost = detail::assign(p, centroids, kk, labels, dist);
      history.push_back(cost);
      if (labels == previous) break;
    }
    if (cost < best.cost) {
      best.cost = cost;
      best_labels = labels;
      best.cost_history = std::move(history);
    }
  }
  best.cluster_sizes.assign(kk, 0);
  for (std::size_t i = 0; i < p.n; ++i) {
    best.labels[i] = best_labels[i] + 1;
    ++best.cluster_sizes[static_cast<std::size_t>(best_labels[i])];
  }
  return best;
}

struct SegmentConfig {
  PartitionMethod method = PartitionMethod::Voronoi;
  double s0 = 0.8;
  KernelSpec kernel{KernelKind::Disk, 0.2};
  DemonsParams demons;
  bool select_params = false;
  bool normalized = false;
  int k = 2;
  int window = 19;
  std::uint64_t seed = 42;
  double sigma_c = 3.0;
};

struct SegmentResult {
  Segmentation segmentation;
  CartoonTexture parts;
  Partition partition;
  std::vector<RegionMapping> mappings;
  FilterBank bank;
  CoefficientSet coefficients;
  FeatureStack features;
};

/// Texture extraction, empirical wavelet transform of the texture (partition
/// detected on the texture's own spectrum), local energy features, L1 k-means.
inline SegmentResult segment(const Image& f, const SegmentConfig& config) {
  check_image(f, "segment");
  SegmentResult out;
  out.parts = cartoon_texture(f, config.sigma_c);
  if (config.k == 1) {
    out.segmentation.k = 1;
    out.segmentation.labels = LabelMap(f.width(), f.height(), 1);
    out.segmentation.cluster_sizes = {f.size()};
    return out;
  }
  out.partition = make_partition(out.parts.texture, config.method, config.s0);
  out.mappings = estimate_mappings(out.partition, config.kernel.kind, config.demons, config.select_params);
  out.bank = build_bank(out.mappings, config.kernel, config.normalized);
  out.coefficients = forward(out.parts.texture, out.bank);
  out.features = local_energy(out.coefficients, config.window);
  out.segmentation = kmeans_l1(out.features, config.k, config.seed);
  return out;
}

}  // namespace ewt
