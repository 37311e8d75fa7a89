#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ewt/grid.hpp"
#include "ewt/kernels.hpp"
#include "ewt/parallel.hpp"
#include "ewt/partition.hpp"
#include "ewt/raster.hpp"

namespace ewt {

enum class DemonsVariant { Thirion, Additive, Diffeomorphic };

inline std::string to_string(DemonsVariant v) {
  switch (v) {
    case DemonsVariant::Thirion: return "thirion";
    case DemonsVariant::Additive: return "additive";
    case DemonsVariant::Diffeomorphic: return "diffeomorphic";
  }
  return "?";
}

inline DemonsVariant parse_variant(std::string_view s) {
  if (s == "thirion") return DemonsVariant::Thirion;
  if (s == "additive") return DemonsVariant::Additive;
  if (s == "diffeomorphic") return DemonsVariant::Diffeomorphic;
  throw InvalidArgument("unknown demons variant '" + std::string(s) +
                        "' (expected additive|thirion|diffeomorphic)");
}

struct DemonsParams {
  double sigma_x = 5.0;   // maximum step control
  double sigma_i = 1.0;   // intensity uncertainty
  double sigma_f = 1.0;   // fluid-like smoothing of the update
  double sigma_d = 0.4;   // diffusion-like smoothing of the field
  double epsilon = 1e-3;  // relative energy-change stop threshold
  int max_iterations = 500;
  int levels = 1;
  DemonsVariant variant = DemonsVariant::Additive;

  void validate() const {
    detail::require(sigma_x > 0 && sigma_i > 0 && sigma_f > 0 && sigma_d > 0,
                    "demons: all sigmas must be positive");
    detail::require(epsilon > 0, "demons: epsilon must be positive");
    detail::require(max_iterations >= 0, "demons: iteration cap must be non-negative");
    detail::require(levels >= 1, "demons: at least one pyramid level is required");
  }
};

/// Linear map p -> A p + t in pixel coordinates.
struct AffineMap {
  double a11 = 1.0, a12 = 0.0, a21 = 0.0, a22 = 1.0;
  Vec2 t{};

  Vec2 apply(Vec2 p) const { return {a11 * p.x + a12 * p.y + t.x, a21 * p.x + a22 * p.y + t.y}; }
  double determinant() const { return a11 * a22 - a12 * a21; }
  bool is_identity() const {
    return a11 == 1.0 && a12 == 0.0 && a21 == 0.0 && a22 == 1.0 && t.x == 0.0 && t.y == 0.0;
  }

  /// The same map expressed on a grid decimated by `factor`.
  AffineMap at_scale(int factor) const {
    AffineMap m = *this;
    m.t = t / static_cast<double>(factor);
    return m;
  }

  DisplacementField to_field(int width, int height) const {
    DisplacementField d(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
        d(x, y) = apply(p) - p;
      }
    return d;
  }
};

/// Result of registering one support. `field` is the total displacement
/// (initial affine included).
struct MappingEstimate {
  DisplacementField field;
  AffineMap init_affine;
  double final_energy = 0.0;
  int iterations = 0;
  double rmse = 0.0;
  std::vector<double> energy_history;  // E(gamma^[k]) of the last pass, k = 0, 1, ...
};

/// Binary 1/0 raster of region `label`, smoothed with sigma = 1.
inline Image indicator(const LabelMap& labels, int label) {
  Image img(labels.width(), labels.height());
  bool any = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) {
      img[i] = 1.0;
      any = true;
    }
  }
  if (!any) throw InvalidArgument("indicator: region " + std::to_string(label) + " is empty");
  return gaussian_smooth(img, 1.0);
}

/// Lambda rendered on a width x height grid (see SupportFrame), unsmoothed.
inline LabelMap support_mask(KernelKind kind, int width, int height) {
  const SupportFrame frame(width, height);
  LabelMap mask(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      mask(x, y) = in_support(kind, frame.to_kernel({double(x), double(y)})) ? 1 : 0;
  return mask;
}

/// Smoothed indicator of Lambda.
inline Image indicator(KernelKind kind, int width, int height) {
  return indicator(support_mask(kind, width, height), 1);
}

/// Translation of the region centroid onto the grid center composed with the
/// isotropic scaling that maps the region's area onto the area of Lambda.
inline AffineMap init_affine(const LabelMap& labels, int label, KernelKind kind) {
  double sx = 0.0, sy = 0.0, count = 0.0;
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x)
      if (labels(x, y) == label) {
        sx += x;
        sy += y;
        count += 1.0;
      }
  if (count < 4.0) {
    throw InvalidArgument("init_affine: region " + std::to_string(label) +
                          " is degenerate (area < 4 px)");
  }
  const LabelMap lambda = support_mask(kind, labels.width(), labels.height());
  const double lambda_area = static_cast<double>(std::count(lambda.begin(), lambda.end(), 1));
  const double s = std::sqrt(lambda_area / count);
  const Vec2 centroid{sx / count, sy / count};
  const Vec2 center = FrequencyGrid(labels).center();
  AffineMap m;
  m.a11 = s;
  m.a22 = s;
  m.t = center - s * centroid;
  if (s == 1.0 && centroid == center) m.t = {};
  return m;
}

namespace detail {

inline Vec2 central_gradient(const Image& img, int x, int y) {
  const int w = img.width();
  const int h = img.height();
  const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
  const int yl = std::max(y - 1, 0), yr = std::min(y + 1, h - 1);
  return {(img(xr, y) - img(xl, y)) / std::max(1, xr - xl),
          (img(x, yr) - img(x, yl)) / std::max(1, yr - yl)};
}

/// Demons update from an already-warped moving image.
inline DisplacementField force_from_warped(const Image& fixed, const Image& warped,
                                           double sigma_i, double sigma_x) {
  const double coupling = (sigma_i * sigma_i) / (sigma_x * sigma_x);
  DisplacementField u(fixed.width(), fixed.height());
  parallel_for(fixed.height(), [&](int y) {
    for (int x = 0; x < fixed.width(); ++x) {
      const double diff = fixed(x, y) - warped(x, y);
      const Vec2 g = central_gradient(warped, x, y);
      const double denom = norm2(g) + coupling * diff * diff;
      u(x, y) = denom < 1e-12 ? Vec2{} : (diff / denom) * g;
    }
  });
  return u;
}

inline double sum_squared_difference(const Image& a, const Image& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    e += d * d;
  }
  return e;
}

inline double max_norm(const DisplacementField& f) {
  double m = 0.0;
  for (const Vec2& v : f) m = std::max(m, norm(v));
  return m;
}

}  // namespace detail

/// Per-pixel demons force: with D = fixed - moving o gamma and
/// g = grad(moving o gamma), u = D g / (|g|^2 + (sigma_i/sigma_x)^2 D^2).
inline DisplacementField demons_force(const Image& fixed, const Image& moving,
                                      const DisplacementField& gamma, const DemonsParams& params) {
  require_same_shape(fixed, moving, "demons_force");
  require_same_shape(fixed, gamma, "demons_force");
  return detail::force_from_warped(fixed, warp(moving, gamma), params.sigma_i, params.sigma_x);
}

/// Exponential of a stationary field by scaling and squaring.
inline DisplacementField exp_field(const DisplacementField& u) {
  if (!all_finite(u)) throw NumericError("exp_field: non-finite displacement");
  const double m = detail::max_norm(u);
  int steps = 0;
  while (m / std::ldexp(1.0, steps) > 0.5) ++steps;
  DisplacementField v = u;
  const double scale = std::ldexp(1.0, -steps);
  for (Vec2& e : v) e *= scale;
  for (int i = 0; i < steps; ++i) v = compose(v, v);
  return v;
}

/// ||fixed - moving o gamma||^2 summed over pixels.
inline double registration_energy(const Image& fixed, const Image& moving,
                                  const DisplacementField& gamma) {
  return detail::sum_squared_difference(fixed, warp(moving, gamma));
}

/// Demons iterations (additive, diffeomorphic or Thirion) starting from
/// `initial`. The diffusion-like smoothing acts on the field minus `base`, so
/// an exactly known component (the initial affine) is not eroded at the
/// borders by the replicate boundary. With base = 0 this is plain smoothing.
/// The additive and diffeomorphic variants return the lowest-energy iterate;
/// Thirion's returns the last one.
inline MappingEstimate demons_register(const Image& fixed, const Image& moving,
                                       const DemonsParams& params,
                                       const DisplacementField& initial,
                                       const DisplacementField& base) {
  params.validate();
  require_same_shape(fixed, moving, "demons_register");
  require_same_shape(fixed, initial, "demons_register");
  require_same_shape(fixed, base, "demons_register");

  const bool thirion = params.variant == DemonsVariant::Thirion;
  const double sigma_i = thirion ? 1.0 : params.sigma_i;

  MappingEstimate out;
  out.field = initial;
  Image warped = warp(moving, initial);
  const double e0 = detail::sum_squared_difference(fixed, warped);
  out.final_energy = e0;
  out.energy_history = {e0};
  if (e0 == 0.0 || params.max_iterations == 0) {
    out.rmse = std::sqrt(e0 / static_cast<double>(fixed.size()));
    return out;
  }

  std::vector<double> history{e0};
  DisplacementField gamma = initial;
  DisplacementField best = initial;
  double best_energy = e0;
  for (int k = 1; k <= params.max_iterations; ++k) {
    DisplacementField u = detail::force_from_warped(fixed, warped, sigma_i, params.sigma_x);
    if (!thirion) u = gaussian_smooth(u, params.sigma_f);
    DisplacementField c(gamma.width(), gamma.height());
    if (params.variant == DemonsVariant::Diffeomorphic) {
      c = compose(gamma, exp_field(u));
    } else {
      for (std::size_t i = 0; i < c.size(); ++i) c[i] = gamma[i] + u[i];
    }
    for (std::size_t i = 0; i < c.size(); ++i) c[i] -= base[i];
    c = gaussian_smooth(c, params.sigma_d);
    for (std::size_t i = 0; i < c.size(); ++i) gamma[i] = base[i] + c[i];

    warped = warp(moving, gamma);
    history.push_back(detail::sum_squared_difference(fixed, warped));
    out.iterations = k;
    if (history[k] < best_energy) {
      best_energy = history[k];
      best = gamma;
    }
    if (!thirion && k >= 5 &&
        std::abs(history[k] - history[k - 5]) / e0 <= params.epsilon) {
      break;
    }
  }
  if (thirion) {
    out.field = std::move(gamma);
    out.final_energy = history.back();
  } else {
    out.field = std::move(best);
    out.final_energy = best_energy;
  }
  out.rmse = std::sqrt(out.final_energy / static_cast<double>(fixed.size()));
  out.energy_history = std::move(history);
  return out;
}

inline MappingEstimate demons_register(const Image& fixed, const Image& moving,
                                       const DemonsParams& params,
                                       const DisplacementField& initial) {
  return demons_register(fixed, moving, params, initial,
                         DisplacementField(fixed.width(), fixed.height()));
}

/// Iteration cap of the Thirion variant at pyramid level j (decimation 2^j):
/// 2^4 at full resolution, doubling per coarser level up to 2^(levels+1).
inline int thirion_iterations(int level, int levels) {
  const int top = std::max(4, levels + 1);
  return 1 << std::min(4 + level, top);
}

/// Number of pyramid levels actually usable on a width x height grid: levels
/// whose decimated size would fall below 8 pixels are skipped.
inline int usable_levels(int width, int height, int levels) {
  int usable = 0;
  for (int j = 0; j < levels; ++j) {
    if ((width >> j) >= kMinSide && (height >> j) >= kMinSide) usable = j + 1;
  }
  return std::max(usable, 1);
}

/// A full-resolution field expressed on pyramid level `factor`: decimated
/// and divided by the factor (pixel units shrink with the grid).
inline DisplacementField field_to_level(const DisplacementField& field, int factor) {
  if (factor == 1) return field;
  DisplacementField r = resample(field, factor, Resample::Down);
  for (Vec2& v : r) v = v / static_cast<double>(factor);
  return r;
}

/// Inverse of field_to_level: magnified to width x height and multiplied by
/// the factor.
inline DisplacementField field_from_level(const DisplacementField& field, int factor, int width,
                                          int height) {
  DisplacementField r = resample(field, factor, Resample::Up, width, height);
  for (Vec2& v : r) v *= static_cast<double>(factor);
  return r;
}

/// Coarse-to-fine demons. Level j (j = levels-1 .. 0) works on images
/// decimated by 2^j; the refinement on top of `affine` is carried between
/// levels by dividing by 2^j on the way down and multiplying on the way up.
inline MappingEstimate multires_register(const Image& fixed, const Image& moving,
                                         const DemonsParams& params,
                                         const AffineMap& affine = {}) {
  params.validate();
  require_same_shape(fixed, moving, "multires_register");
  const int w = fixed.width();
  const int h = fixed.height();
  const int levels = usable_levels(w, h, params.levels);

  DisplacementField refinement(w, h);  // full resolution, pixels
  int total_iterations = 0;
  std::vector<double> history;
  for (int j = levels - 1; j >= 0; --j) {
    const int factor = 1 << j;
    const Image f = factor == 1 ? fixed : resample(fixed, factor, Resample::Down);
    const Image m = factor == 1 ? moving : resample(moving, factor, Resample::Down);
    DisplacementField r = field_to_level(refinement, factor);
    const DisplacementField base = affine.at_scale(factor).to_field(f.width(), f.height());
    DisplacementField start = base;
    for (std::size_t i = 0; i < start.size(); ++i) start[i] += r[i];

    DemonsParams level_params = params;
    if (params.variant == DemonsVariant::Thirion) {
      level_params.max_iterations = thirion_iterations(j, params.levels);
    }
    MappingEstimate est = demons_register(f, m, level_params, start, base);
    total_iterations += est.iterations;
    history = std::move(est.energy_history);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = est.field[i] - base[i];
    refinement = factor == 1 ? std::move(r) : field_from_level(r, factor, w, h);
  }

  MappingEstimate out;
  out.init_affine = affine;
  out.field = affine.to_field(w, h);
  for (std::size_t i = 0; i < out.field.size(); ++i) out.field[i] += refinement[i];
  out.iterations = total_iterations;
  out.energy_history = std::move(history);
  out.final_energy = registration_energy(fixed, moving, out.field);
  out.rmse = std::sqrt(out.final_energy / static_cast<double>(fixed.size()));
  return out;
}

/// n_P: the largest integer with 2^n_P < min(width, height).
inline int pyramid_depth(int width, int height) {
  const int side = std::min(width, height);
  int n = 0;
  while ((1 << (n + 1)) < side) ++n;
  return n;
}

/// Candidate grid for parameter selection: sigma_d in 0.30..0.50 (step 0.01)
/// crossed with levels in {n_P - 1, n_P}.
inline std::vector<DemonsParams> parameter_grid(const DemonsParams& base, int width, int height) {
  const int np = pyramid_depth(width, height);
  std::vector<DemonsParams> grid;
  for (int i = 0; i <= 20; ++i) {
    for (int levels : {std::max(1, np - 1), std::max(1, np)}) {
      DemonsParams p = base;
      p.sigma_d = (30 + i) / 100.0;
      p.levels = levels;
      grid.push_back(p);
    }
  }
  return grid;
}

/// Grid search minimizing the final registration energy. Ties go to the
/// smaller sigma_d, then the smaller level count (the grid's order).
inline DemonsParams select_params(const Image& fixed, const Image& moving,
                                  const DemonsParams& base, const AffineMap& affine = {}) {
  const std::vector<DemonsParams> grid = parameter_grid(base, fixed.width(), fixed.height());
  std::vector<double> energy(grid.size());
  parallel_for(static_cast<int>(grid.size()), [&](int i) {
    energy[static_cast<std::size_t>(i)] =
        multires_register(fixed, moving, grid[static_cast<std::size_t>(i)], affine).final_energy;
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (energy[i] < energy[best]) best = i;
  return grid[best];
}

/// Registers the support of region `label` onto Lambda: the region indicator
/// is the fixed image and Lambda the moving one, so the total map sends
/// region pixels into Lambda's frame.
inline MappingEstimate estimate_mapping(const Partition& partition, int label, KernelKind kind,
                                        const DemonsParams& params, bool select = false,
                                        DemonsParams* chosen = nullptr) {
  const Image fixed = indicator(partition.labels, label);
  const Image moving = indicator(kind, partition.width(), partition.height());
  const AffineMap affine = init_affine(partition.labels, label, kind);
  const DemonsParams used = select ? select_params(fixed, moving, params, affine) : params;
  if (chosen != nullptr) *chosen = used;
  return multires_register(fixed, moving, used, affine);
}

struct RegionMapping {
  int label = 0;
  DemonsParams params;
  MappingEstimate estimate;
};

/// Mappings for every non-negative label, computed in parallel; the output
/// order (and content) does not depend on the worker count.
inline std::vector<RegionMapping> estimate_mappings(const Partition& partition, KernelKind kind,
                                                    const DemonsParams& params,
                                                    bool select = false) {
  const std::vector<int> labels = partition.positive_labels();
  std::vector<RegionMapping> out(labels.size());
  parallel_for(static_cast<int>(labels.size()), [&](int i) {
    RegionMapping& r = out[static_cast<std::size_t>(i)];
    r.label = labels[static_cast<std::size_t>(i)];
    r.estimate = estimate_mapping(partition, r.label, kind, params, select, &r.params);
  });
  return out;
}

}  // namespace ewt
