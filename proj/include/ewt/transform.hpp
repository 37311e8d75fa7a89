#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ewt/fft.hpp"
#include "ewt/grid.hpp"
#include "ewt/kernels.hpp"
#include "ewt/parallel.hpp"
#include "ewt/partition.hpp"

namespace ewt {

/// A mapping sampled on the grid: where each pixel lands in Lambda's frame
/// (pixels) and the absolute Jacobian determinant of that map.
struct SampledMap {
  Grid<Vec2> target;
  Image det;
};

/// |det J| of the total map p -> p + d(p), by central differences (one-sided
/// on the border rows/columns), floored at 1e-8.
inline Image jacobian_det(const DisplacementField& d) {
  const int w = d.width();
  const int h = d.height();
  detail::require(w >= 2 && h >= 2, "jacobian_det: field too small");
  auto total = [&](int x, int y) { return Vec2{x + d(x, y).x, y + d(x, y).y}; };
  Image out(w, h);
  parallel_for(h, [&](int y) {
    const int y0 = std::max(y - 1, 0), y1 = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(x - 1, 0), x1 = std::min(x + 1, w - 1);
      const Vec2 gx = (total(x1, y) - total(x0, y)) / static_cast<double>(x1 - x0);
      const Vec2 gy = (total(x, y1) - total(x, y0)) / static_cast<double>(y1 - y0);
      out(x, y) = std::max(std::abs(gx.x * gy.y - gx.y * gy.x), 1e-8);
    }
  });
  return out;
}

/// g at the point reflection of every pixel through the origin, without
/// wrap-around: on the Nyquist row/column the reflected point falls one step
/// outside the grid and the nearest edge sample is used.
template <typename T>
Grid<T> reflected(const Grid<T>& g) {
  const FrequencyGrid fg(g);
  Grid<T> out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    const int ry = std::min(2 * fg.cy() - y, g.height() - 1);
    for (int x = 0; x < g.width(); ++x) out(x, y) = g(std::min(2 * fg.cx() - x, g.width() - 1), ry);
  }
  return out;
}

/// Field of gamma_{-n}: xi -> -gamma_n(-xi), i.e. d_{-n}(p) = -d_n(-p).
inline DisplacementField mirror_mapping(const DisplacementField& d) {
  DisplacementField out = reflected(d);
  for (Vec2& v : out) v = -1.0 * v;
  return out;
}

/// Odd-symmetric part of a field, (d(p) - d(-p)) / 2; makes the region-0
/// filter mirror-symmetric.
inline DisplacementField symmetrize_field(const DisplacementField& d) {
  const DisplacementField m = reflected(d);
  DisplacementField out(d.width(), d.height());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = 0.5 * (d[i] - m[i]);
  return out;
}

inline SampledMap sample_map(const DisplacementField& d) {
  SampledMap m{Grid<Vec2>(d.width(), d.height()), jacobian_det(d)};
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x) m.target(x, y) = Vec2{x + d(x, y).x, y + d(x, y).y};
  return m;
}

/// psi-hat o Gamma, times sqrt|det J| when `normalized`.
inline Image pulled_back_kernel(const SampledMap& map, const KernelSpec& kernel, bool normalized) {
  kernel.validate();
  const SupportFrame frame(map.target);
  Image out(map.target.width(), map.target.height());
  parallel_for(out.height(), [&](int y) {
    for (int x = 0; x < out.width(); ++x) {
      double v = evaluate(kernel, frame.to_kernel(map.target(x, y)));
      if (normalized && v != 0.0) v *= std::sqrt(map.det(x, y));
      out(x, y) = v;
    }
  });
  return out;
}

/// Filter of a symmetric pair from its two halves. `minus` is null for the
/// region at the origin, which has no mirror term. The result is averaged
/// with its mirror image so that chi(-xi) = chi(xi) holds exactly, Nyquist
/// lines included.
inline Image combine_halves(const Image& plus, const Image* minus, bool normalized) {
  Image chi = plus;
  if (minus != nullptr) {
    const double scale = normalized ? 1.0 / std::sqrt(2.0) : 1.0;
    for (std::size_t i = 0; i < chi.size(); ++i) chi[i] = scale * (plus[i] + (*minus)[i]);
  }
  const Image m = mirrored(chi);
  for (std::size_t i = 0; i < chi.size(); ++i) chi[i] = 0.5 * (chi[i] + m[i]);
  return chi;
}

namespace detail {

/// One half of a filter from a field. Pixels on the Nyquist row/column stand
/// for two (or four) periodic copies of the same frequency; each copy is
/// evaluated with the displacement of the nearest grid sample and the
/// largest response is kept.
inline Image field_half(const DisplacementField& d, const Image& det, bool minus,
                        const KernelSpec& kernel, bool normalized) {
  const FrequencyGrid fg(d);
  const SupportFrame frame(d);
  const int w = d.width();
  const int h = d.height();
  auto value_at = [&](int qx, int qy) {
    const int sx = std::clamp(minus ? 2 * fg.cx() - qx : qx, 0, w - 1);
    const int sy = std::clamp(minus ? 2 * fg.cy() - qy : qy, 0, h - 1);
    const Vec2 disp = minus ? -1.0 * d(sx, sy) : d(sx, sy);
    double v = evaluate(kernel, frame.to_kernel(Vec2{qx + disp.x, qy + disp.y}));
    if (normalized && v != 0.0) v *= std::sqrt(det(sx, sy));
    return v;
  };
  Image out(w, h);
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      double v = value_at(x, y);
      const bool col = w % 2 == 0 && x == 0;
      const bool row = h % 2 == 0 && y == 0;
      if (col) v = std::max(v, value_at(x + w, y));
      if (row) v = std::max(v, value_at(x, y + h));
      if (col && row) v = std::max(v, value_at(x + w, y + h));
      out(x, y) = v;
    }
  });
  return out;
}

}  // namespace detail

/// chi_n from the field of gamma_n (Omega_n -> Lambda, pixel units).
inline Image build_filter(int n, const DisplacementField& d, const KernelSpec& kernel,
                          bool normalized, Image* half = nullptr) {
  kernel.validate();
  if (n == 0) {
    const DisplacementField s = symmetrize_field(d);
    const Image plus = detail::field_half(s, jacobian_det(s), false, kernel, normalized);
    if (half != nullptr) *half = plus;
    return combine_halves(plus, nullptr, normalized);
  }
  const Image det = jacobian_det(d);
  const Image plus = detail::field_half(d, det, false, kernel, normalized);
  const Image minus = detail::field_half(d, det, true, kernel, normalized);
  if (half != nullptr) *half = plus;
  return combine_halves(plus, &minus, normalized);
}

struct FilterBank {
  std::vector<int> labels;       // n for each filter
  std::vector<Image> filters;    // chi_n
  std::vector<Image> halves;     // psi_n = psi o gamma_n (times sqrt|det J| if normalized)
  KernelSpec kernel;
  bool normalized = false;
  Image coverage;                // sum over filters of chi_n^2
  double hole_fraction = 0.0;
  bool reconstruction_safe = true;
  std::vector<std::string> warnings;

  std::size_t size() const { return filters.size(); }
  int width() const { return coverage.width(); }
  int height() const { return coverage.height(); }

  std::size_t index_of(int label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw InvalidArgument("filter bank: no filter for region " + std::to_string(label));
    return static_cast<std::size_t>(it - labels.begin());
  }

  /// Coverage, hole statistics and the reconstruction-safety flag.
  void finalize() {
    detail::require(!filters.empty(), "filter bank: no filters");
    coverage = Image(filters.front().width(), filters.front().height());
    for (const Image& chi : filters) {
      require_same_shape(chi, coverage, "filter bank");
      for (std::size_t i = 0; i < chi.size(); ++i) coverage[i] += chi[i] * chi[i];
    }
    std::size_t holes = 0;
    for (double c : coverage)
      if (c < 1e-6) ++holes;
    hole_fraction = static_cast<double>(holes) / static_cast<double>(coverage.size());
    reconstruction_safe = hole_fraction <= 1e-3;
    warnings.clear();
    if (!reconstruction_safe) {
      warnings.push_back("filter bank leaves " + std::to_string(holes) +
                         " frequency pixels uncovered; reconstruction will be corrupted there");
    }
  }

  double min_coverage() const { return *std::min_element(coverage.begin(), coverage.end()); }
  double max_coverage() const { return *std::max_element(coverage.begin(), coverage.end()); }
};

/// Bank from one field per non-negative label (`fields[i]` maps region `labels[i]`).
inline FilterBank build_bank(const std::vector<int>& labels,
                             const std::vector<DisplacementField>& fields,
                             const KernelSpec& kernel, bool normalized) {
  detail::require(labels.size() == fields.size() && !labels.empty(),
                  "build_bank: need one mapping per region");
  kernel.validate();
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (!all_finite(fields[i])) {
      throw NumericError("build_bank: non-finite displacement for region " + std::to_string(labels[i]));
    }
  }
  FilterBank bank;
  bank.labels = labels;
  bank.kernel = kernel;
  bank.normalized = normalized;
  bank.filters.resize(labels.size());
  bank.halves.resize(labels.size());
  parallel_for(static_cast<int>(labels.size()), [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    bank.filters[k] = build_filter(labels[k], fields[k], kernel, normalized, &bank.halves[k]);
  });
  bank.finalize();
  return bank;
}

/// Bank from explicitly sampled maps (analytic mappings). `minus[i]` is
/// ignored for label 0.
inline FilterBank build_bank(const std::vector<int>& labels, const std::vector<SampledMap>& plus,
                             const std::vector<SampledMap>& minus, const KernelSpec& kernel,
                             bool normalized) {
  detail::require(labels.size() == plus.size() && labels.size() == minus.size() && !labels.empty(),
                  "build_bank: need one mapping per region");
  kernel.validate();
  FilterBank bank;
  bank.labels = labels;
  bank.kernel = kernel;
  bank.normalized = normalized;
  bank.filters.resize(labels.size());
  bank.halves.resize(labels.size());
  parallel_for(static_cast<int>(labels.size()), [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    bank.halves[k] = pulled_back_kernel(plus[k], kernel, normalized);
    if (labels[k] == 0) {
      bank.filters[k] = combine_halves(bank.halves[k], nullptr, normalized);
    } else {
      const Image m = pulled_back_kernel(minus[k], kernel, normalized);
      bank.filters[k] = combine_halves(bank.halves[k], &m, normalized);
    }
  });
  bank.finalize();
  return bank;
}

struct CoefficientSet {
  std::vector<int> labels;
  std::vector<Image> bands;  // E(., n), same order as labels

  std::size_t size() const { return bands.size(); }
};

/// E(., n) = IDFT(f-hat * chi_n). The filters are real and mirror-symmetric,
/// so the result must be real; an imaginary residue of 1e-10 or more throws.
inline CoefficientSet forward(const Image& f, const FilterBank& bank) {
  check_image(f, "forward");
  require_same_shape(f, bank.coverage, "forward");
  const Spectrum fhat = dft2(f);
  CoefficientSet out;
  out.labels = bank.labels;
  out.bands.resize(bank.size());
  std::vector<double> residue(bank.size(), 0.0);
  parallel_for(static_cast<int>(bank.size()), [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    Spectrum prod = fhat;
    const Image& chi = bank.filters[k];
    for (std::size_t j = 0; j < prod.size(); ++j) prod[j] *= chi[j];
    out.bands[k] = idft2_real(prod, &residue[k]);
  });
  for (std::size_t k = 0; k < residue.size(); ++k) {
    if (!(residue[k] < 1e-10)) {
      throw NumericError("forward: imaginary residue " + std::to_string(residue[k]) +
                         " in band " + std::to_string(bank.labels[k]) +
                         " (filter not mirror-symmetric)");
    }
  }
  return out;
}

struct Reconstruction {
  Image image;
  std::vector<std::string> warnings;
};

/// Dual-frame inverse: IDFT( sum_n E-hat_n chi_n / max(coverage, 1e-12) ).
inline Reconstruction inverse_with_report(const CoefficientSet& coeffs, const FilterBank& bank) {
  detail::require(coeffs.size() == bank.size(), "inverse: coefficient count does not match the bank");
  std::vector<Spectrum> parts(bank.size());
  parallel_for(static_cast<int>(bank.size()), [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    require_same_shape(coeffs.bands[k], bank.coverage, "inverse");
    parts[k] = dft2(coeffs.bands[k]);
    const Image& chi = bank.filters[k];
    for (std::size_t j = 0; j < parts[k].size(); ++j) parts[k][j] *= chi[j];
  });
  Spectrum sum(bank.width(), bank.height());
  for (const Spectrum& p : parts)
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += p[j];
  for (std::size_t j = 0; j < sum.size(); ++j) sum[j] /= std::max(bank.coverage[j], 1e-12);
  return {idft2_real(sum), bank.warnings};
}

inline Image inverse(const CoefficientSet& coeffs, const FilterBank& bank) {
  return inverse_with_report(coeffs, bank).image;
}

/// Riemann sum of psi-hat^2 over the pixels of Lambda on a width x height grid.
inline double kernel_energy(const KernelSpec& kernel, int width, int height) {
  const SupportFrame frame(width, height);
  double sum = 0.0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Vec2 xi = frame.to_kernel({double(x), double(y)});
      if (!in_support(kernel.kind, xi)) continue;
      const double v = evaluate(kernel, xi);
      sum += v * v;
    }
  return sum;
}

/// Energy of psi_n on Omega_n relative to the energy of psi on Lambda. Equals
/// 1 up to quadrature when the bank is normalized.
inline double energy_ratio(int n, const FilterBank& bank, const LabelMap& labels) {
  require_same_shape(labels, bank.coverage, "energy_ratio");
  const Image& half = bank.halves[bank.index_of(n)];
  double num = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == n) num += half[i] * half[i];
  return num / kernel_energy(bank.kernel, labels.width(), labels.height());
}

}  // namespace ewt
