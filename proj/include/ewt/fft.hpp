#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "ewt/grid.hpp"

namespace ewt {

enum class Direction { Forward, Inverse };

namespace detail {

// FFTW planning is not thread-safe; execution with a shared plan is. Plans are
// built once per (size, sign) with FFTW_ESTIMATE so the chosen algorithm, and
// hence the rounding, never depends on timing.
class PlanCache {
public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int width, int height, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(width, height, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<fftw_complex> scratch(static_cast<std::size_t>(width) * height);
    fftw_plan plan = fftw_plan_dft_2d(height, width, scratch.data(), scratch.data(), sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) throw NumericError("fftw: failed to create plan");
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

// Unitary transform of a center-origin grid. The shift to and from FFTW's
// corner-origin layout happens here and nowhere else.
inline Spectrum transform_centered(const Spectrum& in, int sign) {
  const int w = in.width();
  const int h = in.height();
  const FrequencyGrid fg(in);
  std::vector<std::complex<double>> buffer(in.size());
  for (int y = 0; y < h; ++y) {
    const int ry = ((y - fg.cy()) % h + h) % h;
    for (int x = 0; x < w; ++x) {
      const int rx = ((x - fg.cx()) % w + w) % w;
      buffer[static_cast<std::size_t>(ry) * w + rx] = in(x, y);
    }
  }
  fftw_plan plan = PlanCache::instance().get(w, h, sign);
  auto* raw = reinterpret_cast<fftw_complex*>(buffer.data());
  fftw_execute_dft(plan, raw, raw);
  const double scale = 1.0 / std::sqrt(static_cast<double>(w) * static_cast<double>(h));
  Spectrum out(w, h);
  for (int y = 0; y < h; ++y) {
    const int ry = ((y - fg.cy()) % h + h) % h;
    for (int x = 0; x < w; ++x) {
      const int rx = ((x - fg.cx()) % w + w) % w;
      out(x, y) = buffer[static_cast<std::size_t>(ry) * w + rx] * scale;
    }
  }
  return out;
}

inline void check_finite(const Spectrum& s) {
  for (const auto& v : s) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw NumericError("dft2: non-finite input value");
    }
  }
}

}  // namespace detail

/// Unitary forward DFT. Both the image and the returned spectrum use the
/// center-origin convention: pixel (W/2, H/2) holds frequency (0, 0).
inline Spectrum dft2(const Image& img) {
  if (!all_finite(img)) throw NumericError("dft2: non-finite input value");
  Spectrum in(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) in[i] = img[i];
  return detail::transform_centered(in, FFTW_FORWARD);
}

/// Unitary DFT of complex data in either direction.
inline Spectrum dft2(const Spectrum& s, Direction direction) {
  detail::check_finite(s);
  return detail::transform_centered(s, direction == Direction::Forward ? FFTW_FORWARD
                                                                       : FFTW_BACKWARD);
}

inline Spectrum idft2(const Spectrum& s) { return dft2(s, Direction::Inverse); }

/// Inverse DFT keeping the real part. The largest discarded imaginary
/// magnitude is written to max_imag when requested.
inline Image idft2_real(const Spectrum& s, double* max_imag = nullptr) {
  const Spectrum full = idft2(s);
  Image out(s.width(), s.height());
  double residue = 0.0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    out[i] = full[i].real();
    residue = std::max(residue, std::abs(full[i].imag()));
  }
  if (max_imag != nullptr) *max_imag = residue;
  return out;
}

}  // namespace ewt
