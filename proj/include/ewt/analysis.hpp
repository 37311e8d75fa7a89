#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ewt/demons.hpp"
#include "ewt/pipeline.hpp"
#include "ewt/raster.hpp"
#include "ewt/transform.hpp"

namespace ewt {

/// (1/sqrt(N)) * ||fixed - moving o gamma||_2. Not symmetric: the warp acts
/// on the second image.
inline double rmse_mapping(const Image& fixed, const Image& moving, const DisplacementField& gamma) {
  require_same_shape(fixed, moving, "rmse_mapping");
  require_same_shape(fixed, gamma, "rmse_mapping");
  return std::sqrt(registration_energy(fixed, moving, gamma) / static_cast<double>(fixed.size()));
}

/// -10 log10(MSE); +infinity for identical images.
inline double psnr(const Image& f, const Image& g) {
  require_same_shape(f, g, "psnr");
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double d = f[i] - g[i];
    sum += d * d;
  }
  if (sum == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(sum / static_cast<double>(f.size()));
}

inline std::string format_db(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// Linear rescale to [0, 1]; constant images become 0.
inline Image rescale_unit(const Image& img) {
  const auto [lo, hi] = std::minmax_element(img.begin(), img.end());
  const double min = *lo;
  const double range = *hi - *lo;
  Image out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = range > 0.0 ? (img[i] - min) / range : 0.0;
  return out;
}

/// Synthetic test image: four cosine gratings in four distinct orientations
/// plus a smooth Gaussian blob, rescaled to [0, 1]. Wave vectors are not
/// grid-aligned, so every grating leaks energy over the whole spectrum.
inline Image toy_image(int width = 256, int height = 256, std::uint64_t seed = 2024) {
  detail::require(width >= kMinSide && height >= kMinSide, "toy_image: grid too small");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double side = std::min(width, height);
  struct Grating {
    double kx, ky;
    double amplitude, phase;
  };
  std::vector<Grating> gratings;
  for (int i = 0; i < 4; ++i) {
    const double angle = std::numbers::pi * (i + 0.15 + 0.7 * unit(rng)) / 4.0;
    const double radius = side * (0.15 + 0.2 * unit(rng));
    gratings.push_back({radius * std::cos(angle), radius * std::sin(angle),
                        0.5 + 0.5 * unit(rng), 2.0 * std::numbers::pi * unit(rng)});
  }
  const double bx = width * (0.4 + 0.2 * unit(rng));
  const double by = height * (0.4 + 0.2 * unit(rng));
  const double bs = side / 10.0;
  Image img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double v = 0.0;
      for (const Grating& g : gratings) {
        v += g.amplitude *
             std::cos(2.0 * std::numbers::pi * (g.kx * x / width + g.ky * y / height) +
                      g.phase);
      }
      const double dx = x - bx, dy = y - by;
      v += 1.5 * std::exp(-(dx * dx + dy * dy) / (2.0 * bs * bs));
      img(x, y) = v;
    }
  return rescale_unit(img);
}

struct BenchmarkConfig {
  std::vector<DemonsVariant> variants{DemonsVariant::Additive};
  std::vector<PartitionMethod> partitions{PartitionMethod::Voronoi};
  std::vector<KernelKind> kernels{KernelKind::Disk};
  std::vector<double> taus{0.1, 0.2, 0.3};
  DemonsParams params;
  bool select_params = false;
  double s0 = 0.8;
  std::optional<Image> image;  // toy_image() when empty
  std::uint64_t seed = 2024;
};

struct BenchmarkRow {
  DemonsVariant variant = DemonsVariant::Additive;
  PartitionMethod partition = PartitionMethod::Voronoi;
  KernelKind kernel = KernelKind::Disk;
  double tau = 0.2;
  bool normalized = false;
  std::vector<double> rmse;  // per region, label order
  double mean_rmse = 0.0, min_rmse = 0.0, max_rmse = 0.0;
  double psnr = 0.0;
  double seconds_register = 0.0;
  double seconds_roundtrip = 0.0;
  std::string error;  // empty on success
};

struct AssessmentReport {
  std::vector<BenchmarkRow> rows;
  double seconds_partition = 0.0;
  BenchmarkConfig config;
};

namespace detail {
inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return std::max(s, 1e-9);
}

inline void summarize_rmse(BenchmarkRow& row) {
  if (row.rmse.empty()) return;
  double sum = 0.0;
  row.min_rmse = row.max_rmse = row.rmse.front();
  for (double r : row.rmse) {
    sum += r;
    row.min_rmse = std::min(row.min_rmse, r);
    row.max_rmse = std::max(row.max_rmse, r);
  }
  row.mean_rmse = sum / static_cast<double>(row.rmse.size());
}
}  // namespace detail

/// Partition, register every region, then round-trip the image through the
/// normalized and unnormalized banks for each tau. One row per (variant,
/// partition, kernel, tau, normalization); a failing stage is recorded in the
/// row's `error` and the run continues.
inline AssessmentReport run_benchmark(const BenchmarkConfig& config) {
  AssessmentReport report;
  report.config = config;
  const Image f = config.image ? *config.image : toy_image(256, 256, config.seed);

  const auto t_part = std::chrono::steady_clock::now();
  std::map<PartitionMethod, Partition> partitions;
  std::map<PartitionMethod, std::string> partition_errors;
  for (PartitionMethod m : config.partitions) {
    try {
      partitions.emplace(m, make_partition(f, m, config.s0));
    } catch (const std::exception& e) {
      partition_errors.emplace(m, e.what());
    }
  }
  report.seconds_partition = detail::seconds_since(t_part);

  for (DemonsVariant variant : config.variants) {
    for (PartitionMethod method : config.partitions) {
      for (KernelKind kind : config.kernels) {
        BenchmarkRow proto;
        proto.variant = variant;
        proto.partition = method;
        proto.kernel = kind;
        std::vector<RegionMapping> mappings;
        if (auto it = partition_errors.find(method); it != partition_errors.end()) {
          proto.error = "partition: " + it->second;
        } else {
          const auto t0 = std::chrono::steady_clock::now();
          try {
            DemonsParams params = config.params;
            params.variant = variant;
            mappings = estimate_mappings(partitions.at(method), kind, params, config.select_params);
            for (const RegionMapping& m : mappings) proto.rmse.push_back(m.estimate.rmse);
            detail::summarize_rmse(proto);
          } catch (const std::exception& e) {
            proto.error = std::string("register: ") + e.what();
          }
          proto.seconds_register = detail::seconds_since(t0);
        }
        for (double tau : config.taus) {
          for (bool normalized : {true, false}) {
            BenchmarkRow row = proto;
            row.tau = tau;
            row.normalized = normalized;
            if (row.error.empty()) {
              const auto t0 = std::chrono::steady_clock::now();
              try {
                const FilterBank bank = build_bank(mappings, KernelSpec(kind, tau), normalized);
                row.psnr = psnr(f, inverse(forward(f, bank), bank));
              } catch (const std::exception& e) {
                row.error = std::string("round trip: ") + e.what();
              }
              row.seconds_roundtrip = detail::seconds_since(t0);
            }
            report.rows.push_back(std::move(row));
          }
        }
      }
    }
  }
  return report;
}

}  // namespace ewt
