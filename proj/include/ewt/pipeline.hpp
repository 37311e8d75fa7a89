#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ewt/demons.hpp"
#include "ewt/partition.hpp"
#include "ewt/transform.hpp"

namespace ewt {

enum class PartitionMethod { Voronoi, Watershed };

inline std::string to_string(PartitionMethod m) {
  return m == PartitionMethod::Voronoi ? "voronoi" : "watershed";
}

inline PartitionMethod parse_partition_method(std::string_view s) {
  if (s == "voronoi") return PartitionMethod::Voronoi;
  if (s == "watershed") return PartitionMethod::Watershed;
  throw InvalidArgument("unknown partition method '" + std::string(s) +
                        "' (expected voronoi|watershed)");
}

/// Fourier partition of an image: modes of its log spectrum, then Voronoi
/// cells or watershed basins around them.
inline Partition make_partition(const Image& f, PartitionMethod method, double s0 = 0.8) {
  const Image logspec = log_spectrum(f);
  const ModeSet modes = detect_modes(logspec, s0);
  Partition p = method == PartitionMethod::Voronoi
                    ? voronoi_partition(modes, f.width(), f.height())
                    : watershed_partition(logspec, modes);
  p.s0 = s0;
  return p;
}

inline FilterBank build_bank(const std::vector<RegionMapping>& mappings, const KernelSpec& kernel,
                             bool normalized) {
  std::vector<int> labels;
  std::vector<DisplacementField> fields;
  for (const RegionMapping& m : mappings) {
    labels.push_back(m.label);
    fields.push_back(m.estimate.field);
  }
  return build_bank(labels, fields, kernel, normalized);
}

}  // namespace ewt
