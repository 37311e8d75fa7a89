#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ewt/demons.hpp"
#include "ewt/error.hpp"
#include "ewt/kernels.hpp"
#include "ewt/pipeline.hpp"

namespace ewt {

/// A value of the flat TOML subset: string, number, boolean, or a one-line
/// array of those.
struct ConfigValue {
  using Scalar = std::variant<std::string, double, bool>;
  std::variant<Scalar, std::vector<Scalar>> value;
  int line = 0;
};

/// Keys are "section.key" (or "key" before any section header).
using ConfigTable = std::map<std::string, ConfigValue>;

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

inline ConfigValue::Scalar parse_scalar(const std::string& text, int line) {
  auto fail = [&](const std::string& why) {
    return ConfigError("config line " + std::to_string(line) + ": " + why);
  };
  if (text.empty()) throw fail("missing value");
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') throw fail("unterminated string " + text);
    return text.substr(1, text.size() - 2);
  }
  if (text == "true") return true;
  if (text == "false") return false;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw fail("cannot parse value '" + text + "'");
  return v;
}

}  // namespace detail

inline ConfigTable parse_config(std::istream& in) {
  ConfigTable table;
  std::string section;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string text = detail::trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (table.count(full)) throw ConfigError("config key '" + full + "' given twice");
    ConfigValue value;
    value.line = line_no;
    if (!text.empty() && text.front() == '[') {
      if (text.back() != ']') throw ConfigError("config key '" + full + "': unterminated array");
      std::vector<ConfigValue::Scalar> items;
      std::stringstream body(text.substr(1, text.size() - 2));
      std::string item;
      while (std::getline(body, item, ',')) {
        item = detail::trim(item);
        if (!item.empty()) items.push_back(detail::parse_scalar(item, line_no));
      }
      value.value = std::move(items);
    } else {
      value.value = detail::parse_scalar(text, line_no);
    }
    table.emplace(full, std::move(value));
  }
  return table;
}

inline ConfigTable parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in);
}

/// Every tunable of the command-line pipeline. Optional sigma_d / n_level
/// mean "auto": chosen by parameter selection.
struct PipelineConfig {
  std::string input;
  std::string output;
  PartitionMethod method = PartitionMethod::Voronoi;
  double s0 = 0.8;
  KernelSpec kernel{KernelKind::Disk, 0.2};
  DemonsParams demons;
  std::optional<double> sigma_d = 0.4;
  std::optional<int> n_level = 7;
  bool normalized = false;
  int k = 3;
  int window = 19;
  std::uint64_t seed = 42;
  double sigma_c = 3.0;
  int threads = 0;
  // bench
  std::vector<DemonsVariant> variants{DemonsVariant::Additive};
  std::vector<PartitionMethod> partitions{PartitionMethod::Voronoi};
  std::vector<KernelKind> kernels{KernelKind::Disk};
  std::vector<double> taus{0.1, 0.2, 0.3};

  bool auto_select() const { return !sigma_d || !n_level; }

  /// Demons parameters with the fixed values applied.
  DemonsParams demons_params() const {
    DemonsParams p = demons;
    if (sigma_d) p.sigma_d = *sigma_d;
    if (n_level) p.levels = *n_level;
    return p;
  }

  /// Range checks; the message names the offending key.
  void validate() const {
    auto bad = [](const std::string& key, const std::string& why) {
      return ConfigError("config key '" + key + "': " + why);
    };
    if (!(s0 > 0)) throw bad("partition.s0", "must be > 0");
    if (!(kernel.tau > 0 && kernel.tau < 0.5)) throw bad("kernel.tau", "must lie in (0, 0.5)");
    if (!(demons.sigma_x > 0)) throw bad("demons.sigma_x", "must be > 0");
    if (!(demons.sigma_i > 0)) throw bad("demons.sigma_i", "must be > 0");
    if (!(demons.sigma_f > 0)) throw bad("demons.sigma_f", "must be > 0");
    if (sigma_d && !(*sigma_d > 0)) throw bad("demons.sigma_d", "must be > 0 or \"auto\"");
    if (!(demons.epsilon > 0)) throw bad("demons.epsilon", "must be > 0");
    if (demons.max_iterations < 5) throw bad("demons.max_iterations", "must be >= 5");
    if (n_level && *n_level < 1) throw bad("demons.n_level", "must be >= 1 or \"auto\"");
    if (k < 1) throw bad("segmentation.k", "must be >= 1");
    if (window < 1 || window % 2 == 0) throw bad("segmentation.window", "must be a positive odd integer");
    if (!(sigma_c > 0)) throw bad("segmentation.sigma_c", "must be > 0");
    if (threads < 0) throw bad("threads", "must be >= 0");
    for (double t : taus)
      if (!(t > 0 && t < 0.5)) throw bad("bench.taus", "every tau must lie in (0, 0.5)");
  }
};

namespace detail {

template <typename T>
T scalar_as(const ConfigValue& v, const std::string& key);

template <>
inline std::string scalar_as<std::string>(const ConfigValue& v, const std::string& key) {
  const auto* s = std::get_if<ConfigValue::Scalar>(&v.value);
  if (s == nullptr || !std::holds_alternative<std::string>(*s))
    throw ConfigError("config key '" + key + "': expected a string");
  return std::get<std::string>(*s);
}

template <>
inline double scalar_as<double>(const ConfigValue& v, const std::string& key) {
  const auto* s = std::get_if<ConfigValue::Scalar>(&v.value);
  if (s == nullptr || !std::holds_alternative<double>(*s))
    throw ConfigError("config key '" + key + "': expected a number");
  return std::get<double>(*s);
}

template <>
inline bool scalar_as<bool>(const ConfigValue& v, const std::string& key) {
  const auto* s = std::get_if<ConfigValue::Scalar>(&v.value);
  if (s == nullptr || !std::holds_alternative<bool>(*s))
    throw ConfigError("config key '" + key + "': expected true or false");
  return std::get<bool>(*s);
}

inline int as_int(const ConfigValue& v, const std::string& key) {
  const double d = scalar_as<double>(v, key);
  if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError("config key '" + key + "': expected an integer");
  return static_cast<int>(d);
}

inline std::vector<std::string> as_string_list(const ConfigValue& v, const std::string& key) {
  std::vector<std::string> out;
  if (const auto* arr = std::get_if<std::vector<ConfigValue::Scalar>>(&v.value)) {
    for (const auto& s : *arr) {
      if (!std::holds_alternative<std::string>(s)) throw ConfigError("config key '" + key + "': expected strings");
      out.push_back(std::get<std::string>(s));
    }
  } else {
    out.push_back(scalar_as<std::string>(v, key));
  }
  return out;
}

inline std::vector<double> as_number_list(const ConfigValue& v, const std::string& key) {
  std::vector<double> out;
  if (const auto* arr = std::get_if<std::vector<ConfigValue::Scalar>>(&v.value)) {
    for (const auto& s : *arr) {
      if (!std::holds_alternative<double>(s)) throw ConfigError("config key '" + key + "': expected numbers");
      out.push_back(std::get<double>(s));
    }
  } else {
    out.push_back(scalar_as<double>(v, key));
  }
  return out;
}

template <typename Fn>
auto rethrow_as_config(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

}  // namespace detail

/// Applies a parsed table on top of `config`. Unknown keys are rejected.
inline void apply_config(PipelineConfig& config, const ConfigTable& table) {
  using detail::as_int;
  using detail::scalar_as;
  for (const auto& [key, v] : table) {
    auto str = [&] { return scalar_as<std::string>(v, key); };
    auto num = [&] { return scalar_as<double>(v, key); };
    auto is_auto = [&] {
      const auto* s = std::get_if<ConfigValue::Scalar>(&v.value);
      return s != nullptr && std::holds_alternative<std::string>(*s) && std::get<std::string>(*s) == "auto";
    };
    if (key == "input") config.input = str();
    else if (key == "output") config.output = str();
    else if (key == "threads") config.threads = as_int(v, key);
    else if (key == "normalized" || key == "transform.normalized") config.normalized = scalar_as<bool>(v, key);
    else if (key == "partition.method") config.method = detail::rethrow_as_config(key, [&] { return parse_partition_method(str()); });
    else if (key == "partition.s0") config.s0 = num();
    else if (key == "kernel.kind") config.kernel.kind = detail::rethrow_as_config(key, [&] { return parse_kernel_kind(str()); });
    else if (key == "kernel.tau") config.kernel.tau = num();
    else if (key == "demons.variant") config.demons.variant = detail::rethrow_as_config(key, [&] { return parse_variant(str()); });
    else if (key == "demons.sigma_x") config.demons.sigma_x = num();
    else if (key == "demons.sigma_i") config.demons.sigma_i = num();
    else if (key == "demons.sigma_f") config.demons.sigma_f = num();
    else if (key == "demons.sigma_d") config.sigma_d = is_auto() ? std::nullopt : std::optional<double>(num());
    else if (key == "demons.epsilon") config.demons.epsilon = num();
    else if (key == "demons.max_iterations") config.demons.max_iterations = as_int(v, key);
    else if (key == "demons.n_level") config.n_level = is_auto() ? std::nullopt : std::optional<int>(as_int(v, key));
    else if (key == "segmentation.k") config.k = as_int(v, key);
    else if (key == "segmentation.window") config.window = as_int(v, key);
    else if (key == "segmentation.seed") config.seed = static_cast<std::uint64_t>(as_int(v, key));
    else if (key == "segmentation.sigma_c") config.sigma_c = num();
    else if (key == "bench.variants") {
      config.variants.clear();
      for (const auto& s : detail::as_string_list(v, key))
        config.variants.push_back(detail::rethrow_as_config(key, [&] { return parse_variant(s); }));
    } else if (key == "bench.partitions") {
      config.partitions.clear();
      for (const auto& s : detail::as_string_list(v, key))
        config.partitions.push_back(detail::rethrow_as_config(key, [&] { return parse_partition_method(s); }));
    } else if (key == "bench.kernels") {
      config.kernels.clear();
      for (const auto& s : detail::as_string_list(v, key))
        config.kernels.push_back(detail::rethrow_as_config(key, [&] { return parse_kernel_kind(s); }));
    } else if (key == "bench.taus") {
      config.taus = detail::as_number_list(v, key);
    } else {
      throw ConfigError("unknown config key '" + key + "' (line " + std::to_string(v.line) + ")");
    }
  }
}

}  // namespace ewt
