// Command-line front end: one subcommand per pipeline stage, with artifacts on
// disk between stages (partition/ -> fields/ -> coeffs/ -> rec.png).

#include <fftw3.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ewt/ewt.hpp"

#ifndef EWT_VERSION
#define EWT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kLabelOffset = 32768;

// ---------------------------------------------------------------------------
// Configuration: defaults, then the config file, then explicit flags.

using Binder = std::vector<std::function<void(ewt::PipelineConfig&)>>;

template <typename T, typename Fn>
CLI::Option* bind_option(CLI::App* app, Binder& binder, const std::string& name, const std::string& help, Fn apply) {
  auto value = std::make_shared<T>();
  CLI::Option* opt = app->add_option(name, *value, help);
  binder.push_back([opt, value, apply](ewt::PipelineConfig& c) {
    if (opt->count() > 0) apply(c, *value);
  });
  return opt;
}

CLI::Option* bind_flag(CLI::App* app, Binder& binder, const std::string& name, const std::string& help,
                       std::function<void(ewt::PipelineConfig&)> apply) {
  CLI::Option* opt = app->add_flag(name, help);
  binder.push_back([opt, apply](ewt::PipelineConfig& c) {
    if (opt->count() > 0) apply(c);
  });
  return opt;
}

struct Globals {
  std::string config_path;
  int threads = -1;
};

struct Resolved {
  ewt::PipelineConfig config;
  ewt::ConfigTable table;  // what the config file set
};

Resolved resolve(const Globals& g, const Binder& flags) {
  Resolved r;
  if (!g.config_path.empty()) {
    if (!fs::exists(g.config_path)) throw ewt::IoError("config file not found: '" + g.config_path + "'");
    r.table = ewt::parse_config_file(g.config_path);
    ewt::apply_config(r.config, r.table);
  }
  for (const auto& f : flags) f(r.config);
  if (g.threads >= 0) r.config.threads = g.threads;
  r.config.validate();
  ewt::set_thread_count(r.config.threads);
  return r;
}

std::string require_setting(const std::string& value, const std::string& flag, const std::string& key) {
  if (value.empty()) throw ewt::ConfigError("missing setting '" + key + "' (pass " + flag + " or set it in the config file)");
  return value;
}

json echo(const ewt::PipelineConfig& c) {
  json d;
  d["variant"] = ewt::to_string(c.demons.variant);
  d["sigma_x"] = c.demons.sigma_x;
  d["sigma_i"] = c.demons.sigma_i;
  d["sigma_f"] = c.demons.sigma_f;
  d["sigma_d"] = c.sigma_d ? json(*c.sigma_d) : json("auto");
  d["epsilon"] = c.demons.epsilon;
  d["max_iterations"] = c.demons.max_iterations;
  d["n_level"] = c.n_level ? json(*c.n_level) : json("auto");
  json j;
  j["input"] = c.input;
  j["partition"] = {{"method", ewt::to_string(c.method)}, {"s0", c.s0}};
  j["kernel"] = {{"kind", ewt::to_string(c.kernel.kind)}, {"tau", c.kernel.tau}};
  j["demons"] = d;
  j["normalized"] = c.normalized;
  j["segmentation"] = {{"k", c.k}, {"window", c.window}, {"seed", c.seed}, {"sigma_c", c.sigma_c}};
  json variants = json::array(), partitions = json::array(), kernels = json::array();
  for (auto v : c.variants) variants.push_back(ewt::to_string(v));
  for (auto p : c.partitions) partitions.push_back(ewt::to_string(p));
  for (auto k : c.kernels) kernels.push_back(ewt::to_string(k));
  j["bench"] = {{"variants", variants}, {"partitions", partitions}, {"kernels", kernels}, {"taus", c.taus}};
  return j;
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Artifacts.

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ewt::IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw ewt::IoError("cannot write '" + path.string() + "'");
}

json read_json(const fs::path& path) {
  if (!fs::exists(path)) throw ewt::IoError("input not found: '" + path.string() + "'");
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ewt::IoError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void require_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ewt::IoError("input not found: '" + dir.string() + "'");
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

fs::path sibling(const fs::path& file, const std::string& suffix) {
  fs::path p = file;
  p.replace_extension(suffix);
  return p;
}

class Timer {
 public:
  void stage(const std::string& name, const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    timings_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  const json& timings() const { return timings_; }

 private:
  json timings_ = json::object();
};

void write_manifest(const fs::path& path, const std::string& command, const ewt::PipelineConfig& c,
                    const json& config_echo, const Timer& timer, const std::vector<fs::path>& outputs,
                    const json& extra = json::object()) {
  json m;
  m["tool"] = "ewt";
  m["subcommand"] = command;
  m["versions"] = {{"ewt", EWT_VERSION}, {"fftw", std::string(fftw_version)}, {"libpng", PNG_LIBPNG_VER_STRING},
                   {"compiler", std::string(__VERSION__)}};
  m["config"] = config_echo;
  m["config_hash"] = fnv1a_hex(config_echo.dump());
  m["seed"] = c.seed;
  m["threads"] = ewt::thread_count();
  m["timings"] = timer.timings();
  json outs = json::array();
  for (const auto& p : outputs) outs.push_back(p.string());
  m["outputs"] = outs;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_json(path, m);
}

std::string field_name(int n) { return "field_" + std::to_string(n) + ".ewtf"; }
std::string coeff_name(int n) { return "coeff_" + std::to_string(n) + ".f32"; }

void save_partition(const fs::path& dir, const ewt::Partition& p, ewt::PartitionMethod method,
                    const std::string& input) {
  std::vector<std::uint16_t> samples(p.labels.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = static_cast<std::uint16_t>(p.labels[i] + kLabelOffset);
  ewt::io::write_png_samples(dir / "labels.png", p.width(), p.height(), 16, samples);
  json pairs = json::array(), centers = json::array(), sizes = json::object();
  for (const auto& [a, b] : p.pairs()) pairs.push_back({a, b});
  for (const ewt::Pixel& c : p.centers) centers.push_back({c.x, c.y});
  for (int n = -p.max_label(); n <= p.max_label(); ++n) sizes[std::to_string(n)] = p.region_size(n);
  json j;
  j["input"] = input;
  j["method"] = ewt::to_string(method);
  j["width"] = p.width();
  j["height"] = p.height();
  j["label_offset"] = kLabelOffset;
  j["max_label"] = p.max_label();
  j["s0"] = p.s0;
  j["pairs"] = pairs;
  j["centers"] = centers;
  j["region_sizes"] = sizes;
  write_json(dir / "partition.json", j);
}

ewt::Partition load_partition(const fs::path& dir) {
  require_dir(dir);
  const json meta = read_json(dir / "partition.json");
  const fs::path png = dir / "labels.png";
  if (!fs::exists(png)) throw ewt::IoError("input not found: '" + png.string() + "'");
  int w = 0, h = 0;
  const std::vector<std::uint16_t> samples = ewt::io::read_png_samples16(png, w, h);
  ewt::Partition p;
  p.labels = ewt::LabelMap(w, h);
  const int offset = meta.value("label_offset", kLabelOffset);
  for (std::size_t i = 0; i < samples.size(); ++i) p.labels[i] = static_cast<int>(samples[i]) - offset;
  for (const auto& c : meta.at("centers")) p.centers.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
  p.s0 = meta.at("s0").get<double>();
  return p;
}

struct FieldSet {
  ewt::KernelKind kind = ewt::KernelKind::Disk;
  std::vector<int> labels;
  std::vector<ewt::DisplacementField> fields;
};

FieldSet load_fields(const fs::path& dir) {
  require_dir(dir);
  const json meta = read_json(dir / "registration.json");
  FieldSet out;
  out.kind = ewt::parse_kernel_kind(meta.at("kernel").get<std::string>());
  for (const auto& n : meta.at("labels")) {
    out.labels.push_back(n.get<int>());
    const fs::path path = dir / field_name(out.labels.back());
    if (!fs::exists(path)) throw ewt::IoError("input not found: '" + path.string() + "'");
    out.fields.push_back(ewt::io::read_field(path));
  }
  return out;
}

json bank_summary(const ewt::FilterBank& bank) {
  return {{"filters", bank.size()},
          {"min_coverage", bank.min_coverage()},
          {"max_coverage", bank.max_coverage()},
          {"hole_fraction", bank.hole_fraction},
          {"reconstruction_safe", bank.reconstruction_safe},
          {"warnings", bank.warnings}};
}

json db_value(double v) { return std::isfinite(v) ? json(v) : json(ewt::format_db(v)); }

void warn_all(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "ewt: warning: " << w << '\n';
}

const std::uint8_t kPalette[8][3] = {{230, 25, 75},  {60, 180, 75},  {0, 130, 200}, {255, 225, 25},
                                     {145, 30, 180}, {70, 240, 240}, {245, 130, 48}, {128, 128, 128}};

// ---------------------------------------------------------------------------
// Subcommands.

void cmd_partition(const Resolved& r, const fs::path& out) {
  const ewt::PipelineConfig& c = r.config;
  const std::string input = require_setting(c.input, "--input", "input");
  Timer timer;
  ewt::Image f;
  ewt::Partition p;
  timer.stage("read", [&] { f = ewt::io::read_image(input); });
  timer.stage("partition", [&] { p = ewt::make_partition(f, c.method, c.s0); });
  fs::create_directories(out);
  timer.stage("write", [&] { save_partition(out, p, c.method, input); });
  write_manifest(out / "manifest.json", "partition", c, echo(c), timer,
                 {out / "labels.png", out / "partition.json"});
  std::cout << "partition: " << p.max_label() << " region pairs plus region 0 -> " << out.string() << '\n';
}

void cmd_register(const Resolved& r, const fs::path& part_dir, const fs::path& out) {
  const ewt::PipelineConfig& c = r.config;
  Timer timer;
  ewt::Partition p;
  timer.stage("read", [&] { p = load_partition(part_dir); });
  std::vector<ewt::RegionMapping> mappings;
  timer.stage("register", [&] {
    mappings = ewt::estimate_mappings(p, c.kernel.kind, c.demons_params(), c.auto_select());
  });
  fs::create_directories(out);
  std::vector<fs::path> outputs;
  json labels = json::array();
  timer.stage("write", [&] {
    for (const ewt::RegionMapping& m : mappings) {
      const fs::path field = out / field_name(m.label);
      ewt::io::write_field(field, m.estimate.field);
      json rec;
      rec["n"] = m.label;
      rec["variant"] = ewt::to_string(m.params.variant);
      rec["sigma_d"] = m.params.sigma_d;
      rec["n_level"] = m.params.levels;
      rec["iterations"] = m.estimate.iterations;
      rec["final_energy"] = m.estimate.final_energy;
      rec["rmse"] = m.estimate.rmse;
      const fs::path record = out / ("region_" + std::to_string(m.label) + ".json");
      write_json(record, rec);
      outputs.push_back(field);
      outputs.push_back(record);
      labels.push_back(m.label);
    }
    write_json(out / "registration.json", {{"partition", part_dir.string()},
                                           {"kernel", ewt::to_string(c.kernel.kind)},
                                           {"width", p.width()},
                                           {"height", p.height()},
                                           {"select_params", c.auto_select()},
                                           {"labels", labels}});
  });
  outputs.push_back(out / "registration.json");
  json config_echo = echo(c);
  config_echo["partition_dir"] = part_dir.string();
  write_manifest(out / "manifest.json", "register", c, config_echo, timer, outputs);
  double worst = 0.0;
  for (const auto& m : mappings) worst = std::max(worst, m.estimate.rmse);
  std::cout << "register: " << mappings.size() << " mappings, max rmse " << worst << " -> " << out.string()
            << '\n';
}

/// The kernel shape is fixed by the registration (it defines the reference
/// support); a conflicting explicit setting is an error.
ewt::KernelSpec bank_kernel(const Resolved& r, bool kernel_flag_given, ewt::KernelKind registered) {
  const bool explicit_kind = kernel_flag_given || r.table.count("kernel.kind") > 0;
  if (explicit_kind && r.config.kernel.kind != registered) {
    throw ewt::ConfigError("config key 'kernel.kind': fields were registered for the " +
                           ewt::to_string(registered) + " kernel");
  }
  return ewt::KernelSpec(registered, r.config.kernel.tau);
}

void cmd_transform(const Resolved& r, bool kernel_flag_given, const fs::path& bank_dir, const fs::path& out) {
  const ewt::PipelineConfig& c = r.config;
  const std::string input = require_setting(c.input, "--input", "input");
  Timer timer;
  ewt::Image f;
  FieldSet fields;
  timer.stage("read", [&] {
    f = ewt::io::read_image(input);
    fields = load_fields(bank_dir);
  });
  const ewt::KernelSpec kernel = bank_kernel(r, kernel_flag_given, fields.kind);
  ewt::FilterBank bank;
  ewt::CoefficientSet coeffs;
  timer.stage("bank", [&] { bank = ewt::build_bank(fields.labels, fields.fields, kernel, c.normalized); });
  timer.stage("forward", [&] { coeffs = ewt::forward(f, bank); });
  warn_all(bank.warnings);
  fs::create_directories(out);
  std::vector<fs::path> outputs;
  timer.stage("write", [&] {
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      const int n = coeffs.labels[i];
      const fs::path coeff = out / coeff_name(n);
      const fs::path preview = out / ("preview_" + std::to_string(n) + ".png");
      ewt::io::write_coefficients(coeff, coeffs.bands[i]);
      ewt::io::write_png(preview, ewt::io::normalize_for_display(coeffs.bands[i]), 8);
      outputs.push_back(coeff);
      outputs.push_back(preview);
    }
    write_json(out / "coeffs.json", {{"input", input},
                                     {"bank", bank_dir.string()},
                                     {"width", f.width()},
                                     {"height", f.height()},
                                     {"labels", coeffs.labels},
                                     {"kernel", ewt::to_string(kernel.kind)},
                                     {"tau", kernel.tau},
                                     {"normalized", c.normalized},
                                     {"bank_summary", bank_summary(bank)}});
  });
  outputs.push_back(out / "coeffs.json");
  json config_echo = echo(c);
  config_echo["bank_dir"] = bank_dir.string();
  write_manifest(out / "manifest.json", "transform", c, config_echo, timer, outputs);
  std::cout << "transform: " << coeffs.size() << " bands, coverage [" << bank.min_coverage() << ", "
            << bank.max_coverage() << "] -> " << out.string() << '\n';
}

void cmd_reconstruct(const Resolved& r, const fs::path& coeff_dir, const fs::path& bank_dir, const fs::path& out,
                     fs::path report, const std::string& reference_flag) {
  const ewt::PipelineConfig& c = r.config;
  if (report.empty()) report = out.parent_path() / "report.json";
  Timer timer;
  require_dir(coeff_dir);
  const json meta = read_json(coeff_dir / "coeffs.json");
  FieldSet fields;
  ewt::CoefficientSet coeffs;
  ewt::Image reference;
  const std::string reference_path = reference_flag.empty() ? meta.at("input").get<std::string>() : reference_flag;
  timer.stage("read", [&] {
    fields = load_fields(bank_dir);
    for (const auto& n : meta.at("labels")) {
      coeffs.labels.push_back(n.get<int>());
      const fs::path path = coeff_dir / coeff_name(coeffs.labels.back());
      if (!fs::exists(path)) throw ewt::IoError("input not found: '" + path.string() + "'");
      coeffs.bands.push_back(ewt::io::read_coefficients(path));
    }
    reference = ewt::io::read_image(reference_path);
  });
  if (fields.labels != coeffs.labels) {
    throw ewt::InvalidArgument("coefficient labels do not match the bank in '" + bank_dir.string() + "'");
  }
  const ewt::KernelSpec kernel(ewt::parse_kernel_kind(meta.at("kernel").get<std::string>()),
                               meta.at("tau").get<double>());
  const bool normalized = meta.at("normalized").get<bool>();
  ewt::FilterBank bank;
  ewt::Reconstruction rec;
  timer.stage("bank", [&] { bank = ewt::build_bank(fields.labels, fields.fields, kernel, normalized); });
  timer.stage("inverse", [&] { rec = ewt::inverse_with_report(coeffs, bank); });
  warn_all(rec.warnings);
  ensure_parent(out);
  ensure_parent(report);
  double psnr = 0.0, psnr_png = 0.0;
  timer.stage("write", [&] {
    ewt::io::write_png(out, rec.image);
    psnr = ewt::psnr(reference, rec.image);
    psnr_png = ewt::psnr(reference, ewt::io::read_image(out));
    json rep;
    rep["psnr"] = db_value(psnr);
    rep["psnr_png"] = db_value(psnr_png);
    rep["reference"] = reference_path;
    rep["min_coverage"] = bank.min_coverage();
    rep["max_coverage"] = bank.max_coverage();
    rep["hole_fraction"] = bank.hole_fraction;
    rep["reconstruction_safe"] = bank.reconstruction_safe;
    rep["warnings"] = rec.warnings;
    rep["kernel"] = ewt::to_string(kernel.kind);
    rep["tau"] = kernel.tau;
    rep["normalized"] = normalized;
    write_json(report, rep);
  });
  json config_echo = echo(c);
  config_echo["coeffs_dir"] = coeff_dir.string();
  config_echo["bank_dir"] = bank_dir.string();
  write_manifest(sibling(out, ".manifest.json"), "reconstruct", c, config_echo, timer, {out, report});
  std::cout << "reconstruct: PSNR " << ewt::format_db(psnr) << " dB -> " << out.string() << '\n';
}

void cmd_segment(const Resolved& r, const fs::path& out) {
  const ewt::PipelineConfig& c = r.config;
  const std::string input = require_setting(c.input, "--input", "input");
  ewt::SegmentConfig sc;
  sc.method = c.method;
  sc.s0 = c.s0;
  sc.kernel = c.kernel;
  sc.demons = c.demons_params();
  sc.select_params = c.auto_select();
  sc.normalized = c.normalized;
  sc.k = c.k;
  sc.window = c.window;
  sc.seed = c.seed;
  sc.sigma_c = c.sigma_c;
  Timer timer;
  ewt::Image f;
  ewt::SegmentResult res;
  timer.stage("read", [&] { f = ewt::io::read_image(input); });
  timer.stage("segment", [&] { res = ewt::segment(f, sc); });
  warn_all(res.bank.warnings);
  ensure_parent(out);
  const fs::path seg_json = sibling(out, ".json");
  timer.stage("write", [&] {
    std::vector<std::uint8_t> rgb(f.size() * 3);
    for (std::size_t i = 0; i < f.size(); ++i) {
      const std::uint8_t* col = kPalette[(res.segmentation.labels[i] - 1) % 8];
      std::copy(col, col + 3, rgb.begin() + static_cast<std::ptrdiff_t>(3 * i));
    }
    ewt::io::write_png_rgb(out, f.width(), f.height(), rgb);
    json j;
    j["k"] = res.segmentation.k;
    j["cluster_sizes"] = res.segmentation.cluster_sizes;
    j["cost"] = res.segmentation.cost;
    j["lloyd_steps"] = res.segmentation.cost_history.size();
    j["bands"] = res.bank.size();
    j["config"] = echo(c);
    write_json(seg_json, j);
  });
  write_manifest(sibling(out, ".manifest.json"), "segment", c, echo(c), timer, {out, seg_json});
  std::cout << "segment: k = " << res.segmentation.k << ", cost " << res.segmentation.cost << " -> "
            << out.string() << '\n';
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : ewt::format_db(v);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void cmd_bench(const Resolved& r, const fs::path& out) {
  const ewt::PipelineConfig& c = r.config;
  ewt::BenchmarkConfig bc;
  bc.variants = c.variants;
  bc.partitions = c.partitions;
  bc.kernels = c.kernels;
  bc.taus = c.taus;
  bc.params = c.demons_params();
  bc.select_params = c.auto_select();
  bc.s0 = c.s0;
  Timer timer;
  if (!c.input.empty()) timer.stage("read", [&] { bc.image = ewt::io::read_image(c.input); });
  ewt::AssessmentReport rep;
  timer.stage("bench", [&] { rep = ewt::run_benchmark(bc); });
  ensure_parent(out);
  json errors = json::array();
  timer.stage("write", [&] {
    std::ofstream csv(out);
    if (!csv) throw ewt::IoError("cannot write '" + out.string() + "'");
    csv << "variant,partition,kernel,tau,normalized,mean_rmse,min_rmse,max_rmse,psnr,seconds_register,"
           "seconds_roundtrip\n";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const ewt::BenchmarkRow& row : rep.rows) {
      const bool ok = row.error.empty();
      csv << ewt::to_string(row.variant) << ',' << ewt::to_string(row.partition) << ','
          << ewt::to_string(row.kernel) << ',' << csv_number(row.tau) << ',' << (row.normalized ? 1 : 0) << ','
          << csv_number(row.rmse.empty() ? nan : row.mean_rmse) << ','
          << csv_number(row.rmse.empty() ? nan : row.min_rmse) << ','
          << csv_number(row.rmse.empty() ? nan : row.max_rmse) << ',' << csv_number(ok ? row.psnr : nan) << ','
          << csv_number(row.seconds_register) << ',' << csv_number(row.seconds_roundtrip) << '\n';
      if (!ok) {
        errors.push_back({{"variant", ewt::to_string(row.variant)},
                          {"partition", ewt::to_string(row.partition)},
                          {"kernel", ewt::to_string(row.kernel)},
                          {"tau", row.tau},
                          {"normalized", row.normalized},
                          {"error", row.error}});
      }
    }
  });
  json extra;
  extra["seconds_partition"] = rep.seconds_partition;
  extra["row_errors"] = errors;
  extra["image"] = c.input.empty() ? json("toy 256x256 seed " + std::to_string(bc.seed)) : json(c.input);
  write_manifest(sibling(out, ".manifest.json"), "bench", c, echo(c), timer, {out}, extra);
  std::cout << "bench: " << rep.rows.size() << " rows (" << errors.size() << " failed) -> " << out.string()
            << '\n';
}

void cmd_toy(const Resolved& r, const fs::path& out, int size, std::uint64_t seed) {
  if (size < ewt::kMinSide) throw ewt::ConfigError("--size must be at least " + std::to_string(ewt::kMinSide));
  Timer timer;
  ewt::Image img;
  timer.stage("generate", [&] { img = ewt::toy_image(size, size, seed); });
  ensure_parent(out);
  ewt::io::write_png(out, img);
  json config_echo = {{"size", size}, {"seed", seed}};
  write_manifest(sibling(out, ".manifest.json"), "toy", r.config, config_echo, timer, {out});
  std::cout << "toy: " << size << "x" << size << " -> " << out.string() << '\n';
}

// Shared flag groups.

void add_partition_flags(CLI::App* app, Binder& b) {
  bind_option<std::string>(app, b, "--method", "voronoi|watershed",
                    [](auto& c, const std::string& v) { c.method = ewt::parse_partition_method(v); });
  bind_option<double>(app, b, "--s0", "scale-space step (default 0.8)", [](auto& c, double v) { c.s0 = v; });
}

CLI::Option* add_kernel_flag(CLI::App* app, Binder& b) {
  return bind_option<std::string>(app, b, "--kernel", "disk|square",
                           [](auto& c, const std::string& v) { c.kernel.kind = ewt::parse_kernel_kind(v); });
}

void add_tau_flags(CLI::App* app, Binder& b) {
  bind_option<double>(app, b, "--tau", "transition width in (0, 0.5) (default 0.2)",
               [](auto& c, double v) { c.kernel.tau = v; });
  bind_flag(app, b, "--normalized", "use the normalized filters", [](auto& c) { c.normalized = true; });
}

void add_demons_flags(CLI::App* app, Binder& b) {
  bind_option<std::string>(app, b, "--variant", "additive|thirion|diffeomorphic",
                    [](auto& c, const std::string& v) { c.demons.variant = ewt::parse_variant(v); });
  bind_option<double>(app, b, "--sigma-d", "field smoothing (default 0.4)", [](auto& c, double v) { c.sigma_d = v; });
  bind_option<int>(app, b, "--n-level", "pyramid levels (default 7)", [](auto& c, int v) { c.n_level = v; });
  bind_option<int>(app, b, "--max-iterations", "iteration cap per level (default 500)",
            [](auto& c, int v) { c.demons.max_iterations = v; });
  bind_flag(app, b, "--select-params", "pick sigma_d and levels by registration energy", [](auto& c) {
    c.sigma_d.reset();
    c.n_level.reset();
  });
}

void add_input_flag(CLI::App* app, Binder& b) {
  bind_option<std::string>(app, b, "--input", "input image (PNG or PGM)", [](auto& c, const std::string& v) { c.input = v; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical wavelet transform with demons-estimated Fourier supports", "ewt"};
  app.set_version_flag("--version", std::string("ewt ") + EWT_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  Globals globals;
  app.add_option("--config", globals.config_path, "key-value config file; flags take precedence");
  app.add_option("--threads", globals.threads, "worker threads (0 = EWT_THREADS or hardware)")
      ->check(CLI::NonNegativeNumber);

  auto command = [&](const std::string& name, const std::string& help) {
    return app.add_subcommand(name, help);
  };

  Binder b_part, b_reg, b_tr, b_rec, b_seg, b_bench, b_toy;
  std::string out;

  CLI::App* part = command("partition", "detect spectral modes and partition the Fourier domain");
  add_input_flag(part, b_part);
  add_partition_flags(part, b_part);
  part->add_option("--out", out, "output directory")->required();

  CLI::App* reg = command("register", "estimate one Fourier-support mapping per region");
  std::string part_dir;
  reg->add_option("--partition", part_dir, "partition directory")->required();
  add_kernel_flag(reg, b_reg);
  add_demons_flags(reg, b_reg);
  reg->add_option("--out", out, "output directory for fields")->required();

  CLI::App* tr = command("transform", "forward transform with the filter bank built from registered fields");
  std::string bank_dir;
  add_input_flag(tr, b_tr);
  tr->add_option("--bank", bank_dir, "directory written by 'ewt register'")->required();
  CLI::Option* tr_kernel = add_kernel_flag(tr, b_tr);
  add_tau_flags(tr, b_tr);
  tr->add_option("--out", out, "output directory for coefficients")->required();

  CLI::App* rec = command("reconstruct", "dual-frame inverse transform");
  std::string coeff_dir, report, reference;
  rec->add_option("--coeffs", coeff_dir, "directory written by 'ewt transform'")->required();
  rec->add_option("--bank", bank_dir, "directory written by 'ewt register'")->required();
  rec->add_option("--out", out, "reconstructed PNG")->required();
  rec->add_option("--report", report, "report JSON (default: report.json next to --out)");
  rec->add_option("--reference", reference, "image to compare against (default: the transform input)");

  CLI::App* seg = command("segment", "texture segmentation from local transform energy");
  add_input_flag(seg, b_seg);
  add_partition_flags(seg, b_seg);
  add_kernel_flag(seg, b_seg);
  add_tau_flags(seg, b_seg);
  add_demons_flags(seg, b_seg);
  bind_option<int>(seg, b_seg, "--k", "number of clusters", [](auto& c, int v) { c.k = v; });
  bind_option<int>(seg, b_seg, "--window", "odd averaging window (default 19)", [](auto& c, int v) { c.window = v; });
  bind_option<std::uint64_t>(seg, b_seg, "--seed", "k-means seed (default 42)", [](auto& c, std::uint64_t v) { c.seed = v; });
  bind_option<double>(seg, b_seg, "--sigma-c", "cartoon smoothing (default 3)", [](auto& c, double v) { c.sigma_c = v; });
  seg->add_option("--out", out, "label PNG; seg.json is written next to it")->required();

  CLI::App* bench = command("bench", "assessment grid over variants, partitions, kernels and tau");
  bind_option<std::string>(bench, b_bench, "--input", "image to assess (default: 256x256 synthetic toy)",
                    [](auto& c, const std::string& v) { c.input = v; });
  bind_option<std::vector<std::string>>(bench, b_bench, "--variants", "demons variants", [](auto& c, const auto& v) {
    c.variants.clear();
    for (const auto& s : v) c.variants.push_back(ewt::parse_variant(s));
  });
  bind_option<std::vector<std::string>>(bench, b_bench, "--partitions", "partition methods", [](auto& c, const auto& v) {
    c.partitions.clear();
    for (const auto& s : v) c.partitions.push_back(ewt::parse_partition_method(s));
  });
  bind_option<std::vector<std::string>>(bench, b_bench, "--kernels", "kernel shapes", [](auto& c, const auto& v) {
    c.kernels.clear();
    for (const auto& s : v) c.kernels.push_back(ewt::parse_kernel_kind(s));
  });
  bind_option<std::vector<double>>(bench, b_bench, "--taus", "transition widths",
                            [](auto& c, const std::vector<double>& v) { c.taus = v; });
  bind_option<int>(bench, b_bench, "--n-level", "pyramid levels (default 7)", [](auto& c, int v) { c.n_level = v; });
  bind_flag(bench, b_bench, "--select-params", "pick sigma_d and levels by registration energy", [](auto& c) {
    c.sigma_d.reset();
    c.n_level.reset();
  });
  bench->add_option("--out", out, "CSV report")->required();

  CLI::App* toy = command("toy", "write the synthetic test image");
  int toy_size = 256;
  std::uint64_t toy_seed = 2024;
  toy->add_option("--size", toy_size, "side length (default 256)");
  toy->add_option("--seed", toy_seed, "generator seed (default 2024)");
  toy->add_option("--out", out, "output PNG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*part) cmd_partition(resolve(globals, b_part), out);
    else if (*reg) cmd_register(resolve(globals, b_reg), part_dir, out);
    else if (*tr) cmd_transform(resolve(globals, b_tr), tr_kernel->count() > 0, bank_dir, out);
    else if (*rec) cmd_reconstruct(resolve(globals, b_rec), coeff_dir, bank_dir, out, report, reference);
    else if (*seg) cmd_segment(resolve(globals, b_seg), out);
    else if (*bench) cmd_bench(resolve(globals, b_bench), out);
    else if (*toy) cmd_toy(resolve(globals, b_toy), out, toy_size, toy_seed);
  } catch (const ewt::NumericError& e) {
    std::cerr << "ewt: numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const ewt::Error& e) {
    std::cerr << "ewt: error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "ewt: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ewt: internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
