#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "netgen/config.hpp"
#include "netgen/demo.hpp"
#include "netgen/io.hpp"
#include "netgen/model.hpp"
#include "netgen/opendss.hpp"
#include "netgen/sample.hpp"
#include "netgen/validate.hpp"

/**
 * @file pipeline.hpp
 * @brief The fit / generate / validate / export steps behind the command line.
 *
 * Layout under `config.out`: model.json, fit_report.txt, samples/sample_NNNNN.json,
 * validation/{report.txt, samples.csv, voltage_stats.csv, phase_frequencies.csv},
 * opendss/sample_NNNNN/{Master,Lines,Loads}.dss.
 */

namespace netgen {

struct OutputLayout {
  std::filesystem::path root;

  [[nodiscard]] std::filesystem::path model() const { return root / "model.json"; }
  [[nodiscard]] std::filesystem::path fit_report() const { return root / "fit_report.txt"; }
  [[nodiscard]] std::filesystem::path samples() const { return root / "samples"; }
  [[nodiscard]] std::filesystem::path validation() const { return root / "validation"; }
  [[nodiscard]] std::filesystem::path opendss(std::uint64_t id) const {
    auto name = sample_file_name(id);
    return root / "opendss" / name.substr(0, name.size() - 5);
  }
};

inline FittedModel run_fit(const RunConfig& config, std::ostream& log) {
  config.validate();
  const OutputLayout out{config.out};
  const auto data = read_reference_data(config);
  log << "fitting on " << data.topology.bus_count() << " buses, " << data.topology.line_count() << " lines"
      << (data.reliability ? "" : " (no reliability table)") << "\n";
  const auto model = fit_all(data, config);
  save_model(model, out.model());
  const auto report = diagnostics_report(model);
  write_file_atomic(out.fit_report(), report);
  log << report << "wrote " << out.model().string() << "\n";
  return model;
}

/// Replace the sample directory contents with samples [0, config.samples).
inline GenerationReport run_generate(const RunConfig& config, const FittedModel& model, std::ostream& log) {
  config.validate();
  const OutputLayout out{config.out};
  const auto topo = read_topology(config.inputs.topology);
  const auto ctx = make_context(topo, model, config);
  for (const auto& old : list_samples(out.samples())) std::filesystem::remove(old);
  if (config.samples > 0) std::filesystem::create_directories(out.samples());
  const auto rep = generate_samples(ctx, static_cast<std::size_t>(config.samples), out.samples());
  char buf[160];
  for (std::size_t i = 0; i < rep.seconds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s %.1f ms\n", sample_file_name(i).c_str(), 1000.0 * rep.seconds[i]);
    log << buf;
  }
  if (!rep.seconds.empty()) {
    const double mean = std::accumulate(rep.seconds.begin(), rep.seconds.end(), 0.0) / static_cast<double>(rep.seconds.size());
    std::snprintf(buf, sizeof buf, "generated %zu samples on %zu buses, mean %.1f ms per sample\n", rep.samples,
                  topo.bus_count(), 1000.0 * mean);
    log << buf;
  } else {
    log << "no samples requested\n";
  }
  for (const auto& w : rep.warnings) log << "warning: " << w << "\n";
  return rep;
}

inline std::vector<SyntheticSample> read_samples(const std::filesystem::path& dir, const NetworkTopology& topo) {
  std::vector<SyntheticSample> out;
  for (const auto& p : list_samples(dir)) out.push_back(read_sample(p, topo));
  return out;
}

inline std::string format_sample_table(const ValidationReport& rep) {
  std::string out = "sample,consistent,converged,iterations,within_limits,min_pu,max_pu\n";
  char buf[200];
  for (const auto& c : rep.checks) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%d,%.6f,%.6f\n", sample_file_name(c.sample_id).c_str(), c.consistent(),
                  c.converged, c.iterations, c.within_limits, c.min_pu, c.max_pu);
    out += buf;
  }
  return out;
}

/// Validate every sample in the sample directory; `model` may be null.
inline ValidationReport run_validate(const RunConfig& config, const FittedModel* model, std::ostream& log) {
  config.validate();
  const OutputLayout out{config.out};
  const auto topo = read_topology(config.inputs.topology);
  const auto samples = read_samples(out.samples(), topo);
  const auto rep = validate_samples(topo, samples, config, model);
  const auto text = format_report(rep);
  write_file_atomic(out.validation() / "report.txt", text);
  write_file_atomic(out.validation() / "samples.csv", format_sample_table(rep));
  if (rep.has_voltage) write_file_atomic(out.validation() / "voltage_stats.csv", format_voltage_table(rep.voltage));
  if (!rep.phase_frequencies.empty()) {
    write_file_atomic(out.validation() / "phase_frequencies.csv", format_phase_frequency_table(rep.phase_frequencies));
  }
  log << text;
  return rep;
}

inline std::filesystem::path run_export(const RunConfig& config, std::uint64_t sample_id, std::ostream& log) {
  const OutputLayout out{config.out};
  const auto topo = read_topology(config.inputs.topology);
  const auto sample = read_sample(out.samples() / sample_file_name(sample_id), topo);
  OpenDssOptions opt;
  opt.base_kv_ll = config.powerflow.base_kv_ll;
  opt.frequency_hz = config.carson.frequency_hz;
  opt.source_pu = config.powerflow.slack_voltage_pu;
  const auto dir = out.opendss(sample_id);
  write_opendss(export_opendss(sample, topo, opt), dir);
  log << "wrote " << dir.string() << "\n";
  return dir;
}

struct DemoResult {
  RunConfig config;
  FittedModel model;
  ValidationReport validation;
};

/**
 * Build the demo dataset under `<out>/dataset`, then fit, generate `samples`
 * samples, validate them and export the first one.
 */
inline DemoResult run_demo(const std::filesystem::path& out, std::uint64_t seed, int samples, std::ostream& log) {
  const auto dataset_dir = out / "dataset";
  auto cfg = demo_config(seed);
  cfg.samples = samples;
  const auto data = build_demo(seed);
  write_demo_dataset(data, cfg, dataset_dir);
  log << "demo dataset: " << data.topology.bus_count() << " buses in " << dataset_dir.string() << "\n";
  auto config = load_config(dataset_dir / "config.json");
  config.seed = seed;
  config.samples = samples;
  config.out = out.string();
  DemoResult r;
  r.model = run_fit(config, log);
  run_generate(config, r.model, log);
  r.validation = run_validate(config, &r.model, log);
  if (samples > 0) run_export(config, 0, log);
  r.config = std::move(config);
  return r;
}

}  // namespace netgen
