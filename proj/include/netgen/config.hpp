#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "netgen/carson.hpp"
#include "netgen/inference.hpp"
#include "netgen/phase_model.hpp"
#include "netgen/powerflow.hpp"

/**
 * @file config.hpp
 * @brief Run configuration: one JSON document read before any work starts.
 * Every field is optional in the file; absent fields keep their defaults.
 */

namespace netgen {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InputPaths {
  std::string topology = "topology.json";
  std::string buses = "buses.csv";
  std::string lines = "lines.csv";
  std::string reliability = "reliability.csv";  ///< optional table; missing file means no reliability model
};

struct ScenarioConfig {
  std::string source_phase = "ABC";
  std::vector<std::string> prohibited;  ///< configurations never drawn at ramification buses
};

struct ValidationConfig {
  double vmin = 0.9;
  double vmax = 1.1;
  double load_scale = 1.0;  ///< multiplier on sampled demand for the power-flow check
};

struct RunConfig {
  static constexpr int kSchemaVersion = 1;

  std::uint64_t seed = 1;
  int zones = 3;
  int samples = 10;
  inference::FitConfig fit;
  ScenarioConfig scenario;
  CarsonSettings carson;
  PowerFlowSettings powerflow;
  ValidationConfig validation;
  InputPaths inputs;
  std::string out = "out";

  /// Throws ConfigError listing every invalid field.
  void validate() const {
    std::vector<std::string> problems;
    auto need = [&](bool ok, const std::string& what) {
      if (!ok) problems.push_back(what);
    };
    need(zones >= 1, "zones must be >= 1");
    need(samples >= 0, "samples must be >= 0");
    need(fit.chains >= 1, "fit.chains must be >= 1");
    need(fit.warmup >= 1, "fit.warmup must be >= 1");
    need(fit.keep >= 1, "fit.keep must be >= 1");
    need(fit.thin >= 1, "fit.thin must be >= 1");
    need(fit.target_accept > 0.0 && fit.target_accept < 1.0, "fit.target_accept must be in (0, 1)");
    if (fit.chains >= 1 && fit.keep >= 1 && fit.thin >= 1) {
      need(static_cast<std::size_t>(fit.chains) * fit.draws_per_chain() >= inference::FitConfig::kMinDraws,
           "fit keeps fewer than " + std::to_string(inference::FitConfig::kMinDraws) + " pooled draws");
    }
    try {
      (void)parse_phase_config(scenario.source_phase);
      for (const auto& p : scenario.prohibited) (void)parse_phase_config(p);
    } catch (const std::exception& e) {
      problems.push_back(std::string("scenario: ") + e.what());
    }
    try {
      carson.validate();
      (void)conductor_positions(carson.geometry);
    } catch (const std::exception& e) {
      problems.push_back(std::string("carson: ") + e.what());
    }
    need(powerflow.base_kv_ll > 0.0, "powerflow.base_kv must be positive");
    need(powerflow.base_kva > 0.0, "powerflow.base_kva must be positive");
    need(powerflow.slack_voltage_pu > 0.0, "powerflow.slack_pu must be positive");
    need(powerflow.tolerance > 0.0, "powerflow.tolerance must be positive");
    need(powerflow.max_iterations >= 1, "powerflow.max_iterations must be >= 1");
    need(validation.vmin > 0.0 && validation.vmin < validation.vmax, "validation needs 0 < vmin < vmax");
    need(validation.load_scale >= 0.0, "validation.load_scale must be >= 0");
    if (!problems.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& p : problems) msg += "\n  - " + p;
      throw ConfigError(msg);
    }
  }

  [[nodiscard]] AllocationOptions allocation_options() const {
    AllocationOptions o;
    o.source_phase = parse_phase_config(scenario.source_phase);
    for (const auto& p : scenario.prohibited) o.prohibited.set(index_of(parse_phase_config(p)));
    return o;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  const auto& g = c.carson.geometry;
  return json{
      {"schema_version", RunConfig::kSchemaVersion},
      {"seed", c.seed},
      {"zones", c.zones},
      {"samples", c.samples},
      {"fit",
       {{"chains", c.fit.chains},
        {"warmup", c.fit.warmup},
        {"keep", c.fit.keep},
        {"thin", c.fit.thin},
        {"target_accept", c.fit.target_accept},
        {"init_jitter", c.fit.init_jitter},
        {"rhat_threshold", c.fit.rhat_threshold},
        {"parallel", c.fit.parallel}}},
      {"scenario", {{"source_phase", c.scenario.source_phase}, {"prohibited", c.scenario.prohibited}}},
      {"carson",
       {{"frequency_hz", c.carson.frequency_hz},
        {"earth_resistivity_ohm_m", c.carson.earth_resistivity_ohm_m},
        {"d_ab_m", g.d_ab},
        {"d_bc_m", g.d_bc},
        {"d_ac_m", g.d_ac},
        {"neutral_offset_m", g.neutral_offset_m},
        {"conductor_mode", c.carson.mode == ConductorMode::derived ? "derived" : "fixed"},
        {"phase_gmr_m", c.carson.phase.gmr_m},
        {"phase_r_ohm_per_km", c.carson.phase.r_ohm_per_km},
        {"neutral_gmr_m", c.carson.neutral.gmr_m},
        {"neutral_r_ohm_per_km", c.carson.neutral.r_ohm_per_km}}},
      {"powerflow",
       {{"base_kv", c.powerflow.base_kv_ll},
        {"base_kva", c.powerflow.base_kva},
        {"slack_pu", c.powerflow.slack_voltage_pu},
        {"tolerance", c.powerflow.tolerance},
        {"max_iterations", c.powerflow.max_iterations}}},
      {"validation",
       {{"vmin", c.validation.vmin}, {"vmax", c.validation.vmax}, {"load_scale", c.validation.load_scale}}},
      {"inputs",
       {{"topology", c.inputs.topology},
        {"buses", c.inputs.buses},
        {"lines", c.inputs.lines},
        {"reliability", c.inputs.reliability}}},
      {"out", c.out},
  };
}

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& target, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config field '" + where + key + "': " + e.what());
  }
}

inline const nlohmann::json& section(const nlohmann::json& j, const char* key) {
  static const nlohmann::json empty = nlohmann::json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
  return j.at(key);
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::read_field;
  using detail::section;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  int version = RunConfig::kSchemaVersion;
  read_field(j, "schema_version", version, "");
  if (version != RunConfig::kSchemaVersion) {
    throw ConfigError("unsupported config schema_version " + std::to_string(version));
  }
  read_field(j, "seed", c.seed, "");
  read_field(j, "zones", c.zones, "");
  read_field(j, "samples", c.samples, "");
  read_field(j, "out", c.out, "");

  const auto& f = section(j, "fit");
  read_field(f, "chains", c.fit.chains, "fit.");
  read_field(f, "warmup", c.fit.warmup, "fit.");
  read_field(f, "keep", c.fit.keep, "fit.");
  read_field(f, "thin", c.fit.thin, "fit.");
  read_field(f, "target_accept", c.fit.target_accept, "fit.");
  read_field(f, "init_jitter", c.fit.init_jitter, "fit.");
  read_field(f, "rhat_threshold", c.fit.rhat_threshold, "fit.");
  read_field(f, "parallel", c.fit.parallel, "fit.");

  const auto& s = section(j, "scenario");
  read_field(s, "source_phase", c.scenario.source_phase, "scenario.");
  read_field(s, "prohibited", c.scenario.prohibited, "scenario.");

  const auto& k = section(j, "carson");
  auto& g = c.carson.geometry;
  read_field(k, "frequency_hz", c.carson.frequency_hz, "carson.");
  read_field(k, "earth_resistivity_ohm_m", c.carson.earth_resistivity_ohm_m, "carson.");
  read_field(k, "d_ab_m", g.d_ab, "carson.");
  read_field(k, "d_bc_m", g.d_bc, "carson.");
  read_field(k, "d_ac_m", g.d_ac, "carson.");
  read_field(k, "neutral_offset_m", g.neutral_offset_m, "carson.");
  std::string mode = "derived";
  read_field(k, "conductor_mode", mode, "carson.");
  if (mode == "derived") {
    c.carson.mode = ConductorMode::derived;
  } else if (mode == "fixed") {
    c.carson.mode = ConductorMode::fixed;
  } else {
    throw ConfigError("config field 'carson.conductor_mode' must be \"derived\" or \"fixed\", got \"" + mode + "\"");
  }
  read_field(k, "phase_gmr_m", c.carson.phase.gmr_m, "carson.");
  read_field(k, "phase_r_ohm_per_km", c.carson.phase.r_ohm_per_km, "carson.");
  read_field(k, "neutral_gmr_m", c.carson.neutral.gmr_m, "carson.");
  read_field(k, "neutral_r_ohm_per_km", c.carson.neutral.r_ohm_per_km, "carson.");

  const auto& p = section(j, "powerflow");
  read_field(p, "base_kv", c.powerflow.base_kv_ll, "powerflow.");
  read_field(p, "base_kva", c.powerflow.base_kva, "powerflow.");
  read_field(p, "slack_pu", c.powerflow.slack_voltage_pu, "powerflow.");
  read_field(p, "tolerance", c.powerflow.tolerance, "powerflow.");
  read_field(p, "max_iterations", c.powerflow.max_iterations, "powerflow.");

  const auto& v = section(j, "validation");
  read_field(v, "vmin", c.validation.vmin, "validation.");
  read_field(v, "vmax", c.validation.vmax, "validation.");
  read_field(v, "load_scale", c.validation.load_scale, "validation.");

  const auto& in = section(j, "inputs");
  read_field(in, "topology", c.inputs.topology, "inputs.");
  read_field(in, "buses", c.inputs.buses, "inputs.");
  read_field(in, "lines", c.inputs.lines, "inputs.");
  read_field(in, "reliability", c.inputs.reliability, "inputs.");
  return c;
}

/// Read a config file. Relative input paths are resolved against the file's directory.
inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  RunConfig c = config_from_json(j);
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.inputs.topology);
  resolve(c.inputs.buses);
  resolve(c.inputs.lines);
  resolve(c.inputs.reliability);
  return c;
}

}  // namespace netgen
