#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "netgen/config.hpp"
#include "netgen/io.hpp"
#include "netgen/line_model.hpp"
#include "netgen/load_model.hpp"
#include "netgen/phase_model.hpp"
#include "netgen/reliability_model.hpp"
#include "netgen/topology.hpp"

/**
 * @file model.hpp
 * @brief The learned half of the pipeline: all sub-model posteriors fitted on
 * one reference feeder, plus their JSON persistence.
 */

namespace netgen {

struct ReferenceData {
  NetworkTopology topology;
  BusTable buses;
  LineTable lines;
  std::optional<ReliabilityTable> reliability;
};

/// Read the topology and tables named in `config.inputs`. A missing reliability file is not an error.
inline ReferenceData read_reference_data(const RunConfig& config) {
  auto topo = read_topology(config.inputs.topology);
  auto buses = parse_bus_table(read_csv(config.inputs.buses), topo);
  auto lines = parse_line_table(read_csv(config.inputs.lines), topo);
  std::optional<ReliabilityTable> rel;
  if (!config.inputs.reliability.empty() && std::filesystem::exists(config.inputs.reliability)) {
    rel = parse_reliability_table(read_csv(config.inputs.reliability), topo);
  }
  return {std::move(topo), std::move(buses), std::move(lines), std::move(rel)};
}

struct FittedModel {
  static constexpr int kSchemaVersion = 1;

  std::uint64_t seed = 0;
  int zone_count = 0;
  std::vector<double> training_thresholds_km;
  std::size_t training_buses = 0;
  std::size_t training_lines = 0;
  PhasePosterior phase;
  LoadPosterior load;
  std::optional<CaidiPosterior> caidi;
  std::optional<CaifiPosterior> caifi;
  LinePosterior line;
  std::vector<std::string> warnings;

  [[nodiscard]] bool has_reliability() const { return caidi.has_value() && caifi.has_value(); }

  /// Number of posterior rows every sub-model can supply.
  [[nodiscard]] std::size_t draw_count() const {
    std::size_t n = std::min({phase.ensemble.size(), load.ensemble.size(), line.size()});
    if (caidi) n = std::min(n, caidi->ensemble.size());
    if (caifi) n = std::min(n, caifi->ensemble.size());
    return n;
  }

  [[nodiscard]] std::vector<const inference::PosteriorEnsemble*> ensembles() const {
    std::vector<const inference::PosteriorEnsemble*> out{&phase.ensemble, &load.ensemble, &line.resistance.ensemble,
                                                         &line.ratio.ensemble};
    if (caidi) out.push_back(&caidi->ensemble);
    if (caifi) out.push_back(&caifi->ensemble);
    return out;
  }

  [[nodiscard]] double max_rhat() const {
    double m = 1.0;
    for (const auto* e : ensembles()) m = std::max(m, e->max_rhat());
    return m;
  }
};

inline inference::FitConfig submodel_config(const RunConfig& config, std::string_view name) {
  auto fc = config.fit;
  fc.seed = Rng(config.seed).substream(name).key();
  return fc;
}

/// Fit every sub-model on the reference data. Sub-models run one after another; chains run in parallel.
inline FittedModel fit_all(const ReferenceData& data, const RunConfig& config) {
  config.validate();
  const auto& topo = data.topology;
  const auto zones = assign_zones(topo, config.zones);
  FittedModel m;
  m.seed = config.seed;
  m.zone_count = zones.zone_count;
  m.training_thresholds_km = zones.thresholds;
  m.training_buses = topo.bus_count();
  m.training_lines = topo.line_count();
  m.warnings = zones.warnings;

  m.phase = fit_phase_model(data.buses.phase, zones, submodel_config(config, "phase"));

  std::vector<LoadObservation> loads;
  for (std::size_t b = 0; b < topo.bus_count(); ++b) {
    if (topo.buses()[b].no_load || !data.buses.phase[b] || !data.buses.p_kw[b]) continue;
    loads.push_back({*data.buses.phase[b], *data.buses.p_kw[b]});
  }
  if (loads.empty()) throw std::invalid_argument("no bus has both a phase and load values; cannot fit the load model");
  m.load = fit_load_model(loads, submodel_config(config, "load"));

  if (data.reliability) {
    std::vector<double> durations;
    std::vector<int> d_zone;
    std::vector<std::int64_t> counts;
    std::vector<int> c_zone;
    for (std::size_t b = 0; b < topo.bus_count(); ++b) {
      if (topo.buses()[b].no_load) continue;
      if (const auto& d = data.reliability->caidi_hours[b]) {
        durations.push_back(*d);
        d_zone.push_back(zones.bus_zone[b]);
      }
      if (const auto& c = data.reliability->caifi_count[b]) {
        counts.push_back(*c);
        c_zone.push_back(zones.bus_zone[b]);
      }
    }
    if (durations.empty() || counts.empty()) {
      m.warnings.push_back("reliability table has no usable CAIDI or CAIFI values; reliability marked absent");
    } else {
      m.caidi = fit_caidi(durations, d_zone, zones.zone_count, submodel_config(config, "caidi"));
      m.caifi = fit_caifi(counts, c_zone, zones.zone_count, submodel_config(config, "caifi"));
    }
  } else {
    m.warnings.push_back("no reliability table; reliability marked absent");
  }

  std::vector<double> r1;
  std::vector<double> rho;
  std::vector<int> l_zone;
  for (std::size_t l = 0; l < topo.line_count(); ++l) {
    if (!data.lines.r1_ohm_per_km[l] || !data.lines.x_over_r[l]) continue;
    r1.push_back(*data.lines.r1_ohm_per_km[l]);
    rho.push_back(*data.lines.x_over_r[l]);
    l_zone.push_back(zones.line_zone[l]);
  }
  if (r1.empty()) throw std::invalid_argument("no line has both r1_ohm_per_km and x_over_r; cannot fit the line model");
  m.line = fit_line_model(r1, rho, l_zone, zones.zone_count, submodel_config(config, "line"));

  auto add = [&](const std::vector<std::string>& w) { m.warnings.insert(m.warnings.end(), w.begin(), w.end()); };
  add(m.phase.ensemble.warnings);
  add(m.load.warnings);
  add(m.load.ensemble.warnings);
  if (m.caidi) {
    add(m.caidi->warnings);
    add(m.caidi->ensemble.warnings);
  }
  if (m.caifi) {
    add(m.caifi->warnings);
    add(m.caifi->ensemble.warnings);
  }
  add(m.line.warnings());
  add(m.line.resistance.ensemble.warnings);
  add(m.line.ratio.ensemble.warnings);
  return m;
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline nlohmann::json ensemble_to_json(const inference::PosteriorEnsemble& e) {
  nlohmann::json j;
  j["names"] = e.names;
  j["chains"] = e.chains;
  j["draws_per_chain"] = e.draws_per_chain;
  j["draws"] = e.draws;
  auto& rhat = j["rhat"] = nlohmann::json::array();
  for (double v : e.rhat) rhat.push_back(detail::finite_or_null(v));
  auto& ess = j["ess"] = nlohmann::json::array();
  for (double v : e.ess) ess.push_back(detail::finite_or_null(v));
  auto& acc = j["acceptance"] = nlohmann::json::array();
  for (const auto& b : e.acceptance) acc.push_back({{"block", b.name}, {"rate", b.acceptance}});
  j["warnings"] = e.warnings;
  return j;
}

inline inference::PosteriorEnsemble ensemble_from_json(const nlohmann::json& j) {
  inference::PosteriorEnsemble e;
  e.names = j.at("names").get<std::vector<std::string>>();
  e.chains = j.at("chains").get<int>();
  e.draws_per_chain = j.at("draws_per_chain").get<std::size_t>();
  e.draws = j.at("draws").get<std::vector<double>>();
  for (const auto& v : j.at("rhat")) e.rhat.push_back(detail::number_or_nan(v));
  for (const auto& v : j.at("ess")) e.ess.push_back(detail::number_or_nan(v));
  for (const auto& b : j.at("acceptance")) e.acceptance.push_back({b.at("block").get<std::string>(), b.at("rate").get<double>()});
  e.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (e.names.empty() || e.draws.size() % e.names.size() != 0) throw std::runtime_error("ensemble draws do not match its columns");
  return e;
}

inline nlohmann::json model_to_json(const FittedModel& m) {
  nlohmann::json j;
  j["schema_version"] = FittedModel::kSchemaVersion;
  j["seed"] = m.seed;
  j["zone_count"] = m.zone_count;
  j["training"] = {{"thresholds_km", m.training_thresholds_km},
                   {"buses", m.training_buses},
                   {"lines", m.training_lines}};
  auto& counts = j["phase"]["counts"] = nlohmann::json::array();
  for (const auto& c : m.phase.counts) counts.push_back(c);
  j["phase"]["ensemble"] = ensemble_to_json(m.phase.ensemble);
  j["load"] = {{"ensemble", ensemble_to_json(m.load.ensemble)}, {"warnings", m.load.warnings}};
  if (m.has_reliability()) {
    j["reliability"] = {{"caidi", {{"ensemble", ensemble_to_json(m.caidi->ensemble)}, {"warnings", m.caidi->warnings}}},
                        {"caifi", {{"ensemble", ensemble_to_json(m.caifi->ensemble)}, {"warnings", m.caifi->warnings}}}};
  } else {
    j["reliability"] = nullptr;
  }
  auto mixture = [](const MixturePosterior& p) {
    return nlohmann::json{{"label", p.label}, {"ensemble", ensemble_to_json(p.ensemble)}, {"warnings", p.warnings}};
  };
  j["line"] = {{"resistance", mixture(m.line.resistance)}, {"ratio", mixture(m.line.ratio)}};
  j["warnings"] = m.warnings;
  j["max_rhat"] = m.max_rhat();
  return j;
}

inline FittedModel model_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != FittedModel::kSchemaVersion) {
      throw std::runtime_error("unsupported fitted model schema_version " + std::to_string(version));
    }
    FittedModel m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.zone_count = j.at("zone_count").get<int>();
    m.training_thresholds_km = j.at("training").at("thresholds_km").get<std::vector<double>>();
    m.training_buses = j.at("training").at("buses").get<std::size_t>();
    m.training_lines = j.at("training").at("lines").get<std::size_t>();
    m.phase.zone_count = m.zone_count;
    m.phase.ensemble = ensemble_from_json(j.at("phase").at("ensemble"));
    for (const auto& c : j.at("phase").at("counts")) m.phase.counts.push_back(c.get<PhaseProbabilities>());
    m.load.ensemble = ensemble_from_json(j.at("load").at("ensemble"));
    m.load.warnings = j.at("load").at("warnings").get<std::vector<std::string>>();
    if (const auto& r = j.at("reliability"); !r.is_null()) {
      CaidiPosterior d;
      d.zone_count = m.zone_count;
      d.ensemble = ensemble_from_json(r.at("caidi").at("ensemble"));
      d.warnings = r.at("caidi").at("warnings").get<std::vector<std::string>>();
      CaifiPosterior f;
      f.zone_count = m.zone_count;
      f.ensemble = ensemble_from_json(r.at("caifi").at("ensemble"));
      f.warnings = r.at("caifi").at("warnings").get<std::vector<std::string>>();
      m.caidi = std::move(d);
      m.caifi = std::move(f);
    }
    auto mixture = [&](const nlohmann::json& mj) {
      MixturePosterior p;
      p.label = mj.at("label").get<std::string>();
      p.zone_count = m.zone_count;
      p.ensemble = ensemble_from_json(mj.at("ensemble"));
      p.warnings = mj.at("warnings").get<std::vector<std::string>>();
      return p;
    };
    m.line.resistance = mixture(j.at("line").at("resistance"));
    m.line.ratio = mixture(j.at("line").at("ratio"));
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (m.draw_count() == 0) throw std::runtime_error("fitted model has no posterior draws");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed fitted model: ") + e.what());
  }
}

inline void save_model(const FittedModel& m, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(m).dump(1) + "\n");
}

inline FittedModel load_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

/// Human-readable diagnostics: per ensemble the worst R-hat, smallest ESS and block acceptance rates.
inline std::string diagnostics_report(const FittedModel& m) {
  std::string out;
  char buf[256];
  auto section = [&](const std::string& name, const inference::PosteriorEnsemble& e) {
    double min_ess = std::numeric_limits<double>::infinity();
    for (double v : e.ess) {
      if (std::isfinite(v)) min_ess = std::min(min_ess, v);
    }
    std::snprintf(buf, sizeof buf, "%-10s draws=%zu params=%zu max_rhat=%.4f min_ess=%.0f\n", name.c_str(), e.size(),
                  e.columns(), e.max_rhat(), min_ess);
    out += buf;
    for (const auto& b : e.acceptance) {
      std::snprintf(buf, sizeof buf, "    accept %-24s %.3f\n", b.name.c_str(), b.acceptance);
      out += buf;
    }
  };
  section("phase", m.phase.ensemble);
  section("load", m.load.ensemble);
  if (m.caidi) section("caidi", m.caidi->ensemble);
  if (m.caifi) section("caifi", m.caifi->ensemble);
  if (!m.has_reliability()) out += "reliability: absent\n";
  section("line_R", m.line.resistance.ensemble);
  section("line_rho", m.line.ratio.ensemble);
  std::snprintf(buf, sizeof buf, "overall max_rhat=%.4f\n", m.max_rhat());
  out += buf;
  for (const auto& w : m.warnings) out += "warning: " + w + "\n";
  return out;
}

}  // namespace netgen
