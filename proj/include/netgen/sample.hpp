#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "netgen/config.hpp"
#include "netgen/io.hpp"
#include "netgen/model.hpp"

/**
 * @file sample.hpp
 * @brief One synthetic feeder per sample: phases, demands, reliability and line
 * impedances drawn from a single posterior row, plus the sample file format.
 */

namespace netgen {

class ZoneMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SyntheticSample {
  static constexpr int kSchemaVersion = 1;

  std::uint64_t sample_id = 0;
  std::uint64_t seed = 0;
  std::uint64_t model_seed = 0;
  std::size_t posterior_draw = 0;
  int zone_count = 0;
  std::vector<int> bus_zone;
  std::vector<int> line_zone;
  PhaseAllocation phases;
  std::vector<BusDemand> demand;
  std::optional<std::vector<BusReliability>> reliability;
  std::vector<LineParams> lines;
  std::vector<PhaseConfig> line_phase;
};

/// Precomputed per-topology state shared by every sample.
struct GenerationContext {
  const NetworkTopology* topology = nullptr;
  const FittedModel* model = nullptr;
  RamificationHierarchy hierarchy;
  ZoneAssignment zones;
  std::vector<std::size_t> line_downstream;
  AllocationOptions allocation;
  CarsonSettings carson;
  std::uint64_t seed = 0;
};

inline GenerationContext make_context(const NetworkTopology& topo, const FittedModel& model, const RunConfig& config) {
  if (config.zones != model.zone_count) {
    throw ZoneMismatchError("configuration asks for " + std::to_string(config.zones) + " zones but the fitted model has " +
                            std::to_string(model.zone_count));
  }
  GenerationContext ctx;
  ctx.topology = &topo;
  ctx.model = &model;
  ctx.hierarchy = build_hierarchy(topo);
  ctx.zones = assign_zones(topo, ctx.hierarchy.paths.distance, model.zone_count);
  ctx.line_downstream.resize(topo.line_count());
  for (std::size_t l = 0; l < topo.line_count(); ++l) {
    ctx.line_downstream[l] = downstream_endpoint(topo, ctx.hierarchy.paths.distance, l);
  }
  ctx.allocation = config.allocation_options();
  ctx.carson = config.carson;
  ctx.seed = config.seed;
  return ctx;
}

/// Sample `id`: allocate phases, then demands, reliability, line parameters and z_abc.
inline SyntheticSample generate_sample(const GenerationContext& ctx, std::uint64_t id) {
  const auto& topo = *ctx.topology;
  const auto& model = *ctx.model;
  Rng rng = Rng(ctx.seed).substream(id);
  SyntheticSample s;
  s.sample_id = id;
  s.seed = ctx.seed;
  s.model_seed = model.seed;
  s.zone_count = model.zone_count;
  s.bus_zone = ctx.zones.bus_zone;
  s.line_zone = ctx.zones.line_zone;
  Rng draw_rng = rng.substream("draw");
  s.posterior_draw = static_cast<std::size_t>(draw_rng.below(model.draw_count()));

  Rng phase_rng = rng.substream("phase");
  const auto base = model.phase.base_all(s.posterior_draw);
  s.phases = allocate(topo, ctx.hierarchy, s.bus_zone, base, phase_rng, ctx.allocation);

  Rng pf_rng = rng.substream("pf");
  const double pf = sample_power_factor(pf_rng);
  Rng load_rng = rng.substream("load");
  const auto lp = model.load.params(s.posterior_draw);
  s.demand.reserve(topo.bus_count());
  for (std::size_t b = 0; b < topo.bus_count(); ++b) {
    s.demand.push_back(topo.buses()[b].no_load ? zero_demand(pf) : sample_demand(lp, s.phases.bus_phase[b], pf, load_rng));
  }

  if (model.has_reliability()) {
    Rng rel_rng = rng.substream("reliability");
    const auto dp = model.caidi->params(s.posterior_draw);
    const auto fp = model.caifi->params(s.posterior_draw);
    std::vector<BusReliability> rel(topo.bus_count());
    for (std::size_t b = 0; b < topo.bus_count(); ++b) {
      if (topo.buses()[b].no_load) continue;
      rel[b].caidi_hours = sample_caidi(dp, s.bus_zone[b], rel_rng);
      rel[b].caifi_count = sample_caifi(fp, s.bus_zone[b], rel_rng);
    }
    s.reliability = std::move(rel);
  }

  Rng line_rng = rng.substream("line");
  const auto ld = model.line.draw(s.posterior_draw);
  s.lines.reserve(topo.line_count());
  s.line_phase.reserve(topo.line_count());
  for (std::size_t l = 0; l < topo.line_count(); ++l) {
    const auto cfg = s.phases.bus_phase[ctx.line_downstream[l]];
    s.line_phase.push_back(cfg);
    s.lines.push_back(sample_line(ld, s.line_zone[l], line_rng, cfg, ctx.carson));
  }
  return s;
}

/// Run `task(i)` for i in [0, n) on up to `threads` workers; the first exception is rethrown.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& task) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------------------
// Sample files

namespace detail {

inline nlohmann::json matrix_part(const PhaseMatrix& z, bool imag) {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& row : z) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& v : row) r.push_back(imag ? v.imag() : v.real());
    m.push_back(std::move(r));
  }
  return m;
}

inline PhaseMatrix matrix_from(const nlohmann::json& re, const nlohmann::json& im) {
  PhaseMatrix z{};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) z[i][j] = {re.at(i).at(j).get<double>(), im.at(i).at(j).get<double>()};
  }
  return z;
}

}  // namespace detail

inline nlohmann::json sample_to_json(const SyntheticSample& s, const NetworkTopology& topo) {
  nlohmann::json j;
  j["schema_version"] = SyntheticSample::kSchemaVersion;
  j["sample_id"] = s.sample_id;
  j["provenance"] = {{"model_schema_version", FittedModel::kSchemaVersion},
                     {"model_seed", s.model_seed},
                     {"seed", s.seed},
                     {"posterior_draw", s.posterior_draw}};
  j["zone_count"] = s.zone_count;
  j["source"] = topo.source_id();
  j["power_factor"] = s.demand.empty() ? 1.0 : s.demand.front().pf;
  j["reliability_present"] = s.reliability.has_value();
  auto& buses = j["buses"] = nlohmann::json::array();
  for (std::size_t b = 0; b < topo.bus_count(); ++b) {
    nlohmann::json e{{"id", topo.buses()[b].id},
                     {"zone", s.bus_zone[b]},
                     {"phase", to_string(s.phases.bus_phase[b])},
                     {"p_kw", s.demand[b].p_kw},
                     {"q_kvar", s.demand[b].q_kvar}};
    if (s.reliability) {
      e["caidi_hours"] = (*s.reliability)[b].caidi_hours;
      e["caifi_count"] = (*s.reliability)[b].caifi_count;
    }
    buses.push_back(std::move(e));
  }
  auto& lines = j["lines"] = nlohmann::json::array();
  for (std::size_t l = 0; l < topo.line_count(); ++l) {
    const auto& p = s.lines[l];
    lines.push_back({{"id", topo.lines()[l].id},
                     {"zone", s.line_zone[l]},
                     {"phase", to_string(s.line_phase[l])},
                     {"r1_ohm_per_km", p.r1_ohm_per_km},
                     {"x1_ohm_per_km", p.x1_ohm_per_km},
                     {"x_over_r", p.rho},
                     {"r_abc_ohm_per_km", detail::matrix_part(p.z_abc, false)},
                     {"x_abc_ohm_per_km", detail::matrix_part(p.z_abc, true)}});
  }
  j["warnings"] = s.phases.warnings;
  return j;
}

/// Parse a sample against `topo`; every bus and line must appear exactly once.
inline SyntheticSample sample_from_json(const nlohmann::json& j, const NetworkTopology& topo,
                                        const std::string& file = "sample") {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != SyntheticSample::kSchemaVersion) {
      throw IngestError({file + ": unsupported sample schema_version " + std::to_string(version)});
    }
    SyntheticSample s;
    s.sample_id = j.at("sample_id").get<std::uint64_t>();
    const auto& prov = j.at("provenance");
    s.model_seed = prov.at("model_seed").get<std::uint64_t>();
    s.seed = prov.at("seed").get<std::uint64_t>();
    s.posterior_draw = prov.at("posterior_draw").get<std::size_t>();
    s.zone_count = j.at("zone_count").get<int>();
    const double pf = j.at("power_factor").get<double>();
    const bool has_rel = j.at("reliability_present").get<bool>();

    std::vector<std::string> errors;
    const auto& buses = j.at("buses");
    const auto& lines = j.at("lines");
    s.bus_zone.assign(topo.bus_count(), 0);
    s.phases.bus_phase.assign(topo.bus_count(), PhaseConfig::ABC);
    s.demand.assign(topo.bus_count(), zero_demand(pf));
    if (has_rel) s.reliability.emplace(topo.bus_count());
    std::vector<char> seen(topo.bus_count(), 0);
    for (const auto& e : buses) {
      const auto id = e.at("id").get<std::string>();
      const auto b = topo.find_bus(id);
      if (!b) {
        errors.push_back(file + ": unknown bus '" + id + "'");
        continue;
      }
      if (seen[*b]++) {
        errors.push_back(file + ": bus '" + id + "' appears more than once");
        continue;
      }
      s.bus_zone[*b] = e.at("zone").get<int>();
      s.phases.bus_phase[*b] = parse_phase_config(e.at("phase").get<std::string>());
      s.demand[*b].p_kw = e.at("p_kw").get<std::array<double, 3>>();
      s.demand[*b].q_kvar = e.at("q_kvar").get<std::array<double, 3>>();
      if (has_rel) {
        (*s.reliability)[*b].caidi_hours = e.at("caidi_hours").get<double>();
        (*s.reliability)[*b].caifi_count = e.at("caifi_count").get<std::uint64_t>();
      }
    }
    for (std::size_t b = 0; b < topo.bus_count(); ++b) {
      if (!seen[b]) errors.push_back(file + ": bus '" + topo.buses()[b].id + "' is missing");
    }
    std::map<std::string, std::size_t> line_index;
    for (std::size_t l = 0; l < topo.line_count(); ++l) line_index[topo.lines()[l].id] = l;
    s.line_zone.assign(topo.line_count(), 0);
    s.lines.assign(topo.line_count(), LineParams{});
    s.line_phase.assign(topo.line_count(), PhaseConfig::ABC);
    std::vector<char> seen_line(topo.line_count(), 0);
    for (const auto& e : lines) {
      const auto id = e.at("id").get<std::string>();
      const auto it = line_index.find(id);
      if (it == line_index.end()) {
        errors.push_back(file + ": unknown line '" + id + "'");
        continue;
      }
      const auto l = it->second;
      if (seen_line[l]++) {
        errors.push_back(file + ": line '" + id + "' appears more than once");
        continue;
      }
      s.line_zone[l] = e.at("zone").get<int>();
      s.line_phase[l] = parse_phase_config(e.at("phase").get<std::string>());
      auto& p = s.lines[l];
      p.r1_ohm_per_km = e.at("r1_ohm_per_km").get<double>();
      p.x1_ohm_per_km = e.at("x1_ohm_per_km").get<double>();
      p.rho = e.at("x_over_r").get<double>();
      p.z_abc = detail::matrix_from(e.at("r_abc_ohm_per_km"), e.at("x_abc_ohm_per_km"));
    }
    for (std::size_t l = 0; l < topo.line_count(); ++l) {
      if (!seen_line[l]) errors.push_back(file + ": line '" + topo.lines()[l].id + "' is missing");
    }
    if (!errors.empty()) throw IngestError(errors);
    s.phases.warnings = j.value("warnings", std::vector<std::string>{});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw IngestError({file + ": " + e.what()});
  } catch (const std::invalid_argument& e) {
    throw IngestError({file + ": " + e.what()});
  }
}

inline std::string sample_file_name(std::uint64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%05llu.json", static_cast<unsigned long long>(id));
  return buf;
}

inline void write_sample(const SyntheticSample& s, const NetworkTopology& topo, const std::filesystem::path& path) {
  write_file_atomic(path, sample_to_json(s, topo).dump(1) + "\n");
}

inline SyntheticSample read_sample(const std::filesystem::path& path, const NetworkTopology& topo) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IngestError({path.string() + ": " + e.what()});
  }
  return sample_from_json(j, topo, path.string());
}

/// Sample files in `dir`, sorted by name.
inline std::vector<std::filesystem::path> list_samples(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("sample_", 0) == 0 && e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct GenerationReport {
  std::size_t samples = 0;
  std::vector<double> seconds;  ///< wall time per sample
  std::vector<std::string> warnings;
};

/// Generate samples [0, count) into `dir` concurrently. Timings are reported, never written into sample files.
inline GenerationReport generate_samples(const GenerationContext& ctx, std::size_t count,
                                         const std::filesystem::path& dir, unsigned threads = default_threads()) {
  GenerationReport rep;
  rep.samples = count;
  rep.seconds.assign(count, 0.0);
  std::vector<std::vector<std::string>> warnings(count);
  parallel_for(count, threads, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto s = generate_sample(ctx, i);
    rep.seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_sample(s, *ctx.topology, dir / sample_file_name(i));
    for (const auto& w : s.phases.warnings) warnings[i].push_back(sample_file_name(i) + ": " + w);
  });
  for (auto& w : warnings) rep.warnings.insert(rep.warnings.end(), w.begin(), w.end());
  return rep;
}

}  // namespace netgen
