#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "netgen/config.hpp"
#include "netgen/io.hpp"
#include "netgen/line_model.hpp"
#include "netgen/load_model.hpp"
#include "netgen/phase_model.hpp"
#include "netgen/reliability_model.hpp"
#include "netgen/rng.hpp"
#include "netgen/topology.hpp"

/**
 * @file demo.hpp
 * @brief Synthetic reference feeder with known generating parameters.
 *
 * The feeder is a trunk with laterals and sub-laterals; the attribute tables
 * are drawn from the same generative model the library fits, so the fitted
 * posterior can be compared against `DemoTruth`.
 */

namespace netgen {

/// Generating parameters of the demo dataset (three zones).
struct DemoTruth {
  std::vector<PhaseProbabilities> phase_base{
      {0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.94},
      {0.06, 0.06, 0.06, 0.04, 0.04, 0.04, 0.70},
      {0.26, 0.25, 0.24, 0.07, 0.07, 0.06, 0.05},
  };
  LoadParams load{4.0, 7.0, 12.0, 0.55, {0.36, 0.33, 0.31}, 1.2};
  CaidiParams caidi{{0.90, 0.85, 0.80}, {1.4, 1.2, 1.0}, {0.8, 1.2, 1.6}};
  CaifiParams caifi{{1.5, 2.5, 3.5}, 4.0};
  MixtureDraw resistance{{0.15, 0.40, 0.90}, 0.12, {{0.60, 0.30, 0.10}, {0.30, 0.45, 0.25}, {0.10, 0.35, 0.55}}};
  MixtureDraw ratio{{0.50, 1.00, 1.80}, 0.12, {{0.15, 0.35, 0.50}, {0.30, 0.40, 0.30}, {0.50, 0.35, 0.15}}};
  double power_factor = 0.95;
};

struct DemoDataset {
  NetworkTopology topology;
  BusTable buses;
  LineTable lines;
  ReliabilityTable reliability;
};

/// Radial feeder of `bus_count` buses: a trunk, laterals off the trunk and sub-laterals off the laterals.
inline NetworkTopology make_demo_topology(std::size_t bus_count, Rng& rng) {
  if (bus_count < 10) throw std::invalid_argument("demo feeder needs at least 10 buses");
  struct Node {
    double x, y;
    int level;  // 0 trunk, 1 lateral, 2 sub-lateral
  };
  std::vector<Node> nodes{{0.0, 0.0, 0}};
  std::vector<Bus> buses;
  std::vector<Line> lines;
  auto name = [](char prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%04zu", prefix, i);
    return std::string(buf);
  };
  buses.push_back({name('b', 0), 0.0, 0.0, true});
  auto add = [&](std::size_t parent, double dx, double dy, int level) {
    const std::size_t id = nodes.size();
    nodes.push_back({nodes[parent].x + dx, nodes[parent].y + dy, level});
    const double len = std::hypot(dx, dy);
    buses.push_back({name('b', id), nodes[id].x, nodes[id].y, false});
    lines.push_back({name('l', id), buses[parent].id, buses[id].id, len});
    return id;
  };

  const std::size_t trunk = std::max<std::size_t>(6, bus_count / 25);
  std::vector<std::size_t> trunk_ids{0};
  for (std::size_t i = 0; i < trunk; ++i) trunk_ids.push_back(add(trunk_ids.back(), 0.2 + 0.1 * rng.uniform(), 0.0, 0));
  // junction buses on the trunk carry no load
  for (std::size_t i = 1; i < trunk_ids.size(); i += 3) buses[trunk_ids[i]].no_load = true;

  // laterals leave the trunk at every second bus only, which keeps the number of
  // branch points in series along the trunk small
  std::vector<std::size_t> taps;
  for (std::size_t i = 2; i < trunk_ids.size(); i += 2) taps.push_back(trunk_ids[i]);
  std::vector<std::size_t> lateral_buses;
  int side = 1;
  while (nodes.size() < bus_count) {
    const bool sub = !lateral_buses.empty() && rng.uniform() < 0.45;
    std::size_t at = sub ? lateral_buses[rng.below(lateral_buses.size())] : taps[rng.below(taps.size())];
    const int level = sub ? 2 : 1;
    const std::size_t length = sub ? 2 + rng.below(5) : 6 + rng.below(10);
    side = -side;
    for (std::size_t k = 0; k < length && nodes.size() < bus_count; ++k) {
      const double step = 0.08 + 0.06 * rng.uniform();
      const double dx = level == 1 ? 0.01 * (rng.uniform() - 0.5) : step * side;
      const double dy = level == 1 ? step * side : 0.01 * (rng.uniform() - 0.5);
      at = add(at, dx, dy, level);
      if (level == 1) lateral_buses.push_back(at);
    }
  }
  return NetworkTopology(std::move(buses), std::move(lines), name('b', 0));
}

/// Reference tables drawn from `truth` on `topo`.
inline DemoDataset make_demo_dataset(const NetworkTopology& topo, const DemoTruth& truth, Rng& rng) {
  const auto hierarchy = build_hierarchy(topo);
  const auto zones = assign_zones(topo, hierarchy.paths.distance, static_cast<int>(truth.phase_base.size()));
  Rng phase_rng = rng.substream("phase");
  const auto alloc = allocate(topo, hierarchy, zones.bus_zone, truth.phase_base, phase_rng);

  DemoDataset d{topo, {}, {}, {}};
  const auto n = topo.bus_count();
  d.buses.phase.resize(n);
  d.buses.p_kw.resize(n);
  d.reliability.caidi_hours.resize(n);
  d.reliability.caifi_count.resize(n);
  Rng load_rng = rng.substream("load");
  Rng rel_rng = rng.substream("reliability");
  for (std::size_t b = 0; b < n; ++b) {
    d.buses.phase[b] = alloc.bus_phase[b];
    if (topo.buses()[b].no_load) continue;
    d.buses.p_kw[b] = sample_demand(truth.load, alloc.bus_phase[b], truth.power_factor, load_rng).p_kw;
    d.reliability.caidi_hours[b] = sample_caidi(truth.caidi, zones.bus_zone[b], rel_rng);
    d.reliability.caifi_count[b] = static_cast<std::int64_t>(sample_caifi(truth.caifi, zones.bus_zone[b], rel_rng));
  }
  Rng line_rng = rng.substream("line");
  const LineDraw ld{truth.resistance, truth.ratio};
  d.lines.r1_ohm_per_km.resize(topo.line_count());
  d.lines.x_over_r.resize(topo.line_count());
  for (std::size_t l = 0; l < topo.line_count(); ++l) {
    const auto p = sample_line(ld, zones.line_zone[l], line_rng);
    d.lines.r1_ohm_per_km[l] = p.r1_ohm_per_km;
    d.lines.x_over_r[l] = p.rho;
  }
  return d;
}

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace detail

inline std::string format_bus_table(const NetworkTopology& topo, const BusTable& t) {
  std::string out = "bus_id,phase,p_a_kw,p_b_kw,p_c_kw\n";
  for (std::size_t b = 0; b < topo.bus_count(); ++b) {
    out += topo.buses()[b].id + ",";
    if (t.phase[b]) out += std::string(to_string(*t.phase[b]));
    for (int j = 0; j < 3; ++j) {
      out += ",";
      if (t.p_kw[b] && t.phase[b] && has_phase(*t.phase[b], j)) out += detail::num((*t.p_kw[b])[j]);
    }
    out += "\n";
  }
  return out;
}

inline std::string format_line_table(const NetworkTopology& topo, const LineTable& t) {
  std::string out = "line_id,r1_ohm_per_km,x_over_r\n";
  for (std::size_t l = 0; l < topo.line_count(); ++l) {
    out += topo.lines()[l].id + ",";
    if (t.r1_ohm_per_km[l]) out += detail::num(*t.r1_ohm_per_km[l]);
    out += ",";
    if (t.x_over_r[l]) out += detail::num(*t.x_over_r[l]);
    out += "\n";
  }
  return out;
}

inline std::string format_reliability_table(const NetworkTopology& topo, const ReliabilityTable& t) {
  std::string out = "bus_id,caidi_hours,caifi_count\n";
  for (std::size_t b = 0; b < topo.bus_count(); ++b) {
    if (!t.caidi_hours[b] && !t.caifi_count[b]) continue;
    out += topo.buses()[b].id + ",";
    if (t.caidi_hours[b]) out += detail::num(*t.caidi_hours[b]);
    out += ",";
    if (t.caifi_count[b]) out += std::to_string(*t.caifi_count[b]);
    out += "\n";
  }
  return out;
}

/// Default configuration of the demo run; input paths are relative to the dataset directory.
inline RunConfig demo_config(std::uint64_t seed = 1) {
  RunConfig c;
  c.seed = seed;
  c.zones = 3;
  c.samples = 20;
  c.out = "out";
  // the load hyperparameters are pinned by one potential per category and mix slowly
  c.fit.warmup = 4000;
  c.fit.keep = 8000;
  c.fit.thin = 16;
  return c;
}

/// Write topology.json, the three tables and config.json into `dir`.
inline void write_demo_dataset(const DemoDataset& d, const RunConfig& config, const std::filesystem::path& dir) {
  write_file_atomic(dir / "topology.json", topology_to_json(d.topology).dump(1) + "\n");
  write_file_atomic(dir / "buses.csv", format_bus_table(d.topology, d.buses));
  write_file_atomic(dir / "lines.csv", format_line_table(d.topology, d.lines));
  write_file_atomic(dir / "reliability.csv", format_reliability_table(d.topology, d.reliability));
  write_file_atomic(dir / "config.json", to_json(config).dump(2) + "\n");
}

inline constexpr std::size_t kDemoBuses = 300;

inline DemoDataset build_demo(std::uint64_t seed, std::size_t bus_count = kDemoBuses, const DemoTruth& truth = {}) {
  Rng rng = Rng(seed).substream("demo");
  Rng topo_rng = rng.substream("topology");
  const auto topo = make_demo_topology(bus_count, topo_rng);
  Rng data_rng = rng.substream("data");
  return make_demo_dataset(topo, truth, data_rng);
}

}  // namespace netgen
