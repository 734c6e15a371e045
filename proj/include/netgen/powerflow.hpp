#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "netgen/carson.hpp"
#include "netgen/topology.hpp"

/**
 * @file powerflow.hpp
 * @brief Unbalanced three-phase backward/forward sweep for radial feeders with
 * constant-PQ wye loads, voltage screening and ensemble voltage statistics.
 */

namespace netgen {

using PhaseVector = std::array<Complex, 3>;

class NonRadialError : public std::runtime_error {
 public:
  explicit NonRadialError(const std::string& what)
      : std::runtime_error(what + "; the sweep solver needs a radial feeder, use export-opendss for meshed networks") {}
};

struct PowerFlowSettings {
  double base_kv_ll = 12.66;
  double base_kva = 1000.0;     ///< three-phase base
  double slack_voltage_pu = 1.0;
  double tolerance = 1e-6;      ///< power mismatch, fraction of base_kva
  int max_iterations = 100;

  [[nodiscard]] double z_base_ohm() const { return base_kv_ll * base_kv_ll * 1000.0 / base_kva; }
  [[nodiscard]] double phase_base_kva() const { return base_kva / 3.0; }
};

/// One snapshot to solve: loads in kW + j kvar per bus and phase, line impedance per km.
struct FeederSnapshot {
  std::vector<PhaseVector> load_kva;
  std::vector<PhaseMatrix> line_z_ohm_per_km;
};

struct PowerFlowResult {
  std::vector<PhaseVector> voltage_pu;       ///< zero on phases not energized
  std::vector<std::array<bool, 3>> energized;
  std::vector<PhaseVector> line_current_pu;  ///< sending-end current, zero on absent phases
  std::vector<std::size_t> line_parent;      ///< upstream bus of each line
  bool converged = false;
  int iterations = 0;
  double max_mismatch_kva = 0.0;
  std::vector<std::string> warnings;
};

/// Balanced set of magnitude `v` with phase angles 0, -120, 120 degrees.
inline PhaseVector balanced_set(double v) {
  const double a = 2.0 * std::numbers::pi / 3.0;
  return {std::polar(v, 0.0), std::polar(v, -a), std::polar(v, a)};
}

inline std::array<bool, 3> active_phases(const PhaseMatrix& z) {
  return {z[0][0] != Complex{}, z[1][1] != Complex{}, z[2][2] != Complex{}};
}

/**
 * Solve one snapshot. Loads are constant power per phase (wye). Iteration stops
 * when the largest per-bus, per-phase power mismatch drops below the tolerance
 * or after max_iterations (the result is then flagged, not thrown).
 */
inline PowerFlowResult solve(const NetworkTopology& topo, const FeederSnapshot& snap,
                             const PowerFlowSettings& settings = {}) {
  if (!topo.is_radial()) {
    throw NonRadialError("topology has " + std::to_string(topo.line_count()) + " lines for " +
                         std::to_string(topo.bus_count()) + " buses");
  }
  const std::size_t n = topo.bus_count();
  const std::size_t m = topo.line_count();
  if (snap.load_kva.size() != n || snap.line_z_ohm_per_km.size() != m) {
    throw std::invalid_argument("snapshot does not cover every bus and line");
  }
  const auto sp = shortest_paths(topo, DistanceMetric::edge_count);
  const double z_base = settings.z_base_ohm();
  const double s_base = settings.phase_base_kva();

  PowerFlowResult res;
  res.line_parent.assign(m, 0);
  res.energized.assign(n, {false, false, false});
  std::vector<PhaseMatrix> z_pu(m);
  std::vector<std::array<bool, 3>> line_on(m);
  std::vector<std::vector<std::size_t>> children(n);
  const std::size_t src = topo.source();
  res.energized[src] = {true, true, true};
  for (std::size_t b : sp.order) {
    if (b == src) continue;
    const std::size_t l = *sp.parent_line[b];
    const std::size_t p = *sp.parent_bus[b];
    res.line_parent[l] = p;
    children[p].push_back(l);
    const double len = topo.lines()[l].length_km;
    const auto on = active_phases(snap.line_z_ohm_per_km[l]);
    for (int j = 0; j < 3; ++j) {
      line_on[l][j] = on[j] && res.energized[p][j];
      res.energized[b][j] = line_on[l][j];
      for (int k = 0; k < 3; ++k) z_pu[l][j][k] = snap.line_z_ohm_per_km[l][j][k] * len / z_base;
    }
  }

  std::vector<PhaseVector> s_pu(n);
  for (std::size_t b = 0; b < n; ++b) {
    for (int j = 0; j < 3; ++j) {
      const Complex s = snap.load_kva[b][j];
      if (s == Complex{}) continue;
      if (!res.energized[b][j]) {
        res.warnings.push_back("load on unsupplied phase " + std::string(1, "ABC"[j]) + " at bus " + topo.buses()[b].id +
                               " ignored");
        continue;
      }
      s_pu[b][j] = s / s_base;
    }
  }

  const PhaseVector slack = balanced_set(settings.slack_voltage_pu);
  res.voltage_pu.assign(n, PhaseVector{});
  for (std::size_t b = 0; b < n; ++b) {
    for (int j = 0; j < 3; ++j) res.voltage_pu[b][j] = res.energized[b][j] ? slack[j] : Complex{};
  }
  res.line_current_pu.assign(m, PhaseVector{});
  std::vector<PhaseVector> bus_current(n);
  const double tol_kva = settings.tolerance * settings.base_kva;

  for (int it = 1; it <= settings.max_iterations; ++it) {
    res.iterations = it;
    for (std::size_t b = 0; b < n; ++b) {
      for (int j = 0; j < 3; ++j) {
        bus_current[b][j] = s_pu[b][j] == Complex{} ? Complex{} : std::conj(s_pu[b][j] / res.voltage_pu[b][j]);
      }
    }
    // backward: children before parents
    for (auto o = sp.order.rbegin(); o != sp.order.rend(); ++o) {
      const std::size_t b = *o;
      if (b == src) continue;
      const std::size_t l = *sp.parent_line[b];
      PhaseVector i = bus_current[b];
      for (std::size_t c : children[b]) {
        for (int j = 0; j < 3; ++j) i[j] += res.line_current_pu[c][j];
      }
      for (int j = 0; j < 3; ++j) res.line_current_pu[l][j] = line_on[l][j] ? i[j] : Complex{};
    }
    // forward
    for (std::size_t b : sp.order) {
      if (b == src) continue;
      const std::size_t l = *sp.parent_line[b];
      const std::size_t p = *sp.parent_bus[b];
      for (int j = 0; j < 3; ++j) {
        if (!line_on[l][j]) {
          res.voltage_pu[b][j] = Complex{};
          continue;
        }
        Complex drop{};
        for (int k = 0; k < 3; ++k) {
          if (line_on[l][k]) drop += z_pu[l][j][k] * res.line_current_pu[l][k];
        }
        res.voltage_pu[b][j] = res.voltage_pu[p][j] - drop;
      }
    }
    double mismatch = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      for (int j = 0; j < 3; ++j) {
        if (s_pu[b][j] == Complex{}) continue;
        const Complex s = res.voltage_pu[b][j] * std::conj(bus_current[b][j]);
        mismatch = std::max(mismatch, std::abs(s - s_pu[b][j]) * s_base);
      }
    }
    res.max_mismatch_kva = mismatch;
    if (!std::isfinite(mismatch)) break;
    if (mismatch < tol_kva) {
      res.converged = true;
      break;
    }
  }
  return res;
}

/// Largest per-bus complex power imbalance (kVA): inflow at the bus versus load plus outflow to child lines.
inline double balance_audit(const NetworkTopology& topo, const FeederSnapshot& snap, const PowerFlowResult& res,
                            const PowerFlowSettings& settings = {}) {
  const double s_base = settings.phase_base_kva();
  const double z_base = settings.z_base_ohm();
  const std::size_t n = topo.bus_count();
  std::vector<Complex> inflow(n), outflow(n), loss(topo.line_count());
  for (std::size_t l = 0; l < topo.line_count(); ++l) {
    const std::size_t p = res.line_parent[l];
    const auto [u, v] = topo.endpoints(l);
    const std::size_t c = u == p ? v : u;
    const double len = topo.lines()[l].length_km;
    for (int j = 0; j < 3; ++j) {
      const Complex i = res.line_current_pu[l][j];
      outflow[p] += res.voltage_pu[p][j] * std::conj(i);
      inflow[c] += res.voltage_pu[c][j] * std::conj(i);
      Complex drop{};
      for (int k = 0; k < 3; ++k) drop += snap.line_z_ohm_per_km[l][j][k] * len / z_base * res.line_current_pu[l][k];
      loss[l] += drop * std::conj(i);
    }
  }
  double worst = 0.0;
  for (std::size_t l = 0; l < topo.line_count(); ++l) {
    // sending-end power equals receiving-end power plus the series loss
    const std::size_t p = res.line_parent[l];
    const auto [u, v] = topo.endpoints(l);
    const std::size_t c = u == p ? v : u;
    Complex head{}, tail{};
    for (int j = 0; j < 3; ++j) {
      head += res.voltage_pu[p][j] * std::conj(res.line_current_pu[l][j]);
      tail += res.voltage_pu[c][j] * std::conj(res.line_current_pu[l][j]);
    }
    worst = std::max(worst, std::abs(head - tail - loss[l]) * s_base);
  }
  for (std::size_t b = 0; b < n; ++b) {
    if (b == topo.source()) continue;
    Complex load{};
    for (int j = 0; j < 3; ++j) {
      if (res.energized[b][j]) load += snap.load_kva[b][j] / s_base;
    }
    worst = std::max(worst, std::abs(inflow[b] - load - outflow[b]) * s_base);
  }
  return worst;
}

struct LimitCheck {
  bool pass = true;
  std::vector<std::size_t> offending_buses;
  double min_pu = std::numeric_limits<double>::infinity();
  double max_pu = -std::numeric_limits<double>::infinity();
};

/// Every energized phase magnitude must lie in [vmin, vmax].
inline LimitCheck check_limits(const PowerFlowResult& res, double vmin = 0.9, double vmax = 1.1) {
  LimitCheck out;
  for (std::size_t b = 0; b < res.voltage_pu.size(); ++b) {
    bool bad = false;
    for (int j = 0; j < 3; ++j) {
      if (!res.energized[b][j]) continue;
      const double v = std::abs(res.voltage_pu[b][j]);
      out.min_pu = std::min(out.min_pu, v);
      out.max_pu = std::max(out.max_pu, v);
      bad = bad || v < vmin || v > vmax;
    }
    if (bad) out.offending_buses.push_back(b);
  }
  out.pass = out.offending_buses.empty();
  return out;
}

struct PhaseVoltageStats {
  double min = std::numeric_limits<double>::infinity();
  double mean = 0.0;
  double max = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;
};

struct VoltageStats {
  std::array<PhaseVoltageStats, 3> phase;
  std::size_t samples = 0;
};

/// Per-phase min/mean/max magnitude over all energized buses of all converged results.
inline VoltageStats summarize(std::span<const PowerFlowResult> results) {
  VoltageStats st;
  std::array<double, 3> sum{};
  for (const auto& r : results) {
    if (!r.converged) continue;
    ++st.samples;
    for (std::size_t b = 0; b < r.voltage_pu.size(); ++b) {
      for (int j = 0; j < 3; ++j) {
        if (!r.energized[b][j]) continue;
        const double v = std::abs(r.voltage_pu[b][j]);
        auto& p = st.phase[j];
        p.min = std::min(p.min, v);
        p.max = std::max(p.max, v);
        sum[j] += v;
        ++p.count;
      }
    }
  }
  if (st.samples == 0) throw std::invalid_argument("no converged power-flow results to summarize");
  for (int j = 0; j < 3; ++j) st.phase[j].mean = st.phase[j].count ? sum[j] / st.phase[j].count : 0.0;
  return st;
}

/// Voltage statistics as a small text table: one row per statistic, one column per phase.
inline std::string format_voltage_table(const VoltageStats& st) {
  std::string out = "statistic,phase_a,phase_b,phase_c\n";
  char buf[128];
  auto row = [&](const char* name, auto get) {
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f\n", name, get(st.phase[0]), get(st.phase[1]), get(st.phase[2]));
    out += buf;
  };
  row("min", [](const PhaseVoltageStats& p) { return p.min; });
  row("mean", [](const PhaseVoltageStats& p) { return p.mean; });
  row("max", [](const PhaseVoltageStats& p) { return p.max; });
  return out;
}

}  // namespace netgen
