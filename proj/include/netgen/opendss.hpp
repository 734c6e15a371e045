#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "netgen/io.hpp"
#include "netgen/powerflow.hpp"
#include "netgen/sample.hpp"

/**
 * @file opendss.hpp
 * @brief Export of one sample as OpenDSS scripts.
 *
 * Phase A, B and C map to nodes 1, 2 and 3. Each loaded phase becomes its own
 * single-phase wye Load element (`Load.<bus>_a` on `<bus>.1` and so on), so
 * unbalanced per-phase demand survives the export. Lines carry the lower
 * triangle of their active-phase R and X matrices in ohm/km.
 *
 * Files: Master.dss (circuit, redirects, solve), Lines.dss, Loads.dss.
 */

namespace netgen {

struct OpenDssOptions {
  std::string circuit_name = "netgen";
  double base_kv_ll = 12.66;
  double frequency_hz = 60.0;
  double source_pu = 1.0;
};

inline int opendss_node(int phase) { return phase + 1; }

namespace detail {

inline bool valid_dss_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string node_list(const std::string& bus, PhaseConfig cfg) {
  std::string out = bus;
  for (int j = 0; j < 3; ++j) {
    if (has_phase(cfg, j)) out += "." + std::to_string(opendss_node(j));
  }
  return out;
}

/// "(a11 | a21 a22 | ...)" over the active phases.
inline std::string lower_triangle(const PhaseMatrix& z, PhaseConfig cfg, bool imag) {
  std::vector<int> ph;
  for (int j = 0; j < 3; ++j) {
    if (has_phase(cfg, j)) ph.push_back(j);
  }
  std::string out = "(";
  for (std::size_t r = 0; r < ph.size(); ++r) {
    if (r > 0) out += " | ";
    for (std::size_t c = 0; c <= r; ++c) {
      if (c > 0) out += " ";
      const auto& v = z[ph[r]][ph[c]];
      out += fmt(imag ? v.imag() : v.real());
    }
  }
  return out + ")";
}

}  // namespace detail

struct OpenDssFiles {
  std::string master;
  std::string lines;
  std::string loads;
};

/// Build the scripts; throws if the sample does not cover the topology or names are not valid OpenDSS identifiers.
inline OpenDssFiles export_opendss(const SyntheticSample& s, const NetworkTopology& topo, const OpenDssOptions& opt = {}) {
  if (s.phases.bus_phase.size() != topo.bus_count() || s.demand.size() != topo.bus_count() ||
      s.lines.size() != topo.line_count() || s.line_phase.size() != topo.line_count()) {
    throw std::invalid_argument("incomplete sample: it does not cover every bus and line of the topology");
  }
  std::vector<std::string> bad;
  for (const auto& b : topo.buses()) {
    if (!detail::valid_dss_name(b.id)) bad.push_back("not a valid OpenDSS name: bus '" + b.id + "'");
  }
  for (const auto& l : topo.lines()) {
    if (!detail::valid_dss_name(l.id)) bad.push_back("not a valid OpenDSS name: line '" + l.id + "'");
  }
  if (!bad.empty()) throw IngestError(bad);

  OpenDssFiles f;
  const double kv_ln = opt.base_kv_ll / std::sqrt(3.0);
  f.master = "Clear\n";
  f.master += "Set DefaultBaseFrequency=" + detail::fmt(opt.frequency_hz) + "\n";
  f.master += "New Circuit." + opt.circuit_name + " Bus1=" + topo.source_id() + " BasekV=" + detail::fmt(opt.base_kv_ll) +
              " pu=" + detail::fmt(opt.source_pu) + " Phases=3 MVAsc3=1e6 MVAsc1=1e6\n";
  f.master += "Redirect Lines.dss\nRedirect Loads.dss\n";
  f.master += "Set VoltageBases=[" + detail::fmt(opt.base_kv_ll) + "]\nCalcVoltageBases\nSolve\n";

  for (std::size_t l = 0; l < topo.line_count(); ++l) {
    const auto& line = topo.lines()[l];
    const auto cfg = s.line_phase[l];
    const auto& p = s.lines[l];
    f.lines += "New Line." + line.id + " Phases=" + std::to_string(phase_count(cfg)) +
               " Bus1=" + detail::node_list(line.from, cfg) + " Bus2=" + detail::node_list(line.to, cfg) +
               " Length=" + detail::fmt(line.length_km) + " Units=km" +
               " Rmatrix=" + detail::lower_triangle(p.z_abc, cfg, false) +
               " Xmatrix=" + detail::lower_triangle(p.z_abc, cfg, true) +
               " Cmatrix=" + detail::lower_triangle(PhaseMatrix{}, cfg, false) + "\n";
  }

  constexpr char suffix[3] = {'a', 'b', 'c'};
  for (std::size_t b = 0; b < topo.bus_count(); ++b) {
    const auto& d = s.demand[b];
    for (int j = 0; j < 3; ++j) {
      if (d.p_kw[j] == 0.0 && d.q_kvar[j] == 0.0) continue;
      const auto& id = topo.buses()[b].id;
      f.loads += "New Load." + id + "_" + suffix[j] + " Bus1=" + id + "." + std::to_string(opendss_node(j)) +
                 " Phases=1 Conn=wye Model=1 kV=" + detail::fmt(kv_ln) + " kW=" + detail::fmt(d.p_kw[j]) +
                 " kvar=" + detail::fmt(d.q_kvar[j]) + "  ! pf=" + detail::fmt(d.pf) + "\n";
    }
  }
  return f;
}

inline void write_opendss(const OpenDssFiles& f, const std::filesystem::path& dir) {
  write_file_atomic(dir / "Master.dss", f.master);
  write_file_atomic(dir / "Lines.dss", f.lines);
  write_file_atomic(dir / "Loads.dss", f.loads);
}

}  // namespace netgen
