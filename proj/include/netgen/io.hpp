#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "netgen/load_model.hpp"
#include "netgen/phase_model.hpp"
#include "netgen/topology.hpp"

/**
 * @file io.hpp
 * @brief Topology and reference-table ingestion, atomic file output.
 *
 * Topology: JSON `{"source": id, "buses": [{id, x?, y?, no_load?}],
 * "lines": [{id, from, to, length_km}]}`. Reference tables are comma separated
 * with a header row; blank lines and lines starting with '#' are skipped.
 */

namespace netgen {

/// Collected ingestion problems, each "file:line: field 'name': message".
class IngestError : public std::runtime_error {
 public:
  explicit IngestError(std::vector<std::string> items)
      : std::runtime_error(join(items)), items_(std::move(items)) {}
  [[nodiscard]] const std::vector<std::string>& items() const noexcept { return items_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = std::to_string(items.size()) + " ingestion error(s)";
    for (std::size_t i = 0; i < items.size() && i < 50; ++i) out += "\n  " + items[i];
    if (items.size() > 50) out += "\n  ...";
    return out;
  }
  std::vector<std::string> items_;
};

/// Write via a temporary file in the same directory and rename over the target.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Topology

inline nlohmann::json topology_to_json(const NetworkTopology& topo) {
  nlohmann::json j;
  j["source"] = topo.source_id();
  auto& buses = j["buses"] = nlohmann::json::array();
  for (const auto& b : topo.buses()) {
    nlohmann::json e{{"id", b.id}};
    if (b.x) e["x"] = *b.x;
    if (b.y) e["y"] = *b.y;
    if (b.no_load) e["no_load"] = true;
    buses.push_back(std::move(e));
  }
  auto& lines = j["lines"] = nlohmann::json::array();
  for (const auto& l : topo.lines()) {
    lines.push_back({{"id", l.id}, {"from", l.from}, {"to", l.to}, {"length_km", l.length_km}});
  }
  return j;
}

inline NetworkTopology topology_from_json(const nlohmann::json& j, const std::string& file = "topology") {
  std::vector<std::string> errors;
  auto where = [&](const std::string& what) { return file + ": " + what; };
  if (!j.is_object()) throw IngestError({where("top level must be an object")});
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::string source;
  if (!j.contains("source") || !j["source"].is_string()) {
    errors.push_back(where("field 'source': missing or not a string"));
  } else {
    source = j["source"].get<std::string>();
  }
  auto list = [&](const char* key) -> const nlohmann::json* {
    if (!j.contains(key) || !j[key].is_array()) {
      errors.push_back(where(std::string("field '") + key + "': missing or not an array"));
      return nullptr;
    }
    return &j[key];
  };
  if (const auto* arr = list("buses")) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const auto& e = (*arr)[i];
      const std::string at = "buses[" + std::to_string(i) + "]";
      if (!e.is_object() || !e.contains("id") || !e["id"].is_string()) {
        errors.push_back(where(at + " field 'id': missing or not a string"));
        continue;
      }
      Bus b{e["id"].get<std::string>(), std::nullopt, std::nullopt, false};
      for (const char* k : {"x", "y"}) {
        if (!e.contains(k)) continue;
        if (!e[k].is_number()) {
          errors.push_back(where(at + " field '" + k + "': not a number"));
        } else {
          (std::string_view(k) == "x" ? b.x : b.y) = e[k].get<double>();
        }
      }
      if (e.contains("no_load")) {
        if (!e["no_load"].is_boolean()) {
          errors.push_back(where(at + " field 'no_load': not a boolean"));
        } else {
          b.no_load = e["no_load"].get<bool>();
        }
      }
      buses.push_back(std::move(b));
    }
  }
  if (const auto* arr = list("lines")) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const auto& e = (*arr)[i];
      const std::string at = "lines[" + std::to_string(i) + "]";
      Line l;
      bool ok = e.is_object();
      for (const char* k : {"id", "from", "to"}) {
        if (!ok || !e.contains(k) || !e[k].is_string()) {
          errors.push_back(where(at + " field '" + k + "': missing or not a string"));
          ok = false;
        }
      }
      if (ok && (!e.contains("length_km") || !e["length_km"].is_number())) {
        errors.push_back(where(at + " field 'length_km': missing or not a number"));
        ok = false;
      }
      if (!ok) continue;
      l.id = e["id"].get<std::string>();
      l.from = e["from"].get<std::string>();
      l.to = e["to"].get<std::string>();
      l.length_km = e["length_km"].get<double>();
      lines.push_back(std::move(l));
    }
  }
  if (!errors.empty()) throw IngestError(errors);
  try {
    return NetworkTopology(std::move(buses), std::move(lines), source);
  } catch (const TopologyError& e) {
    throw IngestError({where(e.what())});
  }
}

inline NetworkTopology read_topology(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IngestError({path.string() + ": " + e.what()});
  }
  return topology_from_json(j, path.string());
}

// ---------------------------------------------------------------------------
// Delimited tables

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct CsvTable {
  std::string file;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  [[nodiscard]] std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.emplace_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline CsvTable parse_csv(std::string_view text, const std::string& file) {
  CsvTable t;
  t.file = file;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<std::string> errors;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const auto line = trim(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    ++line_no;
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      errors.push_back(file + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                       " fields, found " + std::to_string(fields.size()));
      continue;
    }
    t.rows.push_back({line_no, std::move(fields)});
  }
  if (t.header.empty()) errors.push_back(file + ": missing header row");
  if (!errors.empty()) throw IngestError(errors);
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path), path.string()); }

namespace detail {

struct FieldReader {
  const CsvTable& table;
  std::vector<std::string>& errors;

  std::size_t require_column(std::string_view name) {
    if (auto c = table.column(name)) return *c;
    errors.push_back(table.file + ":1: missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(-1);
  }

  void fail(const CsvRow& row, std::string_view field, const std::string& msg) {
    errors.push_back(table.file + ":" + std::to_string(row.line) + ": field '" + std::string(field) + "': " + msg);
  }

  /// Empty cell -> nullopt; otherwise a finite number or an error.
  std::optional<double> number(const CsvRow& row, std::size_t col, std::string_view field) {
    const std::string& s = row.fields[col];
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
      fail(row, field, "not a number: '" + s + "'");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::int64_t> integer(const CsvRow& row, std::size_t col, std::string_view field) {
    const std::string& s = row.fields[col];
    if (s.empty()) return std::nullopt;
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      fail(row, field, "not an integer: '" + s + "'");
      return std::nullopt;
    }
    return v;
  }
};

inline std::optional<std::size_t> bus_of(const NetworkTopology& topo, detail::FieldReader& r, const CsvRow& row,
                                         std::size_t col) {
  const auto& id = row.fields[col];
  if (auto b = topo.find_bus(id)) return b;
  r.fail(row, "bus_id", "unknown bus '" + id + "'");
  return std::nullopt;
}

}  // namespace detail

/// Observed phase and per-phase active power of each bus (by bus index).
struct BusTable {
  std::vector<std::optional<PhaseConfig>> phase;
  std::vector<std::optional<std::array<double, 3>>> p_kw;
};

/// Columns bus_id, phase, p_a_kw, p_b_kw, p_c_kw. Phase or powers may be left empty.
inline BusTable parse_bus_table(const CsvTable& t, const NetworkTopology& topo) {
  std::vector<std::string> errors;
  detail::FieldReader r{t, errors};
  const auto c_id = r.require_column("bus_id");
  const auto c_phase = r.require_column("phase");
  const std::array<std::size_t, 3> c_p{r.require_column("p_a_kw"), r.require_column("p_b_kw"), r.require_column("p_c_kw")};
  if (!errors.empty()) throw IngestError(errors);
  BusTable out;
  out.phase.resize(topo.bus_count());
  out.p_kw.resize(topo.bus_count());
  std::vector<char> seen(topo.bus_count(), 0);
  constexpr std::array<std::string_view, 3> names{"p_a_kw", "p_b_kw", "p_c_kw"};
  for (const auto& row : t.rows) {
    const auto bus = detail::bus_of(topo, r, row, c_id);
    if (!bus) continue;
    if (seen[*bus]) {
      r.fail(row, "bus_id", "duplicate bus '" + row.fields[c_id] + "'");
      continue;
    }
    seen[*bus] = 1;
    std::optional<PhaseConfig> phase;
    if (!row.fields[c_phase].empty()) {
      try {
        phase = parse_phase_config(row.fields[c_phase]);
      } catch (const std::exception& e) {
        r.fail(row, "phase", e.what());
        continue;
      }
    }
    out.phase[*bus] = phase;
    std::array<std::optional<double>, 3> p;
    bool any = false;
    for (int j = 0; j < 3; ++j) {
      p[j] = r.number(row, c_p[j], names[j]);
      if (p[j] && *p[j] < 0.0) r.fail(row, names[j], "negative power");
      any = any || p[j].has_value();
    }
    if (!any) continue;
    if (!phase) {
      r.fail(row, "phase", "power given for a bus without a phase");
      continue;
    }
    std::array<double, 3> v{};
    bool complete = true;
    for (int j = 0; j < 3; ++j) {
      if (has_phase(*phase, j)) {
        if (!p[j]) {
          r.fail(row, names[j], "missing for active phase of a " + std::string(to_string(*phase)) + " bus");
          complete = false;
        }
        v[j] = p[j].value_or(0.0);
      } else if (p[j] && *p[j] != 0.0) {
        r.fail(row, names[j], "nonzero power on a phase the bus does not have");
        complete = false;
      }
    }
    if (complete) out.p_kw[*bus] = v;
  }
  if (!errors.empty()) throw IngestError(errors);
  return out;
}

struct LineTable {
  std::vector<std::optional<double>> r1_ohm_per_km;
  std::vector<std::optional<double>> x_over_r;
};

/// Columns line_id, r1_ohm_per_km, x_over_r.
inline LineTable parse_line_table(const CsvTable& t, const NetworkTopology& topo) {
  std::vector<std::string> errors;
  detail::FieldReader r{t, errors};
  const auto c_id = r.require_column("line_id");
  const auto c_r = r.require_column("r1_ohm_per_km");
  const auto c_x = r.require_column("x_over_r");
  if (!errors.empty()) throw IngestError(errors);
  std::map<std::string, std::size_t> index;
  for (std::size_t l = 0; l < topo.line_count(); ++l) index[topo.lines()[l].id] = l;
  LineTable out;
  out.r1_ohm_per_km.resize(topo.line_count());
  out.x_over_r.resize(topo.line_count());
  std::vector<char> seen(topo.line_count(), 0);
  for (const auto& row : t.rows) {
    const auto it = index.find(row.fields[c_id]);
    if (it == index.end()) {
      r.fail(row, "line_id", "unknown line '" + row.fields[c_id] + "'");
      continue;
    }
    if (seen[it->second]) {
      r.fail(row, "line_id", "duplicate line '" + row.fields[c_id] + "'");
      continue;
    }
    seen[it->second] = 1;
    const auto rv = r.number(row, c_r, "r1_ohm_per_km");
    const auto xv = r.number(row, c_x, "x_over_r");
    if (rv && *rv <= 0.0) r.fail(row, "r1_ohm_per_km", "must be positive");
    if (xv && *xv <= 0.0) r.fail(row, "x_over_r", "must be positive");
    out.r1_ohm_per_km[it->second] = rv;
    out.x_over_r[it->second] = xv;
  }
  if (!errors.empty()) throw IngestError(errors);
  return out;
}

struct ReliabilityTable {
  std::vector<std::optional<double>> caidi_hours;
  std::vector<std::optional<std::int64_t>> caifi_count;
};

/// Columns bus_id, caidi_hours, caifi_count.
inline ReliabilityTable parse_reliability_table(const CsvTable& t, const NetworkTopology& topo) {
  std::vector<std::string> errors;
  detail::FieldReader r{t, errors};
  const auto c_id = r.require_column("bus_id");
  const auto c_d = r.require_column("caidi_hours");
  const auto c_f = r.require_column("caifi_count");
  if (!errors.empty()) throw IngestError(errors);
  ReliabilityTable out;
  out.caidi_hours.resize(topo.bus_count());
  out.caifi_count.resize(topo.bus_count());
  std::vector<char> seen(topo.bus_count(), 0);
  for (const auto& row : t.rows) {
    const auto bus = detail::bus_of(topo, r, row, c_id);
    if (!bus) continue;
    if (seen[*bus]) {
      r.fail(row, "bus_id", "duplicate bus '" + row.fields[c_id] + "'");
      continue;
    }
    seen[*bus] = 1;
    const auto d = r.number(row, c_d, "caidi_hours");
    const auto f = r.integer(row, c_f, "caifi_count");
    if (d && *d < 0.0) r.fail(row, "caidi_hours", "must be >= 0");
    if (f && *f < 0) r.fail(row, "caifi_count", "must be >= 0");
    out.caidi_hours[*bus] = d;
    out.caifi_count[*bus] = f;
  }
  if (!errors.empty()) throw IngestError(errors);
  return out;
}

}  // namespace netgen
