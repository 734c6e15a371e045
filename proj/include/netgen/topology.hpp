#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace netgen {

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Bus {
  std::string id;
  std::optional<double> x;
  std::optional<double> y;
  bool no_load = false;
};

struct Line {
  std::string id;
  std::string from;
  std::string to;
  double length_km = 0.0;
};

/// An incident line seen from one endpoint.
struct Incidence {
  std::size_t neighbor;
  std::size_t line;
};

/**
 * @brief Immutable feeder graph with a designated source bus.
 *
 * Buses and lines are addressed by their position in the input vectors; string
 * ids are kept for I/O. Construction validates id uniqueness, endpoint
 * existence, positive lengths and connectivity from the source.
 */
class NetworkTopology {
 public:
  NetworkTopology(std::vector<Bus> buses, std::vector<Line> lines, std::string source)
      : buses_(std::move(buses)), lines_(std::move(lines)) {
    if (buses_.empty()) throw TopologyError("topology has no buses");
    for (std::size_t i = 0; i < buses_.size(); ++i) {
      if (!bus_index_.emplace(buses_[i].id, i).second) {
        throw TopologyError("duplicate bus id '" + buses_[i].id + "'");
      }
    }
    const auto src = bus_index_.find(source);
    if (src == bus_index_.end()) throw TopologyError("source bus '" + source + "' is not a bus");
    source_ = src->second;

    adjacency_.resize(buses_.size());
    endpoints_.reserve(lines_.size());
    std::unordered_map<std::string, std::size_t> line_ids;
    for (std::size_t l = 0; l < lines_.size(); ++l) {
      const Line& line = lines_[l];
      if (!line_ids.emplace(line.id, l).second) throw TopologyError("duplicate line id '" + line.id + "'");
      if (!(line.length_km > 0.0) || !std::isfinite(line.length_km)) {
        throw TopologyError("line '" + line.id + "' must have a positive length");
      }
      const std::size_t u = lookup(line.from, line.id);
      const std::size_t v = lookup(line.to, line.id);
      if (u == v) throw TopologyError("line '" + line.id + "' is a self-loop");
      endpoints_.emplace_back(u, v);
      adjacency_[u].push_back({v, l});
      adjacency_[v].push_back({u, l});
    }
    require_connected();
  }

  [[nodiscard]] const std::vector<Bus>& buses() const noexcept { return buses_; }
  [[nodiscard]] const std::vector<Line>& lines() const noexcept { return lines_; }
  [[nodiscard]] std::size_t bus_count() const noexcept { return buses_.size(); }
  [[nodiscard]] std::size_t line_count() const noexcept { return lines_.size(); }
  [[nodiscard]] std::size_t source() const noexcept { return source_; }
  [[nodiscard]] const std::string& source_id() const noexcept { return buses_[source_].id; }

  [[nodiscard]] std::optional<std::size_t> find_bus(const std::string& id) const {
    const auto it = bus_index_.find(id);
    if (it == bus_index_.end()) return std::nullopt;
    return it->second;
  }

  [[nodiscard]] std::size_t bus_index(const std::string& id) const {
    if (auto i = find_bus(id)) return *i;
    throw TopologyError("unknown bus id '" + id + "'");
  }

  /// (from, to) bus indices of line l.
  [[nodiscard]] std::pair<std::size_t, std::size_t> endpoints(std::size_t l) const { return endpoints_[l]; }

  [[nodiscard]] std::span<const Incidence> incident(std::size_t bus) const { return adjacency_[bus]; }
  [[nodiscard]] std::size_t degree(std::size_t bus) const { return adjacency_[bus].size(); }

  /// A connected graph is radial iff it has exactly |V| - 1 lines.
  [[nodiscard]] bool is_radial() const noexcept { return lines_.size() + 1 == buses_.size(); }

 private:
  std::size_t lookup(const std::string& bus, const std::string& line) const {
    const auto it = bus_index_.find(bus);
    if (it == bus_index_.end()) {
      throw TopologyError("line '" + line + "' references unknown bus '" + bus + "'");
    }
    return it->second;
  }

  void require_connected() const {
    std::vector<char> seen(buses_.size(), 0);
    std::vector<std::size_t> stack{source_};
    seen[source_] = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (const auto& inc : adjacency_[u]) {
        if (!seen[inc.neighbor]) {
          seen[inc.neighbor] = 1;
          stack.push_back(inc.neighbor);
        }
      }
    }
    std::string missing;
    std::size_t count = 0;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
      if (seen[i]) continue;
      if (count < 20) missing += (count ? ", " : "") + buses_[i].id;
      ++count;
    }
    if (count > 0) {
      throw TopologyError("disconnected graph: " + std::to_string(count) +
                          " bus(es) unreachable from source: " + missing + (count > 20 ? ", ..." : ""));
    }
  }

  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::size_t source_ = 0;
  std::unordered_map<std::string, std::size_t> bus_index_;
  std::vector<std::pair<std::size_t, std::size_t>> endpoints_;
  std::vector<std::vector<Incidence>> adjacency_;
};

enum class DistanceMetric {
  kilometers,  ///< sum of line lengths
  edge_count,  ///< topological hop count
};

/// Shortest-path tree rooted at the source.
struct ShortestPaths {
  std::vector<double> distance;
  std::vector<std::optional<std::size_t>> parent_bus;
  std::vector<std::optional<std::size_t>> parent_line;
  std::vector<std::size_t> order;  ///< buses sorted by (distance, id); parents precede children
};

/**
 * Dijkstra from the source. Among equal-length alternatives the predecessor
 * with the lexicographically smaller bus id wins, so trees are reproducible.
 */
inline ShortestPaths shortest_paths(const NetworkTopology& topo,
                                    DistanceMetric metric = DistanceMetric::kilometers) {
  const std::size_t n = topo.bus_count();
  constexpr double inf = std::numeric_limits<double>::infinity();
  ShortestPaths sp{std::vector<double>(n, inf), std::vector<std::optional<std::size_t>>(n),
                   std::vector<std::optional<std::size_t>>(n), {}};
  const auto& buses = topo.buses();
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  std::vector<char> done(n, 0);
  sp.distance[topo.source()] = 0.0;
  queue.emplace(0.0, topo.source());
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (done[u]) continue;
    done[u] = 1;
    for (const auto& inc : topo.incident(u)) {
      const double w = metric == DistanceMetric::kilometers ? topo.lines()[inc.line].length_km : 1.0;
      const double candidate = d + w;
      const std::size_t v = inc.neighbor;
      if (done[v]) continue;
      const bool better = candidate < sp.distance[v];
      const bool tie_wins = candidate == sp.distance[v] && sp.parent_bus[v] &&
                            buses[u].id < buses[*sp.parent_bus[v]].id;
      if (better || tie_wins) {
        sp.distance[v] = candidate;
        sp.parent_bus[v] = u;
        sp.parent_line[v] = inc.line;
        if (better) queue.emplace(candidate, v);
      }
    }
  }
  std::string unreachable;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(sp.distance[i])) unreachable += (unreachable.empty() ? "" : ", ") + buses[i].id;
  }
  if (!unreachable.empty()) throw TopologyError("disconnected graph, unreachable buses: " + unreachable);

  sp.order.resize(n);
  std::iota(sp.order.begin(), sp.order.end(), std::size_t{0});
  std::sort(sp.order.begin(), sp.order.end(), [&](std::size_t a, std::size_t b) {
    if (sp.distance[a] != sp.distance[b]) return sp.distance[a] < sp.distance[b];
    return buses[a].id < buses[b].id;
  });
  return sp;
}

/// Shortest-path distance (km, or hops) from the source for every bus, by bus index.
inline std::vector<double> compute_distances(const NetworkTopology& topo,
                                             DistanceMetric metric = DistanceMetric::kilometers) {
  return shortest_paths(topo, metric).distance;
}

/// Endpoint of line l nearer the source; ties go to the smaller bus id.
inline std::size_t upstream_endpoint(const NetworkTopology& topo, std::span<const double> distance,
                                     std::size_t l) {
  const auto [u, v] = topo.endpoints(l);
  if (distance[u] != distance[v]) return distance[u] < distance[v] ? u : v;
  return topo.buses()[u].id < topo.buses()[v].id ? u : v;
}

inline std::size_t downstream_endpoint(const NetworkTopology& topo, std::span<const double> distance,
                                       std::size_t l) {
  const auto [u, v] = topo.endpoints(l);
  return upstream_endpoint(topo, distance, l) == u ? v : u;
}

struct ZoneAssignment {
  int zone_count = 1;
  std::vector<int> bus_zone;   ///< 1-based
  std::vector<int> line_zone;  ///< 1-based, zone of the upstream endpoint
  std::vector<double> bus_distance_km;
  /// Lower edges of zones 2..k: zone j covers [thresholds[j-2], thresholds[j-1]).
  std::vector<double> thresholds;
  std::vector<std::string> warnings;
};

namespace detail {

/// Type-7 (linear interpolation) quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/**
 * Equal-frequency binning of bus distances into `zone_count` zones with
 * half-open bins [q_{k-1}, q_k). Bins that would be empty are merged into their
 * neighbour (with a warning), so every populated zone index is contiguous from
 * 1. The source always lands in zone 1.
 */
inline ZoneAssignment assign_zones(const NetworkTopology& topo, std::span<const double> distance,
                                   int zone_count) {
  if (zone_count < 1) throw std::invalid_argument("zone count must be >= 1");
  if (distance.size() != topo.bus_count()) throw std::invalid_argument("distance vector size mismatch");
  ZoneAssignment za;
  za.zone_count = zone_count;
  za.bus_distance_km.assign(distance.begin(), distance.end());

  std::vector<double> sorted(distance.begin(), distance.end());
  std::sort(sorted.begin(), sorted.end());
  const double lowest = sorted.front();

  std::vector<double> candidates;
  for (int k = 1; k < zone_count; ++k) {
    candidates.push_back(detail::quantile_sorted(sorted, static_cast<double>(k) / zone_count));
  }
  // Keep a threshold only if both the bin it closes and the remainder above it are populated.
  double last = lowest;
  for (double t : candidates) {
    if (!(t > last)) continue;
    const auto closes = std::lower_bound(sorted.begin(), sorted.end(), t) - std::lower_bound(sorted.begin(), sorted.end(), last);
    const bool above = sorted.back() >= t;
    if (closes > 0 && above) {
      za.thresholds.push_back(t);
      last = t;
    }
  }
  const auto effective = static_cast<int>(za.thresholds.size()) + 1;
  if (effective < zone_count) {
    za.warnings.push_back("degenerate zone binning: requested " + std::to_string(zone_count) +
                          " zones but distances support only " + std::to_string(effective) +
                          "; empty bins merged");
  }

  za.bus_zone.resize(topo.bus_count());
  for (std::size_t i = 0; i < topo.bus_count(); ++i) {
    const auto above = std::upper_bound(za.thresholds.begin(), za.thresholds.end(), distance[i]) - za.thresholds.begin();
    za.bus_zone[i] = 1 + static_cast<int>(above);
  }
  za.line_zone.resize(topo.line_count());
  for (std::size_t l = 0; l < topo.line_count(); ++l) {
    za.line_zone[l] = za.bus_zone[upstream_endpoint(topo, distance, l)];
  }
  return za;
}

/// Convenience overload: distances and zones in one call.
inline ZoneAssignment assign_zones(const NetworkTopology& topo, int zone_count,
                                   DistanceMetric metric = DistanceMetric::kilometers) {
  const auto d = compute_distances(topo, metric);
  return assign_zones(topo, d, zone_count);
}

/**
 * @brief Branch points of the feeder and how phase decisions propagate.
 *
 * The ramification set holds every bus of degree > 2 plus the source, listed in
 * topological order (parents first). Each ramification bus points at the
 * closest ramification bus on its shortest path to the source; every other bus
 * points at the closest ramification bus on its own path to the source.
 */
struct RamificationHierarchy {
  std::vector<std::size_t> ramification_set;
  std::vector<char> is_ramification;
  /// For ramification buses: parent ramification bus (nullopt for the source).
  /// For other buses: nearest upstream ramification bus.
  std::vector<std::optional<std::size_t>> upstream_ramification;
  ShortestPaths paths;

  [[nodiscard]] std::optional<std::size_t> parent(std::size_t r) const { return upstream_ramification[r]; }
  [[nodiscard]] std::size_t nearest_ramification(std::size_t v) const { return *upstream_ramification[v]; }
};

inline RamificationHierarchy build_hierarchy(const NetworkTopology& topo,
                                             DistanceMetric metric = DistanceMetric::kilometers) {
  RamificationHierarchy h;
  h.paths = shortest_paths(topo, metric);
  const std::size_t n = topo.bus_count();
  h.is_ramification.assign(n, 0);
  h.upstream_ramification.assign(n, std::nullopt);
  for (std::size_t i = 0; i < n; ++i) {
    if (topo.degree(i) > 2 || i == topo.source()) h.is_ramification[i] = 1;
  }
  for (std::size_t v : h.paths.order) {
    if (v == topo.source()) continue;
    const std::size_t p = *h.paths.parent_bus[v];
    h.upstream_ramification[v] = h.is_ramification[p] ? p : *h.upstream_ramification[p];
  }
  for (std::size_t v : h.paths.order) {
    if (h.is_ramification[v]) h.ramification_set.push_back(v);
  }
  return h;
}

}  // namespace netgen
