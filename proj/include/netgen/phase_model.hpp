#pragma once

#include <array>
#include <bitset>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "netgen/distributions.hpp"
#include "netgen/inference.hpp"
#include "netgen/rng.hpp"
#include "netgen/topology.hpp"

/**
 * @file phase_model.hpp
 * @brief Zone-conditioned phase-configuration probabilities and the
 * topologically constrained allocation of phases to buses.
 */

namespace netgen {

/// Phase configurations in their fixed index order.
enum class PhaseConfig : std::uint8_t { A = 0, B, C, AB, BC, CA, ABC };

inline constexpr std::size_t kPhaseConfigCount = 7;
inline constexpr std::array<PhaseConfig, kPhaseConfigCount> kAllPhaseConfigs{
    PhaseConfig::A, PhaseConfig::B, PhaseConfig::C, PhaseConfig::AB, PhaseConfig::BC, PhaseConfig::CA, PhaseConfig::ABC};

using PhaseProbabilities = std::array<double, kPhaseConfigCount>;
using PhaseMask = std::bitset<kPhaseConfigCount>;

inline constexpr std::size_t index_of(PhaseConfig p) { return static_cast<std::size_t>(p); }

/// Bit set over conductors: a = 1, b = 2, c = 4.
inline constexpr std::uint8_t phase_bits(PhaseConfig p) {
  constexpr std::array<std::uint8_t, kPhaseConfigCount> bits{1, 2, 4, 3, 6, 5, 7};
  return bits[index_of(p)];
}

inline constexpr bool has_phase(PhaseConfig p, int phase) { return (phase_bits(p) >> phase) & 1U; }

inline constexpr int phase_count(PhaseConfig p) {
  const auto b = phase_bits(p);
  return (b & 1) + ((b >> 1) & 1) + ((b >> 2) & 1);
}

inline constexpr bool is_subset(PhaseConfig child, PhaseConfig parent) {
  return (phase_bits(child) & ~phase_bits(parent)) == 0;
}

inline std::string_view to_string(PhaseConfig p) {
  constexpr std::array<std::string_view, kPhaseConfigCount> names{"A", "B", "C", "AB", "BC", "CA", "ABC"};
  return names[index_of(p)];
}

/// Accepts any letter order ("AC" and "CA" are the same configuration).
inline PhaseConfig parse_phase_config(std::string_view text) {
  std::uint8_t bits = 0;
  for (char ch : text) {
    switch (ch) {
      case 'A': case 'a': bits |= 1; break;
      case 'B': case 'b': bits |= 2; break;
      case 'C': case 'c': bits |= 4; break;
      default: throw std::invalid_argument("invalid phase configuration '" + std::string(text) + "'");
    }
  }
  for (PhaseConfig p : kAllPhaseConfigs) {
    if (phase_bits(p) == bits) return p;
  }
  throw std::invalid_argument("invalid phase configuration '" + std::string(text) + "'");
}

/// Configurations allowed downstream of `parent`: every nonempty subset of its phases.
inline std::vector<PhaseConfig> transition(PhaseConfig parent) {
  std::vector<PhaseConfig> out;
  for (PhaseConfig p : kAllPhaseConfigs) {
    if (is_subset(p, parent)) out.push_back(p);
  }
  return out;
}

struct ConstrainedProbabilities {
  PhaseProbabilities probabilities{};
  bool fallback = false;  ///< allowed mass was zero; uniform over the allowed set was used
};

/**
 * Mask `base` to the configurations allowed under `parent` (minus any
 * prohibited ones) and renormalize.
 */
inline ConstrainedProbabilities constrain(const PhaseProbabilities& base, PhaseConfig parent,
                                          const PhaseMask& prohibited = {}) {
  ConstrainedProbabilities out;
  PhaseMask allowed;
  for (PhaseConfig p : kAllPhaseConfigs) {
    if (is_subset(p, parent) && !prohibited[index_of(p)]) allowed.set(index_of(p));
  }
  if (allowed.none()) {
    // every allowed configuration is prohibited: ignore the prohibition
    for (PhaseConfig p : kAllPhaseConfigs) {
      if (is_subset(p, parent)) allowed.set(index_of(p));
    }
    out.fallback = true;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < kPhaseConfigCount; ++k) {
    if (allowed[k]) total += base[k];
  }
  if (!(total > 0.0) || out.fallback) {
    out.fallback = true;
    for (std::size_t k = 0; k < kPhaseConfigCount; ++k) {
      out.probabilities[k] = allowed[k] ? 1.0 / static_cast<double>(allowed.count()) : 0.0;
    }
    return out;
  }
  for (std::size_t k = 0; k < kPhaseConfigCount; ++k) out.probabilities[k] = allowed[k] ? base[k] / total : 0.0;
  return out;
}

struct AllocationOptions {
  PhaseConfig source_phase = PhaseConfig::ABC;
  PhaseMask prohibited;  ///< configurations never sampled at ramification buses
};

struct PhaseAllocation {
  std::vector<PhaseConfig> bus_phase;
  std::vector<std::string> warnings;
};

/**
 * Assign phases: the source gets `source_phase`, ramification buses draw from
 * their zone's base probabilities constrained by their parent's phase (in
 * topological order), every other bus copies its nearest upstream
 * ramification bus. `base` holds one probability vector per zone (1-based
 * `bus_zone` indexes into it).
 */
inline PhaseAllocation allocate(const NetworkTopology& topo, const RamificationHierarchy& hierarchy,
                                std::span<const int> bus_zone, std::span<const PhaseProbabilities> base, Rng& rng,
                                const AllocationOptions& options = {}) {
  if (bus_zone.size() != topo.bus_count()) throw std::invalid_argument("zone vector size mismatch");
  PhaseAllocation out;
  out.bus_phase.assign(topo.bus_count(), options.source_phase);
  for (std::size_t r : hierarchy.ramification_set) {
    if (r == topo.source()) continue;
    const PhaseConfig parent = out.bus_phase[*hierarchy.parent(r)];
    const auto zone = static_cast<std::size_t>(bus_zone[r]);
    if (zone < 1 || zone > base.size()) {
      throw std::out_of_range("bus '" + topo.buses()[r].id + "' is in zone " + std::to_string(zone) +
                              " but only " + std::to_string(base.size()) + " zones have probabilities");
    }
    const auto c = constrain(base[zone - 1], parent, options.prohibited);
    if (c.fallback) {
      out.warnings.push_back("phase fallback at bus '" + topo.buses()[r].id + "': no allowed probability mass");
    }
    out.bus_phase[r] = kAllPhaseConfigs[stats::sample_categorical(rng, c.probabilities)];
  }
  for (std::size_t v = 0; v < topo.bus_count(); ++v) {
    if (!hierarchy.is_ramification[v]) out.bus_phase[v] = out.bus_phase[hierarchy.nearest_ramification(v)];
  }
  return out;
}

/// Lines whose downstream bus carries a phase its upstream bus lacks.
inline std::vector<std::size_t> consistency_violations(const NetworkTopology& topo, std::span<const double> distance,
                                                       std::span<const PhaseConfig> bus_phase) {
  std::vector<std::size_t> bad;
  for (std::size_t l = 0; l < topo.line_count(); ++l) {
    const auto up = upstream_endpoint(topo, distance, l);
    const auto down = downstream_endpoint(topo, distance, l);
    if (!is_subset(bus_phase[down], bus_phase[up])) bad.push_back(l);
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Learning

/// Per-zone counts of observed configurations.
inline std::vector<PhaseProbabilities> count_phases(std::span<const std::optional<PhaseConfig>> observed,
                                                    std::span<const int> bus_zone, int zone_count) {
  if (observed.size() != bus_zone.size()) throw std::invalid_argument("phase and zone vectors differ in size");
  std::vector<PhaseProbabilities> counts(static_cast<std::size_t>(zone_count), PhaseProbabilities{});
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i]) counts.at(static_cast<std::size_t>(bus_zone[i] - 1))[index_of(*observed[i])] += 1.0;
  }
  return counts;
}

/// Dirichlet-multinomial log marginal of per-category counts (multinomial coefficient dropped).
inline double log_dirichlet_multinomial(std::span<const double> counts, std::span<const double> alpha) {
  double sum_a = 0.0;
  double sum_n = 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    sum_a += alpha[k];
    sum_n += counts[k];
    if (counts[k] > 0.0) s += stats::log_gamma(alpha[k] + counts[k]) - stats::log_gamma(alpha[k]);
  }
  return s + stats::log_gamma(sum_a) - stats::log_gamma(sum_a + sum_n);
}

/**
 * Posterior over the zone concentration matrix A (Z x 7) together with one
 * draw of each zone's base probabilities c_z ~ Dirichlet(A_z + n_z) per row.
 */
struct PhasePosterior {
  int zone_count = 0;
  inference::PosteriorEnsemble ensemble;
  std::vector<PhaseProbabilities> counts;

  static std::string concentration_name(int zone) { return "A_z" + std::to_string(zone); }
  static std::string base_name(int zone) { return "c_z" + std::to_string(zone); }

  /// Base probabilities of `zone` (1-based) in posterior row `draw`.
  [[nodiscard]] PhaseProbabilities base(std::size_t draw, int zone) const {
    const auto first = ensemble.column_index(base_name(zone) + "[0]");
    const auto row = ensemble.row(draw);
    PhaseProbabilities p{};
    for (std::size_t k = 0; k < kPhaseConfigCount; ++k) p[k] = row[first + k];
    return p;
  }

  [[nodiscard]] std::vector<PhaseProbabilities> base_all(std::size_t draw) const {
    std::vector<PhaseProbabilities> out;
    for (int z = 1; z <= zone_count; ++z) out.push_back(base(draw, z));
    return out;
  }

  /// Posterior mean of the base probabilities of `zone`.
  [[nodiscard]] PhaseProbabilities mean_base(int zone) const {
    PhaseProbabilities m{};
    for (std::size_t k = 0; k < kPhaseConfigCount; ++k) {
      m[k] = ensemble.mean(base_name(zone) + "[" + std::to_string(k) + "]");
    }
    return m;
  }
};

inline PhasePosterior fit_phase_model(std::span<const std::optional<PhaseConfig>> observed,
                                      const ZoneAssignment& zones, const inference::FitConfig& config) {
  PhasePosterior post;
  post.zone_count = zones.zone_count;
  post.counts = count_phases(observed, zones.bus_zone, zones.zone_count);
  double total = 0.0;
  for (const auto& c : post.counts) {
    for (double v : c) total += v;
  }
  if (total == 0.0) throw std::invalid_argument("phase model needs at least one observed bus");

  inference::ParamSpace space;
  std::vector<inference::ParamRef> a_refs;
  for (int z = 1; z <= zones.zone_count; ++z) {
    a_refs.push_back(space.add(PhasePosterior::concentration_name(z), inference::Support::positive, kPhaseConfigCount));
  }
  const auto& counts = post.counts;
  const inference::LogDensity log_post = [&a_refs, &counts](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t z = 0; z < a_refs.size(); ++z) {
      const auto a = a_refs[z].view(x);
      for (double v : a) s += stats::logpdf_halfnormal(v, 1.0);
      s += log_dirichlet_multinomial(counts[z], a);
    }
    return s;
  };
  const std::vector<double> init(space.dim(), 1.0);
  post.ensemble = inference::fit(log_post, space, init, config);

  std::vector<std::string> names;
  for (int z = 1; z <= zones.zone_count; ++z) {
    for (std::size_t k = 0; k < kPhaseConfigCount; ++k) {
      names.push_back(PhasePosterior::base_name(z) + "[" + std::to_string(k) + "]");
    }
  }
  inference::append_derived(
      post.ensemble, names,
      [&](std::span<const double> row, Rng& rng) {
        std::vector<double> out;
        std::array<double, kPhaseConfigCount> conc{};
        for (std::size_t z = 0; z < a_refs.size(); ++z) {
          const auto a = a_refs[z].view(row);
          for (std::size_t k = 0; k < kPhaseConfigCount; ++k) conc[k] = a[k] + counts[z][k];
          const auto c = stats::sample_dirichlet(rng, conc);
          out.insert(out.end(), c.begin(), c.end());
        }
        return out;
      },
      Rng(config.seed).substream("phase-base"), config.rhat_threshold);
  return post;
}

}  // namespace netgen
