#pragma once

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "netgen/inference.hpp"
#include "netgen/model.hpp"
#include "netgen/powerflow.hpp"
#include "netgen/sample.hpp"

/**
 * @file validate.hpp
 * @brief Sample screening: phase consistency, internal completeness, power
 * flow, voltage limits and phase-frequency comparison with the posterior.
 */

namespace netgen {

struct SampleCheck {
  std::uint64_t sample_id = 0;
  std::vector<std::string> inconsistent_lines;  ///< child phase set not a subset of the parent's
  std::vector<std::string> problems;            ///< demand or line phases disagreeing with the allocation
  bool converged = false;
  int iterations = 0;
  bool within_limits = false;
  double min_pu = 0.0;
  double max_pu = 0.0;
  std::vector<std::string> offending_buses;

  [[nodiscard]] bool consistent() const { return inconsistent_lines.empty() && problems.empty(); }
};

/// Power-flow input of a sample; demand is multiplied by `load_scale`.
inline FeederSnapshot snapshot_of(const SyntheticSample& s, double load_scale = 1.0) {
  FeederSnapshot snap;
  snap.load_kva.reserve(s.demand.size());
  for (const auto& d : s.demand) {
    PhaseVector v{};
    for (int j = 0; j < 3; ++j) v[j] = load_scale * Complex{d.p_kw[j], d.q_kvar[j]};
    snap.load_kva.push_back(v);
  }
  snap.line_z_ohm_per_km.reserve(s.lines.size());
  for (const auto& l : s.lines) snap.line_z_ohm_per_km.push_back(l.z_abc);
  return snap;
}

/// Consistency and completeness checks that need no power flow.
inline void check_structure(const NetworkTopology& topo, std::span<const double> distance, const SyntheticSample& s,
                            SampleCheck& out) {
  for (std::size_t l : consistency_violations(topo, distance, s.phases.bus_phase)) {
    const auto up = upstream_endpoint(topo, distance, l);
    const auto down = downstream_endpoint(topo, distance, l);
    out.inconsistent_lines.push_back(topo.lines()[l].id + " (" + topo.buses()[up].id + ":" +
                                     std::string(to_string(s.phases.bus_phase[up])) + " -> " + topo.buses()[down].id +
                                     ":" + std::string(to_string(s.phases.bus_phase[down])) + ")");
  }
  for (std::size_t b = 0; b < topo.bus_count(); ++b) {
    for (int j = 0; j < 3; ++j) {
      const bool active = has_phase(s.phases.bus_phase[b], j);
      if (!active && (s.demand[b].p_kw[j] != 0.0 || s.demand[b].q_kvar[j] != 0.0)) {
        out.problems.push_back("bus " + topo.buses()[b].id + " has demand on a phase it does not have");
        break;
      }
    }
  }
  for (std::size_t l = 0; l < topo.line_count(); ++l) {
    const auto down = downstream_endpoint(topo, distance, l);
    if (s.line_phase[l] != s.phases.bus_phase[down]) {
      out.problems.push_back("line " + topo.lines()[l].id + " phase " + std::string(to_string(s.line_phase[l])) +
                             " differs from downstream bus " + topo.buses()[down].id);
      continue;
    }
    const auto on = active_phases(s.lines[l].z_abc);
    for (int j = 0; j < 3; ++j) {
      if (on[j] != has_phase(s.line_phase[l], j)) {
        out.problems.push_back("line " + topo.lines()[l].id + " impedance phases differ from its phase configuration");
        break;
      }
    }
  }
}

/// Full screening of one sample; the power-flow result is handed back through `result` when given.
inline SampleCheck check_sample(const NetworkTopology& topo, std::span<const double> distance, const SyntheticSample& s,
                                const RunConfig& config, PowerFlowResult* result = nullptr) {
  SampleCheck out;
  out.sample_id = s.sample_id;
  check_structure(topo, distance, s, out);
  auto res = solve(topo, snapshot_of(s, config.validation.load_scale), config.powerflow);
  out.converged = res.converged;
  out.iterations = res.iterations;
  if (res.converged) {
    const auto lim = check_limits(res, config.validation.vmin, config.validation.vmax);
    out.within_limits = lim.pass;
    out.min_pu = lim.min_pu;
    out.max_pu = lim.max_pu;
    for (std::size_t b : lim.offending_buses) out.offending_buses.push_back(topo.buses()[b].id);
  }
  if (result) *result = std::move(res);
  return out;
}

struct PhaseFrequencyRow {
  PhaseConfig config = PhaseConfig::A;
  double training = 0.0;   ///< observed share on the reference feeder
  double posterior = 0.0;  ///< posterior mean of the bus-weighted base probability
  inference::Hdi hdi;
  double generated = 0.0;  ///< share over all buses of all validated samples
};

/**
 * Posterior base probability per configuration, pooled over zones with weights
 * equal to the number of observed buses per zone.
 */
inline std::vector<PhaseFrequencyRow> phase_frequency_table(const FittedModel& model,
                                                            std::span<const SyntheticSample> samples) {
  const auto& post = model.phase;
  std::vector<double> zone_weight(static_cast<std::size_t>(post.zone_count), 0.0);
  PhaseProbabilities training{};
  double total = 0.0;
  for (int z = 0; z < post.zone_count; ++z) {
    for (std::size_t k = 0; k < kPhaseConfigCount; ++k) {
      zone_weight[z] += post.counts[z][k];
      training[k] += post.counts[z][k];
    }
    total += zone_weight[z];
  }
  if (total <= 0.0) {
    std::fill(zone_weight.begin(), zone_weight.end(), 1.0);
    total = post.zone_count;
  }
  PhaseProbabilities generated{};
  double n_gen = 0.0;
  for (const auto& s : samples) {
    for (auto p : s.phases.bus_phase) generated[index_of(p)] += 1.0;
    n_gen += static_cast<double>(s.phases.bus_phase.size());
  }
  std::vector<PhaseFrequencyRow> rows;
  const std::size_t S = post.ensemble.size();
  for (PhaseConfig c : kAllPhaseConfigs) {
    const auto k = index_of(c);
    std::vector<double> draws(S, 0.0);
    for (int z = 1; z <= post.zone_count; ++z) {
      const auto col = post.ensemble.column(PhasePosterior::base_name(z) + "[" + std::to_string(k) + "]");
      for (std::size_t i = 0; i < S; ++i) draws[i] += zone_weight[z - 1] / total * col[i];
    }
    PhaseFrequencyRow row;
    row.config = c;
    const double n_train = std::accumulate(training.begin(), training.end(), 0.0);
    row.training = n_train > 0.0 ? training[k] / n_train : 0.0;
    row.posterior = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(S);
    row.hdi = inference::hdi(draws, 0.94);
    row.generated = n_gen > 0.0 ? generated[k] / n_gen : 0.0;
    rows.push_back(row);
  }
  return rows;
}

struct ValidationReport {
  std::vector<SampleCheck> checks;
  VoltageStats voltage;
  bool has_voltage = false;
  std::vector<PhaseFrequencyRow> phase_frequencies;

  [[nodiscard]] std::size_t count() const { return checks.size(); }
  [[nodiscard]] double rate(bool (*pred)(const SampleCheck&)) const {
    if (checks.empty()) return 0.0;
    std::size_t n = 0;
    for (const auto& c : checks) n += pred(c) ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(checks.size());
  }
  [[nodiscard]] double consistency_rate() const { return rate([](const SampleCheck& c) { return c.consistent(); }); }
  [[nodiscard]] double convergence_rate() const { return rate([](const SampleCheck& c) { return c.converged; }); }
  [[nodiscard]] double limit_pass_rate() const { return rate([](const SampleCheck& c) { return c.within_limits; }); }
};

/// Validate samples concurrently; a model enables the phase-frequency comparison.
inline ValidationReport validate_samples(const NetworkTopology& topo, std::span<const SyntheticSample> samples,
                                         const RunConfig& config, const FittedModel* model = nullptr,
                                         unsigned threads = default_threads()) {
  config.validate();
  if (!topo.is_radial()) {
    throw NonRadialError("power-flow validation needs a radial feeder; use export-opendss for meshed networks");
  }
  const auto distance = compute_distances(topo);
  ValidationReport rep;
  rep.checks.resize(samples.size());
  std::vector<PowerFlowResult> results(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    rep.checks[i] = check_sample(topo, distance, samples[i], config, &results[i]);
  });
  std::vector<PowerFlowResult> converged;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (rep.checks[i].converged) converged.push_back(std::move(results[i]));
  }
  if (!converged.empty()) {
    rep.voltage = summarize(converged);
    rep.has_voltage = true;
  }
  if (model) rep.phase_frequencies = phase_frequency_table(*model, samples);
  return rep;
}

inline std::string format_phase_frequency_table(const std::vector<PhaseFrequencyRow>& rows) {
  std::string out = "config,training,posterior_mean,hdi94_lower,hdi94_upper,generated\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f,%.4f,%.4f\n", std::string(to_string(r.config)).c_str(), r.training,
                  r.posterior, r.hdi.lower, r.hdi.upper, r.generated);
    out += buf;
  }
  return out;
}

/// Plain-text summary. Contains no timings, so re-running on unchanged samples reproduces it exactly.
inline std::string format_report(const ValidationReport& rep) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "samples: %zu\nphase consistency: %.2f%%\nconvergence: %.2f%%\nwithin limits: %.2f%%\n",
                rep.count(), 100.0 * rep.consistency_rate(), 100.0 * rep.convergence_rate(),
                100.0 * rep.limit_pass_rate());
  out += buf;
  for (const auto& c : rep.checks) {
    for (const auto& l : c.inconsistent_lines) out += sample_file_name(c.sample_id) + ": inconsistent line " + l + "\n";
    for (const auto& p : c.problems) out += sample_file_name(c.sample_id) + ": " + p + "\n";
    if (!c.converged) {
      out += sample_file_name(c.sample_id) + ": power flow did not converge in " + std::to_string(c.iterations) +
             " iterations\n";
    } else if (!c.within_limits) {
      std::snprintf(buf, sizeof buf, "%s: voltage outside limits (min %.4f, max %.4f) at %zu bus(es)\n",
                    sample_file_name(c.sample_id).c_str(), c.min_pu, c.max_pu, c.offending_buses.size());
      out += buf;
    }
  }
  if (rep.has_voltage) out += "\nvoltage profile (p.u.)\n" + format_voltage_table(rep.voltage);
  if (!rep.phase_frequencies.empty()) out += "\nphase frequencies\n" + format_phase_frequency_table(rep.phase_frequencies);
  return out;
}

}  // namespace netgen
