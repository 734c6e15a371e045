#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "netgen/distributions.hpp"
#include "netgen/inference.hpp"
#include "netgen/rng.hpp"

/**
 * @file reliability_model.hpp
 * @brief Zone-conditioned interruption duration (hurdle Weibull) and
 * interruption frequency (negative binomial) per bus.
 */

namespace netgen {

struct BusReliability {
  double caidi_hours = 0.0;
  std::uint64_t caifi_count = 0;
};

/// Hurdle-Weibull parameters, one entry per zone (index zone - 1).
struct CaidiParams {
  std::vector<double> p;      ///< probability of a positive duration
  std::vector<double> shape;  ///< Weibull shape
  std::vector<double> scale;  ///< Weibull scale (hours)

  [[nodiscard]] double mean(int zone) const {
    const auto z = static_cast<std::size_t>(zone - 1);
    return p.at(z) * scale[z] * std::tgamma(1.0 + 1.0 / shape[z]);
  }
};

/// Negative binomial parameters: per-zone mean, global dispersion.
struct CaifiParams {
  std::vector<double> mean;
  double dispersion = 1.0;
};

inline double sample_caidi(const CaidiParams& params, int zone, Rng& rng) {
  const auto z = static_cast<std::size_t>(zone - 1);
  if (z >= params.p.size()) throw std::out_of_range("CAIDI zone " + std::to_string(zone) + " out of range");
  if (!stats::sample_bernoulli(rng, params.p[z])) return 0.0;
  return stats::sample_weibull(rng, params.shape[z], params.scale[z]);
}

inline std::uint64_t sample_caifi(const CaifiParams& params, int zone, Rng& rng) {
  const auto z = static_cast<std::size_t>(zone - 1);
  if (z >= params.mean.size()) throw std::out_of_range("CAIFI zone " + std::to_string(zone) + " out of range");
  return stats::sample_negbinomial(rng, params.mean[z], params.dispersion);
}

// ---------------------------------------------------------------------------
// Learning

struct CaidiPosterior {
  int zone_count = 0;
  inference::PosteriorEnsemble ensemble;
  std::vector<std::string> warnings;

  static std::string p_name(int z) { return "p_z" + std::to_string(z); }
  static std::string shape_name(int z) { return "alpha_z" + std::to_string(z); }
  static std::string scale_name(int z) { return "beta_z" + std::to_string(z); }

  [[nodiscard]] CaidiParams params(std::span<const double> row) const {
    CaidiParams out;
    for (int z = 1; z <= zone_count; ++z) {
      out.p.push_back(row[ensemble.column_index(p_name(z))]);
      out.shape.push_back(row[ensemble.column_index(shape_name(z))]);
      out.scale.push_back(row[ensemble.column_index(scale_name(z))]);
    }
    return out;
  }
  [[nodiscard]] CaidiParams params(std::size_t draw) const { return params(ensemble.row(draw)); }
};

struct CaifiPosterior {
  int zone_count = 0;
  inference::PosteriorEnsemble ensemble;
  std::vector<std::string> warnings;

  static std::string mean_name(int z) { return "mu_f_z" + std::to_string(z); }
  static constexpr const char* dispersion_name = "alpha_dispersion";

  [[nodiscard]] CaifiParams params(std::span<const double> row) const {
    CaifiParams out;
    for (int z = 1; z <= zone_count; ++z) out.mean.push_back(row[ensemble.column_index(mean_name(z))]);
    out.dispersion = row[ensemble.column_index(dispersion_name)];
    return out;
  }
  [[nodiscard]] CaifiParams params(std::size_t draw) const { return params(ensemble.row(draw)); }
};

namespace detail {

inline void check_zones(std::size_t n_values, std::span<const int> zones, int zone_count) {
  if (zone_count < 1) throw std::invalid_argument("zone count must be >= 1");
  if (n_values != zones.size()) throw std::invalid_argument("values and zones differ in length");
  for (int z : zones) {
    if (z < 1 || z > zone_count) throw std::invalid_argument("observation zone " + std::to_string(z) + " out of range");
  }
}

}  // namespace detail

/**
 * Fit p_z ~ Beta(1,1), alpha_z, beta_z ~ HalfNormal(1) to one duration per bus.
 * The hurdle indicator is determined by the data (zero or positive), so the
 * likelihood is log(1 - p) per zero and log p + Weibull per positive value.
 */
inline CaidiPosterior fit_caidi(std::span<const double> durations, std::span<const int> zones, int zone_count,
                                const inference::FitConfig& config) {
  using inference::Support;
  detail::check_zones(durations.size(), zones, zone_count);
  const auto nz = static_cast<std::size_t>(zone_count);
  std::vector<double> zeros(nz, 0.0);
  std::vector<std::vector<double>> log_positive(nz);
  for (std::size_t i = 0; i < durations.size(); ++i) {
    const double d = durations[i];
    if (!std::isfinite(d) || d < 0.0) {
      throw std::invalid_argument("CAIDI observation " + std::to_string(i) + " is negative or not finite");
    }
    const auto z = static_cast<std::size_t>(zones[i] - 1);
    if (d == 0.0) {
      zeros[z] += 1.0;
    } else {
      log_positive[z].push_back(std::log(d));
    }
  }

  CaidiPosterior post;
  post.zone_count = zone_count;
  inference::ParamSpace space;
  std::vector<inference::ParamRef> p_ref, a_ref, b_ref;
  for (int z = 1; z <= zone_count; ++z) {
    p_ref.push_back(space.add(CaidiPosterior::p_name(z), Support::unit_interval));
    const std::string block = "weibull_z" + std::to_string(z);
    a_ref.push_back(space.add(CaidiPosterior::shape_name(z), Support::positive, 1, block));
    b_ref.push_back(space.add(CaidiPosterior::scale_name(z), Support::positive, 1, block));
    const auto zi = static_cast<std::size_t>(z - 1);
    if (zeros[zi] == 0.0 && log_positive[zi].empty()) {
      post.warnings.push_back("CAIDI zone " + std::to_string(z) + " has no observations; prior used");
    } else if (log_positive[zi].empty()) {
      post.warnings.push_back("CAIDI zone " + std::to_string(z) + " has no positive durations; Weibull parameters from the prior");
    }
  }
  std::vector<double> sum_log(nz, 0.0);
  for (std::size_t z = 0; z < nz; ++z) {
    for (double v : log_positive[z]) sum_log[z] += v;
  }

  const inference::LogDensity log_post = [&](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t z = 0; z < nz; ++z) {
      const double p = p_ref[z](x);
      const double a = a_ref[z](x);
      const double b = b_ref[z](x);
      s += stats::logpdf_beta(p, 1.0, 1.0) + stats::logpdf_halfnormal(a, 1.0) + stats::logpdf_halfnormal(b, 1.0);
      const auto n_pos = static_cast<double>(log_positive[z].size());
      s += zeros[z] * std::log1p(-p) + n_pos * std::log(p);
      if (n_pos == 0.0) continue;
      const double log_b = std::log(b);
      double power_sum = 0.0;
      for (double ld : log_positive[z]) power_sum += std::exp(a * (ld - log_b));
      s += n_pos * (std::log(a) - a * log_b) + (a - 1.0) * sum_log[z] - power_sum;
    }
    return s;
  };

  std::vector<double> init(space.dim());
  for (std::size_t z = 0; z < nz; ++z) {
    const double n_pos = static_cast<double>(log_positive[z].size());
    const double total = zeros[z] + n_pos;
    init[p_ref[z].offset] = total > 0.0 ? std::clamp(n_pos / total, 0.01, 0.99) : 0.5;
    init[a_ref[z].offset] = 1.0;
    init[b_ref[z].offset] = n_pos > 0.0 ? std::exp(sum_log[z] / n_pos) : 1.0;
  }
  post.ensemble = inference::fit(log_post, space, init, config);
  return post;
}

/// Fit mu_f_z ~ HalfNormal(1) and a global alpha_dispersion ~ HalfNormal(1) to one count per bus.
inline CaifiPosterior fit_caifi(std::span<const std::int64_t> counts, std::span<const int> zones, int zone_count,
                                const inference::FitConfig& config) {
  using inference::Support;
  detail::check_zones(counts.size(), zones, zone_count);
  const auto nz = static_cast<std::size_t>(zone_count);
  // per-zone histograms keep the likelihood cost independent of the number of buses
  std::vector<std::map<std::uint64_t, double>> hist(nz);
  std::vector<double> n(nz, 0.0), sum(nz, 0.0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0) throw std::invalid_argument("CAIFI observation " + std::to_string(i) + " is negative");
    const auto z = static_cast<std::size_t>(zones[i] - 1);
    hist[z][static_cast<std::uint64_t>(counts[i])] += 1.0;
    n[z] += 1.0;
    sum[z] += static_cast<double>(counts[i]);
  }
  std::vector<std::vector<std::pair<std::uint64_t, double>>> flat(nz);
  for (std::size_t z = 0; z < nz; ++z) flat[z].assign(hist[z].begin(), hist[z].end());

  CaifiPosterior post;
  post.zone_count = zone_count;
  inference::ParamSpace space;
  std::vector<inference::ParamRef> mu_ref;
  for (int z = 1; z <= zone_count; ++z) {
    mu_ref.push_back(space.add(CaifiPosterior::mean_name(z), Support::positive));
    if (n[static_cast<std::size_t>(z - 1)] == 0.0) {
      post.warnings.push_back("CAIFI zone " + std::to_string(z) + " has no observations; prior used");
    }
  }
  const auto disp = space.add(CaifiPosterior::dispersion_name, Support::positive);

  const inference::LogDensity log_post = [&](std::span<const double> x) {
    const double alpha = disp(x);
    double s = stats::logpdf_halfnormal(alpha, 1.0);
    for (std::size_t z = 0; z < nz; ++z) {
      const double mu = mu_ref[z](x);
      s += stats::logpdf_halfnormal(mu, 1.0);
      for (const auto& [k, m] : flat[z]) s += m * stats::logpmf_negbinomial(k, mu, alpha);
    }
    return s;
  };

  std::vector<double> init(space.dim());
  for (std::size_t z = 0; z < nz; ++z) init[mu_ref[z].offset] = n[z] > 0.0 ? std::max(sum[z] / n[z], 0.01) : 0.5;
  init[disp.offset] = 1.0;
  post.ensemble = inference::fit(log_post, space, init, config);
  return post;
}

}  // namespace netgen
