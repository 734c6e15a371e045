#pragma once

// Self-generated ground-truth datasets for parameter-recovery tests. Values are
// placed at midpoint quantiles of the generating distribution (stratified), so
// empirical moments sit on the truth and recovery checks measure the fitter,
// not sampling noise.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/negative_binomial.hpp>

#include "netgen/line_model.hpp"
#include "netgen/load_model.hpp"
#include "netgen/phase_model.hpp"
#include "netgen/reliability_model.hpp"
#include "netgen/rng.hpp"
#include "test_support.hpp"

namespace netgen::testing {

inline const std::vector<double> kTablePhaseShares{0.142, 0.137, 0.131, 0.187, 0.143, 0.223, 0.038};

inline std::vector<LoadObservation> make_load_dataset(const LoadParams& truth, int buses,
                                                      const std::vector<double>& config_shares, Rng& rng) {
  const auto counts = proportional_counts(config_shares, buses);
  std::vector<LoadObservation> data;
  for (std::size_t k = 0; k < kPhaseConfigCount; ++k) {
    const PhaseConfig c = kAllPhaseConfigs[k];
    const auto n = static_cast<std::size_t>(counts[k]);
    std::array<std::vector<double>, 3> values;
    const auto mu = mean_vector(truth, c);
    for (int j = 0; j < 3; ++j) {
      if (!has_phase(c, j)) continue;
      values[j] = stratified(
          n, [&](double u) { return truncnormal_quantile(mu[j], truth.sigma_p, 0.0, u); }, rng);
    }
    for (std::size_t i = 0; i < n; ++i) {
      LoadObservation o;
      o.config = c;
      for (int j = 0; j < 3; ++j) o.p_kw[j] = has_phase(c, j) ? values[j][i] : 0.0;
      data.push_back(o);
    }
  }
  return data;
}

struct ZonedDurations {
  std::vector<double> durations;
  std::vector<int> zones;
};

/// `per_zone` buses per zone; round(p * n) positive Weibull durations, the rest zero.
inline ZonedDurations make_caidi_dataset(const CaidiParams& truth, int per_zone, Rng& rng) {
  ZonedDurations out;
  for (std::size_t z = 0; z < truth.p.size(); ++z) {
    const auto n_pos = static_cast<std::size_t>(std::lround(truth.p[z] * per_zone));
    const auto pos = stratified(
        n_pos, [&](double u) { return truth.scale[z] * std::pow(-std::log1p(-u), 1.0 / truth.shape[z]); }, rng);
    out.durations.insert(out.durations.end(), pos.begin(), pos.end());
    out.durations.insert(out.durations.end(), static_cast<std::size_t>(per_zone) - n_pos, 0.0);
    out.zones.insert(out.zones.end(), static_cast<std::size_t>(per_zone), static_cast<int>(z + 1));
  }
  return out;
}

struct ZonedCounts {
  std::vector<std::int64_t> counts;
  std::vector<int> zones;
};

/// Counts allocated in proportion to the negative binomial pmf (largest remainder).
inline std::vector<std::int64_t> negbinomial_counts(double mean, double dispersion, int n) {
  const boost::math::negative_binomial_distribution<> nb(dispersion, dispersion / (dispersion + mean));
  std::vector<double> pmf;
  double cdf = 0.0;
  for (std::int64_t k = 0; cdf < 1.0 - 1e-12 && k < 100000; ++k) {
    pmf.push_back(boost::math::pdf(nb, static_cast<double>(k)));
    cdf += pmf.back();
  }
  const auto per_value = proportional_counts(pmf, n);
  std::vector<std::int64_t> out;
  for (std::size_t k = 0; k < per_value.size(); ++k) out.insert(out.end(), per_value[k], static_cast<std::int64_t>(k));
  return out;
}

inline ZonedCounts make_caifi_dataset(const CaifiParams& truth, int per_zone) {
  ZonedCounts out;
  for (std::size_t z = 0; z < truth.mean.size(); ++z) {
    const auto c = negbinomial_counts(truth.mean[z], truth.dispersion, per_zone);
    out.counts.insert(out.counts.end(), c.begin(), c.end());
    out.zones.insert(out.zones.end(), c.size(), static_cast<int>(z + 1));
  }
  return out;
}

/// Poisson counts allocated in proportion to the pmf.
inline std::vector<std::int64_t> poisson_counts(double mean, int n) {
  std::vector<double> pmf;
  double term = std::exp(-mean);
  double cdf = 0.0;
  for (int k = 0; cdf < 1.0 - 1e-12; ++k) {
    pmf.push_back(term);
    cdf += term;
    term *= mean / (k + 1);
  }
  const auto per_value = proportional_counts(pmf, n);
  std::vector<std::int64_t> out;
  for (std::size_t k = 0; k < per_value.size(); ++k) out.insert(out.end(), per_value[k], static_cast<std::int64_t>(k));
  return out;
}

/// `n` values from a Gamma mixture: component counts by largest remainder, each stratified.
inline std::vector<double> gamma_mixture_values(const stats::GammaMixture& m, int n, Rng& rng) {
  const auto counts = proportional_counts(m.weights, n);
  std::vector<double> out;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const boost::math::gamma_distribution<> g(m.components[k].shape, 1.0 / m.components[k].rate);
    const auto v = stratified(static_cast<std::size_t>(counts[k]), [&](double u) { return boost::math::quantile(g, u); }, rng);
    out.insert(out.end(), v.begin(), v.end());
  }
  for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[rng.below(i)]);
  return out;
}

struct ZonedValues {
  std::vector<double> values;
  std::vector<int> zones;
};

/// `per_zone` values drawn from each zone's mixture.
inline ZonedValues make_mixture_dataset(const MixtureDraw& truth, int per_zone, Rng& rng) {
  ZonedValues out;
  for (int z = 1; z <= static_cast<int>(truth.weights.size()); ++z) {
    const auto v = gamma_mixture_values(truth.mixture(z), per_zone, rng);
    out.values.insert(out.values.end(), v.begin(), v.end());
    out.zones.insert(out.zones.end(), v.size(), z);
  }
  return out;
}

}  // namespace netgen::testing
