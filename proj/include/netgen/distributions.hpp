#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "netgen/rng.hpp"

/**
 * @file distributions.hpp
 * @brief Samplers and log-densities for every family the generative model uses.
 *
 * All samplers are pure functions of (Rng&, parameters). Parameters are checked
 * on entry and a ParameterError is thrown for anything outside the family's
 * domain. Log-densities return -infinity outside the support.
 */

namespace netgen::stats {

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

namespace detail {

inline void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ParameterError(std::string(what) + " must be finite and positive, got " +
                         std::to_string(value));
  }
}

inline void require_probability(double value, const char* what) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ParameterError(std::string(what) + " must lie in [0, 1], got " + std::to_string(value));
  }
}

}  // namespace detail

/// Thread-safe log-gamma (glibc's lgamma writes the global signgam); +inf on overflow instead of throwing.
inline double log_gamma(double x) {
  using policy = boost::math::policies::policy<boost::math::policies::overflow_error<boost::math::policies::ignore_error>,
                                               boost::math::policies::pole_error<boost::math::policies::ignore_error>>;
  return boost::math::lgamma(x, policy());
}

inline double log_sum_exp(std::span<const double> terms) {
  double peak = neg_inf;
  for (double t : terms) peak = std::max(peak, t);
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - peak);
  return peak + std::log(acc);
}

/// log Phi(x) for the standard normal CDF, accurate far into the lower tail.
inline double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

// ---------------------------------------------------------------------------
// Parameter records

struct GammaParams {
  double shape = 1.0;  ///< alpha
  double rate = 1.0;   ///< beta

  void validate() const {
    detail::require_positive(shape, "gamma shape");
    detail::require_positive(rate, "gamma rate");
  }
  [[nodiscard]] double mean() const { return shape / rate; }
  [[nodiscard]] double variance() const { return shape / (rate * rate); }
};

/// K-component Gamma mixture; weights on the simplex.
struct GammaMixture {
  std::vector<GammaParams> components;
  std::vector<double> weights;

  void validate() const {
    if (components.empty()) throw ParameterError("mixture needs at least one component");
    if (components.size() != weights.size()) {
      throw ParameterError("mixture weights and components differ in length");
    }
    double total = 0.0;
    for (double w : weights) {
      detail::require_probability(w, "mixture weight");
      total += w;
    }
    if (std::abs(total - 1.0) >= 1e-12) {
      throw ParameterError("mixture weights must sum to 1, got " + std::to_string(total));
    }
    for (const auto& c : components) c.validate();
  }
};

// ---------------------------------------------------------------------------
// Samplers

inline double sample_uniform(Rng& rng, double lower, double upper) {
  if (!(upper > lower)) throw ParameterError("uniform bounds must satisfy lower < upper");
  return lower + (upper - lower) * rng.uniform();
}

inline bool sample_bernoulli(Rng& rng, double p) {
  detail::require_probability(p, "bernoulli probability");
  return rng.uniform() < p;
}

/// Marsaglia-Tsang squeeze; shape < 1 boosted through Gamma(shape + 1) * U^(1/shape).
inline double sample_gamma(Rng& rng, const GammaParams& params) {
  params.validate();
  if (params.shape < 1.0) {
    const double boosted = sample_gamma(rng, {params.shape + 1.0, params.rate});
    return boosted * std::pow(rng.uniform_open(), 1.0 / params.shape);
  }
  const double d = params.shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = rng.normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v / params.rate;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v / params.rate;
  }
}

/// log of a Gamma(shape, 1) draw; stays finite for tiny shapes where the draw underflows.
inline double sample_log_gamma_unit(Rng& rng, double shape) {
  detail::require_positive(shape, "gamma shape");
  if (shape < 1.0) {
    const double boosted = sample_gamma(rng, {shape + 1.0, 1.0});
    return std::log(boosted) + std::log(rng.uniform_open()) / shape;
  }
  return std::log(sample_gamma(rng, {shape, 1.0}));
}

/// Weibull with shape alpha and scale beta, by inversion.
inline double sample_weibull(Rng& rng, double shape, double scale) {
  detail::require_positive(shape, "weibull shape");
  detail::require_positive(scale, "weibull scale");
  return scale * std::pow(-std::log(rng.uniform_open()), 1.0 / shape);
}

inline double sample_beta(Rng& rng, double a, double b) {
  detail::require_positive(a, "beta a");
  detail::require_positive(b, "beta b");
  const double la = sample_log_gamma_unit(rng, a);
  const double lb = sample_log_gamma_unit(rng, b);
  const double m = std::max(la, lb);
  const double ea = std::exp(la - m);
  const double eb = std::exp(lb - m);
  return ea / (ea + eb);
}

inline std::vector<double> sample_dirichlet(Rng& rng, std::span<const double> concentration) {
  if (concentration.empty()) throw ParameterError("dirichlet needs at least one component");
  std::vector<double> logs(concentration.size());
  double peak = neg_inf;
  for (std::size_t i = 0; i < concentration.size(); ++i) {
    logs[i] = sample_log_gamma_unit(rng, concentration[i]);
    peak = std::max(peak, logs[i]);
  }
  double total = 0.0;
  for (double& v : logs) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : logs) v /= total;
  return logs;
}

/// Index drawn proportionally to `probabilities` (need not be exactly normalized).
inline std::size_t sample_categorical(Rng& rng, std::span<const double> probabilities) {
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ParameterError("categorical probabilities must be finite and >= 0");
    total += p;
  }
  if (!(total > 0.0)) throw ParameterError("categorical probabilities sum to zero");
  const double target = rng.uniform() * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < probabilities.size(); ++k) {
    if (probabilities[k] <= 0.0) continue;
    cumulative += probabilities[k];
    last_positive = k;
    if (target < cumulative) return k;
  }
  return last_positive;
}

inline double sample_halfnormal(Rng& rng, double sigma) {
  detail::require_positive(sigma, "half-normal sigma");
  return std::abs(rng.normal()) * sigma;
}

/// Poisson: multiplication method for small means, PTRS (Hoermann 1993) otherwise.
inline std::uint64_t sample_poisson(Rng& rng, double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw ParameterError("poisson mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    const double limit = std::exp(-mean);
    double product = rng.uniform_open();
    std::uint64_t k = 0;
    while (product > limit) {
      ++k;
      product *= rng.uniform_open();
    }
    return k;
  }
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform_open();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - log_gamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

/**
 * Negative binomial in mean/dispersion form: E = mean, Var = mean + mean^2 / dispersion.
 * Drawn as a Gamma-Poisson mixture.
 */
inline std::uint64_t sample_negbinomial(Rng& rng, double mean, double dispersion) {
  detail::require_positive(mean, "negative binomial mean");
  detail::require_positive(dispersion, "negative binomial dispersion");
  const double lambda = sample_gamma(rng, {dispersion, dispersion / mean});
  return sample_poisson(rng, lambda);
}

/// Normal(mean, sigma^2) restricted to [lower, inf).
inline double sample_truncnormal(Rng& rng, double mean, double sigma, double lower) {
  detail::require_positive(sigma, "truncated normal sigma");
  const double a = (lower - mean) / sigma;
  // Naive rejection accepts with probability 1 - Phi(a); below 0.1 (a > 1.2816) switch
  // to Robert's translated-exponential proposal.
  if (a < 1.2815515655446004) {
    for (;;) {
      const double z = rng.normal();
      if (z >= a) return mean + sigma * z;
    }
  }
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a - std::log(rng.uniform_open()) / lambda;
    const double d = z - lambda;
    if (std::log(rng.uniform_open()) <= -0.5 * d * d) return std::max(lower, mean + sigma * z);
  }
}

inline double sample_mixture(Rng& rng, const GammaMixture& mixture) {
  mixture.validate();
  const std::size_t k = sample_categorical(rng, mixture.weights);
  return sample_gamma(rng, mixture.components[k]);
}

// ---------------------------------------------------------------------------
// Log densities

inline double logpdf_uniform(double x, double lower, double upper) {
  if (!(upper > lower)) throw ParameterError("uniform bounds must satisfy lower < upper");
  if (x < lower || x > upper) return neg_inf;
  return -std::log(upper - lower);
}

inline double logpdf_normal(double x, double mean, double sigma) {
  detail::require_positive(sigma, "normal sigma");
  const double z = (x - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double logpdf_gamma(double x, const GammaParams& params) {
  params.validate();
  if (!(x > 0.0)) {
    if (x == 0.0 && params.shape == 1.0) return std::log(params.rate);
    return neg_inf;
  }
  return params.shape * std::log(params.rate) - log_gamma(params.shape) +
         (params.shape - 1.0) * std::log(x) - params.rate * x;
}

inline double logpdf_weibull(double x, double shape, double scale) {
  detail::require_positive(shape, "weibull shape");
  detail::require_positive(scale, "weibull scale");
  if (!(x > 0.0)) return neg_inf;
  const double z = x / scale;
  return std::log(shape / scale) + (shape - 1.0) * std::log(z) - std::pow(z, shape);
}

inline double logpdf_beta(double x, double a, double b) {
  detail::require_positive(a, "beta a");
  detail::require_positive(b, "beta b");
  if (!(x > 0.0 && x < 1.0)) return neg_inf;
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + log_gamma(a + b) - log_gamma(a) -
         log_gamma(b);
}

inline double logpdf_dirichlet(std::span<const double> x, std::span<const double> concentration) {
  if (x.size() != concentration.size() || x.empty()) {
    throw ParameterError("dirichlet value and concentration differ in length");
  }
  double total_conc = 0.0;
  double result = 0.0;
  double total_x = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    detail::require_positive(concentration[i], "dirichlet concentration");
    if (!(x[i] > 0.0)) return neg_inf;
    total_conc += concentration[i];
    total_x += x[i];
    result += (concentration[i] - 1.0) * std::log(x[i]) - log_gamma(concentration[i]);
  }
  if (std::abs(total_x - 1.0) > 1e-9) return neg_inf;
  return result + log_gamma(total_conc);
}

inline double logpmf_categorical(std::size_t k, std::span<const double> probabilities) {
  if (k >= probabilities.size()) return neg_inf;
  return std::log(probabilities[k]);
}

inline double logpmf_bernoulli(bool success, double p) {
  detail::require_probability(p, "bernoulli probability");
  return success ? std::log(p) : std::log1p(-p);
}

inline double logpmf_poisson(std::uint64_t k, double mean) {
  if (!(mean >= 0.0)) throw ParameterError("poisson mean must be >= 0");
  if (mean == 0.0) return k == 0 ? 0.0 : neg_inf;
  const auto kd = static_cast<double>(k);
  return kd * std::log(mean) - mean - log_gamma(kd + 1.0);
}

inline double logpmf_negbinomial(std::uint64_t k, double mean, double dispersion) {
  detail::require_positive(mean, "negative binomial mean");
  detail::require_positive(dispersion, "negative binomial dispersion");
  const auto kd = static_cast<double>(k);
  return log_gamma(kd + dispersion) - log_gamma(dispersion) - log_gamma(kd + 1.0) -
         dispersion * std::log1p(mean / dispersion) + kd * std::log(mean / (dispersion + mean));
}

inline double logpdf_halfnormal(double x, double sigma) {
  detail::require_positive(sigma, "half-normal sigma");
  if (!(x >= 0.0)) return neg_inf;
  const double z = x / sigma;
  return 0.5 * std::log(2.0 / std::numbers::pi) - std::log(sigma) - 0.5 * z * z;
}

/// Normal density renormalized by the upper-tail mass above `lower`.
inline double logpdf_truncnormal(double x, double mean, double sigma, double lower) {
  detail::require_positive(sigma, "truncated normal sigma");
  if (x < lower) return neg_inf;
  return logpdf_normal(x, mean, sigma) - log_normal_cdf((mean - lower) / sigma);
}

inline double logpdf_mixture(double x, const GammaMixture& mixture) {
  mixture.validate();
  std::vector<double> terms;
  terms.reserve(mixture.weights.size());
  for (std::size_t k = 0; k < mixture.weights.size(); ++k) {
    if (mixture.weights[k] <= 0.0) continue;
    terms.push_back(std::log(mixture.weights[k]) + logpdf_gamma(x, mixture.components[k]));
  }
  return log_sum_exp(terms);
}

}  // namespace netgen::stats
