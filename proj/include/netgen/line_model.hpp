#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "netgen/carson.hpp"
#include "netgen/distributions.hpp"
#include "netgen/inference.hpp"
#include "netgen/rng.hpp"

/**
 * @file line_model.hpp
 * @brief Zone-weighted ordered Gamma mixtures for positive-sequence resistance
 * (ohm/km) and X/R ratio, and the per-line parameters built from them.
 */

namespace netgen {

inline constexpr std::size_t kLineComponents = 3;

/// Gamma with the given mean and coefficient of variation: shape 1/cv^2, rate 1/(cv^2 mean).
inline stats::GammaParams gamma_from_mean_cv(double mean, double cv) {
  if (!(mean > 0.0) || !(cv > 0.0) || !std::isfinite(mean) || !std::isfinite(cv)) {
    throw stats::ParameterError("gamma mean and cv must be positive");
  }
  const double shape = 1.0 / (cv * cv);
  return {shape, shape / mean};
}

/// One posterior draw of a K = 3 mixture: ordered means, shared cv, weights per zone.
struct MixtureDraw {
  std::array<double, kLineComponents> means{};
  double cv = 0.0;
  std::vector<std::array<double, kLineComponents>> weights;  ///< index zone - 1

  [[nodiscard]] stats::GammaMixture mixture(int zone) const {
    const auto z = static_cast<std::size_t>(zone - 1);
    if (z >= weights.size()) throw std::out_of_range("line zone " + std::to_string(zone) + " out of range");
    stats::GammaMixture m;
    for (std::size_t k = 0; k < kLineComponents; ++k) {
      m.components.push_back(gamma_from_mean_cv(means[k], cv));
      m.weights.push_back(weights[z][k]);
    }
    return m;
  }
};

struct LineDraw {
  MixtureDraw resistance;
  MixtureDraw ratio;
};

struct LineParams {
  double r1_ohm_per_km = 0.0;
  double x1_ohm_per_km = 0.0;
  double rho = 0.0;  ///< X/R
  PhaseMatrix z_abc{};
};

/// Draw R1 and X/R from the zone's mixtures, set X1 = rho * R1 and build Z_abc for `config`.
inline LineParams sample_line(const LineDraw& draw, int zone, Rng& rng, PhaseConfig config = PhaseConfig::ABC,
                              const CarsonSettings& carson = {}) {
  LineParams out;
  out.r1_ohm_per_km = stats::sample_mixture(rng, draw.resistance.mixture(zone));
  out.rho = stats::sample_mixture(rng, draw.ratio.mixture(zone));
  out.x1_ohm_per_km = out.rho * out.r1_ohm_per_km;
  out.z_abc = carson_zabc(out.r1_ohm_per_km, out.x1_ohm_per_km, config, carson);
  return out;
}

// ---------------------------------------------------------------------------
// Learning

struct MixturePosterior {
  std::string label;  ///< "R" or "rho"
  int zone_count = 0;
  inference::PosteriorEnsemble ensemble;
  std::vector<std::string> warnings;

  [[nodiscard]] std::string mean_name(std::size_t k) const { return "mu_" + label + "[" + std::to_string(k) + "]"; }
  [[nodiscard]] std::string cv_name() const { return "cv_" + label; }
  [[nodiscard]] std::string weight_name(int zone, std::size_t k) const {
    return "w_" + label + "_z" + std::to_string(zone) + "[" + std::to_string(k) + "]";
  }

  [[nodiscard]] MixtureDraw draw(std::span<const double> row) const {
    MixtureDraw d;
    for (std::size_t k = 0; k < kLineComponents; ++k) d.means[k] = row[ensemble.column_index(mean_name(k))];
    d.cv = row[ensemble.column_index(cv_name())];
    for (int z = 1; z <= zone_count; ++z) {
      std::array<double, kLineComponents> w{};
      for (std::size_t k = 0; k < kLineComponents; ++k) w[k] = row[ensemble.column_index(weight_name(z, k))];
      d.weights.push_back(w);
    }
    return d;
  }
  [[nodiscard]] MixtureDraw draw(std::size_t i) const { return draw(ensemble.row(i)); }
};

struct LinePosterior {
  MixturePosterior resistance;
  MixturePosterior ratio;

  [[nodiscard]] std::size_t size() const { return std::min(resistance.ensemble.size(), ratio.ensemble.size()); }
  [[nodiscard]] LineDraw draw(std::size_t i) const { return {resistance.draw(i), ratio.draw(i)}; }
  [[nodiscard]] std::vector<std::string> warnings() const {
    auto out = resistance.warnings;
    out.insert(out.end(), ratio.warnings.begin(), ratio.warnings.end());
    return out;
  }
};

namespace detail {

/// Solve log(a) - digamma(a) = target for the Gamma shape a (target > 0).
inline double solve_gamma_shape(double target) {
  target = std::max(target, 1e-12);
  double a = (3.0 - target + std::sqrt((target - 3.0) * (target - 3.0) + 24.0 * target)) / (12.0 * target);
  for (int it = 0; it < 100; ++it) {
    const double f = std::log(a) - boost::math::digamma(a) - target;
    if (std::abs(f) < 1e-12) break;
    const double next = a - f / (1.0 / a - boost::math::trigamma(a));
    a = next > 0.0 ? next : a / 2.0;
  }
  return a;
}

struct MixtureEstimate {
  std::vector<double> means;
  double cv = 1.0;
  std::vector<std::vector<double>> weights;  ///< per zone
  double log_lik = 0.0;
};

/// Maximum likelihood Gamma mixture with shared cv and per-zone weights, by EM from `means`.
inline MixtureEstimate em_gamma_mixture(const std::vector<std::vector<double>>& x,
                                        const std::vector<std::vector<double>>& log_x, std::vector<double> means,
                                        double cv, int max_iterations = 1000) {
  const std::size_t K = means.size();
  const std::size_t nz = x.size();
  MixtureEstimate est;
  est.weights.assign(nz, std::vector<double>(K, 1.0 / static_cast<double>(K)));
  double total = 0.0, sum_log = 0.0;
  for (std::size_t z = 0; z < nz; ++z) {
    total += static_cast<double>(x[z].size());
    for (double v : log_x[z]) sum_log += v;
  }
  double shape = 1.0 / (cv * cv);
  double previous = stats::neg_inf;
  std::vector<double> t(K);
  for (int it = 0; it < max_iterations; ++it) {
    std::vector<double> n_k(K, 0.0), s_k(K, 0.0);
    std::vector<std::vector<double>> n_zk(nz, std::vector<double>(K, 0.0));
    double ll = 0.0;
    const double lg = stats::log_gamma(shape);
    for (std::size_t z = 0; z < nz; ++z) {
      for (std::size_t i = 0; i < x[z].size(); ++i) {
        double top = stats::neg_inf;
        for (std::size_t k = 0; k < K; ++k) {
          const double rate = shape / means[k];
          t[k] = std::log(est.weights[z][k]) + shape * std::log(rate) - lg + (shape - 1.0) * log_x[z][i] - rate * x[z][i];
          top = std::max(top, t[k]);
        }
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) acc += (t[k] = std::exp(t[k] - top));
        ll += top + std::log(acc);
        for (std::size_t k = 0; k < K; ++k) {
          const double r = t[k] / acc;
          n_k[k] += r;
          s_k[k] += r * x[z][i];
          n_zk[z][k] += r;
        }
      }
    }
    est.log_lik = ll;
    double target = -sum_log;
    for (std::size_t k = 0; k < K; ++k) {
      if (n_k[k] > 1e-9) means[k] = s_k[k] / n_k[k];
      target += n_k[k] * std::log(means[k]);
    }
    shape = solve_gamma_shape(target / total);
    for (std::size_t z = 0; z < nz; ++z) {
      const double nzt = static_cast<double>(x[z].size());
      for (std::size_t k = 0; k < K; ++k) {
        est.weights[z][k] = nzt > 0.0 ? std::max(n_zk[z][k] / nzt, 1e-12) : 1.0 / static_cast<double>(K);
      }
    }
    if (std::abs(ll - previous) < 1e-10 * total) break;
    previous = ll;
  }
  est.means = means;
  est.cv = 1.0 / std::sqrt(shape);
  return est;
}

/**
 * Starting point for the sampler. EM fits with 1, 2 and 3 occupied components
 * are compared by BIC; unused slots are parked in the tails (or between two
 * occupied components) with small weight.
 */
inline MixtureEstimate mixture_start(const std::vector<std::vector<double>>& x,
                                     const std::vector<std::vector<double>>& log_x) {
  std::vector<double> sorted;
  for (const auto& v : x) sorted.insert(sorted.end(), v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double mean_log = 0.0;
  for (const auto& v : log_x) mean_log += std::accumulate(v.begin(), v.end(), 0.0);
  mean_log /= n;
  const double cv0 = 1.0 / std::sqrt(solve_gamma_shape(std::log(mean) - mean_log));

  MixtureEstimate best;
  double best_bic = std::numeric_limits<double>::infinity();
  const std::size_t max_k = std::min<std::size_t>(kLineComponents, sorted.size());
  for (std::size_t k = 1; k <= max_k; ++k) {
    std::vector<double> means;
    for (std::size_t j = 0; j < k; ++j) {
      const double q = (2.0 * static_cast<double>(j) + 1.0) / (2.0 * static_cast<double>(k));
      means.push_back(sorted[std::min(sorted.size() - 1, static_cast<std::size_t>(q * n))]);
    }
    auto est = em_gamma_mixture(x, log_x, means, k == 1 ? cv0 : cv0 / static_cast<double>(k));
    const double params = static_cast<double>(k + 1 + x.size() * (k - 1));
    const double bic = -2.0 * est.log_lik + params * std::log(n);
    if (bic < best_bic) {
      best_bic = bic;
      best = std::move(est);
    }
  }

  std::vector<std::size_t> order(best.means.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return best.means[a] < best.means[b]; });
  const double spread = std::exp(3.0 * std::min(best.cv, 1.0));
  std::vector<double> means;
  std::vector<int> slot_of(kLineComponents, -1);  // occupied component feeding each slot
  if (order.size() == 1) {
    means = {best.means[0] / spread, best.means[0], best.means[0] * spread};
    slot_of[1] = 0;
  } else if (order.size() == 2) {
    const double lo = best.means[order[0]], hi = best.means[order[1]];
    means = {lo, std::sqrt(lo * hi), hi};
    slot_of[0] = static_cast<int>(order[0]);
    slot_of[2] = static_cast<int>(order[1]);
  } else {
    for (std::size_t j = 0; j < kLineComponents; ++j) {
      means.push_back(best.means[order[j]]);
      slot_of[j] = static_cast<int>(order[j]);
    }
  }
  for (std::size_t j = 1; j < means.size(); ++j) means[j] = std::max(means[j], means[j - 1] * (1.0 + 1e-6));

  constexpr double kFloor = 0.01;
  MixtureEstimate start;
  start.means = means;
  start.cv = best.cv;
  start.log_lik = best.log_lik;
  for (const auto& wz : best.weights) {
    std::vector<double> w(kLineComponents, kFloor);
    for (std::size_t j = 0; j < kLineComponents; ++j) {
      if (slot_of[j] >= 0) w[j] = std::max(wz[static_cast<std::size_t>(slot_of[j])], kFloor);
    }
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= sum;
    start.weights.push_back(std::move(w));
  }
  return start;
}

}  // namespace detail

struct LinePriors {
  double mean_scale = 1.0;       ///< HalfNormal scale of mu_1 and of each increment
  double cv_scale = 0.5;         ///< HalfNormal scale of cv
  double weight_concentration = 0.01;  ///< sparse: surplus components empty out
};

/**
 * Fit one ordered mixture. Means are mu_1 plus HalfNormal increments (the
 * ordered-positive transform), so components cannot swap labels. Chains start
 * from the EM/BIC estimate of detail::mixture_start.
 */
inline MixturePosterior fit_mixture(std::span<const double> values, std::span<const int> zones, int zone_count,
                                    const std::string& label, const inference::FitConfig& config,
                                    const LinePriors& priors = {}) {
  using inference::Support;
  if (zone_count < 1) throw std::invalid_argument("zone count must be >= 1");
  if (values.size() != zones.size()) throw std::invalid_argument(label + " values and zones differ in length");
  if (values.empty()) throw std::invalid_argument(label + ": no observations");
  const auto nz = static_cast<std::size_t>(zone_count);
  std::vector<std::vector<double>> x(nz), log_x(nz);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(label + " observation " + std::to_string(i) + " must be positive and finite");
    }
    if (zones[i] < 1 || zones[i] > zone_count) {
      throw std::invalid_argument(label + " observation zone " + std::to_string(zones[i]) + " out of range");
    }
    const auto z = static_cast<std::size_t>(zones[i] - 1);
    x[z].push_back(v);
    log_x[z].push_back(std::log(v));
  }

  MixturePosterior post;
  post.label = label;
  post.zone_count = zone_count;
  if (values.size() < kLineComponents) {
    post.warnings.push_back(label + ": fewer observations (" + std::to_string(values.size()) + ") than mixture components");
  }
  inference::ParamSpace space;
  const auto mu = space.add("mu_" + label, Support::ordered_positive, kLineComponents);
  const auto cv = space.add(post.cv_name(), Support::positive);
  std::vector<inference::ParamRef> w;
  for (int z = 1; z <= zone_count; ++z) {
    w.push_back(space.add("w_" + label + "_z" + std::to_string(z), Support::simplex, kLineComponents));
    if (x[static_cast<std::size_t>(z - 1)].empty()) {
      post.warnings.push_back(label + " zone " + std::to_string(z) + " has no observations; weights from the prior");
    }
  }
  const std::vector<double> concentration(kLineComponents, priors.weight_concentration);

  const inference::LogDensity log_post = [&](std::span<const double> p) {
    const double c = cv(p);
    double s = stats::logpdf_halfnormal(c, priors.cv_scale);
    double prev = 0.0;
    std::array<double, kLineComponents> rate{}, norm{};
    const double shape = 1.0 / (c * c);
    const double lg = stats::log_gamma(shape);
    for (std::size_t k = 0; k < kLineComponents; ++k) {
      const double m = mu(p, k);
      s += stats::logpdf_halfnormal(m - prev, priors.mean_scale);
      prev = m;
      rate[k] = shape / m;
      norm[k] = shape * std::log(rate[k]) - lg;
    }
    for (std::size_t z = 0; z < nz; ++z) {
      const auto wz = w[z].view(p);
      s += stats::logpdf_dirichlet(wz, concentration);
      std::array<double, kLineComponents> log_w{};
      for (std::size_t k = 0; k < kLineComponents; ++k) log_w[k] = std::log(wz[k]) + norm[k];
      for (std::size_t i = 0; i < x[z].size(); ++i) {
        std::array<double, kLineComponents> t{};
        double top = stats::neg_inf;
        for (std::size_t k = 0; k < kLineComponents; ++k) {
          t[k] = log_w[k] + (shape - 1.0) * log_x[z][i] - rate[k] * x[z][i];
          top = std::max(top, t[k]);
        }
        if (top == stats::neg_inf) return stats::neg_inf;
        double acc = 0.0;
        for (double tk : t) acc += std::exp(tk - top);
        s += top + std::log(acc);
      }
    }
    return s;
  };

  const auto start = detail::mixture_start(x, log_x);
  std::vector<double> init(space.dim());
  for (std::size_t k = 0; k < kLineComponents; ++k) init[mu.offset + k] = start.means[k];
  init[cv.offset] = start.cv;
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t k = 0; k < kLineComponents; ++k) init[w[z].offset + k] = start.weights[z][k];
  }
  post.ensemble = inference::fit(log_post, space, init, config);
  return post;
}

/// Fit the resistance and X/R mixtures independently; the X/R chains use the "rho" substream of the seed.
inline LinePosterior fit_line_model(std::span<const double> r1_ohm_per_km, std::span<const double> rho,
                                    std::span<const int> zones, int zone_count, const inference::FitConfig& config,
                                    const LinePriors& priors = {}) {
  LinePosterior post;
  post.resistance = fit_mixture(r1_ohm_per_km, zones, zone_count, "R", config, priors);
  inference::FitConfig rho_config = config;
  rho_config.seed = Rng(config.seed).substream("rho").key();
  post.ratio = fit_mixture(rho, zones, zone_count, "rho", rho_config, priors);
  return post;
}

}  // namespace netgen
