#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "netgen/distributions.hpp"
#include "netgen/inference.hpp"
#include "netgen/phase_model.hpp"
#include "netgen/rng.hpp"

/**
 * @file load_model.hpp
 * @brief Hierarchical per-phase active power model with split factors,
 * truncated-normal bus deviations and a network-wide power factor.
 */

namespace netgen {

enum class LoadCategory { mono = 0, bi, tri };

inline constexpr LoadCategory category_of(PhaseConfig p) {
  switch (phase_count(p)) {
    case 1: return LoadCategory::mono;
    case 2: return LoadCategory::bi;
    default: return LoadCategory::tri;
  }
}

inline std::string_view to_string(LoadCategory c) {
  constexpr std::array<std::string_view, 3> names{"mono", "bi", "tri"};
  return names[static_cast<std::size_t>(c)];
}

/// One parameter draw of the load model (kW).
struct LoadParams {
  double p_mono = 1.0;
  double p_bi = 1.0;
  double p_tri = 1.0;
  double delta_bi = 0.5;
  std::array<double, 3> delta_tri{1.0 / 3, 1.0 / 3, 1.0 / 3};
  double sigma_p = 0.1;
};

/// Per-phase mean demand; on two-phase buses the first active phase (A, B, C order) receives delta_bi.
inline std::array<double, 3> mean_vector(const LoadParams& lp, PhaseConfig config) {
  std::array<double, 3> mu{};
  switch (category_of(config)) {
    case LoadCategory::mono:
      for (int j = 0; j < 3; ++j) mu[j] = has_phase(config, j) ? lp.p_mono : 0.0;
      break;
    case LoadCategory::bi: {
      bool first = true;
      for (int j = 0; j < 3; ++j) {
        if (!has_phase(config, j)) continue;
        mu[j] = lp.p_bi * (first ? lp.delta_bi : 1.0 - lp.delta_bi);
        first = false;
      }
      break;
    }
    case LoadCategory::tri:
      for (int j = 0; j < 3; ++j) mu[j] = lp.p_tri * lp.delta_tri[j];
      break;
  }
  return mu;
}

/// Network power factor from a uniform variate: (0, 0.1649] -> 0.85, (0.1649, 0.27] -> 0.90, else 0.95.
inline double power_factor_from_uniform(double u) {
  if (u > 0.0 && u <= 0.1649) return 0.85;
  if (u > 0.1649 && u <= 0.27) return 0.90;
  return 0.95;
}

inline double sample_power_factor(Rng& rng) { return power_factor_from_uniform(rng.uniform()); }

inline double reactive_from_active(double p_kw, double pf) { return p_kw * std::tan(std::acos(pf)); }

struct BusDemand {
  std::array<double, 3> p_kw{};
  std::array<double, 3> q_kvar{};
  double pf = 1.0;

  [[nodiscard]] double total_kw() const { return p_kw[0] + p_kw[1] + p_kw[2]; }
};

inline BusDemand zero_demand(double pf) { return BusDemand{{}, {}, pf}; }

/// Per-phase TruncatedNormal(mu, sigma_p, lower 0) on active phases; `pf` is the network-level factor.
inline BusDemand sample_demand(const LoadParams& lp, PhaseConfig config, double pf, Rng& rng) {
  BusDemand d;
  d.pf = pf;
  const auto mu = mean_vector(lp, config);
  for (int j = 0; j < 3; ++j) {
    if (!has_phase(config, j)) continue;
    d.p_kw[j] = lp.sigma_p > 0.0 ? stats::sample_truncnormal(rng, mu[j], lp.sigma_p, 0.0) : mu[j];
    d.q_kvar[j] = reactive_from_active(d.p_kw[j], pf);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Learning

struct LoadObservation {
  PhaseConfig config = PhaseConfig::ABC;
  std::array<double, 3> p_kw{};  ///< entries on inactive phases are ignored
};

struct LoadPriors {
  stats::GammaParams hyper{2.0, 0.5};  ///< prior of alpha_hp and beta_hp
  double split_bi = 2.0;               ///< Beta(a, a) on delta_bi
  double split_tri = 2.0;              ///< Dirichlet(a, a, a) on delta_tri
  std::optional<double> sigma_scale;   ///< HalfNormal scale of sigma_p; sd of all observed phase loads if unset
};

struct LoadPosterior {
  inference::PosteriorEnsemble ensemble;
  std::vector<std::string> warnings;

  [[nodiscard]] LoadParams params(std::size_t draw) const { return params(ensemble.row(draw)); }

  [[nodiscard]] LoadParams params(std::span<const double> row) const {
    auto at = [&](const std::string& name) { return row[ensemble.column_index(name)]; };
    LoadParams lp;
    lp.p_mono = at("P_pot_mono");
    lp.p_bi = at("P_pot_bi");
    lp.p_tri = at("P_pot_tri");
    lp.delta_bi = at("delta_bi");
    for (int j = 0; j < 3; ++j) lp.delta_tri[j] = at("delta_tri[" + std::to_string(j) + "]");
    lp.sigma_p = at("sigma_p");
    return lp;
  }
};

namespace detail {

/// n, sum and sum of squares of the observed values on one active phase of one configuration.
struct PhaseGroup {
  PhaseConfig config;
  int phase;
  double n = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
};

}  // namespace detail

inline LoadPosterior fit_load_model(std::span<const LoadObservation> observations, const inference::FitConfig& config,
                                    const LoadPriors& priors = {}) {
  using inference::Support;
  if (observations.empty()) throw std::invalid_argument("load model needs at least one observation");

  std::vector<detail::PhaseGroup> groups;
  for (PhaseConfig c : kAllPhaseConfigs) {
    for (int j = 0; j < 3; ++j) {
      if (has_phase(c, j)) groups.push_back({c, j});
    }
  }
  auto group_of = [&](PhaseConfig c, int j) -> detail::PhaseGroup& {
    for (auto& g : groups) {
      if (g.config == c && g.phase == j) return g;
    }
    throw std::logic_error("missing phase group");
  };
  std::array<double, 3> cat_n{};
  std::array<double, 3> cat_total{};
  std::array<double, 3> tri_share{};
  double bi_first_share = 0.0;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& o = observations[i];
    double total = 0.0;
    for (int j = 0; j < 3; ++j) {
      if (!has_phase(o.config, j)) continue;
      const double x = o.p_kw[j];
      if (!std::isfinite(x) || x < 0.0) {
        throw std::invalid_argument("load observation " + std::to_string(i) + " has invalid power " + std::to_string(x));
      }
      auto& g = group_of(o.config, j);
      g.n += 1.0;
      g.s1 += x;
      g.s2 += x * x;
      total += x;
    }
    const auto cat = static_cast<std::size_t>(category_of(o.config));
    cat_n[cat] += 1.0;
    cat_total[cat] += total;
    if (total > 0.0 && cat == 2) {
      for (int j = 0; j < 3; ++j) tri_share[j] += o.p_kw[j] / total;
    }
    if (total > 0.0 && cat == 1) {
      for (int j = 0; j < 3; ++j) {
        if (has_phase(o.config, j)) {
          bi_first_share += o.p_kw[j] / total;
          break;
        }
      }
    }
  }

  LoadPosterior post;
  double n_all = 0.0;
  double s1_all = 0.0;
  double s2_all = 0.0;
  for (const auto& g : groups) {
    n_all += g.n;
    s1_all += g.s1;
    s2_all += g.s2;
  }
  const double mean_all = n_all > 0.0 ? s1_all / n_all : 0.0;
  double sigma_scale = n_all > 1.0 ? std::sqrt(std::max(s2_all - n_all * mean_all * mean_all, 0.0) / (n_all - 1.0)) : 0.0;
  if (!(sigma_scale > 0.0)) sigma_scale = mean_all > 0.0 ? 0.1 * mean_all : 1.0;
  if (priors.sigma_scale) sigma_scale = *priors.sigma_scale;

  for (std::size_t k = 0; k < 3; ++k) {
    if (cat_n[k] == 0.0) {
      post.warnings.push_back("no " + std::string(to_string(static_cast<LoadCategory>(k))) +
                              "-phase observations; its potential follows the shared hyperprior");
    }
  }

  inference::ParamSpace space;
  const auto a_hp = space.add("alpha_hp", Support::positive, 1, "hyper");
  const auto b_hp = space.add("beta_hp", Support::positive, 1, "hyper");
  std::array<inference::ParamRef, 3> shape{};
  std::array<inference::ParamRef, 3> rate{};
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string cat(to_string(static_cast<LoadCategory>(k)));
    shape[k] = space.add("alpha_" + cat, Support::positive, 1, "hyper");
    rate[k] = space.add("beta_" + cat, Support::positive, 1, "hyper");
  }
  const std::array<inference::ParamRef, 3> pot{space.add("P_pot_mono", Support::positive, 1, "mono"),
                                               space.add("P_pot_bi", Support::positive, 1, "bi"),
                                               space.add("P_pot_tri", Support::positive, 1, "tri")};
  const auto d_bi = space.add("delta_bi", Support::unit_interval, 1, "bi");
  const auto d_tri = space.add("delta_tri", Support::simplex, 3, "tri");
  const auto sig = space.add("sigma_p", Support::positive);

  const std::array<double, 3> tri_prior{priors.split_tri, priors.split_tri, priors.split_tri};
  const inference::LogDensity log_post = [=, &groups](std::span<const double> x) {
    const stats::GammaParams hyper{a_hp(x), b_hp(x)};
    double s = stats::logpdf_gamma(hyper.shape, priors.hyper) + stats::logpdf_gamma(hyper.rate, priors.hyper);
    for (std::size_t k = 0; k < 3; ++k) {
      s += stats::logpdf_gamma(shape[k](x), hyper) + stats::logpdf_gamma(rate[k](x), hyper);
      s += stats::logpdf_gamma(pot[k](x), {shape[k](x), rate[k](x)});
    }
    s += stats::logpdf_beta(d_bi(x), priors.split_bi, priors.split_bi);
    s += stats::logpdf_dirichlet(d_tri.view(x), tri_prior);
    const double sigma = sig(x);
    s += stats::logpdf_halfnormal(sigma, sigma_scale);
    if (!std::isfinite(s)) return stats::neg_inf;

    LoadParams lp;
    lp.p_mono = pot[0](x);
    lp.p_bi = pot[1](x);
    lp.p_tri = pot[2](x);
    lp.delta_bi = d_bi(x);
    for (int j = 0; j < 3; ++j) lp.delta_tri[j] = d_tri(x, j);
    const double log_sigma = std::log(sigma);
    for (const auto& g : groups) {
      if (g.n == 0.0) continue;
      const double mu = mean_vector(lp, g.config)[g.phase];
      const double ss = g.s2 - 2.0 * mu * g.s1 + g.n * mu * mu;
      s += -g.n * log_sigma - ss / (2.0 * sigma * sigma) - g.n * stats::log_normal_cdf(mu / sigma);
    }
    return s;
  };

  std::vector<double> init(space.dim());
  init[a_hp.offset] = priors.hyper.mean();
  init[b_hp.offset] = priors.hyper.mean();
  for (std::size_t k = 0; k < 3; ++k) {
    const double m = cat_n[k] > 0.0 && cat_total[k] > 0.0 ? cat_total[k] / cat_n[k] : 1.0;
    init[pot[k].offset] = m;
    init[shape[k].offset] = 2.0;
    init[rate[k].offset] = 2.0 / m;
  }
  init[d_bi.offset] = cat_n[1] > 0.0 ? std::clamp(bi_first_share / cat_n[1], 0.05, 0.95) : 0.5;
  {
    std::array<double, 3> share{1.0 / 3, 1.0 / 3, 1.0 / 3};
    const double n = tri_share[0] + tri_share[1] + tri_share[2];
    if (n > 0.0) {
      for (int j = 0; j < 3; ++j) share[j] = std::max(tri_share[j] / n, 0.01);
      const double t = share[0] + share[1] + share[2];
      for (double& v : share) v /= t;
    }
    for (int j = 0; j < 3; ++j) init[d_tri.offset + j] = share[j];
  }
  init[sig.offset] = sigma_scale;

  post.ensemble = inference::fit(log_post, space, init, config);
  return post;
}

}  // namespace netgen
