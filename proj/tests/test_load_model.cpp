#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "netgen/load_model.hpp"
#include "synthetic_data.hpp"

using namespace netgen;

namespace {

inference::FitConfig fit_config(std::uint64_t seed) {
  inference::FitConfig cfg;
  cfg.warmup = 2000;
  cfg.keep = 2000;
  cfg.seed = seed;
  return cfg;
}

LoadParams truth() {
  LoadParams t;
  t.p_mono = 2.0;
  t.p_bi = 5.0;
  t.p_tri = 12.0;
  t.delta_bi = 0.6;
  t.delta_tri = {0.30, 0.33, 0.37};
  t.sigma_p = 0.3;
  return t;
}

}  // namespace

TEST_CASE("mean power vectors", "[load]") {
  LoadParams lp;
  lp.p_mono = 7.0;
  lp.p_bi = 10.0;
  lp.delta_bi = 0.5;
  lp.p_tri = 9.0;
  lp.delta_tri = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  REQUIRE(mean_vector(lp, PhaseConfig::AB) == std::array<double, 3>{5.0, 5.0, 0.0});
  REQUIRE(mean_vector(lp, PhaseConfig::B) == std::array<double, 3>{0.0, 7.0, 0.0});
  const auto tri = mean_vector(lp, PhaseConfig::ABC);
  for (double v : tri) REQUIRE(v == Catch::Approx(3.0));

  lp.delta_bi = 0.7;
  REQUIRE(mean_vector(lp, PhaseConfig::CA)[0] == Catch::Approx(7.0));
  REQUIRE(mean_vector(lp, PhaseConfig::CA)[2] == Catch::Approx(3.0));
  REQUIRE(mean_vector(lp, PhaseConfig::BC)[1] == Catch::Approx(7.0));

  SECTION("split conservation") {
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
      lp.p_bi = 0.1 + 10 * rng.uniform();
      lp.p_tri = 0.1 + 10 * rng.uniform();
      lp.delta_bi = rng.uniform();
      const std::vector<double> ones{1.0, 1.0, 1.0};
      const auto d = stats::sample_dirichlet(rng, ones);
      lp.delta_tri = {d[0], d[1], d[2]};
      for (PhaseConfig c : {PhaseConfig::AB, PhaseConfig::BC, PhaseConfig::CA}) {
        const auto m = mean_vector(lp, c);
        REQUIRE(m[0] + m[1] + m[2] == Catch::Approx(lp.p_bi).epsilon(1e-14));
      }
      const auto m = mean_vector(lp, PhaseConfig::ABC);
      REQUIRE(m[0] + m[1] + m[2] == Catch::Approx(lp.p_tri).epsilon(1e-14));
    }
  }
}

TEST_CASE("power factor thresholds", "[load]") {
  REQUIRE(power_factor_from_uniform(0.10) == 0.85);
  REQUIRE(power_factor_from_uniform(0.1649) == 0.85);
  REQUIRE(power_factor_from_uniform(0.20) == 0.90);
  REQUIRE(power_factor_from_uniform(0.27) == 0.90);
  REQUIRE(power_factor_from_uniform(0.50) == 0.95);
  REQUIRE(power_factor_from_uniform(1.0) == 0.95);
  REQUIRE(reactive_from_active(100.0, 0.95) == Catch::Approx(32.87).margin(0.01));

  Rng rng(3);
  int low = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) low += sample_power_factor(rng) == 0.85;
  REQUIRE(low / double(n) == Catch::Approx(0.1649).margin(0.005));
}

TEST_CASE("demand sampling", "[load]") {
  Rng rng(8);
  LoadParams lp = truth();
  SECTION("support and sparsity") {
    lp.p_mono = 0.1;  // mean close to the truncation point
    lp.sigma_p = 1.0;
    for (int i = 0; i < 1000000; ++i) {
      const auto c = kAllPhaseConfigs[i % 7];
      const auto d = sample_demand(lp, c, 0.9, rng);
      for (int j = 0; j < 3; ++j) {
        if (has_phase(c, j)) {
          REQUIRE(d.p_kw[j] >= 0.0);
        } else {
          REQUIRE(d.p_kw[j] == 0.0);
          REQUIRE(d.q_kvar[j] == 0.0);
        }
      }
    }
  }
  SECTION("reactive power follows the power factor") {
    const auto d = sample_demand(lp, PhaseConfig::ABC, 0.95, rng);
    for (int j = 0; j < 3; ++j) REQUIRE(d.q_kvar[j] == Catch::Approx(d.p_kw[j] * std::tan(std::acos(0.95))));
    REQUIRE(d.pf == 0.95);
  }
  SECTION("zero deviation returns the mean") {
    lp.sigma_p = 0.0;
    const auto d = sample_demand(lp, PhaseConfig::AB, 0.9, rng);
    REQUIRE(d.p_kw == mean_vector(lp, PhaseConfig::AB));
  }
}

TEST_CASE("load model parameter recovery", "[load][fit]") {
  Rng rng(42);
  const auto t = truth();
  const auto data = testing::make_load_dataset(t, 5000, testing::kTablePhaseShares, rng);
  REQUIRE(data.size() == 5000);
  const auto post = fit_load_model(data, fit_config(12));
  REQUIRE(post.warnings.empty());

  const std::vector<std::pair<std::string, double>> checks{
      {"P_pot_mono", t.p_mono}, {"P_pot_bi", t.p_bi},           {"P_pot_tri", t.p_tri},
      {"delta_bi", t.delta_bi}, {"delta_tri[0]", t.delta_tri[0]}, {"delta_tri[1]", t.delta_tri[1]},
      {"delta_tri[2]", t.delta_tri[2]}, {"sigma_p", t.sigma_p}};
  for (const auto& [name, value] : checks) {
    INFO(name);
    const auto draws = post.ensemble.column(name);
    REQUIRE(post.ensemble.mean(name) == Catch::Approx(value).epsilon(0.10));
    REQUIRE(inference::hdi(draws).contains(value));
  }

  SECTION("posterior predictive total demand") {
    double observed = 0.0;
    for (const auto& o : data) {
      for (int j = 0; j < 3; ++j) observed += has_phase(o.config, j) ? o.p_kw[j] : 0.0;
    }
    Rng pred_rng(5);
    const auto totals = inference::posterior_predictive(
        post.ensemble,
        [&](std::span<const double> row, Rng& r) {
          const auto lp = post.params(row);
          double total = 0.0;
          for (const auto& o : data) total += sample_demand(lp, o.config, 0.9, r).total_kw();
          return total;
        },
        50, pred_rng);
    const double mean_total = std::accumulate(totals.begin(), totals.end(), 0.0) / totals.size();
    REQUIRE(mean_total == Catch::Approx(observed).epsilon(0.05));
  }
}

TEST_CASE("load model edge cases", "[load][fit]") {
  SECTION("balanced three-phase data") {
    Rng rng(9);
    LoadParams t = truth();
    t.delta_tri = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    const auto data = testing::make_load_dataset(t, 600, {0.3, 0, 0, 0, 0, 0, 0.7}, rng);
    const auto post = fit_load_model(data, fit_config(2));
    for (int j = 0; j < 3; ++j) {
      REQUIRE(post.ensemble.mean("delta_tri[" + std::to_string(j) + "]") == Catch::Approx(1.0 / 3).margin(0.03));
    }
    REQUIRE(post.warnings.size() == 1);  // no two-phase buses
  }
  SECTION("identical loads shrink the deviation") {
    std::vector<LoadObservation> data(300, LoadObservation{PhaseConfig::A, {5.0, 0.0, 0.0}});
    const auto post = fit_load_model(data, fit_config(3));
    REQUIRE(post.ensemble.mean("sigma_p") < 0.05 * 5.0);
  }
  SECTION("invalid data") {
    std::vector<LoadObservation> data{{PhaseConfig::A, {-1.0, 0.0, 0.0}}};
    REQUIRE_THROWS_AS(fit_load_model(data, fit_config(1)), std::invalid_argument);
    REQUIRE_THROWS_AS(fit_load_model({}, fit_config(1)), std::invalid_argument);
  }
}
