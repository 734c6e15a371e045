#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "netgen/carson.hpp"
#include "netgen/rng.hpp"
#include "carson_oracle.hpp"

using namespace netgen;

using testing::kKmPerMile;

TEST_CASE("four-wire line cross-check in feet and ohm per mile", "[carson]") {
  // phases at 0, 2.5 and 7 ft, neutral at (4, 4) ft below the phase plane
  const std::array<Point, 4> pos{Point{0.0, 0.0}, Point{2.5 * 0.3048, 0.0}, Point{7.0 * 0.3048, 0.0},
                                 Point{4.0 * 0.3048, -4.0 * 0.3048}};
  const ConductorData phase{0.0244 * 0.3048, 0.306 / kKmPerMile};
  const ConductorData neutral{0.00814 * 0.3048, 0.592 / kKmPerMile};
  const std::array<ConductorData, 4> cond{phase, phase, phase, neutral};
  const auto prim = carson_primitive(pos, cond, 60.0, 100.0);
  const auto z = kron_reduce_last(prim, 4);
  const std::array<std::array<Complex, 3>, 3> expected{{
      {Complex{0.4576, 1.0780}, Complex{0.1560, 0.5017}, Complex{0.1535, 0.3849}},
      {Complex{0.1560, 0.5017}, Complex{0.4666, 1.0482}, Complex{0.1580, 0.4236}},
      {Complex{0.1535, 0.3849}, Complex{0.1580, 0.4236}, Complex{0.4615, 1.0651}},
  }};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Complex per_mile = z[i * 3 + j] * kKmPerMile;
      INFO("z" << i + 1 << j + 1 << " = " << per_mile);
      REQUIRE(per_mile.real() == Catch::Approx(expected[i][j].real()).margin(6e-4));
      REQUIRE(per_mile.imag() == Catch::Approx(expected[i][j].imag()).margin(6e-4));
    }
  }
}

TEST_CASE("reference geometry against the feet oracle", "[carson]") {
  CarsonSettings s;
  s.mode = ConductorMode::fixed;
  const auto z = carson_zabc(0.0, 0.0, PhaseConfig::ABC, s);

  const auto ref = testing::reference_geometry_oracle();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Complex expect = ref[i][j];
      REQUIRE(std::abs(z[i][j].real() - expect.real()) < 1e-6);
      REQUIRE(std::abs(z[i][j].imag() - expect.imag()) < 1e-6);
    }
  }
}

TEST_CASE("phase impedance structure", "[carson][property]") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const double r1 = 0.05 + 1.5 * rng.uniform();
    const double x1 = r1 * (0.3 + 3.0 * rng.uniform());
    for (PhaseConfig cfg : kAllPhaseConfigs) {
      const auto z = carson_zabc(r1, x1, cfg);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          REQUIRE(std::abs(z[i][j] - z[j][i]) < 1e-12);
          const bool active = has_phase(cfg, i) && has_phase(cfg, j);
          if (active) {
            REQUIRE(std::abs(z[i][j]) > 0.0);
          } else {
            REQUIRE(z[i][j] == Complex{});
          }
        }
        if (has_phase(cfg, i)) {
          REQUIRE(z[i][i].real() > 0.0);
          REQUIRE(z[i][i].imag() > 0.0);
        }
      }
    }
  }
}

TEST_CASE("equal spacing gives equal self and mutual terms", "[carson][property]") {
  CarsonSettings s;
  s.geometry = {0.9, 0.9, 0.9, 1.0};
  const auto z = carson_zabc(0.3, 0.4, PhaseConfig::ABC, s);
  // a and c are symmetric about the neutral; b sits closer to it
  REQUIRE(std::abs(z[0][0] - z[2][2]) < 1e-12);
  REQUIRE(std::abs(z[0][1] - z[1][2]) < 1e-12);

  s.geometry.neutral_offset_m = 1e3;  // neutral far away: coupling to it is nearly uniform
  const auto far = carson_zabc(0.3, 0.4, PhaseConfig::ABC, s);
  REQUIRE(std::abs(far[0][0] - far[1][1]) < 1e-3 * std::abs(far[0][0]));
  REQUIRE(std::abs(far[0][1] - far[0][2]) < 1e-3 * std::abs(far[0][1]));
}

TEST_CASE("positive sequence round trip", "[carson][property]") {
  Rng rng(37);
  for (int trial = 0; trial < 500; ++trial) {
    const double r1 = 0.1 + 1.0 * rng.uniform();
    const double x1 = r1 * (0.5 + 2.5 * rng.uniform());
    const Complex z1 = positive_sequence(carson_zabc(r1, x1, PhaseConfig::ABC));
    INFO("r1 " << r1 << " x1 " << x1 << " z1 " << z1);
    REQUIRE(z1.real() == Catch::Approx(r1).epsilon(0.10));
    REQUIRE(z1.imag() == Catch::Approx(x1).epsilon(0.10));
  }
}

TEST_CASE("invalid geometry and conductors", "[carson]") {
  CarsonSettings s;
  s.geometry = {0.3, 0.3, 1.2, 1.2};
  REQUIRE_THROWS_AS(carson_zabc(0.2, 0.3, PhaseConfig::ABC, s), std::invalid_argument);
  REQUIRE_THROWS_AS(carson_zabc(-0.2, 0.3, PhaseConfig::ABC), std::invalid_argument);
  s = {};
  s.earth_resistivity_ohm_m = 0.0;
  REQUIRE_THROWS_AS(carson_zabc(0.2, 0.3, PhaseConfig::ABC, s), std::invalid_argument);
}
