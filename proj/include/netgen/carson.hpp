#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "netgen/phase_model.hpp"

/**
 * @file carson.hpp
 * @brief Phase impedance matrices from modified Carson's equations with Kron
 * reduction of a single grounded neutral. SI units: metres, ohm per km.
 */

namespace netgen {

using Complex = std::complex<double>;
using PhaseMatrix = std::array<std::array<Complex, 3>, 3>;

inline constexpr double kMu0 = 4e-7 * std::numbers::pi;
inline constexpr double kMetresPerFoot = 0.3048;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct ConductorData {
  double gmr_m = 0.00787;
  double r_ohm_per_km = 0.19;
};

/// Phase spacing and neutral placement. The neutral sits `neutral_offset_m` from
/// the midpoint of a-c, perpendicular to the a-c line.
struct LineGeometry {
  double d_ab = 0.6;
  double d_bc = 0.6;
  double d_ac = 1.2;
  double neutral_offset_m = 1.2;
};

enum class ConductorMode {
  derived,  ///< phase conductor from the sampled r1 and x1 (r = r1, GMR matching x1 at the geometry's GMD)
  fixed,    ///< phase conductor from CarsonSettings::phase
};

struct CarsonSettings {
  double frequency_hz = 60.0;
  double earth_resistivity_ohm_m = 100.0;
  LineGeometry geometry;
  ConductorData phase{0.00787, 0.19};
  ConductorData neutral{0.00248, 0.368};
  ConductorMode mode = ConductorMode::derived;

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive");
    };
    positive(frequency_hz, "frequency");
    positive(earth_resistivity_ohm_m, "earth resistivity");
    positive(geometry.d_ab, "d_ab");
    positive(geometry.d_bc, "d_bc");
    positive(geometry.d_ac, "d_ac");
    positive(geometry.neutral_offset_m, "neutral offset");
    positive(phase.gmr_m, "phase conductor GMR");
    positive(neutral.gmr_m, "neutral GMR");
    if (phase.r_ohm_per_km < 0.0 || neutral.r_ohm_per_km < 0.0) throw std::invalid_argument("conductor resistance must be >= 0");
  }
};

/// Conductor coordinates a, b, c, n for the configured spacing.
inline std::array<Point, 4> conductor_positions(const LineGeometry& g) {
  const double xb = (g.d_ab * g.d_ab - g.d_bc * g.d_bc + g.d_ac * g.d_ac) / (2.0 * g.d_ac);
  const double yb2 = g.d_ab * g.d_ab - xb * xb;
  if (yb2 < -1e-12 * g.d_ab * g.d_ab) throw std::invalid_argument("phase spacings violate the triangle inequality");
  const Point a{0.0, 0.0};
  const Point b{xb, std::sqrt(std::max(yb2, 0.0))};
  const Point c{g.d_ac, 0.0};
  const Point n{g.d_ac / 2.0, b.y + g.neutral_offset_m};
  return {a, b, c, n};
}

inline double distance(Point p, Point q) { return std::hypot(p.x - q.x, p.y - q.y); }

/// Geometric mean distance between the phase conductors.
inline double geometric_mean_distance(const LineGeometry& g) { return std::cbrt(g.d_ab * g.d_bc * g.d_ac); }

/// Modified Carson primitive impedance matrix (ohm/km) for conductors at `pos`.
inline std::vector<Complex> carson_primitive(std::span<const Point> pos, std::span<const ConductorData> cond,
                                             double frequency_hz, double resistivity) {
  const std::size_t n = pos.size();
  if (cond.size() != n) throw std::invalid_argument("conductor data and positions differ in size");
  const double per_km = 1000.0;
  const double real_earth = std::numbers::pi * std::numbers::pi * frequency_hz * 1e-7 * per_km;  // omega mu0 / 8
  const double reactive = frequency_hz * kMu0 * per_km;                                           // omega mu0 / (2 pi)
  const double constant = 7.6786 - std::log(1.0 / kMetresPerFoot) + 0.5 * std::log(resistivity / frequency_hz);
  std::vector<Complex> z(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(cond[i].gmr_m > 0.0)) throw std::invalid_argument("conductor GMR must be positive");
    z[i * n + i] = {cond[i].r_ohm_per_km + real_earth, reactive * (std::log(1.0 / cond[i].gmr_m) + constant)};
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance(pos[i], pos[j]);
      if (!(d > 0.0)) throw std::invalid_argument("conductors must not coincide");
      z[i * n + j] = z[j * n + i] = {real_earth, reactive * (std::log(1.0 / d) + constant)};
    }
  }
  return z;
}

/// Eliminate the last row/column (grounded neutral): Z_ij - Z_in Z_nj / Z_nn.
inline std::vector<Complex> kron_reduce_last(std::span<const Complex> z, std::size_t n) {
  const std::size_t m = n - 1;
  std::vector<Complex> out(m * m);
  const Complex znn = z[m * n + m];
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = z[i * n + j] - z[i * n + m] * z[m * n + j] / znn;
  }
  return out;
}

/// Phase conductor whose positive-sequence impedance at the geometry's GMD equals r1 + j x1.
inline ConductorData equivalent_conductor(double r1_ohm_per_km, double x1_ohm_per_km, const LineGeometry& g,
                                          double frequency_hz) {
  const double reactive = frequency_hz * kMu0 * 1000.0;
  return {geometric_mean_distance(g) * std::exp(-x1_ohm_per_km / reactive), r1_ohm_per_km};
}

/**
 * Phase impedance (ohm/km) of a line carrying `config`'s phases. Only the active
 * conductors and the neutral enter the primitive matrix; after Kron reduction
 * the result is placed into the 3x3 container with absent phases zero.
 */
inline PhaseMatrix carson_zabc(double r1_ohm_per_km, double x1_ohm_per_km, PhaseConfig config,
                               const CarsonSettings& settings = {}) {
  settings.validate();
  if (settings.mode == ConductorMode::derived && (!(r1_ohm_per_km > 0.0) || !(x1_ohm_per_km > 0.0))) {
    throw std::invalid_argument("positive-sequence r1 and x1 must be positive");
  }
  const auto all = conductor_positions(settings.geometry);
  const ConductorData phase = settings.mode == ConductorMode::derived
                                  ? equivalent_conductor(r1_ohm_per_km, x1_ohm_per_km, settings.geometry, settings.frequency_hz)
                                  : settings.phase;
  std::vector<Point> pos;
  std::vector<ConductorData> cond;
  std::vector<int> phases;
  for (int j = 0; j < 3; ++j) {
    if (!has_phase(config, j)) continue;
    pos.push_back(all[static_cast<std::size_t>(j)]);
    cond.push_back(phase);
    phases.push_back(j);
  }
  pos.push_back(all[3]);
  cond.push_back(settings.neutral);
  const auto prim = carson_primitive(pos, cond, settings.frequency_hz, settings.earth_resistivity_ohm_m);
  const auto reduced = kron_reduce_last(prim, pos.size());
  PhaseMatrix z{};
  const std::size_t m = phases.size();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) z[phases[i]][phases[j]] = reduced[i * m + j];
  }
  return z;
}

/// Positive-sequence impedance of a transposed line: mean self minus mean mutual impedance.
inline Complex positive_sequence(const PhaseMatrix& z) {
  const Complex self = (z[0][0] + z[1][1] + z[2][2]) / 3.0;
  const Complex mutual = (z[0][1] + z[1][2] + z[0][2]) / 3.0;
  return self - mutual;
}

}  // namespace netgen
