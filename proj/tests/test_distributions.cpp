#include <catch2/catch_amalgamated.hpp>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/distributions/weibull.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "moment_check.hpp"
#include "netgen/distributions.hpp"

using namespace netgen;
using namespace netgen::stats;
using netgen::testing::check_moments;
using netgen::testing::Moments;

namespace {

constexpr int kDraws = 100000;

template <class Dist>
Moments boost_moments(const Dist& d) {
  const double var = boost::math::variance(d);
  return {boost::math::mean(d), var, boost::math::kurtosis(d) * var * var};
}

template <class F>
std::vector<double> draw(int n, F&& f) {
  std::vector<double> xs;
  xs.reserve(n);
  for (int i = 0; i < n; ++i) xs.push_back(static_cast<double>(f()));
  return xs;
}

}  // namespace

TEST_CASE("rng streams are reproducible and substreams are key-addressed", "[rng]") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

  Rng parent(7);
  const Rng child_before = parent.substream("load");
  for (int i = 0; i < 10; ++i) parent.next_u64();
  Rng child_after = parent.substream("load");
  Rng copy = child_before;
  REQUIRE(copy.next_u64() == child_after.next_u64());
  REQUIRE(parent.substream(1).key() != parent.substream(2).key());
  REQUIRE(parent.substream("phase").key() != parent.substream("load").key());
}

TEST_CASE("degenerate categorical always returns the only supported index", "[categorical]") {
  Rng rng(1);
  const std::vector<double> p{1, 0, 0, 0, 0, 0, 0};
  for (int i = 0; i < 1000; ++i) REQUIRE(sample_categorical(rng, p) == 0);
}

TEST_CASE("gamma(4,4) sample mean within 3 standard errors of 1", "[gamma]") {
  Rng rng(11);
  const auto xs = draw(kDraws, [&] { return sample_gamma(rng, {4.0, 4.0}); });
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= kDraws;
  REQUIRE(std::abs(mean - 1.0) <= 3.0 * 0.5 / std::sqrt(double(kDraws)));
}

TEST_CASE("weibull with unit shape is exponential with mean equal to scale", "[weibull]") {
  Rng rng(12);
  const auto xs = draw(kDraws, [&] { return sample_weibull(rng, 1.0, 2.0); });
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= kDraws;
  REQUIRE(std::abs(mean - 2.0) <= 3.0 * 2.0 / std::sqrt(double(kDraws)));
}

TEST_CASE("every family passes a 4 standard error moment test", "[moments]") {
  Rng root(2024);

  SECTION("gamma, including shape below one") {
    for (auto p : {GammaParams{4.0, 4.0}, GammaParams{0.4, 2.0}, GammaParams{25.0, 0.5}}) {
      Rng rng = root.substream(static_cast<std::uint64_t>(p.shape * 100));
      const auto xs = draw(kDraws, [&] { return sample_gamma(rng, p); });
      const auto c = check_moments(xs, boost_moments(boost::math::gamma_distribution<>(p.shape, 1.0 / p.rate)));
      CAPTURE(p.shape, p.rate, c.mean_z, c.variance_z);
      REQUIRE(c.within(4.0));
    }
  }
  SECTION("weibull") {
    Rng rng = root.substream("weibull");
    const auto xs = draw(kDraws, [&] { return sample_weibull(rng, 1.5, 2.0); });
    const auto c = check_moments(xs, boost_moments(boost::math::weibull_distribution<>(1.5, 2.0)));
    CAPTURE(c.mean_z, c.variance_z);
    REQUIRE(c.within(4.0));
  }
  SECTION("beta") {
    Rng rng = root.substream("beta");
    const auto xs = draw(kDraws, [&] { return sample_beta(rng, 2.0, 5.0); });
    const auto c = check_moments(xs, boost_moments(boost::math::beta_distribution<>(2.0, 5.0)));
    REQUIRE(c.within(4.0));
  }
  SECTION("dirichlet marginals are beta") {
    Rng rng = root.substream("dirichlet");
    const std::vector<double> conc{2.0, 3.0, 5.0};
    std::vector<std::vector<double>> cols(3);
    for (int i = 0; i < kDraws; ++i) {
      const auto x = sample_dirichlet(rng, conc);
      for (int k = 0; k < 3; ++k) cols[k].push_back(x[k]);
    }
    for (int k = 0; k < 3; ++k) {
      const auto c = check_moments(cols[k], boost_moments(boost::math::beta_distribution<>(conc[k], 10.0 - conc[k])));
      CAPTURE(k, c.mean_z, c.variance_z);
      REQUIRE(c.within(4.0));
    }
  }
  SECTION("categorical index") {
    Rng rng = root.substream("categorical");
    const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
    const auto xs = draw(kDraws, [&] { return sample_categorical(rng, p); });
    double m[5] = {0, 0, 0, 0, 0};
    for (int k = 0; k < 4; ++k) {
      double pw = 1.0;
      for (double& mk : m) {
        mk += p[k] * pw;
        pw *= k;
      }
    }
    const auto c = check_moments(xs, netgen::testing::from_raw(m[1], m[2], m[3], m[4]));
    REQUIRE(c.within(4.0));
  }
  SECTION("bernoulli") {
    Rng rng = root.substream("bernoulli");
    const double p = 0.3;
    const auto xs = draw(kDraws, [&] { return sample_bernoulli(rng, p) ? 1.0 : 0.0; });
    const auto c = check_moments(xs, netgen::testing::from_raw(p, p, p, p));
    REQUIRE(c.within(4.0));
  }
  SECTION("negative binomial, mean/dispersion form") {
    for (auto [mu, disp] : {std::pair{2.0, 1.0}, std::pair{15.0, 3.0}, std::pair{0.5, 0.2}}) {
      Rng rng = root.substream(static_cast<std::uint64_t>(mu * 1000 + disp));
      const auto xs = draw(kDraws, [&] { return sample_negbinomial(rng, mu, disp); });
      const auto c = check_moments(
          xs, boost_moments(boost::math::negative_binomial_distribution<>(disp, disp / (disp + mu))));
      CAPTURE(mu, disp, c.mean_z, c.variance_z);
      REQUIRE(c.within(4.0));
    }
  }
  SECTION("poisson on both sides of the algorithm switch") {
    for (double lambda : {3.0, 40.0}) {
      Rng rng = root.substream(static_cast<std::uint64_t>(lambda));
      const auto xs = draw(kDraws, [&] { return sample_poisson(rng, lambda); });
      const auto c = check_moments(xs, {lambda, lambda, lambda * (1.0 + 3.0 * lambda)});
      CAPTURE(lambda, c.mean_z, c.variance_z);
      REQUIRE(c.within(4.0));
    }
  }
  SECTION("half-normal") {
    Rng rng = root.substream("halfnormal");
    const double s = 1.7;
    const auto xs = draw(kDraws, [&] { return sample_halfnormal(rng, s); });
    const double m1 = s * std::sqrt(2.0 / std::numbers::pi);
    const double m3 = 2.0 * s * s * s * std::sqrt(2.0 / std::numbers::pi);
    const auto c = check_moments(xs, netgen::testing::from_raw(m1, s * s, m3, 3.0 * s * s * s * s));
    REQUIRE(c.within(4.0));
  }
  SECTION("truncated normal, near and far truncation") {
    for (auto [mu, sigma] : {std::pair{1.0, 2.0}, std::pair{-3.0, 1.0}}) {
      Rng rng = root.substream(static_cast<std::uint64_t>(mu * 10 + 100));
      const auto xs = draw(kDraws, [&] { return sample_truncnormal(rng, mu, sigma, 0.0); });
      const auto truth = netgen::testing::quadrature_moments(
          [&](double x) { return std::exp(logpdf_truncnormal(x, mu, sigma, 0.0)); }, 0.0, mu + 12.0 * sigma + 10.0);
      const auto c = check_moments(xs, truth);
      CAPTURE(mu, sigma, c.mean_z, c.variance_z);
      REQUIRE(c.within(4.0));
    }
  }
  SECTION("uniform") {
    Rng rng = root.substream("uniform");
    const auto xs = draw(kDraws, [&] { return sample_uniform(rng, -1.0, 3.0); });
    const auto c = check_moments(xs, {1.0, 16.0 / 12.0, std::pow(4.0, 4) / 80.0});
    REQUIRE(c.within(4.0));
  }
}

TEST_CASE("dirichlet draws lie on the simplex", "[dirichlet]") {
  Rng rng(5);
  const std::vector<double> conc{0.3, 1.0, 2.0, 0.01};
  for (int i = 0; i < 10000; ++i) {
    const auto x = sample_dirichlet(rng, conc);
    double total = 0.0;
    for (double v : x) {
      REQUIRE(v >= 0.0);
      total += v;
    }
    REQUIRE(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("truncated normal never falls below its bound", "[truncnormal]") {
  Rng rng(6);
  for (int i = 0; i < 100000; ++i) REQUIRE(sample_truncnormal(rng, -4.0, 0.5, 0.0) >= 0.0);
}

TEST_CASE("mixture sampling", "[mixture]") {
  Rng rng(8);
  SECTION("degenerate weights behave as the first component") {
    GammaMixture m{{{2.0, 1.0}, {3.0, 1.0}, {9.0, 1.0}}, {1.0, 0.0, 0.0}};
    Rng a(99);
    Rng b(99);
    for (int i = 0; i < 100; ++i) {
      const double x = sample_mixture(a, m);
      const std::size_t k = sample_categorical(b, m.weights);
      REQUIRE(k == 0);
      REQUIRE(x == sample_gamma(b, m.components[0]));
    }
  }
  SECTION("mean follows the law of total expectation") {
    GammaMixture m{{{4.0, 4.0}, {9.0, 3.0}}, {0.5, 0.5}};
    const auto xs = draw(kDraws, [&] { return sample_mixture(rng, m); });
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= kDraws;
    // E = 2, Var = E[Var|k] + Var[E|k] = (0.25 + 1)/2 + 1 = 1.625
    REQUIRE(std::abs(mean - 2.0) <= 3.0 * std::sqrt(1.625 / kDraws));
  }
  SECTION("logpdf dominates the best weighted component") {
    GammaMixture m{{{2.0, 4.0}, {5.0, 2.0}, {20.0, 4.0}}, {0.2, 0.5, 0.3}};
    for (double x = 0.05; x < 10.0; x += 0.05) {
      double best = neg_inf;
      for (const auto& c : m.components) best = std::max(best, logpdf_gamma(x, c));
      REQUIRE(logpdf_mixture(x, m) >= best + std::log(0.2) - 1e-12);
    }
  }
  SECTION("invalid weights are rejected") {
    GammaMixture bad{{{2.0, 1.0}, {3.0, 1.0}}, {0.5, 0.4}};
    REQUIRE_THROWS_AS(bad.validate(), ParameterError);
  }
}

TEST_CASE("log densities", "[logpdf]") {
  REQUIRE(logpdf_gamma(1.0, {1.0, 1.0}) == Catch::Approx(-1.0).margin(1e-14));
  const std::vector<double> p{0.2, 0.3, 0.5};
  REQUIRE(logpmf_categorical(1, p) == Catch::Approx(std::log(0.3)));
  REQUIRE(logpdf_truncnormal(-0.1, 0.0, 1.0, 0.0) == neg_inf);
  REQUIRE(logpdf_truncnormal(0.5, 0.0, 1.0, 0.0) ==
          Catch::Approx(logpdf_normal(0.5, 0.0, 1.0) + std::log(2.0)));

  SECTION("gamma(4,4) density integrates to one (trapezoid oracle)") {
    const int steps = 200000;
    const double a = 0.0;
    const double b = 12.0;
    const double h = (b - a) / steps;
    double total = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
      total += w * std::exp(logpdf_gamma(a + i * h, {4.0, 4.0}));
    }
    REQUIRE(std::abs(total * h - 1.0) <= 1e-3);
  }
  SECTION("negative binomial pmf sums to one and matches the zero-probability formula") {
    double total = 0.0;
    for (std::uint64_t k = 0; k < 2000; ++k) total += std::exp(logpmf_negbinomial(k, 2.0, 1.0));
    REQUIRE(total == Catch::Approx(1.0).epsilon(1e-10));
    REQUIRE(std::exp(logpmf_negbinomial(0, 0.001, 1.0)) == Catch::Approx(std::pow(1.0 / 1.001, 1.0)));
  }
  SECTION("weibull and beta against boost") {
    boost::math::weibull_distribution<> w(1.5, 2.0);
    boost::math::beta_distribution<> be(2.0, 5.0);
    for (double x : {0.1, 0.7, 1.9, 4.0}) {
      REQUIRE(std::exp(logpdf_weibull(x, 1.5, 2.0)) == Catch::Approx(boost::math::pdf(w, x)));
    }
    for (double x : {0.05, 0.3, 0.9}) {
      REQUIRE(std::exp(logpdf_beta(x, 2.0, 5.0)) == Catch::Approx(boost::math::pdf(be, x)));
    }
  }
  SECTION("dirichlet of the unit concentration is flat") {
    const std::vector<double> conc{1.0, 1.0, 1.0};
    const std::vector<double> x{0.2, 0.3, 0.5};
    REQUIRE(logpdf_dirichlet(x, conc) == Catch::Approx(std::log(2.0)));
  }
  SECTION("far lower tail of the normal cdf stays finite") {
    REQUIRE(std::isfinite(log_normal_cdf(-50.0)));
    REQUIRE(log_normal_cdf(-29.9) == Catch::Approx(log_normal_cdf(-30.1)).epsilon(0.02));
  }
}

TEST_CASE("invalid parameters raise ParameterError", "[errors]") {
  Rng rng(3);
  REQUIRE_THROWS_AS(sample_gamma(rng, {0.0, 1.0}), ParameterError);
  REQUIRE_THROWS_AS(sample_gamma(rng, {1.0, -1.0}), ParameterError);
  REQUIRE_THROWS_AS(sample_weibull(rng, 1.0, 0.0), ParameterError);
  REQUIRE_THROWS_AS(sample_halfnormal(rng, -1.0), ParameterError);
  REQUIRE_THROWS_AS(sample_negbinomial(rng, 0.0, 1.0), ParameterError);
  REQUIRE_THROWS_AS(sample_truncnormal(rng, 0.0, 0.0, 0.0), ParameterError);
  REQUIRE_THROWS_AS(logpdf_gamma(1.0, {-1.0, 1.0}), ParameterError);
}
