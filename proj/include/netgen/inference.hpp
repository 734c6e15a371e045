#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "netgen/distributions.hpp"
#include "netgen/rng.hpp"

/**
 * @file inference.hpp
 * @brief Posterior fitting by adaptive random-walk Metropolis-within-Gibbs.
 *
 * Parameters are declared in a ParamSpace with a support; the sampler works in
 * the unconstrained image of that support and adds the log-Jacobian of the
 * inverse transform. Each named block is updated in turn with a multivariate
 * Gaussian proposal whose scale follows a Robbins-Monro recursion toward the
 * target acceptance rate and whose shape is re-estimated from warm-up draws.
 */

namespace netgen::inference {

class InitializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Support {
  unbounded,
  positive,          ///< log transform
  unit_interval,     ///< logit transform
  simplex,           ///< stick-breaking, K values from K-1 free coordinates
  ordered_positive,  ///< log of the first value and of each positive increment
};

/// Location of a parameter inside the constrained vector handed to the model.
struct ParamRef {
  std::size_t offset = 0;
  std::size_t size = 1;

  [[nodiscard]] double operator()(std::span<const double> x, std::size_t i = 0) const { return x[offset + i]; }
  [[nodiscard]] std::span<const double> view(std::span<const double> x) const { return x.subspan(offset, size); }
};

namespace detail {

inline double logistic(double u) {
  return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

inline double log_logistic(double u) { return u >= 0.0 ? -std::log1p(std::exp(-u)) : u - std::log1p(std::exp(u)); }

}  // namespace detail

class ParamSpace {
 public:
  struct Entry {
    std::string name;
    Support support = Support::unbounded;
    std::size_t size = 1;
    std::size_t offset = 0;       ///< into the constrained vector
    std::size_t free_offset = 0;  ///< into the unconstrained vector
    std::size_t free_size = 1;
    std::size_t block = 0;
  };

  /// Declare a parameter. Parameters sharing a `block` name are updated jointly.
  ParamRef add(std::string name, Support support, std::size_t size = 1, std::string block = {}) {
    if (size == 0) throw std::invalid_argument("parameter '" + name + "' has zero size");
    if (support == Support::simplex && size < 2) {
      throw std::invalid_argument("simplex parameter '" + name + "' needs at least two entries");
    }
    for (const auto& e : entries_) {
      if (e.name == name) throw std::invalid_argument("duplicate parameter '" + name + "'");
    }
    if (block.empty()) block = name;
    Entry e{std::move(name), support, size, dim_, free_dim_, support == Support::simplex ? size - 1 : size, 0};
    const auto it = std::find(block_names_.begin(), block_names_.end(), block);
    if (it == block_names_.end()) {
      e.block = block_names_.size();
      block_names_.push_back(std::move(block));
      block_free_.emplace_back();
    } else {
      e.block = static_cast<std::size_t>(it - block_names_.begin());
    }
    for (std::size_t i = 0; i < e.free_size; ++i) block_free_[e.block].push_back(e.free_offset + i);
    dim_ += e.size;
    free_dim_ += e.free_size;
    entries_.push_back(e);
    return {e.offset, e.size};
  }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t free_dim() const noexcept { return free_dim_; }
  [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }
  [[nodiscard]] const std::vector<std::string>& block_names() const noexcept { return block_names_; }
  [[nodiscard]] const std::vector<std::vector<std::size_t>>& block_coordinates() const noexcept { return block_free_; }

  [[nodiscard]] const Entry& entry(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return e;
    }
    throw std::out_of_range("no parameter named '" + name + "'");
  }

  [[nodiscard]] ParamRef ref(const std::string& name) const {
    const auto& e = entry(name);
    return {e.offset, e.size};
  }

  /// One name per constrained scalar: "name" for scalars, "name[i]" otherwise.
  [[nodiscard]] std::vector<std::string> scalar_names() const {
    std::vector<std::string> names;
    names.reserve(dim_);
    for (const auto& e : entries_) {
      if (e.size == 1) {
        names.push_back(e.name);
      } else {
        for (std::size_t i = 0; i < e.size; ++i) names.push_back(e.name + "[" + std::to_string(i) + "]");
      }
    }
    return names;
  }

  /// Map free coordinates to the constrained vector; returns log|det J| of the map.
  double to_constrained(std::span<const double> u, std::span<double> x) const {
    double log_jac = 0.0;
    for (const auto& e : entries_) {
      const auto uu = u.subspan(e.free_offset, e.free_size);
      auto xx = x.subspan(e.offset, e.size);
      switch (e.support) {
        case Support::unbounded:
          std::copy(uu.begin(), uu.end(), xx.begin());
          break;
        case Support::positive:
          for (std::size_t i = 0; i < e.size; ++i) {
            xx[i] = std::exp(uu[i]);
            log_jac += uu[i];
          }
          break;
        case Support::unit_interval:
          for (std::size_t i = 0; i < e.size; ++i) {
            xx[i] = detail::logistic(uu[i]);
            log_jac += detail::log_logistic(uu[i]) + detail::log_logistic(-uu[i]);
          }
          break;
        case Support::ordered_positive: {
          double acc = 0.0;
          for (std::size_t i = 0; i < e.size; ++i) {
            acc += std::exp(uu[i]);
            xx[i] = acc;
            log_jac += uu[i];
          }
          break;
        }
        case Support::simplex: {
          const std::size_t k = e.size;
          double remaining = 1.0;
          for (std::size_t i = 0; i + 1 < k; ++i) {
            const double shifted = uu[i] - std::log(static_cast<double>(k - 1 - i));
            const double z = detail::logistic(shifted);
            xx[i] = remaining * z;
            log_jac += detail::log_logistic(shifted) + detail::log_logistic(-shifted) + std::log(remaining);
            remaining -= xx[i];
          }
          xx[k - 1] = std::max(remaining, 0.0);
          break;
        }
      }
    }
    return log_jac;
  }

  /// Inverse map; throws std::domain_error if x lies outside the support.
  void to_unconstrained(std::span<const double> x, std::span<double> u) const {
    for (const auto& e : entries_) {
      const auto xx = x.subspan(e.offset, e.size);
      auto uu = u.subspan(e.free_offset, e.free_size);
      switch (e.support) {
        case Support::unbounded:
          std::copy(xx.begin(), xx.end(), uu.begin());
          break;
        case Support::positive:
          for (std::size_t i = 0; i < e.size; ++i) {
            require(xx[i] > 0.0, e);
            uu[i] = std::log(xx[i]);
          }
          break;
        case Support::unit_interval:
          for (std::size_t i = 0; i < e.size; ++i) {
            require(xx[i] > 0.0 && xx[i] < 1.0, e);
            uu[i] = std::log(xx[i] / (1.0 - xx[i]));
          }
          break;
        case Support::ordered_positive: {
          double prev = 0.0;
          for (std::size_t i = 0; i < e.size; ++i) {
            require(xx[i] > prev, e);
            uu[i] = std::log(xx[i] - prev);
            prev = xx[i];
          }
          break;
        }
        case Support::simplex: {
          const std::size_t k = e.size;
          double total = 0.0;
          for (double v : xx) {
            require(v > 0.0, e);
            total += v;
          }
          require(std::abs(total - 1.0) < 1e-9, e);
          double remaining = 1.0;
          for (std::size_t i = 0; i + 1 < k; ++i) {
            const double z = xx[i] / remaining;
            uu[i] = std::log(z / (1.0 - z)) + std::log(static_cast<double>(k - 1 - i));
            remaining -= xx[i];
          }
          break;
        }
      }
    }
  }

  [[nodiscard]] bool in_support(std::span<const double> x) const {
    try {
      std::vector<double> u(free_dim_);
      to_unconstrained(x, u);
      return true;
    } catch (const std::domain_error&) {
      return false;
    }
  }

 private:
  static void require(bool ok, const Entry& e) {
    if (!ok) throw std::domain_error("value of '" + e.name + "' lies outside its support");
  }

  std::vector<Entry> entries_;
  std::vector<std::string> block_names_;
  std::vector<std::vector<std::size_t>> block_free_;
  std::size_t dim_ = 0;
  std::size_t free_dim_ = 0;
};

/// Log posterior density (up to a constant) over the constrained vector.
using LogDensity = std::function<double(std::span<const double>)>;

struct FitConfig {
  int chains = 4;
  int warmup = 2000;
  int keep = 2000;  ///< post-warm-up iterations per chain
  int thin = 4;     ///< every thin-th kept iteration is stored
  double target_accept = 0.35;
  double init_jitter = 0.1;  ///< sd of the per-chain perturbation in free coordinates
  double rhat_threshold = 1.05;
  std::uint64_t seed = 1;
  bool parallel = true;

  [[nodiscard]] std::size_t draws_per_chain() const { return static_cast<std::size_t>(keep / thin); }
  void validate() const {
    if (chains < 1 || warmup < 0 || keep < 1 || thin < 1) throw std::invalid_argument("invalid fit configuration");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw std::invalid_argument("target acceptance must lie in (0,1)");
    if (static_cast<std::size_t>(chains) * draws_per_chain() < kMinDraws) {
      throw std::invalid_argument("fit configuration keeps fewer than " + std::to_string(kMinDraws) + " pooled draws");
    }
  }

  static constexpr std::size_t kMinDraws = 500;
};

struct BlockStats {
  std::string name;
  double acceptance = 0.0;
};

/// Pooled post-warm-up draws (chain-major rows) with convergence diagnostics.
struct PosteriorEnsemble {
  std::vector<std::string> names;
  std::vector<double> draws;  ///< row-major, size() x names.size()
  int chains = 0;
  std::size_t draws_per_chain = 0;
  std::vector<double> rhat;
  std::vector<double> ess;
  std::vector<BlockStats> acceptance;
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t columns() const noexcept { return names.size(); }
  [[nodiscard]] std::size_t size() const noexcept { return names.empty() ? 0 : draws.size() / names.size(); }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return std::span<const double>(draws).subspan(i * columns(), columns());
  }

  [[nodiscard]] std::size_t column_index(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::out_of_range("ensemble has no column '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
  }

  [[nodiscard]] std::vector<double> column(std::size_t c) const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = draws[i * columns() + c];
    return out;
  }
  [[nodiscard]] std::vector<double> column(const std::string& name) const { return column(column_index(name)); }

  [[nodiscard]] double mean(const std::string& name) const {
    const auto col = column(name);
    return std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
  }

  [[nodiscard]] double max_rhat() const {
    double m = 1.0;
    for (double r : rhat) {
      if (std::isfinite(r)) m = std::max(m, r);
    }
    return m;
  }
};

// ---------------------------------------------------------------------------
// Diagnostics

/// Split-chain potential scale reduction for one column of chain-major draws.
inline double split_rhat(std::span<const double> values, int chains, std::size_t per_chain) {
  const std::size_t half = per_chain / 2;
  if (half < 2) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> means;
  std::vector<double> vars;
  for (int c = 0; c < chains; ++c) {
    for (int part = 0; part < 2; ++part) {
      const auto seq = values.subspan(c * per_chain + part * half, half);
      const double m = std::accumulate(seq.begin(), seq.end(), 0.0) / half;
      double ss = 0.0;
      for (double v : seq) ss += (v - m) * (v - m);
      means.push_back(m);
      vars.push_back(ss / (half - 1));
    }
  }
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / vars.size();
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
  double b = 0.0;
  for (double m : means) b += (m - grand) * (m - grand);
  b *= static_cast<double>(half) / (means.size() - 1);
  if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (half - 1.0) / half * w + b / half;
  return std::sqrt(var_plus / w);
}

/// Multi-chain effective sample size with Geyer's initial positive sequence.
inline double effective_sample_size(std::span<const double> values, int chains, std::size_t per_chain) {
  const std::size_t n = per_chain;
  if (n < 4) return static_cast<double>(chains * n);
  std::vector<double> means(chains);
  std::vector<double> vars(chains);
  for (int c = 0; c < chains; ++c) {
    const auto seq = values.subspan(c * n, n);
    means[c] = std::accumulate(seq.begin(), seq.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : seq) ss += (v - means[c]) * (v - means[c]);
    vars[c] = ss / (n - 1);
  }
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / chains;
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / chains;
  double b = 0.0;
  for (double m : means) b += (m - grand) * (m - grand);
  b = chains > 1 ? b * n / (chains - 1) : 0.0;
  const double var_plus = (n - 1.0) / n * w + b / n;
  if (var_plus <= 0.0) return static_cast<double>(chains * n);

  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (int c = 0; c < chains; ++c) {
      const auto seq = values.subspan(c * n, n);
      double s = 0.0;
      for (std::size_t t = 0; t + lag < n; ++t) s += (seq[t] - means[c]) * (seq[t + lag] - means[c]);
      acov += s / n;
    }
    acov /= chains;
    return 1.0 - (w - acov) / var_plus;
  };
  double tau = -1.0;
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    const double pair = rho(lag) + rho(lag + 1);
    if (pair < 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(chains * n)));
  return chains * n / tau;
}

inline void compute_diagnostics(PosteriorEnsemble& ens, double rhat_threshold = 1.05) {
  ens.rhat.assign(ens.columns(), 1.0);
  ens.ess.assign(ens.columns(), 0.0);
  for (std::size_t c = 0; c < ens.columns(); ++c) {
    const auto col = ens.column(c);
    ens.rhat[c] = split_rhat(col, ens.chains, ens.draws_per_chain);
    ens.ess[c] = effective_sample_size(col, ens.chains, ens.draws_per_chain);
  }
  std::erase_if(ens.warnings, [](const std::string& w) { return w.rfind("convergence:", 0) == 0; });
  for (std::size_t c = 0; c < ens.columns(); ++c) {
    if (std::isfinite(ens.rhat[c]) && ens.rhat[c] > rhat_threshold) {
      ens.warnings.push_back("convergence: R-hat " + std::to_string(ens.rhat[c]) + " for '" + ens.names[c] + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// Sampler

namespace detail {

/// Lower Cholesky factor of a small dense SPD matrix; returns false if not SPD.
inline bool cholesky(std::vector<double>& a, std::size_t d) {
  for (std::size_t j = 0; j < d; ++j) {
    double s = a[j * d + j];
    for (std::size_t k = 0; k < j; ++k) s -= a[j * d + k] * a[j * d + k];
    if (!(s > 0.0)) return false;
    a[j * d + j] = std::sqrt(s);
    for (std::size_t i = j + 1; i < d; ++i) {
      double t = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) t -= a[i * d + k] * a[j * d + k];
      a[i * d + j] = t / a[j * d + j];
    }
    for (std::size_t k = j + 1; k < d; ++k) a[j * d + k] = 0.0;
  }
  return true;
}

struct BlockState {
  std::vector<std::size_t> coords;
  std::vector<double> chol;  ///< d x d lower factor of the proposal shape
  double log_scale = 0.0;
  double accepted = 0.0;
  double proposed = 0.0;
};

struct ChainResult {
  std::vector<double> draws;  ///< draws_per_chain x dim
  std::vector<double> acceptance;
};

inline ChainResult run_chain(const ParamSpace& space, const LogDensity& log_density, std::vector<double> u,
                             const FitConfig& cfg, Rng rng) {
  const std::size_t free_dim = space.free_dim();
  std::vector<double> x(space.dim());
  auto target = [&](const std::vector<double>& point) {
    const double log_jac = space.to_constrained(point, x);
    for (double v : x) {
      if (!std::isfinite(v)) return stats::neg_inf;
    }
    double lp = stats::neg_inf;
    try {
      lp = log_density(x);
    } catch (const std::invalid_argument&) {
      // transform under/overflow produced parameters the model rejects
    } catch (const std::domain_error&) {
    }
    return std::isfinite(lp) ? lp + log_jac : stats::neg_inf;
  };

  std::vector<BlockState> blocks;
  for (const auto& coords : space.block_coordinates()) {
    BlockState b;
    b.coords = coords;
    const std::size_t d = coords.size();
    b.chol.assign(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) b.chol[i * d + i] = 1.0;
    b.log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)) * 0.1);
    blocks.push_back(std::move(b));
  }

  double current = target(u);
  std::vector<double> proposal(u);
  std::vector<double> z;

  const std::size_t window_start = static_cast<std::size_t>(cfg.warmup) / 4;
  std::vector<double> history;
  if (cfg.warmup > 0) history.reserve(static_cast<std::size_t>(cfg.warmup) * free_dim);
  std::size_t adapt_clock = 0;

  auto refit_shape = [&](std::size_t upto) {
    const std::size_t rows = upto - window_start;
    if (rows < 20) return;
    for (auto& b : blocks) {
      const std::size_t d = b.coords.size();
      std::vector<double> mean(d, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < d; ++i) mean[i] += history[(window_start + r) * free_dim + b.coords[i]];
      }
      for (double& m : mean) m /= rows;
      std::vector<double> cov(d * d, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* row = &history[(window_start + r) * free_dim];
        for (std::size_t i = 0; i < d; ++i) {
          for (std::size_t j = 0; j <= i; ++j) {
            cov[i * d + j] += (row[b.coords[i]] - mean[i]) * (row[b.coords[j]] - mean[j]);
          }
        }
      }
      double trace = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          cov[i * d + j] /= (rows - 1);
          cov[j * d + i] = cov[i * d + j];
        }
        trace += cov[i * d + i];
      }
      if (!(trace > 0.0)) continue;
      for (std::size_t i = 0; i < d; ++i) cov[i * d + i] += 1e-6 * trace / d + 1e-12;
      if (cholesky(cov, d)) {
        b.chol = std::move(cov);
        b.log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)));
      }
    }
    adapt_clock = 0;
  };

  const std::size_t total = static_cast<std::size_t>(cfg.warmup) + static_cast<std::size_t>(cfg.keep);
  ChainResult result;
  result.draws.reserve(cfg.draws_per_chain() * space.dim());
  for (std::size_t t = 0; t < total; ++t) {
    const bool warming = t < static_cast<std::size_t>(cfg.warmup);
    if (warming && (t == static_cast<std::size_t>(cfg.warmup) / 2 || t == 3 * static_cast<std::size_t>(cfg.warmup) / 4)) {
      refit_shape(t);
    }
    if (!warming && t == static_cast<std::size_t>(cfg.warmup)) {
      for (auto& b : blocks) b.accepted = b.proposed = 0.0;
    }
    const double gain = warming ? std::pow(static_cast<double>(adapt_clock + 1), -0.6) : 0.0;
    ++adapt_clock;
    for (auto& b : blocks) {
      const std::size_t d = b.coords.size();
      z.resize(d);
      for (double& v : z) v = rng.normal();
      const double scale = std::exp(b.log_scale);
      proposal = u;
      for (std::size_t i = 0; i < d; ++i) {
        double step = 0.0;
        for (std::size_t j = 0; j <= i; ++j) step += b.chol[i * d + j] * z[j];
        proposal[b.coords[i]] += scale * step;
      }
      const double candidate = target(proposal);
      const double log_ratio = candidate - current;
      const double accept_prob = std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
      if (rng.uniform() < accept_prob) {
        u.swap(proposal);
        current = candidate;
        b.accepted += 1.0;
      }
      b.proposed += 1.0;
      if (warming) b.log_scale += gain * (accept_prob - cfg.target_accept);
    }
    if (warming) {
      history.insert(history.end(), u.begin(), u.end());
    } else {
      const std::size_t kept = t - static_cast<std::size_t>(cfg.warmup);
      if ((kept + 1) % static_cast<std::size_t>(cfg.thin) == 0) {
        space.to_constrained(u, x);
        result.draws.insert(result.draws.end(), x.begin(), x.end());
      }
    }
  }
  for (const auto& b : blocks) result.acceptance.push_back(b.proposed > 0 ? b.accepted / b.proposed : 0.0);
  return result;
}

}  // namespace detail

/**
 * Fit a posterior. `init` is a constrained starting point that must lie in the
 * support with a finite log density; every chain starts from a jittered copy.
 */
inline PosteriorEnsemble fit(const LogDensity& log_density, const ParamSpace& space, std::span<const double> init,
                             const FitConfig& cfg) {
  cfg.validate();
  if (init.size() != space.dim()) throw InitializationError("initial point has the wrong dimension");
  std::vector<double> u0(space.free_dim());
  try {
    space.to_unconstrained(init, u0);
  } catch (const std::domain_error& e) {
    throw InitializationError(std::string("initial point outside support: ") + e.what());
  }
  const double lp0 = log_density(init);
  if (!std::isfinite(lp0)) throw InitializationError("log posterior is not finite at the initial point");

  const Rng root(cfg.seed);
  std::vector<detail::ChainResult> results(cfg.chains);
  std::vector<std::exception_ptr> failures(cfg.chains);
  auto run_one = [&](int c) {
    Rng rng = root.substream(static_cast<std::uint64_t>(c));
    std::vector<double> u = u0;
    std::vector<double> x(space.dim());
    double jitter = cfg.init_jitter;
    for (int attempt = 0; attempt < 50 && jitter > 0.0; ++attempt) {
      std::vector<double> trial = u0;
      for (double& v : trial) v += jitter * rng.normal();
      const double lj = space.to_constrained(trial, x);
      if (std::isfinite(log_density(x) + lj)) {
        u = std::move(trial);
        break;
      }
      jitter *= 0.5;
    }
    results[c] = detail::run_chain(space, log_density, std::move(u), cfg, rng.substream("mcmc"));
  };
  auto run = [&](int c) {
    try {
      run_one(c);
    } catch (...) {
      failures[c] = std::current_exception();
    }
  };
  if (cfg.parallel && cfg.chains > 1) {
    std::vector<std::jthread> workers;
    workers.reserve(cfg.chains);
    for (int c = 0; c < cfg.chains; ++c) workers.emplace_back(run, c);
  } else {
    for (int c = 0; c < cfg.chains; ++c) run(c);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  PosteriorEnsemble ens;
  ens.names = space.scalar_names();
  ens.chains = cfg.chains;
  ens.draws_per_chain = cfg.draws_per_chain();
  for (const auto& r : results) ens.draws.insert(ens.draws.end(), r.draws.begin(), r.draws.end());
  for (std::size_t b = 0; b < space.block_names().size(); ++b) {
    double acc = 0.0;
    for (const auto& r : results) acc += r.acceptance[b];
    ens.acceptance.push_back({space.block_names()[b], acc / cfg.chains});
  }
  compute_diagnostics(ens, cfg.rhat_threshold);
  return ens;
}

/**
 * Append derived columns computed row by row (e.g. draws of latent quantities
 * given each parameter draw). Diagnostics are recomputed for the whole ensemble.
 */
template <class Derive>
void append_derived(PosteriorEnsemble& ens, const std::vector<std::string>& names, Derive&& derive, Rng rng,
                    double rhat_threshold = 1.05) {
  const std::size_t old_cols = ens.columns();
  const std::size_t rows = ens.size();
  std::vector<double> merged;
  merged.reserve(rows * (old_cols + names.size()));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = ens.row(i);
    const std::vector<double> extra = derive(r, rng);
    if (extra.size() != names.size()) throw std::logic_error("derived column count mismatch");
    merged.insert(merged.end(), r.begin(), r.end());
    merged.insert(merged.end(), extra.begin(), extra.end());
  }
  ens.names.insert(ens.names.end(), names.begin(), names.end());
  ens.draws = std::move(merged);
  compute_diagnostics(ens, rhat_threshold);
}

// ---------------------------------------------------------------------------
// Summaries

struct Hdi {
  double lower = 0.0;
  double upper = 0.0;
  double mass = 0.94;

  [[nodiscard]] bool contains(double v) const { return v >= lower && v <= upper; }
  [[nodiscard]] double width() const { return upper - lower; }
};

/// Narrowest window of order statistics covering ceil(mass * S) draws; the first one on ties.
inline Hdi hdi(std::span<const double> draws, double mass = 0.94) {
  if (draws.size() < 100) throw std::invalid_argument("hdi needs at least 100 draws, got " + std::to_string(draws.size()));
  if (!(mass > 0.0 && mass < 1.0)) throw std::invalid_argument("hdi mass must lie in (0, 1)");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const auto cover = std::min(n, static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n) - 1e-9)));
  std::size_t best = 0;
  double best_width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + cover <= n; ++i) {
    const double w = sorted[i + cover - 1] - sorted[i];
    if (w < best_width) {
      best_width = w;
      best = i;
    }
  }
  return {sorted[best], sorted[best + cover - 1], mass};
}

/**
 * For each of n predictive draws, pick a posterior row uniformly and run the
 * generative pass `generator(row, rng)`.
 */
template <class Generator>
auto posterior_predictive(const PosteriorEnsemble& ens, Generator&& generator, std::size_t n, Rng& rng) {
  using Result = std::invoke_result_t<Generator&, std::span<const double>, Rng&>;
  std::vector<Result> out;
  out.reserve(n);
  if (n > 0 && ens.size() == 0) throw std::invalid_argument("posterior ensemble is empty");
  for (std::size_t i = 0; i < n; ++i) {
    const auto pick = rng.below(ens.size());
    out.push_back(generator(ens.row(pick), rng));
  }
  return out;
}

}  // namespace netgen::inference
