#pragma once

// Monte Carlo verification engine. Paths are exact GBM skeletons on a time
// grid; barriers are monitored at grid points only, which biases survival
// upwards (excursions between grid points are missed). Several monitoring
// resolutions can be read off the same path (every 2^l-th grid point) and
// combined by Richardson extrapolation in powers of sqrt(step).

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "dbarrier/core_model.hpp"
#include "dbarrier/defaults.hpp"
#include "dbarrier/error.hpp"

namespace dbarrier {

// ---------------------------------------------------------------------------
// Random numbers: xoshiro256** with SplitMix64-derived per-path substreams,
// so path i does not depend on how many paths are drawn.

class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed) {
    for (auto& s : state_) s = splitmix64(seed);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = std::rotl(state_[3], 45);
    return result;
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_[4];
};

inline Xoshiro256 path_stream(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t mix = seed;
  const std::uint64_t a = Xoshiro256::splitmix64(mix);
  std::uint64_t b = stream ^ a;
  return Xoshiro256(Xoshiro256::splitmix64(b) ^ (stream * 0xd1b54a32d192ed03ULL));
}

// ---------------------------------------------------------------------------

struct McConfig {
  std::uint64_t n_paths = defaults::kPaths;
  std::uint32_t steps_per_window = defaults::kStepsPerWindow;
  std::uint64_t seed = defaults::kSeed;
  bool antithetic = false;

  void validate() const {
    if (n_paths < 1) throw InvalidParameter("n_paths must be >= 1");
    if (steps_per_window < 1) throw InvalidParameter("steps_per_window must be >= 1");
    if (antithetic && n_paths % 2 != 0)
      throw InvalidParameter("antithetic sampling needs an even number of paths");
  }
};

enum class BiasNote { upward_survival_bias, none };

inline const char* to_string(BiasNote b) {
  return b == BiasNote::none ? "none" : "upward_survival_bias";
}

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t n_paths = 0;
  BiasNote bias_note = BiasNote::upward_survival_bias;
};

struct SimulationOptions {
  double t = 0.0;                 ///< paths start at (t, market.spot())
  int levels = 1;                 ///< monitoring resolutions steps / 2^l, l < levels
  bool track_occupation = false;  ///< also fill gaps with grid steps and record occupation
};

/// Per-path survival bits for every window and monitoring level, plus the
/// occupation time of the corridor when requested.
struct SimulationResult {
  std::size_t n_paths = 0;
  std::size_t n_windows = 0;
  std::size_t n_levels = 0;
  bool antithetic = false;
  std::vector<std::uint8_t> bits;  ///< [path][level][window]
  std::vector<double> occupation;  ///< [path], empty unless tracked
  double horizon = 0.0;            ///< length of the simulated time span

  bool survived(std::size_t path, std::size_t window, std::size_t level = 0) const {
    return bits[(path * n_levels + level) * n_windows + window] != 0;
  }
  std::span<const std::uint8_t> window_bits(std::size_t path, std::size_t level = 0) const {
    return {bits.data() + (path * n_levels + level) * n_windows, n_windows};
  }
  std::size_t survived_count(std::size_t path, std::size_t level = 0) const {
    std::size_t c = 0;
    for (auto b : window_bits(path, level)) c += b;
    return c;
  }
};

namespace detail {

struct MonitorTag {
  int window = -1;
  std::uint8_t level_mask = 0;
};

struct MonitorGrid {
  std::vector<double> drift;    ///< per step
  std::vector<double> diffuse;  ///< vol * sqrt(dt) per step
  std::vector<double> dt;       ///< per step
  // Tags per grid point: a point shared by two adjacent windows has two.
  std::vector<std::array<MonitorTag, 2>> tags;
  double horizon = 0.0;
};

inline MonitorGrid build_monitor_grid(const MarketParams& market, const BarrierSchedule& schedule,
                                      std::uint32_t steps_per_window,
                                      const SimulationOptions& opts) {
  if (schedule.empty()) throw InvalidSchedule("Monte Carlo needs a non-empty schedule");
  if (opts.levels < 1 || opts.levels > 8) throw InvalidParameter("levels must be in [1, 8]");
  double min_len = std::numeric_limits<double>::infinity();
  for (const auto& w : schedule.windows()) min_len = std::min(min_len, w.length);
  const double h = min_len / steps_per_window;
  const double tol = detail::time_tolerance(schedule.end_time());
  if (opts.t > schedule[0].start + tol)
    throw InvalidParameter("Monte Carlo valuation must not be later than the first window");

  MonitorGrid g;
  std::vector<double> times{opts.t};
  g.tags.emplace_back();
  auto add_segment = [&](double from, double to, long n) {
    for (long i = 1; i <= n; ++i) {
      times.push_back(i == n ? to : from + (to - from) * static_cast<double>(i) / n);
      g.tags.emplace_back();
    }
  };
  const int levels = opts.levels;
  auto tag_point = [&](std::size_t idx, int window, std::uint8_t mask) {
    auto& slot = g.tags[idx];
    if (slot[0].window == window || slot[0].window < 0) {
      slot[0].window = window;
      slot[0].level_mask |= mask;
    } else {
      slot[1].window = window;
      slot[1].level_mask |= mask;
    }
  };

  for (std::size_t wi = 0; wi < schedule.size(); ++wi) {
    const Window& w = schedule[wi];
    const double gap = w.start - times.back();
    if (gap > tol) {
      const long n = opts.track_occupation ? std::max(1L, std::lround(gap / h)) : 1L;
      add_segment(times.back(), w.start, n);
    }
    const std::size_t first = times.size() - 1;
    const long n = std::max(1L, std::lround(w.length / h));
    add_segment(w.start, w.end(), n);
    const std::size_t last = times.size() - 1;
    for (std::size_t idx = first; idx <= last; ++idx) {
      std::uint8_t mask = 0;
      for (int l = 0; l < levels; ++l) {
        const std::size_t stride = std::size_t{1} << l;
        if ((idx - first) % stride == 0 || idx == last) mask |= std::uint8_t(1u << l);
      }
      tag_point(idx, static_cast<int>(wi), mask);
    }
  }

  const double mu = market.rate() - market.half_variance();
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double dt = times[i] - times[i - 1];
    g.dt.push_back(dt);
    g.drift.push_back(mu * dt);
    g.diffuse.push_back(market.vol() * std::sqrt(dt));
  }
  g.horizon = times.back() - times.front();
  return g;
}

}  // namespace detail

/// Simulates config.n_paths paths and records which windows survive.
/// Window bit = 1 iff every monitored grid point of the closed window lies
/// strictly inside (b_low, b_up).
inline SimulationResult simulate_survival_indicators(const MarketParams& market,
                                                     const BarrierSpec& barriers,
                                                     const BarrierSchedule& schedule,
                                                     const McConfig& config,
                                                     const SimulationOptions& opts = {}) {
  config.validate();
  const auto grid = detail::build_monitor_grid(market, schedule, config.steps_per_window, opts);
  SimulationResult res;
  res.n_paths = config.n_paths;
  res.n_windows = schedule.size();
  res.n_levels = static_cast<std::size_t>(opts.levels);
  res.antithetic = config.antithetic;
  res.horizon = grid.horizon;
  res.bits.assign(res.n_paths * res.n_levels * res.n_windows, 1);
  if (opts.track_occupation) res.occupation.assign(res.n_paths, 0.0);

  const double lo = std::log(barriers.low());
  const double hi = std::log(barriers.up());
  const double x0 = std::log(market.spot());
  const std::size_t n_steps = grid.drift.size();
  const std::size_t W = res.n_windows;
  const std::size_t Lv = res.n_levels;

  auto knock = [&](std::size_t path, std::size_t point) {
    std::uint8_t* base = res.bits.data() + path * Lv * W;
    for (const auto& tag : grid.tags[point]) {
      if (tag.window < 0) continue;
      for (std::size_t l = 0; l < Lv; ++l)
        if (tag.level_mask & (1u << l)) base[l * W + static_cast<std::size_t>(tag.window)] = 0;
    }
  };

  const std::size_t ways = config.antithetic ? 2 : 1;
  std::vector<double> z(n_steps);
  for (std::size_t p = 0; p < res.n_paths; p += ways) {
    auto rng = path_stream(config.seed, p / ways);
    boost::random::normal_distribution<double> normal;
    for (auto& v : z) v = normal(rng);
    for (std::size_t a = 0; a < ways; ++a) {
      const std::size_t path = p + a;
      const double sign = a == 0 ? 1.0 : -1.0;
      double x = x0;
      bool prev_in = x > lo && x < hi;
      if (!prev_in) knock(path, 0);
      double occ = 0.0;
      for (std::size_t j = 0; j < n_steps; ++j) {
        x += grid.drift[j] + grid.diffuse[j] * (sign * z[j]);
        const bool in = x > lo && x < hi;
        if (!in) knock(path, j + 1);
        if (opts.track_occupation) occ += grid.dt[j] * 0.5 * (double(prev_in) + double(in));
        prev_in = in;
      }
      if (opts.track_occupation) res.occupation[path] = occ;
    }
  }
  return res;
}

namespace detail {

/// Weights w_l with sum_l w_l (2^l)^{j/2} = delta_{j0}, j < levels: cancels the
/// sqrt(h), h, ... terms of the monitoring bias.
inline std::vector<double> richardson_weights(int levels) {
  const int n = levels;
  std::vector<double> a(static_cast<std::size_t>(n * n));
  std::vector<double> b(static_cast<std::size_t>(n), 0.0);
  b[0] = 1.0;
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l) a[j * n + l] = std::pow(std::sqrt(std::ldexp(1.0, l)), j);
  // Gaussian elimination with partial pivoting.
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    for (int k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
    std::swap(b[c], b[piv]);
    for (int r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      for (int k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < n; ++k) s -= a[r * n + k] * w[k];
    w[r] = s / a[r * n + r];
  }
  return w;
}

}  // namespace detail

/// Path functional: fills `out` for one path at one monitoring level.
using PathFunctional =
    std::function<void(const SimulationResult&, std::size_t path, std::size_t level,
                       std::span<double> out)>;

/// Sample means and standard errors of a vector functional, Richardson-
/// combined across all simulated levels. Antithetic pairs count as one
/// sample. `scale` multiplies every output (e.g. a discount factor).
inline std::vector<McEstimate> estimate_functionals(const SimulationResult& sim,
                                                    std::size_t dim, const PathFunctional& fn,
                                                    double scale = 1.0) {
  const auto w = detail::richardson_weights(static_cast<int>(sim.n_levels));
  const std::size_t ways = sim.antithetic ? 2 : 1;
  const std::size_t samples = sim.n_paths / ways;
  std::vector<double> mean(dim, 0.0);
  std::vector<double> m2(dim, 0.0);
  std::vector<double> base(dim);
  std::vector<double> other(dim);
  std::vector<double> value(dim);
  for (std::size_t s = 0; s < samples; ++s) {
    std::fill(value.begin(), value.end(), 0.0);
    for (std::size_t a = 0; a < ways; ++a) {
      const std::size_t path = s * ways + a;
      fn(sim, path, 0, base);
      for (std::size_t d = 0; d < dim; ++d) value[d] += base[d];
      // y = f_0 + sum_{l>0} w_l (f_l - f_0), exact when all levels agree
      for (std::size_t l = 1; l < sim.n_levels; ++l) {
        fn(sim, path, l, other);
        for (std::size_t d = 0; d < dim; ++d) value[d] += w[l] * (other[d] - base[d]);
      }
    }
    for (std::size_t d = 0; d < dim; ++d) {
      const double v = scale * value[d] / static_cast<double>(ways);
      const double delta = v - mean[d];
      mean[d] += delta / static_cast<double>(s + 1);
      m2[d] += delta * (v - mean[d]);
    }
  }
  std::vector<McEstimate> out(dim);
  const double n = static_cast<double>(samples);
  for (std::size_t d = 0; d < dim; ++d) {
    const double var = samples > 1 ? m2[d] / (n - 1.0) : 0.0;
    out[d].mean = mean[d];
    out[d].std_error = std::sqrt(var / n);
    out[d].n_paths = sim.n_paths;
    out[d].bias_note = sim.n_levels > 1 ? BiasNote::none : BiasNote::upward_survival_bias;
  }
  return out;
}

/// Discounted probability that every window survives. levels > 1 applies
/// step-halving extrapolation over steps_per_window / 2^l, l < levels.
inline McEstimate estimate_bd_price(const MarketParams& market, const BarrierSpec& barriers,
                                    const BarrierSchedule& schedule, double t,
                                    const McConfig& config, int levels = 1) {
  SimulationOptions opts;
  opts.t = t;
  opts.levels = levels;
  const auto sim = simulate_survival_indicators(market, barriers, schedule, config, opts);
  const double discount = std::exp(-market.rate() * (schedule.end_time() - t));
  return estimate_functionals(
      sim, 1,
      [](const SimulationResult& s, std::size_t path, std::size_t level, std::span<double> out) {
        out[0] = s.survived_count(path, level) == s.n_windows ? 1.0 : 0.0;
      },
      discount)[0];
}

struct CouponPmfEstimate {
  std::vector<double> probs;       ///< P[A = i], i = 0..n
  std::vector<double> std_errors;  ///< per bin
  std::uint64_t n_paths = 0;
  BiasNote bias_note = BiasNote::upward_survival_bias;
};

/// Empirical law of the number of surviving windows A.
inline CouponPmfEstimate estimate_coupon_pmf(const MarketParams& market,
                                             const BarrierSpec& barriers,
                                             const BarrierSchedule& schedule,
                                             const McConfig& config, double t = 0.0,
                                             int levels = 1) {
  SimulationOptions opts;
  opts.t = t;
  opts.levels = levels;
  const auto sim = simulate_survival_indicators(market, barriers, schedule, config, opts);
  const std::size_t n = schedule.size();
  const auto est = estimate_functionals(
      sim, n + 1,
      [](const SimulationResult& s, std::size_t path, std::size_t level, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[s.survived_count(path, level)] = 1.0;
      });
  CouponPmfEstimate pmf;
  pmf.n_paths = config.n_paths;
  pmf.bias_note = levels > 1 ? BiasNote::none : BiasNote::upward_survival_bias;
  for (const auto& e : est) {
    pmf.probs.push_back(e.mean);
    pmf.std_errors.push_back(e.std_error);
  }
  return pmf;
}

/// Sample moments E[A^nu], nu = 1..max_nu, of the surviving-window count.
inline std::vector<McEstimate> estimate_coupon_moments(const MarketParams& market,
                                                       const BarrierSpec& barriers,
                                                       const BarrierSchedule& schedule,
                                                       int max_nu, const McConfig& config,
                                                       double t = 0.0, int levels = 1) {
  if (max_nu < 1) throw InvalidParameter("max_nu must be >= 1");
  SimulationOptions opts;
  opts.t = t;
  opts.levels = levels;
  const auto sim = simulate_survival_indicators(market, barriers, schedule, config, opts);
  return estimate_functionals(
      sim, static_cast<std::size_t>(max_nu),
      [](const SimulationResult& s, std::size_t path, std::size_t level, std::span<double> out) {
        const double a = static_cast<double>(s.survived_count(path, level));
        double pw = 1.0;
        for (double& o : out) o = (pw *= a);
      });
}

/// Discounted e^{-r (T_end - t)} (F - A)^+ by direct simulation.
inline McEstimate estimate_floor_payoff(const MarketParams& market, const BarrierSpec& barriers,
                                        const BarrierSchedule& schedule, double floor,
                                        const McConfig& config, double t = 0.0,
                                        int levels = 1) {
  SimulationOptions opts;
  opts.t = t;
  opts.levels = levels;
  const auto sim = simulate_survival_indicators(market, barriers, schedule, config, opts);
  const double discount = std::exp(-market.rate() * (schedule.end_time() - t));
  return estimate_functionals(
      sim, 1,
      [floor](const SimulationResult& s, std::size_t path, std::size_t level,
              std::span<double> out) {
        out[0] = std::max(0.0, floor - static_cast<double>(s.survived_count(path, level)));
      },
      discount)[0];
}

/// Occupation times of the corridor over [0, horizon] on the grid of
/// steps_per_window steps (trapezoidal indicator sums).
inline SimulationResult simulate_occupation(const MarketParams& market,
                                            const BarrierSpec& barriers, double horizon,
                                            const McConfig& config) {
  if (!(horizon > 0.0)) throw InvalidParameter("horizon must be positive");
  SimulationOptions opts;
  opts.track_occupation = true;
  return simulate_survival_indicators(market, barriers, BarrierSchedule({{0.0, horizon}}),
                                      config, opts);
}

/// e^{-r T} E[(f - int_0^T 1_B(S_t) dt)^+], valued at t = 0.
inline McEstimate estimate_occupation_put(const MarketParams& market,
                                          const BarrierSpec& barriers, double horizon,
                                          double strike, const McConfig& config) {
  if (!(strike >= 0.0)) throw InvalidParameter("occupation put strike must be >= 0");
  const auto sim = simulate_occupation(market, barriers, horizon, config);
  const double discount = std::exp(-market.rate() * horizon);
  auto est = estimate_functionals(
      sim, 1,
      [strike](const SimulationResult& s, std::size_t path, std::size_t,
               std::span<double> out) { out[0] = std::max(0.0, strike - s.occupation[path]); },
      discount)[0];
  est.bias_note = BiasNote::none;
  return est;
}

}  // namespace dbarrier
