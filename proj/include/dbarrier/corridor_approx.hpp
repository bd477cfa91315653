#pragma once

// Large-n approximation of the structure floor by a put on the occupation
// time of the corridor. With n coupons of length T/n covering [0, T], the
// fraction of coupons paid approaches the fraction of [0, T] the spot spends
// inside the corridor, so
//
//   e^{-rT} E[(F - A)^+]  ~  n e^{-rT} E[(F/n - occupation / T)^+].
//
// Both sides are written with the occupation as a fraction of the horizon.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "dbarrier/core_model.hpp"
#include "dbarrier/error.hpp"
#include "dbarrier/mc_oracle.hpp"

namespace dbarrier {

inline McEstimate approx_floor_via_corridor(const MarketParams& market,
                                            const BarrierSpec& barriers, double horizon,
                                            int n, double floor, const McConfig& config) {
  if (n < 1) throw InvalidParameter("coupon count must be >= 1");
  if (!(floor >= 0.0)) throw InvalidParameter("floor must be >= 0");
  if (!(horizon > 0.0)) throw InvalidParameter("horizon must be positive");
  // n E[(F/n - occ/T)^+] = (n / T) E[(F T / n - occ)^+]
  McEstimate put = estimate_occupation_put(market, barriers, horizon, floor * horizon / n, config);
  const double scale = n / horizon;
  put.mean *= scale;
  put.std_error *= scale;
  return put;
}

struct ConvergenceRow {
  int n = 0;
  double mean_gap = 0.0;   ///< mean over paths of |A/n - occupation/T|
  double std_error = 0.0;
  double mean_survival_fraction = 0.0;
  double mean_occupation_fraction = 0.0;
};

/// For each n, compares the fraction of surviving coupon windows with the
/// occupation fraction on one common grid (shared paths across n).
/// config.steps_per_window is the number of grid steps per coupon for the
/// smallest n.
inline std::vector<ConvergenceRow> occupation_convergence_experiment(
    const MarketParams& market, const BarrierSpec& barriers, double horizon,
    const std::vector<int>& ns, const McConfig& config) {
  if (ns.empty()) throw InvalidParameter("need at least one coupon count");
  if (!(horizon > 0.0)) throw InvalidParameter("horizon must be positive");
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (ns[i] < 1) throw InvalidParameter("coupon counts must be >= 1");
    if (i > 0 && ns[i] <= ns[i - 1]) throw InvalidParameter("coupon counts must be increasing");
  }
  long long common = 1;
  for (int n : ns) {
    common = std::lcm(common, static_cast<long long>(n));
    if (common > 1 << 16) throw InvalidParameter("coupon counts have too large a common multiple");
  }
  // Finest partition: `common` adjacent windows; every coupon of every n is
  // a union of consecutive fine windows.
  const long long per_coarsest = common / ns.front();
  McConfig grid_config = config;
  grid_config.steps_per_window = static_cast<std::uint32_t>(
      std::max<long long>(1, (config.steps_per_window + per_coarsest - 1) / per_coarsest));
  const auto fine = BarrierSchedule::coupons(0.0, horizon / static_cast<double>(common),
                                             static_cast<std::size_t>(common));
  SimulationOptions opts;
  opts.track_occupation = true;
  const auto sim = simulate_survival_indicators(market, barriers, fine, grid_config, opts);

  std::vector<ConvergenceRow> rows;
  for (int n : ns) {
    const std::size_t group = static_cast<std::size_t>(common / n);
    const auto est = estimate_functionals(
        sim, 3,
        [&](const SimulationResult& s, std::size_t path, std::size_t level,
            std::span<double> out) {
          const auto bits = s.window_bits(path, level);
          int paid = 0;
          for (int c = 0; c < n; ++c) {
            bool alive = true;
            for (std::size_t k = 0; k < group && alive; ++k) alive = bits[c * group + k] != 0;
            paid += alive;
          }
          const double frac = static_cast<double>(paid) / n;
          const double occ = s.occupation[path] / horizon;
          out[0] = std::abs(frac - occ);
          out[1] = frac;
          out[2] = occ;
        });
    rows.push_back({n, est[0].mean, est[0].std_error, est[1].mean, est[2].mean});
  }
  return rows;
}

}  // namespace dbarrier
