#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "dbarrier/cli/config.hpp"
#include "dbarrier/cli/report.hpp"
#include "dbarrier/dbarrier.hpp"

namespace dbarrier::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitVerificationFailed = 1,
  kExitConfigError = 2,
  kExitNumericalFailure = 3,
  kExitKnockedOut = 4,
};

inline int exit_code(const Report& r) {
  if (r.status != "priced") return kExitKnockedOut;
  return r.verified() ? kExitOk : kExitVerificationFailed;
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

inline Check tolerance_check(std::string name, double value, double reference, double tol) {
  const double diff = std::abs(value - reference);
  return {std::move(name), diff <= tol, value, reference, tol,
          fmt(value) + " vs " + fmt(reference) + ", |diff| " + fmt(diff) + " <= " + fmt(tol) + "?"};
}

/// |value - reference| within z_tol standard errors; a zero standard error
/// demands agreement to rounding.
inline Check z_check(std::string name, double value, double se, double reference, double z_tol) {
  const double diff = std::abs(value - reference);
  const double z = se > 0.0 ? diff / se : (diff <= 1e-10 * std::max(1.0, std::abs(reference)) ? 0.0 : std::numeric_limits<double>::max());
  return {std::move(name), z <= z_tol, value, reference, z_tol,
          "mc " + fmt(value) + " +/- " + fmt(se) + " vs " + fmt(reference) + ", z = " + fmt(z)};
}

inline ContractEcho echo(const PricingJob& job) {
  ContractEcho c;
  c.spot = job.market.spot();
  c.rate = job.market.rate();
  c.vol = job.market.vol();
  c.b_low = job.barriers.low();
  c.b_up = job.barriers.up();
  for (const auto& w : job.schedule.windows()) c.windows.emplace_back(w.start, w.length);
  c.valuation_time = job.valuation_time;
  c.spot_at_t = job.spot_at_t;
  c.floor = job.floor;
  return c;
}

inline McSummary summarize(const McEstimate& e, const PricingJob& job, int levels) {
  return {e.mean,          e.std_error, e.n_paths,         job.mc.steps_per_window,
          levels,          job.mc.seed, job.mc.antithetic, to_string(e.bias_note)};
}

inline void fill_result(Report& r, const PriceResult& p) {
  r.status = to_string(p.status);
  r.price = p.price;
  r.truncation_bound = p.truncation_bound;
  r.quadrature_error = p.quadrature_error;
  r.discount_factor = p.discount_factor;
  r.modes = p.modes;
  r.nodes = p.nodes;
}

/// Simulation start: paths begin at (t, spot_at_t) and only the remaining
/// part of the schedule is monitored.
inline BarrierSchedule mc_schedule(const PricingJob& job) {
  return BarrierSchedule(remaining_schedule(job.schedule, job.valuation_time).windows);
}

inline void digital_mc_check(Report& r, const PricingJob& job) {
  const auto sched = mc_schedule(job);
  if (sched.empty()) return;
  const auto est = estimate_bd_price(job.market.with_spot(job.spot_at_t), job.barriers, sched,
                                     job.valuation_time, job.mc, job.mc_levels);
  r.mc = summarize(est, job, job.mc_levels);
  r.checks.push_back(z_check("mc_cross_check", est.mean, est.std_error, r.price,
                             defaults::kZTolerance));
}

inline void floor_checks(Report& r, const PricingJob& job, const FloorValuation& v) {
  const int n = static_cast<int>(job.schedule.size());
  double sum = 0.0;
  for (double p : v.pmf.probs) sum += p;
  r.checks.push_back(tolerance_check("pmf_sums_to_one", sum, 1.0, 1e-9));
  r.checks.push_back({"pmf_nonnegative_before_clip", v.pmf.min_raw >= -defaults::kClipTolerance,
                      v.pmf.min_raw, 0.0, defaults::kClipTolerance,
                      "smallest raw entry " + fmt(v.pmf.min_raw)});
  if (*job.floor >= n) {
    // E[A] as the sum of single-coupon survival probabilities
    double mean_a = 0.0;
    for (const auto& w : job.schedule.windows())
      mean_a += price_multi_period(job.market, job.barriers, BarrierSchedule({w}),
                                   job.valuation_time, job.spot_at_t, job.pricing)
                    .probability();
    const double parity = v.result.discount_factor * (*job.floor - mean_a);
    r.checks.push_back(tolerance_check("floor_parity", r.price, parity, 1e-8));
  }

  // Floors are valued no later than the first coupon, so every window is simulated.
  const BarrierSchedule& sched = job.schedule;
  const MarketParams m = job.market.with_spot(job.spot_at_t);
  // One simulation serves the pmf bins and the floor payoff.
  SimulationOptions opts;
  opts.t = job.valuation_time;
  opts.levels = job.mc_levels;
  const auto sim = simulate_survival_indicators(m, job.barriers, sched, job.mc, opts);
  const double floor = *job.floor;
  const auto est = estimate_functionals(
      sim, static_cast<std::size_t>(n) + 2,
      [floor](const SimulationResult& s, std::size_t path, std::size_t level,
              std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        const std::size_t a = s.survived_count(path, level);
        out[a] = 1.0;
        out.back() = std::max(0.0, floor - static_cast<double>(a));
      });
  bool all_ok = true;
  double worst = 0.0;
  for (int i = 0; i <= n; ++i) {
    PmfRow& row = r.pmf[i];
    row.mc = est[i].mean;
    row.mc_std_error = est[i].std_error;
    const double diff = std::abs(est[i].mean - row.analytic);
    const double z = est[i].std_error > 0.0 ? diff / est[i].std_error : (diff <= 1e-10 ? 0.0 : 1e300);
    row.z = z;
    worst = std::max(worst, z);
    all_ok = all_ok && z <= defaults::kZTolerance;
  }
  r.checks.push_back({"pmf_mc_z_scores", all_ok, worst, 0.0, defaults::kZTolerance,
                      "largest per-bin z = " + fmt(worst)});
  McEstimate payoff = est.back();
  payoff.mean *= v.result.discount_factor;
  payoff.std_error *= v.result.discount_factor;
  r.mc = summarize(payoff, job, job.mc_levels);
  r.checks.push_back(z_check("floor_mc_cross_check", payoff.mean, payoff.std_error, r.price,
                             defaults::kZTolerance));
}

inline Report run_digital(const PricingJob& job, bool verify) {
  Report r;
  r.command = to_string(Command::price_digital);
  r.contract = echo(job);
  const auto res = price_multi_period(job.market, job.barriers, job.schedule, job.valuation_time,
                                      job.spot_at_t, job.pricing);
  fill_result(r, res);
  if (verify && res.status == PriceStatus::priced) digital_mc_check(r, job);
  return r;
}

inline FloorValuation value_floor(const PricingJob& job) {
  if (!job.floor) throw ConfigError("this command needs [floor] level");
  FloorParams fp;
  fp.pricing = job.pricing;
  return StructureFloorPricer(job.market, job.barriers, job.schedule, job.valuation_time,
                              job.spot_at_t, fp)
      .value(*job.floor);
}

inline void fill_floor(Report& r, const FloorValuation& v) {
  fill_result(r, v.result);
  r.moment_basis = to_string(v.basis);
  r.moments = v.basis == MomentBasis::binomial ? v.binomial_moments : v.moments.moments;
  r.pmf.clear();
  for (std::size_t i = 0; i < v.pmf.probs.size(); ++i)
    r.pmf.push_back({static_cast<int>(i), v.pmf.probs[i], {}, {}, {}});
}

inline Report run_floor(const PricingJob& job, bool verify) {
  Report r;
  r.command = to_string(Command::price_floor);
  r.contract = echo(job);
  const auto v = value_floor(job);
  fill_floor(r, v);
  if (verify) floor_checks(r, job, v);
  return r;
}

inline Report run_corridor(const PricingJob& job, bool verify) {
  if (!job.floor) throw ConfigError("price-corridor needs [floor] level");
  if (job.valuation_time != 0.0) throw ConfigError("price-corridor values at time 0 only");
  Report r;
  r.command = to_string(Command::price_corridor);
  r.contract = echo(job);
  r.contract.horizon = job.horizon();
  r.contract.coupons = job.coupons();
  const MarketParams m = job.market.with_spot(job.spot_at_t);
  const auto est = approx_floor_via_corridor(m, job.barriers, job.horizon(), job.coupons(),
                                             *job.floor, job.mc);
  r.price = est.mean;
  r.discount_factor = std::exp(-m.rate() * job.horizon());
  r.mc = summarize(est, job, 1);
  if (verify) {
    const double cap = r.discount_factor * *job.floor;
    const double slack = defaults::kZTolerance * est.std_error;
    r.checks.push_back({"corridor_bounds", est.mean >= -slack && est.mean <= cap + slack,
                        est.mean, cap, slack,
                        "0 <= " + fmt(est.mean) + " <= " + fmt(cap)});
  }
  return r;
}

/// Every oracle that applies to the contract, one check per invariant.
inline Report run_verify(const PricingJob& job) {
  Report r = run_digital(job, false);
  r.command = to_string(Command::verify);
  const auto rs = remaining_schedule(job.schedule, job.valuation_time);
  const bool knocked = r.status != "priced";

  r.checks.push_back({"price_bounds", r.price >= 0.0 && r.price <= r.discount_factor, r.price,
                      r.discount_factor, 0.0,
                      "0 <= " + fmt(r.price) + " <= " + fmt(r.discount_factor)});

  const auto merged = price_multi_period(job.market, job.barriers,
                                         concatenate_windows(job.schedule), job.valuation_time,
                                         job.spot_at_t, job.pricing);
  r.checks.push_back(tolerance_check("concatenation_invariance", merged.price, r.price, 1e-10));
  if (knocked) return r;

  PricingParams finer = job.pricing;
  finer.k_max = std::min(finer.k_cap, 2 * std::max(r.modes, finer.k_max));
  finer.quad_nodes = 2 * std::max(r.nodes, finer.quad_nodes);
  const auto fine = price_multi_period(job.market, job.barriers, job.schedule,
                                       job.valuation_time, job.spot_at_t, finer);
  r.checks.push_back(tolerance_check(
      "refinement_stability", r.price, fine.price,
      std::max(1e-8, 10.0 * (r.truncation_bound + r.quadrature_error))));

  if (!rs.t_in_window && rs.windows.size() == 1) {
    const Window w = rs.windows.front();
    const auto one = price_one_period(job.market, job.barriers, w.start, w.length,
                                      job.valuation_time, job.spot_at_t, job.pricing);
    r.checks.push_back(tolerance_check("one_period_closed_form", one.price, r.price, 1e-8));
  }
  if (!rs.t_in_window && rs.windows.size() == 2) {
    const int k = std::min(r.modes, 48);
    const auto nested = price_two_period_nested(job.market, job.barriers,
                                                BarrierSchedule(rs.windows), job.valuation_time,
                                                job.spot_at_t, k, 64);
    r.checks.push_back(tolerance_check("two_period_nested_quadrature", nested.price, r.price,
                                       1e-6));
  }
  digital_mc_check(r, job);

  const bool floor_applies = job.floor && !job.schedule.empty() &&
                             job.valuation_time <= job.schedule[0].start &&
                             concatenate_windows(job.schedule).size() == 1;
  if (floor_applies) {
    const auto v = value_floor(job);
    Report fr;
    fill_floor(fr, v);
    fr.price = v.result.price;
    floor_checks(fr, job, v);
    r.moment_basis = fr.moment_basis;
    r.moments = fr.moments;
    r.pmf = fr.pmf;
    r.checks.insert(r.checks.end(), fr.checks.begin(), fr.checks.end());
  }
  return r;
}

}  // namespace detail

inline Report run(const PricingJob& job) {
  switch (job.command) {
    case Command::price_digital: return detail::run_digital(job, job.verify);
    case Command::price_floor: return detail::run_floor(job, job.verify);
    case Command::price_corridor: return detail::run_corridor(job, job.verify);
    case Command::verify: return detail::run_verify(job);
  }
  throw ConfigError("unknown command");
}

}  // namespace dbarrier::cli
