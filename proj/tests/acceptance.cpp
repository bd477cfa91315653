// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dbarrier/dbarrier.hpp"
#include "oracles/reflection_series.hpp"

using namespace dbarrier;

namespace {

const MarketParams kMarket(100.0, 0.03, 0.25);
const BarrierSpec kBarriers(80.0, 125.0);

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  o.detail.precision(6);
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " exception: " << e.what();
  }
  if (!o.pass) ++failures;
  std::printf("%s  %d  %s:%s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.str().c_str(), seconds_since(t0));
  std::fflush(stdout);
}

McConfig mc(std::uint64_t paths, std::uint32_t steps, std::uint64_t seed = defaults::kSeed) {
  McConfig c;
  c.n_paths = paths;
  c.steps_per_window = steps;
  c.seed = seed;
  return c;
}

std::uint64_t factorial(int n) {
  std::uint64_t f = 1;
  for (int i = 2; i <= n; ++i) f *= static_cast<std::uint64_t>(i);
  return f;
}

// Sum of multinomials over index vectors (i_1..i_n), i_j >= 0, sum nu, whose
// support is exactly {0..m-1}.
std::uint64_t enumerate_coefficient(int nu, int m, int n) {
  std::uint64_t total = 0;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == n) {
      if (left != 0) return;
      for (int j = 0; j < n; ++j)
        if ((idx[j] > 0) != (j < m)) return;
      std::uint64_t denom = 1;
      for (int v : idx) denom *= factorial(v);
      total += factorial(nu) / denom;
      return;
    }
    for (int v = 0; v <= left; ++v) {
      idx[pos] = v;
      rec(pos + 1, left - v);
    }
  };
  rec(0, nu);
  return total;
}

std::uint64_t stirling2(int n, int k) {
  std::vector<std::vector<std::uint64_t>> s(n + 1, std::vector<std::uint64_t>(k + 1, 0));
  s[0][0] = 1;
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= std::min(i, k); ++j) s[i][j] = j * s[i - 1][j] + s[i - 1][j - 1];
  return s[n][k];
}

std::string run_command(const std::string& cmd, int& status) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    status = -1;
    return out;
  }
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  status = pclose(pipe);
  return out;
}

}  // namespace

int main() {
  const auto standard4 = BarrierSchedule::coupons(0.25, 0.25, 4);

  report(1, "one-period analytic vs Monte Carlo and reflection series", [](Outcome& o) {
    const BarrierSchedule sched({{0.25, 0.25}});
    const auto t0 = Clock::now();
    const auto analytic = price_multi_period(kMarket, kBarriers, sched, 0.0, 100.0);
    const auto est = estimate_bd_price(kMarket, kBarriers, sched, 0.0, mc(200000, 2048), 3);
    const double elapsed = seconds_since(t0);
    const double ref = oracle::one_window_price(100.0, 80.0, 125.0, 0.03, 0.25, 0.25, 0.25, 0.0);
    const double z = std::abs(est.mean - analytic.price) / est.std_error;
    o.detail.precision(12);
    o.detail << " analytic " << analytic.price << ", mc(2048->512 steps, 2e5 paths) " << est.mean
             << " +/- " << est.std_error;
    o.detail.precision(4);
    o.detail << ", z " << z << ", |analytic - reflection| " << std::abs(analytic.price - ref)
             << ", runtime " << elapsed << "s";
    o.require(z <= 3.0, "z <= 3");
    o.require(std::abs(analytic.price - ref) <= 1e-8, "reflection agreement 1e-8");
    o.require(elapsed < 30.0, "runtime < 30 s");
  });

  report(2, "operator form vs literal nested quadrature on 20 random two-window contracts",
         [](Outcome& o) {
           std::mt19937_64 rng(2024);
           std::uniform_real_distribution<double> u(0.0, 1.0);
           double worst = 0.0;
           const auto t0 = Clock::now();
           for (int i = 0; i < 20; ++i) {
             const MarketParams m(100.0, 0.01 + 0.07 * u(rng), 0.15 + 0.25 * u(rng));
             const BarrierSpec b(100.0 - 10.0 - 20.0 * u(rng), 100.0 + 10.0 + 25.0 * u(rng));
             const double s1 = 0.05 + 0.4 * u(rng);
             const double l1 = 0.1 + 0.3 * u(rng);
             const double s2 = s1 + l1 + 0.05 + 0.4 * u(rng);
             const double l2 = 0.1 + 0.3 * u(rng);
             const double spot = 100.0 + 8.0 * (u(rng) - 0.5);
             const BarrierSchedule sched({{s1, l1}, {s2, l2}});
             const auto op = price_multi_period(m, b, sched, 0.0, spot);
             const auto nested = price_two_period_nested(m, b, sched, 0.0, spot, 40, 80);
             worst = std::max(worst, std::abs(op.price - nested.price));
           }
           const double elapsed = seconds_since(t0);
           o.detail << " max |operator - nested| " << worst << ", runtime " << elapsed << "s";
           o.require(worst <= 1e-6, "agreement 1e-6");
           o.require(elapsed < 120.0, "runtime < 2 min");
         });

  report(3, "concatenation invariance", [](Outcome& o) {
    const std::vector<std::pair<BarrierSchedule, BarrierSchedule>> cases = {
        {BarrierSchedule({{0.25, 0.25}, {0.5, 0.25}}), BarrierSchedule({{0.25, 0.5}})},
        {BarrierSchedule::coupons(0.0, 0.125, 8), BarrierSchedule({{0.0, 1.0}})},
        {BarrierSchedule(
             {{0.125, 0.125}, {0.25, 0.25}, {0.75, 0.125}, {0.875, 0.125}, {1.25, 0.0625}}),
         BarrierSchedule({{0.125, 0.375}, {0.75, 0.25}, {1.25, 0.0625}})},
    };
    double worst = 0.0;
    for (const auto& [split, merged] : cases) {
      o.require(concatenate_windows(split) == merged, "concatenate_windows shape");
      for (double t : {0.0, 0.05, 0.3})
        for (double spot : {85.0, 100.0, 120.0}) {
          const auto a = price_multi_period(kMarket, kBarriers, split, t, spot);
          const auto b = price_multi_period(kMarket, kBarriers, merged, t, spot);
          worst = std::max(worst, std::abs(a.price - b.price));
        }
    }
    o.detail << " max |split - concatenated| " << worst;
    o.require(worst <= 1e-10, "1e-10");
  });

  report(4, "limit suite", [](Outcome& o) {
    const MarketParams m(100.0, 0.05, 0.2);
    const BarrierSpec wide(1e-4, 1e8);
    const BarrierSchedule three({{0.1, 0.2}, {0.5, 0.1}, {0.8, 0.2}});
    const double wide_rel = std::abs(price_multi_period(m, wide, three, 0.0, 100.0).price /
                                         std::exp(-0.05) - 1.0);
    const double narrow = price_multi_period(kMarket, BarrierSpec(100.0 - 5e-3, 100.0 + 5e-3),
                                             BarrierSchedule({{0.25, 0.25}}), 0.0, 100.0)
                              .price;
    // schedules grow by one window at a time; widths grow outward
    const std::vector<BarrierSchedule> schedules = {
        BarrierSchedule({{0.5, 0.1}}),
        BarrierSchedule({{0.2, 0.1}, {0.5, 0.1}}),
        BarrierSchedule({{0.2, 0.1}, {0.5, 0.1}, {0.9, 0.2}}),
        BarrierSchedule({{0.0, 0.05}, {0.2, 0.1}, {0.5, 0.1}, {0.9, 0.2}}),
        BarrierSchedule({{0.0, 0.05}, {0.2, 0.1}, {0.5, 0.1}, {0.7, 0.1}, {0.9, 0.2}}),
    };
    const std::vector<double> widths = {1.1, 1.2, 1.35, 1.6, 2.2};
    std::vector<std::vector<double>> grid(5, std::vector<double>(5));
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        grid[i][j] = price_multi_period(kMarket, BarrierSpec(100.0 / widths[i], 100.0 * widths[i]),
                                        schedules[j], 0.0, 100.0)
                         .price;
    int violations = 0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        if (i > 0 && grid[i][j] < grid[i - 1][j] - 1e-12) ++violations;
        if (j > 0 && grid[i][j] > grid[i][j - 1] + 1e-12) ++violations;
      }
    o.detail << " wide rel err " << wide_rel << ", zero-width price " << narrow
             << ", monotonicity violations on 5x5 grid " << violations;
    o.require(wide_rel < 1e-4, "wide barriers rel err < 1e-4");
    o.require(narrow < 1e-6, "zero width < 1e-6");
    o.require(violations == 0, "monotone grid");
  });

  report(5, "surjection coefficient identities", [](Outcome& o) {
    int mismatches = 0;
    for (int nu = 0; nu <= 6; ++nu)
      for (int n = 1; n <= 6; ++n)
        for (int m = 0; m <= n; ++m)
          if (surjection_coefficient(nu, m) != enumerate_coefficient(nu, m, n)) ++mismatches;
    int stirling = 0;
    for (int nu = 0; nu <= 10; ++nu)
      for (int m = 0; m <= 10; ++m)
        if (surjection_coefficient(nu, m) != factorial(m) * stirling2(nu, m)) ++stirling;
    o.detail << " enumeration mismatches " << mismatches << ", Stirling mismatches " << stirling;
    o.require(mismatches == 0 && stirling == 0, "exact equality");
  });

  // Criteria 6 and 7 share one simulation of the four-coupon contract.
  const auto floor_valuation = StructureFloorPricer(kMarket, kBarriers, standard4, 0.0, 100.0).value(2.0);
  SimulationOptions opts;
  opts.levels = 3;
  std::vector<McEstimate> mc4;
  {
    const auto sim = simulate_survival_indicators(kMarket, kBarriers, standard4, mc(200000, 2048), opts);
    // dims: pmf 0..4, A, A^2, A^3, (2 - A)^+
    mc4 = estimate_functionals(sim, 9, [](const SimulationResult& s, std::size_t path,
                                          std::size_t level, std::span<double> out) {
      const double a = static_cast<double>(s.survived_count(path, level));
      std::fill(out.begin(), out.end(), 0.0);
      out[static_cast<std::size_t>(a)] = 1.0;
      out[5] = a;
      out[6] = a * a;
      out[7] = a * a * a;
      out[8] = std::max(0.0, 2.0 - a);
    });
  }

  report(6, "moment pipeline, four adjacent coupons", [&](Outcome& o) {
    const auto& v = floor_valuation;
    double worst_moment = 0.0;
    for (int nu = 1; nu <= 3; ++nu)
      worst_moment = std::max(worst_moment, std::abs(v.moments.moments[nu] - mc4[4 + nu].mean) /
                                                mc4[4 + nu].std_error);
    double worst_bin = 0.0;
    double total = 0.0;
    for (int i = 0; i <= 4; ++i) {
      worst_bin = std::max(worst_bin, std::abs(v.pmf.probs[i] - mc4[i].mean) / mc4[i].std_error);
      total += v.pmf.probs[i];
    }
    o.detail.precision(8);
    o.detail << " E[A] " << v.moments.moments[1] << " E[A^2] " << v.moments.moments[2]
             << " E[A^3] " << v.moments.moments[3];
    o.detail.precision(4);
    o.detail << ", max moment z " << worst_moment << ", max pmf bin z " << worst_bin
             << ", |sum - 1| " << std::abs(total - 1.0) << ", min raw entry " << v.pmf.min_raw;
    o.require(worst_moment <= 3.0, "moments within 3 SE");
    o.require(worst_bin <= 3.0, "pmf within 3 SE");
    o.require(std::abs(total - 1.0) <= 1e-9, "sum 1e-9");
    o.require(v.pmf.min_raw >= -1e-7, "no entry below -1e-7");
  });

  report(7, "floor price F = 2 and F >= n parity", [&](Outcome& o) {
    const double disc = std::exp(-0.03 * 1.25);
    const double mc_mean = disc * mc4[8].mean;
    const double mc_se = disc * mc4[8].std_error;
    const double z = std::abs(floor_valuation.result.price - mc_mean) / mc_se;
    const StructureFloorPricer pricer(kMarket, kBarriers, standard4, 0.0, 100.0);
    const double mean_a = pricer.power_moments().moments[1];
    double parity = 0.0;
    for (double f : {4.0, 4.5, 6.0})
      parity = std::max(parity, std::abs(pricer.value(f).result.price - disc * (f - mean_a)));
    o.detail.precision(10);
    o.detail << " analytic " << floor_valuation.result.price << ", mc " << mc_mean << " +/- "
             << mc_se;
    o.detail.precision(4);
    o.detail << ", z " << z << ", max parity error " << parity;
    o.require(z <= 3.0, "within 3 SE");
    o.require(parity <= 1e-8, "parity 1e-8");
  });

  report(8, "corridor convergence", [](Outcome& o) {
    const double horizon = 1.0;
    std::vector<double> per_coupon;
    o.detail.precision(5);
    for (int n : {4, 8, 16}) {
      const auto coupons = BarrierSchedule::coupons(0.0, horizon / n, static_cast<std::size_t>(n));
      const double exact =
          StructureFloorPricer(kMarket, kBarriers, coupons, 0.0, 100.0).value(n / 2.0).result.price;
      // same seed for every n: one path skeleton, only the strike changes
      const auto approx =
          approx_floor_via_corridor(kMarket, kBarriers, horizon, n, n / 2.0, mc(200000, 2048));
      const double gap = std::abs(exact - approx.mean);
      per_coupon.push_back(gap / n);
      o.detail << " n=" << n << ": exact " << exact << " approx " << approx.mean << " |diff| "
               << gap << " |diff|/n " << gap / n << ";";
    }
    const auto rows = occupation_convergence_experiment(kMarket, kBarriers, horizon, {4, 16, 64},
                                                        mc(50000, 256));
    o.detail << " mean |A/n - occupation/T|:";
    for (const auto& r : rows) o.detail << " n=" << r.n << " " << r.mean_gap << " (se " << r.std_error << ")";
    o.require(per_coupon[0] > per_coupon[1] && per_coupon[1] > per_coupon[2],
              "per-coupon difference strictly decreasing");
    o.require(rows[0].mean_gap > rows[1].mean_gap && rows[1].mean_gap > rows[2].mean_gap,
              "occupation gap strictly decreasing");
  });

  report(9, "CLI determinism with fixed seed", [](Outcome& o) {
    const std::string cli = DBARRIER_CLI_PATH;
    const std::string dir = DBARRIER_CONFIG_DIR;
    const std::vector<std::string> runs = {
        "--config " + dir + "/standard_one_window.ini --verify --json --paths 20000 --seed 11",
        "--config " + dir + "/standard_floor4.ini --verify --json --paths 20000 --steps 256",
        "--config " + dir + "/corridor16.ini --json --paths 20000 --steps 512",
        "--config " + dir + "/standard_floor4.ini --command verify --json --paths 20000 --steps 256",
    };
    int identical = 0;
    for (const auto& args : runs) {
      int s1 = 0, s2 = 0;
      const auto a = run_command(cli + " " + args, s1);
      const auto b = run_command(cli + " " + args, s2);
      const bool same = !a.empty() && a == b && s1 == s2;
      identical += same;
    }
    o.detail << " " << identical << "/" << runs.size() << " invocations reproduced byte-for-byte";
    o.require(identical == static_cast<int>(runs.size()), "bit-identical output");
  });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
