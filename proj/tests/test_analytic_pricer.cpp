#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dbarrier/analytic_pricer.hpp"
#include "oracles/reflection_series.hpp"

using namespace dbarrier;
using boost::math::quadrature::gauss_kronrod;

namespace {

const MarketParams kMarket(100.0, 0.03, 0.25);
const BarrierSpec kBarriers(80.0, 125.0);

double reflection(const MarketParams& m, const BarrierSpec& b, double t0, double len, double t,
                  double spot) {
  return oracle::one_window_price(spot, b.low(), b.up(), m.rate(), m.vol(), t0, len, t);
}

BarrierSchedule make(std::vector<Window> w) { return BarrierSchedule(std::move(w)); }

}  // namespace

TEST(PayoffCoefficients, ClosedFormExamples) {
  const auto s = payoff_fourier_coeffs(0.0, std::numbers::pi, 4);
  EXPECT_NEAR(s.coeff(1), 4.0 / std::numbers::pi, 1e-15);
  EXPECT_NEAR(s.coeff(2), 0.0, 1e-15);
  EXPECT_EQ(s.tau_label(), 0.0);
  EXPECT_THROW(payoff_fourier_coeffs(0.0, 0.0, 4), InvalidParameter);
  EXPECT_THROW(payoff_fourier_coeffs(0.0, 1.0, 0), InvalidParameter);
}

TEST(PayoffCoefficients, MatchDefiningIntegral) {
  for (auto [alpha, big_l] : {std::pair{-0.46, 0.446}, std::pair{0.75, 2.0},
                              std::pair{-3.0, 1.3}, std::pair{2.5, 5.0}}) {
    const int k_max = 40;
    const auto s = payoff_fourier_coeffs(alpha, big_l, k_max);
    for (int k = 1; k <= k_max; ++k) {
      auto f = [&](double x) {
        return std::exp(-alpha * x) * std::sin(k * std::numbers::pi * x / big_l);
      };
      const double ref =
          2.0 / big_l * gauss_kronrod<double, 61>::integrate(f, 0.0, big_l, 15, 1e-15);
      EXPECT_NEAR(s.coeff(k), ref, 1e-10) << "alpha " << alpha << " L " << big_l << " k " << k;
    }
  }
}

TEST(DecayThroughBarrier, Examples) {
  const auto s = payoff_fourier_coeffs(0.3, 1.7, 16);
  const auto same = decay_through_barrier(s, 0.0);
  for (std::size_t k = 1; k <= 16; ++k) EXPECT_EQ(same.coeff(k), s.coeff(k));

  const double p = 10.0 * std::pow(1.7 / std::numbers::pi, 2);
  const auto decayed = decay_through_barrier(s, p);
  for (std::size_t k = 1; k <= 16; ++k)
    EXPECT_LE(std::abs(decayed.coeff(k)), std::exp(-10.0) * std::abs(s.coeff(k)) + 1e-300);
  EXPECT_DOUBLE_EQ(decayed.tau_label(), p);

  const FourierState single(std::numbers::pi, {1.0, 0.0, 0.0});
  const auto one = decay_through_barrier(single, 1.0);
  EXPECT_NEAR(one.coeff(1), std::exp(-1.0), 1e-16);
  EXPECT_EQ(one.coeff(2), 0.0);
  EXPECT_THROW(decay_through_barrier(single, -1e-3), InvalidParameter);
}

TEST(DiffuseAndReproject, RejectsBadArguments) {
  const FourierState s(1.0, {1.0});
  EXPECT_THROW(diffuse_and_reproject(s, 0.0, 64), InvalidParameter);
  EXPECT_THROW(diffuse_and_reproject(s, 0.1, 4), InvalidParameter);
}

TEST(DiffuseAndReproject, ZeroStateStaysZero) {
  const FourierState zero(2.0, std::vector<double>(12, 0.0));
  const auto out = diffuse_and_reproject(zero, 0.3, 64);
  for (double c : out.coeffs()) EXPECT_EQ(c, 0.0);
}

TEST(DiffuseAndReproject, TinyDurationIsIdentity) {
  const auto s = decay_through_barrier(payoff_fourier_coeffs(-0.4, 0.9, 24), 1e-3);
  const auto out = diffuse_and_reproject(s, 1e-10, 128);
  for (std::size_t k = 1; k <= s.size(); ++k) EXPECT_NEAR(out.coeff(k), s.coeff(k), 1e-6);
}

TEST(DiffuseAndReproject, SingleModeMatchesBruteForce) {
  const double big_l = std::numbers::pi;
  const double d = 0.1;
  const int modes = 8;
  std::vector<double> c(modes, 0.0);
  c[0] = 1.0;
  const auto out = diffuse_and_reproject(FourierState(big_l, c), d, 128);
  // u(x) = int_0^pi sin(z) exp(-(z - x)^2 / (4 d)) / sqrt(4 pi d) dz, then
  // (2/pi) int_0^pi u(x) sin(m x) dx, both by adaptive Gauss-Kronrod.
  auto u = [&](double x) {
    auto g = [&](double z) {
      return std::sin(z) * std::exp(-(z - x) * (z - x) / (4.0 * d)) /
             std::sqrt(4.0 * std::numbers::pi * d);
    };
    return gauss_kronrod<double, 61>::integrate(g, 0.0, big_l, 15, 1e-14);
  };
  for (int m = 1; m <= modes; ++m) {
    auto h = [&](double x) { return u(x) * std::sin(m * x); };
    const double ref = 2.0 / big_l * gauss_kronrod<double, 31>::integrate(h, 0.0, big_l, 10, 1e-13);
    EXPECT_NEAR(out.coeff(m), ref, 1e-8) << "m = " << m;
  }
}

TEST(OnePeriod, AgreesWithMultiPeriodAndReflection) {
  const std::vector<std::tuple<MarketParams, BarrierSpec, double, double, double>> cases = {
      {kMarket, kBarriers, 0.25, 0.25, 100.0},
      {MarketParams(100.0, 0.05, 0.2), BarrierSpec(90.0, 115.0), 0.1, 0.5, 97.0},
      {MarketParams(50.0, 0.01, 0.6), BarrierSpec(30.0, 90.0), 1.0, 0.05, 60.0},
      {MarketParams(100.0, 0.08, 0.15), BarrierSpec(70.0, 105.0), 0.5, 1.0, 120.0},
  };
  for (const auto& [m, b, t0, len, spot] : cases) {
    const auto multi = price_multi_period(m, b, make({{t0, len}}), 0.0, spot);
    const auto one = price_one_period(m, b, t0, len, 0.0, spot);
    const double ref = reflection(m, b, t0, len, 0.0, spot);
    EXPECT_NEAR(multi.price, one.price, 1e-10);
    EXPECT_NEAR(multi.price, ref, 1e-8);
    EXPECT_NEAR(one.price, ref, 1e-8);
  }
}

TEST(OnePeriod, StandardCaseValue) {
  const auto r = price_multi_period(kMarket, kBarriers, make({{0.25, 0.25}}), 0.0, 100.0);
  EXPECT_NEAR(r.price, reflection(kMarket, kBarriers, 0.25, 0.25, 0.0, 100.0), 1e-10);
  EXPECT_EQ(r.status, PriceStatus::priced);
  EXPECT_THROW(price_one_period(kMarket, kBarriers, 0.25, 0.25, 0.25, 100.0), InvalidParameter);
}

TEST(InWindow, MatchesReflection) {
  for (double spot : {81.0, 95.0, 110.0, 124.0}) {
    const auto r = price_multi_period(kMarket, kBarriers, make({{0.25, 0.5}}), 0.4, spot);
    EXPECT_NEAR(r.price, reflection(kMarket, kBarriers, 0.25, 0.5, 0.4, spot), 1e-8)
        << "spot " << spot;
  }
}

TEST(InWindow, KnockedOutAndExpiry) {
  const auto sched = make({{0.25, 0.5}});
  const auto ko = price_multi_period(kMarket, kBarriers, sched, 0.4, 125.0);
  EXPECT_EQ(ko.status, PriceStatus::knocked_out);
  EXPECT_EQ(ko.price, 0.0);
  const auto at_end = price_multi_period(kMarket, kBarriers, sched, 0.75, 100.0);
  EXPECT_EQ(at_end.status, PriceStatus::priced);
  EXPECT_DOUBLE_EQ(at_end.price, 1.0);
}

TEST(Limits, WideBarriersGiveDiscountBond) {
  const MarketParams m(100.0, 0.05, 0.2);
  const BarrierSpec wide(1e-4, 1e8);
  const auto one = price_one_period(m, wide, 0.5, 0.5, 0.0, 100.0);
  EXPECT_NEAR(one.price / std::exp(-0.05), 1.0, 1e-4);
  const auto multi =
      price_multi_period(m, wide, make({{0.1, 0.2}, {0.5, 0.1}, {0.8, 0.2}}), 0.0, 100.0);
  EXPECT_NEAR(multi.price / std::exp(-0.05), 1.0, 1e-4);
}

TEST(Limits, ZeroWidthKnocksOut) {
  const BarrierSpec narrow(100.0 - 5e-3, 100.0 + 5e-3);
  EXPECT_LT(price_one_period(kMarket, narrow, 0.25, 0.25, 0.0, 100.0).price, 1e-6);
  EXPECT_LT(price_multi_period(kMarket, narrow, make({{0.25, 0.25}, {0.75, 0.25}}), 0.0, 100.0)
                .price,
            1e-6);
}

TEST(Limits, LongWindowUnderflowsToZero) {
  const BarrierSpec narrow(99.0, 101.0);
  const auto r = price_multi_period(kMarket, narrow, make({{0.0, 50.0}}), 0.0, 100.0);
  EXPECT_EQ(r.status, PriceStatus::priced);
  EXPECT_LT(r.price, 1e-300);
}

TEST(TwoPeriod, OperatorMatchesNestedQuadrature) {
  const auto sched = make({{0.25, 0.25}, {0.75, 0.25}});
  const auto op = price_multi_period(kMarket, kBarriers, sched, 0.0, 100.0);
  const auto nested = price_two_period_nested(kMarket, kBarriers, sched, 0.0, 100.0, 24, 64);
  EXPECT_NEAR(op.price, nested.price, 1e-6);
}

TEST(TwoPeriod, NestedRejectsOtherShapes) {
  EXPECT_THROW(price_two_period_nested(kMarket, kBarriers, make({{0.25, 0.25}}), 0.0, 100.0, 8, 16),
               InvalidParameter);
  EXPECT_THROW(price_two_period_nested(kMarket, kBarriers, make({{0.25, 0.25}, {0.75, 0.25}}),
                                       0.3, 100.0, 8, 16),
               InvalidParameter);
}

TEST(TwoPeriod, VanishingGapApproachesConcatenation) {
  const auto merged = price_multi_period(kMarket, kBarriers, make({{0.25, 0.5}}), 0.0, 100.0);
  const auto split =
      price_two_period_nested(kMarket, kBarriers, make({{0.25, 0.25}, {0.50001, 0.24999}}), 0.0,
                              100.0, 32, 96);
  EXPECT_NEAR(split.price, merged.price, 1e-4);
}

TEST(TwoPeriod, ZeroPayoffGivesZero) {
  PayoffProjector zero = [](double, double big_l, int modes) {
    return FourierState(big_l, std::vector<double>(static_cast<std::size_t>(modes), 0.0));
  };
  const DigitalPricer pricer(kMarket, kBarriers, {}, zero);
  EXPECT_EQ(pricer.price(make({{0.25, 0.25}, {0.75, 0.25}}), 0.0, 100.0).price, 0.0);
}

TEST(Concatenation, AdjacentWindowsPriceLikeTheirUnion) {
  const std::vector<std::pair<BarrierSchedule, BarrierSchedule>> cases = {
      {make({{0.25, 0.25}, {0.5, 0.25}}), make({{0.25, 0.5}})},
      {make({{0.1, 0.1}, {0.2, 0.3}, {0.7, 0.1}, {0.8, 0.1}}), make({{0.1, 0.4}, {0.7, 0.2}})},
  };
  for (const auto& [split, merged] : cases)
    for (double t : {0.0, 0.15})
      EXPECT_NEAR(price_multi_period(kMarket, kBarriers, split, t, 100.0).price,
                  price_multi_period(kMarket, kBarriers, merged, t, 100.0).price, 1e-10);
}

TEST(Monotonicity, WidthAndScheduleSupersets) {
  const std::vector<BarrierSchedule> nested_schedules = {
      make({{0.5, 0.1}}),
      make({{0.2, 0.1}, {0.5, 0.1}}),
      make({{0.2, 0.1}, {0.5, 0.1}, {0.9, 0.2}}),
  };
  double prev_sched = 1.0;
  for (const auto& s : nested_schedules) {
    const double p = price_multi_period(kMarket, kBarriers, s, 0.0, 100.0).price;
    EXPECT_LE(p, prev_sched + 1e-12);
    prev_sched = p;
  }
  for (const auto& s : nested_schedules) {
    double prev = 0.0;
    for (double w : {1.1, 1.2, 1.4, 1.8, 3.0}) {
      const double p = price_multi_period(kMarket, BarrierSpec(100.0 / w, 100.0 * w), s, 0.0, 100.0).price;
      EXPECT_GE(p, prev - 1e-12);
      prev = p;
    }
  }
}

TEST(Truncation, DoublingModesStaysWithinBound) {
  const auto sched = make({{0.25, 0.02}, {0.5, 0.05}});
  PricingParams p;
  p.adaptive = false;
  for (int k : {4, 8, 16}) {
    p.k_max = k;
    const auto coarse = price_multi_period(kMarket, kBarriers, sched, 0.0, 100.0, p);
    p.k_max = 2 * k;
    const auto fine = price_multi_period(kMarket, kBarriers, sched, 0.0, 100.0, p);
    EXPECT_LE(std::abs(fine.price - coarse.price),
              coarse.truncation_bound + coarse.quadrature_error + 1e-12)
        << "K = " << k;
  }
}

TEST(Truncation, AdaptiveRuleRaisesModesForShortWindows) {
  const auto r = price_multi_period(kMarket, kBarriers, make({{0.25, 1e-4}}), 0.0, 100.0);
  EXPECT_GT(r.modes, defaults::kMax);
  EXPECT_NEAR(r.price, reflection(kMarket, kBarriers, 0.25, 1e-4, 0.0, 100.0), 1e-8);
}

TEST(Bounds, PriceWithinDiscount) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    const MarketParams m(100.0, 0.005 + 0.1 * u(rng), 0.05 + 0.6 * u(rng));
    const BarrierSpec b(100.0 - 40.0 * u(rng) - 1.0, 100.0 + 60.0 * u(rng) + 1.0);
    const double s0 = 0.5 * u(rng);
    const double l0 = 0.02 + 0.3 * u(rng);
    const auto sched = make({{s0, l0}, {s0 + l0 + 0.1 * u(rng), 0.02 + 0.3 * u(rng)}});
    const auto r = price_multi_period(m, b, sched, 0.0, 100.0);
    EXPECT_GE(r.price, 0.0);
    EXPECT_LE(r.price, r.discount_factor);
  }
}

TEST(Determinism, RepeatedPricingIsBitIdentical) {
  const auto sched = make({{0.25, 0.25}, {0.75, 0.25}, {1.25, 0.1}});
  const DigitalPricer pricer(kMarket, kBarriers);
  const double a = pricer.price(sched, 0.0, 100.0).price;
  const double b = pricer.price(sched, 0.0, 100.0).price;
  const double c = price_multi_period(kMarket, kBarriers, sched, 0.0, 100.0).price;
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}
