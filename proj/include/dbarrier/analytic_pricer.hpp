#pragma once

// Multi-period double-barrier digital prices in the heat-equation picture.
//
// In transformed time the value function U is propagated from the payoff
// (tau = 0) backwards through the schedule. Inside a barrier window U solves
// the Dirichlet heat problem on (0, L) and each sine mode decays by
// exp(-(k pi / L)^2 p). Between windows there are no barriers, so U (extended
// by zero outside (0, L)) is convolved with the free heat kernel and then
// projected back onto the sine basis of the next window. At the valuation
// point the series is evaluated directly (t inside a window) or through one
// last pointwise convolution (barriers inactive at t).

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "dbarrier/core_model.hpp"
#include "dbarrier/defaults.hpp"
#include "dbarrier/error.hpp"
#include "dbarrier/quadrature.hpp"

namespace dbarrier {

/// Truncated sine series U(x) = sum_k coeffs[k-1] sin(k pi x / L) on (0, L),
/// zero outside.
class FourierState {
 public:
  FourierState(double big_l, std::vector<double> coeffs, double tau_label = 0.0)
      : big_l_(big_l), coeffs_(std::move(coeffs)), tau_label_(tau_label) {
    if (!(big_l_ > 0.0)) throw InvalidParameter("FourierState: L must be positive");
    if (coeffs_.empty()) throw InvalidParameter("FourierState: need at least one mode");
    for (double c : coeffs_)
      if (!std::isfinite(c)) throw NumericalFailure("FourierState: non-finite coefficient");
  }

  double big_l() const noexcept { return big_l_; }
  double tau_label() const noexcept { return tau_label_; }
  std::span<const double> coeffs() const noexcept { return coeffs_; }
  std::size_t size() const noexcept { return coeffs_.size(); }
  /// Coefficient of mode k, 1-based.
  double coeff(std::size_t k) const { return coeffs_.at(k - 1); }

  double evaluate(double x) const {
    if (!(x > 0.0 && x < big_l_)) return 0.0;
    const double phi = std::numbers::pi * x / big_l_;
    const double c1 = std::cos(phi);
    const double s1 = std::sin(phi);
    double ck = c1;
    double sk = s1;
    double sum = 0.0;
    for (double b : coeffs_) {
      sum += b * sk;
      const double next_c = ck * c1 - sk * s1;
      sk = sk * c1 + ck * s1;
      ck = next_c;
    }
    return sum;
  }

 private:
  double big_l_;
  std::vector<double> coeffs_;
  double tau_label_;
};

enum class PriceStatus { priced, knocked_out };

inline const char* to_string(PriceStatus s) {
  return s == PriceStatus::priced ? "priced" : "knocked_out";
}

struct PriceResult {
  double price = 0.0;
  double truncation_bound = 0.0;  ///< estimated size of the dropped series tail
  double quadrature_error = 0.0;  ///< change under a coarser quadrature rule
  PriceStatus status = PriceStatus::priced;
  double discount_factor = 1.0;   ///< exp(-r (T_end - t))
  int modes = 0;                  ///< number of sine modes used
  int nodes = 0;                  ///< quadrature nodes used

  /// Undiscounted survival probability E[prod C_i].
  double probability() const { return discount_factor > 0.0 ? price / discount_factor : 0.0; }
};

struct PricingParams {
  int k_max = defaults::kMax;            ///< mode count, or its floor when adaptive
  int quad_nodes = defaults::kQuadNodes;  ///< minimum Gauss-Legendre nodes
  bool adaptive = true;                   ///< raise K until the series tail is negligible
  int k_cap = defaults::kCap;
  bool estimate_quadrature_error = true;

  void validate() const {
    if (k_max < 1) throw InvalidParameter("k_max must be >= 1");
    if (quad_nodes < 8) throw InvalidParameter("quad_nodes must be >= 8");
    if (k_cap < 1) throw InvalidParameter("k_cap must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Elementary operations on FourierState.

/// Sine coefficients of the digital payoff U(x, 0) = exp(-alpha x) on (0, L).
inline FourierState payoff_fourier_coeffs(double alpha, double big_l, int k_max) {
  if (!(big_l > 0.0)) throw InvalidParameter("payoff_fourier_coeffs: L must be positive");
  if (k_max < 1) throw InvalidParameter("payoff_fourier_coeffs: k_max must be >= 1");
  const double pi = std::numbers::pi;
  const double tail = std::exp(-alpha * big_l);
  const double al2 = alpha * alpha * big_l * big_l;
  std::vector<double> b(static_cast<std::size_t>(k_max));
  for (int k = 1; k <= k_max; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    b[k - 1] = 2.0 * k * pi * (1.0 - sign * tail) / (al2 + k * k * pi * pi);
  }
  return FourierState(big_l, std::move(b), 0.0);
}

/// Dirichlet heat flow on (0, L) for transformed duration p.
inline FourierState decay_through_barrier(const FourierState& state, double p) {
  if (!(p >= 0.0)) throw InvalidParameter("decay_through_barrier: negative duration");
  const double w = std::numbers::pi / state.big_l();
  std::vector<double> c(state.coeffs().begin(), state.coeffs().end());
  for (std::size_t k = 1; k <= c.size(); ++k) {
    const double q = w * static_cast<double>(k);
    c[k - 1] *= std::exp(-q * q * p);
  }
  return FourierState(state.big_l(), std::move(c), state.tau_label() + p);
}

namespace detail {

/// Integration range in y for (1/sqrt(2 pi)) int U(x + y s) e^{-y^2/2} dy
/// when U vanishes outside (0, L). The Gaussian is cut at
/// |y| <= cutoff + |alpha| s, which also covers the exp(-alpha x) envelope
/// any admissible U obeys.
inline std::pair<double, double> gaussian_range(double x, double s, double big_l,
                                                double alpha) {
  const double cut = defaults::kGaussianCutoff + std::abs(alpha) * s;
  return {std::max(-x / s, -cut), std::min((big_l - x) / s, cut)};
}

/// Gauss-Legendre size for a y-range of width `range` on which the highest
/// mode oscillates at frequency K pi s / L; never above `max_nodes`.
inline int inner_nodes(double s, double range, double big_l, std::size_t modes, int max_nodes) {
  const double omega = static_cast<double>(modes) * std::numbers::pi * s / big_l;
  const double n = std::ceil(0.5 * omega * range) + 32.0;
  return std::min(max_nodes, std::max(48, static_cast<int>(std::min(n, 1e9))));
}

/// I_k(x) = (1/sqrt(2 pi)) int_lo^hi sin(k pi (x + y s) / L) e^{-y^2/2} dy for
/// k = 1..K, accumulated into out.
inline void accumulate_mode_convolutions(double x, double s, double big_l, double alpha,
                                         int max_nodes, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const auto [lo, hi] = gaussian_range(x, s, big_l, alpha);
  if (!(hi > lo)) return;
  const auto rule = gauss_legendre(inner_nodes(s, hi - lo, big_l, out.size(), max_nodes));
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  const double norm = half / std::sqrt(2.0 * std::numbers::pi);
  const double w = std::numbers::pi / big_l;
  for (std::size_t j = 0; j < rule->size(); ++j) {
    const double y = mid + half * rule->nodes[j];
    const double g = norm * rule->weights[j] * std::exp(-0.5 * y * y);
    const double phi = w * (x + y * s);
    const double c1 = std::cos(phi);
    const double s1 = std::sin(phi);
    double ck = c1;
    double sk = s1;
    for (double& o : out) {
      o += g * sk;
      const double next_c = ck * c1 - sk * s1;
      sk = sk * c1 + ck * s1;
      ck = next_c;
    }
  }
}

/// Row-major K x K matrix mapping sine coefficients before a free period of
/// transformed length d to those after it (restricted to (0, L)).
struct DiffusionMatrix {
  int modes = 0;
  std::vector<double> entries;

  std::vector<double> apply(std::span<const double> c) const {
    std::vector<double> out(static_cast<std::size_t>(modes), 0.0);
    for (int m = 0; m < modes; ++m) {
      const double* row = entries.data() + static_cast<std::size_t>(m) * modes;
      double acc = 0.0;
      for (int k = 0; k < modes; ++k) acc += row[k] * c[k];
      out[m] = acc;
    }
    return out;
  }
};

inline DiffusionMatrix build_diffusion_matrix(double big_l, double alpha, double d, int modes,
                                              int nodes) {
  const auto rule = gauss_legendre(nodes);
  const double s = std::sqrt(2.0 * d);
  const auto z = map_rule(*rule, 0.0, big_l);
  const std::size_t K = static_cast<std::size_t>(modes);
  const std::size_t N = rule->size();

  // conv[q][k] = I_k(z_q); proj[q][m] = (2/L) w_q sin(m pi z_q / L)
  std::vector<double> conv(N * K);
  std::vector<double> proj(N * K);
  const double w = std::numbers::pi / big_l;
  for (std::size_t q = 0; q < N; ++q) {
    accumulate_mode_convolutions(z.nodes[q], s, big_l, alpha, nodes,
                                 std::span<double>(conv.data() + q * K, K));
    for (std::size_t m = 0; m < K; ++m)
      proj[q * K + m] = (2.0 / big_l) * z.weights[q] * std::sin(w * (m + 1.0) * z.nodes[q]);
  }
  DiffusionMatrix out;
  out.modes = modes;
  out.entries.assign(K * K, 0.0);
  for (std::size_t q = 0; q < N; ++q) {
    const double* pr = proj.data() + q * K;
    const double* cv = conv.data() + q * K;
    for (std::size_t m = 0; m < K; ++m) {
      const double a = pr[m];
      double* row = out.entries.data() + m * K;
      for (std::size_t k = 0; k < K; ++k) row[k] += a * cv[k];
    }
  }
  return out;
}

/// Same map as build_diffusion_matrix(...).apply(c) without forming the matrix.
inline std::vector<double> apply_diffusion(double big_l, double alpha, double d,
                                           std::span<const double> c, int nodes) {
  const auto rule = gauss_legendre(nodes);
  const double s = std::sqrt(2.0 * d);
  const auto z = map_rule(*rule, 0.0, big_l);
  const std::size_t K = c.size();
  const double w = std::numbers::pi / big_l;
  std::vector<double> conv(K);
  std::vector<double> out(K, 0.0);
  for (std::size_t q = 0; q < rule->size(); ++q) {
    accumulate_mode_convolutions(z.nodes[q], s, big_l, alpha, nodes, conv);
    double v = 0.0;
    for (std::size_t k = 0; k < K; ++k) v += conv[k] * c[k];
    v *= (2.0 / big_l) * z.weights[q];
    const double c1 = std::cos(w * z.nodes[q]);
    const double s1 = std::sin(w * z.nodes[q]);
    double ck = c1;
    double sk = s1;
    for (double& o : out) {
      o += v * sk;
      const double next_c = ck * c1 - sk * s1;
      sk = sk * c1 + ck * s1;
      ck = next_c;
    }
  }
  return out;
}

inline int effective_nodes(int quad_nodes, int modes) {
  return std::max(quad_nodes, modes + modes / 2 + 16);
}

}  // namespace detail

/// Free heat flow of duration d applied to the zero extension of the state,
/// followed by re-projection onto the sine basis of (0, L).
inline FourierState diffuse_and_reproject(const FourierState& state, double d, int quad_nodes,
                                          double alpha = 0.0) {
  if (!(d > 0.0)) throw InvalidParameter("diffuse_and_reproject: duration must be positive");
  if (quad_nodes < 8) throw InvalidParameter("diffuse_and_reproject: quad_nodes must be >= 8");
  return FourierState(state.big_l(),
                      detail::apply_diffusion(state.big_l(), alpha, d, state.coeffs(), quad_nodes),
                      state.tau_label() + d);
}

/// (1/sqrt(2 pi)) int U(x + y sqrt(2 d)) e^{-y^2/2} dy for the zero-extended
/// state; x may lie anywhere on the real line.
inline double evaluate_diffused(const FourierState& state, double x, double d, int quad_nodes,
                                double alpha = 0.0) {
  if (!(d > 0.0)) throw InvalidParameter("evaluate_diffused: duration must be positive");
  std::vector<double> modes(state.size());
  detail::accumulate_mode_convolutions(x, std::sqrt(2.0 * d), state.big_l(), alpha, quad_nodes,
                                       modes);
  double sum = 0.0;
  for (std::size_t k = 0; k < modes.size(); ++k) sum += state.coeffs()[k] * modes[k];
  return sum;
}

// ---------------------------------------------------------------------------
// Truncation control.

namespace detail {

/// Smallest K with exp(-(K pi / L)^2 p_min) below the tolerance, measured
/// against the dynamic range exp(|alpha| L) of the payoff on (0, L).
inline int modes_for_decay(double big_l, double alpha, double p_min) {
  const double target = -std::log(defaults::kTruncationTolerance) + std::abs(alpha) * big_l;
  const double k = big_l / std::numbers::pi * std::sqrt(target / p_min);
  if (!std::isfinite(k) || k > 1e9) return std::numeric_limits<int>::max();
  return static_cast<int>(std::ceil(k));
}

inline int choose_modes(const PricingParams& params, double big_l, double alpha,
                        double p_min) {
  if (!params.adaptive) return params.k_max;
  const int rule = modes_for_decay(big_l, alpha, p_min);
  return std::clamp(std::max(params.k_max, rule), 1, std::max(params.k_cap, params.k_max));
}

/// Bound on sum_{k > K} B_k exp(-(k pi / L)^2 p_min) with B_k the coefficient
/// envelope, summed over `windows` truncations.
inline double tail_bound(double big_l, double alpha, double p_min, int modes, int windows) {
  const double a = std::pow(std::numbers::pi / big_l, 2) * p_min;
  const double k1 = modes + 1.0;
  const double env = 2.0 * (1.0 + std::exp(-alpha * big_l));
  // One window: |b_k| <= env / (k pi). Later windows start from a
  // re-projected state whose coefficients are only bounded by env.
  const double lead = windows == 1 ? env / (k1 * std::numbers::pi) : env;
  const double first = lead * std::exp(-a * k1 * k1);
  const double ratio = std::exp(-a * (2.0 * k1 + 1.0));
  if (!(ratio < 1.0)) return std::numeric_limits<double>::infinity();
  return windows * first / (1.0 - ratio);
}

}  // namespace detail

/// Initial sine coefficients of U(., 0) given (alpha, L, K).
using PayoffProjector = std::function<FourierState(double alpha, double big_l, int modes)>;

// ---------------------------------------------------------------------------

/// Prices digital double-barrier contracts for fixed market data and
/// barriers. Diffusion matrices are cached per (gap, K, nodes), so repeated
/// pricing of schedules on a common tenor grid is cheap. Safe to share
/// between threads.
class DigitalPricer {
 public:
  DigitalPricer(MarketParams market, BarrierSpec barriers, PricingParams params = {},
                PayoffProjector payoff = {})
      : market_(market), barriers_(barriers), params_(params), payoff_(std::move(payoff)) {
    params_.validate();
    const AlphaBeta ab = alpha_beta(market.rate(), market.vol());
    alpha_ = ab.alpha;
    beta_ = ab.beta;
    big_l_ = barriers.log_width();
    if (!payoff_) payoff_ = payoff_fourier_coeffs;
  }

  const MarketParams& market() const noexcept { return market_; }
  const BarrierSpec& barriers() const noexcept { return barriers_; }
  const PricingParams& params() const noexcept { return params_; }

  PriceResult price(const BarrierSchedule& schedule, double t, double spot_at_t) const {
    const HeatCoords hc = to_heat_coords(market_, barriers_, schedule, t, spot_at_t);
    PriceResult res;
    res.discount_factor = std::exp(-market_.rate() * (hc.t_end - t));
    if (hc.state == ValuationState::knocked_out) {
      res.status = PriceStatus::knocked_out;
      return res;
    }
    const Plan plan = make_plan(hc);
    if (plan.windows.empty()) {
      // t at the end of the last window with the spot inside the corridor.
      res.price = res.discount_factor;
      return res;
    }
    double p_min = std::numeric_limits<double>::infinity();
    for (const auto& w : plan.windows) p_min = std::min(p_min, w.p);
    const int modes = detail::choose_modes(params_, big_l_, alpha_, p_min);
    const int nodes = detail::effective_nodes(params_.quad_nodes, modes);
    const double scale = std::exp(alpha_ * hc.x + beta_ * hc.tau);

    const double u = propagate(plan, hc.x, modes, nodes);
    res.modes = modes;
    res.nodes = nodes;
    res.price = std::clamp(scale * u, 0.0, res.discount_factor);
    res.truncation_bound =
        scale * detail::tail_bound(big_l_, alpha_, p_min, modes,
                                   static_cast<int>(plan.windows.size()));
    if (params_.estimate_quadrature_error && plan.needs_quadrature()) {
      const int coarse = std::max(8, nodes * 3 / 4);
      res.quadrature_error = std::abs(scale * (u - propagate(plan, hc.x, modes, coarse)));
    }
    return res;
  }

 private:
  struct PlanWindow {
    double p;          ///< transformed length
    double gap_after;  ///< free transformed time until the next (newer) window
  };
  struct Plan {
    std::vector<PlanWindow> windows;  ///< oldest first
    double final_gap = 0.0;           ///< transformed time from t to the first window

    bool needs_quadrature() const {
      if (final_gap > 0.0) return true;
      for (const auto& w : windows)
        if (w.gap_after > 0.0) return true;
      return false;
    }
  };

  Plan make_plan(const HeatCoords& hc) const {
    Plan plan;
    const auto& img = hc.tau_images;
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double gap =
          i + 1 < img.size() ? img[i].tau_end - (img[i + 1].tau_end + img[i + 1].p) : 0.0;
      if (!plan.windows.empty() && plan.windows.back().gap_after < defaults::kMinTransformedGap) {
        plan.windows.back().p += img[i].p;
        plan.windows.back().gap_after = gap;
      } else {
        plan.windows.push_back({img[i].p, gap});
      }
    }
    if (!img.empty()) {
      const double g = hc.tau - (img.front().tau_end + img.front().p);
      plan.final_gap = g < defaults::kMinTransformedGap ? 0.0 : g;
    }
    return plan;
  }

  std::shared_ptr<const detail::DiffusionMatrix> diffusion(double d, int modes,
                                                           int nodes) const {
    const auto key = std::make_tuple(d, modes, nodes);
    {
      std::lock_guard lock(cache_->mutex);
      auto it = cache_->matrices.find(key);
      if (it != cache_->matrices.end()) return it->second;
    }
    auto m = std::make_shared<const detail::DiffusionMatrix>(
        detail::build_diffusion_matrix(big_l_, alpha_, d, modes, nodes));
    std::lock_guard lock(cache_->mutex);
    return cache_->matrices.emplace(key, std::move(m)).first->second;
  }

  /// U(x, tau) for the plan; windows are traversed newest first.
  double propagate(const Plan& plan, double x, int modes, int nodes) const {
    FourierState state = payoff_(alpha_, big_l_, modes);
    if (static_cast<int>(state.size()) != modes)
      throw InvalidParameter("payoff projector returned the wrong number of modes");
    for (std::size_t i = plan.windows.size(); i-- > 0;) {
      const PlanWindow& w = plan.windows[i];
      state = decay_through_barrier(state, w.p);
      if (i > 0) {
        const double gap = plan.windows[i - 1].gap_after;
        auto next = modes <= kMaxCachedModes
                        ? diffusion(gap, modes, nodes)->apply(state.coeffs())
                        : detail::apply_diffusion(big_l_, alpha_, gap, state.coeffs(), nodes);
        state = FourierState(big_l_, std::move(next), state.tau_label() + gap);
      }
    }
    if (plan.final_gap > 0.0) return evaluate_diffused(state, x, plan.final_gap, nodes, alpha_);
    return state.evaluate(x);
  }

  static constexpr int kMaxCachedModes = 512;

  struct Cache {
    std::mutex mutex;
    std::map<std::tuple<double, int, int>, std::shared_ptr<const detail::DiffusionMatrix>>
        matrices;
  };

  MarketParams market_;
  BarrierSpec barriers_;
  PricingParams params_;
  PayoffProjector payoff_;
  double alpha_ = 0.0;
  double beta_ = 0.0;
  double big_l_ = 0.0;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

/// Price of the digital paying 1 at the end of the last window if the spot
/// stays strictly inside the corridor during every window.
inline PriceResult price_multi_period(const MarketParams& market, const BarrierSpec& barriers,
                                      const BarrierSchedule& schedule, double t,
                                      double spot_at_t, const PricingParams& params = {}) {
  return DigitalPricer(market, barriers, params).price(schedule, t, spot_at_t);
}

/// One barrier period [t0, t0 + p_len] valued before it starts, by the
/// closed-form series: sqrt(2 pi) (S/b_low)^alpha sum_k k (1 - (-1)^k e^{-alpha L})
/// / (alpha^2 L^2 + k^2 pi^2) e^{-(k pi/L)^2 p + beta tau} times a Gaussian
/// integral of sin(k pi (x + y sqrt(2 (tau - p))) / L).
inline PriceResult price_one_period(const MarketParams& market, const BarrierSpec& barriers,
                                    double t0, double p_len, double t, double spot_at_t,
                                    const PricingParams& params = {}) {
  params.validate();
  if (!(p_len > 0.0)) throw InvalidParameter("price_one_period: period length must be > 0");
  if (!(t < t0))
    throw InvalidParameter("price_one_period: valuation time must precede the window");
  if (!(spot_at_t > 0.0)) throw InvalidParameter("price_one_period: spot must be positive");

  const double pi = std::numbers::pi;
  const auto [alpha, beta] = alpha_beta(market.rate(), market.vol());
  const double big_l = barriers.log_width();
  const double x = std::log(spot_at_t / barriers.low());
  const double hv = market.half_variance();
  const double tau = hv * (t0 + p_len - t);
  const double p = hv * p_len;
  const double s = std::sqrt(2.0 * (tau - p));
  const int modes = detail::choose_modes(params, big_l, alpha, p);
  const int nodes = detail::effective_nodes(params.quad_nodes, modes);

  const double prefactor = std::sqrt(2.0 * pi) * std::pow(spot_at_t / barriers.low(), alpha) *
                           std::exp(beta * tau);
  const double tail = std::exp(-alpha * big_l);
  const auto [lo, hi] = detail::gaussian_range(x, s, big_l, alpha);

  auto series = [&](int n) {
    if (!(hi > lo)) return 0.0;
    const auto rule = gauss_legendre(n);
    const auto y = map_rule(*rule, lo, hi);
    double sum = 0.0;
    for (int k = 1; k <= modes; ++k) {
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      const double q = k * pi / big_l;
      const double coef = k * (1.0 - sign * tail) / (alpha * alpha * big_l * big_l + k * k * pi * pi) *
                          std::exp(-q * q * p);
      if (coef == 0.0) continue;
      double integral = 0.0;
      for (std::size_t j = 0; j < y.nodes.size(); ++j)
        integral += y.weights[j] * std::sin(q * (x + y.nodes[j] * s)) *
                    std::exp(-0.5 * y.nodes[j] * y.nodes[j]);
      sum += coef * integral;
    }
    return sum;
  };

  PriceResult res;
  res.discount_factor = std::exp(-market.rate() * (t0 + p_len - t));
  res.modes = modes;
  res.nodes = nodes;
  const double fine = series(nodes);
  res.price = std::clamp(prefactor * fine, 0.0, res.discount_factor);
  const double scale = std::exp(alpha * x + beta * tau);
  res.truncation_bound = scale * detail::tail_bound(big_l, alpha, p, modes, 1);
  if (params.estimate_quadrature_error)
    res.quadrature_error = std::abs(prefactor * (fine - series(std::max(8, nodes * 3 / 4))));
  return res;
}

/// Literal tensor-quadrature evaluation of the two-window value function:
/// sums over (k1, k2) and Gauss-Legendre integrals over (x1, x2, y1, y2)
/// without any operator reformulation. Intended as a test oracle; cost is
/// O(nodes^3 * k_max).
inline PriceResult price_two_period_nested(const MarketParams& market,
                                           const BarrierSpec& barriers,
                                           const BarrierSchedule& schedule, double t,
                                           double spot_at_t, int k_max, int quad_nodes) {
  if (schedule.size() != 2)
    throw InvalidParameter("price_two_period_nested: schedule must have exactly two windows");
  if (k_max < 1 || quad_nodes < 8)
    throw InvalidParameter("price_two_period_nested: need k_max >= 1 and quad_nodes >= 8");
  const Window& first = schedule[0];
  const Window& last = schedule[1];
  if (!(t < first.start))
    throw InvalidParameter("price_two_period_nested: valuation must precede the first window");
  if (!(last.start > first.end()))
    throw InvalidParameter("price_two_period_nested: windows must be separated by a gap");

  const double pi = std::numbers::pi;
  const auto [alpha, beta] = alpha_beta(market.rate(), market.vol());
  const double big_l = barriers.log_width();
  const double hv = market.half_variance();
  const double t_end = last.end();
  const double x = std::log(spot_at_t / barriers.low());
  const double tau = hv * (t_end - t);
  const double p_last = hv * last.length;    // window occupying [0, p_last]
  const double p_first = hv * first.length;  // window occupying [tau1, tau1 + p_first]
  const double tau1 = hv * (t_end - first.end());
  const double s1 = std::sqrt(2.0 * (tau1 - p_last));
  const double s2 = std::sqrt(2.0 * (tau - (tau1 + p_first)));
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * pi);
  const auto rule = gauss_legendre(quad_nodes);
  const auto xs = map_rule(*rule, 0.0, big_l);
  const std::size_t K = static_cast<std::size_t>(k_max);

  auto mode = [&](std::size_t k) { return static_cast<double>(k) * pi / big_l; };

  // x1 integral of g_0's payoff factor for each k1.
  std::vector<double> a1(K, 0.0);
  for (std::size_t k = 1; k <= K; ++k)
    for (std::size_t i = 0; i < xs.nodes.size(); ++i)
      a1[k - 1] += xs.weights[i] * std::exp(-alpha * xs.nodes[i]) * std::sin(mode(k) * xs.nodes[i]);

  double total = 0.0;
  const auto [lo2, hi2] = detail::gaussian_range(x, s2, big_l, alpha);
  if (hi2 > lo2) {
    const auto y2s = map_rule(*rule, lo2, hi2);
    for (std::size_t j2 = 0; j2 < y2s.nodes.size(); ++j2) {
      const double y2 = y2s.nodes[j2];
      const double xp = x + y2 * s2;  // argument of g_1
      const double h1_weight = y2s.weights[j2] * inv_sqrt_2pi * std::exp(-0.5 * y2 * y2);
      for (std::size_t i2 = 0; i2 < xs.nodes.size(); ++i2) {
        const double x2 = xs.nodes[i2];
        // sum over k2 of the g_1 factors
        double g1 = 0.0;
        for (std::size_t k2 = 1; k2 <= K; ++k2) {
          const double q = mode(k2);
          g1 += (2.0 / big_l) * std::sin(q * x2) * std::sin(q * xp) * std::exp(-q * q * p_first);
        }
        // h_0 at (x2, tau1): y1 integral of g_0
        double h0 = 0.0;
        const auto [lo1, hi1] = detail::gaussian_range(x2, s1, big_l, alpha);
        if (hi1 > lo1) {
          const auto y1s = map_rule(*rule, lo1, hi1);
          for (std::size_t j1 = 0; j1 < y1s.nodes.size(); ++j1) {
            const double y1 = y1s.nodes[j1];
            const double z = x2 + y1 * s1;
            double g0 = 0.0;
            for (std::size_t k1 = 1; k1 <= K; ++k1) {
              const double q = mode(k1);
              g0 += (2.0 / big_l) * a1[k1 - 1] * std::sin(q * z) * std::exp(-q * q * p_last);
            }
            h0 += y1s.weights[j1] * inv_sqrt_2pi * std::exp(-0.5 * y1 * y1) * g0;
          }
        }
        total += h1_weight * xs.weights[i2] * g1 * h0;
      }
    }
  }

  PriceResult res;
  res.discount_factor = std::exp(-market.rate() * (t_end - t));
  res.modes = k_max;
  res.nodes = quad_nodes;
  res.price = std::exp(alpha * x + beta * tau) * total;
  return res;
}

}  // namespace dbarrier
