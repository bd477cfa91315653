#pragma once

// Market/contract data and the Black-Scholes to heat-equation change of
// variables shared by every pricer.
//
//   f(S, t) = exp(alpha x + beta tau) U(x, tau),
//   x = log(S / b_low),  tau = vol^2 / 2 * (T_end - t),
//
// turns the Black-Scholes PDE into U_tau = U_xx with Dirichlet conditions at
// x = 0 and x = L = log(b_up / b_low) while a barrier window is active.

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dbarrier/defaults.hpp"
#include "dbarrier/error.hpp"

namespace dbarrier {

/// Risk-neutral GBM parameters: dS/S = rate dt + vol dW.
class MarketParams {
 public:
  MarketParams(double spot, double rate, double vol)
      : spot_(spot), rate_(rate), vol_(vol) {
    if (!(spot > 0.0) || !std::isfinite(spot))
      throw InvalidParameter("market: spot must be positive");
    if (!(rate > 0.0) || !std::isfinite(rate))
      throw InvalidParameter("market: rate must be positive");
    if (!(vol > 0.0) || !std::isfinite(vol))
      throw InvalidParameter("market: vol must be positive");
  }

  double spot() const noexcept { return spot_; }
  double rate() const noexcept { return rate_; }
  double vol() const noexcept { return vol_; }

  /// vol^2 / 2, the factor mapping calendar time to transformed time.
  double half_variance() const noexcept { return 0.5 * vol_ * vol_; }

  MarketParams with_spot(double spot) const { return {spot, rate_, vol_}; }

 private:
  double spot_;
  double rate_;
  double vol_;
};

class BarrierSpec {
 public:
  BarrierSpec(double low, double up) : low_(low), up_(up) {
    if (!(low > 0.0) || !std::isfinite(low))
      throw InvalidParameter("barriers: low must be positive");
    if (!(up > low) || !std::isfinite(up))
      throw InvalidParameter("barriers: up must be greater than low");
  }

  double low() const noexcept { return low_; }
  double up() const noexcept { return up_; }
  /// L = log(up / low).
  double log_width() const noexcept { return std::log(up_ / low_); }
  /// Strict inclusion, matching the open corridor of the payoff.
  bool contains(double spot) const noexcept { return spot > low_ && spot < up_; }

 private:
  double low_;
  double up_;
};

/// One active barrier period [start, start + length].
struct Window {
  double start = 0.0;
  double length = 0.0;

  double end() const noexcept { return start + length; }
  friend bool operator==(const Window&, const Window&) = default;
};

namespace detail {

inline double time_tolerance(double scale) {
  return defaults::kTimeTolerance * std::max(1.0, std::abs(scale));
}

}  // namespace detail

/// Sorted, non-overlapping list of barrier windows. Adjacent windows
/// (end of one == start of the next) are allowed; see concatenate_windows.
class BarrierSchedule {
 public:
  BarrierSchedule() = default;

  explicit BarrierSchedule(std::vector<Window> windows) : windows_(std::move(windows)) {
    for (std::size_t i = 0; i < windows_.size(); ++i) {
      const Window& w = windows_[i];
      if (!(w.start >= 0.0) || !std::isfinite(w.start))
        throw InvalidSchedule("window " + std::to_string(i) + ": start must be >= 0");
      if (!(w.length > 0.0) || !std::isfinite(w.length))
        throw InvalidSchedule("window " + std::to_string(i) + ": length must be > 0");
      if (i > 0) {
        const Window& prev = windows_[i - 1];
        if (w.start < prev.start)
          throw InvalidSchedule("windows must be sorted by start");
        if (prev.end() > w.start + detail::time_tolerance(w.start))
          throw InvalidSchedule("windows " + std::to_string(i - 1) + " and " +
                                std::to_string(i) + " overlap");
      }
    }
  }

  /// Windows [T_i, T_i + period] for the given tenor dates.
  static BarrierSchedule from_tenors(std::span<const double> tenors, double period) {
    std::vector<Window> w;
    w.reserve(tenors.size());
    for (double t : tenors) w.push_back({t, period});
    return BarrierSchedule(std::move(w));
  }

  /// n adjacent coupon windows of common length starting at first_start.
  static BarrierSchedule coupons(double first_start, double period, std::size_t n) {
    std::vector<Window> w;
    w.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      w.push_back({first_start + static_cast<double>(i) * period, period});
    return BarrierSchedule(std::move(w));
  }

  std::span<const Window> windows() const noexcept { return windows_; }
  std::size_t size() const noexcept { return windows_.size(); }
  bool empty() const noexcept { return windows_.empty(); }
  const Window& operator[](std::size_t i) const { return windows_[i]; }

  double end_time() const {
    if (windows_.empty()) throw InvalidSchedule("empty schedule");
    return windows_.back().end();
  }

  double covered_time() const {
    double total = 0.0;
    for (const auto& w : windows_) total += w.length;
    return total;
  }

  /// True when some window ends exactly where the next starts.
  bool has_adjacent_windows() const {
    for (std::size_t i = 1; i < windows_.size(); ++i)
      if (windows_[i].start - windows_[i - 1].end() <=
          detail::time_tolerance(windows_[i].start))
        return true;
    return false;
  }

  friend bool operator==(const BarrierSchedule&, const BarrierSchedule&) = default;

 private:
  std::vector<Window> windows_;
};

/// Merges every maximal run of adjacent windows into one window.
inline BarrierSchedule concatenate_windows(const BarrierSchedule& schedule) {
  std::vector<Window> merged;
  for (const Window& w : schedule.windows()) {
    if (!merged.empty() &&
        w.start - merged.back().end() <= detail::time_tolerance(w.start)) {
      merged.back().length = w.end() - merged.back().start;
    } else {
      merged.push_back(w);
    }
  }
  return BarrierSchedule(std::move(merged));
}

struct AlphaBeta {
  double alpha;
  double beta;
};

/// alpha = -(2r/vol^2 - 1)/2, beta = -2r/vol^2 - alpha^2.
inline AlphaBeta alpha_beta(double rate, double vol) {
  if (!(rate > 0.0)) throw InvalidParameter("alpha_beta: rate must be positive");
  if (!(vol > 0.0)) throw InvalidParameter("alpha_beta: vol must be positive");
  const double k = 2.0 * rate / (vol * vol);
  const double alpha = -0.5 * (k - 1.0);
  return {alpha, -k - alpha * alpha};
}

/// Transformed image of one barrier window: [tau_end, tau_end + p].
struct TauImage {
  double tau_end;  ///< image of the calendar end of the window
  double p;        ///< transformed length
};

enum class ValuationState {
  before_window,  ///< barriers inactive at t; next window starts later
  in_window,      ///< t inside a window and spot strictly inside the corridor
  knocked_out,    ///< t inside a window with spot on or outside a barrier
};

/// Transformed coordinates of a valuation point relative to a schedule.
/// Windows that ended before t are dropped; a window containing t is
/// clipped to [t, end].
struct HeatCoords {
  double x = 0.0;
  double tau = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double big_l = 0.0;
  std::vector<TauImage> tau_images;  ///< oldest window first, tau decreasing
  ValuationState state = ValuationState::before_window;

  // Inverse-transform data.
  double b_low = 1.0;
  double t_end = 0.0;
  double half_variance = 0.0;
};

/// Remaining part of a schedule as seen from valuation time t.
struct RemainingSchedule {
  std::vector<Window> windows;  ///< concatenated, clipped at t
  bool t_in_window = false;     ///< t lies in a (closed) window
};

inline RemainingSchedule remaining_schedule(const BarrierSchedule& schedule, double t) {
  if (schedule.empty()) throw InvalidSchedule("empty schedule");
  if (!std::isfinite(t)) throw InvalidParameter("valuation time must be finite");
  const BarrierSchedule merged = concatenate_windows(schedule);
  const double t_end = merged.end_time();
  if (t > t_end + detail::time_tolerance(t_end))
    throw InvalidParameter("valuation time after the last window");

  RemainingSchedule out;
  for (const Window& w : merged.windows()) {
    const double tol = detail::time_tolerance(w.end());
    if (w.end() < t - tol) continue;  // elapsed
    if (w.start <= t + tol) {
      // t inside the closed window
      out.t_in_window = true;
      const double rest = w.end() - t;
      if (rest > tol) out.windows.push_back({t, rest});
      continue;
    }
    out.windows.push_back(w);
  }
  return out;
}

inline HeatCoords to_heat_coords(const MarketParams& market, const BarrierSpec& barriers,
                                 const BarrierSchedule& schedule, double t, double spot_at_t) {
  if (!(spot_at_t > 0.0)) throw InvalidParameter("spot_at_t must be positive");
  const RemainingSchedule rem = remaining_schedule(schedule, t);
  const auto [alpha, beta] = alpha_beta(market.rate(), market.vol());

  HeatCoords hc;
  hc.alpha = alpha;
  hc.beta = beta;
  hc.big_l = barriers.log_width();
  hc.x = std::log(spot_at_t / barriers.low());
  hc.b_low = barriers.low();
  hc.half_variance = market.half_variance();
  hc.t_end = schedule.end_time();
  hc.tau = hc.half_variance * (hc.t_end - t);

  if (rem.t_in_window) {
    hc.state = barriers.contains(spot_at_t) ? ValuationState::in_window
                                            : ValuationState::knocked_out;
  }
  for (const Window& w : rem.windows)
    hc.tau_images.push_back({hc.half_variance * (hc.t_end - w.end()),
                             hc.half_variance * w.length});
  return hc;
}

struct CalendarPoint {
  double t;
  double spot;
};

inline CalendarPoint from_heat_coords(const HeatCoords& hc) {
  return {hc.t_end - hc.tau / hc.half_variance, hc.b_low * std::exp(hc.x)};
}

inline std::string describe(const BarrierSchedule& schedule) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (i) os << ", ";
    os << '[' << schedule[i].start << ", " << schedule[i].end() << ']';
  }
  os << '}';
  return os.str();
}

}  // namespace dbarrier
