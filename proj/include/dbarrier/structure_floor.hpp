#pragma once

// Structure floor (F - A)^+ on a note whose n coupons are adjacent
// single-window barrier digitals, A = number of coupons paid.
//
// E[A^nu] = sum_J c(nu, |J|) P[all windows in J survive], where c(nu, m) is
// the number of surjections of a nu-set onto an m-set, and the joint
// survival probabilities are multi-period digital prices with the discount
// removed. The law of A follows from the moment system
// sum_i i^nu P[A = i] = E[A^nu] together with P[A = n], which is a single
// window spanning all coupons.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "dbarrier/analytic_pricer.hpp"
#include "dbarrier/core_model.hpp"
#include "dbarrier/defaults.hpp"
#include "dbarrier/error.hpp"

namespace dbarrier {

/// Number of surjections from a nu-set onto an m-set, i.e. the sum of the
/// multinomials nu! / (i_1! ... i_m!) over i_j >= 1 with sum i_j = nu.
inline std::uint64_t surjection_coefficient(int nu, int m) {
  if (nu < 0 || m < 0) throw InvalidParameter("surjection_coefficient: negative argument");
  if (m > nu) return 0;
  if (nu == 0) return 1;  // m == 0
  if (m == 0) return 0;
  // s(v, j) = j * (s(v-1, j) + s(v-1, j-1))
  std::vector<std::uint64_t> row(static_cast<std::size_t>(m) + 1, 0);
  row[0] = 1;
  for (int v = 1; v <= nu; ++v) {
    for (int j = std::min(v, m); j >= 1; --j) {
      std::uint64_t sum = 0;
      std::uint64_t prod = 0;
      if (__builtin_add_overflow(row[j], row[j - 1], &sum) ||
          __builtin_mul_overflow(sum, static_cast<std::uint64_t>(j), &prod))
        throw NumericalFailure("surjection_coefficient: 64-bit overflow");
      row[j] = prod;
    }
    row[0] = 0;
  }
  return row[m];
}

// ---------------------------------------------------------------------------

/// Power moments E[A^nu], nu = 0..size()-1, of a distribution on {0..n}.
struct MomentVector {
  std::vector<double> moments;
  int n = 0;

  /// Smallest pivot of the unit-diagonal-scaled Hankel and localizing
  /// matrices; non-negative (to rounding) for any distribution on [0, n].
  double hankel_min_pivot() const {
    const int count = static_cast<int>(moments.size());
    double worst = std::numeric_limits<double>::infinity();
    auto check = [&](int size, auto entry) {
      if (size < 1) return;
      std::vector<double> a(static_cast<std::size_t>(size * size));
      for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) a[i * size + j] = entry(i + j);
      std::vector<double> d(static_cast<std::size_t>(size));
      for (int i = 0; i < size; ++i) d[i] = a[i * size + i] > 0.0 ? std::sqrt(a[i * size + i]) : 1.0;
      for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) a[i * size + j] /= d[i] * d[j];
      // LDL^T without pivoting
      for (int k = 0; k < size; ++k) {
        const double pivot = a[k * size + k];
        worst = std::min(worst, pivot);
        if (std::abs(pivot) < 1e-300) continue;
        for (int i = k + 1; i < size; ++i) {
          const double f = a[i * size + k] / pivot;
          for (int j = k + 1; j < size; ++j) a[i * size + j] -= f * a[k * size + j];
        }
      }
    };
    const auto m = [&](int k) { return moments[static_cast<std::size_t>(k)]; };
    check((count - 1) / 2 + 1, m);
    if (count >= 2) {
      check((count - 2) / 2 + 1, [&](int k) { return m(k + 1); });
      check((count - 2) / 2 + 1, [&](int k) { return n * m(k) - m(k + 1); });
    }
    return worst;
  }

  bool is_feasible(double tol = defaults::kHankelTolerance) const {
    return hankel_min_pivot() >= -tol;
  }
};

/// Law of the coupon count A.
struct CouponPmf {
  std::vector<double> probs;        ///< P[A = i], i = 0..n
  double residual = 0.0;            ///< max violation of [0, 1] before clipping
  double min_raw = 0.0;             ///< smallest entry before clipping
  double condition_estimate = 1.0;  ///< infinity-norm condition number of the system
};

enum class MomentBasis {
  automatic,  ///< power moments when well conditioned, binomial moments otherwise
  power,      ///< E[A^nu], Vandermonde system
  binomial,   ///< E[binom(A, k)], triangular Pascal system
};

inline const char* to_string(MomentBasis b) {
  switch (b) {
    case MomentBasis::automatic: return "automatic";
    case MomentBasis::power: return "power";
    case MomentBasis::binomial: return "binomial";
  }
  return "unknown";
}

namespace detail {

/// Solves sum_i x_i^k a_i = b_k, k = 0..m-1, in place (Bjorck-Pereyra).
inline void bjorck_pereyra_primal(const std::vector<double>& x, std::vector<double>& b) {
  const int n = static_cast<int>(x.size()) - 1;
  for (int k = 0; k < n; ++k)
    for (int i = n; i >= k + 1; --i) b[i] -= x[k] * b[i - 1];
  for (int k = n - 1; k >= 0; --k) {
    for (int i = k + 1; i <= n; ++i) b[i] /= x[i] - x[i - k - 1];
    for (int i = k; i <= n - 1; ++i) b[i] -= b[i + 1];
  }
}

/// ||V||_inf ||V^{-1}||_inf for V_{k i} = i^k on nodes 0..m-1.
inline double vandermonde_condition(int m) {
  std::vector<double> x(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) x[i] = i;
  double norm_v = 0.0;
  for (int k = 0; k < m; ++k) {
    double row = 0.0;
    for (int i = 0; i < m; ++i) row += std::pow(x[i], k);
    norm_v = std::max(norm_v, row);
  }
  std::vector<double> row_sums(static_cast<std::size_t>(m), 0.0);
  for (int j = 0; j < m; ++j) {
    std::vector<double> e(static_cast<std::size_t>(m), 0.0);
    e[j] = 1.0;
    bjorck_pereyra_primal(x, e);
    for (int i = 0; i < m; ++i) row_sums[i] += std::abs(e[i]);
  }
  return norm_v * *std::max_element(row_sums.begin(), row_sums.end());
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

/// Condition number of the Pascal system sum_i binom(i, k) p_i = S_k.
inline double pascal_condition(int n) {
  double norm_p = 0.0;
  double norm_inv = 0.0;
  for (int k = 0; k <= n; ++k) {
    double row = 0.0;
    double row_inv = 0.0;
    for (int i = 0; i <= n; ++i) {
      row += binomial(i, k);
      row_inv += binomial(k, i);  // |(-1)^{k-i} binom(k, i)|
    }
    norm_p = std::max(norm_p, row);
    norm_inv = std::max(norm_inv, row_inv);
  }
  return norm_p * norm_inv;
}

inline CouponPmf finalize_pmf(std::vector<double> probs, double condition) {
  CouponPmf out;
  out.condition_estimate = condition;
  double residual = 0.0;
  double min_raw = std::numeric_limits<double>::infinity();
  for (double p : probs) {
    if (!std::isfinite(p)) throw NumericalFailure("moment recovery produced a non-finite value");
    residual = std::max({residual, -p, p - 1.0});
    min_raw = std::min(min_raw, p);
  }
  out.residual = residual;
  out.min_raw = min_raw;
  if (residual > defaults::kInfeasibilityTolerance || min_raw < -defaults::kClipTolerance)
    throw InconsistentMoments("recovered probabilities violate [0, 1] by " +
                              std::to_string(residual) + " (condition estimate " +
                              std::to_string(condition) + ")");
  double total = 0.0;
  for (double& p : probs) total += (p = std::clamp(p, 0.0, 1.0));
  if (!(total > 0.0)) throw InconsistentMoments("recovered probabilities sum to zero");
  for (double& p : probs) p /= total;
  out.probs = std::move(probs);
  return out;
}

}  // namespace detail

/// Solves sum_{i<n} i^nu p_i = E[A^nu] - n^nu p_n, nu = 0..n-1.
inline CouponPmf pmf_from_moments(const MomentVector& moments, double p_n,
                                  double condition_limit = defaults::kConditionLimit) {
  const int n = moments.n;
  if (n < 1) throw InvalidParameter("pmf_from_moments: need n >= 1");
  if (static_cast<int>(moments.moments.size()) != n)
    throw InvalidParameter("pmf_from_moments: expected moments nu = 0..n-1");
  if (!(p_n >= -defaults::kClipTolerance && p_n <= 1.0 + defaults::kClipTolerance))
    throw InvalidParameter("pmf_from_moments: p_n must be a probability");
  const double cond = detail::vandermonde_condition(n);
  if (cond > condition_limit)
    throw NumericalFailure("moment system is ill-conditioned: condition estimate " +
                           std::to_string(cond) + " exceeds " + std::to_string(condition_limit) +
                           " (n = " + std::to_string(n) + ")");
  std::vector<double> x(static_cast<std::size_t>(n));
  std::vector<double> rhs(static_cast<std::size_t>(n));
  for (int nu = 0; nu < n; ++nu) {
    x[nu] = nu;
    rhs[nu] = moments.moments[nu] - std::pow(static_cast<double>(n), nu) * p_n;
  }
  detail::bjorck_pereyra_primal(x, rhs);
  rhs.push_back(p_n);
  return detail::finalize_pmf(std::move(rhs), cond);
}

/// Inverts S_k = E[binom(A, k)], k = 0..n: p_i = sum_k (-1)^{k-i} binom(k, i) S_k.
inline CouponPmf pmf_from_binomial_moments(const std::vector<double>& binomial_moments,
                                           double condition_limit = defaults::kConditionLimit) {
  const int n = static_cast<int>(binomial_moments.size()) - 1;
  if (n < 1) throw InvalidParameter("pmf_from_binomial_moments: need n >= 1");
  const double cond = detail::pascal_condition(n);
  if (cond > condition_limit)
    throw NumericalFailure("binomial moment system is ill-conditioned: condition estimate " +
                           std::to_string(cond));
  std::vector<double> p(static_cast<std::size_t>(n) + 1, 0.0);
  for (int i = 0; i <= n; ++i) {
    // sum from the top so the small high-order terms accumulate first
    double s = 0.0;
    for (int k = n; k >= i; --k)
      s += ((k - i) % 2 == 0 ? 1.0 : -1.0) * detail::binomial(k, i) * binomial_moments[k];
    p[i] = s;
  }
  return detail::finalize_pmf(std::move(p), cond);
}

// ---------------------------------------------------------------------------

struct FloorParams {
  PricingParams pricing;
  MomentBasis basis = MomentBasis::automatic;
  double condition_limit = defaults::kConditionLimit;
};

struct FloorValuation {
  PriceResult result;
  CouponPmf pmf;
  MomentVector moments;  ///< power moments; empty for the binomial route
  std::vector<double> binomial_moments;  ///< empty for the power route
  MomentBasis basis = MomentBasis::power;
  double p_all = 0.0;  ///< P[A = n]
};

/// Floor valuation for one coupon schedule, valuation point and market.
/// Joint survival probabilities are cached by the concatenated window set.
class StructureFloorPricer {
 public:
  StructureFloorPricer(MarketParams market, BarrierSpec barriers, BarrierSchedule coupons,
                       double t, double spot_at_t, FloorParams params = {})
      : market_(market),
        barriers_(barriers),
        coupons_(std::move(coupons)),
        t_(t),
        spot_(spot_at_t),
        params_(params),
        pricer_(market, barriers, fixed_mode_params(params.pricing, market, barriers, coupons_)) {
    if (coupons_.empty()) throw InvalidSchedule("coupon schedule is empty");
    for (std::size_t i = 1; i < coupons_.size(); ++i) {
      const double gap = coupons_[i].start - coupons_[i - 1].end();
      if (std::abs(gap) > detail::time_tolerance(coupons_[i].start))
        throw InvalidSchedule("coupon windows must be adjacent (T_{i-1} + P = T_i)");
    }
    if (t_ > coupons_[0].start + detail::time_tolerance(coupons_[0].start))
      throw InvalidParameter("floor valuation must not be later than the first coupon window");
  }

  std::size_t coupon_count() const noexcept { return coupons_.size(); }
  const BarrierSchedule& coupons() const noexcept { return coupons_; }

  /// Undiscounted P[windows in `mask` all survive].
  const PriceResult& joint_survival(std::uint64_t mask) const {
    std::vector<Window> w;
    for (std::size_t i = 0; i < coupons_.size(); ++i)
      if (mask & (std::uint64_t{1} << i)) w.push_back(coupons_[i]);
    const BarrierSchedule merged = concatenate_windows(BarrierSchedule(std::move(w)));
    std::vector<std::pair<double, double>> key;
    for (const auto& win : merged.windows()) key.emplace_back(win.start, win.length);
    {
      std::lock_guard lock(cache_->mutex);
      if (auto it = cache_->prices.find(key); it != cache_->prices.end()) return it->second;
    }
    PriceResult r = pricer_.price(merged, t_, spot_);
    std::lock_guard lock(cache_->mutex);
    return cache_->prices.emplace(std::move(key), r).first->second;
  }

  /// P[A = n]: survival over one window spanning all coupons.
  double all_coupons_probability() const {
    return undiscounted(joint_survival(full_mask()));
  }

  MomentVector power_moments() const {
    const int n = static_cast<int>(coupons_.size());
    MomentVector mv;
    mv.n = n;
    mv.moments.assign(static_cast<std::size_t>(n), 0.0);
    mv.moments[0] = 1.0;
    std::vector<double> surj(static_cast<std::size_t>(n * (n + 1)), 0.0);
    for (int nu = 1; nu < n; ++nu)
      for (int m = 1; m <= nu; ++m)
        surj[nu * (n + 1) + m] = static_cast<double>(surjection_coefficient(nu, m));
    for (std::uint64_t mask = 1; mask < full_mask(); ++mask) {
      const int m = std::popcount(mask);
      if (m > n - 1) continue;
      const double prob = undiscounted(joint_survival(mask));
      for (int nu = m; nu < n; ++nu) mv.moments[nu] += surj[nu * (n + 1) + m] * prob;
    }
    return mv;
  }

  /// S_k = E[binom(A, k)] = sum_{|J| = k} P[J survives], k = 0..n.
  std::vector<double> binomial_moments() const {
    const int n = static_cast<int>(coupons_.size());
    std::vector<double> s(static_cast<std::size_t>(n) + 1, 0.0);
    s[0] = 1.0;
    for (std::uint64_t mask = 1; mask <= full_mask(); ++mask)
      s[std::popcount(mask)] += undiscounted(joint_survival(mask));
    return s;
  }

  MomentBasis resolve_basis() const {
    if (params_.basis != MomentBasis::automatic) return params_.basis;
    return detail::vandermonde_condition(static_cast<int>(coupons_.size())) <=
                   params_.condition_limit
               ? MomentBasis::power
               : MomentBasis::binomial;
  }

  FloorValuation value(double floor) const {
    if (!(floor > 0.0) || !std::isfinite(floor))
      throw InvalidParameter("floor level F must be positive");
    const int n = static_cast<int>(coupons_.size());
    FloorValuation out;
    out.basis = resolve_basis();
    out.p_all = all_coupons_probability();
    if (out.basis == MomentBasis::power) {
      out.moments = power_moments();
      out.pmf = pmf_from_moments(out.moments, out.p_all, params_.condition_limit);
    } else {
      out.binomial_moments = binomial_moments();
      out.pmf = pmf_from_binomial_moments(out.binomial_moments, params_.condition_limit);
    }

    const double discount = std::exp(-market_.rate() * (coupons_.end_time() - t_));
    const int top = std::min(n, static_cast<int>(std::floor(floor)));
    double payoff = 0.0;
    for (int i = 0; i <= top; ++i) payoff += (floor - i) * out.pmf.probs[i];
    out.result.price = discount * payoff;
    out.result.discount_factor = discount;
    out.result.modes = pricer_.params().k_max;
    out.result.nodes = detail::effective_nodes(pricer_.params().quad_nodes, out.result.modes);

    // Propagated error estimate: relative moment error times the condition
    // number, spread over the payoff weights.
    const auto [trunc, quad] = relative_input_error(out.basis);
    const double spread = discount * floor * (n + 1.0) * out.pmf.condition_estimate;
    out.result.truncation_bound = spread * trunc;
    out.result.quadrature_error = spread * quad;
    return out;
  }

 private:
  static PricingParams fixed_mode_params(PricingParams p, const MarketParams& market,
                                         const BarrierSpec& barriers,
                                         const BarrierSchedule& coupons) {
    // One mode count for every subset, chosen from the shortest coupon, so
    // diffusion matrices are shared across subsets.
    double p_min = std::numeric_limits<double>::infinity();
    for (const auto& w : coupons.windows()) p_min = std::min(p_min, w.length);
    if (!coupons.empty()) {
      const auto ab = alpha_beta(market.rate(), market.vol());
      p.k_max = detail::choose_modes(p, barriers.log_width(), ab.alpha,
                                     market.half_variance() * p_min);
      p.adaptive = false;
    }
    return p;
  }

  std::uint64_t full_mask() const {
    if (coupons_.size() > 30) throw InvalidParameter("structure floor supports at most 30 coupons");
    return (std::uint64_t{1} << coupons_.size()) - 1;
  }

  static double undiscounted(const PriceResult& r) {
    return r.status == PriceStatus::knocked_out ? 0.0 : r.probability();
  }

  std::pair<double, double> relative_input_error(MomentBasis basis) const {
    const int n = static_cast<int>(coupons_.size());
    double trunc = 0.0;
    double quad = 0.0;
    double scale = 0.0;
    for (std::uint64_t mask = 1; mask <= full_mask(); ++mask) {
      if (basis == MomentBasis::power && std::popcount(mask) > n - 1 && mask != full_mask())
        continue;
      const PriceResult& r = joint_survival(mask);
      if (r.status == PriceStatus::knocked_out || r.discount_factor <= 0.0) continue;
      trunc = std::max(trunc, r.truncation_bound / r.discount_factor);
      quad = std::max(quad, r.quadrature_error / r.discount_factor);
      scale = std::max(scale, r.probability());
    }
    if (!(scale > 0.0)) return {0.0, 0.0};
    return {trunc / scale, quad / scale};
  }

  struct Cache {
    std::mutex mutex;
    std::map<std::vector<std::pair<double, double>>, PriceResult> prices;
  };

  MarketParams market_;
  BarrierSpec barriers_;
  BarrierSchedule coupons_;
  double t_;
  double spot_;
  FloorParams params_;
  DigitalPricer pricer_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

/// E[A^nu], nu = 0..n-1, from joint survival probabilities of coupon subsets.
inline MomentVector moments_of_A(const MarketParams& market, const BarrierSpec& barriers,
                                 const BarrierSchedule& coupons, double t, double spot_at_t,
                                 const PricingParams& params = {}) {
  FloorParams fp;
  fp.pricing = params;
  return StructureFloorPricer(market, barriers, coupons, t, spot_at_t, fp).power_moments();
}

/// e^{-r (T_n - t)} sum_{i <= min(n, floor(F))} (F - i) P[A = i].
inline PriceResult price_structure_floor(const MarketParams& market, const BarrierSpec& barriers,
                                         const BarrierSchedule& coupons, double floor, double t,
                                         double spot_at_t, const FloorParams& params = {}) {
  return StructureFloorPricer(market, barriers, coupons, t, spot_at_t, params)
      .value(floor)
      .result;
}

}  // namespace dbarrier
