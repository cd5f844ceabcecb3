#pragma once

// Exhaustion functions h and the weight w_q(t) = (1 + h(t))^{-q}.
//
// Every exhaustion is quasi-convex around a center (nonincreasing to its
// left, nondecreasing to its right) and comparable to |t| at infinity:
// c1 |t| <= h(t) <= c2 |t| for |t| >= t0. The built-in kinds satisfy this
// analytically; custom callables are checked on a grid at construction.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "wkm/distributions.hpp"
#include "wkm/error.hpp"

namespace wkm {

enum class ExhaustionKind { absolute, centered, var_centered, custom };

inline const char* exhaustion_kind_name(ExhaustionKind k) {
  switch (k) {
    case ExhaustionKind::absolute: return "absolute";
    case ExhaustionKind::centered: return "centered";
    case ExhaustionKind::var_centered: return "var_centered";
    case ExhaustionKind::custom: return "custom";
  }
  return "?";
}

// Declared constants for a custom exhaustion.
struct CustomExhaustionBounds {
  double c1 = 1.0;
  double c2 = 1.0;
  double t0 = 0.0;
  double center = 0.0;     // minimizer of h
  double lipschitz = 1.0;  // bound on |h'|
};

class Exhaustion {
 public:
  static Exhaustion absolute() { return Exhaustion(ExhaustionKind::absolute, 0.0); }

  static Exhaustion centered(double center) {
    require(std::isfinite(center), "centered exhaustion: center must be finite");
    return Exhaustion(ExhaustionKind::centered, center);
  }

  // Center frozen at the model-implied VaR quantile v_alpha.
  static Exhaustion var_centered(const DistributionModel& model, double alpha) {
    require(alpha > 0.0 && alpha < 1.0, "var_centered exhaustion: alpha must lie in (0,1)");
    Exhaustion e(ExhaustionKind::var_centered, model.quantile(alpha));
    e.alpha_ = alpha;
    return e;
  }

  // Already-computed v_alpha (e.g. read back from a serialized config).
  static Exhaustion var_centered_at(double v_alpha, double alpha) {
    require(alpha > 0.0 && alpha < 1.0, "var_centered exhaustion: alpha must lie in (0,1)");
    require(std::isfinite(v_alpha), "var_centered exhaustion: center must be finite");
    Exhaustion e(ExhaustionKind::var_centered, v_alpha);
    e.alpha_ = alpha;
    return e;
  }

  // Centered at the model median; robust alternative to the mean anchor.
  static Exhaustion robust_centered(const DistributionModel& model) { return centered(model.median()); }

  static Exhaustion custom(std::function<double(double)> h, CustomExhaustionBounds b) {
    require(static_cast<bool>(h), "custom exhaustion: callable is empty");
    require(b.c1 > 0.0 && b.c2 >= b.c1, "custom exhaustion: need 0 < c1 <= c2");
    require(b.t0 >= 0.0 && std::isfinite(b.t0), "custom exhaustion: t0 must be finite and >= 0");
    require(b.lipschitz > 0.0, "custom exhaustion: lipschitz constant must be positive");
    Exhaustion e(ExhaustionKind::custom, b.center);
    e.fn_ = std::move(h);
    e.c1_ = b.c1;
    e.c2_ = b.c2;
    e.t0_ = b.t0;
    e.lipschitz_ = b.lipschitz;
    e.verify();
    return e;
  }

  ExhaustionKind kind() const noexcept { return kind_; }
  double center() const noexcept { return center_; }
  std::optional<double> var_alpha() const noexcept { return alpha_; }
  double c1() const noexcept { return c1_; }
  double c2() const noexcept { return c2_; }
  double t0() const noexcept { return t0_; }
  double lipschitz() const noexcept { return lipschitz_; }

  double operator()(double t) const {
    if (kind_ == ExhaustionKind::custom) return fn_(t);
    if (std::isinf(t)) return std::numeric_limits<double>::infinity();
    return std::fabs(t - center_);
  }

  // max of h over [-R, R]; attained at an endpoint by quasi-convexity.
  double max_on_window(double R) const {
    if (kind_ != ExhaustionKind::custom) return R + std::fabs(center_);
    return std::max((*this)(-R), (*this)(R));
  }

  // Point of [a, b] where h is smallest (a may be -inf, b may be +inf).
  double argmin_on(double a, double b) const { return std::clamp(center_, a, b); }

  // Smallest closed interval containing {t : h(t) <= R}; empty when R < min h.
  std::optional<std::pair<double, double>> sublevel(double R) const {
    if (kind_ != ExhaustionKind::custom) {
      if (R < 0.0) return std::nullopt;
      return std::make_pair(center_ - R, center_ + R);
    }
    if ((*this)(center_) > R) return std::nullopt;
    // Outside max(t0, R / c1) we have h >= c1 |t| > R.
    const double reach = std::max(t0_, R / c1_) + std::fabs(center_) + 1.0;
    auto boundary = [&](double inside, double outside) {
      for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (inside + outside);
        if (mid == inside || mid == outside) break;
        ((*this)(mid) <= R ? inside : outside) = mid;
      }
      return inside;
    };
    return std::make_pair(boundary(center_, center_ - reach), boundary(center_, center_ + reach));
  }

 private:
  Exhaustion(ExhaustionKind k, double center) : kind_(k), center_(center) {
    if (k == ExhaustionKind::centered || k == ExhaustionKind::var_centered) {
      // |t - c| lies in [|t|/2, 3|t|/2] once |t| >= 2|c|.
      c1_ = center == 0.0 ? 1.0 : 0.5;
      c2_ = center == 0.0 ? 1.0 : 1.5;
      t0_ = 2.0 * std::fabs(center);
    }
  }

  // Two-sided comparability on 10,001 log-spaced points per side out to
  // 1e6, plus nonnegativity, finiteness and quasi-convexity on [-t0, t0].
  void verify() const {
    constexpr int points = 10001;
    constexpr double outer = 1e6;
    const double inner = std::max(t0_, 1e-6);
    require(inner < outer, "custom exhaustion: t0 must be below 1e6");
    const double step = std::log(outer / inner) / (points - 1);
    constexpr double slack = 1e-12;
    for (int i = 0; i < points; ++i) {
      const double t = inner * std::exp(step * i);
      for (double s : {t, -t}) {
        const double v = fn_(s);
        const double a = std::fabs(s);
        require(std::isfinite(v) && v >= 0.0, "custom exhaustion: h must be finite and nonnegative");
        require(v >= c1_ * a * (1.0 - slack) && v <= c2_ * a * (1.0 + slack),
                "custom exhaustion: c1|t| <= h(t) <= c2|t| violated at t = " + std::to_string(s));
      }
    }
    const double span = std::max(t0_, std::fabs(center_)) + 1.0;
    constexpr int core_points = 2001;
    double prev = std::numeric_limits<double>::infinity();
    bool crossed = false;
    for (int i = 0; i < core_points; ++i) {
      const double t = -span + 2.0 * span * i / (core_points - 1);
      const double v = fn_(t);
      require(std::isfinite(v) && v >= 0.0, "custom exhaustion: h must be finite and nonnegative");
      if (t > center_ && !crossed) {
        crossed = true;
        prev = fn_(center_);
      }
      if (t <= center_) {
        require(v <= prev * (1.0 + slack) + slack, "custom exhaustion: h must be nonincreasing left of center");
      } else {
        require(v >= prev * (1.0 - slack) - slack, "custom exhaustion: h must be nondecreasing right of center");
      }
      prev = v;
    }
  }

  ExhaustionKind kind_;
  double center_;
  std::optional<double> alpha_;
  std::function<double(double)> fn_;
  double c1_ = 1.0;
  double c2_ = 1.0;
  double t0_ = 0.0;
  double lipschitz_ = 1.0;
};

/// Exhaustion plus weight exponent. q = 0 gives the unweighted (classical
/// Kolmogorov) case, which is kept as an oracle.
struct WeightConfig {
  Exhaustion exhaustion = Exhaustion::absolute();
  double q = 1.0;

  WeightConfig() = default;
  WeightConfig(Exhaustion e, double q_) : exhaustion(std::move(e)), q(q_) {
    require(q_ >= 0.0 && std::isfinite(q_), "WeightConfig: q must be finite and >= 0");
  }

  double operator()(double t) const { return weight_of(exhaustion(t)); }

  // (1 + h)^{-q} for a given exhaustion value.
  double weight_of(double h) const {
    if (q == 0.0) return 1.0;
    if (std::isinf(h)) return 0.0;
    return std::exp(-q * std::log1p(h));
  }

  // Lipschitz constant of t -> w(t).
  double lipschitz() const noexcept { return q * exhaustion.lipschitz(); }
};

inline double weight(double t, const WeightConfig& cfg) { return cfg(t); }

/// c_R = min_{|t| <= R} w_q(t) = (1 + max_{|t|<=R} h(t))^{-q}.
inline double min_weight_on_window(double R, const WeightConfig& cfg) {
  require(R > 0.0, "min_weight_on_window: R must be positive");
  return cfg.weight_of(cfg.exhaustion.max_on_window(R));
}

/// C with c_R >= C (1 + R)^{-q} for every R > 0:
/// 1 + max_{|t|<=R} h <= max(1 + H0, c2)(1 + R), H0 = max_{|t|<=t0} h.
inline double window_weight_constant(const WeightConfig& cfg) {
  const Exhaustion& h = cfg.exhaustion;
  const double h0 = h.t0() > 0.0 ? h.max_on_window(h.t0()) : h(0.0);
  return std::pow(std::max(1.0 + h0, h.c2()), -cfg.q);
}

struct RatioBounds {
  double lower;
  double upper;
};

/// Empirical range of w_a(t) / w_b(t) over the grid.
inline RatioBounds weight_ratio_bounds(const Exhaustion& a, const Exhaustion& b, double q,
                                       std::span<const double> t_grid) {
  require(!t_grid.empty(), "weight_ratio_bounds: grid is empty");
  require(q > 0.0, "weight_ratio_bounds: q must be positive");
  RatioBounds out{std::numeric_limits<double>::infinity(), 0.0};
  for (double t : t_grid) {
    // (1+h_a)^{-q} / (1+h_b)^{-q}
    const double r = std::exp(q * (std::log1p(b(t)) - std::log1p(a(t))));
    out.lower = std::min(out.lower, r);
    out.upper = std::max(out.upper, r);
  }
  return out;
}

}  // namespace wkm
