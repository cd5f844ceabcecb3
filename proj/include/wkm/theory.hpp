#pragma once

// Truncation analytics for the core/tail bound on d_{K,h,q}(L(Z_n), Phi):
// truncated moments on {h <= R}, the tail remainder on {h > R}, the three
// bound terms, and the (beta, q) rate-parameter selector.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "wkm/distributions.hpp"
#include "wkm/error.hpp"
#include "wkm/exhaustion.hpp"
#include "wkm/quadrature.hpp"

namespace wkm {

struct TruncationAnalysis {
  double R = 0.0;
  double delta = 0.0;
  double M3 = 0.0;              // E[|X - mu|^3 1{h(X) <= R}]
  double tau_R2 = 0.0;          // Var((X - mu) 1{h(X) <= R})
  double tail_remainder = 0.0;  // E[|X - mu|^{2+delta} 1{h(X) > R}]
  double sigma2 = 0.0;
};

// Absolute constants of the bound. None is known explicitly, so all default
// to 1 and the bound is shape-correct rather than certified.
struct BoundConstants {
  double C_CS = 1.0;
  double C1 = 1.0;
  double C2 = 1.0;
  double A_delta = 1.0;
  double B_delta = 1.0;
  double C_delta = 1.0;

  void validate() const {
    for (double c : {C_CS, C1, C2, A_delta, B_delta, C_delta})
      require(c > 0.0 && std::isfinite(c), "BoundConstants: all constants must be positive");
  }
};

struct BoundTerms {
  double core = 0.0;
  double tail = 0.0;
  double weight = 0.0;
  double total = 0.0;
};

struct RatePlan {
  double beta = 0.0;           // exponent actually recommended, R_n = n^beta
  double balanced_beta = 0.0;  // 1/(2 eta), or max(1/(2 eta), 1/(2 q)) with a user q
  double q = 0.0;
  double eta = 0.0;
  double delta = 0.0;
  bool core_ok = false;    // beta (1 - delta) <= 1/2
  bool tail_ok = false;    // beta eta >= 1/2
  bool weight_ok = false;  // beta q >= 1/2
  bool feasible = false;
  double achieved_exponent = 0.0;  // min(beta eta, beta q, 1/2 - (beta(1-delta) - 1/2)^+)
};

namespace detail {

struct TruncatedIntegrals {
  double m3 = 0.0, m1 = 0.0, m2 = 0.0, tail = 0.0;
};

inline double checked(const quad::Result& r, const char* what) {
  if (!r.converged && r.error > 1e-8 * std::fabs(r.value) + 1e-300)
    throw NumericalFailure(std::string("truncation_analysis: quadrature failed for ") + what);
  return r.value;
}

}  // namespace detail

/// All integrals by adaptive quadrature split at mu, the support edge and
/// the boundary of {h <= R}.
inline TruncationAnalysis truncation_analysis(const DistributionModel& model, const Exhaustion& h, double R,
                                              double delta) {
  require(R > 0.0, "truncation_analysis: R must be positive");
  require(delta > 0.0 && delta <= 1.0, "truncation_analysis: delta must lie in (0,1]");
  require(moment_exists(model, 2.0 + delta),
          "truncation_analysis: delta at or above the moment-existence boundary of the model");
  const double mu = model.mean();
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double p = 2.0 + delta;

  TruncationAnalysis ta;
  ta.R = R;
  ta.delta = delta;
  ta.sigma2 = model.variance();

  quad::Options opt;
  opt.rel_tol = 1e-11;
  opt.scale = model.scale();
  const double lo_support = model.support_lower();

  auto moment = [&](auto&& g, double a, double b, std::span<const double> breaks) {
    auto f = [&](double x) {
      const double dens = model.pdf(x);
      return dens == 0.0 ? 0.0 : g(x - mu) * dens;
    };
    a = std::max(a, lo_support);
    if (!(a < b)) return quad::Result{};
    return quad::integrate_pieces(f, a, b, breaks, opt);
  };
  // |x - mu|^order pdf(x), in log space so heavy tails do not underflow early.
  auto pow_abs = [&](double order) {
    return [&, order](double x) {
      const double d = std::fabs(x - mu);
      return d == 0.0 ? 0.0 : std::exp(order * std::log(d) + model.log_pdf(x));
    };
  };
  auto moment_pow = [&](double order, double a, double b, std::span<const double> breaks) {
    a = std::max(a, lo_support);
    if (!(a < b)) return quad::Result{};
    return quad::integrate_pieces(pow_abs(order), a, b, breaks, opt);
  };

  const auto core = h.sublevel(R);
  if (core) {
    const double breaks[] = {mu, lo_support};
    ta.M3 = detail::checked(moment_pow(3.0, core->first, core->second, breaks), "M3");
    const double m1 = detail::checked(moment([](double d) { return d; }, core->first, core->second, breaks), "core mean");
    const double m2 = detail::checked(moment([](double d) { return d * d; }, core->first, core->second, breaks), "core variance");
    ta.tau_R2 = std::max(0.0, m2 - m1 * m1);
    const double left = core->first, right = core->second;
    const double tail_breaks[] = {mu, lo_support};
    double tail = 0.0;
    tail += detail::checked(moment_pow(p, -inf, left, tail_breaks), "left tail");
    tail += detail::checked(moment_pow(p, right, inf, tail_breaks), "right tail");
    ta.tail_remainder = tail;
  } else {
    const double breaks[] = {mu, lo_support};
    ta.tail_remainder = detail::checked(moment_pow(p, -inf, inf, breaks), "full moment");
  }
  return ta;
}

/// The three terms: C_CS M3 / (tau_R^3 sqrt n), C1 tail / sigma^{2+delta},
/// C2 (1 + R)^{-q}.
inline BoundTerms evaluate_tradeoff_bound(const TruncationAnalysis& ta, double n, double q,
                                          const BoundConstants& consts = {}) {
  require(n >= 1.0, "evaluate_tradeoff_bound: n must be >= 1");
  require(q >= 0.0, "evaluate_tradeoff_bound: q must be >= 0");
  consts.validate();
  if (!(ta.tau_R2 > 0.0)) throw InvalidArgument("evaluate_tradeoff_bound: degenerate truncation (tau_R^2 = 0)");
  BoundTerms t;
  t.core = consts.C_CS * ta.M3 / (std::pow(ta.tau_R2, 1.5) * std::sqrt(n));
  t.tail = consts.C1 * ta.tail_remainder / std::pow(ta.sigma2, 0.5 * (2.0 + ta.delta));
  t.weight = consts.C2 * std::pow(1.0 + ta.R, -q);
  t.total = t.core + t.tail + t.weight;
  return t;
}

struct BoundMinimum {
  double R_opt = 0.0;
  double total_min = 0.0;
  std::vector<double> totals;  // per grid point
  bool unimodal = true;        // diagnostic only
};

/// Grid argmin of the total bound over R. Points whose truncation is
/// degenerate (empty core) are skipped.
inline BoundMinimum minimize_bound_over_R(const DistributionModel& model, const Exhaustion& h, double n, double q,
                                          double delta, const BoundConstants& consts, std::span<const double> R_grid) {
  require(!R_grid.empty(), "minimize_bound_over_R: R grid is empty");
  for (std::size_t i = 0; i < R_grid.size(); ++i) {
    require(R_grid[i] > 0.0, "minimize_bound_over_R: R grid must be positive");
    require(i == 0 || R_grid[i] > R_grid[i - 1], "minimize_bound_over_R: R grid must be sorted");
  }
  BoundMinimum out;
  out.total_min = std::numeric_limits<double>::infinity();
  for (double R : R_grid) {
    const auto ta = truncation_analysis(model, h, R, delta);
    double total = std::numeric_limits<double>::infinity();
    if (ta.tau_R2 > 0.0) total = evaluate_tradeoff_bound(ta, n, q, consts).total;
    out.totals.push_back(total);
    if (total < out.total_min) {
      out.total_min = total;
      out.R_opt = R;
    }
  }
  if (!std::isfinite(out.total_min)) throw NumericalFailure("minimize_bound_over_R: every grid point is degenerate");
  // Finite part of the curve should fall then rise.
  bool rising = false;
  double prev = std::numeric_limits<double>::infinity();
  for (double t : out.totals) {
    if (!std::isfinite(t)) continue;
    if (t > prev) rising = true;
    else if (rising && t < prev) out.unimodal = false;
    prev = t;
  }
  return out;
}

/// Balanced choice beta = 1/(2 eta), q = max(eta, q_user) (with a user q,
/// beta = max(1/(2 eta), 1/(2 q))). If the three sufficient conditions
/// cannot all hold, beta is replaced by the maximizer of the guaranteed
/// exponent min(beta m, 1/2, 1 - beta (1 - delta)), m = min(eta, q), which
/// is beta = 1/(m + 1 - delta).
inline RatePlan select_rate_parameters(double eta, double delta, std::optional<double> q_user = std::nullopt) {
  if (!(eta > 0.0)) throw InvalidArgument("select_rate_parameters: eta must be positive (no rate guarantee)");
  require(delta > 0.0 && delta <= 1.0, "select_rate_parameters: delta must lie in (0,1]");
  if (q_user) require(*q_user > 0.0, "select_rate_parameters: q must be positive");
  constexpr double tol = 1e-12;
  RatePlan plan;
  plan.eta = eta;
  plan.delta = delta;
  plan.q = q_user ? std::max(eta, *q_user) : eta;
  plan.balanced_beta = q_user ? std::max(1.0 / (2.0 * eta), 1.0 / (2.0 * plan.q)) : 1.0 / (2.0 * eta);

  auto assess = [&](double beta) {
    plan.beta = beta;
    plan.core_ok = beta * (1.0 - delta) <= 0.5 + tol;
    plan.tail_ok = beta * eta >= 0.5 - tol;
    plan.weight_ok = beta * plan.q >= 0.5 - tol;
    plan.feasible = plan.core_ok && plan.tail_ok && plan.weight_ok;
    const double core_penalty = std::max(0.0, beta * (1.0 - delta) - 0.5);
    plan.achieved_exponent = std::min({beta * eta, beta * plan.q, 0.5 - core_penalty});
  };
  assess(plan.balanced_beta);
  if (!plan.feasible) {
    const double m = std::min(eta, plan.q);
    assess(1.0 / (m + 1.0 - delta));
  }
  return plan;
}

/// Log-log least-squares fit of the tail remainder over R_grid:
/// remainder ~ K R^{-eta_fit}. Returns the tail index info with the fitted
/// eta and K (alpha is the model's analytic tail index).
inline TailIndexInfo fit_tail_remainder(const DistributionModel& model, const Exhaustion& h, double delta,
                                        std::span<const double> R_grid) {
  require(R_grid.size() >= 2, "fit_tail_remainder: need at least two R values");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(R_grid.size());
  for (double R : R_grid) {
    const double rem = truncation_analysis(model, h, R, delta).tail_remainder;
    require(rem > 0.0, "fit_tail_remainder: remainder vanished on the grid");
    const double x = std::log(R), y = std::log(rem);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / m;
  TailIndexInfo info;
  info.alpha = model.tail_index();
  info.eta = -slope;
  info.K = std::exp(intercept);
  return info;
}

}  // namespace wkm
