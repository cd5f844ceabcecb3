#pragma once

// The weighted Kolmogorov distance
//   d_{K,h,q}(F, G) = sup_t (1 + h(t))^{-q} |F(t) - G(t)|
// between an empirical CDF and a continuous model, between two empirical
// CDFs (exact), and in the rectangle sense on R^2 / R^3.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "wkm/distributions.hpp"
#include "wkm/error.hpp"
#include "wkm/exhaustion.hpp"
#include "wkm/parallel.hpp"
#include "wkm/rng.hpp"
#include "wkm/special.hpp"

namespace wkm {

/// Right-continuous step function F(t) = #{i : x_i <= t} / n, stored as the
/// distinct sorted values and their cumulative counts.
class EmpiricalCDF {
 public:
  explicit EmpiricalCDF(std::vector<double> xs) : sorted_(std::move(xs)) {
    require(!sorted_.empty(), "EmpiricalCDF: sample is empty");
    for (double x : sorted_) require(std::isfinite(x), "EmpiricalCDF: sample values must be finite");
    std::sort(sorted_.begin(), sorted_.end());
    for (std::size_t i = 0; i < sorted_.size(); ++i) {
      if (distinct_.empty() || sorted_[i] != distinct_.back()) {
        distinct_.push_back(sorted_[i]);
        cumulative_.push_back(i + 1);
      } else {
        cumulative_.back() = i + 1;
      }
    }
  }

  std::size_t size() const noexcept { return sorted_.size(); }
  std::span<const double> sorted() const noexcept { return sorted_; }
  std::span<const double> distinct() const noexcept { return distinct_; }
  // cumulative()[j] = #{i : x_i <= distinct()[j]}
  std::span<const std::size_t> cumulative() const noexcept { return cumulative_; }

  double operator()(double t) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), t);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }

 private:
  std::vector<double> sorted_;
  std::vector<double> distinct_;
  std::vector<std::size_t> cumulative_;
};

struct WeightedDistanceResult {
  double value = 0.0;
  double argmax_t = 0.0;
  std::size_t candidates_evaluated = 0;
  double refinement_error_bound = 0.0;  // true sup <= value + bound
};

namespace detail {

struct ArgMax {
  double value = -1.0;
  double at = 0.0;
  std::size_t count = 0;

  void offer(double v, double t) {
    ++count;
    if (v > value) {
      value = v;
      at = t;
    }
  }
};

}  // namespace detail

/// Distance between an empirical CDF and a continuous model CDF.
///
/// Candidates are both one-sided limits at every jump and `refinement`
/// equally spaced points inside each gap between jumps. Outside the sample
/// range the integrand is monotone unless the weight center lies there, in
/// which case the stretch between the extreme jump and the center is
/// refined as well.
///
/// Error bound: on a refined cell [s, s'] the step level c is fixed and G is
/// monotone, so w |c - G| <= w(nearest point to the center) *
/// max(|c - G(s)|, |c - G(s')|). The bound is the largest such envelope
/// minus the value, so sup <= value + bound holds exactly.
inline WeightedDistanceResult weighted_distance_to_model(const EmpiricalCDF& sample, const DistributionModel& model,
                                                         const WeightConfig& cfg, std::size_t refinement = 8) {
  require(refinement <= 1'000'000, "weighted_distance_to_model: refinement too large");
  const auto u = sample.distinct();
  const auto cum = sample.cumulative();
  const double n = static_cast<double>(sample.size());
  const std::size_t k = u.size();
  const double c = cfg.exhaustion.center();
  detail::ArgMax best;
  double envelope = 0.0;

  // Walks [a, b] at level `level` through its interior points; (wa, ga)
  // are the weight and model CDF at a, (wb, gb) at b.
  auto refine = [&](double a, double b, double wa, double ga, double wb, double gb, double level) {
    const double width = b - a;
    double t0 = a, w0 = wa, d0 = std::fabs(level - ga);
    for (std::size_t i = 1; i <= refinement + 1; ++i) {
      double t1, w1, d1;
      if (i <= refinement) {
        t1 = a + width * static_cast<double>(i) / static_cast<double>(refinement + 1);
        w1 = cfg(t1);
        d1 = std::fabs(level - model.cdf(t1));
        best.offer(w1 * d1, t1);
      } else {
        t1 = b;
        w1 = wb;
        d1 = std::fabs(level - gb);
      }
      double w_top = std::max(w0, w1);
      if (c > t0 && c < t1) w_top = std::max(w_top, cfg(c));
      envelope = std::max(envelope, w_top * std::max(d0, d1));
      t0 = t1;
      w0 = w1;
      d0 = d1;
    }
  };

  std::vector<double> w(k), g(k);
  for (std::size_t j = 0; j < k; ++j) {
    g[j] = model.cdf(u[j]);
    w[j] = cfg(u[j]);
    const double below = j == 0 ? 0.0 : static_cast<double>(cum[j - 1]) / n;
    const double at = static_cast<double>(cum[j]) / n;
    best.offer(w[j] * std::fabs(below - g[j]), u[j]);
    best.offer(w[j] * std::fabs(at - g[j]), u[j]);
  }
  for (std::size_t j = 0; j + 1 < k; ++j)
    refine(u[j], u[j + 1], w[j], g[j], w[j + 1], g[j + 1], static_cast<double>(cum[j]) / n);

  if (cfg.q > 0.0 && c < u.front()) {
    const double wc = cfg(c), gc = model.cdf(c);
    best.offer(wc * gc, c);
    refine(c, u.front(), wc, gc, w.front(), g.front(), 0.0);
    // Left of c the weight falls and G falls, so the integrand is below its value at c.
  } else if (cfg.q > 0.0 && c > u.back()) {
    const double wc = cfg(c), gc = model.cdf(c);
    best.offer(wc * (1.0 - gc), c);
    refine(u.back(), c, w.back(), g.back(), wc, gc, 1.0);
  }

  WeightedDistanceResult out;
  out.value = best.value;
  out.argmax_t = best.at;
  out.candidates_evaluated = best.count;
  out.refinement_error_bound = std::max(0.0, envelope - best.value);
  return out;
}

/// Exact distance between two empirical CDFs. |F_a - F_b| is constant on
/// each gap [u_k, u_{k+1}) of the merged jump set, so the supremum over a gap
/// is that constant times the weight at the gap point nearest the center.
inline WeightedDistanceResult weighted_distance_two_sample(const EmpiricalCDF& a, const EmpiricalCDF& b,
                                                           const WeightConfig& cfg) {
  const auto ua = a.distinct(), ub = b.distinct();
  const auto ca = a.cumulative(), cb = b.cumulative();
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::vector<double> merged;
  merged.reserve(ua.size() + ub.size());
  std::merge(ua.begin(), ua.end(), ub.begin(), ub.end(), std::back_inserter(merged));
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

  detail::ArgMax best;
  std::size_t ia = 0, ib = 0;
  std::size_t count_a = 0, count_b = 0;
  for (std::size_t k = 0; k < merged.size(); ++k) {
    const double t = merged[k];
    if (ia < ua.size() && ua[ia] == t) count_a = ca[ia++];
    if (ib < ub.size() && ub[ib] == t) count_b = cb[ib++];
    const double diff = std::fabs(static_cast<double>(count_a) / na - static_cast<double>(count_b) / nb);
    const double right = k + 1 < merged.size() ? merged[k + 1] : std::numeric_limits<double>::infinity();
    const double where = cfg.exhaustion.argmin_on(t, right);
    best.offer(cfg(where) * diff, where);
  }
  WeightedDistanceResult out;
  out.value = std::max(best.value, 0.0);
  out.argmax_t = best.at;
  out.candidates_evaluated = best.count;
  return out;
}

/// Monte Carlo draws of Z_n = (sum_{i<=n} X_i - n mu) / (sigma sqrt n).
struct NormalizedSumSample {
  std::vector<double> values;
  std::size_t n = 0;
  std::size_t batches = 0;
  double mu = 0.0;
  double sigma = 0.0;
};

/// Batch b draws its n summands from substream b of `seed`, so the result
/// is independent of `threads`. Standardization uses the model's analytic
/// mean and standard deviation.
inline NormalizedSumSample simulate_normalized_sums(const DistributionModel& model, std::size_t n, std::size_t M,
                                                    std::uint64_t seed, unsigned threads = 1) {
  require(n >= 1 && M >= 1, "simulate_normalized_sums: n and M must be >= 1");
  require(moment_exists(model, 2.0), "simulate_normalized_sums: model variance is infinite");
  NormalizedSumSample out;
  out.n = n;
  out.batches = M;
  out.mu = model.mean();
  out.sigma = model.sd();
  out.values.resize(M);
  const double denom = out.sigma * std::sqrt(static_cast<double>(n));
  parallel_for(M, threads, [&](std::size_t b) {
    RngStream rng(seed, b);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += model.draw(rng) - out.mu;
    out.values[b] = s / denom;
  });
  return out;
}

/// Weight on R^d: (1 + ||x - center||_2)^{-q}.
struct MultivariateWeight {
  double q = 1.0;
  std::vector<double> center;  // empty means the origin

  double exhaustion(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = x[j] - (center.empty() ? 0.0 : center[j]);
      s += d * d;
    }
    return std::sqrt(s);
  }

  double operator()(std::span<const double> x) const {
    if (q == 0.0) return 1.0;
    for (double v : x)
      if (std::isinf(v)) return 0.0;
    return std::exp(-q * std::log1p(exhaustion(x)));
  }
};

struct MultivariateDistanceResult {
  double value = 0.0;
  std::vector<double> argmax_x;
  std::size_t candidates_evaluated = 0;
  double refinement_error_bound = 0.0;  // true sup <= value + bound
};

/// Rectangle-order distance between the empirical CDF of `points` (row-major,
/// n x d) and Phi_d(x) = prod_j Phi(x_j), d in {2, 3}.
///
/// Each axis is cut at the sample coordinates, `refinement` points inside
/// every gap, the center coordinate, and a geometric ladder out to |x| = 8
/// beyond the extremes. The empirical CDF is constant on each resulting
/// cell; the value is the max over both corners of every cell (the upper one
/// as a limit from inside). Phi_d is monotone along each axis, so on a cell
/// |F - Phi_d| never exceeds its corner maximum and w never exceeds its value
/// at the cell point closest to the center; the bound is the largest such
/// product minus the value. `cell_budget` caps the number of cells.
inline MultivariateDistanceResult weighted_distance_multivariate(std::span<const double> points, std::size_t d,
                                                                 const MultivariateWeight& cfg,
                                                                 std::size_t refinement = 2,
                                                                 double cell_budget = 5e7) {
  require(d >= 2 && d <= 3, "weighted_distance_multivariate: dimension must be 2 or 3");
  require(!points.empty() && points.size() % d == 0, "weighted_distance_multivariate: need n >= 1 points of dimension d");
  require(cfg.center.empty() || cfg.center.size() == d, "weighted_distance_multivariate: center has wrong dimension");
  require(cfg.q >= 0.0, "weighted_distance_multivariate: q must be >= 0");
  const std::size_t n = points.size() / d;
  for (double v : points) require(std::isfinite(v), "weighted_distance_multivariate: coordinates must be finite");

  std::vector<std::vector<double>> grid(d);
  double cells = 1.0;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> coords(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = points[i * d + j];
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    auto& g = grid[j];
    for (std::size_t i = 0; i < coords.size(); ++i) {
      g.push_back(coords[i]);
      if (i + 1 < coords.size())
        for (std::size_t r = 1; r <= refinement; ++r)
          g.push_back(coords[i] + (coords[i + 1] - coords[i]) * static_cast<double>(r) / static_cast<double>(refinement + 1));
    }
    for (double step = 0.25; coords.back() + step < 8.5; step *= 2.0) g.push_back(coords.back() + step);
    for (double step = 0.25; coords.front() - step > -8.5; step *= 2.0) g.push_back(coords.front() - step);
    g.push_back(cfg.center.empty() ? 0.0 : cfg.center[j]);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    cells *= static_cast<double>(g.size() + 1);
  }
  require(cells <= cell_budget, "weighted_distance_multivariate: cell budget exceeded");

  // Node counts then inclusive prefix sums: count[a] = #{i : x_i <= g[a]}.
  std::array<std::size_t, 3> dims{1, 1, 1};
  for (std::size_t j = 0; j < d; ++j) dims[j] = grid[j].size();
  const std::size_t nodes = dims[0] * dims[1] * dims[2];
  std::vector<std::uint32_t> count(nodes, 0);
  auto flat = [&](const std::array<std::size_t, 3>& a) { return (a[0] * dims[1] + a[1]) * dims[2] + a[2]; };
  for (std::size_t i = 0; i < n; ++i) {
    std::array<std::size_t, 3> a{0, 0, 0};
    for (std::size_t j = 0; j < d; ++j)
      a[j] = static_cast<std::size_t>(std::lower_bound(grid[j].begin(), grid[j].end(), points[i * d + j]) - grid[j].begin());
    ++count[flat(a)];
  }
  for (std::size_t axis = 0; axis < d; ++axis) {
    std::array<std::size_t, 3> a{0, 0, 0};
    for (a[0] = 0; a[0] < dims[0]; ++a[0])
      for (a[1] = 0; a[1] < dims[1]; ++a[1])
        for (a[2] = 0; a[2] < dims[2]; ++a[2]) {
          if (a[axis] == 0) continue;
          auto prev = a;
          --prev[axis];
          count[flat(a)] += count[flat(prev)];
        }
  }

  std::vector<std::vector<double>> phi(d);
  for (std::size_t j = 0; j < d; ++j)
    for (double x : grid[j]) phi[j].push_back(special::normal_cdf(x));

  constexpr double inf = std::numeric_limits<double>::infinity();
  MultivariateDistanceResult out;
  out.value = -1.0;
  double envelope = 0.0;
  std::array<double, 3> lower{}, upper{}, nearest{};
  // Cell index c_j in [0, G_j]; cell c covers [g[c-1], g[c]) with g[-1] = -inf, g[G] = +inf.
  std::array<std::size_t, 3> c{0, 0, 0};
  std::array<std::size_t, 3> extent{1, 1, 1};
  for (std::size_t j = 0; j < d; ++j) extent[j] = dims[j] + 1;
  for (c[0] = 0; c[0] < extent[0]; ++c[0])
    for (c[1] = 0; c[1] < extent[1]; ++c[1])
      for (c[2] = 0; c[2] < extent[2]; ++c[2]) {
        bool lower_finite = true, upper_finite = true;
        double phi_lower = 1.0, phi_upper = 1.0;
        for (std::size_t j = 0; j < d; ++j) {
          if (c[j] == 0) {
            lower_finite = false;
            lower[j] = -inf;
            phi_lower = 0.0;
          } else {
            lower[j] = grid[j][c[j] - 1];
            phi_lower *= phi[j][c[j] - 1];
          }
          if (c[j] == dims[j]) {
            upper_finite = false;
            upper[j] = inf;
          } else {
            upper[j] = grid[j][c[j]];
            phi_upper *= phi[j][c[j]];
          }
          const double cj = cfg.center.empty() ? 0.0 : cfg.center[j];
          nearest[j] = std::clamp(cj, lower[j], upper[j]);
        }
        double F = 0.0;
        if (lower_finite) {
          std::array<std::size_t, 3> node{0, 0, 0};
          for (std::size_t j = 0; j < d; ++j) node[j] = c[j] - 1;
          F = static_cast<double>(count[flat(node)]) / static_cast<double>(n);
        }
        const double dl = std::fabs(F - phi_lower);
        const double du = std::fabs(F - phi_upper);
        envelope = std::max(envelope, cfg(std::span<const double>(nearest.data(), d)) * std::max(dl, du));
        auto offer = [&](const std::array<double, 3>& x, double diff) {
          ++out.candidates_evaluated;
          const double v = cfg(std::span<const double>(x.data(), d)) * diff;
          if (v > out.value) {
            out.value = v;
            out.argmax_x.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d));
          }
        };
        if (lower_finite) offer(lower, dl);
        if (upper_finite) offer(upper, du);
      }
  out.value = std::max(out.value, 0.0);
  out.refinement_error_bound = std::max(0.0, envelope - out.value);
  return out;
}

}  // namespace wkm
