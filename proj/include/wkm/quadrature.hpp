#pragma once

// Globally adaptive Gauss-Kronrod (7/15) integration. Semi-infinite ranges
// are mapped through x = a + s (e^v - 1), v = (1 - u) / u, which turns
// power-law tails into exponentially decaying integrands on (0, 1].

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "wkm/error.hpp"

namespace wkm::quad {

struct Options {
  double rel_tol = 1e-10;
  double abs_tol = 1e-300;
  int max_intervals = 4000;
  // Length scale of the integrand, used by the semi-infinite map.
  double scale = 1.0;
};

struct Result {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
};

namespace detail {

inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk15(const F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    kronrod += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
  }
  return {a, b, kronrod * half, std::fabs((kronrod - gauss) * half)};
}

template <class F>
Result adaptive(const F& f, double a, double b, const Options& opt) {
  if (a == b) return {};
  std::priority_queue<Segment> heap;
  Segment first = gk15(f, a, b);
  double total = first.value;
  double err = first.error;
  heap.push(first);
  int count = 1;
  while (err > std::max(opt.abs_tol, opt.rel_tol * std::fabs(total))) {
    if (count >= opt.max_intervals) return {total, err, false};
    Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) return {total, err, false};
    Segment left = gk15(f, worst.a, mid);
    Segment right = gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++count;
  }
  // Recompute the sums to shed accumulated rounding from the updates.
  double v = 0.0, e = 0.0;
  while (!heap.empty()) {
    v += heap.top().value;
    e += heap.top().error;
    heap.pop();
  }
  return {v, e, e <= std::max(opt.abs_tol, 10.0 * opt.rel_tol * std::fabs(v))};
}

// Integral of f over [a, inf).
template <class F>
Result to_infinity(const F& f, double a, const Options& opt) {
  const double s = opt.scale;
  auto mapped = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double v = (1.0 - u) / u;
    if (v > 700.0) return 0.0;
    const double ev = std::exp(v);
    const double x = a + s * (ev - 1.0);
    const double fx = f(x);
    if (fx == 0.0) return 0.0;
    return fx * s * ev / (u * u);
  };
  return adaptive(mapped, 0.0, 1.0, opt);
}

}  // namespace detail

/// Integral of f over [a, b]; either end may be infinite.
template <class F>
Result integrate(const F& f, double a, double b, const Options& opt = {}) {
  if (a == b) return {};
  if (a > b) {
    Result r = integrate(f, b, a, opt);
    r.value = -r.value;
    return r;
  }
  const bool a_inf = std::isinf(a);
  const bool b_inf = std::isinf(b);
  if (!a_inf && !b_inf) return detail::adaptive(f, a, b, opt);
  if (a_inf && b_inf) {
    Result l = integrate(f, a, 0.0, opt);
    Result r = integrate(f, 0.0, b, opt);
    return {l.value + r.value, l.error + r.error, l.converged && r.converged};
  }
  if (b_inf) return detail::to_infinity(f, a, opt);
  auto mirrored = [&](double x) { return f(-x); };
  return detail::to_infinity(mirrored, -b, opt);
}

/// Integral over [a, b] split at the given interior breakpoints (kinks,
/// support edges, truncation boundaries). Points outside (a, b) are ignored.
template <class F>
Result integrate_pieces(const F& f, double a, double b, std::span<const double> breaks, const Options& opt = {}) {
  std::vector<double> pts{a};
  for (double x : breaks)
    if (x > a && x < b) pts.push_back(x);
  pts.push_back(b);
  std::sort(pts.begin() + 1, pts.end() - 1);
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  Result out;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    Result r = integrate(f, pts[i], pts[i + 1], opt);
    out.value += r.value;
    out.error += r.error;
    out.converged = out.converged && r.converged;
  }
  return out;
}

}  // namespace wkm::quad
