#pragma once

// Monte Carlo convergence harness. The law of Z_n is represented by the
// empirical CDF of M independent Z_n draws and compared with Phi, so every
// estimate carries a Monte Carlo floor of order 1/sqrt(M); the optional
// floor rows run the identical estimator on exact N(0,1) draws.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wkm/distributions.hpp"
#include "wkm/error.hpp"
#include "wkm/exhaustion.hpp"
#include "wkm/format.hpp"
#include "wkm/metric.hpp"
#include "wkm/rng.hpp"
#include "wkm/theory.hpp"

namespace wkm {

struct ScenarioConfig {
  std::string scenario = "scenario";
  DistributionModel model = DistributionModel::gaussian(0.0, 1.0);
  WeightConfig weighted{Exhaustion::absolute(), 1.2};
  std::vector<std::size_t> n_grid{250, 500, 1000, 2000, 4000, 8000, 16000, 32000};
  std::size_t M = 160;
  std::size_t repetitions = 1;
  std::uint64_t seed = 0;
  bool floor = true;
  std::size_t refinement = 8;
  double max_draws = 1e9;  // cap on n * M per grid point

  void validate() const {
    require(!n_grid.empty(), "ScenarioConfig: n grid is empty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      require(n_grid[i] >= 1, "ScenarioConfig: n values must be >= 1");
      require(i == 0 || n_grid[i] > n_grid[i - 1], "ScenarioConfig: n grid must be sorted ascending");
    }
    require(M >= 2, "ScenarioConfig: M must be at least 2");
    require(repetitions >= 1, "ScenarioConfig: repetitions must be at least 1");
    require(!scenario.empty() && scenario.find(',') == std::string::npos,
            "ScenarioConfig: scenario id must be nonempty and comma-free");
    if (static_cast<double>(n_grid.back()) * static_cast<double>(M) > max_draws)
      throw InvalidArgument("ScenarioConfig: n * M exceeds the draw budget of " + format_double(max_draws));
  }
};

struct ConvergenceRow {
  std::string scenario;
  std::string metric;  // "weighted" | "ks"
  std::size_t n = 0;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t M = 0;
  std::uint64_t seed = 0;
  bool floor = false;  // true for the N(0,1) calibration rows
};

namespace detail {

inline std::uint64_t string_key(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::pair<double, double> mean_and_stderr(std::span<const double> xs) {
  const double m = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= m;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (m - 1.0) / m)};
}

inline constexpr std::uint64_t kSumsTag = 1;
inline constexpr std::uint64_t kFloorTag = 2;

}  // namespace detail

/// For each n: `repetitions` independent estimates of d(L(Z_n), Phi) under
/// the weighted config and under q = 0 (KS), each from M draws of Z_n.
/// Work item (n, rep) uses the substream derived from
/// (seed, scenario, n, rep); rows come out in n_grid order, weighted before
/// ks, data rows before floor rows.
inline std::vector<ConvergenceRow> run_convergence(const ScenarioConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  const WeightConfig ks(Exhaustion::absolute(), 0.0);
  const auto scenario_key = detail::string_key(cfg.scenario);
  const auto phi = DistributionModel::gaussian(0.0, 1.0);
  std::vector<ConvergenceRow> rows;

  auto emit = [&](const char* metric, std::size_t n, std::span<const double> values, bool floor) {
    const auto [mean, se] = detail::mean_and_stderr(values);
    rows.push_back({cfg.scenario, metric, n, mean, se, cfg.M, cfg.seed, floor});
  };

  for (std::size_t n : cfg.n_grid) {
    std::vector<double> weighted(cfg.repetitions), plain(cfg.repetitions);
    std::vector<double> floor_weighted(cfg.repetitions), floor_plain(cfg.repetitions);
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
      const auto seed = derive_seed(cfg.seed, {scenario_key, detail::kSumsTag, n, rep});
      const auto z = simulate_normalized_sums(cfg.model, n, cfg.M, seed, threads);
      const EmpiricalCDF ecdf(z.values);
      weighted[rep] = weighted_distance_to_model(ecdf, phi, cfg.weighted, cfg.refinement).value;
      plain[rep] = weighted_distance_to_model(ecdf, phi, ks, 0).value;
      if (cfg.floor) {
        const auto fseed = derive_seed(cfg.seed, {scenario_key, detail::kFloorTag, n, rep});
        const EmpiricalCDF exact(sample(phi, fseed, 0, cfg.M));
        floor_weighted[rep] = weighted_distance_to_model(exact, phi, cfg.weighted, cfg.refinement).value;
        floor_plain[rep] = weighted_distance_to_model(exact, phi, ks, 0).value;
      }
    }
    emit("weighted", n, weighted, false);
    emit("ks", n, plain, false);
    if (cfg.floor) {
      emit("weighted", n, floor_weighted, true);
      emit("ks", n, floor_plain, true);
    }
  }
  return rows;
}

inline void write_convergence_csv(std::ostream& out, std::span<const ConvergenceRow> rows) {
  out << "scenario,metric,n,mean,stderr,M,seed,floor\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.metric << ',' << r.n << ',' << format_double(r.mean) << ','
        << format_double(r.std_error) << ',' << r.M << ',' << r.seed << ',' << (r.floor ? 1 : 0) << '\n';
  }
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::vector<std::size_t> n_used;
};

/// OLS of ln(mean) on ln(n) over rows with n in [n_min, n_max].
inline SlopeFit loglog_slope(std::span<const ConvergenceRow> rows, std::size_t n_min = 0,
                             std::size_t n_max = std::numeric_limits<std::size_t>::max()) {
  std::vector<double> x, y;
  SlopeFit fit;
  for (const auto& r : rows) {
    if (r.n < n_min || r.n > n_max) continue;
    require(r.mean > 0.0, "loglog_slope: means must be positive");
    x.push_back(std::log(static_cast<double>(r.n)));
    y.push_back(std::log(r.mean));
    fit.n_used.push_back(r.n);
  }
  require(x.size() >= 3, "loglog_slope: need at least 3 rows in range");
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "loglog_slope: need at least two distinct n");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

/// Data rows of `metric` whose mean exceeds factor x the floor mean at the
/// same n. Rows without a matching floor row are kept.
inline std::vector<ConvergenceRow> rows_above_floor(std::span<const ConvergenceRow> rows, const std::string& metric,
                                                    double factor = 2.0) {
  std::map<std::size_t, double> floor;
  for (const auto& r : rows)
    if (r.floor && r.metric == metric) floor[r.n] = r.mean;
  std::vector<ConvergenceRow> out;
  for (const auto& r : rows) {
    if (r.floor || r.metric != metric) continue;
    const auto it = floor.find(r.n);
    if (it == floor.end() || r.mean > factor * it->second) out.push_back(r);
  }
  return out;
}

struct TailscanRow {
  double R = 0.0;
  double tail_remainder = 0.0;
  double M3 = 0.0;
  double tau_R2 = 0.0;
  // Bound terms at the reference n; NaN when the core is degenerate.
  double term_core = 0.0;
  double term_tail = 0.0;
  double term_weight = 0.0;
  double total = 0.0;
};

inline std::vector<TailscanRow> run_tailscan(const DistributionModel& model, const Exhaustion& h, double delta,
                                             std::span<const double> R_grid, double reference_n = 1000.0,
                                             double q = 1.0, const BoundConstants& consts = {}) {
  require(!R_grid.empty(), "run_tailscan: R grid is empty");
  std::vector<TailscanRow> rows;
  for (double R : R_grid) {
    const auto ta = truncation_analysis(model, h, R, delta);
    TailscanRow row{R, ta.tail_remainder, ta.M3, ta.tau_R2};
    if (ta.tau_R2 > 0.0) {
      const auto t = evaluate_tradeoff_bound(ta, reference_n, q, consts);
      row.term_core = t.core;
      row.term_tail = t.tail;
      row.term_weight = t.weight;
      row.total = t.total;
    } else {
      row.term_core = row.term_tail = row.term_weight = row.total = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_tailscan_csv(std::ostream& out, std::span<const TailscanRow> rows) {
  out << "R,tail_remainder,M3,tau_R2,term_core,term_tail,term_weight,total\n";
  for (const auto& r : rows) {
    out << format_double(r.R) << ',' << format_double(r.tail_remainder) << ',' << format_double(r.M3) << ','
        << format_double(r.tau_R2) << ',' << format_double(r.term_core) << ',' << format_double(r.term_tail) << ','
        << format_double(r.term_weight) << ',' << format_double(r.total) << '\n';
  }
}

inline std::vector<double> log_grid(double lo, double hi, std::size_t points) {
  require(lo > 0.0 && hi > lo && points >= 2, "log_grid: need 0 < lo < hi and at least 2 points");
  std::vector<double> g(points);
  const double step = std::log(hi / lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = lo * std::exp(step * static_cast<double>(i));
  g.back() = hi;
  return g;
}

}  // namespace wkm
