// Acceptance suite. Prints one PASS/FAIL line per criterion; exits nonzero
// when any selected criterion fails.
//
//   acceptance                      run everything
//   acceptance --criterion kupiec   run one (repeatable)
//   acceptance --list

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "wkm/wkm.hpp"

namespace fs = std::filesystem;
using wkm::DistributionModel;
using wkm::EmpiricalCDF;
using wkm::Exhaustion;
using wkm::WeightConfig;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string out_dir = ".";

// ---------------------------------------------------------------------------
// Random instances

DistributionModel random_model(std::mt19937_64& g, double min_tail = 2.2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (g() % 3) {
    case 0:
      return DistributionModel::gaussian(-2.0 + 4.0 * u(g), 0.3 + 2.7 * u(g));
    case 1:
      return DistributionModel::student_t(min_tail + (8.0 - min_tail) * u(g), -1.0 + 2.0 * u(g), 0.5 + 1.5 * u(g));
    default:
      return DistributionModel::pareto(min_tail + (5.0 - min_tail) * u(g), 0.5 + 2.5 * u(g));
  }
}

WeightConfig random_weight(std::mt19937_64& g, const DistributionModel& m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double q = 3.0 * u(g);
  switch (g() % 3) {
    case 0:
      return WeightConfig(Exhaustion::absolute(), q);
    case 1:
      return WeightConfig(Exhaustion::centered(m.quantile(0.2 + 0.6 * u(g))), q);
    default:
      return WeightConfig(Exhaustion::var_centered(m, 0.01 + 0.09 * u(g)), q);
  }
}

std::size_t random_n(std::mt19937_64& g, std::size_t hi) { return 1 + g() % hi; }

// ---------------------------------------------------------------------------
// Metric axioms on two-sample distances

Outcome axioms() {
  constexpr std::size_t kInstances = 1000;
  constexpr double kTol = 1e-12;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 g(20261018);
  std::size_t failures = 0;
  double worst_sym = 0.0, worst_tri = -1.0, worst_self = 0.0;
  for (std::size_t i = 0; i < kInstances; ++i) {
    std::vector<EmpiricalCDF> s;
    for (int k = 0; k < 3; ++k) {
      const auto m = random_model(g);
      s.emplace_back(wkm::sample(m, g(), 0, random_n(g, 500)));
    }
    const auto cfg = random_weight(g, DistributionModel::gaussian(0.0, 1.0));
    auto d = [&](int a, int b) { return wkm::weighted_distance_two_sample(s[a], s[b], cfg).value; };
    const double self = std::max({d(0, 0), d(1, 1), d(2, 2)});
    const double sym = std::max({std::fabs(d(0, 1) - d(1, 0)), std::fabs(d(1, 2) - d(2, 1)), std::fabs(d(0, 2) - d(2, 0))});
    const double tri = std::max({d(0, 2) - d(0, 1) - d(1, 2), d(0, 1) - d(0, 2) - d(2, 1), d(1, 2) - d(1, 0) - d(0, 2)});
    // Distinct samples with positive weights must be at positive distance.
    const bool separated = d(0, 1) > 0.0 && d(1, 2) > 0.0 && d(0, 2) > 0.0;
    worst_self = std::max(worst_self, self);
    worst_sym = std::max(worst_sym, sym);
    worst_tri = std::max(worst_tri, tri);
    if (self > kTol || sym > kTol || tri > kTol || !separated) ++failures;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = failures == 0 && secs < 60.0;
  return {pass, std::to_string(kInstances) + " instances, failures " + std::to_string(failures) + ", max d(x,x) " +
                    fmt(worst_self) + ", max asymmetry " + fmt(worst_sym) + ", max triangle excess " + fmt(worst_tri) +
                    ", " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// q = 0 against the textbook one-sample KS statistic

Outcome ks_reduction() {
  constexpr std::size_t kInstances = 1000;
  constexpr double kTol = 1e-12;
  std::mt19937_64 g(7);
  double worst = 0.0;
  for (std::size_t i = 0; i < kInstances; ++i) {
    const auto null = random_model(g);
    const auto data_model = g() % 2 ? null : random_model(g);
    const auto xs = wkm::sample(data_model, g(), 0, random_n(g, 500));
    const EmpiricalCDF e(xs);
    const WeightConfig cfg(i % 2 ? Exhaustion::absolute() : Exhaustion::centered(1.0), 0.0);
    const double ours = wkm::weighted_distance_to_model(e, null, cfg).value;
    auto s = xs;
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    double ks = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double G = null.cdf(s[k]);
      ks = std::max({ks, static_cast<double>(k + 1) / n - G, G - static_cast<double>(k) / n});
    }
    worst = std::max(worst, std::fabs(ours - ks));
  }
  return {worst <= kTol, std::to_string(kInstances) + " instances, max |d - KS| = " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// Candidate-set supremum against dense grids

// Sample values are snapped to the oracle lattice so the empirical CDF is
// constant on every lattice cell; the oracle then sees both one-sided values
// at every node. Inside a cell w |c - G| moves by at most step * (q L_h +
// max g) / 2 from its endpoint values, and outside the window the model
// mass is below 1e-7.
struct OracleCheck {
  bool ok = true;
  double max_gap = 0.0;  // |value - oracle|
  double max_bound = 0.0;
};

void univariate_instance(std::mt19937_64& g, OracleCheck& acc) {
  constexpr double kStep = 1e-4;
  constexpr double kMass = 1e-7;
  constexpr std::size_t kRefinement = 64;
  const auto model = random_model(g, 2.5);
  const auto cfg = random_weight(g, model);
  const double lo = model.quantile(kMass), hi = model.quantile(1.0 - kMass);
  const auto K = static_cast<std::size_t>(std::ceil((hi - lo) / kStep));
  auto node = [&](std::size_t k) { return lo + static_cast<double>(k) * kStep; };

  const auto data_model = g() % 2 ? model : random_model(g, 2.5);
  auto raw = wkm::sample(data_model, g(), 0, random_n(g, 500));
  std::vector<std::size_t> idx;
  for (double x : raw) {
    const double k = std::round((x - lo) / kStep);
    idx.push_back(static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(K))));
  }
  std::sort(idx.begin(), idx.end());
  std::vector<double> xs;
  for (auto k : idx) xs.push_back(node(k));
  const EmpiricalCDF e(xs);
  const auto r = wkm::weighted_distance_to_model(e, model, cfg, kRefinement);

  const double n = static_cast<double>(idx.size());
  double oracle = 0.0;
  std::size_t below = 0;  // #{x <= previous node}
  std::size_t p = 0;
  for (std::size_t k = 0; k <= K; ++k) {
    while (p < idx.size() && idx[p] <= k) ++p;
    const double t = node(k);
    const double w = cfg(t), G = model.cdf(t);
    oracle = std::max({oracle, w * std::fabs(static_cast<double>(p) / n - G),
                       w * std::fabs(static_cast<double>(below) / n - G)});
    below = p;
  }
  const double slack = 0.5 * kStep * (cfg.lipschitz() + model.max_density()) + kMass;
  const bool ok = oracle <= r.value + r.refinement_error_bound + 1e-12 && r.value <= oracle + slack + 1e-12;
  acc.ok = acc.ok && ok;
  acc.max_gap = std::max(acc.max_gap, std::fabs(r.value - oracle));
  acc.max_bound = std::max(acc.max_bound, r.refinement_error_bound);
}

void bivariate_instance(std::mt19937_64& g, OracleCheck& acc) {
  constexpr std::size_t kNodes = 400;
  constexpr double kLo = -5.0, kHi = 5.0;
  constexpr double kOutside = 1e-6;  // >= Phi(-5)
  const double step = (kHi - kLo) / static_cast<double>(kNodes - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  wkm::MultivariateWeight cfg;
  cfg.q = 3.0 * u(g);
  if (g() % 2) cfg.center = {-1.0 + 2.0 * u(g), -1.0 + 2.0 * u(g)};
  const double shift = -0.5 + u(g), scale = 0.7 + 0.8 * u(g);
  const std::size_t n = random_n(g, 60);
  wkm::RngStream rng(g(), 0);
  const auto normal = DistributionModel::gaussian(shift, scale);
  std::vector<std::array<std::size_t, 2>> idx(n);
  std::vector<double> pts(2 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      const double k = std::clamp(std::round((normal.draw(rng) - kLo) / step), 0.0, static_cast<double>(kNodes - 1));
      idx[i][j] = static_cast<std::size_t>(k);
      pts[2 * i + j] = kLo + k * step;
    }
  const auto r = wkm::weighted_distance_multivariate(pts, 2, cfg, 2);

  std::vector<double> grid(kNodes), phi(kNodes);
  for (std::size_t i = 0; i < kNodes; ++i) {
    grid[i] = kLo + static_cast<double>(i) * step;
    phi[i] = wkm::special::normal_cdf(grid[i]);
  }
  std::vector<double> count(kNodes * kNodes, 0.0);
  for (const auto& a : idx) count[a[0] * kNodes + a[1]] += 1.0;
  for (std::size_t i = 0; i < kNodes; ++i)
    for (std::size_t j = 0; j < kNodes; ++j) {
      if (i > 0) count[i * kNodes + j] += count[(i - 1) * kNodes + j];
      if (j > 0) count[i * kNodes + j] += count[i * kNodes + j - 1];
      if (i > 0 && j > 0) count[i * kNodes + j] -= count[(i - 1) * kNodes + j - 1];
    }
  double lower = 0.0, upper = 0.0;
  const double nn = static_cast<double>(n);
  for (std::size_t i = 0; i < kNodes; ++i)
    for (std::size_t j = 0; j < kNodes; ++j) {
      const double c = count[i * kNodes + j] / nn;
      const std::array<double, 2> at{grid[i], grid[j]};
      const double dl = std::fabs(c - phi[i] * phi[j]);
      lower = std::max(lower, cfg(at) * dl);
      const std::size_t i1 = std::min(i + 1, kNodes - 1), j1 = std::min(j + 1, kNodes - 1);
      const double du = std::fabs(c - phi[i1] * phi[j1]);
      if (i + 1 < kNodes && j + 1 < kNodes) lower = std::max(lower, cfg(std::array<double, 2>{grid[i1], grid[j1]}) * du);
      const double c0 = cfg.center.empty() ? 0.0 : cfg.center[0], c1 = cfg.center.empty() ? 0.0 : cfg.center[1];
      const std::array<double, 2> nearest{std::clamp(c0, grid[i], grid[i1]), std::clamp(c1, grid[j], grid[j1])};
      upper = std::max(upper, cfg(nearest) * (std::max(dl, du) + kOutside));
    }
  const bool ok = lower <= r.value + r.refinement_error_bound + 1e-12 && r.value <= upper + kOutside;
  acc.ok = acc.ok && ok;
  acc.max_gap = std::max(acc.max_gap, std::fabs(r.value - lower));
  acc.max_bound = std::max(acc.max_bound, r.refinement_error_bound);
}

Outcome sup_oracle() {
  constexpr std::size_t kUnivariate = 200, kBivariate = 200;
  std::mt19937_64 g(31337);
  std::vector<std::uint64_t> seeds1(kUnivariate), seeds2(kBivariate);
  for (auto& s : seeds1) s = g();
  for (auto& s : seeds2) s = g();
  std::vector<OracleCheck> one(kUnivariate), two(kBivariate);
  wkm::parallel_for(kUnivariate, worker_count(), [&](std::size_t i) {
    std::mt19937_64 gi(seeds1[i]);
    univariate_instance(gi, one[i]);
  });
  wkm::parallel_for(kBivariate, worker_count(), [&](std::size_t i) {
    std::mt19937_64 gi(seeds2[i]);
    bivariate_instance(gi, two[i]);
  });
  auto summarize = [](const std::vector<OracleCheck>& v, OracleCheck& s) {
    std::size_t bad = 0;
    for (const auto& c : v) {
      bad += !c.ok;
      s.max_gap = std::max(s.max_gap, c.max_gap);
      s.max_bound = std::max(s.max_bound, c.max_bound);
    }
    return bad;
  };
  OracleCheck s1, s2;
  const auto bad1 = summarize(one, s1), bad2 = summarize(two, s2);
  return {bad1 == 0 && bad2 == 0,
          "d=1: " + std::to_string(kUnivariate - bad1) + "/" + std::to_string(kUnivariate) + " agree (max gap " +
              fmt(s1.max_gap) + ", max bound " + fmt(s1.max_bound) + "); d=2: " + std::to_string(kBivariate - bad2) +
              "/" + std::to_string(kBivariate) + " agree (max gap " + fmt(s2.max_gap) + ", max bound " +
              fmt(s2.max_bound) + ")"};
}

// ---------------------------------------------------------------------------
// Tail remainder of pareto(2.8), delta = 0.5

Outcome tail_remainder() {
  constexpr double kSlope = -0.3, kSlopeTol = 0.05;
  constexpr double kSigmas = 3.0;
  constexpr std::size_t kDraws = 1'000'000;
  const auto m = DistributionModel::pareto(2.8);
  const double delta = 0.5;
  const auto h = Exhaustion::absolute();
  const auto fit = wkm::fit_tail_remainder(m, h, delta, wkm::log_grid(1e2, 1e6, 30));
  const double slope = -fit.eta;
  bool pass = std::fabs(slope - kSlope) <= kSlopeTol;
  std::string detail = "fitted slope " + fmt(slope) + " (target " + fmt(kSlope) + " +/- " + fmt(kSlopeTol) + ")";

  const auto xs = wkm::sample(m, 2028, 0, kDraws);
  const double mu = m.mean();
  for (double R : {2.0, 10.0}) {
    const double quad = wkm::truncation_analysis(m, h, R, delta).tail_remainder;
    double s = 0.0, ss = 0.0;
    for (double x : xs) {
      const double v = h(x) > R ? std::pow(std::fabs(x - mu), 2.0 + delta) : 0.0;
      s += v;
      ss += v * v;
    }
    const double N = static_cast<double>(kDraws);
    const double mean = s / N;
    const double se = std::sqrt(std::max(0.0, ss / N - mean * mean) / (N - 1.0));
    const double z = (mean - quad) / se;
    pass = pass && std::fabs(z) <= kSigmas;
    detail += "; R=" + fmt(R) + " quadrature " + fmt(quad, 8) + " vs MC " + fmt(mean, 8) + " (SE " + fmt(se, 3) +
              ", z " + fmt(z, 3) + ")";
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// M3(R) <= C (1 + R)^{1 - delta}

Outcome m3_interpolation() {
  const auto grid = wkm::log_grid(0.1, 1e4, 40);
  bool pass = true;
  std::string detail;
  struct Case {
    const char* name;
    DistributionModel model;
    double delta;
  };
  for (const auto& c : {Case{"student_t(2.5)", DistributionModel::student_t(2.5), 0.45},
                        Case{"pareto(2.8)", DistributionModel::pareto(2.8), 0.5}}) {
    double C = 0.0;
    std::vector<double> m3;
    for (double R : grid) {
      const auto ta = wkm::truncation_analysis(c.model, Exhaustion::absolute(), R, c.delta);
      m3.push_back(ta.M3);
      C = std::max(C, ta.M3 / std::pow(1.0 + R, 1.0 - c.delta));
    }
    // On {|x| <= R}, |x - mu|^{1-delta} <= (max(1, |mu|) (1 + R))^{1-delta}.
    const double moment = wkm::analytic_moments(c.model, c.delta).abs_moment_2_delta;
    const double envelope = std::pow(std::max(1.0, std::fabs(c.model.mean())), 1.0 - c.delta) * moment;
    // Growth at the end of the grid must not outpace (1 + R)^{1-delta}.
    const std::size_t k = grid.size() - 1;
    const double end_slope = std::log(m3[k] / m3[k - 1]) / std::log((1.0 + grid[k]) / (1.0 + grid[k - 1]));
    const bool ok = std::isfinite(C) && C > 0.0 && C <= envelope * (1.0 + 1e-9) && end_slope <= 1.0 - c.delta;
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += std::string(c.name) + " delta=" + fmt(c.delta) + ": fitted C " + fmt(C) + " <= " + fmt(envelope) +
              ", end growth " + fmt(end_slope, 4) + " <= " + fmt(1.0 - c.delta);
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// Convergence scenarios

struct ScenarioFits {
  bool ok_weighted = false, ok_ks = false;
  wkm::SlopeFit weighted, ks;
  std::string error;
};

ScenarioFits run_scenario(const std::string& id, const DistributionModel& model) {
  wkm::ScenarioConfig cfg;
  cfg.scenario = id;
  cfg.model = model;
  cfg.weighted = WeightConfig(Exhaustion::absolute(), 1.2);
  cfg.M = 10000;
  cfg.repetitions = 8;
  cfg.seed = 1601;
  const auto rows = wkm::run_convergence(cfg, worker_count());
  std::ofstream csv(fs::path(out_dir) / (id + ".csv"));
  wkm::write_convergence_csv(csv, rows);
  ScenarioFits f;
  auto fit = [&](const char* metric, wkm::SlopeFit& out, bool& ok) {
    const auto kept = wkm::rows_above_floor(rows, metric, 2.0);
    try {
      out = wkm::loglog_slope(kept);
      ok = true;
    } catch (const wkm::InvalidArgument&) {
      f.error += std::string(f.error.empty() ? "" : "; ") + metric + ": only " + std::to_string(kept.size()) +
                 " n above 2x floor";
    }
  };
  fit("weighted", f.weighted, f.ok_weighted);
  fit("ks", f.ks, f.ok_ks);
  return f;
}

std::string describe(const wkm::SlopeFit& fit) {
  std::string ns;
  for (auto n : fit.n_used) ns += (ns.empty() ? "" : ",") + std::to_string(n);
  return fmt(fit.slope, 4) + " over n={" + ns + "}";
}

Outcome scenario1() {
  constexpr double kLo = -0.65, kHi = -0.40, kSeparation = 0.1;
  const auto f = run_scenario("scenario1_student_t", DistributionModel::student_t(2.5));
  if (!f.ok_weighted || !f.ok_ks) return {false, "slope fit impossible: " + f.error};
  const bool band = f.weighted.slope >= kLo && f.weighted.slope <= kHi;
  const bool sep = f.ks.slope > f.weighted.slope + kSeparation;
  return {band && sep, "weighted slope " + describe(f.weighted) + " (band [" + fmt(kLo) + ", " + fmt(kHi) +
                           "]), ks slope " + describe(f.ks) + " (must exceed weighted + " + fmt(kSeparation) + ")"};
}

Outcome scenario2() {
  constexpr double kLo = -0.6, kHi = -0.4;
  const auto f = run_scenario("scenario2_pareto", DistributionModel::pareto(2.8));
  if (!f.ok_weighted) return {false, "slope fit impossible: " + f.error};
  const bool band = f.weighted.slope >= kLo && f.weighted.slope <= kHi;
  return {band, "weighted slope " + describe(f.weighted) + " (band [" + fmt(kLo) + ", " + fmt(kHi) + "])" +
                    (f.ok_ks ? ", ks slope " + describe(f.ks) : "")};
}

// ---------------------------------------------------------------------------
// Bootstrap p-values under H0

Outcome bootstrap_calibration() {
  constexpr std::size_t kN = 500, kB = 500, kReplicates = 500;
  constexpr double kAlpha = 0.05;
  constexpr double kRejectLo = 0.03, kRejectHi = 0.08;
  const double ks_band = 1.358 / std::sqrt(static_cast<double>(kReplicates));
  const auto model = DistributionModel::gaussian(0.0, 1.0);
  const WeightConfig cfg(Exhaustion::absolute(), 1.0);
  const std::uint64_t seed = 404;
  std::vector<double> pvals(kReplicates);
  std::vector<int> rejected(kReplicates);
  wkm::parallel_for(kReplicates, worker_count(), [&](std::size_t r) {
    const EmpiricalCDF data(wkm::sample(model, wkm::derive_seed(seed, {r, 0}), 0, kN));
    const double obs = wkm::weighted_distance_to_model(data, model, cfg).value;
    const auto null = wkm::bootstrap_null(model, kN, cfg, kB, wkm::derive_seed(seed, {r, 1}));
    pvals[r] = wkm::p_value(obs, null);
    rejected[r] = obs > wkm::critical_value(null, kAlpha);
  });
  std::sort(pvals.begin(), pvals.end());
  double D = 0.0;
  const double m = static_cast<double>(kReplicates);
  for (std::size_t i = 0; i < kReplicates; ++i)
    D = std::max({D, static_cast<double>(i + 1) / m - pvals[i], pvals[i] - static_cast<double>(i) / m});
  double rate = 0.0;
  for (int x : rejected) rate += x;
  rate /= m;
  const bool pass = D < ks_band && rate >= kRejectLo && rate <= kRejectHi;
  return {pass, "KS(p-values, U[0,1]) = " + fmt(D, 4) + " (band " + fmt(ks_band, 4) + "), rejection rate " +
                    fmt(rate, 4) + " (band [" + fmt(kRejectLo) + ", " + fmt(kRejectHi) + "])"};
}

// ---------------------------------------------------------------------------
// Kupiec(0, 250, 0.01)

// P(chi2_1 > x) = 1 - erf(sqrt(x/2)) with erf from its Maclaurin series.
double chi2_1_survival_series(double x) {
  const double z = std::sqrt(0.5 * x);
  double term = z, sum = z;
  for (int k = 1; k < 200; ++k) {
    term *= -z * z / k;
    sum += term / (2 * k + 1);
  }
  return 1.0 - 2.0 / std::sqrt(std::numbers::pi) * sum;
}

Outcome kupiec() {
  constexpr double kLr = 5.0254, kP = 0.0250, kTol = 1e-3, kOracleTol = 1e-12;
  const auto r = wkm::kupiec_pof(0, 250, 0.01);
  const double lr_closed = -2.0 * 250.0 * std::log(0.99);
  const double p_oracle = chi2_1_survival_series(r.lr);
  const bool pass = std::fabs(r.lr - kLr) <= kTol && std::fabs(r.p_value - kP) <= kTol &&
                    std::fabs(r.lr - lr_closed) <= kOracleTol && std::fabs(r.p_value - p_oracle) <= kOracleTol;
  return {pass, "LR " + fmt(r.lr, 10) + " (closed form " + fmt(lr_closed, 10) + "), p " + fmt(r.p_value, 10) +
                    " (series oracle " + fmt(p_oracle, 10) + ")"};
}

// ---------------------------------------------------------------------------
// Grid certificate: student_t(2.5) data, gaussian vs student_t null

Outcome grid_certificate() {
  // At n = 4000 the student_t-null d_rob has median about 0.011 and 99th
  // percentile about 0.022 over these seeds, while the variance-matched
  // gaussian null sits near its population distance of about 0.094.
  constexpr std::size_t kN = 4000, kSeeds = 200;
  constexpr double kEps = 0.04, kFraction = 0.95;
  const std::vector<double> Q{0.5, 1.0, 1.5, 2.0, 2.5};
  const auto t = DistributionModel::student_t(2.5);
  const auto gauss = DistributionModel::gaussian(0.0, std::sqrt(t.variance()));
  std::vector<double> dg(kSeeds), dt(kSeeds);
  wkm::parallel_for(kSeeds, worker_count(), [&](std::size_t s) {
    const EmpiricalCDF e(wkm::sample(t, 9000 + s, 0, kN));
    dg[s] = wkm::grid_robust_distance(e, gauss, Exhaustion::absolute(), Q).d_rob;
    dt[s] = wkm::grid_robust_distance(e, t, Exhaustion::absolute(), Q).d_rob;
  });
  std::size_t ordered = 0, crossing = 0;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    ordered += dg[s] > dt[s];
    crossing += dg[s] > kEps && dt[s] <= kEps;
  }
  auto sorted_t = dt, sorted_g = dg;
  std::sort(sorted_t.begin(), sorted_t.end());
  std::sort(sorted_g.begin(), sorted_g.end());
  const double need = kFraction * static_cast<double>(kSeeds);
  const bool pass = ordered >= need && crossing >= need;
  return {pass, "n=" + std::to_string(kN) + ": gaussian > student_t in " + std::to_string(ordered) + "/" +
                    std::to_string(kSeeds) + ", threshold split in " + std::to_string(crossing) + "/" +
                    std::to_string(kSeeds) + "; median d_rob gaussian " + fmt(sorted_g[kSeeds / 2], 4) +
                    ", student_t " + fmt(sorted_t[kSeeds / 2], 4) + " (99th pct " +
                    fmt(sorted_t[kSeeds * 99 / 100], 4) + ")"};
}

// ---------------------------------------------------------------------------
// Hybrid verdict truth table

Outcome hybrid_truth_table() {
  const auto m = DistributionModel::gaussian(0.0, 1.0);
  const auto clean = wkm::sample(m, 3, 0, 1000);
  auto breach = clean;
  std::sort(breach.begin(), breach.end());
  const double var = m.quantile(0.01);
  for (std::size_t i = 0; wkm::count_var_exceptions(breach, var) < 50; ++i) breach[500 + i] = var - 0.1;
  bool pass = true;
  std::string detail;
  for (bool core : {true, false})
    for (bool tail : {true, false}) {
      wkm::ValidationPolicy p;
      p.eps_core = core ? 0.3 : 1e-6;
      const auto v = wkm::hybrid_validate(tail ? clean : breach, m, p);
      const bool ok = v.core_pass == core && v.tail_pass == tail && v.accept == (core && tail) &&
                      wkm::hybrid_accept(core, tail) == (core && tail);
      pass = pass && ok;
      detail += std::string(detail.empty() ? "" : ", ") + "(" + (core ? "pass" : "fail") + "," +
                (tail ? "pass" : "fail") + ")->" + (v.accept ? "accept" : "reject");
    }
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// CLI determinism across thread counts

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "wkm_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto run = [&](const std::string& args, const fs::path& out) {
    const std::string cmd = std::string("'") + WKM_CLI_PATH + "' " + args + " > '" + out.string() + "' 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const std::string t = R"('{"family":"student_t","nu":2.5}')";
  const std::string data = (dir / "data.csv").string();
  if (run("sample --model " + t + " --n 1000 --seed 17 --out '" + data + "'", dir / "ignored") != 0)
    return {false, "could not create input data"};
  struct Cmd {
    std::string name, args, file;  // file: extra output written by the command, if any
  };
  const std::vector<Cmd> cmds{
      {"sample", "sample --model " + t + " --n 20000 --seed 5 --out '{F}'", "sample.csv"},
      {"convergence",
       R"(convergence --config '{"scenario":"det","model":{"family":"student_t","nu":2.5},"n_grid":[50,100,200],"M":400,"repetitions":2}' --seed 11 --out '{F}')",
       "convergence.csv"},
      {"bootstrap", "bootstrap --model " + t + " --n 300 --B 200 --seed 3 --observed 0.05 --out '{F}'", "bootstrap.csv"},
      {"validate", "validate --data '" + data + "' --model " + t + R"( --policy '{"B":150}' --seed 9)", ""},
  };
  std::string detail;
  bool pass = true;
  for (const auto& c : cmds) {
    std::string out1, out2;
    int code[2];
    for (int k = 0; k < 2; ++k) {
      const unsigned threads = k == 0 ? 1 : 4;
      std::string args = c.args;
      const std::string file = (dir / (c.name + std::to_string(threads) + "_" + c.file)).string();
      if (const auto pos = args.find("{F}"); pos != std::string::npos) args.replace(pos, 3, file);
      const auto stdout_path = dir / (c.name + std::to_string(threads) + ".stdout");
      code[k] = run("--threads " + std::to_string(threads) + " " + args, stdout_path);
      std::string bytes = slurp(stdout_path);
      if (!c.file.empty()) bytes += slurp(file);
      (k == 0 ? out1 : out2) = bytes;
    }
    const bool ok = code[0] == code[1] && code[0] >= 0 && code[0] <= 1 && !out1.empty() && out1 == out2;
    pass = pass && ok;
    detail += std::string(detail.empty() ? "" : ", ") + c.name + (ok ? " identical" : " DIFFERS");
  }
  fs::remove_all(dir);
  return {pass, detail + " (threads 1 vs 4)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"axioms", axioms},
      {"ks_reduction", ks_reduction},
      {"sup_oracle", sup_oracle},
      {"tail_remainder", tail_remainder},
      {"m3_interpolation", m3_interpolation},
      {"scenario1", scenario1},
      {"scenario2", scenario2},
      {"bootstrap_calibration", bootstrap_calibration},
      {"kupiec", kupiec},
      {"grid_certificate", grid_certificate},
      {"hybrid_truth_table", hybrid_truth_table},
      {"determinism", determinism},
  };

  CLI::App app{"Acceptance suite"};
  std::vector<std::string> selected;
  bool list = false;
  app.add_option("--criterion", selected, "Run only these criteria");
  app.add_flag("--list", list, "List criteria and exit");
  app.add_option("--out-dir", out_dir, "Directory for the scenario CSVs");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& [name, fn] : criteria) std::cout << name << '\n';
    return 0;
  }
  for (const auto& s : selected)
    if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == s; })) {
      std::cerr << "unknown criterion: " << s << '\n';
      return 2;
    }

  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
