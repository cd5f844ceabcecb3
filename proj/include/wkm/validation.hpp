#pragma once

// Model-validation machinery: parametric bootstrap critical values and
// p-values, the Kupiec proportion-of-failures test, the grid-robust
// statistic d_rob = max_{q in Q} d_{K,h,q}, and the hybrid verdict
// accept <=> core_pass && tail_pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "wkm/distributions.hpp"
#include "wkm/error.hpp"
#include "wkm/exhaustion.hpp"
#include "wkm/format.hpp"
#include "wkm/metric.hpp"
#include "wkm/parallel.hpp"
#include "wkm/special.hpp"

namespace wkm {

struct ValidationPolicy {
  // Exactly one of alpha_core (bootstrap level) or eps_core (fixed threshold).
  std::optional<double> alpha_core;
  std::optional<double> eps_core;
  double var_level = 0.01;         // VaR tail probability p
  double tail_test_level = 0.05;   // Kupiec test level
  std::vector<double> q_grid{0.5, 1.0, 1.5, 2.0, 2.5};
  std::size_t B = 500;
  std::uint64_t seed = 0;
  Exhaustion exhaustion = Exhaustion::absolute();
  std::size_t refinement = 8;

  void validate() const {
    require(alpha_core.has_value() != eps_core.has_value(),
            "ValidationPolicy: set exactly one of alpha_core or eps_core");
    if (alpha_core) require(*alpha_core > 0.0 && *alpha_core < 1.0, "ValidationPolicy: alpha_core must lie in (0,1)");
    if (eps_core) require(*eps_core > 0.0, "ValidationPolicy: eps_core must be positive");
    require(var_level > 0.0 && var_level < 1.0, "ValidationPolicy: var_level must lie in (0,1)");
    require(tail_test_level > 0.0 && tail_test_level < 1.0, "ValidationPolicy: tail test level must lie in (0,1)");
    require(!q_grid.empty(), "ValidationPolicy: q grid is empty");
    for (std::size_t i = 0; i < q_grid.size(); ++i) {
      require(q_grid[i] > 0.0, "ValidationPolicy: q grid values must be positive");
      require(i == 0 || q_grid[i] > q_grid[i - 1], "ValidationPolicy: q grid must be sorted ascending");
    }
    require(B >= 100, "ValidationPolicy: B must be at least 100");
  }
};

struct BootstrapOutcome {
  double critical_value = 0.0;  // c_{1-alpha}
  double p_value = 0.0;
  double alpha = 0.0;
  std::size_t B = 0;
  double observed = 0.0;
  std::uint64_t seed = 0;
};

struct KupiecResult {
  double lr = 0.0;
  double p_value = 1.0;
  std::size_t exceptions = 0;
  std::size_t n = 0;
  double p = 0.0;
};

struct GridRobustResult {
  double d_rob = 0.0;
  std::vector<double> q_grid;
  std::vector<double> per_q;
  double argmax_q = 0.0;
};

struct ValidationVerdict {
  bool core_pass = false;
  bool tail_pass = false;
  bool accept = false;
  GridRobustResult core;
  std::optional<double> eps_core;
  std::optional<BootstrapOutcome> bootstrap;
  double var_threshold = 0.0;
  KupiecResult kupiec;
};

/// B draws of statistic(F_n^{*(b)}) where sample b of size n comes from
/// substream b of `seed`.
template <class Statistic>
std::vector<double> bootstrap_null(const DistributionModel& model, std::size_t n, std::size_t B, std::uint64_t seed,
                                   Statistic&& statistic, unsigned threads = 1) {
  require(B >= 100, "bootstrap_null: B must be at least 100");
  require(n >= 1, "bootstrap_null: n must be at least 1");
  require(moment_exists(model, 2.0), "bootstrap_null: model variance is infinite");
  std::vector<double> out(B);
  parallel_for(B, threads, [&](std::size_t b) { out[b] = statistic(EmpiricalCDF(sample(model, seed, b, n))); });
  return out;
}

inline std::vector<double> bootstrap_null(const DistributionModel& model, std::size_t n, const WeightConfig& cfg,
                                          std::size_t B, std::uint64_t seed, std::size_t refinement = 8,
                                          unsigned threads = 1) {
  return bootstrap_null(
      model, n, B, seed,
      [&](const EmpiricalCDF& f) { return weighted_distance_to_model(f, model, cfg, refinement).value; }, threads);
}

/// c_{1-alpha} = inf{x : (1/B) #{d* <= x} >= 1 - alpha}.
inline double critical_value(std::span<const double> null_dist, double alpha) {
  require(!null_dist.empty(), "critical_value: null distribution is empty");
  require(alpha >= 0.0 && alpha < 1.0, "critical_value: alpha must lie in [0,1)");
  std::vector<double> s(null_dist.begin(), null_dist.end());
  std::sort(s.begin(), s.end());
  const double B = static_cast<double>(s.size());
  auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * B - 1e-9));
  k = std::clamp<std::size_t>(k, 1, s.size());
  return s[k - 1];
}

/// (1/B) #{d* >= observed}.
inline double p_value(double observed, std::span<const double> null_dist) {
  require(!null_dist.empty(), "p_value: null distribution is empty");
  const auto hits = std::count_if(null_dist.begin(), null_dist.end(), [&](double d) { return d >= observed; });
  return static_cast<double>(hits) / static_cast<double>(null_dist.size());
}

inline BootstrapOutcome bootstrap_outcome(double observed, std::span<const double> null_dist, double alpha,
                                          std::uint64_t seed) {
  BootstrapOutcome o;
  o.critical_value = critical_value(null_dist, alpha);
  o.p_value = p_value(observed, null_dist);
  o.alpha = alpha;
  o.B = null_dist.size();
  o.observed = observed;
  o.seed = seed;
  return o;
}

/// Kupiec unconditional-coverage likelihood ratio with 0 ln 0 = 0 and its
/// chi-square(1) p-value.
inline KupiecResult kupiec_pof(std::size_t exceptions, std::size_t n, double p) {
  require(n >= 1, "kupiec_pof: n must be at least 1");
  require(exceptions <= n, "kupiec_pof: exceptions must not exceed n");
  require(p > 0.0 && p < 1.0, "kupiec_pof: p must lie in (0,1)");
  auto xlogy = [](double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); };
  const double x = static_cast<double>(exceptions);
  const double N = static_cast<double>(n);
  const double phat = x / N;
  const double null_ll = xlogy(N - x, 1.0 - p) + xlogy(x, p);
  const double alt_ll = xlogy(N - x, 1.0 - phat) + xlogy(x, phat);
  KupiecResult r;
  r.lr = std::max(0.0, -2.0 * null_ll + 2.0 * alt_ll);
  r.p_value = special::chi_square1_survival(r.lr);
  r.exceptions = exceptions;
  r.n = n;
  r.p = p;
  return r;
}

/// Exceptions are returns strictly below the model-implied VaR quantile at
/// tail probability p.
inline std::size_t count_var_exceptions(std::span<const double> returns, double var_threshold) {
  return static_cast<std::size_t>(
      std::count_if(returns.begin(), returns.end(), [&](double r) { return r < var_threshold; }));
}

/// d_rob over an ascending grid Q. Weights shrink as q grows, so the per-q
/// values are nonincreasing and the maximum sits at min(Q); both facts are
/// checked.
inline GridRobustResult grid_robust_distance(const EmpiricalCDF& sample, const DistributionModel& model,
                                             const Exhaustion& h, std::span<const double> Q,
                                             std::size_t refinement = 8) {
  require(!Q.empty(), "grid_robust_distance: q grid is empty");
  GridRobustResult out;
  out.q_grid.assign(Q.begin(), Q.end());
  for (std::size_t i = 0; i < Q.size(); ++i) {
    require(Q[i] > 0.0, "grid_robust_distance: q values must be positive");
    require(i == 0 || Q[i] > Q[i - 1], "grid_robust_distance: q grid must be sorted ascending");
    out.per_q.push_back(weighted_distance_to_model(sample, model, WeightConfig(h, Q[i]), refinement).value);
    if (i > 0 && out.per_q[i] > out.per_q[i - 1])
      throw NumericalFailure("grid_robust_distance: per-q distances increased with q");
  }
  out.d_rob = out.per_q.front();
  out.argmax_q = Q.front();
  return out;
}

inline bool hybrid_accept(bool core_pass, bool tail_pass) noexcept { return core_pass && tail_pass; }

/// Core gate first (fixed eps on d_rob, or bootstrap of d_rob under the
/// model), tail gate second (Kupiec at the policy VaR level). Both are
/// always evaluated.
inline ValidationVerdict hybrid_validate(std::span<const double> returns, const DistributionModel& model,
                                         const ValidationPolicy& policy, unsigned threads = 1) {
  policy.validate();
  require(!returns.empty(), "hybrid_validate: returns are empty");
  const EmpiricalCDF ecdf(std::vector<double>(returns.begin(), returns.end()));
  ValidationVerdict v;
  v.core = grid_robust_distance(ecdf, model, policy.exhaustion, policy.q_grid, policy.refinement);
  if (policy.eps_core) {
    v.eps_core = policy.eps_core;
    v.core_pass = v.core.d_rob <= *policy.eps_core;
  } else {
    const auto null_dist = bootstrap_null(
        model, returns.size(), policy.B, policy.seed,
        [&](const EmpiricalCDF& f) {
          return grid_robust_distance(f, model, policy.exhaustion, policy.q_grid, policy.refinement).d_rob;
        },
        threads);
    v.bootstrap = bootstrap_outcome(v.core.d_rob, null_dist, *policy.alpha_core, policy.seed);
    v.core_pass = v.core.d_rob <= v.bootstrap->critical_value;
  }
  v.var_threshold = model.quantile(policy.var_level);
  v.kupiec = kupiec_pof(count_var_exceptions(returns, v.var_threshold), returns.size(), policy.var_level);
  v.tail_pass = v.kupiec.p_value >= policy.tail_test_level;
  v.accept = hybrid_accept(v.core_pass, v.tail_pass);
  return v;
}

/// Bootstrap tables on disk, one CSV per configuration key. The key should
/// carry everything the null distribution depends on: model parameters, n,
/// exhaustion, q (or grid), refinement, B and seed.
class BootstrapCache {
 public:
  explicit BootstrapCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path path_for(const std::string& key) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : key) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return dir_ / ("boot_" + std::string(hex) + ".csv");
  }

  std::optional<std::vector<double>> load(const std::string& key) const {
    std::ifstream in(path_for(key));
    if (!in) return std::nullopt;
    std::string line;
    if (!std::getline(in, line) || line != "# key=" + key) return std::nullopt;
    if (!std::getline(in, line) || line != "b,statistic") return std::nullopt;
    std::vector<double> values;
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) return std::nullopt;
      values.push_back(std::stod(line.substr(comma + 1)));
    }
    return values;
  }

  void store(const std::string& key, std::span<const double> values) const {
    std::filesystem::create_directories(dir_);
    std::ofstream out(path_for(key));
    if (!out) throw NumericalFailure("BootstrapCache: cannot write " + path_for(key).string());
    out << "# key=" << key << "\nb,statistic\n";
    for (std::size_t b = 0; b < values.size(); ++b) out << b << ',' << format_double(values[b]) << '\n';
  }

 private:
  std::filesystem::path dir_;
};

}  // namespace wkm
