#pragma once

// Analytic return models: Gaussian, location-scale Student-t and Pareto
// (type I). All are immutable after construction; sampling goes through an
// explicit RngStream so no generator state is shared.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <type_traits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wkm/error.hpp"
#include "wkm/quadrature.hpp"
#include "wkm/rng.hpp"
#include "wkm/special.hpp"

namespace wkm {

struct GaussianParams {
  double mu = 0.0;
  double sigma = 1.0;
};

struct StudentTParams {
  double nu = 3.0;
  double loc = 0.0;
  double scale = 1.0;
};

struct ParetoParams {
  double alpha = 3.0;
  double xm = 1.0;
};

enum class Family { gaussian, student_t, pareto };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::student_t: return "student_t";
    case Family::pareto: return "pareto";
  }
  return "?";
}

class DistributionModel {
 public:
  using Params = std::variant<GaussianParams, StudentTParams, ParetoParams>;

  static DistributionModel gaussian(double mu, double sigma) {
    require(std::isfinite(mu), "gaussian: mu must be finite");
    require(sigma > 0.0 && std::isfinite(sigma), "gaussian: sigma must be positive");
    return DistributionModel(GaussianParams{mu, sigma});
  }

  // nu > 2 keeps the variance finite.
  static DistributionModel student_t(double nu, double loc = 0.0, double scale = 1.0) {
    require(nu > 2.0 && std::isfinite(nu), "student_t: nu must exceed 2 (finite variance)");
    require(std::isfinite(loc), "student_t: loc must be finite");
    require(scale > 0.0 && std::isfinite(scale), "student_t: scale must be positive");
    return DistributionModel(StudentTParams{nu, loc, scale});
  }

  // alpha > 2 keeps the variance finite.
  static DistributionModel pareto(double alpha, double xm = 1.0) {
    require(alpha > 2.0 && std::isfinite(alpha), "pareto: alpha must exceed 2 (finite variance)");
    require(xm > 0.0 && std::isfinite(xm), "pareto: xm must be positive");
    return DistributionModel(ParetoParams{alpha, xm});
  }

  Family family() const noexcept { return static_cast<Family>(params_.index()); }
  const Params& params() const noexcept { return params_; }

  double cdf(double x) const {
    switch (family()) {
      case Family::gaussian: {
        const auto& g = std::get<GaussianParams>(params_);
        return special::normal_cdf((x - g.mu) / g.sigma);
      }
      case Family::student_t: {
        const auto& t = std::get<StudentTParams>(params_);
        return kernel_->cdf((x - t.loc) / t.scale);
      }
      case Family::pareto: {
        const auto& p = std::get<ParetoParams>(params_);
        if (x <= p.xm) return 0.0;
        return -std::expm1(-p.alpha * std::log(x / p.xm));
      }
    }
    return 0.0;
  }

  double pdf(double x) const {
    switch (family()) {
      case Family::gaussian: {
        const auto& g = std::get<GaussianParams>(params_);
        return special::normal_pdf((x - g.mu) / g.sigma) / g.sigma;
      }
      case Family::student_t: {
        const auto& t = std::get<StudentTParams>(params_);
        return kernel_->pdf((x - t.loc) / t.scale) / t.scale;
      }
      case Family::pareto: {
        const auto& p = std::get<ParetoParams>(params_);
        if (x < p.xm) return 0.0;
        return p.alpha / p.xm * std::exp(-(p.alpha + 1.0) * std::log(x / p.xm));
      }
    }
    return 0.0;
  }

  // -inf outside the support.
  double log_pdf(double x) const {
    switch (family()) {
      case Family::gaussian: {
        const auto& g = std::get<GaussianParams>(params_);
        const double z = (x - g.mu) / g.sigma;
        return -0.5 * z * z - std::log(g.sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
      }
      case Family::student_t: {
        const auto& t = std::get<StudentTParams>(params_);
        return kernel_->log_pdf((x - t.loc) / t.scale) - std::log(t.scale);
      }
      case Family::pareto: {
        const auto& p = std::get<ParetoParams>(params_);
        if (x < p.xm) return -std::numeric_limits<double>::infinity();
        return std::log(p.alpha / p.xm) - (p.alpha + 1.0) * std::log(x / p.xm);
      }
    }
    return 0.0;
  }

  double quantile(double prob) const {
    require(prob > 0.0 && prob < 1.0, "quantile: p must lie in (0,1)");
    switch (family()) {
      case Family::gaussian: {
        const auto& g = std::get<GaussianParams>(params_);
        return g.mu + g.sigma * special::normal_quantile(prob);
      }
      case Family::student_t: {
        const auto& t = std::get<StudentTParams>(params_);
        return t.loc + t.scale * kernel_->quantile(prob);
      }
      case Family::pareto: {
        const auto& p = std::get<ParetoParams>(params_);
        return p.xm * std::exp(-std::log1p(-prob) / p.alpha);
      }
    }
    return 0.0;
  }

  double mean() const noexcept {
    switch (family()) {
      case Family::gaussian: return std::get<GaussianParams>(params_).mu;
      case Family::student_t: return std::get<StudentTParams>(params_).loc;
      case Family::pareto: {
        const auto& p = std::get<ParetoParams>(params_);
        return p.alpha * p.xm / (p.alpha - 1.0);
      }
    }
    return 0.0;
  }

  double variance() const noexcept {
    switch (family()) {
      case Family::gaussian: {
        const double s = std::get<GaussianParams>(params_).sigma;
        return s * s;
      }
      case Family::student_t: {
        const auto& t = std::get<StudentTParams>(params_);
        return t.scale * t.scale * t.nu / (t.nu - 2.0);
      }
      case Family::pareto: {
        const auto& p = std::get<ParetoParams>(params_);
        return p.xm * p.xm * p.alpha / ((p.alpha - 1.0) * (p.alpha - 1.0) * (p.alpha - 2.0));
      }
    }
    return 0.0;
  }

  double sd() const noexcept { return std::sqrt(variance()); }

  double median() const { return quantile(0.5); }

  // sup of the density; the Lipschitz constant of the CDF.
  double max_density() const noexcept {
    switch (family()) {
      case Family::gaussian: return 1.0 / (std::get<GaussianParams>(params_).sigma * std::sqrt(2.0 * std::numbers::pi));
      case Family::student_t: return kernel_->max_pdf() / std::get<StudentTParams>(params_).scale;
      case Family::pareto: {
        const auto& p = std::get<ParetoParams>(params_);
        return p.alpha / p.xm;
      }
    }
    return 0.0;
  }

  // Index of regular variation of P(|X| > x); infinite for the Gaussian.
  double tail_index() const noexcept {
    switch (family()) {
      case Family::gaussian: return std::numeric_limits<double>::infinity();
      case Family::student_t: return std::get<StudentTParams>(params_).nu;
      case Family::pareto: return std::get<ParetoParams>(params_).alpha;
    }
    return 0.0;
  }

  // Lower end of the support (-inf unless Pareto).
  double support_lower() const noexcept {
    if (family() == Family::pareto) return std::get<ParetoParams>(params_).xm;
    return -std::numeric_limits<double>::infinity();
  }

  // Natural length scale, used by quadrature maps.
  double scale() const noexcept {
    switch (family()) {
      case Family::gaussian: return std::get<GaussianParams>(params_).sigma;
      case Family::student_t: return std::get<StudentTParams>(params_).scale;
      case Family::pareto: return std::get<ParetoParams>(params_).xm;
    }
    return 1.0;
  }

  // One inverse-transform draw. Student-t uses the tabulated quantile
  // (relative error < 1e-12 against quantile()).
  double draw(RngStream& rng) const {
    const double u = rng.uniform_open();
    if (family() == Family::student_t) {
      const auto& t = std::get<StudentTParams>(params_);
      return t.loc + t.scale * sampler_->get(*kernel_)(u);
    }
    return quantile(u);
  }

  std::string describe() const {
    std::string out = family_name(family());
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, GaussianParams>)
            out += "(mu=" + std::to_string(p.mu) + ",sigma=" + std::to_string(p.sigma) + ")";
          else if constexpr (std::is_same_v<T, StudentTParams>)
            out += "(nu=" + std::to_string(p.nu) + ",loc=" + std::to_string(p.loc) + ",scale=" + std::to_string(p.scale) + ")";
          else
            out += "(alpha=" + std::to_string(p.alpha) + ",xm=" + std::to_string(p.xm) + ")";
        },
        params_);
    return out;
  }

 private:
  explicit DistributionModel(Params p) : params_(p) {
    if (auto* t = std::get_if<StudentTParams>(&params_)) {
      kernel_.emplace(t->nu);
      sampler_ = std::make_shared<LazyTable>();
    }
  }

  Params params_;
  std::optional<special::StudentT> kernel_;
  // Built on the first draw and shared between copies.
  struct LazyTable {
    std::once_flag once;
    std::optional<special::StudentTQuantileTable> table;
    const special::StudentTQuantileTable& get(const special::StudentT& t) {
      std::call_once(once, [&] { table.emplace(t); });
      return *table;
    }
  };
  std::shared_ptr<LazyTable> sampler_;
};

inline double cdf(const DistributionModel& m, double x) { return m.cdf(x); }
inline double quantile(const DistributionModel& m, double p) { return m.quantile(p); }

/// n inverse-transform draws from substream `stream` of `seed`.
inline std::vector<double> sample(const DistributionModel& m, std::uint64_t seed, std::uint64_t stream,
                                  std::size_t n) {
  require(n >= 1, "sample: n must be at least 1");
  RngStream rng(seed, stream);
  std::vector<double> out(n);
  for (auto& x : out) x = m.draw(rng);
  return out;
}

struct MomentSummary {
  double mu = 0.0;
  double sigma2 = 0.0;
  double delta = 0.0;
  double abs_moment_2_delta = 0.0;  // E|X - mu|^{2+delta}, +inf when it diverges
  bool mean_finite = true;
  bool variance_finite = true;
  bool abs_moment_finite = true;
  bool third_moment_finite = true;
};

// Finite iff the order is strictly below the tail index.
inline bool moment_exists(const DistributionModel& m, double order) { return order < m.tail_index(); }

namespace detail {

inline quad::Result centered_abs_moment(const DistributionModel& m, double order, double lo, double hi) {
  const double mu = m.mean();
  // In log space: the density underflows long before |x - mu|^order pdf
  // does when the tail is close to the moment boundary.
  auto f = [&](double x) {
    const double d = std::fabs(x - mu);
    if (d == 0.0) return 0.0;
    return std::exp(order * std::log(d) + m.log_pdf(x));
  };
  const double breaks[] = {mu, m.support_lower()};
  quad::Options opt;
  opt.rel_tol = 1e-11;
  opt.scale = m.scale();
  return quad::integrate_pieces(f, std::max(lo, m.support_lower()), hi, breaks, opt);
}

}  // namespace detail

/// Closed-form mean and variance plus E|X - mu|^{2+delta} by adaptive
/// quadrature.
inline MomentSummary analytic_moments(const DistributionModel& m, double delta) {
  require(delta > 0.0 && delta <= 1.0, "analytic_moments: delta must lie in (0,1]");
  MomentSummary s;
  s.mu = m.mean();
  s.sigma2 = m.variance();
  s.delta = delta;
  s.third_moment_finite = moment_exists(m, 3.0);
  s.abs_moment_finite = moment_exists(m, 2.0 + delta);
  if (!s.abs_moment_finite) {
    s.abs_moment_2_delta = std::numeric_limits<double>::infinity();
    return s;
  }
  const auto r = detail::centered_abs_moment(m, 2.0 + delta, -std::numeric_limits<double>::infinity(),
                                             std::numeric_limits<double>::infinity());
  if (!r.converged && r.error > 1e-8 * std::fabs(r.value))
    throw NumericalFailure("analytic_moments: quadrature did not reach 1e-8 relative accuracy");
  s.abs_moment_2_delta = r.value;
  return s;
}

struct TailIndexInfo {
  double alpha = 0.0;  // tail index
  double eta = 0.0;    // alpha - (2 + delta)
  double K = std::numeric_limits<double>::quiet_NaN();  // remainder constant, when fitted
};

inline TailIndexInfo tail_index_info(const DistributionModel& m, double delta) {
  require(delta > 0.0 && delta <= 1.0, "tail_index_info: delta must lie in (0,1]");
  TailIndexInfo info;
  info.alpha = m.tail_index();
  info.eta = info.alpha - (2.0 + delta);
  return info;
}

}  // namespace wkm
