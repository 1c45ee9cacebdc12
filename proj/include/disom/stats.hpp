#pragma once

// Censored runtime statistics, ECDF comparison and scaling fits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "disom/errors.hpp"

namespace disom {

/// One trial's runtime. Censored runs count as +infinity.
struct Observation {
  std::uint64_t evaluations = 0;
  bool censored = false;

  friend bool operator<(const Observation& a, const Observation& b) {
    if (a.censored != b.censored) return !a.censored;
    return a.evaluations < b.evaluations;
  }
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct RuntimeSummary {
  std::size_t trials = 0;
  std::size_t censored = 0;
  double censored_fraction = 0.0;
  std::vector<Observation> sorted;
  /// Present only when fewer than half the trials are censored.
  std::optional<double> median;
  /// r -> r-Monte-Carlo runtime; a value is present only when the censored
  /// fraction is at most r.
  std::map<double, std::optional<std::uint64_t>> monte_carlo;
};

/// Smallest t with (fraction finished by t) >= 1 - r, or nullopt when the
/// censored fraction exceeds r.
inline std::optional<std::uint64_t> monte_carlo_runtime(std::span<const Observation> sorted, double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw DomainError("r must lie in [0, 1]");
  const auto n = sorted.size();
  std::size_t censored = 0;
  for (const auto& o : sorted) censored += o.censored ? 1 : 0;
  if (static_cast<double>(censored) > r * static_cast<double>(n) + 1e-9) return std::nullopt;
  const auto needed = static_cast<std::size_t>(std::ceil((1.0 - r) * static_cast<double>(n) - 1e-9));
  if (needed == 0) return 0;
  return sorted[needed - 1].evaluations;
}

inline RuntimeSummary summarize(std::span<const Observation> results, std::span<const double> r_values) {
  if (results.empty()) throw DomainError("summarize: no results");
  RuntimeSummary s;
  s.sorted.assign(results.begin(), results.end());
  std::sort(s.sorted.begin(), s.sorted.end());
  s.trials = s.sorted.size();
  for (const auto& o : s.sorted) s.censored += o.censored ? 1 : 0;
  s.censored_fraction = static_cast<double>(s.censored) / static_cast<double>(s.trials);
  if (2 * s.censored < s.trials) {
    const auto n = s.trials;
    const double lo = static_cast<double>(s.sorted[(n - 1) / 2].evaluations);
    const double hi = static_cast<double>(s.sorted[n / 2].evaluations);
    s.median = 0.5 * (lo + hi);
  }
  for (double r : r_values) s.monte_carlo[r] = monte_carlo_runtime(s.sorted, r);
  return s;
}

// ---------------------------------------------------------------------------
// ECDF comparison
// ---------------------------------------------------------------------------

/// Two-sample DKW half-width at confidence 1 - alpha.
inline double dkw_band(std::size_t m, std::size_t n, double confidence) {
  if (m == 0 || n == 0) throw DomainError("dkw_band: empty sample");
  const double alpha = 1.0 - confidence;
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);
  return std::sqrt(std::log(2.0 / alpha) / 2.0 * (md + nd) / (md * nd));
}

struct EcdfExcess {
  double max_excess = 0.0;  ///< sup_t (F_a(t) - F_b(t)), never below 0
  std::uint64_t at = 0;
};

/// Largest amount by which the ECDF of `a` exceeds that of `b`. Censored
/// observations never count as finished.
inline EcdfExcess max_ecdf_excess(std::vector<Observation> a, std::vector<Observation> b) {
  if (a.empty() || b.empty()) throw DomainError("max_ecdf_excess: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::uint64_t> grid;
  for (const auto& o : a) {
    if (!o.censored) grid.push_back(o.evaluations);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  EcdfExcess out;
  // The excess can only peak at jump points of F_a.
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (auto t : grid) {
    while (ia < a.size() && !a[ia].censored && a[ia].evaluations <= t) ++ia;
    while (ib < b.size() && !b[ib].censored && b[ib].evaluations <= t) ++ib;
    const double diff = static_cast<double>(ia) / a.size() - static_cast<double>(ib) / b.size();
    if (diff > out.max_excess) {
      out.max_excess = diff;
      out.at = t;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scaling fits
// ---------------------------------------------------------------------------

enum class ScalingModel { n_log_n, power_law };

struct ScalingPoint {
  double x = 0.0;
  double y = 0.0;
};

struct ScalingFit {
  ScalingModel model = ScalingModel::power_law;
  std::vector<ScalingPoint> points;     ///< points used
  std::vector<std::size_t> excluded;    ///< input indices dropped as non-finite
  double constant = 0.0;                ///< C in C * n ln n or C * x^b
  double exponent = 1.0;                ///< b (fixed to 1 for n ln n)
  double intercept = 0.0;               ///< ln C
  std::vector<double> residuals;        ///< log-space residual per used point
  std::vector<double> ratios;           ///< y / (x ln x), n ln n model only
  double ratio_spread = 1.0;            ///< max / min ratio, n ln n model only
};

inline ScalingFit fit_scaling(std::span<const ScalingPoint> series, ScalingModel model) {
  ScalingFit fit;
  fit.model = model;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& pt = series[i];
    const bool ok = std::isfinite(pt.x) && std::isfinite(pt.y) && pt.x > 0 && pt.y > 0 &&
                    (model == ScalingModel::power_law || pt.x > 1);
    if (ok) {
      fit.points.push_back(pt);
    } else {
      fit.excluded.push_back(i);
    }
  }
  if (fit.points.size() < 3) throw DomainError("fit_scaling: need at least 3 finite points");

  const double m = static_cast<double>(fit.points.size());
  if (model == ScalingModel::n_log_n) {
    double sum = 0;
    for (const auto& pt : fit.points) {
      const double ratio = pt.y / (pt.x * std::log(pt.x));
      fit.ratios.push_back(ratio);
      sum += std::log(ratio);
    }
    fit.intercept = sum / m;
    fit.constant = std::exp(fit.intercept);
    fit.exponent = 1.0;
    for (double r : fit.ratios) fit.residuals.push_back(std::log(r) - fit.intercept);
    const auto [lo, hi] = std::minmax_element(fit.ratios.begin(), fit.ratios.end());
    fit.ratio_spread = *hi / *lo;
    return fit;
  }

  double sx = 0, sy = 0;
  for (const auto& pt : fit.points) {
    sx += std::log(pt.x);
    sy += std::log(pt.y);
  }
  const double mx = sx / m;
  const double my = sy / m;
  double sxx = 0, sxy = 0;
  for (const auto& pt : fit.points) {
    const double dx = std::log(pt.x) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(pt.y) - my);
  }
  if (sxx <= 0) throw DomainError("fit_scaling: x values must not all coincide");
  fit.exponent = sxy / sxx;
  fit.intercept = my - fit.exponent * mx;
  fit.constant = std::exp(fit.intercept);
  for (const auto& pt : fit.points) {
    fit.residuals.push_back(std::log(pt.y) - (fit.intercept + fit.exponent * std::log(pt.x)));
  }
  return fit;
}

}  // namespace disom
