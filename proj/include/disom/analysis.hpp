#pragma once

// Cross-arm analyses over trial records: scaling series, the plus/comma
// runtime ratio sweep and the ECDF domination check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "disom/errors.hpp"
#include "disom/experiment.hpp"
#include "disom/regimes.hpp"
#include "disom/stats.hpp"

namespace disom {

enum class ScalingAxis { n, inverse_p };

/// One point per (n, p) group of the named arm: x = n or 1/p, y = median
/// evaluations (NaN when the median is unavailable).
inline std::vector<ScalingPoint> scaling_series(const std::vector<TrialRecord>& records, const std::string& arm,
                                                ScalingAxis axis) {
  std::vector<ScalingPoint> out;
  for (const auto& [key, obs] : group_by_arm(records)) {
    if (key.arm != arm) continue;
    const auto s = summarize(obs, {});
    const double x = axis == ScalingAxis::n ? static_cast<double>(key.n) : 1.0 / key.p;
    out.push_back({x, s.median ? *s.median : std::numeric_limits<double>::quiet_NaN()});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
  return out;
}

// ---------------------------------------------------------------------------
// Plus/comma ratio
// ---------------------------------------------------------------------------

struct GapPoint {
  int n = 0;
  double p = 0.0;
  int lambda = 0;
  int k_star = 0;
  std::size_t trials_comma = 0;
  std::size_t trials_plus = 0;
  double censored_comma = 0.0;
  double censored_plus = 0.0;
  std::optional<double> median_comma;
  std::optional<double> median_plus;
  double ratio = std::numeric_limits<double>::quiet_NaN();  ///< +inf when the plus median is unavailable
  bool infinite = false;
  bool unreliable = false;
};

struct GapReport {
  std::vector<GapPoint> points;  ///< ordered by increasing 1/p
  bool monotone = false;         ///< ratio strictly increasing in 1/p
  std::optional<ScalingFit> fit; ///< power law of ratio against 1/p
  double censor_threshold = 0.1;
};

/// Groups records by (n, p); the comma and plus arms are identified by mode.
inline GapReport analyze_gap(const std::vector<TrialRecord>& records, double censor_threshold = 0.1) {
  struct Bucket {
    std::vector<Observation> comma, plus;
    int lambda = 0;
    int k_star = 0;
  };
  std::map<std::pair<int, double>, Bucket> buckets;
  for (const auto& r : records) {
    auto& b = buckets[{r.n, r.p}];
    (r.mode == "plus" ? b.plus : b.comma).push_back(r.observation());
    b.lambda = r.lambda;
    b.k_star = r.k_star;
  }
  GapReport rep;
  rep.censor_threshold = censor_threshold;
  for (const auto& [key, b] : buckets) {
    if (b.comma.empty() || b.plus.empty()) continue;
    GapPoint g;
    g.n = key.first;
    g.p = key.second;
    g.lambda = b.lambda;
    g.k_star = b.k_star;
    const auto sc = summarize(b.comma, {});
    const auto sp = summarize(b.plus, {});
    g.trials_comma = sc.trials;
    g.trials_plus = sp.trials;
    g.censored_comma = sc.censored_fraction;
    g.censored_plus = sp.censored_fraction;
    g.median_comma = sc.median;
    g.median_plus = sp.median;
    g.unreliable = sc.censored_fraction > censor_threshold || sp.censored_fraction > censor_threshold;
    if (!sp.median) {
      g.infinite = true;
      g.ratio = std::numeric_limits<double>::infinity();
    } else if (sc.median) {
      g.ratio = *sp.median / *sc.median;
    }
    rep.points.push_back(g);
  }
  std::sort(rep.points.begin(), rep.points.end(), [](const auto& a, const auto& b) {
    return a.n != b.n ? a.n < b.n : a.p > b.p;
  });

  rep.monotone = !rep.points.empty();
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    if (std::isnan(rep.points[i].ratio)) rep.monotone = false;
    if (i > 0 && !(rep.points[i].ratio > rep.points[i - 1].ratio)) rep.monotone = false;
  }
  std::vector<ScalingPoint> series;
  for (const auto& g : rep.points) series.push_back({1.0 / g.p, g.ratio});
  std::size_t finite = 0;
  for (const auto& s : series) finite += std::isfinite(s.y) ? 1 : 0;
  if (finite >= 3) rep.fit = fit_scaling(series, ScalingModel::power_law);
  return rep;
}

struct GapSweepSpec {
  int n = 4096;
  Distortion d = Distortion::integer(2);
  std::vector<double> ps;
  std::size_t trials = 50;
  double q_factor = 10.0;
  double epsilon = 0.05;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  std::string out_dir;  ///< one JSON-lines file per p when set
  std::optional<std::uint64_t> budget_comma;
  std::optional<std::uint64_t> budget_plus;
};

struct GapSweepResult {
  std::vector<RegimeParams> regimes;
  std::vector<AssumptionReport> checks;
  std::vector<TrialRecord> records;
  GapReport report;
};

inline ExperimentSpec gap_experiment(const GapSweepSpec& sweep, const RegimeParams& r) {
  ExperimentSpec spec;
  std::ostringstream id;
  id << "gap_n" << sweep.n << "_p" << r.p;
  spec.id = id.str();
  spec.oracle = OracleKind::disom_frozen;
  spec.n = r.n;
  spec.lambda = r.lambda;
  spec.p = r.p;
  spec.d = r.d;
  spec.k_star = r.k_star;
  ArmSpec comma{"comma", Selection::comma, TiePolicy::uniform_random, std::nullopt, sweep.budget_comma};
  ArmSpec plus{"plus", Selection::plus, TiePolicy::uniform_random, std::nullopt, sweep.budget_plus};
  spec.arms = {comma, plus};
  spec.trials = sweep.trials;
  spec.seed = sweep.seed;
  spec.workers = sweep.workers;
  if (!sweep.out_dir.empty()) spec.out = (std::filesystem::path(sweep.out_dir) / (spec.id + ".jsonl")).string();
  return spec;
}

/// Runs both arms at every p with lambda and k* from gap_regime.
inline GapSweepResult run_gap_sweep(const GapSweepSpec& sweep, double censor_threshold = 0.1) {
  if (sweep.ps.empty()) throw DomainError("gap sweep: no probabilities given");
  GapSweepResult out;
  for (double p : sweep.ps) {
    const auto r = gap_regime(sweep.n, p, sweep.d, sweep.q_factor, sweep.epsilon);
    out.regimes.push_back(r);
    out.checks.push_back(check_assumption1(r));
    auto recs = run_batch(gap_experiment(sweep, r));
    out.records.insert(out.records.end(), recs.begin(), recs.end());
  }
  out.report = analyze_gap(out.records, censor_threshold);
  return out;
}

// ---------------------------------------------------------------------------
// Stochastic domination of (1+lambda) over (1+1)
// ---------------------------------------------------------------------------

struct DominationSpec {
  int n = 64;
  int lambda = 4;
  std::size_t trials = 2000;
  std::optional<int> start_distance;  ///< defaults to n/2 zero-bits
  std::uint64_t seed = 0;
  unsigned workers = 0;
  double confidence = 0.999;
  std::string out;
};

struct DominationReport {
  std::size_t trials_one = 0;
  std::size_t trials_plus = 0;
  std::size_t censored_one = 0;
  std::size_t censored_plus = 0;
  double band = 0.0;
  double max_excess = 0.0;  ///< sup_t (ECDF_plus(t) - ECDF_one(t))
  std::uint64_t at = 0;
  bool violation = false;   ///< max_excess > band
};

inline DominationReport compare_ecdfs(const std::vector<Observation>& one, const std::vector<Observation>& plus,
                                      double confidence) {
  DominationReport rep;
  rep.trials_one = one.size();
  rep.trials_plus = plus.size();
  for (const auto& o : one) rep.censored_one += o.censored ? 1 : 0;
  for (const auto& o : plus) rep.censored_plus += o.censored ? 1 : 0;
  rep.band = dkw_band(one.size(), plus.size(), confidence);
  const auto ex = max_ecdf_excess(plus, one);
  rep.max_excess = ex.max_excess;
  rep.at = ex.at;
  rep.violation = rep.max_excess > rep.band;
  return rep;
}

inline std::vector<Observation> arm_observations(const std::vector<TrialRecord>& records, const std::string& arm) {
  std::vector<Observation> out;
  for (const auto& r : records) {
    if (r.arm == arm) out.push_back(r.observation());
  }
  return out;
}

inline ExperimentSpec domination_experiment(const DominationSpec& d) {
  ExperimentSpec spec;
  spec.id = "domination_n" + std::to_string(d.n) + "_l" + std::to_string(d.lambda);
  spec.oracle = OracleKind::onemax;
  spec.n = d.n;
  spec.lambda = d.lambda;
  spec.p = 0.0;
  spec.k_star = 0;
  spec.arms = {ArmSpec{"one", Selection::plus, TiePolicy::uniform_random, 1, std::nullopt},
               ArmSpec{"plus", Selection::plus, TiePolicy::uniform_random, d.lambda, std::nullopt}};
  spec.trials = d.trials;
  spec.seed = d.seed;
  spec.workers = d.workers;
  spec.start = "distance:" + std::to_string(d.start_distance.value_or(d.n / 2));
  spec.out = d.out;
  return spec;
}

/// (1+1) EA versus (1+lambda) EA on OneMax from the same start distance.
inline DominationReport domination_test(const DominationSpec& d) {
  if (d.trials < 500) throw DomainError("domination test needs at least 500 trials per arm");
  const auto records = run_batch(domination_experiment(d));
  return compare_ecdfs(arm_observations(records, "one"), arm_observations(records, "plus"), d.confidence);
}

}  // namespace disom
