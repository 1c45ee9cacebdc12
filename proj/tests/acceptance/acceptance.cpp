// Acceptance checks. Each criterion prints one PASS or FAIL line with the
// measured quantities; the exit status is non-zero when any selected
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>

#include "../oracles/brute_force.hpp"
#include "disom/analysis.hpp"
#include "disom/disom.hpp"

using namespace disom;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

EAConfig ea(Selection mode, int n, int lambda, std::uint64_t budget, StartSpec start = StartSpec::uniform()) {
  EAConfig c;
  c.mode = mode;
  c.lambda = lambda;
  c.mutation = MutationParams::standard(n);
  c.budget = budget;
  c.start = std::move(start);
  return c;
}

// 1. Z distribution
Verdict z_distribution_check() {
  const auto dist = z_distribution();
  long double total = 0;
  long double p_minus_two = -1;
  for (const auto& [z, p] : dist) {
    total += p;
    if (z == -2) p_minus_two = p;
  }
  const long double sum_err = std::abs(total - 1.0L);
  const bool exact = p_minus_two == 3.0L / 64;
  Rng rng(SeedTree(1).child("acceptance.z").seed());
  const int m = 1000000;
  long double s = 0;
  for (int i = 0; i < m; ++i) s += z_sample(rng);
  const double mean = static_cast<double>(s / m);
  const bool pass = sum_err <= std::ldexp(1.0L, -60) && exact && std::abs(mean - 5.0 / 12) <= 0.005;
  return {pass, "sum_error=" + num(static_cast<double>(sum_err)) + " P(Z=-2)=" + num(static_cast<double>(p_minus_two), 17) +
                    " mean=" + num(mean) + " (target 0.416667 +- 0.005)"};
}

// 2. No-clone probability bracket and clone frequency
Verdict no_clone_check() {
  std::size_t cells = 0, outside = 0;
  for (double n = 2; n <= 1e6; n *= 1.5) {
    for (int l = 1; l <= 64; ++l) {
      const auto v = no_clone_probability_exact(static_cast<int>(n), l);
      ++cells;
      if (v.value < v.lower * (1 - 1e-15L) || v.value > v.upper * (1 + 1e-15L)) ++outside;
    }
  }
  const int n = 100, lambda = 8, gens = 100000;
  auto o = Oracle::onemax(n);
  const auto [r, trace] = run_trajectory(ea(Selection::comma, n, lambda, std::uint64_t(gens + 1) * lambda + 1), o,
                                         SeedTree(2).child("acceptance.clone"));
  std::size_t clones = 0;
  for (int i = 0; i < gens; ++i) clones += trace[static_cast<std::size_t>(i)].clone_present ? 1 : 0;
  const double freq = static_cast<double>(clones) / gens;
  const double exact = 1.0 - static_cast<double>(no_clone_probability_exact(n, lambda).value);
  const double sigma = std::sqrt(exact * (1 - exact) / gens);
  const bool pass = outside == 0 && std::abs(freq - exact) <= 3 * sigma;
  return {pass, "grid_cells=" + std::to_string(cells) + " outside_bracket=" + std::to_string(outside) +
                    " clone_freq=" + num(freq) + " exact=" + num(exact) + " z=" + num((freq - exact) / sigma, 3)};
}

// 3. E[Y*]
Verdict ystar_check() {
  const double hand = static_cast<double>(ystar_expectation_exact({2, 4, 2}).value);
  const bool hand_ok = std::abs(hand - 103.0 / 128) <= 1e-15;
  std::size_t cells = 0, below = 0;
  for (int n : {16, 64, 256, 1024, 4096}) {
    for (int l = 1; l <= 64; ++l) {
      for (int k = 1; k <= n; ++k) {
        const auto e = ystar_expectation_exact({k, n, l});
        ++cells;
        if (e.value < e.lower_bound * (1 - 1e-15L)) ++below;
      }
    }
  }
  Rng pick(SeedTree(3).child("acceptance.ystar.cells").seed());
  int mc_fail = 0;
  double worst = 0;
  for (int c = 0; c < 20; ++c) {
    const int n = 16 << (2 * uniform_below(pick, 4));
    const YStarSpec spec{1 + static_cast<int>(uniform_below(pick, n)), n, 1 + static_cast<int>(uniform_below(pick, 64))};
    Rng rng(SeedTree(3).child("acceptance.ystar.mc", c).seed());
    const auto [mean, se] = ystar_monte_carlo(spec, 200000, rng);
    const double exact = static_cast<double>(ystar_expectation_exact(spec).value);
    const double z = se > 0 ? std::abs(mean - exact) / se : (mean == exact ? 0.0 : INFINITY);
    worst = std::max(worst, z);
    if (z > 3) ++mc_fail;
  }
  return {hand_ok && below == 0 && mc_fail == 0,
          "E[Y*](2,4,2)=" + num(hand, 17) + " grid_cells=" + std::to_string(cells) +
              " below_bound=" + std::to_string(below) + " mc_cells_over_3sigma=" + std::to_string(mc_fail) +
              " worst_z=" + num(worst, 3)};
}

// 4. Transition bounds
Verdict transition_check() {
  const int n = 100, lambda = 8, samples = 100000;
  GenerationKernel kernel(ea(Selection::comma, n, lambda, 1), 0.0, Distortion::integer(1));
  Rng rng(SeedTree(4).child("acceptance.transition").seed());
  bool pass = true;
  std::ostringstream os;
  for (int k : {5, 10, 50}) {
    int exactly_one = 0, at_least_one = 0, worse = 0;
    for (int s = 0; s < samples; ++s) {
      const auto next = kernel.sample({k, false}, rng);
      exactly_one += next.k == k - 1 ? 1 : 0;
      at_least_one += next.k < k ? 1 : 0;
      worse += next.k > k ? 1 : 0;
    }
    const auto b = transition_bounds(k, n, lambda);
    const double p1 = static_cast<double>(exactly_one) / samples;
    const double pge = static_cast<double>(at_least_one) / samples;
    const double pn = static_cast<double>(worse) / samples;
    const double s1 = std::sqrt(p1 * (1 - p1) / samples);
    const double sn = std::sqrt(std::max(pn * (1 - pn), 1.0 / samples) / samples);
    const bool ok1 = p1 >= static_cast<double>(b.p1_lower) - 3 * s1;
    const bool okn = pn <= static_cast<double>(b.pneg_upper) + 3 * sn;
    pass = pass && ok1 && okn;
    os << " k=" << k << ":P(=1)=" << num(p1, 4) << (ok1 ? ">=" : "<") << num(static_cast<double>(b.p1_lower), 4)
       << ",P(>=1)=" << num(pge, 4) << ",P(<0)=" << num(pn, 4) << (okn ? "<=" : ">") << "q="
       << num(static_cast<double>(b.pneg_upper), 4);
  }
  return {pass, os.str().substr(1)};
}

// 5. Brute-force equivalence
Verdict brute_force_check() {
  double worst_tv = 0;
  std::size_t cells = 0;
  const int samples = 1000000;
  for (int n : {5, 10}) {
    for (int lambda = 1; lambda <= 3; ++lambda) {
      for (int k : {1, n / 2, n}) {
        const auto law = oracle::comma_step_law(n, k, lambda, 1.0 / n);
        std::vector<double> freq(static_cast<std::size_t>(n) + 1, 0.0);
        const SeedTree base = SeedTree(5).child("acceptance.step").child("n", n).child("l", lambda).child("k", k);
        for (int s = 0; s < samples; ++s) {
          auto o = Oracle::onemax(n);
          EvolutionRun run(ea(Selection::comma, n, lambda, 1000, StartSpec::fixed(canonical_point(n, k))), o,
                           base.child("s", static_cast<std::uint64_t>(s)));
          run.step();
          freq[run.parent().zeros()] += 1.0 / samples;
        }
        double tv = 0;
        for (int j = 0; j <= n; ++j) tv += 0.5 * std::abs(freq[j] - law[j]);
        worst_tv = std::max(worst_tv, tv);
        ++cells;
      }
    }
  }
  std::ostringstream os;
  bool runtime_ok = true;
  for (int n : {4, 8, 12}) {
    const double exact = oracle::expected_runtime_onemax(n, 1, oracle::Mode::plus, 1.0 / n);
    const int trials = 100000;
    double sum = 0;
    for (int t = 0; t < trials; ++t) {
      auto o = Oracle::onemax(n);
      o.set_target(0);
      sum += static_cast<double>(
          run_ea(ea(Selection::plus, n, 1, 100000000), o, SeedTree(5).child("acceptance.runtime", n).child("t", t))
              .evaluations);
    }
    const double rel = std::abs(sum / trials - exact) / exact;
    runtime_ok = runtime_ok && rel <= 0.02;
    os << " n=" << n << ":mean=" << num(sum / trials) << ",chain=" << num(exact) << ",rel_err=" << num(rel, 3);
  }
  return {worst_tv < 0.01 && runtime_ok,
          "step_cells=" + std::to_string(cells) + " worst_tv=" + num(worst_tv, 3) + os.str()};
}

// 6. Single-planted dichotomy
Verdict planted_check() {
  const int n = 30, lambda = 11, trials = 100;
  const auto budget = static_cast<std::uint64_t>(std::ceil(100.0 * n * std::log(static_cast<double>(n))));
  const Distortion d(2 * n - 1, 2);
  int comma_ok = 0, plus_censored = 0;
  for (int t = 0; t < trials; ++t) {
    for (auto mode : {Selection::comma, Selection::plus}) {
      auto o = Oracle::single_planted(n, d);
      o.set_target(0);
      const auto r = run_ea(ea(mode, n, lambda, budget, StartSpec::fixed(SearchPoint::zeros(n))), o,
                            SeedTree(6).child("acceptance.planted").child(std::string(to_string(mode))).child("t", t));
      if (mode == Selection::comma) comma_ok += r.censored ? 0 : 1;
      if (mode == Selection::plus) plus_censored += r.censored ? 1 : 0;
    }
  }
  return {comma_ok >= 95 && plus_censored == trials,
          "budget=" + std::to_string(budget) + " comma_success=" + std::to_string(comma_ok) + "/100" +
              " plus_censored=" + std::to_string(plus_censored) + "/100"};
}

// 7. Comma scaling
Verdict scaling_check() {
  std::vector<TrialRecord> all;
  for (int n : {1 << 10, 1 << 12, 1 << 14, 1 << 16}) {
    const double p = std::pow(static_cast<double>(n), -0.75);
    const auto rec = quasi_linear_recipe(0.5, n, p);
    ExperimentSpec spec;
    spec.id = "scaling_n" + std::to_string(n);
    spec.n = n;
    spec.p = p;
    spec.lambda = rec.params.lambda;
    spec.k_star = rec.params.k_star;
    spec.d = rec.params.d;
    spec.arms = {parse_arm("comma")};
    spec.trials = 50;
    spec.seed = 7;
    auto recs = run_batch(spec);
    all.insert(all.end(), recs.begin(), recs.end());
  }
  std::size_t censored = 0;
  for (const auto& r : all) censored += r.censored ? 1 : 0;
  const auto series = scaling_series(all, "comma", ScalingAxis::n);
  const auto fit = fit_scaling(series, ScalingModel::n_log_n);
  std::ostringstream os;
  os << "spread=" << num(fit.ratio_spread, 4) << " censored=" << censored << "/" << all.size() << " ratios=";
  for (std::size_t i = 0; i < fit.ratios.size(); ++i) os << (i ? "," : "") << num(fit.ratios[i], 4);
  os << " medians=";
  for (std::size_t i = 0; i < series.size(); ++i) os << (i ? "," : "") << num(series[i].y, 8);
  return {fit.ratio_spread <= 3 && censored == 0 && fit.excluded.empty(), os.str()};
}

// 8. Plus/comma gap
Verdict gap_check() {
  GapSweepSpec sweep;
  sweep.n = 4096;
  sweep.d = Distortion::integer(2);
  sweep.ps = {0.02, 0.01, 0.005, 0.0025};
  sweep.trials = 50;
  sweep.seed = 8;
  const auto res = run_gap_sweep(sweep);
  std::ostringstream os;
  for (const auto& g : res.report.points) {
    os << "p=" << num(g.p) << ":lambda=" << g.lambda << ",k*=" << g.k_star << ",ratio=" << num(g.ratio, 4)
       << ",cens=" << num(g.censored_comma, 3) << "/" << num(g.censored_plus, 3) << " ";
  }
  const bool has_fit = res.report.fit.has_value();
  const double slope = has_fit ? res.report.fit->exponent : NAN;
  os << "monotone=" << (res.report.monotone ? "yes" : "no") << " slope=" << num(slope, 4);
  return {res.report.monotone && has_fit && slope >= 0.5 && slope <= 1.5, os.str()};
}

// 9. Stochastic domination
Verdict domination_check() {
  DominationSpec d;
  d.n = 64;
  d.lambda = 4;
  d.trials = 2000;
  d.seed = 9;
  d.confidence = 0.999;
  const auto rep = domination_test(d);
  return {!rep.violation && rep.censored_one == 0 && rep.censored_plus == 0,
          "max_excess=" + num(rep.max_excess, 4) + " band=" + num(rep.band, 4) + " at_t=" + std::to_string(rep.at) +
              " censored=" + std::to_string(rep.censored_one) + "/" + std::to_string(rep.censored_plus)};
}

// 10. Frozen-noise contract
Verdict noise_contract_check() {
  bool pass = true;
  std::ostringstream os;

  // determinism
  {
    auto o = Oracle::frozen(128, Distortion::integer(3), 0.5, 10);
    Rng rng(SeedTree(10).child("acceptance.det").seed());
    std::vector<SearchPoint> pts;
    std::vector<bool> first;
    for (int i = 0; i < 1000; ++i) {
      pts.push_back(SearchPoint::uniform(128, rng));
      first.push_back(o.evaluate(pts.back()).distorted);
    }
    std::size_t mismatches = 0;
    for (int q = 0; q < 100000; ++q) {
      const auto i = static_cast<std::size_t>(q % 1000);
      mismatches += o.evaluate(pts[i]).distorted != first[i] ? 1 : 0;
    }
    pass = pass && mismatches == 0;
    os << "requery_mismatches=" << mismatches;
  }
  // rate
  {
    const double p = 0.01;
    const int m = 1000000;
    Rng rng(SeedTree(10).child("acceptance.rate").seed());
    int hits = 0;
    for (int i = 0; i < m; ++i) hits += distortion_decision(2024, SearchPoint::uniform(128, rng), p) ? 1 : 0;
    const double rate = static_cast<double>(hits) / m;
    const double z = (rate - p) / std::sqrt(p * (1 - p) / m);
    pass = pass && std::abs(z) <= 3;
    os << " rate=" << num(rate) << " z=" << num(z, 3);
  }
  // memo cross-check
  {
    Rng rng(SeedTree(10).child("acceptance.memo").seed());
    std::vector<SearchPoint> pts;
    for (int i = 0; i < 100000; ++i) pts.push_back(SearchPoint::uniform(96, rng));
    for (int i = 0; i < 20000; ++i) pts.push_back(pts[static_cast<std::size_t>(i) * 3]);
    const auto rep = memo_crosscheck(FrozenNoise{10, 0.3}, pts);
    pass = pass && rep.disagreements == 0;
    os << " memo_disagreements=" << rep.disagreements << " memo_hits=" << rep.cache_hits;
  }
  // dynamic clean set over full traces
  {
    std::size_t violations = 0, runs = 0;
    for (int t = 0; t < 20; ++t) {
      auto o = Oracle::dynamic(64, Distortion::integer(3), 0.3, SeedTree(10).child("acceptance.dyn", t).seed());
      o.set_target(0);
      TraceLog trace(TraceMode::all);
      o.attach_trace(&trace);
      run_ea(ea(Selection::comma, 64, 6, 50000), o, SeedTree(10).child("acceptance.dyn.alg", t));
      std::unordered_set<Digest, DigestHash> clean;
      for (const auto& e : trace.entries()) {
        if (clean.contains(e.digest) && e.distorted) ++violations;
        if (!e.distorted) clean.insert(e.digest);
      }
      ++runs;
    }
    pass = pass && violations == 0;
    os << " dynamic_runs=" << runs << " clean_set_violations=" << violations;
  }
  // resample audit under recipe parameters (diagnostic)
  {
    const int n = 1 << 12;
    const double p = std::pow(static_cast<double>(n), -0.75);
    const auto rec = quasi_linear_recipe(0.5, n, p);
    const int runs = 50;
    int resampling = 0;
    std::size_t total_resamples = 0;
    for (int t = 0; t < runs; ++t) {
      auto o = Oracle::frozen(n, rec.params.d, p, SeedTree(10).child("acceptance.audit.noise", t).seed());
      o.set_target(rec.params.k_star);
      TraceLog trace;
      o.attach_trace(&trace);
      run_ea(ea(Selection::comma, n, rec.params.lambda, default_budget(n, p, Selection::comma)), o,
             SeedTree(10).child("acceptance.audit.alg", t));
      const auto a = resample_audit(trace);
      resampling += a.distorted_resamples > 0 ? 1 : 0;
      total_resamples += a.distorted_resamples;
    }
    os << " audit_runs_with_distorted_resample=" << resampling << "/" << runs
       << " (fraction " << num(static_cast<double>(resampling) / runs, 3) << ", total " << total_resamples
       << ", informational)";
  }
  return {pass, os.str()};
}

// 11. Drift sign
Verdict drift_check() {
  const int n = 1 << 12;
  const double p = std::pow(static_cast<double>(n), -0.75);
  const auto rec = quasi_linear_recipe(0.5, n, p);
  DriftSetup setup;
  setup.potential = {0.1, rec.params.lambda, p, n};
  setup.config = ea(Selection::comma, n, rec.params.lambda, 1);
  setup.d = rec.params.d;
  const int ks[] = {rec.params.k_star, std::min(n, 2 * rec.params.k_star), n / rec.params.lambda};
  bool pass = true;
  std::ostringstream os;
  os << "lambda=" << rec.params.lambda << " k*=" << rec.params.k_star << " d=" << rec.params.d.to_string();
  for (int k : ks) {
    for (bool distorted : {false, true}) {
      const auto est = drift_probe(k, distorted, setup, 100000,
                                   SeedTree(11).child("acceptance.drift").child("k", k).child("dist", distorted));
      const bool ok = est.mean > 3 * est.std_error;
      pass = pass && ok;
      os << " k=" << k << (distorted ? "/dist" : "/clean") << ":drift=" << num(est.mean, 4)
         << ",se=" << num(est.std_error, 3) << (ok ? "" : "(not >3se)");
    }
  }
  return {pass, os.str()};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "criteria to run (default: all)")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "z_distribution", z_distribution_check},
      {2, "no_clone_probability", no_clone_check},
      {3, "ystar_expectation", ystar_check},
      {4, "transition_bounds", transition_check},
      {5, "brute_force_equivalence", brute_force_check},
      {6, "single_planted_dichotomy", planted_check},
      {7, "comma_scaling", scaling_check},
      {8, "plus_comma_gap", gap_check},
      {9, "stochastic_domination", domination_check},
      {10, "frozen_noise_contract", noise_contract_check},
      {11, "drift_sign", drift_check},
  };

  bool all_pass = true;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.name << ": " << v.detail << " ["
              << num(secs, 3) << "s]" << std::endl;
    all_pass = all_pass && v.pass;
  }
  return all_pass ? 0 : 1;
}
