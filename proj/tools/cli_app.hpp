#pragma once

// Command-line front end: run, sweep, probe, regime and analyze.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "disom/analysis.hpp"
#include "disom/disom.hpp"

namespace disom::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitUsage = 64;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> budget;
  std::optional<std::string> out;
  std::optional<unsigned> workers;

  void add_to(CLI::App* app) {
    app->add_option("--seed", seed, "master seed");
    app->add_option("--trials", trials, "trials per arm");
    app->add_option("--budget", budget, "evaluation budget per trial");
    app->add_option("--out", out, "output path");
    app->add_option("--workers", workers, "worker threads (0 = all cores)");
  }

  void apply(ExperimentSpec& spec) const {
    if (seed) spec.seed = *seed;
    if (trials) spec.trials = *trials;
    if (budget) spec.budget = *budget;
    if (out) spec.out = *out;
    if (workers) spec.workers = *workers;
  }
};

inline std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

inline std::filesystem::path summary_path_for(const std::string& jsonl) {
  std::filesystem::path p(jsonl);
  p.replace_extension(".summary.csv");
  return p;
}

inline int do_run(const std::string& config, const Overrides& ov, std::ostream& out) {
  auto spec = load_config(config);
  ov.apply(spec);
  spec.validate();
  const auto records = run_batch(spec);
  if (!spec.out.empty()) write_summary_csv(summary_path_for(spec.out), records);
  write_summary_csv(out, records);
  return kExitOk;
}

struct SweepOptions {
  std::string config;
  std::vector<int> ns;
  std::vector<double> ps;
  std::optional<double> p_exponent;
  std::optional<double> delta;
};

inline int do_sweep(const SweepOptions& so, const Overrides& ov, std::ostream& out) {
  std::map<std::string, std::string> kv;
  if (!so.config.empty()) {
    std::ifstream in(so.config);
    if (!in) throw IoError("cannot open config " + so.config);
    kv = parse_key_values(in);
  }
  if (so.ns.empty()) throw DomainError("sweep: --n is required");
  if (so.ps.empty() && !so.p_exponent) throw DomainError("sweep: give --p or --p-exponent");
  const std::string out_dir = ov.out.value_or(kv.count("out") ? kv.at("out") : std::string("sweep_out"));
  std::filesystem::create_directories(out_dir);

  std::vector<TrialRecord> all;
  for (int n : so.ns) {
    std::vector<double> ps = so.ps;
    if (so.p_exponent) ps = {std::pow(static_cast<double>(n), -*so.p_exponent)};
    for (double p : ps) {
      auto cell = kv;
      cell["n"] = std::to_string(n);
      std::ostringstream pv;
      pv << std::setprecision(17) << p;
      cell["p"] = pv.str();
      if (so.delta) {
        std::ostringstream dv;
        dv << std::setprecision(17) << *so.delta;
        cell["delta"] = dv.str();
      }
      cell.erase("out");
      auto spec = spec_from_config(cell);
      ov.apply(spec);
      std::ostringstream id;
      id << spec.id << "_n" << n << "_p" << std::setprecision(6) << p;
      spec.id = id.str();
      spec.out = (std::filesystem::path(out_dir) / (spec.id + ".jsonl")).string();
      spec.validate();
      auto recs = run_batch(spec);
      all.insert(all.end(), recs.begin(), recs.end());
    }
  }
  write_summary_csv(std::filesystem::path(out_dir) / "summary.csv", all);
  write_summary_csv(out, all);
  return kExitOk;
}

struct ProbeOptions {
  std::string kind = "ystar";
  std::vector<int> ns{100};
  std::vector<int> lambdas{8};
  std::vector<int> ks;
  std::uint64_t samples = 100000;
  std::uint64_t seed = 0;
  double delta = 0.5;           // recipe delta (drift)
  double p = 0.0;               // noise probability (drift)
  double potential_delta = 0.1;
  std::vector<double> cs{2.0};  // jump exponents
  unsigned workers = 1;
};

inline int do_probe(const ProbeOptions& po, const std::optional<std::string>& out_path, std::ostream& console) {
  std::ofstream file;
  if (out_path) {
    file.open(*out_path);
    if (!file) throw IoError("cannot open " + *out_path + " for writing");
  }
  std::ostream& out = out_path ? static_cast<std::ostream&>(file) : console;
  const SeedTree root = SeedTree(po.seed).child("probe." + po.kind);
  out << std::setprecision(12);

  if (po.kind == "z") {
    out << "z,probability\n";
    for (const auto& [z, prob] : z_distribution()) out << z << ',' << static_cast<double>(prob) << '\n';
    Rng rng = root.stream();
    long double s = 0;
    for (std::uint64_t i = 0; i < po.samples; ++i) s += z_sample(rng);
    out << "# empirical_mean," << static_cast<double>(s / po.samples) << '\n';
  } else if (po.kind == "noclone") {
    out << "n,lambda,exact,lower,upper,mc_estimate,mc_std_error\n";
    for (int n : po.ns) {
      for (int l : po.lambdas) {
        const auto v = no_clone_probability_exact(n, l);
        Mutator mut(MutationParams::standard(n));
        Rng rng = root.child("cell", static_cast<std::uint64_t>(n) * 1000 + l).stream();
        std::uint64_t hits = 0;
        for (std::uint64_t s = 0; s < po.samples; ++s) {
          bool clone = false;
          for (int j = 0; j < l; ++j) clone |= mut.sample_count(rng) == 0;
          hits += clone ? 0 : 1;
        }
        const double f = static_cast<double>(hits) / po.samples;
        out << n << ',' << l << ',' << static_cast<double>(v.value) << ',' << static_cast<double>(v.lower) << ','
            << static_cast<double>(v.upper) << ',' << f << ',' << std::sqrt(f * (1 - f) / po.samples) << '\n';
      }
    }
  } else if (po.kind == "ystar") {
    out << "k,n,lambda,exact,lower_bound,mc_estimate,mc_std_error\n";
    for (int n : po.ns) {
      for (int l : po.lambdas) {
        const std::vector<int> ks = po.ks.empty() ? std::vector<int>{1, n / 4, n / 2, n} : po.ks;
        for (int k : ks) {
          if (k < 0 || k > n) continue;
          const YStarSpec spec{k, n, l};
          const auto e = ystar_expectation_exact(spec);
          Rng rng = root.child("cell", static_cast<std::uint64_t>(k) * 1000003 + n * 101 + l).stream();
          const auto [mean, se] = ystar_monte_carlo(spec, po.samples, rng);
          out << k << ',' << n << ',' << l << ',' << static_cast<double>(e.value) << ','
              << static_cast<double>(e.lower_bound) << ',' << mean << ',' << se << '\n';
        }
      }
    }
  } else if (po.kind == "drift") {
    out << "n,lambda,k_star,k,distorted,drift,std_error,ystar,ratio\n";
    for (int n : po.ns) {
      const double p = po.p > 0 ? po.p : std::pow(static_cast<double>(n), -0.75);
      const auto rec = quasi_linear_recipe(po.delta, n, p);
      const auto& r = rec.params;
      DriftSetup setup;
      setup.potential = {po.potential_delta, r.lambda, r.p, n};
      setup.config.mode = Selection::comma;
      setup.config.lambda = r.lambda;
      setup.config.mutation = MutationParams::standard(n);
      setup.d = r.d;
      const std::vector<int> ks =
          po.ks.empty() ? std::vector<int>{r.k_star, std::min(n, 2 * r.k_star), std::max(1, n / r.lambda)} : po.ks;
      for (int k : ks) {
        for (bool dist : {false, true}) {
          const auto est = drift_probe(k, dist, setup, po.samples,
                                       root.child("n", n).child("k", k).child(dist ? "distorted" : "clean"),
                                       std::max(1U, po.workers), po.workers);
          out << n << ',' << r.lambda << ',' << r.k_star << ',' << k << ',' << (dist ? 1 : 0) << ',' << est.mean
              << ',' << est.std_error << ',' << est.ystar << ',' << est.ratio << '\n';
        }
      }
    }
  } else if (po.kind == "jump") {
    out << "n,c,flips,log_tail,log_bound\n";
    for (int n : po.ns) {
      for (double c : po.cs) {
        const auto j = jump_tail_bound(c, n);
        out << n << ',' << c << ',' << j.flips << ',' << static_cast<double>(j.log_tail) << ','
            << static_cast<double>(j.log_bound) << '\n';
      }
    }
  } else {
    throw DomainError("unknown probe kind '" + po.kind + "'");
  }
  if (out_path && !file) throw IoError("write to " + *out_path + " failed");
  return kExitOk;
}

struct RegimeOptions {
  int n = 0;
  double delta = 0.5;
  double p = 0.0;
  double epsilon = 0.05;
  std::uint64_t d_default = 3;
  bool json = false;
};

inline int do_regime(const RegimeOptions& ro, std::ostream& out) {
  RecipeOptions opt;
  opt.epsilon = ro.epsilon;
  opt.d_default = ro.d_default;
  const auto rec = quasi_linear_recipe(ro.delta, ro.n, ro.p, opt);
  const auto& r = rec.params;
  out << "n = " << r.n << "\n"
      << "p = " << fmt(r.p) << "\n"
      << "lambda = " << r.lambda << "\n"
      << "k* = " << r.k_star << "\n"
      << "d = " << r.d.to_string() << "\n"
      << "q = " << fmt(static_cast<double>(r.q())) << " (target " << fmt(rec.q_target) << ")\n"
      << "lambda window = [" << fmt(rec.window.lo) << ", " << fmt(rec.window.hi) << "]\n";
  for (const auto& c : rec.report.checks) {
    out << (c.pass ? "PASS " : "FAIL ") << std::left << std::setw(13) << c.name << std::right << ' ' << c.statement
        << "  margin " << fmt(c.margin) << "\n";
  }
  out << (rec.report.all_pass() ? "all checks pass" : "some checks fail") << "\n";
  if (ro.json) {
    nlohmann::json j{{"n", r.n},          {"p", r.p},       {"lambda", r.lambda},
                     {"k_star", r.k_star}, {"d", r.d.to_string()}, {"epsilon", r.epsilon},
                     {"q", static_cast<double>(r.q())}, {"q_target", rec.q_target},
                     {"window", {rec.window.lo, rec.window.hi}}, {"all_pass", rec.report.all_pass()}};
    for (const auto& c : rec.report.checks) {
      j["checks"].push_back({{"name", c.name}, {"statement", c.statement}, {"pass", c.pass}, {"margin", c.margin}});
    }
    out << j.dump() << "\n";
  }
  return kExitOk;
}

struct AnalyzeOptions {
  std::vector<std::string> inputs;
  bool summary = false;
  bool gap = false;
  std::string fit;  // "nlogn" or "power"
  std::string arm = "comma";
  std::string axis = "n";
  std::string domination;  // "one,plus"
  double censor_threshold = 0.1;
};

inline int do_analyze(const AnalyzeOptions& ao, const std::optional<std::string>& out_path, std::ostream& console) {
  std::vector<TrialRecord> records;
  for (const auto& in : ao.inputs) {
    auto part = read_records(in);
    records.insert(records.end(), part.begin(), part.end());
  }
  if (records.empty()) throw IoError("no trial records found");
  std::ofstream file;
  if (out_path) {
    file.open(*out_path);
    if (!file) throw IoError("cannot open " + *out_path + " for writing");
  }
  std::ostream& out = out_path ? static_cast<std::ostream&>(file) : console;
  const bool any = ao.gap || !ao.fit.empty() || !ao.domination.empty();

  if (ao.summary || !any) write_summary_csv(out, records);

  if (!ao.fit.empty()) {
    const auto model = ao.fit == "nlogn" ? ScalingModel::n_log_n
                       : ao.fit == "power" ? ScalingModel::power_law
                                           : throw DomainError("unknown fit model '" + ao.fit + "'");
    const auto axis = ao.axis == "n" ? ScalingAxis::n
                      : ao.axis == "inv_p" ? ScalingAxis::inverse_p
                                           : throw DomainError("unknown axis '" + ao.axis + "'");
    const auto series = scaling_series(records, ao.arm, axis);
    const auto fit = fit_scaling(series, model);
    out << "fit,model=" << ao.fit << ",arm=" << ao.arm << ",constant=" << fmt(fit.constant)
        << ",exponent=" << fmt(fit.exponent);
    if (model == ScalingModel::n_log_n) out << ",ratio_spread=" << fmt(fit.ratio_spread);
    out << "\n";
    for (std::size_t i = 0; i < fit.points.size(); ++i) {
      out << "point,x=" << fmt(fit.points[i].x) << ",y=" << fmt(fit.points[i].y)
          << ",residual=" << fmt(fit.residuals[i]) << "\n";
    }
    for (auto i : fit.excluded) out << "excluded,x=" << fmt(series[i].x) << ",y=" << fmt(series[i].y) << "\n";
  }

  if (ao.gap) {
    const auto rep = analyze_gap(records, ao.censor_threshold);
    out << "n,p,lambda,k_star,median_comma,median_plus,censored_comma,censored_plus,ratio,flag\n";
    for (const auto& g : rep.points) {
      std::string flag = g.infinite ? "infinite" : "";
      if (g.unreliable) flag += flag.empty() ? "unreliable" : ";unreliable";
      out << g.n << ',' << fmt(g.p) << ',' << g.lambda << ',' << g.k_star << ',' << fmt(g.median_comma) << ','
          << fmt(g.median_plus) << ',' << fmt(g.censored_comma) << ',' << fmt(g.censored_plus) << ','
          << fmt(g.ratio) << ',' << (flag.empty() ? "ok" : flag) << "\n";
    }
    out << "# monotone=" << (rep.monotone ? "true" : "false")
        << " slope=" << (rep.fit ? fmt(rep.fit->exponent) : std::string("NA")) << "\n";
  }

  if (!ao.domination.empty()) {
    const auto comma = ao.domination.find(',');
    if (comma == std::string::npos) throw DomainError("--domination expects ARM_ONE,ARM_PLUS");
    const auto one = arm_observations(records, ao.domination.substr(0, comma));
    const auto plus = arm_observations(records, ao.domination.substr(comma + 1));
    const auto rep = compare_ecdfs(one, plus, 0.999);
    out << "domination,trials_one=" << rep.trials_one << ",trials_plus=" << rep.trials_plus
        << ",max_excess=" << fmt(rep.max_excess) << ",band=" << fmt(rep.band)
        << ",violation=" << (rep.violation ? "true" : "false") << "\n";
  }
  if (out_path && !file) throw IoError("write to " + *out_path + " failed");
  return kExitOk;
}

/// Parses argv and dispatches. Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"DisOM runtime experiments"};
  app.require_subcommand(1);

  std::string config;
  Overrides run_ov;
  auto* run = app.add_subcommand("run", "run one experiment from a config file");
  run->add_option("--config", config, "flat key = value config file")->required();
  run_ov.add_to(run);

  SweepOptions so;
  Overrides sweep_ov;
  auto* sweep = app.add_subcommand("sweep", "grid over n, p and delta");
  sweep->add_option("--config", so.config, "base config file");
  sweep->add_option("--n", so.ns, "dimensions")->delimiter(',');
  sweep->add_option("--p", so.ps, "noise probabilities")->delimiter(',');
  sweep->add_option("--p-exponent", so.p_exponent, "use p = n^-e");
  sweep->add_option("--delta", so.delta, "derive lambda, k* and d from the recipe");
  sweep_ov.add_to(sweep);

  ProbeOptions po;
  std::optional<std::string> probe_out;
  auto* probe = app.add_subcommand("probe", "theory grids as CSV");
  probe->add_option("--kind", po.kind, "z | noclone | ystar | drift | jump")
      ->check(CLI::IsMember({"z", "noclone", "ystar", "drift", "jump"}));
  probe->add_option("--n", po.ns, "dimensions")->delimiter(',');
  probe->add_option("--lambda", po.lambdas, "offspring counts")->delimiter(',');
  probe->add_option("--k", po.ks, "zero-bit counts")->delimiter(',');
  probe->add_option("--c", po.cs, "jump exponents")->delimiter(',');
  probe->add_option("--samples", po.samples, "Monte-Carlo samples per cell");
  probe->add_option("--seed", po.seed, "master seed");
  probe->add_option("--delta", po.delta, "recipe delta (drift)");
  probe->add_option("--p", po.p, "noise probability (drift; default n^-0.75)");
  probe->add_option("--potential-delta", po.potential_delta, "potential weight (drift)");
  probe->add_option("--workers", po.workers, "threads (drift)");
  probe->add_option("--out", probe_out, "CSV output path");

  RegimeOptions ro;
  auto* regime = app.add_subcommand("regime", "check a parameter regime");
  regime->add_option("--n", ro.n, "dimension")->required();
  regime->add_option("--delta", ro.delta, "recipe delta")->required();
  regime->add_option("--p", ro.p, "noise probability")->required();
  regime->add_option("--epsilon", ro.epsilon, "window slack");
  regime->add_option("--d-default", ro.d_default, "minimum distortion");
  regime->add_flag("--json", ro.json, "also print the report as JSON");

  AnalyzeOptions ao;
  std::optional<std::string> analyze_out;
  auto* analyze = app.add_subcommand("analyze", "summaries, fits, gap and domination over stored records");
  analyze->add_option("inputs", ao.inputs, "JSON-lines files or directories")->required();
  analyze->add_flag("--summary", ao.summary, "per-arm summary CSV");
  analyze->add_flag("--gap", ao.gap, "plus/comma median ratio per p");
  analyze->add_option("--fit", ao.fit, "nlogn | power");
  analyze->add_option("--arm", ao.arm, "arm to fit");
  analyze->add_option("--axis", ao.axis, "n | inv_p");
  analyze->add_option("--domination", ao.domination, "ARM_ONE,ARM_PLUS");
  analyze->add_option("--censor-threshold", ao.censor_threshold, "censoring above this flags a ratio");
  analyze->add_option("--out", analyze_out, "output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (run->parsed()) return do_run(config, run_ov, out);
    if (sweep->parsed()) return do_sweep(so, sweep_ov, out);
    if (probe->parsed()) return do_probe(po, probe_out, out);
    if (analyze->parsed()) return do_analyze(ao, analyze_out, out);
    if (regime->parsed()) {
      try {
        return do_regime(ro, out);
      } catch (const DomainError& e) {
        err << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
      }
    }
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const InfeasibleRegime& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::logic_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace disom::cli
