#pragma once

// Trial batches with path-derived seeds, JSON-lines records, replay, the flat
// config format and the per-arm summary CSV.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "disom/algorithms.hpp"
#include "disom/core.hpp"
#include "disom/errors.hpp"
#include "disom/fitness.hpp"
#include "disom/regimes.hpp"
#include "disom/stats.hpp"

namespace disom {

using json = nlohmann::json;

struct ArmSpec {
  std::string name;
  Selection mode = Selection::comma;
  TiePolicy tie = TiePolicy::uniform_random;
  std::optional<int> lambda;             ///< overrides the experiment lambda
  std::optional<std::uint64_t> budget;   ///< overrides the experiment budget
};

struct ExperimentSpec {
  std::string id = "exp";
  OracleKind oracle = OracleKind::disom_frozen;
  int n = 0;
  int lambda = 1;
  double p = 0.0;
  Distortion d = Distortion::integer(1);
  int k_star = 0;
  std::optional<double> mutation_rate;  ///< defaults to 1/n
  std::vector<ArmSpec> arms;
  std::size_t trials = 1;
  std::optional<std::uint64_t> budget;  ///< defaults per arm, see default_budget
  bool fresh_noise = true;
  std::uint64_t seed = 0;
  std::string start = "uniform";
  std::string out;       ///< JSON-lines path; empty disables persistence
  unsigned workers = 0;  ///< 0 means hardware concurrency

  void validate() const {
    if (n < 1) throw DomainError("n must be positive");
    if (trials < 1) throw DomainError("trials must be at least 1");
    if (arms.empty()) throw DomainError("at least one arm is required");
    if (k_star < 0 || k_star > n) throw DomainError("k_star must lie in [0, n]");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p must lie in [0, 1]");
    for (const auto& a : arms) {
      if (a.lambda && *a.lambda < 1) throw DomainError("arm lambda must be at least 1");
    }
  }
};

/// 200 n ln n for comma arms, 200 n ln n / p for plus arms (p > 0).
inline std::uint64_t default_budget(int n, double p, Selection mode) {
  const double base = 200.0 * n * std::max(1.0, std::log(static_cast<double>(n)));
  const double b = (mode == Selection::plus && p > 0.0) ? base / p : base;
  return static_cast<std::uint64_t>(std::ceil(std::min(b, 9.0e18)));
}

/// "uniform", "zeros", "ones", "distance:K" (K zero-bits) or "bits:0101...".
inline StartSpec parse_start(std::string_view s, int n) {
  if (s == "uniform") return StartSpec::uniform();
  if (s == "zeros") return StartSpec::fixed(SearchPoint::zeros(static_cast<std::size_t>(n)));
  if (s == "ones") return StartSpec::fixed(SearchPoint::ones(static_cast<std::size_t>(n)));
  if (s.starts_with("distance:")) {
    const int k = std::stoi(std::string(s.substr(9)));
    if (k < 0 || k > n) throw DomainError("start distance out of range");
    return StartSpec::at_distance(k);
  }
  if (s.starts_with("bits:")) {
    auto x = SearchPoint::from_string(s.substr(5));
    if (x.size() != static_cast<std::size_t>(n)) throw DimensionError("start bits have the wrong length");
    return StartSpec::fixed(std::move(x));
  }
  throw DomainError("unknown start '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Trial records
// ---------------------------------------------------------------------------

struct TrialRecord {
  std::string experiment_id;
  std::string arm;
  std::uint64_t trial = 0;

  std::uint64_t master_seed = 0;
  std::vector<SeedTree::Step> noise_path;
  std::vector<SeedTree::Step> algorithm_path;
  std::uint64_t noise_seed = 0;
  std::uint64_t algorithm_seed = 0;

  std::string oracle;
  std::string mode;
  std::string tie_policy;
  int n = 0;
  int lambda = 1;
  double p = 0.0;
  std::uint64_t d_num = 1;
  std::uint64_t d_den = 1;
  int k_star = 0;
  double rate = 0.0;
  std::uint64_t budget = 0;
  std::string start;
  std::string prf;

  std::uint64_t evaluations = 0;
  bool censored = false;
  std::uint64_t generations = 0;
  int hit_om = 0;
  bool hit_distorted = false;
  std::uint64_t clone_gens = 0;
  int max_backstep = 0;
  std::uint64_t distorted_visits = 0;

  Observation observation() const { return {evaluations, censored}; }
  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

inline json path_to_json(const std::vector<SeedTree::Step>& path) {
  json arr = json::array();
  for (const auto& s : path) arr.push_back(json{{"label", s.label}, {"index", s.index}});
  return arr;
}

inline std::vector<SeedTree::Step> path_from_json(const json& arr) {
  std::vector<SeedTree::Step> out;
  for (const auto& s : arr) out.push_back({s.at("label").get<std::string>(), s.at("index").get<std::uint64_t>()});
  return out;
}

inline SeedTree seed_tree_from_path(std::uint64_t master, const std::vector<SeedTree::Step>& path) {
  SeedTree t(master);
  for (const auto& s : path) t = t.child(s.label, s.index);
  return t;
}

inline json to_json(const TrialRecord& r) {
  return json{
      {"experiment_id", r.experiment_id},
      {"arm", r.arm},
      {"trial", r.trial},
      {"seeds",
       {{"master", r.master_seed},
        {"noise", r.noise_seed},
        {"algorithm", r.algorithm_seed},
        {"noise_path", path_to_json(r.noise_path)},
        {"algorithm_path", path_to_json(r.algorithm_path)}}},
      {"oracle", r.oracle},
      {"mode", r.mode},
      {"tie_policy", r.tie_policy},
      {"n", r.n},
      {"lambda", r.lambda},
      {"p", r.p},
      {"d_num", r.d_num},
      {"d_den", r.d_den},
      {"k_star", r.k_star},
      {"rate", r.rate},
      {"budget", r.budget},
      {"start", r.start},
      {"prf", r.prf},
      {"evaluations", r.evaluations},
      {"censored", r.censored},
      {"generations", r.generations},
      {"hit_om", r.hit_om},
      {"hit_distorted", r.hit_distorted},
      {"clone_gens", r.clone_gens},
      {"max_backstep", r.max_backstep},
      {"distorted_visits", r.distorted_visits},
  };
}

inline TrialRecord record_from_json(const json& j) {
  TrialRecord r;
  r.experiment_id = j.at("experiment_id").get<std::string>();
  r.arm = j.at("arm").get<std::string>();
  r.trial = j.at("trial").get<std::uint64_t>();
  const auto& s = j.at("seeds");
  r.master_seed = s.at("master").get<std::uint64_t>();
  r.noise_seed = s.at("noise").get<std::uint64_t>();
  r.algorithm_seed = s.at("algorithm").get<std::uint64_t>();
  r.noise_path = path_from_json(s.at("noise_path"));
  r.algorithm_path = path_from_json(s.at("algorithm_path"));
  r.oracle = j.value("oracle", std::string("disom"));
  r.mode = j.value("mode", std::string("comma"));
  r.tie_policy = j.value("tie_policy", std::string("uniform_random"));
  r.n = j.at("n").get<int>();
  r.lambda = j.at("lambda").get<int>();
  r.p = j.at("p").get<double>();
  r.d_num = j.at("d_num").get<std::uint64_t>();
  r.d_den = j.at("d_den").get<std::uint64_t>();
  r.k_star = j.at("k_star").get<int>();
  r.rate = j.value("rate", r.n > 0 ? 1.0 / r.n : 0.0);
  r.budget = j.value("budget", std::uint64_t{0});
  r.start = j.value("start", std::string("uniform"));
  r.prf = j.value("prf", std::string(kPrfId));
  r.evaluations = j.at("evaluations").get<std::uint64_t>();
  r.censored = j.at("censored").get<bool>();
  r.generations = j.at("generations").get<std::uint64_t>();
  r.hit_om = j.at("hit_om").get<int>();
  r.hit_distorted = j.at("hit_distorted").get<bool>();
  r.clone_gens = j.at("clone_gens").get<std::uint64_t>();
  r.max_backstep = j.at("max_backstep").get<int>();
  r.distorted_visits = j.at("distorted_visits").get<std::uint64_t>();
  return r;
}

inline std::vector<TrialRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Reads a JSON-lines file, or every *.jsonl file in a directory (sorted by name).
inline std::vector<TrialRecord> read_records(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw IoError("no such file or directory: " + path.string());
  if (!fs::is_directory(path)) return read_jsonl(path);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<TrialRecord> out;
  for (const auto& f : files) {
    auto part = read_jsonl(f);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Executing trials
// ---------------------------------------------------------------------------

struct TrialPlan {
  std::size_t arm = 0;
  std::uint64_t trial = 0;
  SeedTree noise;
  SeedTree algorithm;
};

inline SeedTree experiment_root(const ExperimentSpec& spec) { return SeedTree(spec.seed).child("exp." + spec.id); }

inline TrialPlan plan_trial(const ExperimentSpec& spec, std::size_t arm, std::uint64_t trial) {
  const auto root = experiment_root(spec);
  const auto node = root.child("arm", arm).child("trial", trial);
  return {arm, trial, spec.fresh_noise ? node.child("noise") : root.child("noise"), node.child("algorithm")};
}

/// Runs one fully specified trial; the record carries everything needed to
/// replay it.
inline TrialRecord execute(TrialRecord r) {
  const auto noise_tree = seed_tree_from_path(r.master_seed, r.noise_path);
  const auto algo_tree = seed_tree_from_path(r.master_seed, r.algorithm_path);
  r.noise_seed = noise_tree.seed();
  r.algorithm_seed = algo_tree.seed();
  if (!r.prf.empty() && r.prf != kPrfId) throw DomainError("record uses unsupported PRF '" + r.prf + "'");
  r.prf = std::string(kPrfId);

  const Distortion d(r.d_num, r.d_den);
  auto oracle = Oracle::make(parse_oracle_kind(r.oracle), r.n, d, r.p, r.noise_seed);
  oracle.set_target(r.k_star);

  EAConfig cfg;
  cfg.mode = parse_selection(r.mode);
  cfg.lambda = r.lambda;
  cfg.mutation = MutationParams{r.n, r.rate};
  cfg.tie_policy = parse_tie_policy(r.tie_policy);
  cfg.budget = r.budget;
  cfg.start = parse_start(r.start, r.n);

  const auto res = run_ea(cfg, oracle, algo_tree);
  r.evaluations = res.evaluations;
  r.censored = res.censored;
  r.generations = res.generations;
  r.hit_om = res.hit_om;
  r.hit_distorted = res.hit_distorted;
  r.clone_gens = res.clone_generations;
  r.max_backstep = res.max_backstep;
  r.distorted_visits = res.distorted_visits;
  return r;
}

/// Record skeleton (no outcome yet) for one trial of one arm.
inline TrialRecord prepare_record(const ExperimentSpec& spec, std::size_t arm_index, std::uint64_t trial) {
  const auto& arm = spec.arms.at(arm_index);
  const auto plan = plan_trial(spec, arm_index, trial);
  TrialRecord r;
  r.experiment_id = spec.id;
  r.arm = arm.name.empty() ? std::string(to_string(arm.mode)) : arm.name;
  r.trial = trial;
  r.master_seed = spec.seed;
  r.noise_path = plan.noise.path();
  r.algorithm_path = plan.algorithm.path();
  r.oracle = std::string(to_string(spec.oracle));
  r.mode = std::string(to_string(arm.mode));
  r.tie_policy = std::string(to_string(arm.tie));
  r.n = spec.n;
  r.lambda = arm.lambda.value_or(spec.lambda);
  r.p = spec.p;
  r.d_num = spec.d.num;
  r.d_den = spec.d.den;
  r.k_star = spec.k_star;
  r.rate = spec.mutation_rate.value_or(1.0 / spec.n);
  r.budget = arm.budget ? *arm.budget : spec.budget ? *spec.budget : default_budget(spec.n, spec.p, arm.mode);
  r.start = spec.start;
  r.prf = std::string(kPrfId);
  return r;
}

/// Re-executes a stored record from its seeds.
inline TrialRecord replay(const TrialRecord& stored) { return execute(stored); }

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1U, std::thread::hardware_concurrency());
}

/// Runs every (arm, trial) pair. Results come back in (arm, trial) order and
/// do not depend on the worker count. With spec.out set, records are streamed
/// to JSON-lines in that same order. On an I/O failure a manifest
/// `<out>.partial.json` describing the completed prefix is written and IoError
/// is thrown.
inline std::vector<TrialRecord> run_batch(const ExperimentSpec& spec) {
  spec.validate();
  const std::size_t total = spec.arms.size() * spec.trials;
  std::vector<TrialRecord> records(total);
  for (std::size_t a = 0; a < spec.arms.size(); ++a) {
    for (std::size_t t = 0; t < spec.trials; ++t) records[a * spec.trials + t] = prepare_record(spec, a, t);
  }
  // Reject malformed configurations before spawning workers.
  (void)parse_start(spec.start, spec.n);
  MutationParams{spec.n, records.front().rate}.validate();

  std::ofstream out;
  std::string io_error;
  if (!spec.out.empty()) {
    const std::filesystem::path path(spec.out);
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    out.open(path, std::ios::out | std::ios::trunc);
    if (!out) io_error = "cannot open " + spec.out + " for writing";
  }

  std::vector<char> done(total, 0);
  std::size_t written = 0;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto flush_prefix = [&] {
    while (written < total && done[written]) {
      if (out.is_open() && io_error.empty()) {
        out << to_json(records[written]).dump() << '\n';
        out.flush();
        if (!out) io_error = "write to " + spec.out + " failed";
      }
      ++written;
    }
  };
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      {
        std::lock_guard lock(mu);
        if (failure || !io_error.empty()) return;
      }
      try {
        auto r = execute(records[i]);
        std::lock_guard lock(mu);
        records[i] = std::move(r);
        done[i] = 1;
        flush_prefix();
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  if (io_error.empty()) {
    const unsigned nw = std::min<std::size_t>(resolve_workers(spec.workers), total);
    if (nw <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(nw);
      for (unsigned w = 0; w < nw; ++w) pool.emplace_back(worker);
    }
  }
  if (failure) std::rethrow_exception(failure);
  if (!io_error.empty()) {
    json manifest{{"experiment_id", spec.id},
                  {"out", spec.out},
                  {"error", io_error},
                  {"total_trials", total},
                  {"completed_trials", static_cast<std::size_t>(std::count(done.begin(), done.end(), 1))},
                  {"records_written", written}};
    std::ofstream m(spec.out + ".partial.json");
    if (m) m << manifest.dump(2) << '\n';
    throw IoError(io_error);
  }
  return records;
}

// ---------------------------------------------------------------------------
// Summary CSV
// ---------------------------------------------------------------------------

struct ArmKey {
  std::string arm;
  int n = 0;
  double p = 0.0;
  auto operator<=>(const ArmKey&) const = default;
};

/// Groups records by (arm, n, p) in first-appearance order.
inline std::vector<std::pair<ArmKey, std::vector<Observation>>> group_by_arm(const std::vector<TrialRecord>& records) {
  std::vector<std::pair<ArmKey, std::vector<Observation>>> groups;
  std::map<ArmKey, std::size_t> index;
  for (const auto& r : records) {
    ArmKey key{r.arm, r.n, r.p};
    auto [it, inserted] = index.try_emplace(key, groups.size());
    if (inserted) groups.push_back({key, {}});
    groups[it->second].second.push_back(r.observation());
  }
  return groups;
}

inline std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

inline void write_summary_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  os << "arm,n,p,trials,censored_frac,median,mc_r25,mc_r10\n";
  const double rs[] = {0.25, 0.10};
  for (const auto& [key, obs] : group_by_arm(records)) {
    const auto s = summarize(obs, rs);
    auto opt = [](const auto& v) { return v ? format_number(static_cast<double>(*v)) : std::string("NA"); };
    os << key.arm << ',' << key.n << ',' << format_number(key.p) << ',' << s.trials << ','
       << format_number(s.censored_fraction) << ',' << opt(s.median) << ',' << opt(s.monte_carlo.at(0.25)) << ','
       << opt(s.monte_carlo.at(0.10)) << '\n';
  }
}

inline void write_summary_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& records) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_summary_csv(os, records);
  if (!os) throw IoError("write to " + path.string() + " failed");
}

// ---------------------------------------------------------------------------
// Flat config files
// ---------------------------------------------------------------------------

/// Parses `key = value` lines; `#` starts a comment. Later keys win.
inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DomainError("config line " + std::to_string(lineno) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw DomainError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

/// "comma", "plus", "plus:favor_parent", "one=plus:1" (name=mode[:tie][:lambda]).
inline ArmSpec parse_arm(std::string_view text) {
  ArmSpec arm;
  std::string s(text);
  if (const auto eq = s.find('='); eq != std::string::npos) {
    arm.name = s.substr(0, eq);
    s = s.substr(eq + 1);
  }
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.empty()) throw DomainError("empty arm description");
  arm.mode = parse_selection(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (!parts[i].empty() && std::isdigit(static_cast<unsigned char>(parts[i][0]))) {
      arm.lambda = std::stoi(parts[i]);
    } else {
      arm.tie = parse_tie_policy(parts[i]);
    }
  }
  if (arm.name.empty()) arm.name = parts[0];
  return arm;
}

inline bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw DomainError("expected a boolean, got '" + std::string(s) + "'");
}

/// Builds a spec from config keys. When `delta` is given, lambda, k_star and d
/// default to the quasi-linear recipe; explicit keys still win.
inline ExperimentSpec spec_from_config(const std::map<std::string, std::string>& kv) {
  static const char* known[] = {"id", "oracle", "n", "lambda", "p", "d", "k_star", "mutation_rate", "arms",
                                "trials", "budget", "fresh_noise", "seed", "start", "out", "workers", "delta",
                                "epsilon"};
  for (const auto& [k, v] : kv) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* x) { return k == x; }) == std::end(known)) {
      throw DomainError("unknown config key '" + k + "'");
    }
  }
  auto get = [&](const std::string& k) -> std::optional<std::string> {
    if (auto it = kv.find(k); it != kv.end()) return it->second;
    return std::nullopt;
  };
  try {
    ExperimentSpec spec;
    if (auto v = get("id")) spec.id = *v;
    if (auto v = get("oracle")) spec.oracle = parse_oracle_kind(*v);
    if (auto v = get("n")) spec.n = std::stoi(*v);
    if (auto v = get("p")) spec.p = std::stod(*v);
    if (auto v = get("delta")) {
      RecipeOptions opt;
      if (auto e = get("epsilon")) opt.epsilon = std::stod(*e);
      const auto rec = quasi_linear_recipe(std::stod(*v), spec.n, spec.p, opt);
      spec.lambda = rec.params.lambda;
      spec.k_star = rec.params.k_star;
      spec.d = rec.params.d;
    }
    if (auto v = get("lambda")) spec.lambda = std::stoi(*v);
    if (auto v = get("d")) spec.d = Distortion::parse(*v);
    if (auto v = get("k_star")) spec.k_star = std::stoi(*v);
    if (auto v = get("mutation_rate")) spec.mutation_rate = std::stod(*v);
    if (auto v = get("arms")) {
      std::stringstream ss(*v);
      for (std::string a; std::getline(ss, a, ',');) {
        a.erase(std::remove_if(a.begin(), a.end(), [](unsigned char c) { return std::isspace(c); }), a.end());
        if (!a.empty()) spec.arms.push_back(parse_arm(a));
      }
    } else {
      spec.arms = {parse_arm("comma"), parse_arm("plus")};
    }
    if (auto v = get("trials")) spec.trials = std::stoull(*v);
    if (auto v = get("budget")) spec.budget = std::stoull(*v);
    if (auto v = get("fresh_noise")) spec.fresh_noise = parse_bool(*v);
    if (auto v = get("seed")) spec.seed = std::stoull(*v);
    if (auto v = get("start")) spec.start = *v;
    if (auto v = get("out")) spec.out = *v;
    if (auto v = get("workers")) spec.workers = static_cast<unsigned>(std::stoul(*v));
    spec.validate();
    return spec;
  } catch (const DimensionError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw DomainError(std::string("bad numeric value in config: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw DomainError(std::string("numeric value out of range in config: ") + e.what());
  }
}

inline ExperimentSpec load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return spec_from_config(parse_key_values(in));
}

}  // namespace disom
