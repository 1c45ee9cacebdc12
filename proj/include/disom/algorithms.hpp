#pragma once

// (1,lambda) EA and (1+lambda) EA with fixed-target termination.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "disom/core.hpp"
#include "disom/errors.hpp"
#include "disom/fitness.hpp"

namespace disom {

enum class Selection { comma, plus };
enum class TiePolicy { uniform_random, favor_parent };

inline std::string_view to_string(Selection s) { return s == Selection::comma ? "comma" : "plus"; }

inline Selection parse_selection(std::string_view s) {
  if (s == "comma") return Selection::comma;
  if (s == "plus") return Selection::plus;
  throw DomainError("unknown selection '" + std::string(s) + "'");
}

inline std::string_view to_string(TiePolicy t) {
  return t == TiePolicy::uniform_random ? "uniform_random" : "favor_parent";
}

inline TiePolicy parse_tie_policy(std::string_view s) {
  if (s == "uniform_random" || s == "uniform") return TiePolicy::uniform_random;
  if (s == "favor_parent") return TiePolicy::favor_parent;
  throw DomainError("unknown tie policy '" + std::string(s) + "'");
}

struct StartSpec {
  enum class Kind { uniform_random, fixed, at_distance };
  Kind kind = Kind::uniform_random;
  SearchPoint point;
  int distance = 0;

  static StartSpec uniform() { return {}; }
  static StartSpec fixed(SearchPoint x) { return {Kind::fixed, std::move(x), 0}; }
  /// Uniformly random point with exactly `zeros` zero-bits.
  static StartSpec at_distance(int zeros) { return {Kind::at_distance, {}, zeros}; }
};

struct EAConfig {
  Selection mode = Selection::comma;
  int lambda = 1;
  MutationParams mutation;
  TiePolicy tie_policy = TiePolicy::uniform_random;
  std::uint64_t budget = 1;
  StartSpec start;

  void validate() const {
    if (lambda < 1) throw DomainError("lambda must be at least 1");
    if (budget < 1) throw DomainError("budget must be at least 1");
    mutation.validate();
  }
};

struct TrialResult {
  /// Oracle counter at termination: the hitting evaluation, or the budget.
  std::uint64_t evaluations = 0;
  bool censored = false;
  std::uint64_t generations = 0;
  int hit_om = 0;
  bool hit_distorted = false;
  FitnessValue best_fitness_seen;
  std::uint64_t clone_generations = 0;
  int max_backstep = 0;
  std::uint64_t distorted_visits = 0;
  std::string seed_path;
};

struct GenerationRecord {
  std::uint64_t gen = 0;
  int parent_om = 0;
  bool parent_distorted = false;
  int best_offspring_om = 0;
  bool clone_present = false;
};

/// Streaming argmax over one generation's offspring. Under uniform_random,
/// co-maximal candidates win with equal probability (reservoir sampling);
/// under favor_parent a clone displaces a co-maximal non-clone.
class ArgmaxSelector {
 public:
  explicit ArgmaxSelector(TiePolicy policy) : policy_(policy) {}

  /// Offers the next candidate; returns true if it becomes the current best.
  bool offer(std::int64_t value, bool clone, Rng& rng) {
    bool take = false;
    if (!have_ || value > best_) {
      take = true;
      ties_ = 1;
    } else if (value == best_) {
      ++ties_;
      take = policy_ == TiePolicy::favor_parent ? (clone && !best_clone_) : uniform_below(rng, ties_) == 0;
    }
    if (take) {
      have_ = true;
      best_ = value;
      best_clone_ = clone;
    }
    return take;
  }

  bool has_best() const noexcept { return have_; }
  std::int64_t best_value() const noexcept { return best_; }

 private:
  TiePolicy policy_;
  bool have_ = false;
  std::int64_t best_ = 0;
  bool best_clone_ = false;
  std::uint64_t ties_ = 0;
};

/// One run of Algorithm 1 (comma) or Algorithm 2 (plus), advanced one
/// generation at a time. The target is tested after every evaluation,
/// including the initial one, and the run stops at the first hit.
class EvolutionRun {
 public:
  EvolutionRun(const EAConfig& config, Oracle& oracle, const SeedTree& seeds)
      : config_(config), oracle_(oracle), mutator_(config.mutation), rng_(seeds.stream()),
        seed_path_(seeds.path_string()) {
    config_.validate();
    if (config_.mutation.n != oracle_.n()) throw DimensionError("config and oracle dimensions differ");
    const auto& d = oracle_.distortion();
    d_num_ = static_cast<std::int64_t>(d.num);
    d_den_ = static_cast<std::int64_t>(d.den);
    flips_.reserve(64);
    best_flips_.reserve(64);
    initialize();
  }

  bool finished() const noexcept { return finished_; }
  const SearchPoint& parent() const noexcept { return parent_; }
  const FitnessValue& parent_fitness() const noexcept { return parent_fit_; }
  const std::optional<GenerationRecord>& last_generation() const noexcept { return last_; }

  /// Runs one generation (possibly cut short by the target or the budget).
  /// Returns false once the run has finished.
  bool step() {
    if (finished_) return false;
    if (used() >= config_.budget) {
      finish_censored({}, false, false);
      return false;
    }
    ++result_.generations;
    const int lambda = config_.lambda;

    ArgmaxSelector select(config_.tie_policy);
    FitnessValue best_fit;
    bool clone_present = false;

    for (int j = 0; j < lambda; ++j) {
      if (used() >= config_.budget) {
        finish_censored(best_fit, select.has_best(), clone_present);
        return false;
      }
      mutator_.sample_flips(rng_, flips_);
      Candidate c{parent_.ones(), parent_.digest(), flips_.empty(), &parent_, flips_};
      for (auto pos : flips_) {
        c.ones += parent_.test(pos) ? -1 : 1;
        c.digest ^= position_key(pos);
      }
      const FitnessValue f = oracle_.evaluate(c);
      const std::int64_t value = scaled(f);
      clone_present = clone_present || c.parent_clone;
      note_seen(f, value);

      if (oracle_.meets_target(f)) {
        result_.hit_om = f.om;
        result_.hit_distorted = f.distorted;
        parent_.flip_all(flips_);
        parent_fit_ = f;
        if (clone_present) ++result_.clone_generations;
        record(f.om, clone_present);
        finish(false);
        return false;
      }

      if (select.offer(value, c.parent_clone, rng_)) {
        best_fit = f;
        std::swap(best_flips_, flips_);
      }
    }

    if (clone_present) ++result_.clone_generations;
    const int before = parent_.ones();
    bool accept = true;
    if (config_.mode == Selection::plus) {
      const std::int64_t parent_value = scaled(parent_fit_);
      const std::int64_t best_value = select.best_value();
      accept = config_.tie_policy == TiePolicy::favor_parent ? best_value > parent_value : best_value >= parent_value;
    }
    if (accept) {
      parent_.flip_all(best_flips_);
      parent_fit_ = best_fit;
      oracle_.set_parent(parent_.digest());
      if (parent_fit_.distorted) ++result_.distorted_visits;
    }
    result_.max_backstep = std::max(result_.max_backstep, before - parent_.ones());
    record(best_fit.om, clone_present);
    return true;
  }

  const TrialResult& result() const noexcept { return result_; }

 private:
  void initialize() {
    const int n = oracle_.n();
    switch (config_.start.kind) {
      case StartSpec::Kind::uniform_random: parent_ = SearchPoint::uniform(static_cast<std::size_t>(n), rng_); break;
      case StartSpec::Kind::fixed:
        if (config_.start.point.size() != static_cast<std::size_t>(n)) {
          throw DimensionError("start point dimension mismatch");
        }
        parent_ = config_.start.point;
        break;
      case StartSpec::Kind::at_distance: parent_ = random_point_at_distance(n, config_.start.distance, rng_); break;
    }
    result_.seed_path = seed_path_;
    oracle_.begin_run(parent_);
    const auto before = oracle_.evaluations();
    parent_fit_ = oracle_.evaluate(parent_);
    base_evaluations_ = before;
    result_.best_fitness_seen = parent_fit_;
    if (parent_fit_.distorted) ++result_.distorted_visits;
    if (oracle_.meets_target(parent_fit_)) {
      result_.hit_om = parent_fit_.om;
      result_.hit_distorted = parent_fit_.distorted;
      finish(false);
    } else if (used() >= config_.budget) {
      finish_censored({}, false, false);
    }
  }

  std::int64_t scaled(const FitnessValue& f) const noexcept {
    return static_cast<std::int64_t>(f.om) * d_den_ + (f.distorted ? d_num_ : 0);
  }

  void note_seen(const FitnessValue& f, std::int64_t value) {
    if (value > scaled(result_.best_fitness_seen)) result_.best_fitness_seen = f;
  }

  std::uint64_t used() const noexcept { return oracle_.evaluations() - base_evaluations_; }

  void record(int best_offspring_om, bool clone_present) {
    last_ = GenerationRecord{result_.generations, parent_.ones(), parent_fit_.distorted, best_offspring_om,
                             clone_present};
  }

  void finish(bool censored) {
    finished_ = true;
    result_.censored = censored;
    result_.evaluations = used();
  }

  void finish_censored(const FitnessValue& best, bool have_best, bool clone_present) {
    result_.hit_om = parent_fit_.om;
    result_.hit_distorted = parent_fit_.distorted;
    if (have_best) {
      if (clone_present) ++result_.clone_generations;
      record(best.om, clone_present);
    }
    finish(true);
  }

  EAConfig config_;
  Oracle& oracle_;
  Mutator mutator_;
  Rng rng_;
  std::string seed_path_;
  std::int64_t d_num_ = 0;
  std::int64_t d_den_ = 1;

  SearchPoint parent_;
  FitnessValue parent_fit_;
  std::vector<std::uint32_t> flips_;
  std::vector<std::uint32_t> best_flips_;
  std::uint64_t base_evaluations_ = 0;
  bool finished_ = false;
  std::optional<GenerationRecord> last_;
  TrialResult result_;
};

/// Generic driver; `on_generation` (if given) sees every generation record.
template <class Recorder>
TrialResult run_ea(const EAConfig& config, Oracle& oracle, const SeedTree& seeds, Recorder&& on_generation) {
  EvolutionRun run(config, oracle, seeds);
  std::uint64_t emitted = 0;
  while (!run.finished()) {
    run.step();
    if (const auto& last = run.last_generation(); last && last->gen > emitted) {
      emitted = last->gen;
      on_generation(*last);
    }
  }
  return run.result();
}

inline TrialResult run_ea(const EAConfig& config, Oracle& oracle, const SeedTree& seeds) {
  return run_ea(config, oracle, seeds, [](const GenerationRecord&) {});
}

inline TrialResult run_comma(const EAConfig& config, Oracle& oracle, const SeedTree& seeds) {
  if (config.mode != Selection::comma) throw DomainError("run_comma requires comma selection");
  return run_ea(config, oracle, seeds);
}

inline TrialResult run_plus(const EAConfig& config, Oracle& oracle, const SeedTree& seeds) {
  if (config.mode != Selection::plus) throw DomainError("run_plus requires plus selection");
  return run_ea(config, oracle, seeds);
}

/// Runs to termination and returns the result together with one record per
/// generation (the last one may be a partial generation).
inline std::pair<TrialResult, std::vector<GenerationRecord>> run_trajectory(const EAConfig& config, Oracle& oracle,
                                                                            const SeedTree& seeds) {
  std::vector<GenerationRecord> trace;
  auto result = run_ea(config, oracle, seeds, [&](const GenerationRecord& r) { trace.push_back(r); });
  return {result, std::move(trace)};
}

// ---------------------------------------------------------------------------
// One-generation kernel
// ---------------------------------------------------------------------------

struct KernelState {
  int k = 0;  ///< number of zero-bits
  bool distorted = false;
  friend bool operator==(const KernelState&, const KernelState&) = default;
};

/// One comma generation from canonical_point(n, k) under fresh noise: every
/// non-clone offspring is distorted independently with probability p, a clone
/// keeps the parent's flag. Returns the selected offspring.
class GenerationKernel {
 public:
  GenerationKernel(const EAConfig& config, double p, Distortion d)
      : lambda_(config.lambda), n_(config.mutation.n), tie_(config.tie_policy), mutator_(config.mutation), p_(p),
        d_(d) {
    config.validate();
    distortion_threshold(p);
  }

  KernelState sample(KernelState s, Rng& rng) {
    if (s.k < 0 || s.k > n_) throw DomainError("kernel: need 0 <= k <= n");
    ArgmaxSelector select(tie_);
    KernelState best;
    for (int j = 0; j < lambda_; ++j) {
      mutator_.sample_flips(rng, flips_);
      int k = s.k;
      for (auto pos : flips_) k += static_cast<int>(pos) < s.k ? -1 : 1;
      const bool clone = flips_.empty();
      const bool distorted = clone ? s.distorted : bernoulli(rng, p_);
      const std::int64_t value = static_cast<std::int64_t>(n_ - k) * static_cast<std::int64_t>(d_.den) +
                                 (distorted ? static_cast<std::int64_t>(d_.num) : 0);
      if (select.offer(value, clone, rng)) best = {k, distorted};
    }
    return best;
  }

 private:
  int lambda_;
  int n_;
  TiePolicy tie_;
  Mutator mutator_;
  double p_;
  Distortion d_;
  std::vector<std::uint32_t> flips_;
};

inline KernelState one_generation_kernel(KernelState s, const EAConfig& config, double p, Distortion d, Rng& rng) {
  return GenerationKernel(config, p, d).sample(s, rng);
}

}  // namespace disom
