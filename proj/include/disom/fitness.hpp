#pragma once

// Fitness oracles: OneMax, frozen DistortedOneMax, its dynamic variant and the
// single-planted-optimum function, all compared in exact integer arithmetic.

#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "disom/core.hpp"
#include "disom/errors.hpp"

namespace disom {

// ---------------------------------------------------------------------------
// Distortion and fitness values
// ---------------------------------------------------------------------------

/// Rational distortion d = num / den.
struct Distortion {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  Distortion() = default;
  Distortion(std::uint64_t numerator, std::uint64_t denominator) : num(numerator), den(denominator) {
    if (den == 0) throw DomainError("distortion denominator must be positive");
    if (den > (std::uint64_t{1} << 31) || num > (std::uint64_t{1} << 40)) {
      throw DomainError("distortion out of exact-arithmetic range");
    }
    const auto g = std::gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  static Distortion integer(std::uint64_t d) { return {d, 1}; }

  /// Accepts "N/D", "N" or a finite decimal such as "29.5".
  static Distortion parse(std::string_view s) {
    auto to_u64 = [](std::string_view t) -> std::uint64_t {
      if (t.empty()) throw DomainError("distortion: empty number");
      std::uint64_t v = 0;
      for (char c : t) {
        if (c < '0' || c > '9') throw DomainError("distortion: bad digit in '" + std::string(t) + "'");
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
      }
      return v;
    };
    if (auto slash = s.find('/'); slash != std::string_view::npos) {
      return {to_u64(s.substr(0, slash)), to_u64(s.substr(slash + 1))};
    }
    if (auto dot = s.find('.'); dot != std::string_view::npos) {
      auto frac = s.substr(dot + 1);
      std::uint64_t den = 1;
      for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
      return {to_u64(s.substr(0, dot)) * den + (frac.empty() ? 0 : to_u64(frac)), den};
    }
    return {to_u64(s), 1};
  }

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  std::string to_string() const {
    return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
  }
  friend bool operator==(const Distortion&, const Distortion&) = default;
};

struct FitnessValue {
  int om = 0;
  bool distorted = false;
  friend bool operator==(const FitnessValue&, const FitnessValue&) = default;
};

/// om * den + num * [distorted]: the fitness scaled by den, exact.
inline std::int64_t scaled_value(const FitnessValue& f, const Distortion& d) noexcept {
  return static_cast<std::int64_t>(f.om) * static_cast<std::int64_t>(d.den) +
         (f.distorted ? static_cast<std::int64_t>(d.num) : 0);
}

inline std::strong_ordering compare(const FitnessValue& a, const FitnessValue& b, const Distortion& d) noexcept {
  return scaled_value(a, d) <=> scaled_value(b, d);
}

/// Fitness at least n - k_star.
inline bool meets_target(const FitnessValue& f, int n, int k_star, const Distortion& d) {
  if (k_star < 0 || k_star > n) throw DomainError("meets_target: need 0 <= k_star <= n");
  return scaled_value(f, d) >= static_cast<std::int64_t>(n - k_star) * static_cast<std::int64_t>(d.den);
}

// ---------------------------------------------------------------------------
// Frozen noise
// ---------------------------------------------------------------------------

inline constexpr std::string_view kPrfId = "zobrist128-splitmix3-v1";

/// Keyed 128-bit hash of (noise seed, x), where x enters through its digest.
inline Digest prf128(std::uint64_t noise_seed, const Digest& x) noexcept {
  const std::uint64_t k0 = mix64(noise_seed);
  const std::uint64_t k1 = mix64(noise_seed ^ 0xa0761d6478bd642fULL);
  std::uint64_t a = x.lo ^ k0;
  std::uint64_t b = x.hi ^ k1;
  a = mix64(a + std::rotl(b, 23));
  b = mix64(b ^ std::rotl(a, 41) ^ k0);
  a = mix64(a ^ b ^ k1);
  return {a, b};
}

/// floor(p * 2^64), saturating at 2^64 for p >= 1. p * 2^64 is exact in
/// binary floating point, so the floor is bit-exact.
inline unsigned __int128 distortion_threshold(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("distortion probability must lie in [0, 1]");
  if (p >= 1.0) return static_cast<unsigned __int128>(1) << 64;
  return static_cast<unsigned __int128>(std::floor(std::ldexp(p, 64)));
}

inline bool distortion_decision(std::uint64_t noise_seed, const Digest& x, unsigned __int128 threshold) noexcept {
  return static_cast<unsigned __int128>(prf128(noise_seed, x).lo) < threshold;
}

inline bool distortion_decision(std::uint64_t noise_seed, const SearchPoint& x, double p) {
  return distortion_decision(noise_seed, x.digest(), distortion_threshold(p));
}

struct FrozenNoise {
  std::uint64_t seed = 0;
  double p = 0.0;
  std::string prf_id{kPrfId};
};

struct MemoReport {
  std::size_t evaluated = 0;
  std::size_t disagreements = 0;
  std::size_t cache_hits = 0;
};

/// Evaluates each point through the PRF and through a memo keyed by canonical
/// encoding. Cache misses are filled from a digest rebuilt from the encoding
/// bytes, so the incremental digest cache is cross-checked as well.
inline MemoReport memo_crosscheck(const FrozenNoise& noise, std::span<const SearchPoint> points) {
  const auto threshold = distortion_threshold(noise.p);
  std::unordered_map<std::string, bool> memo;
  MemoReport rep;
  for (const auto& x : points) {
    const bool direct = distortion_decision(noise.seed, x.digest(), threshold);
    const auto bytes = x.canonical_bytes();
    std::string key(bytes.begin(), bytes.end());
    key += ':' + std::to_string(x.size());
    bool memoized = false;
    if (auto it = memo.find(key); it != memo.end()) {
      ++rep.cache_hits;
      memoized = it->second;
    } else {
      const auto rebuilt = SearchPoint::from_canonical_bytes(bytes, x.size()).recompute_digest();
      memoized = distortion_decision(noise.seed, rebuilt, threshold);
      memo.emplace(std::move(key), memoized);
    }
    ++rep.evaluated;
    if (direct != memoized) ++rep.disagreements;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Dynamic noise
// ---------------------------------------------------------------------------

/// Growing clean set. Points are keyed by their 128-bit digest.
class DynamicNoiseState {
 public:
  DynamicNoiseState(double p, std::uint64_t seed) : p_(p), rng_(seed) {
    distortion_threshold(p);  // validates p
  }

  void reset(const Digest& x0) {
    clean_.clear();
    clean_.insert(x0);
  }

  /// One sample step: admission roll for non-clones, then the membership test.
  bool observe(const Digest& x, bool parent_clone) {
    if (!parent_clone && !bernoulli(rng_, p_)) clean_.insert(x);
    return !clean_.contains(x);
  }

  bool is_clean(const Digest& x) const { return clean_.contains(x); }
  std::size_t clean_size() const noexcept { return clean_.size(); }

 private:
  double p_;
  Rng rng_;
  std::unordered_set<Digest, DigestHash> clean_;
};

// ---------------------------------------------------------------------------
// Evaluation trace
// ---------------------------------------------------------------------------

struct TraceEntry {
  std::uint64_t eval_index = 0;
  Digest digest;
  std::string canonical_hex;
  int om = 0;
  bool distorted = false;
};

enum class TraceMode { distorted_points, all };

/// Records distorted evaluations and every later query of a point that was
/// once distorted; with TraceMode::all, records every evaluation.
class TraceLog {
 public:
  explicit TraceLog(TraceMode mode = TraceMode::distorted_points) : mode_(mode) {}

  bool wants(const Digest& x, bool distorted) const {
    return mode_ == TraceMode::all || distorted || once_distorted_.contains(x);
  }

  void record(TraceEntry e) {
    if (e.distorted) once_distorted_.insert(e.digest);
    entries_.push_back(std::move(e));
  }

  const std::vector<TraceEntry>& entries() const noexcept { return entries_; }
  TraceMode mode() const noexcept { return mode_; }

  /// One JSON object per line: eval_index, canonical_hex, om, distorted.
  void write_jsonl(std::ostream& os) const {
    for (const auto& e : entries_) {
      os << "{\"eval_index\":" << e.eval_index << ",\"canonical_hex\":\"" << e.canonical_hex
         << "\",\"om\":" << e.om << ",\"distorted\":" << (e.distorted ? "true" : "false") << "}\n";
    }
  }

 private:
  TraceMode mode_;
  std::vector<TraceEntry> entries_;
  std::unordered_set<Digest, DigestHash> once_distorted_;
};

struct ResampleStats {
  std::size_t entries = 0;
  std::size_t distinct_distorted = 0;
  /// Evaluations that re-queried a point previously evaluated as distorted.
  std::size_t distorted_resamples = 0;
  /// Points whose distortion flag differed between queries.
  std::size_t value_changes = 0;
};

inline ResampleStats resample_audit(const TraceLog& trace) {
  struct Seen {
    bool was_distorted = false;
    bool first_flag = false;
    bool changed = false;
  };
  std::unordered_map<Digest, Seen, DigestHash> seen;
  ResampleStats st;
  for (const auto& e : trace.entries()) {
    ++st.entries;
    auto [it, inserted] = seen.try_emplace(e.digest, Seen{e.distorted, e.distorted, false});
    if (inserted) {
      if (e.distorted) ++st.distinct_distorted;
      continue;
    }
    Seen& s = it->second;
    if (s.was_distorted) ++st.distorted_resamples;
    if (e.distorted && !s.was_distorted) ++st.distinct_distorted;
    if (e.distorted != s.first_flag && !s.changed) {
      s.changed = true;
      ++st.value_changes;
    }
    s.was_distorted = s.was_distorted || e.distorted;
  }
  return st;
}

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

enum class OracleKind { onemax, disom_frozen, disom_dynamic, single_planted };

inline std::string_view to_string(OracleKind k) {
  switch (k) {
    case OracleKind::onemax: return "onemax";
    case OracleKind::disom_frozen: return "disom";
    case OracleKind::disom_dynamic: return "dydisom";
    case OracleKind::single_planted: return "single_planted";
  }
  return "?";
}

inline OracleKind parse_oracle_kind(std::string_view s) {
  if (s == "onemax") return OracleKind::onemax;
  if (s == "disom" || s == "disom_frozen") return OracleKind::disom_frozen;
  if (s == "dydisom" || s == "disom_dynamic") return OracleKind::disom_dynamic;
  if (s == "single_planted") return OracleKind::single_planted;
  throw DomainError("unknown oracle kind '" + std::string(s) + "'");
}

/// A point described relative to a parent: the engines never materialize
/// offspring that lose selection.
struct Candidate {
  int ones = 0;
  Digest digest;
  bool parent_clone = false;
  const SearchPoint* base = nullptr;
  std::span<const std::uint32_t> flips{};

  SearchPoint materialize() const {
    SearchPoint y = *base;
    y.flip_all(flips);
    return y;
  }
};

/// A counted fitness function with its noise state.
class Oracle {
 public:
  static Oracle onemax(int n) { return Oracle(OracleKind::onemax, n, Distortion{}, 0.0, 0); }

  static Oracle frozen(int n, Distortion d, double p, std::uint64_t noise_seed) {
    return Oracle(OracleKind::disom_frozen, n, d, p, noise_seed);
  }

  static Oracle dynamic(int n, Distortion d, double p, std::uint64_t noise_seed) {
    return Oracle(OracleKind::disom_dynamic, n, d, p, noise_seed);
  }

  /// Exactly the all-zero string is distorted.
  static Oracle single_planted(int n, Distortion d) { return Oracle(OracleKind::single_planted, n, d, 0.0, 0); }

  static Oracle make(OracleKind kind, int n, Distortion d, double p, std::uint64_t noise_seed) {
    return Oracle(kind, n, d, p, noise_seed);
  }

  OracleKind kind() const noexcept { return kind_; }
  int n() const noexcept { return n_; }
  const Distortion& distortion() const noexcept { return d_; }
  double p() const noexcept { return p_; }
  std::uint64_t noise_seed() const noexcept { return noise_seed_; }
  std::uint64_t evaluations() const noexcept { return evaluations_; }
  const DynamicNoiseState* dynamic_state() const noexcept { return dynamic_ ? &*dynamic_ : nullptr; }

  void set_target(std::optional<int> k_star) {
    if (k_star && (*k_star < 0 || *k_star > n_)) throw DomainError("target k* must lie in [0, n]");
    k_star_ = k_star;
  }
  std::optional<int> target() const noexcept { return k_star_; }

  bool meets_target(const FitnessValue& f) const {
    return k_star_ && disom::meets_target(f, n_, *k_star_, d_);
  }

  void attach_trace(TraceLog* log) noexcept { trace_ = log; }

  /// Starts a run at x0. For the dynamic kind the clean set becomes {x0}.
  void begin_run(const SearchPoint& x0) {
    check_dim(x0);
    parent_ = x0.digest();
    has_parent_ = true;
    if (dynamic_) dynamic_->reset(x0.digest());
  }

  void set_parent(const Digest& x) noexcept {
    parent_ = x;
    has_parent_ = true;
  }

  FitnessValue evaluate(const SearchPoint& x) {
    check_dim(x);
    Candidate c{x.ones(), x.digest(), has_parent_ && x.digest() == parent_, &x, {}};
    return evaluate(c);
  }

  FitnessValue evaluate(const Candidate& c) {
    const std::uint64_t index = evaluations_++;
    bool distorted = false;
    switch (kind_) {
      case OracleKind::onemax: break;
      case OracleKind::disom_frozen: distorted = distortion_decision(noise_seed_, c.digest, threshold_); break;
      case OracleKind::disom_dynamic: distorted = dynamic_->observe(c.digest, c.parent_clone); break;
      case OracleKind::single_planted: distorted = (c.ones == 0); break;
    }
    if (trace_ && trace_->wants(c.digest, distorted)) {
      trace_->record({index, c.digest, c.materialize().hex(), c.ones, distorted});
    }
    return {c.ones, distorted};
  }

 private:
  Oracle(OracleKind kind, int n, Distortion d, double p, std::uint64_t noise_seed)
      : kind_(kind), n_(n), d_(d), p_(p), noise_seed_(noise_seed), threshold_(distortion_threshold(p)) {
    if (n < 1) throw DomainError("oracle dimension must be positive");
    if (kind != OracleKind::onemax && d.num == 0) throw DomainError("distortion must be positive");
    if (kind == OracleKind::disom_dynamic) dynamic_.emplace(p, mix64(noise_seed ^ 0xd1d1d1d1d1d1d1d1ULL));
  }

  void check_dim(const SearchPoint& x) const {
    if (x.size() != static_cast<std::size_t>(n_)) throw DimensionError("oracle: dimension mismatch");
  }

  OracleKind kind_;
  int n_;
  Distortion d_;
  double p_;
  std::uint64_t noise_seed_;
  unsigned __int128 threshold_;
  std::optional<int> k_star_;
  std::uint64_t evaluations_ = 0;
  std::optional<DynamicNoiseState> dynamic_;
  Digest parent_;
  bool has_parent_ = false;
  TraceLog* trace_ = nullptr;
};

}  // namespace disom
