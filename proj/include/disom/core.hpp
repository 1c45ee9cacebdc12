#pragma once

// Bit-vector search points, Hamming geometry, standard bit mutation and
// hierarchical seeding.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "disom/errors.hpp"

namespace disom {

using Rng = std::mt19937_64;

/// splitmix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound). bound must be positive.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  return std::uniform_int_distribution<std::uint64_t>{0, bound - 1}(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

// ---------------------------------------------------------------------------
// Digest
// ---------------------------------------------------------------------------

/// 128-bit GF(2)-linear fingerprint of a bit vector: the XOR of a fixed
/// per-position key over all set bits. Flipping bit i toggles key(i), which
/// makes the fingerprint of an offspring computable from its parent in O(flips).
struct Digest {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  Digest& operator^=(const Digest& o) noexcept {
    lo ^= o.lo;
    hi ^= o.hi;
    return *this;
  }
  friend Digest operator^(Digest a, const Digest& b) noexcept { return a ^= b; }
  friend bool operator==(const Digest&, const Digest&) = default;
};

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    return static_cast<std::size_t>(d.lo ^ mix64(d.hi));
  }
};

inline Digest position_key(std::uint64_t i) noexcept {
  constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;
  return {mix64(i * golden + 0x243f6a8885a308d3ULL),
          mix64(i * golden + 0x13198a2e03707344ULL)};
}

// ---------------------------------------------------------------------------
// SearchPoint
// ---------------------------------------------------------------------------

/// A point of {0,1}^n with cached ones-count and digest.
class SearchPoint {
 public:
  SearchPoint() = default;

  /// The all-zero string of length n.
  explicit SearchPoint(std::size_t n) : n_(n), words_((n + 63) / 64, 0) {}

  static SearchPoint zeros(std::size_t n) { return SearchPoint(n); }

  static SearchPoint ones(std::size_t n) {
    SearchPoint x(n);
    for (std::size_t i = 0; i < n; ++i) x.flip(i);
    return x;
  }

  /// Parses "1010" as x1 = 1, x2 = 0, ... Any character other than '0'/'1'
  /// is rejected.
  static SearchPoint from_string(std::string_view s) {
    SearchPoint x(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '1') {
        x.flip(i);
      } else if (s[i] != '0') {
        throw DomainError("search point literal must contain only 0 and 1");
      }
    }
    return x;
  }

  /// Inverse of canonical_bytes().
  static SearchPoint from_canonical_bytes(std::span<const std::uint8_t> bytes, std::size_t n) {
    if (bytes.size() != (n + 7) / 8) throw DimensionError("canonical encoding has wrong length");
    SearchPoint x(n);
    for (std::size_t i = 0; i < n; ++i) {
      if ((bytes[i / 8] >> (i % 8)) & 1U) x.flip(i);
    }
    return x;
  }

  static SearchPoint uniform(std::size_t n, Rng& rng) {
    SearchPoint x(n);
    for (std::size_t w = 0; w < x.words_.size(); ++w) {
      std::uint64_t word = rng();
      if (w + 1 == x.words_.size() && n % 64 != 0) word &= (std::uint64_t{1} << (n % 64)) - 1;
      for (std::uint64_t rest = word; rest != 0; rest &= rest - 1) {
        x.flip(w * 64 + static_cast<std::size_t>(std::countr_zero(rest)));
      }
    }
    return x;
  }

  std::size_t size() const noexcept { return n_; }
  int ones() const noexcept { return ones_; }
  int zeros() const noexcept { return static_cast<int>(n_) - ones_; }
  const Digest& digest() const noexcept { return digest_; }

  bool test(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1U; }
  bool operator[](std::size_t i) const noexcept { return test(i); }

  void flip(std::size_t i) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    std::uint64_t& w = words_[i >> 6];
    ones_ += (w & mask) ? -1 : 1;
    w ^= mask;
    digest_ ^= position_key(i);
  }

  void flip_all(std::span<const std::uint32_t> positions) noexcept {
    for (auto i : positions) flip(i);
  }

  /// Popcount over the raw words, ignoring the cache.
  int recount() const noexcept {
    int c = 0;
    for (auto w : words_) c += std::popcount(w);
    return c;
  }

  /// Digest recomputed from scratch, ignoring the cache.
  Digest recompute_digest() const noexcept {
    Digest d;
    for (std::size_t w = 0; w < words_.size(); ++w) {
      for (std::uint64_t rest = words_[w]; rest != 0; rest &= rest - 1) {
        d ^= position_key(w * 64 + static_cast<std::size_t>(std::countr_zero(rest)));
      }
    }
    return d;
  }

  /// Little-endian bit packing: bit i lands in byte i/8 at bit i%8; the final
  /// byte is zero-padded.
  std::vector<std::uint8_t> canonical_bytes() const {
    std::vector<std::uint8_t> out((n_ + 7) / 8);
    for (std::size_t j = 0; j < out.size(); ++j) {
      out[j] = static_cast<std::uint8_t>(words_[j / 8] >> (8 * (j % 8)));
    }
    return out;
  }

  /// Lowercase hex of canonical_bytes(), byte 0 first.
  std::string hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    for (auto b : canonical_bytes()) {
      s.push_back(digits[b >> 4]);
      s.push_back(digits[b & 15]);
    }
    return s;
  }

  std::string to_string() const {
    std::string s(n_, '0');
    for (std::size_t i = 0; i < n_; ++i) {
      if (test(i)) s[i] = '1';
    }
    return s;
  }

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  friend bool operator==(const SearchPoint& a, const SearchPoint& b) noexcept {
    return a.n_ == b.n_ && a.words_ == b.words_;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> words_;
  int ones_ = 0;
  Digest digest_;
};

inline int one_max(const SearchPoint& x) noexcept { return x.ones(); }
inline int zero_max(const SearchPoint& x) noexcept { return x.zeros(); }

inline int hamming(const SearchPoint& x, const SearchPoint& y) {
  if (x.size() != y.size()) throw DimensionError("hamming: length mismatch");
  auto a = x.words();
  auto b = y.words();
  int d = 0;
  for (std::size_t w = 0; w < a.size(); ++w) d += std::popcount(a[w] ^ b[w]);
  return d;
}

/// First k bits zero, the remaining n - k bits one.
inline SearchPoint canonical_point(int n, int k) {
  if (n < 0 || k < 0 || k > n) throw DomainError("canonical_point: need 0 <= k <= n");
  SearchPoint x(static_cast<std::size_t>(n));
  for (int i = k; i < n; ++i) x.flip(static_cast<std::size_t>(i));
  return x;
}

/// Uniformly random point with exactly k zero-bits.
inline SearchPoint random_point_at_distance(int n, int k, Rng& rng) {
  if (n < 0 || k < 0 || k > n) throw DomainError("random_point_at_distance: need 0 <= k <= n");
  std::vector<std::uint32_t> idx(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
  for (int j = 0; j < k; ++j) {
    auto r = j + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(n - j)));
    std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(r)]);
  }
  SearchPoint x = SearchPoint::ones(static_cast<std::size_t>(n));
  for (int j = 0; j < k; ++j) x.flip(idx[static_cast<std::size_t>(j)]);
  return x;
}

// ---------------------------------------------------------------------------
// Mutation
// ---------------------------------------------------------------------------

struct MutationParams {
  int n = 0;
  double rate = 0.0;

  /// rate defaults to 1/n.
  static MutationParams standard(int n) { return {n, 1.0 / n}; }

  void validate() const {
    if (n < 1) throw DomainError("mutation: n must be positive");
    if (!(rate >= 0.0 && rate <= 0.5)) throw DomainError("mutation: rate must lie in [0, 1/2]");
  }
};

/// Standard bit mutation. Draws the number of flipped bits K ~ Bin(n, rate)
/// by inverse CDF, then K distinct positions uniformly; jointly this is the
/// law of n independent flips.
class Mutator {
 public:
  explicit Mutator(MutationParams params) : params_(params) {
    params_.validate();
    build_table();
  }

  const MutationParams& params() const noexcept { return params_; }

  /// Writes the flipped positions (unordered, distinct) into out.
  void sample_flips(Rng& rng, std::vector<std::uint32_t>& out) {
    out.clear();
    const std::size_t k = sample_count(rng);
    if (k == 0) return;
    const auto n = static_cast<std::uint64_t>(params_.n);
    if (k <= kSmallDraw) {
      while (out.size() < k) {
        auto pos = static_cast<std::uint32_t>(uniform_below(rng, n));
        if (std::find(out.begin(), out.end(), pos) == out.end()) out.push_back(pos);
      }
      return;
    }
    // Partial Fisher-Yates over a persistent permutation; any starting
    // permutation yields a uniform k-subset.
    if (perm_.empty()) {
      perm_.resize(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < perm_.size(); ++i) perm_[i] = static_cast<std::uint32_t>(i);
    }
    for (std::size_t j = 0; j < k; ++j) {
      auto r = j + static_cast<std::size_t>(uniform_below(rng, n - j));
      std::swap(perm_[j], perm_[r]);
      out.push_back(perm_[j]);
    }
  }

  SearchPoint mutate(const SearchPoint& x, Rng& rng) {
    if (x.size() != static_cast<std::size_t>(params_.n)) throw DimensionError("mutate: length mismatch");
    sample_flips(rng, scratch_);
    SearchPoint y = x;
    y.flip_all(scratch_);
    return y;
  }

  std::size_t sample_count(Rng& rng) const {
    const double u = uniform01(rng) * total_;
    if (cdf_.size() > 64) {
      auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
      return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    }
    std::size_t k = 0;
    while (k + 1 < cdf_.size() && cdf_[k] <= u) ++k;
    return k;
  }

 private:
  static constexpr std::size_t kSmallDraw = 24;

  void build_table() {
    const int n = params_.n;
    const double r = params_.rate;
    if (r == 0.0) {
      cdf_ = {1.0};
      total_ = 1.0;
      return;
    }
    // log pmf by the ratio recurrence; terms past the mode are dropped once
    // they can no longer move the cumulative sum.
    const double log_odds = std::log(r) - std::log1p(-r);
    double logp = n * std::log1p(-r);
    const double mode = std::floor((n + 1) * r);
    double acc = 0.0;
    cdf_.clear();
    for (int k = 0; k <= n; ++k) {
      const double pk = std::exp(logp);
      acc += pk;
      cdf_.push_back(acc);
      if (k > mode && pk < acc * 1e-18) break;
      logp += std::log(static_cast<double>(n - k) / (k + 1)) + log_odds;
    }
    total_ = acc;
  }

  MutationParams params_;
  std::vector<double> cdf_;
  double total_ = 1.0;
  std::vector<std::uint32_t> perm_;
  std::vector<std::uint32_t> scratch_;
};

inline SearchPoint mutate(const SearchPoint& x, const MutationParams& params, Rng& rng) {
  return Mutator(params).mutate(x, rng);
}

// ---------------------------------------------------------------------------
// SeedTree
// ---------------------------------------------------------------------------

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hierarchical seed derivation. Each child seed is a hash of the parent
/// seed, the child label and the child index, so a stream depends only on
/// its path and never on execution order.
class SeedTree {
 public:
  struct Step {
    std::string label;
    std::uint64_t index = 0;
    friend bool operator==(const Step&, const Step&) = default;
  };

  explicit SeedTree(std::uint64_t master = 0) : master_(master), state_(mix64(master ^ 0x5eed5eed5eed5eedULL)) {}

  SeedTree child(std::string_view label, std::uint64_t index = 0) const {
    SeedTree c = *this;
    c.path_.push_back({std::string(label), index});
    c.state_ = mix64(state_ ^ mix64(fnv1a(label) + 0x9e3779b97f4a7c15ULL * (index + 1)));
    return c;
  }

  std::uint64_t master() const noexcept { return master_; }
  std::uint64_t seed() const noexcept { return state_; }
  const std::vector<Step>& path() const noexcept { return path_; }
  Rng stream() const { return Rng{state_}; }

  /// e.g. "42/arm:1/trial:7/algorithm"; index is omitted when zero.
  std::string path_string() const {
    std::string s = std::to_string(master_);
    for (const auto& step : path_) {
      s += '/';
      s += step.label;
      if (step.index != 0) s += ':' + std::to_string(step.index);
    }
    return s;
  }

 private:
  std::uint64_t master_;
  std::uint64_t state_;
  std::vector<Step> path_;
};

}  // namespace disom
