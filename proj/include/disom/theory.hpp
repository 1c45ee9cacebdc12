#pragma once

// Closed-form and Monte-Carlo reference quantities for the (1,lambda) EA:
// clone probabilities, one-step transition bounds, E[Y*(k)], the Z coupling
// law, the distortion-aware potential and its empirical drift.

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "disom/algorithms.hpp"
#include "disom/core.hpp"
#include "disom/errors.hpp"
#include "disom/regimes.hpp"

namespace disom {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(long double x) noexcept {
    const long double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      c_ += (sum_ - t) + x;
    } else {
      c_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  long double value() const noexcept { return sum_ + c_; }

 private:
  long double sum_ = 0;
  long double c_ = 0;
};

// ---------------------------------------------------------------------------
// Clones and transitions
// ---------------------------------------------------------------------------

struct NoCloneProbability {
  long double value = 0;  ///< (1 - (1 - 1/n)^n)^lambda
  long double lower = 0;  ///< q
  long double upper = 0;  ///< q * exp(lambda / ((e - 1) n))
};

inline NoCloneProbability no_clone_probability_exact(int n, int lambda) {
  if (n < 1 || lambda < 1) throw DomainError("no_clone_probability: need n >= 1 and lambda >= 1");
  const long double clone = std::exp(n * std::log1p(-1.0L / n));
  NoCloneProbability r;
  r.value = n == 1 ? 1.0L : std::exp(lambda * std::log1p(-clone));
  r.lower = compute_q(lambda);
  r.upper = r.lower * std::exp(lambda / ((std::exp(1.0L) - 1) * n));
  return r;
}

struct TransitionBounds {
  long double p1_lower = 0;    ///< lower bound on P(distance drops by exactly 1)
  long double pneg_upper = 0;  ///< upper bound on P(distance grows)
};

inline TransitionBounds transition_bounds(int k, int n, int lambda) {
  if (k < 1 || k > n) throw DomainError("transition_bounds: need 1 <= k <= n");
  const long double base = 1.0L - static_cast<long double>(k) / (std::exp(1.0L) * n);
  return {1.0L - std::pow(base, static_cast<long double>(lambda)), compute_q(lambda)};
}

// ---------------------------------------------------------------------------
// E[Y*(k)], Y* = max of lambda iid Bin(k, 1/n)
// ---------------------------------------------------------------------------

struct YStarSpec {
  int k = 0;
  int n = 1;
  int lambda = 1;

  void validate() const {
    if (n < 1 || k < 0 || k > n || lambda < 1) throw DomainError("YStarSpec: need 0 <= k <= n and lambda >= 1");
  }
};

struct YStarExpectation {
  long double value = 0;
  long double lower_bound = 0;  ///< lambda k / (lambda k + n)
  /// ln(lambda) / (ln ln(lambda) + ln(n/k)), the large-lambda estimate.
  std::optional<long double> asymptotic;
};

/// E[Y*] = sum_{s=0}^{k-1} (1 - F(s)^lambda) with F the Bin(k, 1/n) CDF.
/// Upper tails are accumulated from the small end and 1 - F^lambda is taken
/// through log1p/expm1, so neither cancellation nor underflow of F^lambda
/// affects the result.
inline YStarExpectation ystar_expectation_exact(const YStarSpec& spec) {
  spec.validate();
  YStarExpectation out;
  const int k = spec.k;
  const int n = spec.n;
  const long double lam = spec.lambda;
  if (k == 0) return out;
  out.lower_bound = lam * k / (lam * k + n);
  if (spec.lambda >= 3) {
    out.asymptotic = std::log(lam) / (std::log(std::log(lam)) + std::log(static_cast<long double>(n) / k));
  }

  // pmf by ratio recurrence until it underflows past the mean.
  const long double r = 1.0L / n;
  const long double log_odds = std::log(r) - std::log1p(-r);
  long double logp = k * std::log1p(-r);
  std::vector<long double> pmf;
  pmf.reserve(64);
  const long double mean = k * r;
  for (int j = 0; j <= k; ++j) {
    pmf.push_back(std::exp(logp));
    if (j > mean && logp < -200.0L) break;
    if (j < k) logp += std::log(static_cast<long double>(k - j) / (j + 1)) + log_odds;
  }

  // tail[s] = P(Y > s), summed from the smallest terms upwards.
  const int m = static_cast<int>(pmf.size());
  std::vector<long double> tail(static_cast<std::size_t>(m), 0.0L);
  long double acc = 0;
  for (int s = m - 1; s >= 0; --s) {
    tail[static_cast<std::size_t>(s)] = acc;
    acc += pmf[static_cast<std::size_t>(s)];
  }

  CompensatedSum sum;
  for (int s = 0; s < std::min(k, m); ++s) {
    const long double g = tail[static_cast<std::size_t>(s)];
    if (g <= 0) break;
    sum.add(-std::expm1(lam * std::log1p(-g)));
  }
  out.value = sum.value();
  return out;
}

/// Monte-Carlo estimate of E[Y*(k)] with its standard error.
inline std::pair<double, double> ystar_monte_carlo(const YStarSpec& spec, std::uint64_t samples, Rng& rng) {
  spec.validate();
  if (spec.k == 0) return {0.0, 0.0};
  std::binomial_distribution<int> bin(spec.k, 1.0 / spec.n);
  long double s1 = 0;
  long double s2 = 0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    int best = 0;
    for (int j = 0; j < spec.lambda; ++j) best = std::max(best, bin(rng));
    s1 += best;
    s2 += static_cast<long double>(best) * best;
  }
  const long double mean = s1 / samples;
  const long double var = std::max<long double>(0, s2 / samples - mean * mean);
  return {static_cast<double>(mean), static_cast<double>(std::sqrt(var / samples))};
}

// ---------------------------------------------------------------------------
// Z: +1 w.p. 3/4, -j w.p. (3/4) 4^-j
// ---------------------------------------------------------------------------

/// Deepest listed value is -kZDepth; it carries the folded tail mass.
inline constexpr int kZDepth = 30;

/// Z from one 64-bit word: read the word as bit pairs from the top; the
/// number of leading "11" pairs is j, giving +1 when j = 0 and -j otherwise.
inline int z_from_bits(std::uint64_t u) noexcept {
  const int pairs = std::countl_one(u) / 2;
  return pairs == 0 ? 1 : -std::min(pairs, kZDepth);
}

inline int z_sample(Rng& rng) { return z_from_bits(rng()); }

/// (value, probability) pairs; the tail beyond -kZDepth (mass 4^-(kZDepth+1)
/// < 2^-60) is folded into the last bucket, so the masses sum to exactly 1.
inline std::vector<std::pair<int, long double>> z_distribution() {
  std::vector<std::pair<int, long double>> out;
  out.emplace_back(1, 0.75L);
  for (int j = 1; j <= kZDepth; ++j) out.emplace_back(-j, std::ldexp(3.0L, -2 * j - 2));
  out.back().second += std::ldexp(1.0L, -2 * (kZDepth + 1));
  return out;
}

// ---------------------------------------------------------------------------
// Potential and drift
// ---------------------------------------------------------------------------

struct PotentialSpec {
  double delta = 0.1;
  int lambda = 1;
  double p = 0.0;
  int n = 1;
};

/// k + [distorted] (delta / (lambda p)) E[Y*(k)].
inline long double potential_value(int k, bool distorted, const PotentialSpec& spec) {
  if (k < 0 || k > spec.n) throw DomainError("potential: need 0 <= k <= n");
  if (!(spec.delta > 0) || spec.lambda < 1) throw DomainError("potential: need delta > 0 and lambda >= 1");
  if (!distorted) return k;
  if (!(spec.p > 0)) throw DomainError("potential undefined for a distorted point when p = 0");
  const auto ystar = ystar_expectation_exact({k, spec.n, spec.lambda}).value;
  return k + spec.delta / (static_cast<long double>(spec.lambda) * spec.p) * ystar;
}

struct DriftSetup {
  PotentialSpec potential;
  EAConfig config;  ///< lambda, mutation and tie policy are used
  Distortion d = Distortion::integer(1);
};

struct DriftEstimate {
  double mean = 0;
  double std_error = 0;
  double ystar = 0;
  double ratio = 0;  ///< mean / E[Y*(k)]
  std::uint64_t samples = 0;
};

/// Monte-Carlo drift of the potential over one comma generation from
/// canonical_point(n, k) under fresh-noise semantics. Samples are split into
/// shards with independent streams; shards may run on separate threads.
inline DriftEstimate drift_probe(int k, bool distorted, const DriftSetup& setup, std::uint64_t samples,
                                 const SeedTree& seeds, unsigned shards = 1, unsigned threads = 1) {
  if (samples < 1000) throw DomainError("drift_probe: need at least 1000 samples");
  if (shards == 0) shards = 1;
  const auto& spec = setup.potential;
  if (spec.n != setup.config.mutation.n || spec.lambda != setup.config.lambda) {
    throw DomainError("drift_probe: potential and EA configuration disagree");
  }
  const long double start = potential_value(k, distorted, spec);

  struct Partial {
    long double s1 = 0, s2 = 0;
    std::uint64_t count = 0;
  };
  std::vector<Partial> parts(shards);
  auto run_shard = [&](unsigned i) {
    GenerationKernel kernel(setup.config, spec.p, setup.d);
    Rng rng = seeds.child("shard", i).stream();
    std::map<int, long double> memo;
    const std::uint64_t count = samples / shards + (i < samples % shards ? 1 : 0);
    Partial& part = parts[i];
    for (std::uint64_t s = 0; s < count; ++s) {
      const KernelState next = kernel.sample({k, distorted}, rng);
      long double after = next.k;
      if (next.distorted) {
        auto it = memo.find(next.k);
        if (it == memo.end()) it = memo.emplace(next.k, potential_value(next.k, true, spec)).first;
        after = it->second;
      }
      const long double delta = start - after;
      part.s1 += delta;
      part.s2 += delta * delta;
    }
    part.count = count;
  };
  if (threads <= 1) {
    for (unsigned i = 0; i < shards; ++i) run_shard(i);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (unsigned i = t; i < shards; i += threads) run_shard(i);
      });
    }
  }

  Partial total;
  for (const auto& p : parts) {
    total.s1 += p.s1;
    total.s2 += p.s2;
    total.count += p.count;
  }
  DriftEstimate est;
  est.samples = total.count;
  const long double mean = total.s1 / total.count;
  const long double var = std::max<long double>(0, total.s2 / total.count - mean * mean);
  est.mean = static_cast<double>(mean);
  est.std_error = static_cast<double>(std::sqrt(var / (total.count - 1)));
  est.ystar = static_cast<double>(ystar_expectation_exact({k, spec.n, spec.lambda}).value);
  est.ratio = est.ystar > 0 ? est.mean / est.ystar : 0.0;
  return est;
}

// ---------------------------------------------------------------------------
// Large jumps
// ---------------------------------------------------------------------------

struct JumpTail {
  int flips = 0;              ///< m = ceil(c ln n)
  long double log_tail = 0;   ///< ln( binom(n, m) n^-m )
  long double log_bound = 0;  ///< ln( 1 / m! )
  long double tail() const { return std::exp(log_tail); }
  long double bound() const { return std::exp(log_bound); }
};

inline JumpTail jump_tail_bound(double c, int n) {
  if (!(c > 0)) throw DomainError("jump_tail_bound: c must be positive");
  if (n < 2) throw DomainError("jump_tail_bound: n must be at least 2");
  JumpTail j;
  j.flips = static_cast<int>(std::ceil(c * std::log(static_cast<double>(n))));
  const long double m = j.flips;
  j.log_bound = -std::lgamma(m + 1);
  if (j.flips > n) {
    j.log_tail = -std::numeric_limits<long double>::infinity();
  } else {
    j.log_tail = std::lgamma(static_cast<long double>(n) + 1) - std::lgamma(m + 1) -
                 std::lgamma(static_cast<long double>(n) - m + 1) - m * std::log(static_cast<long double>(n));
  }
  return j;
}

}  // namespace disom
