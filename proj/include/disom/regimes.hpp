#pragma once

// Parameter regimes: eta, q, the lambda window and a finite-n checker for the
// conditions under which comma selection beats plus selection on DisOM.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "disom/errors.hpp"
#include "disom/fitness.hpp"

namespace disom {

/// ln(eta) with eta = e / (e - 1).
inline long double ln_eta() { return -std::log1p(-std::exp(-1.0L)); }

inline long double log_eta(long double x) { return std::log(x) / ln_eta(); }

/// q = eta^(-lambda): roughly the chance that a generation contains no clone.
inline long double compute_q(int lambda) {
  if (lambda < 1) throw DomainError("compute_q: lambda must be at least 1");
  return std::exp(-static_cast<long double>(lambda) * ln_eta());
}

struct LambdaWindow {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<int> integers;
  bool empty() const noexcept { return integers.empty(); }
};

/// (1 + eps) log_eta(n / k*) <= lambda <= (1 - eps) log_eta(1 / p).
inline LambdaWindow lambda_window(int n, int k_star, double p, double epsilon) {
  if (k_star < 1 || k_star > n) throw DomainError("lambda_window: need 1 <= k* <= n");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("lambda_window: need 0 < p < 1");
  if (!(epsilon > 0.0)) throw DomainError("lambda_window: epsilon must be positive");
  LambdaWindow w;
  w.lo = static_cast<double>((1 + epsilon) * log_eta(static_cast<long double>(n) / k_star));
  w.hi = static_cast<double>((1 - epsilon) * log_eta(1.0L / p));
  for (int l = std::max(1, static_cast<int>(std::ceil(w.lo))); l <= static_cast<int>(std::floor(w.hi)); ++l) {
    w.integers.push_back(l);
  }
  return w;
}

struct RegimeParams {
  int n = 0;
  int lambda = 1;
  double p = 0.0;
  Distortion d = Distortion::integer(1);
  int k_star = 1;
  double epsilon = 0.05;

  long double q() const { return compute_q(lambda); }
};

/// Constants standing in for the asymptotic notation at a single n.
struct AssumptionConstants {
  double k_star_lo_exponent = 0.1;  ///< k* >= n^c
  double k_star_hi_exponent = 0.1;  ///< k* <= n^(1 - c)
  double p_lower_constant = 1.0;    ///< p >= C / (n ln n)
};

struct InequalityCheck {
  std::string name;
  std::string statement;
  bool pass = false;
  double margin = 0.0;  ///< log-space slack; negative when violated
};

struct AssumptionReport {
  std::vector<InequalityCheck> checks;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
  }

  const InequalityCheck& at(std::string_view name) const {
    for (const auto& c : checks) {
      if (c.name == name) return c;
    }
    throw DomainError("no such check: " + std::string(name));
  }
};

/// d >= (1 + eps) ln(n/p) / ln(n/k*).
inline double d_window_lower(int n, int k_star, double p, double epsilon) {
  return (1 + epsilon) * std::log(n / p) / std::log(static_cast<double>(n) / k_star);
}

inline AssumptionReport check_assumption1(const RegimeParams& r, const AssumptionConstants& c = {}) {
  AssumptionReport rep;
  const double ln_n = std::log(static_cast<double>(r.n));
  const double ln_k = std::log(static_cast<double>(r.k_star));
  const double ln_p = r.p > 0 ? std::log(r.p) : -std::numeric_limits<double>::infinity();
  const double ln_q = static_cast<double>(std::log(r.q()));
  const double eps = r.epsilon;
  auto add = [&](std::string name, std::string statement, double margin) {
    rep.checks.push_back({std::move(name), std::move(statement), margin >= 0.0, margin});
  };

  add("k_star_lower", "n^c_lo <= k*", ln_k - c.k_star_lo_exponent * ln_n);
  add("k_star_upper", "k* <= n^(1-c_hi)", (1 - c.k_star_hi_exponent) * ln_n - ln_k);
  add("p_lower", "p >= C/(n ln n)", ln_p - std::log(c.p_lower_constant / (r.n * ln_n)));
  add("q_lower", "p^(1-eps) <= q", ln_q - (1 - eps) * ln_p);
  add("q_upper", "q <= (k*/n)^(1+eps)", (1 + eps) * (ln_k - ln_n) - ln_q);

  const double ln_d = std::log(r.d.value());
  if (r.p > 0 && r.k_star < r.n) {
    add("d_lower", "d >= (1+eps) ln(n/p)/ln(n/k*)", ln_d - std::log(d_window_lower(r.n, r.k_star, r.p, eps)));
  } else {
    add("d_lower", "d >= (1+eps) ln(n/p)/ln(n/k*)", -std::numeric_limits<double>::infinity());
  }
  add("d_upper", "d <= k*", ln_k - ln_d);
  return rep;
}

struct RecipeOptions {
  double epsilon = 0.05;
  std::uint64_t d_default = 3;
  AssumptionConstants constants{};
};

struct RecipeResult {
  RegimeParams params;
  double q_target = 0.0;
  LambdaWindow window;
  AssumptionReport report;
};

/// q := n^(-delta/2), k* := n^(1 - delta/4), d a constant clamped into the
/// d-window. Requires p <= n^(-delta).
inline RecipeResult quasi_linear_recipe(double delta, int n, double p, const RecipeOptions& opt = {}) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("recipe: delta must lie in (0, 1)");
  if (n < 2) throw DomainError("recipe: n must be at least 2");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("recipe: p must lie in (0, 1)");
  const double p_max = std::pow(static_cast<double>(n), -delta);
  if (p > p_max * (1 + 1e-12)) {
    std::ostringstream os;
    os << "recipe: p = " << p << " exceeds n^(-delta) = " << p_max;
    throw DomainError(os.str());
  }

  RecipeResult out;
  out.q_target = std::pow(static_cast<double>(n), -delta / 2);
  const long double lambda_real = (delta / 2) * std::log(static_cast<long double>(n)) / ln_eta();
  const long long lambda = std::llround(lambda_real);
  if (lambda < 1) {
    std::ostringstream os;
    os << "recipe: lambda rounds to " << lambda << " (real value " << static_cast<double>(lambda_real) << ")";
    throw InfeasibleRegime(os.str());
  }
  const int k_star = static_cast<int>(std::llround(std::pow(static_cast<double>(n), 1 - delta / 4)));

  out.window = lambda_window(n, k_star, p, opt.epsilon);
  if (out.window.empty()) {
    std::ostringstream os;
    os << "recipe: empty lambda window [" << out.window.lo << ", " << out.window.hi << "] (margin "
       << out.window.hi - out.window.lo << ")";
    throw InfeasibleRegime(os.str());
  }

  const double d_lo = d_window_lower(n, k_star, p, opt.epsilon);
  auto d = std::max<std::uint64_t>(opt.d_default, static_cast<std::uint64_t>(std::ceil(d_lo)));
  d = std::min<std::uint64_t>(d, static_cast<std::uint64_t>(k_star));

  out.params = RegimeParams{n, static_cast<int>(lambda), p, Distortion::integer(d), k_star, opt.epsilon};
  out.report = check_assumption1(out.params, opt.constants);
  return out;
}

/// Regime used by the plus/comma gap experiment: q targeted at q_factor * p,
/// lambda = round(log_eta(1/q)), k* = n^(1 - delta/4) with delta chosen so that
/// n^(-delta/2) equals the q target, i.e. k* = n * sqrt(q target).
inline RegimeParams gap_regime(int n, double p, Distortion d, double q_factor = 10.0, double epsilon = 0.05) {
  if (!(p > 0.0 && q_factor * p < 1.0)) throw DomainError("gap_regime: need 0 < q_factor * p < 1");
  const double q_target = q_factor * p;
  const long long lambda = std::llround(log_eta(1.0L / q_target));
  if (lambda < 1) throw InfeasibleRegime("gap_regime: lambda rounds below 1");
  const int k_star = static_cast<int>(std::llround(n * std::sqrt(q_target)));
  return RegimeParams{n, static_cast<int>(lambda), p, d, std::max(1, k_star), epsilon};
}

}  // namespace disom
