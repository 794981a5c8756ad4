#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "stoplab/bellman.hpp"
#include "stoplab/dist.hpp"
#include "stoplab/inference.hpp"
#include "stoplab/parallel.hpp"
#include "stoplab/quadrature.hpp"
#include "stoplab/rng.hpp"

namespace stoplab {

/// Which stopping rule to evaluate.
struct PolicySpec {
  enum class Kind { Oracle, Perturbed, PlugIn };
  Kind kind = Kind::Oracle;
  double epsilon = 0.0;  // Perturbed: threshold solved at theta + epsilon
  long n = 0;            // PlugIn: exploration sample size

  static PolicySpec oracle() { return PolicySpec{Kind::Oracle, 0.0, 0}; }
  static PolicySpec perturbed(double eps) { return PolicySpec{Kind::Perturbed, eps, 0}; }
  static PolicySpec plug_in(long n) {
    if (n < 1) throw std::domain_error("PolicySpec: PlugIn requires N >= 1");
    return PolicySpec{Kind::PlugIn, 0.0, n};
  }
};

struct RegretReport {
  double v_star;
  double v_policy;
  double relative_regret;
  std::optional<double> ci_halfwidth;  // stochastic evaluations only
};

/// Expected discounted reward of the threshold-S rule started at n = 1 under
/// truth F_theta:
///   V(S) = gamma * mu(S) * P(S) / ((1-gamma) + gamma * P(S)).
/// The leading gamma reflects tau >= 1 and gives the fixed-point identity
/// V(S*) = S*.
inline double policy_value(const DistSpec& truth, const Discount& disc, double S) {
  const double p = std::exp(log_tail(truth, S));
  const double mu = conditional_mean(truth, S);
  return disc.gamma * mu * p / ((1.0 - disc.gamma) + disc.gamma * p);
}

/// V* = V(S*); equals the Bellman threshold itself.
inline double oracle_value(const DistSpec& truth, const Discount& disc) {
  return policy_value(truth, disc, solve_threshold(truth, disc).value);
}

/// tau is geometric under a fixed threshold: E[tau] = 1 / P_theta(S).
inline double expected_stop_time(const DistSpec& truth, double S) {
  return std::exp(-log_tail(truth, S));
}

namespace detail {

/// Quantities at the oracle threshold, reused across perturbations.
struct OracleContext {
  OracleContext(const DistSpec& truth, const Discount& disc)
      : s_star(solve_threshold(truth, disc).value),
        log_p_star(log_tail(truth, s_star)),
        p_star(std::exp(log_p_star)),
        mu_star(conditional_mean(truth, s_star)),
        v_star(disc.gamma * mu_star * p_star /
               ((1.0 - disc.gamma) + disc.gamma * p_star)) {}
  double s_star, log_p_star, p_star, mu_star, v_star;
};

/// E[f(X)] under the truth by panelled adaptive quadrature. Panels are laid
/// out between knots of equal exponential decay u = |x-theta|^alpha in
/// {0, 5, 10, ...} so no panel hides the density's mass from the Simpson
/// refinement test; a single pass over the full truncation range would
/// terminate on three near-zero samples. For alpha < 1 the density has a
/// cusp at theta, so the panel touching it integrates in u = r^4 space where
/// the transformed integrand is smooth. |f| <= 1 is assumed for the error
/// budget; the result is accurate to ~5e-7 absolute.
template <class F>
double expect_under_density(const DistSpec& truth, double u_cap, F&& f) {
  const double alpha = truth.alpha;
  const double inv_alpha = 1.0 / alpha;
  const double c0 = normalizing_constant(alpha);
  const double u_max = std::min(u_cap, 120.0);
  double total = 0.0;
  for (int side = -1; side <= 1; side += 2) {
    for (int j = 0; j < 24; ++j) {
      const double u0 = 5.0 * j;
      const double u1 = std::min(5.0 * (j + 1), u_max);
      if (u0 >= u1) break;
      const double tol = 2e-7 * std::exp(-5.0 * j);
      if (alpha < 1.0) {
        const auto g = [&](double u) {
          const double x = truth.theta + side * std::pow(u, inv_alpha);
          return f(x) * c0 * std::exp(-u) * inv_alpha * std::pow(u, inv_alpha - 1.0);
        };
        if (j == 0) {
          const auto gr = [&](double r) {
            const double u = r * r * r * r;
            return g(u) * 4.0 * r * r * r;
          };
          total += adaptive_simpson(gr, 0.0, std::pow(u1, 0.25), tol);
        } else {
          total += adaptive_simpson(g, u0, u1, tol);
        }
      } else {
        const double t0 = truth.theta + side * std::pow(u0, inv_alpha);
        const double t1 = truth.theta + side * std::pow(u1, inv_alpha);
        const auto g = [&](double x) { return f(x) * pdf(truth, x); };
        total += side > 0 ? adaptive_simpson(g, t0, t1, tol)
                          : adaptive_simpson(g, t1, t0, tol);
      }
    }
  }
  return total;
}

/// Relative regret of the threshold solved at theta + epsilon, evaluated
/// under the truth:
///   R = 1 - (mu0(S')/mu0(S*)) (P0(S')/P0(S*))
///         ((1-g) + g P0(S*)) / ((1-g) + g P0(S')),
/// with the tail ratio taken in log domain.
inline double perturbed_regret_inner(const DistSpec& truth, const Discount& disc,
                                     const OracleContext& ctx, double epsilon) {
  const DistSpec shifted(truth.alpha, truth.theta + epsilon);
  const double s_pert = solve_threshold(shifted, disc).value;
  const double log_p = log_tail(truth, s_pert);
  const double p = std::exp(log_p);
  const double mu = conditional_mean(truth, s_pert);
  const double g = disc.gamma;
  const double ratio = (mu / ctx.mu_star) * std::exp(log_p - ctx.log_p_star) *
                       ((1.0 - g) + g * ctx.p_star) / ((1.0 - g) + g * p);
  return 1.0 - ratio;
}

} // namespace detail

/// Deterministic regret of the policy tau*(theta + epsilon) under the truth.
inline RegretReport perturbed_regret(const DistSpec& truth, const Discount& disc,
                                     double epsilon) {
  if (!std::isfinite(truth.theta + epsilon))
    throw std::domain_error("perturbed_regret: theta + epsilon must be finite");
  const detail::OracleContext ctx(truth, disc);
  const double r = detail::perturbed_regret_inner(truth, disc, ctx, epsilon);
  return RegretReport{ctx.v_star, ctx.v_star * (1.0 - r), r, std::nullopt};
}

/// Monte Carlo regret of the N-sample plug-in policy. Each replication draws
/// an exploration batch, estimates theta by maximum likelihood, and evaluates
/// the induced perturbed policy analytically (same mean as simulating the
/// stopping phase, far less variance); the gamma^N exploration discount is
/// applied exactly. 95% normal CI.
inline RegretReport plugin_regret(const DistSpec& truth, const Discount& disc,
                                  long N, long reps, std::uint64_t seed,
                                  int threads = 0) {
  if (N < 1) throw std::domain_error("plugin_regret: N must be >= 1");
  if (reps < 1) throw std::domain_error("plugin_regret: reps must be >= 1");
  const detail::OracleContext ctx(truth, disc);
  std::vector<double> inner(static_cast<std::size_t>(reps));
  parallel_chunks(reps, 512, threads, [&](long begin, long end) {
    std::vector<double> values(static_cast<std::size_t>(N));
    for (long r = begin; r < end; ++r) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
      for (long i = 0; i < N; ++i) values[static_cast<std::size_t>(i)] = sample(truth, rng);
      const double eps_hat = mle_location(SampleBatch{values, truth.alpha}) - truth.theta;
      inner[static_cast<std::size_t>(r)] =
          detail::perturbed_regret_inner(truth, disc, ctx, eps_hat);
    }
  });
  double mean = 0.0;
  for (double x : inner) mean += x;
  mean /= static_cast<double>(reps);
  const double discount_n = std::pow(disc.gamma, static_cast<double>(N));
  const double regret = 1.0 - discount_n * (1.0 - mean);
  std::optional<double> ci;
  if (reps >= 2) {
    double ss = 0.0;
    for (double x : inner) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(reps - 1));
    ci = 1.96 * sd / std::sqrt(static_cast<double>(reps)) * discount_n;
  }
  return RegretReport{ctx.v_star, ctx.v_star * (1.0 - regret), regret, ci};
}

/// Deterministic N = 1 plug-in regret: the inner expectation integrates the
/// exact perturbed regret against the first observation's density by adaptive
/// quadrature (split at theta where the density has its cusp), then the
/// gamma^1 discount is applied.
inline RegretReport plugin_regret_quadrature(const DistSpec& truth,
                                             const Discount& disc) {
  const detail::OracleContext ctx(truth, disc);
  // Truncation at |x - theta| = 5 * 60^(1/alpha), i.e. u = 60 * 5^alpha.
  const double u_cap = 60.0 * std::pow(5.0, truth.alpha);
  double expectation;
  try {
    expectation = detail::expect_under_density(truth, u_cap, [&](double x) {
      return detail::perturbed_regret_inner(truth, disc, ctx, x - truth.theta);
    });
  } catch (const std::runtime_error&) {
    throw std::runtime_error("plugin_regret_quadrature: quadrature did not converge");
  }
  const double regret = 1.0 - disc.gamma * (1.0 - expectation);
  return RegretReport{ctx.v_star, ctx.v_star * (1.0 - regret), regret, std::nullopt};
}

} // namespace stoplab
