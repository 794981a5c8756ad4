#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "stoplab/dist.hpp"

namespace stoplab {

struct Discount {
  explicit Discount(double gamma_) : gamma(gamma_) {
    if (!(gamma > 0.0 && gamma < 1.0))
      throw std::domain_error("Discount: gamma must be in (0,1)");
  }
  double gamma;
  double effective_horizon() const { return 1.0 / (1.0 - gamma); }
  /// log(1/(1-gamma)).
  double log_horizon() const { return -std::log1p(-gamma); }
};

/// Solved Bellman threshold with solver diagnostics.
struct Threshold {
  double value;
  double residual;  // |gamma * int_S^inf P - (1-gamma) * S| at the solution
  int iterations;
};

namespace detail {

/// Residual of the reformulated Bellman equation,
///   r(S) = gamma * int_S^inf P dx - (1-gamma) * S,
/// strictly decreasing in S with the unique root S*.
inline double bellman_residual(const FamilyKernel& k, double theta, double gamma,
                               double S) {
  return gamma * k.integrated_tail_at(S - theta) - (1.0 - gamma) * S;
}

} // namespace detail

/// Solve S = gamma * E[max{X, S}] for the unique threshold S*.
/// Bracket from [0, max(theta,0) + (2L+10)^(1/alpha) + 1], doubling the upper
/// end until the residual changes sign, bisect, then polish with Newton steps
/// using r'(S) = -gamma * P(S) - (1-gamma).
inline Threshold solve_threshold(const DistSpec& d, const Discount& disc,
                                 double tol = 1e-10) {
  if (!(tol > 0.0)) throw std::domain_error("solve_threshold: tol must be > 0");
  const detail::FamilyKernel k(d.alpha);
  const double gamma = disc.gamma;
  const double L = disc.log_horizon();

  double lo = 0.0;
  double hi = std::max(d.theta, 0.0) + std::pow(2.0 * L + 10.0, 1.0 / d.alpha) + 1.0;
  int iters = 0;

  double r_hi = detail::bellman_residual(k, d.theta, gamma, hi);
  int doublings = 0;
  while (r_hi > 0.0) {
    if (++doublings > 60)
      throw std::runtime_error("solve_threshold: failed to bracket the root (alpha=" +
                               std::to_string(d.alpha) + ", gamma=" + std::to_string(gamma) + ")");
    lo = hi;
    hi *= 2.0;
    r_hi = detail::bellman_residual(k, d.theta, gamma, hi);
    ++iters;
  }

  // Bisection until the residual meets the tolerance (with the root actually
  // localized -- for gamma very close to 1 the residual is uniformly tiny to
  // the right of the root, so a residual test alone is not trustworthy) or
  // the interval collapses.
  double mid = 0.5 * (lo + hi);
  double r_mid = 0.0;
  for (int i = 0; i < 200; ++i) {
    mid = 0.5 * (lo + hi);
    r_mid = detail::bellman_residual(k, d.theta, gamma, mid);
    ++iters;
    const double scale = std::max(1.0, mid);
    if (std::fabs(r_mid) <= 0.25 * tol * scale && hi - lo <= 1e-3 * scale) break;
    if (hi - lo <= 1e-13 * scale) break;
    if (r_mid > 0.0)
      lo = mid;
    else
      hi = mid;
  }

  // Newton polish; r is convex decreasing, so these steps stay in bracket.
  double s = mid;
  for (int i = 0; i < 3; ++i) {
    const double t = s - d.theta;
    const double p = t >= 0.0 ? k.tail_above(t) : k.tail_below(-t);
    const double slope = -(gamma * p + (1.0 - gamma));
    const double r = detail::bellman_residual(k, d.theta, gamma, s);
    ++iters;
    const double step = r / slope;
    const double next = s - step;
    if (!(next > 0.0) || next == s) break;
    s = next;
    if (std::fabs(step) < 1e-16 * std::max(1.0, s)) break;
  }

  const double residual = std::fabs(detail::bellman_residual(k, d.theta, gamma, s));
  if (!(residual <= tol * std::max(1.0, s)))
    throw std::runtime_error("solve_threshold: did not converge to tolerance");
  return Threshold{s, residual, iters};
}

/// Backward-recursion oracle A_0 = 0, A_j = gamma * E[max{X, A_{j-1}}]
///                                        = gamma * (A_{j-1} + int P).
/// Runs the literal recursion; once the certified remaining movement
/// (step / (1-gamma+gamma*P(U)) with U a residual-sign-verified upper bracket
/// of S*) drops below 1e-11 * max(1, A), the sequence is numerically pinned
/// and A_k equals the current iterate to far below any caller tolerance.
inline double value_iteration(const DistSpec& d, const Discount& disc, long k) {
  if (k < 0) throw std::domain_error("value_iteration: k must be >= 0");
  const detail::FamilyKernel kern(d.alpha);
  const double gamma = disc.gamma;
  double a = 0.0;
  double certify_below = 0.0;  // retry certification only after step shrinks
  for (long j = 0; j < k; ++j) {
    const double next = gamma * (a + kern.integrated_tail_at(a - d.theta));
    const double step = next - a;
    if (step <= 0.0) return a;  // pinned at floating-point resolution
    if (j + 1 < k && step < 1e-6 * std::max(1.0, a)) {
      if (certify_below == 0.0 || step < certify_below) {
        const double ta = next - d.theta;
        const double p_here =
            ta >= 0.0 ? kern.tail_above(ta) : kern.tail_below(-ta);
        const double slope = 1.0 - gamma + gamma * p_here;
        const double u_try = next + 4.0 * step / slope;
        if (detail::bellman_residual(kern, d.theta, gamma, u_try) < 0.0) {
          const double tu = u_try - d.theta;
          const double p_u =
              tu >= 0.0 ? kern.tail_above(tu) : kern.tail_below(-tu);
          const double bound = step / (1.0 - gamma + gamma * p_u);
          if (bound <= 1e-11 * std::max(1.0, next)) return next;
        }
        certify_below = 0.25 * step;
      }
    }
    a = next;
  }
  return a;
}

/// S* ~ theta + (log 1/(1-gamma))^(1/alpha).
inline double asymptotic_threshold(const DistSpec& d, const Discount& disc) {
  return d.theta + std::pow(disc.log_horizon(), 1.0 / d.alpha);
}

/// Exact dS*/dtheta = P(S*) / (P(S*) + (1-gamma)/gamma); always in (0,1).
inline double threshold_sensitivity(const DistSpec& d, const Discount& disc) {
  const double s = solve_threshold(d, disc).value;
  const double p = std::exp(log_tail(d, s));
  return p / (p + (1.0 - disc.gamma) / disc.gamma);
}

/// N_critical = ((log 1/(1-gamma))^(1-1/alpha) / log log 1/(1-gamma))^2.
/// Defined for alpha > 1 and gamma > 1 - 1/e.
inline double critical_sample_size(double alpha, const Discount& disc) {
  if (!(alpha > 1.0))
    throw std::domain_error("critical_sample_size: alpha must be > 1");
  const double L = disc.log_horizon();
  const double ll = std::log(L);
  if (!(ll > 0.0))
    throw std::domain_error("critical_sample_size: requires log log(1/(1-gamma)) > 0");
  const double num = std::pow(L, 1.0 - 1.0 / alpha);
  return (num / ll) * (num / ll);
}

/// epsilon_critical = log log(1/(1-gamma)) / (alpha * (log 1/(1-gamma))^(1-1/alpha));
/// equals 1/(alpha * sqrt(N_critical)) identically.
inline double critical_perturbation(double alpha, const Discount& disc) {
  if (!(alpha >= 0.5))
    throw std::domain_error("critical_perturbation: alpha must be >= 0.5");
  const double L = disc.log_horizon();
  const double ll = std::log(L);
  if (!(ll > 0.0))
    throw std::domain_error("critical_perturbation: requires log log(1/(1-gamma)) > 0");
  return ll / (alpha * std::pow(L, 1.0 - 1.0 / alpha));
}

} // namespace stoplab
