#pragma once

#include <cmath>
#include <stdexcept>

#include "stoplab/rng.hpp"
#include "stoplab/special.hpp"

namespace stoplab {

/// One member F_theta of the exponential-decay location family with density
/// C0 * exp(-|x - theta|^alpha).
struct DistSpec {
  DistSpec(double alpha_, double theta_) : alpha(alpha_), theta(theta_) {
    if (!(alpha >= 0.5)) throw std::domain_error("DistSpec: alpha must be >= 0.5");
    if (!std::isfinite(theta)) throw std::domain_error("DistSpec: theta must be finite");
  }
  double alpha;
  double theta;
};

struct TailBracket {
  double lower;
  double upper;
};

namespace detail {

/// Per-shape constants and tail primitives. Everything is expressed in the
/// shifted coordinate T = S - theta; with s1 = 1/alpha, s2 = 2/alpha and
/// x = T^alpha the identities are
///   P(theta + T)              = Q(s1, x) / 2
///   mu(theta + T) - (theta+T) = Gamma(s2,x)/Gamma(s1,x) - T
///   int_S^inf P               = P * (mu - S)
/// Hot loops (value iteration, plug-in replications) construct one kernel
/// and reuse it.
struct FamilyKernel {
  explicit FamilyKernel(double alpha_)
      : alpha(alpha_),
        s1(1.0 / alpha_),
        s2(2.0 / alpha_),
        lg_s1(lgamma_pos(1.0 / alpha_)),
        lg_s2(lgamma_pos(2.0 / alpha_)),
        gamma_ratio(std::exp(lgamma_pos(2.0 / alpha_) - lgamma_pos(1.0 / alpha_))),
        c0(0.5 * alpha_ * std::exp(-lgamma_pos(1.0 / alpha_))) {}

  double alpha, s1, s2;
  double lg_s1, lg_s2;
  double gamma_ratio;  // Gamma(s2)/Gamma(s1)
  double c0;           // normalization constant C0

  double tail_above(double t) const {
    return 0.5 * upper_gamma_q(s1, std::pow(t, alpha));
  }

  double log_tail_above(double t) const {
    const double x = std::pow(t, alpha);
    return -M_LN2 + log_upper_gamma(s1, x) - lg_s1;
  }

  double tail_below(double td) const {
    return 1.0 - 0.5 * upper_gamma_q(s1, std::pow(td, alpha));
  }

  double log_tail_below(double td) const {
    return std::log1p(-0.5 * upper_gamma_q(s1, std::pow(td, alpha)));
  }

  /// mu(theta+T) - (theta+T) for T >= 0.
  double excess_above(double t) const {
    const double x = std::pow(t, alpha);
    if (x == 0.0) return gamma_ratio;
    if (x < s2 + 1.0) {
      const double q1 = upper_gamma_q(s1, x);
      const double q2 = upper_gamma_q(s2, x);
      return gamma_ratio * (q2 / q1) - t;
    }
    const double h1 = upper_gamma_h(s1, x);
    const double h2 = upper_gamma_h(s2, x);
    return t * (h2 / h1 - 1.0);
  }

  /// mu(S) - S for S = theta - Td below the center, Td > 0.
  double excess_below(double td) const {
    const double x = std::pow(td, alpha);
    const double q1 = upper_gamma_q(s1, x);
    const double p = 1.0 - 0.5 * q1;
    const double wing = 0.5 * gamma_ratio * upper_gamma_q(s2, x);
    return td + wing / p;
  }

  /// Tail and mean excess at S = theta + T in one pass (shared x).
  void tail_excess_above(double t, double& tail_out, double& excess_out) const {
    const double x = std::pow(t, alpha);
    if (x == 0.0) {
      tail_out = 0.5;
      excess_out = gamma_ratio;
      return;
    }
    if (x < s2 + 1.0) {
      const double q1 = upper_gamma_q(s1, x);
      const double q2 = upper_gamma_q(s2, x);
      tail_out = 0.5 * q1;
      excess_out = gamma_ratio * (q2 / q1) - t;
      return;
    }
    const double h1 = upper_gamma_h(s1, x);
    const double h2 = upper_gamma_h(s2, x);
    tail_out = 0.5 * upper_gamma_q(s1, x);
    excess_out = t * (h2 / h1 - 1.0);
  }

  /// int_S^inf P dx at S = theta + T (any sign of T), plain domain.
  double integrated_tail_at(double t) const {
    if (t >= 0.0) {
      double tl, me;
      tail_excess_above(t, tl, me);
      return tl * me;
    }
    return tail_below(-t) * excess_below(-t);
  }
};

}  // namespace detail

/// C0 = 1 / (2 Gamma(1 + 1/alpha)).
inline double normalizing_constant(double alpha) {
  if (!(alpha >= 0.5)) throw std::domain_error("normalizing_constant: alpha must be >= 0.5");
  return 0.5 * alpha * std::exp(-detail::lgamma_pos(1.0 / alpha));
}

inline double log_pdf(const DistSpec& d, double x) {
  return std::log(normalizing_constant(d.alpha)) - std::pow(std::fabs(x - d.theta), d.alpha);
}

inline double pdf(const DistSpec& d, double x) {
  return normalizing_constant(d.alpha) * std::exp(-std::pow(std::fabs(x - d.theta), d.alpha));
}

/// log P_theta(S), accurate in the log even when the tail underflows.
inline double log_tail(const DistSpec& d, double S) {
  const detail::FamilyKernel k(d.alpha);
  const double t = S - d.theta;
  return t >= 0.0 ? k.log_tail_above(t) : k.log_tail_below(-t);
}

inline double tail(const DistSpec& d, double S) {
  const detail::FamilyKernel k(d.alpha);
  const double t = S - d.theta;
  return t >= 0.0 ? k.tail_above(t) : k.tail_below(-t);
}

/// Two-sided bracket on P_theta(S); requires S > theta + 1. For
/// alpha = 1 the correction vanishes and both bounds equal the exact tail.
inline TailBracket tail_bracket(const DistSpec& d, double S) {
  const double t = S - d.theta;
  if (!(t > 1.0)) throw std::domain_error("tail_bracket: requires S > theta + 1");
  const double a = d.alpha;
  const double c0 = normalizing_constant(a);
  const double e = c0 * std::exp(-std::pow(t, a));
  const double main_term = 1.0 / (a * std::pow(t, a - 1.0));
  const double corr = (a - 1.0) / (a * a * std::pow(t, 2.0 * a - 1.0));
  if (a >= 1.0) return TailBracket{e * (main_term - corr), e * main_term};
  return TailBracket{e * main_term, e * (main_term - corr)};  // corr < 0 here
}

/// mu_theta(S) - S, the mean excess above S; positive for all finite S.
inline double mean_excess(const DistSpec& d, double S) {
  const detail::FamilyKernel k(d.alpha);
  const double t = S - d.theta;
  return t >= 0.0 ? k.excess_above(t) : k.excess_below(-t);
}

/// mu_theta(S) = E[X | X > S].
inline double conditional_mean(const DistSpec& d, double S) {
  return S + mean_excess(d, S);
}

/// Hazard rate f/P, assembled from log-domain pieces.
inline double hazard(const DistSpec& d, double S) {
  return std::exp(log_pdf(d, S) - log_tail(d, S));
}

/// g_theta(S) = P(S) / int_S^inf P = 1 / (mu(S) - S).
inline double g_value(const DistSpec& d, double S) {
  return 1.0 / mean_excess(d, S);
}

/// int_S^inf P_theta(x) dx = P(S) * (mu(S) - S).
inline double integrated_tail(const DistSpec& d, double S) {
  const detail::FamilyKernel k(d.alpha);
  return k.integrated_tail_at(S - d.theta);
}

inline double log_integrated_tail(const DistSpec& d, double S) {
  return log_tail(d, S) + std::log(mean_excess(d, S));
}

/// log P(S) - log P(S + delta), delta >= 0.
inline double tail_log_ratio(const DistSpec& d, double S, double delta) {
  if (!(delta >= 0.0)) throw std::domain_error("tail_log_ratio: delta must be >= 0");
  return log_tail(d, S) - log_tail(d, S + delta);
}

/// Var(X) = Gamma(3/alpha) / Gamma(1/alpha); independent of theta.
inline double variance(double alpha) {
  if (!(alpha >= 0.5)) throw std::domain_error("variance: alpha must be >= 0.5");
  return std::exp(detail::lgamma_pos(3.0 / alpha) - detail::lgamma_pos(1.0 / alpha));
}

/// Draw X = theta + B * T^(1/alpha) with B a fair sign and T ~ Gamma(1/alpha, 1);
/// the marginal density is exactly pdf().
inline double sample(const DistSpec& d, Rng& rng) {
  const double t = rng.next_gamma(1.0 / d.alpha);
  const double mag = std::pow(t, 1.0 / d.alpha);
  return d.theta + (rng.next_bool() ? mag : -mag);
}

} // namespace stoplab
