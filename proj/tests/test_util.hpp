#pragma once

// Independent oracles for the test suites: plain quadrature of the raw
// density (no incomplete-gamma machinery) and a bisection solver for the
// alpha = 1 closed-form Bellman equation.

#include <cmath>
#include <functional>

#include "stoplab/dist.hpp"
#include "stoplab/quadrature.hpp"

namespace testutil {

/// e^{x} * int_S^inf weight(t) * exp(-(t-theta)^alpha) dt for S >= theta,
/// where x = (S-theta)^alpha. Integrated piecewise between knots with equal
/// exponential decay so each adaptive call sees an O(1)-scaled integrand;
/// a single Simpson pass over the whole range can miss the concentrated mass.
/// For alpha < 1 the density has a cusp at theta, so those shapes integrate
/// in v = (t-theta)^alpha space where the transformed integrand is smooth.
template <class W>
double scaled_upper_integral(const stoplab::DistSpec& d, double S, W&& weight) {
  const double x = std::pow(S - d.theta, d.alpha);
  const double inv_alpha = 1.0 / d.alpha;
  const bool v_space = d.alpha < 1.0;
  const auto f_t = [&](double t) {
    return weight(t) * std::exp(x - std::pow(t - d.theta, d.alpha));
  };
  const auto f_v = [&](double v) {
    return weight(d.theta + std::pow(v, inv_alpha)) * std::exp(x - v) * inv_alpha *
           std::pow(v, inv_alpha - 1.0);
  };
  double total = 0.0;
  for (int j = 0; j < 24; ++j) {
    const double u0 = x + 5.0 * j;
    const double u1 = x + 5.0 * (j + 1);
    const double t0 = j == 0 ? S : d.theta + std::pow(u0, inv_alpha);
    const double t1 = d.theta + std::pow(u1, inv_alpha);
    const double wscale = 1.0 + std::fabs(weight(t0)) + std::fabs(weight(t1));
    const double width = v_space ? (u1 - u0) : (t1 - t0);
    const double tol = 1e-13 * std::exp(-5.0 * j) * (1.0 + width) * wscale;
    if (v_space) {
      if (j == 0 && u0 == 0.0) {
        // v = r^4 makes the v^{1/alpha - 1} endpoint factor C^4-smooth.
        const auto f_r = [&](double r) {
          const double v = r * r * r * r;
          return f_v(v) * 4.0 * r * r * r;
        };
        total += stoplab::adaptive_simpson(f_r, 0.0, std::pow(u1, 0.25), tol);
      } else {
        total += stoplab::adaptive_simpson(f_v, u0, u1, tol);
      }
    } else {
      total += stoplab::adaptive_simpson(f_t, t0, t1, tol);
    }
  }
  return total;
}

/// P_theta(S) by quadrature of the raw density.
inline double tail_quad(const stoplab::DistSpec& d, double S) {
  const double c0 = stoplab::normalizing_constant(d.alpha);
  if (S >= d.theta) {
    const double x = std::pow(S - d.theta, d.alpha);
    return c0 * std::exp(-x) *
           scaled_upper_integral(d, S, [](double) { return 1.0; });
  }
  const stoplab::DistSpec mirrored(d.alpha, 0.0);
  return 1.0 - tail_quad(mirrored, d.theta - S);
}

/// mu_theta(S) - S by quadrature of the raw density.
inline double mean_excess_quad(const stoplab::DistSpec& d, double S) {
  const double c0 = stoplab::normalizing_constant(d.alpha);
  const double start = std::max(S, d.theta);
  const double x = std::pow(start - d.theta, d.alpha);
  double num = c0 * std::exp(-x) *
               scaled_upper_integral(d, start, [&](double t) { return t - S; });
  if (S < d.theta) {
    const double inv_alpha = 1.0 / d.alpha;
    if (d.alpha < 1.0) {
      // v = (theta - t)^alpha removes the cusp at theta for heavy shapes,
      // and v = r^4 smooths the endpoint factor.
      const auto f = [&](double r) {
        const double v = r * r * r * r;
        const double t = d.theta - std::pow(v, inv_alpha);
        return c0 * (t - S) * std::exp(-v) * inv_alpha *
               std::pow(v, inv_alpha - 1.0) * 4.0 * r * r * r;
      };
      const double v_end = std::pow(d.theta - S, d.alpha);
      num += stoplab::adaptive_simpson(f, 0.0, std::pow(v_end, 0.25),
                                       1e-14 * (1.0 + d.theta - S));
    } else {
      const auto f = [&](double t) {
        return c0 * (t - S) * std::exp(-std::pow(d.theta - t, d.alpha));
      };
      num += stoplab::adaptive_simpson(f, S, d.theta, 1e-14 * (1.0 + d.theta - S));
    }
  }
  return num / tail_quad(d, S);
}

/// int_S^inf P dx by double quadrature (tail itself by quadrature).
inline double integrated_tail_quad(const stoplab::DistSpec& d, double S) {
  return tail_quad(d, S) * mean_excess_quad(d, S);
}

/// Full-mass quadrature of the density over [theta - R, theta + R] with
/// R = 10 * 60^(1/alpha), by symmetry of the integrand.
inline double normalization_quad(double alpha) {
  const stoplab::DistSpec d(alpha, 0.0);
  return 2.0 * tail_quad(d, 0.0);
}

/// Independent bisection for the alpha = 1, theta = 0 Bellman threshold:
/// S e^S = gamma/(2(1-gamma)) on the closed-form exponential tail.
inline double laplace_threshold_bisect(double gamma) {
  const double target = 0.5 * gamma / (1.0 - gamma);
  double lo = 0.0, hi = 1.0;
  while (hi * std::exp(hi) < target) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid * std::exp(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Asymptotic 1% critical value of the one-sample Kolmogorov-Smirnov statistic.
inline double ks_critical_1pct(std::size_t n) {
  return 1.62762 / std::sqrt(static_cast<double>(n));
}

} // namespace testutil
