#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "stoplab/dist.hpp"
#include "stoplab/parallel.hpp"
#include "stoplab/rng.hpp"

namespace stoplab {

/// Observations assumed drawn from the family with known shape alpha.
struct SampleBatch {
  std::vector<double> values;
  double alpha;
};

namespace detail {

inline double neg_loss(const std::vector<double>& centered, double alpha, double c) {
  double acc = 0.0;
  for (double v : centered) acc -= std::pow(std::fabs(v - c), alpha);
  return acc;
}

/// Golden-section maximization of a unimodal objective on [lo, hi].
template <class F>
double golden_max(F&& f, double lo, double hi, double tol) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - invphi * (hi - lo);
  double x2 = lo + invphi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = f(x2);
    }
  }
  return 0.5 * (lo + hi);
}

} // namespace detail

/// Maximum-likelihood estimate of the location parameter with known shape.
/// alpha = 2 is the sample mean, alpha = 1 the lower sample median; for
/// alpha > 1 the concave objective is maximized by golden section over the
/// sample hull; for alpha < 1 the cusped objective is scanned on a 2048-point
/// grid plus all sample points, with local refinement, ties toward the
/// smaller location. All arithmetic is anchored at the first observation so
/// the estimate is exactly shift-equivariant whenever the shift is.
inline double mle_location(const SampleBatch& batch) {
  const auto& v = batch.values;
  if (v.empty()) throw std::domain_error("mle_location: empty batch");
  if (!(batch.alpha >= 0.5)) throw std::domain_error("mle_location: alpha must be >= 0.5");
  const std::size_t n = v.size();
  if (n == 1) return v[0];

  if (batch.alpha == 1.0) {
    std::vector<double> sorted(v);
    std::sort(sorted.begin(), sorted.end());
    return sorted[(n - 1) / 2];
  }

  const double anchor = v[0];
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = v[i] - anchor;

  if (batch.alpha == 2.0) {
    double acc = 0.0;
    for (double c : centered) acc += c;
    return anchor + acc / static_cast<double>(n);
  }

  const auto [lo_it, hi_it] = std::minmax_element(centered.begin(), centered.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (lo == hi) return anchor + lo;
  const auto obj = [&](double c) { return detail::neg_loss(centered, batch.alpha, c); };

  if (batch.alpha > 1.0) return anchor + detail::golden_max(obj, lo, hi, 1e-10);

  // alpha < 1: cusped local maxima at sample points plus possible smooth
  // interior maxima between them.
  std::vector<double> candidates(centered);
  constexpr int kGrid = 2048;
  std::vector<double> gv(kGrid);
  const double h = (hi - lo) / (kGrid - 1);
  for (int i = 0; i < kGrid; ++i) gv[i] = obj(lo + i * h);
  for (int i = 1; i + 1 < kGrid; ++i) {
    if (gv[i] >= gv[i - 1] && gv[i] >= gv[i + 1])
      candidates.push_back(detail::golden_max(obj, lo + (i - 1) * h, lo + (i + 1) * h, 1e-10));
  }
  std::sort(candidates.begin(), candidates.end());
  double best_c = candidates.front();
  double best_f = obj(best_c);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double f = obj(candidates[i]);
    if (f > best_f) {
      best_f = f;
      best_c = candidates[i];
    }
  }
  return anchor + best_c;
}

/// Empirical standard deviation of the MLE error over `reps` independent
/// batches of size N; replications run in parallel with per-replication
/// derived seeds, so the result does not depend on thread scheduling.
inline double estimator_dispersion(const DistSpec& d, long N, long reps,
                                   std::uint64_t seed, int threads = 0) {
  if (N < 1) throw std::domain_error("estimator_dispersion: N must be >= 1");
  if (reps < 100) throw std::domain_error("estimator_dispersion: reps must be >= 100");
  std::vector<double> errors(static_cast<std::size_t>(reps));
  parallel_chunks(reps, 256, threads, [&](long begin, long end) {
    std::vector<double> values(static_cast<std::size_t>(N));
    for (long r = begin; r < end; ++r) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
      for (long i = 0; i < N; ++i) values[static_cast<std::size_t>(i)] = sample(d, rng);
      errors[static_cast<std::size_t>(r)] =
          mle_location(SampleBatch{values, d.alpha}) - d.theta;
    }
  });
  double mean = 0.0;
  for (double e : errors) mean += e;
  mean /= static_cast<double>(reps);
  double ss = 0.0;
  for (double e : errors) ss += (e - mean) * (e - mean);
  return std::sqrt(ss / static_cast<double>(reps - 1));
}

} // namespace stoplab
