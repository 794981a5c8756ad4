#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stoplab/bellman.hpp"
#include "stoplab/dist.hpp"
#include "stoplab/inference.hpp"
#include "stoplab/parallel.hpp"
#include "stoplab/policy.hpp"
#include "stoplab/rng.hpp"

namespace stoplab {

struct SimConfig {
  std::uint64_t master_seed = 1;
  long reps = 1000;
  long horizon_cap = 0;  // 0: auto, ceil(100 * effective horizon)
  int parallelism = 0;   // 0: hardware concurrency
};

/// Grid-level policy entry; `z` and `auto_n_log_sq` are resolved per cell
/// (epsilon = z * sigma(alpha), N = ceil(log(1/(1-gamma))^2)).
struct GridPolicy {
  PolicySpec spec;
  std::optional<double> z;
  bool auto_n_log_sq = false;
};

struct ExperimentGrid {
  std::vector<double> alphas;
  std::vector<double> thetas;
  std::vector<double> gammas;
  std::vector<GridPolicy> policies;
  std::vector<double> perturbation_multipliers;  // z values, units of sigma
};

struct EpisodeResult {
  long tau;
  double reward;
  bool truncated;
};

inline long resolve_horizon_cap(const SimConfig& config, const Discount& disc) {
  if (config.horizon_cap > 0) return config.horizon_cap;
  return static_cast<long>(std::ceil(100.0 * disc.effective_horizon()));
}

/// One episode of the fixed-threshold rule: stop at the first n > skip with
/// X_n >= S; reward gamma^tau * X_tau, or zero if the cap is hit.
inline EpisodeResult run_threshold_episode(const DistSpec& truth, double S,
                                           const Discount& disc, long horizon_cap,
                                           Rng& rng, long skip = 0) {
  for (long n = skip + 1; n <= horizon_cap; ++n) {
    const double x = sample(truth, rng);
    if (x >= S)
      return EpisodeResult{n, std::pow(disc.gamma, static_cast<double>(n)) * x, false};
  }
  return EpisodeResult{horizon_cap, 0.0, true};
}

/// One policy episode. Oracle and Perturbed stop at the first draw at or above
/// their solved threshold; PlugIn skips the first N draws, estimates theta by
/// maximum likelihood from them, then runs the threshold rule from n = N+1.
inline EpisodeResult run_episode(const DistSpec& truth, const PolicySpec& policy,
                                 const Discount& disc, const SimConfig& config,
                                 Rng& rng) {
  const long cap = resolve_horizon_cap(config, disc);
  switch (policy.kind) {
    case PolicySpec::Kind::Oracle:
      return run_threshold_episode(truth, solve_threshold(truth, disc).value, disc,
                                   cap, rng);
    case PolicySpec::Kind::Perturbed: {
      const DistSpec shifted(truth.alpha, truth.theta + policy.epsilon);
      return run_threshold_episode(truth, solve_threshold(shifted, disc).value, disc,
                                   cap, rng);
    }
    case PolicySpec::Kind::PlugIn: {
      if (policy.n >= cap) return EpisodeResult{cap, 0.0, true};
      std::vector<double> explored(static_cast<std::size_t>(policy.n));
      for (long i = 0; i < policy.n; ++i)
        explored[static_cast<std::size_t>(i)] = sample(truth, rng);
      const double theta_hat = mle_location(SampleBatch{explored, truth.alpha});
      const DistSpec believed(truth.alpha, theta_hat);
      return run_threshold_episode(truth, solve_threshold(believed, disc).value, disc,
                                   cap, rng, policy.n);
    }
  }
  throw std::logic_error("run_episode: unknown policy kind");
}

struct ExperimentRow {
  double alpha = 0, theta = 0, gamma = 0, effective_horizon = 0;
  std::string policy;
  std::optional<double> epsilon_or_n;
  std::optional<double> v_star, v_policy, relative_regret, ci_halfwidth;
  std::optional<double> mean_tau, truncated_fraction;
  std::string error;
};

struct ExperimentTable {
  std::vector<ExperimentRow> rows;
};

namespace detail {

struct CellStats {
  double mean_reward = 0, sd_reward = 0, mean_tau = 0, truncated_fraction = 0;
};

/// Simulates config.reps episodes of one grid cell. Episode streams derive
/// from (master_seed, cell_index, episode_index); partial sums are kept per
/// fixed-size chunk and combined in chunk order, so the result is identical
/// for every parallelism setting.
inline CellStats simulate_cell(const DistSpec& truth, const PolicySpec& policy,
                               const Discount& disc, const SimConfig& config,
                               std::uint64_t cell_index) {
  const long reps = config.reps;
  constexpr long kChunk = 1024;
  const long nchunks = (reps + kChunk - 1) / kChunk;
  std::vector<double> sum_r(nchunks, 0.0), sum_r2(nchunks, 0.0), sum_tau(nchunks, 0.0);
  std::vector<long> n_trunc(nchunks, 0);

  // Fixed thresholds are resolved once; plug-in episodes solve per draw.
  std::optional<double> fixed_threshold;
  if (policy.kind == PolicySpec::Kind::Oracle) {
    fixed_threshold = solve_threshold(truth, disc).value;
  } else if (policy.kind == PolicySpec::Kind::Perturbed) {
    const DistSpec shifted(truth.alpha, truth.theta + policy.epsilon);
    fixed_threshold = solve_threshold(shifted, disc).value;
  }
  const long cap = resolve_horizon_cap(config, disc);

  parallel_chunks(reps, kChunk, config.parallelism, [&](long begin, long end) {
    const long c = begin / kChunk;
    double sr = 0, sr2 = 0, st = 0;
    long tr = 0;
    for (long e = begin; e < end; ++e) {
      Rng rng(derive_seed(config.master_seed, cell_index, static_cast<std::uint64_t>(e)));
      EpisodeResult res{};
      if (fixed_threshold) {
        res = run_threshold_episode(truth, *fixed_threshold, disc, cap, rng);
      } else {
        res = run_episode(truth, policy, disc, config, rng);
      }
      sr += res.reward;
      sr2 += res.reward * res.reward;
      st += static_cast<double>(res.tau);
      if (res.truncated) ++tr;
    }
    sum_r[c] = sr;
    sum_r2[c] = sr2;
    sum_tau[c] = st;
    n_trunc[c] = tr;
  });

  double tot_r = 0, tot_r2 = 0, tot_tau = 0;
  long tot_trunc = 0;
  for (long c = 0; c < nchunks; ++c) {
    tot_r += sum_r[c];
    tot_r2 += sum_r2[c];
    tot_tau += sum_tau[c];
    tot_trunc += n_trunc[c];
  }
  CellStats out;
  const double n = static_cast<double>(reps);
  out.mean_reward = tot_r / n;
  const double var = std::max(0.0, (tot_r2 - n * out.mean_reward * out.mean_reward) /
                                       std::max(1.0, n - 1.0));
  out.sd_reward = std::sqrt(var);
  out.mean_tau = tot_tau / n;
  out.truncated_fraction = static_cast<double>(tot_trunc) / n;
  return out;
}

inline PolicySpec resolve_policy(const GridPolicy& gp, double alpha,
                                 const Discount& disc) {
  PolicySpec spec = gp.spec;
  if (spec.kind == PolicySpec::Kind::Perturbed && gp.z)
    spec.epsilon = *gp.z * std::sqrt(variance(alpha));
  if (spec.kind == PolicySpec::Kind::PlugIn && gp.auto_n_log_sq) {
    const double L = disc.log_horizon();
    spec.n = std::max<long>(1, static_cast<long>(std::ceil(L * L)));
  }
  return spec;
}

} // namespace detail

/// One row per grid cell; per-row failures land in the row's error column
/// instead of aborting the sweep. Deterministic given master_seed.
inline ExperimentTable run_experiment(const ExperimentGrid& grid,
                                      const SimConfig& config) {
  ExperimentTable table;
  std::uint64_t cell_index = 0;
  for (double alpha : grid.alphas) {
    for (double theta : grid.thetas) {
      for (double gamma : grid.gammas) {
        // Expanded policy list: explicit entries, then sigma-multiplier
        // perturbations.
        std::vector<GridPolicy> entries = grid.policies;
        for (double z : grid.perturbation_multipliers)
          entries.push_back(GridPolicy{PolicySpec::perturbed(0.0), z, false});

        for (const GridPolicy& entry : entries) {
          ExperimentRow row;
          row.alpha = alpha;
          row.theta = theta;
          row.gamma = gamma;
          const std::uint64_t this_cell = cell_index++;
          try {
            const DistSpec truth(alpha, theta);
            const Discount disc(gamma);
            row.effective_horizon = disc.effective_horizon();
            const PolicySpec spec = detail::resolve_policy(entry, alpha, disc);
            switch (spec.kind) {
              case PolicySpec::Kind::Oracle:
                row.policy = "oracle";
                break;
              case PolicySpec::Kind::Perturbed:
                row.policy = "perturbed";
                row.epsilon_or_n = spec.epsilon;
                break;
              case PolicySpec::Kind::PlugIn:
                row.policy = "plugin";
                row.epsilon_or_n = static_cast<double>(spec.n);
                break;
            }
            const double v_star = oracle_value(truth, disc);
            const auto stats = detail::simulate_cell(truth, spec, disc, config, this_cell);
            row.v_star = v_star;
            row.v_policy = stats.mean_reward;
            row.relative_regret = 1.0 - stats.mean_reward / v_star;
            row.ci_halfwidth =
                1.96 * stats.sd_reward / std::sqrt(static_cast<double>(config.reps));
            row.mean_tau = stats.mean_tau;
            row.truncated_fraction = stats.truncated_fraction;
          } catch (const std::exception& ex) {
            row.error = ex.what();
          }
          table.rows.push_back(std::move(row));
        }
      }
    }
  }
  return table;
}

struct PhaseRow {
  double gamma = 0;
  double multiplier = 0;
  std::optional<double> n;                // ceil(m * N_critical)
  std::optional<double> plugin_regret_v;  // Monte Carlo plug-in regret at n
  std::optional<double> plugin_ci;
  std::optional<double> epsilon;          // m * epsilon_critical
  std::optional<double> perturbed_regret_v;  // exact formula
  std::optional<double> scaled_stop_time;    // (1-gamma) * E[tau] at epsilon
  std::string error;
};

struct PhaseTable {
  std::vector<PhaseRow> rows;
};

/// Regret and stopping-time scalings against the critical magnitudes: for
/// each gamma and multiplier m, plug-in regret at N = ceil(m * N_critical)
/// (alpha > 1 only) and exact perturbed regret plus (1-gamma) E[tau] at
/// epsilon = m * epsilon_critical. Domain errors from the critical scalings
/// are reported per-row.
inline PhaseTable phase_report(double alpha, double theta,
                               const std::vector<double>& gammas,
                               const std::vector<double>& multipliers,
                               const SimConfig& config) {
  PhaseTable table;
  const DistSpec truth(alpha, theta);
  std::uint64_t row_index = 0;
  for (double gamma : gammas) {
    for (double m : multipliers) {
      PhaseRow row;
      row.gamma = gamma;
      row.multiplier = m;
      const std::uint64_t this_row = row_index++;
      std::string errors;
      try {
        const Discount disc(gamma);
        try {
          const double n_crit = critical_sample_size(alpha, disc);
          const long n = std::max<long>(1, static_cast<long>(std::ceil(m * n_crit)));
          row.n = static_cast<double>(n);
          const RegretReport rep =
              plugin_regret(truth, disc, n, config.reps,
                            derive_seed(config.master_seed, this_row), config.parallelism);
          row.plugin_regret_v = rep.relative_regret;
          row.plugin_ci = rep.ci_halfwidth;
        } catch (const std::domain_error& ex) {
          errors += ex.what();
        }
        const double eps_crit = critical_perturbation(alpha, disc);
        const double eps = m * eps_crit;
        row.epsilon = eps;
        row.perturbed_regret_v = perturbed_regret(truth, disc, eps).relative_regret;
        const DistSpec shifted(alpha, theta + eps);
        const double s_pert = solve_threshold(shifted, disc).value;
        row.scaled_stop_time = (1.0 - gamma) * expected_stop_time(truth, s_pert);
      } catch (const std::exception& ex) {
        if (!errors.empty()) errors += "; ";
        errors += ex.what();
      }
      row.error = errors;
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

} // namespace stoplab
