#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "stoplab/policy.hpp"
#include "test_util.hpp"

using stoplab::DistSpec;
using stoplab::Discount;
using Catch::Approx;

namespace {

void check_report_consistency(const stoplab::RegretReport& rep) {
  CHECK(std::fabs(rep.relative_regret - (1.0 - rep.v_policy / rep.v_star)) <= 1e-12);
  CHECK(rep.relative_regret <= 1.0 + 1e-12);
}

} // namespace

TEST_CASE("policy spec validation") {
  CHECK_THROWS_AS(stoplab::PolicySpec::plug_in(0), std::domain_error);
  CHECK(stoplab::PolicySpec::plug_in(1).n == 1);
  CHECK(stoplab::PolicySpec::perturbed(-0.5).epsilon == -0.5);
}

TEST_CASE("policy value limits and fixed point") {
  SECTION("stop-immediately limit gives gamma * theta") {
    CHECK(stoplab::policy_value(DistSpec(1, 10), Discount(0.9), 10.0 - 40.0) ==
          Approx(0.9 * 10.0).margin(1e-9));
    CHECK(stoplab::policy_value(DistSpec(2, 10), Discount(0.9), 10.0 - 40.0) ==
          Approx(0.9 * 10.0).margin(1e-12));
    CHECK(stoplab::policy_value(DistSpec(0.5, 10), Discount(0.9), 10.0 - 900.0) ==
          Approx(0.9 * 10.0).margin(1e-6));
  }
  SECTION("V(S*) = S*") {
    for (double alpha : {0.5, 1.0, 2.0}) {
      for (double gamma : {0.5, 0.9, 0.99}) {
        const DistSpec d(alpha, 2.0);
        const double s = stoplab::solve_threshold(d, Discount(gamma)).value;
        INFO("alpha=" << alpha << " gamma=" << gamma);
        CHECK(stoplab::policy_value(d, Discount(gamma), s) == Approx(s).epsilon(1e-10));
      }
    }
    const double w = testutil::laplace_threshold_bisect(0.5);
    CHECK(stoplab::policy_value(DistSpec(1, 0), Discount(0.5), w) ==
          Approx(w).epsilon(1e-9));
  }
}

TEST_CASE("oracle value") {
  CHECK(stoplab::oracle_value(DistSpec(1, 0), Discount(0.9)) ==
        Approx(testutil::laplace_threshold_bisect(0.9)).epsilon(1e-9));
  const DistSpec d(2, 5);
  const Discount disc(0.99);
  const double s = stoplab::solve_threshold(d, disc).value;
  CHECK(stoplab::oracle_value(d, disc) == Approx(s).margin(1e-9));
  for (double scale : {0.5, 0.9, 1.1, 2.0}) {
    CHECK(stoplab::oracle_value(d, disc) >=
          stoplab::policy_value(d, disc, s * scale) - 1e-12);
  }
}

TEST_CASE("expected stop time") {
  CHECK(stoplab::expected_stop_time(DistSpec(1.5, 3), 3.0) == Approx(2.0).margin(1e-10));
  CHECK(stoplab::expected_stop_time(DistSpec(1, 0), 2.0) ==
        Approx(2.0 * std::exp(2.0)).epsilon(1e-12));
}

TEST_CASE("perturbed regret basics") {
  SECTION("zero perturbation is exactly zero regret") {
    const auto rep = stoplab::perturbed_regret(DistSpec(2, 3), Discount(0.99), 0.0);
    CHECK(rep.relative_regret == 0.0);
    CHECK_FALSE(rep.ci_halfwidth.has_value());
    check_report_consistency(rep);
  }
  SECTION("overestimation hurts more than underestimation") {
    const double sigma = std::sqrt(stoplab::variance(2.0));
    const auto up = stoplab::perturbed_regret(DistSpec(2, 0), Discount(0.999), sigma);
    const auto down = stoplab::perturbed_regret(DistSpec(2, 0), Discount(0.999), -sigma);
    CHECK(up.relative_regret > down.relative_regret);
    check_report_consistency(up);
    check_report_consistency(down);
  }
  SECTION("underestimation robustness") {
    const auto rep = stoplab::perturbed_regret(DistSpec(1, 0), Discount(0.99), -0.5);
    CHECK(rep.relative_regret < 0.2);
    CHECK(rep.relative_regret >= 0.0);
  }
}

TEST_CASE("perturbed regret grid properties") {
  for (double alpha : {0.5, 1.0, 2.0}) {
    const double sigma = std::sqrt(stoplab::variance(alpha));
    for (double theta : {0.0, 10.0}) {
      for (double gamma : {0.99, 0.999}) {
        const DistSpec d(alpha, theta);
        const Discount disc(gamma);
        double prev_pos = -1e-12;
        for (double z : {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0}) {
          const auto rep = stoplab::perturbed_regret(d, disc, z * sigma);
          INFO("alpha=" << alpha << " theta=" << theta << " gamma=" << gamma << " z=" << z);
          CHECK(rep.relative_regret >= -1e-12);
          check_report_consistency(rep);
          if (z >= 0.0) {
            CHECK(rep.relative_regret >= prev_pos - 1e-12);
            prev_pos = rep.relative_regret;
          }
        }
        // The overestimation asymmetry concerns the light-tailed members; at
        // alpha = 1/2 the curve is nearly symmetric.
        if (alpha >= 1.0) {
          for (double z : {0.5, 1.0, 2.0}) {
            const auto up = stoplab::perturbed_regret(d, disc, z * sigma);
            const auto down = stoplab::perturbed_regret(d, disc, -z * sigma);
            INFO("alpha=" << alpha << " theta=" << theta << " gamma=" << gamma << " z=" << z);
            CHECK(up.relative_regret > down.relative_regret);
          }
        }
      }
    }
  }
}

TEST_CASE("overestimation phase transition across the horizon sweep") {
  const DistSpec d(2, 0);
  std::vector<double> at_half, at_double, scaled_stop;
  for (double gamma : {1.0 - 1e-2, 1.0 - 1e-4, 1.0 - 1e-6}) {
    const Discount disc(gamma);
    const double eps_c = stoplab::critical_perturbation(2.0, disc);
    at_half.push_back(stoplab::perturbed_regret(d, disc, 0.5 * eps_c).relative_regret);
    at_double.push_back(stoplab::perturbed_regret(d, disc, 2.0 * eps_c).relative_regret);
    const double s_pert =
        stoplab::solve_threshold(DistSpec(2, 2.0 * eps_c), disc).value;
    scaled_stop.push_back((1.0 - gamma) * stoplab::expected_stop_time(d, s_pert));
  }
  for (std::size_t i = 0; i < 3; ++i) CHECK(at_double[i] > at_half[i]);
  CHECK(at_double[0] <= at_double[1]);
  CHECK(at_double[1] <= at_double[2]);
  CHECK(at_double[2] > 0.75);
  // The sub-critical branch is not monotone at these horizons (it peaks near
  // 1-gamma ~ 1e-8 before its slow decline toward zero; cross-checked against
  // episode simulation), so assert only that it stays small while the
  // super-critical branch climbs.
  for (double r : at_half) CHECK(r < 0.05);
  CHECK(scaled_stop[0] < scaled_stop[1]);
  CHECK(scaled_stop[1] < scaled_stop[2]);
}

TEST_CASE("stopping mass at the oracle threshold dominates 1-gamma") {
  for (double alpha : {0.5, 1.0, 2.0}) {
    const DistSpec d(alpha, 0.0);
    double prev = 0.0;
    for (double gamma : {1.0 - 1e-2, 1.0 - 1e-4, 1.0 - 1e-6}) {
      const Discount disc(gamma);
      const double s = stoplab::solve_threshold(d, disc).value;
      const double scaled = std::exp(stoplab::log_tail(d, s)) * disc.effective_horizon();
      INFO("alpha=" << alpha << " gamma=" << gamma);
      CHECK(scaled > prev);
      prev = scaled;
    }
  }
}

TEST_CASE("phase-transition dichotomy in the stopping mass") {
  // Underestimation keeps P0(S')/(1-gamma) exploding and regret on a falling
  // course; doubled-critical overestimation starves it and regret climbs
  // toward 1. The underestimation regret is not stepwise monotone at these
  // horizons, so its direction is taken endpoint to endpoint.
  const DistSpec d(2, 0);
  std::vector<double> mass_under, mass_over, r_under, r_over;
  for (double gamma : {1.0 - 1e-2, 1.0 - 1e-4, 1.0 - 1e-6}) {
    const Discount disc(gamma);
    const double eps_c = stoplab::critical_perturbation(2.0, disc);
    const double s_under = stoplab::solve_threshold(DistSpec(2, -0.5), disc).value;
    const double s_over =
        stoplab::solve_threshold(DistSpec(2, 2.0 * eps_c), disc).value;
    mass_under.push_back(std::exp(stoplab::log_tail(d, s_under)) * disc.effective_horizon());
    mass_over.push_back(std::exp(stoplab::log_tail(d, s_over)) * disc.effective_horizon());
    r_under.push_back(stoplab::perturbed_regret(d, disc, -0.5).relative_regret);
    r_over.push_back(stoplab::perturbed_regret(d, disc, 2.0 * eps_c).relative_regret);
  }
  for (std::size_t i = 1; i < 3; ++i) {
    CHECK(mass_under[i] > mass_under[i - 1]);
    CHECK(mass_over[i] < mass_over[i - 1]);
    CHECK(r_over[i] > r_over[i - 1]);
  }
  CHECK(r_under.back() < r_under.front());
  CHECK(r_under.back() < 0.2);
  CHECK(r_over.back() > 0.75);
}

TEST_CASE("plugin regret gamma^N structure with a frozen draw") {
  const DistSpec d(2, 1);
  const Discount disc(0.95);
  const std::uint64_t seed = 777;
  const long N = 5;
  // Reproduce the single replication by hand.
  stoplab::Rng rng(stoplab::derive_seed(seed, 0));
  std::vector<double> batch(N);
  for (auto& x : batch) x = stoplab::sample(d, rng);
  const double eps_hat = stoplab::mle_location(stoplab::SampleBatch{batch, 2.0}) - d.theta;
  const double inner = stoplab::perturbed_regret(d, disc, eps_hat).relative_regret;
  const auto rep = stoplab::plugin_regret(d, disc, N, 1, seed);
  CHECK(rep.relative_regret == 1.0 - std::pow(0.95, 5.0) * (1.0 - inner));
  CHECK_FALSE(rep.ci_halfwidth.has_value());
  check_report_consistency(rep);
}

TEST_CASE("plugin regret is deterministic across thread counts") {
  const DistSpec d(1, 10);
  const Discount disc(0.99);
  const auto a = stoplab::plugin_regret(d, disc, 3, 2000, 99, 1);
  const auto b = stoplab::plugin_regret(d, disc, 3, 2000, 99, 8);
  CHECK(a.relative_regret == b.relative_regret);
  CHECK(*a.ci_halfwidth == *b.ci_halfwidth);
}

TEST_CASE("short versus adequate exploration at alpha = 2") {
  const DistSpec d(2, 0);
  const Discount disc(1.0 - 1e-4);
  const long n_big = static_cast<long>(
      std::ceil(4.0 * stoplab::critical_sample_size(2.0, disc)));
  CHECK(n_big == 8);
  const auto lean = stoplab::plugin_regret(d, disc, 1, 20000, 3001);
  const auto rich = stoplab::plugin_regret(d, disc, n_big, 20000, 3002);
  check_report_consistency(lean);
  check_report_consistency(rich);
  CHECK(lean.relative_regret - *lean.ci_halfwidth >
        rich.relative_regret + *rich.ci_halfwidth);
}

TEST_CASE("single-sample quadrature evaluation") {
  SECTION("agrees with Monte Carlo within its confidence interval") {
    const DistSpec d(0.5, 10);
    const Discount disc(0.999);
    const auto exact = stoplab::plugin_regret_quadrature(d, disc);
    const auto mc = stoplab::plugin_regret(d, disc, 1, 100000, 2718);
    CHECK_FALSE(exact.ci_halfwidth.has_value());
    check_report_consistency(exact);
    CHECK(std::fabs(exact.relative_regret - mc.relative_regret) <= *mc.ci_halfwidth);
  }
  SECTION("single-sample sufficiency trend in gamma") {
    const DistSpec d(0.5, 10);
    double prev = 2.0;
    for (double gamma : {0.9, 0.99, 0.999, 0.9999}) {
      const double r = stoplab::plugin_regret_quadrature(d, Discount(gamma)).relative_regret;
      INFO("gamma=" << gamma);
      CHECK(r < prev);
      prev = r;
    }
  }
  SECTION("integrand vanishes at the truth") {
    const DistSpec d(1, 2);
    const Discount disc(0.9);
    CHECK(stoplab::perturbed_regret(d, disc, 0.0).relative_regret == 0.0);
  }
}
