#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "stoplab/bellman.hpp"
#include "stoplab/dist.hpp"
#include "stoplab/io.hpp"
#include "stoplab/policy.hpp"
#include "stoplab/simlab.hpp"
#include "stoplab/version.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

std::optional<std::uint64_t> env_seed_override() {
  const char* raw = std::getenv("STOPLAB_SEED");
  if (!raw || !*raw) return std::nullopt;
  try {
    return static_cast<std::uint64_t>(std::stoull(raw));
  } catch (...) {
    throw std::domain_error("STOPLAB_SEED must be an integer");
  }
}

int validate_common(double alpha, double gamma) {
  if (!(alpha >= 0.5)) {
    std::cerr << "alpha must be >= 0.5\n";
    return kExitUsage;
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    std::cerr << "gamma must be in the open interval (0,1)\n";
    return kExitUsage;
  }
  return kExitOk;
}

json regret_json(const stoplab::RegretReport& rep) {
  json out{{"v_star", rep.v_star},
           {"v_policy", rep.v_policy},
           {"relative_regret", rep.relative_regret}};
  if (rep.ci_halfwidth)
    out["ci_halfwidth"] = *rep.ci_halfwidth;
  else
    out["ci_halfwidth"] = nullptr;
  return out;
}

int cmd_threshold(double alpha, double theta, double gamma, double tol) {
  if (int rc = validate_common(alpha, gamma)) return rc;
  if (!(tol > 0.0)) {
    std::cerr << "tol must be > 0\n";
    return kExitUsage;
  }
  const stoplab::DistSpec dist(alpha, theta);
  const stoplab::Discount disc(gamma);
  const stoplab::Threshold th = stoplab::solve_threshold(dist, disc, tol);
  const json out{{"s_star", th.value},
                 {"residual", th.residual},
                 {"iterations", th.iterations},
                 {"asymptotic", stoplab::asymptotic_threshold(dist, disc)},
                 {"sensitivity", stoplab::threshold_sensitivity(dist, disc)}};
  std::cout << out.dump() << "\n";
  return kExitOk;
}

struct RegretArgs {
  double alpha = 0, theta = 0, gamma = 0;
  std::string mode;
  std::optional<double> epsilon, z;
  std::optional<long> n, reps;
  bool exact = false;
  std::uint64_t seed = 1;
  int threads = 0;
};

int cmd_regret(const RegretArgs& a) {
  if (int rc = validate_common(a.alpha, a.gamma)) return rc;
  const stoplab::DistSpec truth(a.alpha, a.theta);
  const stoplab::Discount disc(a.gamma);
  if (a.mode == "perturb") {
    if (a.n || a.reps || a.exact) {
      std::cerr << "--mode perturb conflicts with --n/--reps/--exact\n";
      return kExitUsage;
    }
    if (a.epsilon.has_value() == a.z.has_value()) {
      std::cerr << "--mode perturb requires exactly one of --epsilon or --z\n";
      return kExitUsage;
    }
    const double eps = a.epsilon ? *a.epsilon
                                 : *a.z * std::sqrt(stoplab::variance(a.alpha));
    json out = regret_json(stoplab::perturbed_regret(truth, disc, eps));
    out["epsilon"] = eps;
    std::cout << out.dump() << "\n";
    return kExitOk;
  }
  if (a.mode == "plugin") {
    if (a.epsilon || a.z) {
      std::cerr << "--mode plugin conflicts with --epsilon/--z\n";
      return kExitUsage;
    }
    const long n = a.n.value_or(1);
    if (n < 1) {
      std::cerr << "--n must be >= 1\n";
      return kExitUsage;
    }
    if (a.exact) {
      if (a.reps) {
        std::cerr << "--exact conflicts with --reps\n";
        return kExitUsage;
      }
      if (n != 1) {
        std::cerr << "--exact is the deterministic N=1 evaluation; got --n " << n << "\n";
        return kExitUsage;
      }
      json out = regret_json(stoplab::plugin_regret_quadrature(truth, disc));
      out["n"] = 1;
      std::cout << out.dump() << "\n";
      return kExitOk;
    }
    if (!a.reps) {
      std::cerr << "--mode plugin requires --reps (or --exact for N=1)\n";
      return kExitUsage;
    }
    if (*a.reps < 1) {
      std::cerr << "--reps must be >= 1\n";
      return kExitUsage;
    }
    json out = regret_json(
        stoplab::plugin_regret(truth, disc, n, *a.reps, a.seed, a.threads));
    out["n"] = n;
    out["reps"] = *a.reps;
    out["seed"] = a.seed;
    std::cout << out.dump() << "\n";
    return kExitOk;
  }
  std::cerr << "--mode must be perturb or plugin\n";
  return kExitUsage;
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir,
                   bool plot) {
  json config;
  {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "cannot open config: " << config_path << "\n";
      return kExitUsage;
    }
    try {
      in >> config;
    } catch (const json::parse_error& ex) {
      std::cerr << "config parse error: " << ex.what() << "\n";
      return kExitUsage;
    }
  }
  stoplab::io::ParsedConfig parsed;
  try {
    parsed = stoplab::io::parse_experiment_config(config);
  } catch (const std::exception& ex) {
    std::cerr << ex.what() << "\n";
    return kExitUsage;
  }
  if (const auto seed = env_seed_override()) parsed.sim.master_seed = *seed;

  const stoplab::ExperimentTable table = stoplab::run_experiment(parsed.grid, parsed.sim);

  std::filesystem::create_directories(out_dir);
  {
    std::ofstream csv(std::filesystem::path(out_dir) / "results.csv",
                      std::ios::binary);
    stoplab::io::write_csv(stoplab::io::to_table(table), csv);
  }
  {
    std::ofstream mf(std::filesystem::path(out_dir) / "manifest.json");
    mf << stoplab::io::manifest_json(config, parsed.sim.master_seed, table.rows.size())
              .dump(2)
       << "\n";
  }
  if (plot) {
    std::ofstream svg(std::filesystem::path(out_dir) / "plot.svg");
    svg << stoplab::io::render_svg(table, parsed.grid);
  }
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"stoplab: discounted optimal stopping under incomplete information"};
  app.require_subcommand(1);

  double alpha = 0, theta = 0, gamma = 0, tol = 1e-10;
  auto* threshold = app.add_subcommand("threshold", "Solve the Bellman threshold");
  threshold->add_option("--alpha", alpha)->required();
  threshold->add_option("--theta", theta)->required();
  threshold->add_option("--gamma", gamma)->required();
  threshold->add_option("--tol", tol);

  RegretArgs ra;
  double opt_eps = 0, opt_z = 0;
  long opt_n = 0, opt_reps = 0;
  auto* regret = app.add_subcommand("regret", "Evaluate a stopping rule's regret");
  regret->add_option("--alpha", ra.alpha)->required();
  regret->add_option("--theta", ra.theta)->required();
  regret->add_option("--gamma", ra.gamma)->required();
  regret->add_option("--mode", ra.mode)->required();
  auto* eps_opt = regret->add_option("--epsilon", opt_eps);
  auto* z_opt = regret->add_option("--z", opt_z);
  auto* n_opt = regret->add_option("--n", opt_n);
  auto* reps_opt = regret->add_option("--reps", opt_reps);
  regret->add_flag("--exact", ra.exact);
  regret->add_option("--seed", ra.seed);
  regret->add_option("--threads", ra.threads);

  std::string config_path, out_dir;
  bool plot = false;
  auto* experiment = app.add_subcommand("experiment", "Run a sweep from a JSON config");
  experiment->add_option("--config", config_path)->required();
  experiment->add_option("--out", out_dir)->required();
  experiment->add_flag("--plot", plot);

  auto* version = app.add_subcommand("version", "Print the tool version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (threshold->parsed()) return cmd_threshold(alpha, theta, gamma, tol);
    if (regret->parsed()) {
      if (*eps_opt) ra.epsilon = opt_eps;
      if (*z_opt) ra.z = opt_z;
      if (*n_opt) ra.n = opt_n;
      if (*reps_opt) ra.reps = opt_reps;
      return cmd_regret(ra);
    }
    if (experiment->parsed()) return cmd_experiment(config_path, out_dir, plot);
    if (version->parsed()) {
      std::cout << stoplab::kVersion << "\n";
      return kExitOk;
    }
  } catch (const std::domain_error& ex) {
    std::cerr << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    std::cerr << ex.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
