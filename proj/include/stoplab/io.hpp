#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stoplab/simlab.hpp"
#include "stoplab/version.hpp"

namespace stoplab::io {

/// 17 significant digits: lossless for IEEE-754 doubles.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt17(*v) : std::string();
}

/// Flat string table; the common currency between typed results and CSV.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  bool operator==(const Table&) const = default;
};

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

/// RFC-4180 fields and quoting, LF line endings, UTF-8 passthrough.
inline void write_csv(const Table& table, std::ostream& os) {
  const auto write_row = [&os](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << csv_escape(row[i]);
    }
    os << '\n';
  };
  write_row(table.header);
  for (const auto& row : table.rows) write_row(row);
}

inline Table read_csv(std::istream& is) {
  Table table;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool any_field = false;
  char c;
  const auto end_field = [&] {
    row.push_back(field);
    field.clear();
    any_field = false;
  };
  const auto end_row = [&] {
    end_field();
    if (table.header.empty())
      table.header = row;
    else
      table.rows.push_back(row);
    row.clear();
  };
  while (is.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (is.peek() == '"') {
          is.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"': in_quotes = true; any_field = true; break;
      case ',': end_field(); any_field = true; break;
      case '\r': break;
      case '\n': end_row(); break;
      default: field += c; any_field = true; break;
    }
  }
  if (any_field || !field.empty() || !row.empty()) end_row();
  return table;
}

inline const std::vector<std::string>& experiment_header() {
  static const std::vector<std::string> h = {
      "alpha",        "theta",       "gamma",           "effective_horizon",
      "policy",       "epsilon_or_n", "v_star",         "v_policy",
      "relative_regret", "ci_halfwidth", "mean_tau",    "truncated_fraction",
      "error"};
  return h;
}

inline Table to_table(const ExperimentTable& t) {
  Table out;
  out.header = experiment_header();
  for (const auto& r : t.rows) {
    out.rows.push_back({fmt17(r.alpha), fmt17(r.theta), fmt17(r.gamma),
                        r.error.empty() ? fmt17(r.effective_horizon) : std::string(),
                        r.policy, fmt_opt(r.epsilon_or_n), fmt_opt(r.v_star),
                        fmt_opt(r.v_policy), fmt_opt(r.relative_regret),
                        fmt_opt(r.ci_halfwidth), fmt_opt(r.mean_tau),
                        fmt_opt(r.truncated_fraction), r.error});
  }
  return out;
}

inline Table to_table(const PhaseTable& t) {
  Table out;
  out.header = {"gamma",   "multiplier",      "n",          "plugin_regret",
                "plugin_ci", "epsilon",       "perturbed_regret",
                "scaled_stop_time", "error"};
  for (const auto& r : t.rows) {
    out.rows.push_back({fmt17(r.gamma), fmt17(r.multiplier), fmt_opt(r.n),
                        fmt_opt(r.plugin_regret_v), fmt_opt(r.plugin_ci),
                        fmt_opt(r.epsilon), fmt_opt(r.perturbed_regret_v),
                        fmt_opt(r.scaled_stop_time), r.error});
  }
  return out;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Stable hex digest of the canonicalized (sorted-key, no-whitespace) config.
inline std::string config_digest(const nlohmann::json& config) {
  const std::string canonical = config.dump();
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical)));
  return buf;
}

struct ParsedConfig {
  ExperimentGrid grid;
  SimConfig sim;
};

inline ParsedConfig parse_experiment_config(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("schema") || j["schema"] != 1)
    throw std::runtime_error("config: missing or unsupported schema (expected 1)");
  ParsedConfig out;
  const auto& sim = j.value("sim", nlohmann::json::object());
  out.sim.master_seed = sim.value("master_seed", std::uint64_t{1});
  out.sim.reps = sim.value("reps", long{1000});
  out.sim.horizon_cap = sim.value("horizon_cap", long{0});
  out.sim.parallelism = sim.value("parallelism", 0);
  if (out.sim.reps < 1) throw std::runtime_error("config: sim.reps must be >= 1");
  if (out.sim.horizon_cap < 0) throw std::runtime_error("config: sim.horizon_cap must be >= 0");

  if (!j.contains("grid")) throw std::runtime_error("config: missing grid");
  const auto& g = j["grid"];
  const auto read_list = [&](const char* key) {
    if (!g.contains(key) || !g[key].is_array() || g[key].empty())
      throw std::runtime_error(std::string("config: grid.") + key +
                               " must be a nonempty array");
    return g[key].get<std::vector<double>>();
  };
  out.grid.alphas = read_list("alphas");
  out.grid.thetas = read_list("thetas");
  out.grid.gammas = read_list("gammas");
  for (double gamma : out.grid.gammas)
    if (!(gamma > 0.0 && gamma < 1.0))
      throw std::runtime_error("config: every gamma must be in (0,1)");
  if (g.contains("perturbation_multipliers"))
    out.grid.perturbation_multipliers =
        g["perturbation_multipliers"].get<std::vector<double>>();
  if (g.contains("policies")) {
    for (const auto& p : g["policies"]) {
      const std::string kind = p.value("kind", "");
      GridPolicy gp;
      if (kind == "oracle") {
        gp.spec = PolicySpec::oracle();
      } else if (kind == "perturbed") {
        if (p.contains("z")) {
          gp.spec = PolicySpec::perturbed(0.0);
          gp.z = p["z"].get<double>();
        } else if (p.contains("epsilon")) {
          gp.spec = PolicySpec::perturbed(p["epsilon"].get<double>());
        } else {
          throw std::runtime_error("config: perturbed policy needs epsilon or z");
        }
      } else if (kind == "plugin") {
        if (p.contains("n_rule")) {
          if (p["n_rule"] != "log_horizon_sq")
            throw std::runtime_error("config: unknown plugin n_rule");
          gp.spec = PolicySpec::plug_in(1);
          gp.auto_n_log_sq = true;
        } else if (p.contains("n")) {
          gp.spec = PolicySpec::plug_in(p["n"].get<long>());
        } else {
          throw std::runtime_error("config: plugin policy needs n or n_rule");
        }
      } else {
        throw std::runtime_error("config: policy kind must be oracle|perturbed|plugin");
      }
      out.grid.policies.push_back(gp);
    }
  }
  return out;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

inline nlohmann::json manifest_json(const nlohmann::json& config,
                                    std::uint64_t master_seed, std::size_t row_count) {
  return nlohmann::json{{"tool_version", kVersion},
                        {"config_digest", config_digest(config)},
                        {"master_seed", master_seed},
                        {"timestamp", utc_timestamp()},
                        {"row_count", row_count}};
}

/// Minimal line-plot SVG for the sweep: relative regret against z when the
/// grid carries sigma multipliers, otherwise against log10 effective horizon,
/// one polyline per grid policy entry.
inline std::string render_svg(const ExperimentTable& table, const ExperimentGrid& grid) {
  const std::size_t n_entries =
      grid.policies.size() + grid.perturbation_multipliers.size();
  const bool z_mode = grid.perturbation_multipliers.size() >= 2;
  const std::size_t n_gamma = grid.gammas.size();
  const std::size_t n_theta = grid.thetas.size();

  struct Series {
    std::string label;
    std::vector<std::pair<double, double>> pts;
  };
  std::vector<Series> series;

  const auto row_at = [&](std::size_t ia, std::size_t it, std::size_t ig,
                          std::size_t ie) -> const ExperimentRow& {
    return table.rows[((ia * n_theta + it) * n_gamma + ig) * n_entries + ie];
  };

  for (std::size_t ia = 0; ia < grid.alphas.size(); ++ia) {
    for (std::size_t it = 0; it < n_theta; ++it) {
      if (z_mode) {
        for (std::size_t ig = 0; ig < n_gamma; ++ig) {
          Series s;
          s.label = "alpha=" + fmt17(grid.alphas[ia]) + " gamma=" + fmt17(grid.gammas[ig]);
          for (std::size_t im = 0; im < grid.perturbation_multipliers.size(); ++im) {
            const auto& r = row_at(ia, it, ig, grid.policies.size() + im);
            if (!r.error.empty() || !r.relative_regret) continue;
            s.pts.emplace_back(grid.perturbation_multipliers[im], *r.relative_regret);
          }
          if (!s.pts.empty()) series.push_back(std::move(s));
        }
      } else {
        for (std::size_t ie = 0; ie < n_entries; ++ie) {
          Series s;
          const auto& first = row_at(ia, it, 0, ie);
          s.label = "alpha=" + fmt17(grid.alphas[ia]) + " " + first.policy;
          if (first.policy == "plugin" && first.epsilon_or_n)
            s.label += " n=" + fmt17(*first.epsilon_or_n);
          for (std::size_t ig = 0; ig < n_gamma; ++ig) {
            const auto& r = row_at(ia, it, ig, ie);
            if (!r.error.empty() || !r.relative_regret) continue;
            s.pts.emplace_back(std::log10(r.effective_horizon), *r.relative_regret);
          }
          if (!s.pts.empty()) series.push_back(std::move(s));
        }
      }
    }
  }

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.pts) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (series.empty()) {
    xmin = 0; xmax = 1; ymin = 0; ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  const double w = 640, h = 420, ml = 60, mr = 170, mt = 20, mb = 40;
  const auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  const auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
                                  "#17becf", "#bcbd22"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
      << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr
      << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << h - mb << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << (ml + (w - ml - mr) / 2) << "\" y=\"" << h - 8
      << "\" font-size=\"12\" text-anchor=\"middle\">"
      << (z_mode ? "perturbation multiplier z" : "log10 effective horizon")
      << "</text>\n";
  svg << "<text x=\"14\" y=\"" << (mt + (h - mt - mb) / 2)
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << (mt + (h - mt - mb) / 2) << ")\">relative regret</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    svg << "<text x=\"" << px(xv) << "\" y=\"" << h - mb + 16
        << "\" font-size=\"10\" text-anchor=\"middle\">" << fmt17(xv).substr(0, 7)
        << "</text>\n";
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 3
        << "\" font-size=\"10\" text-anchor=\"end\">" << fmt17(yv).substr(0, 7)
        << "</text>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = palette[i % 10];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[i].pts) svg << px(x) << "," << py(y) << " ";
    svg << "\"/>\n";
    svg << "<text x=\"" << w - mr + 8 << "\" y=\"" << mt + 14 * (i + 1)
        << "\" font-size=\"10\" fill=\"" << color << "\">" << series[i].label
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

} // namespace stoplab::io
