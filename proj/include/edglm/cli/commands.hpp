#ifndef EDGLM_CLI_COMMANDS_HPP
#define EDGLM_CLI_COMMANDS_HPP

// fit / forecast / select / synth. Each command computes everything first
// and only then writes its files, so a failure leaves no partial output.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "edglm/cli/config.hpp"
#include "edglm/cli/csv.hpp"
#include "edglm/filter.hpp"
#include "edglm/forecast.hpp"
#include "edglm/metrics.hpp"
#include "edglm/synth.hpp"

namespace edglm::cli {

inline constexpr int kSchemaVersion = 1;

// File name -> contents, written together at the end of a command.
using Outputs = std::map<std::string, std::string>;

struct LoadedData {
  DataTable table;
  Eigen::VectorXd y;
};

inline LoadedData load_data(const RunConfig& cfg) {
  if (cfg.data_path.empty()) throw ConfigError("config field 'data.path': missing");
  LoadedData d;
  d.table = read_csv(cfg.data_path, cfg.data_columns());
  d.y = d.table.values.col(d.table.index_of(cfg.target));
  cfg.spec.validate(&d.table);
  return d;
}

inline FilterOptions filter_options(const RunConfig& cfg, bool smooth) {
  FilterOptions o;
  o.omega = cfg.weights;
  o.smooth = smooth;
  return o;
}

inline ScoreOptions score_options(const RunConfig& cfg) {
  ScoreOptions o;
  o.learning = cfg.learning;
  o.level = cfg.level;
  o.grid_size = cfg.grid_size;
  return o;
}

namespace detail {

inline void append_vector(std::vector<std::string>& row, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(format_double(v[i]));
}

inline void append_indexed(std::vector<std::string>& header, const std::string& stem,
                           Eigen::Index n) {
  for (Eigen::Index i = 1; i <= n; ++i) header.push_back(stem + "_" + std::to_string(i));
}

inline std::vector<std::string> summary_cells(const PredictiveSummary& s) {
  return {format_double(s.mean), format_double(s.mode), format_double(s.hpd_low),
          format_double(s.hpd_high), format_double(s.set_length), s.multimodal ? "1" : "0"};
}

}  // namespace detail

inline std::string filtered_csv(const FilterResult& fr, Eigen::Index p) {
  CsvTable t;
  t.header = {"t", "y"};
  detail::append_indexed(t.header, "a", p);
  detail::append_indexed(t.header, "r", p);
  for (const char* h : {"f1", "f2", "q11", "q22", "tau0", "tau1", "tau2", "tau0_star",
                        "tau1_star", "tau2_star"}) {
    t.header.push_back(h);
  }
  detail::append_indexed(t.header, "m", p);
  detail::append_indexed(t.header, "c", p);
  for (const StepRecord& r : fr.steps) {
    std::vector<std::string> row{std::to_string(r.row + 1), format_double(r.y)};
    detail::append_vector(row, r.a);
    detail::append_vector(row, r.R.diagonal());
    for (double v : {r.f[0], r.f[1], r.Q(0, 0), r.Q(1, 1), r.tau.tau0, r.tau.tau1, r.tau.tau2,
                     r.tau_star.tau0, r.tau_star.tau1, r.tau_star.tau2}) {
      row.push_back(format_double(v));
    }
    detail::append_vector(row, r.m);
    detail::append_vector(row, r.C.diagonal());
    t.rows.push_back(std::move(row));
  }
  return t.str();
}

inline std::string smoothed_csv(const FilterResult& fr, Eigen::Index p) {
  CsvTable t;
  t.header = {"t"};
  detail::append_indexed(t.header, "ms", p);
  detail::append_indexed(t.header, "cs", p);
  for (std::size_t k = 0; k < fr.smoothed.size(); ++k) {
    std::vector<std::string> row{std::to_string(fr.steps[k].row + 1)};
    detail::append_vector(row, fr.smoothed[k].m);
    detail::append_vector(row, fr.smoothed[k].C.diagonal());
    t.rows.push_back(std::move(row));
  }
  return t.str();
}

inline const std::vector<std::string>& summary_header() {
  static const std::vector<std::string> h{"pred_mean", "pred_mode", "hpd_low", "hpd_high",
                                          "hpd_length", "multimodal"};
  return h;
}

// One-step rows for every filtered t plus the out-of-sample row t = T + 1.
inline std::string onestep_csv(const std::vector<OneStep>& steps, const ForecastStep& next) {
  CsvTable t;
  t.header = {"t", "y"};
  t.header.insert(t.header.end(), summary_header().begin(), summary_header().end());
  t.header.push_back("log_pred_density");
  for (const OneStep& o : steps) {
    std::vector<std::string> row{std::to_string(o.row + 1), format_double(o.y)};
    const auto cells = detail::summary_cells(o.summary);
    row.insert(row.end(), cells.begin(), cells.end());
    row.push_back(format_double(o.log_density));
    t.rows.push_back(std::move(row));
  }
  const Eigen::Index last = steps.empty() ? 0 : steps.back().row + 1;
  std::vector<std::string> row{std::to_string(last + 1), ""};
  const auto cells = detail::summary_cells(next.summary);
  row.insert(row.end(), cells.begin(), cells.end());
  row.push_back("");
  t.rows.push_back(std::move(row));
  return t.str();
}

inline std::string metrics_json(const RunConfig& cfg, const ScoreReport& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["family"] = std::string(family_name(cfg.family));
  j["mse"] = r.mse;
  j["ll"] = r.ll;
  j["lpd"] = r.lpd;
  j["ll_definition"] = "plug-in log-likelihood at posterior point estimates";
  j["n_scored"] = r.n_scored;
  j["learning_excluded"] = r.learning_excluded;
  j["warmup"] = r.warmup;
  j["level"] = cfg.level;
  return j.dump(2) + "\n";
}

inline std::string forecast_csv(const std::vector<ForecastStep>& path, Eigen::Index last_row) {
  CsvTable t;
  t.header = {"h", "t"};
  t.header.insert(t.header.end(), summary_header().begin(), summary_header().end());
  for (const ForecastStep& fs : path) {
    std::vector<std::string> row{std::to_string(fs.h), std::to_string(last_row + 1 + fs.h)};
    const auto cells = detail::summary_cells(fs.summary);
    row.insert(row.end(), cells.begin(), cells.end());
    t.rows.push_back(std::move(row));
  }
  return t.str();
}

inline Outputs cmd_fit(const RunConfig& cfg) {
  const LoadedData d = load_data(cfg);
  const FilterResult fr = filter_pass(cfg.spec, d.y, d.table, cfg.init(), filter_options(cfg, true));
  const ScoreOptions so = score_options(cfg);
  check_learning(fr, so.learning);
  const std::vector<OneStep> steps = one_step_predictives(cfg.family, fr, so);
  const std::vector<OneStep> scored(steps.begin() + so.learning, steps.end());
  const ScoreReport report = score_from(scored, so.learning, cfg.spec.warmup());
  const std::vector<ForecastStep> next =
      forecast_path(cfg.spec, fr, 1, d.table, cfg.level, cfg.grid_size, cfg.weights);
  const Eigen::Index p = cfg.spec.p();
  return {{"filtered.csv", filtered_csv(fr, p)},
          {"smoothed.csv", smoothed_csv(fr, p)},
          {"onestep.csv", onestep_csv(steps, next.front())},
          {"metrics.json", metrics_json(cfg, report)}};
}

inline Outputs cmd_forecast(const RunConfig& cfg) {
  const LoadedData d = load_data(cfg);
  const FilterResult fr =
      filter_pass(cfg.spec, d.y, d.table, cfg.init(), filter_options(cfg, false));
  const std::vector<ForecastStep> path =
      forecast_path(cfg.spec, fr, cfg.horizon, d.table, cfg.level, cfg.grid_size, cfg.weights);
  return {{"forecast.csv", forecast_csv(path, fr.steps.back().row)}};
}

inline Outputs cmd_select(const RunConfig& cfg) {
  if (cfg.grid.empty()) throw ConfigError("config field 'select.grid': missing");
  const LoadedData d = load_data(cfg);
  const GridSearchResult res =
      grid_search(cfg.spec, cfg.grid, d.y, d.table, cfg.init(), filter_options(cfg, false),
                  score_options(cfg), cfg.criterion);
  CsvTable t;
  for (std::size_t b = 0; b < cfg.spec.block_count(); ++b) {
    t.header.push_back("delta_" + cfg.spec.block(b).name);
  }
  for (const char* h : {"mse", "ll", "lpd", "rank", "status"}) t.header.push_back(h);
  for (const GridRow& r : res.rows) {
    std::vector<std::string> row;
    for (double v : r.deltas) row.push_back(format_double(v));
    if (r.report) {
      row.push_back(format_double(r.report->mse));
      row.push_back(format_double(r.report->ll));
      row.push_back(format_double(r.report->lpd));
    } else {
      row.insert(row.end(), {"", "", ""});
    }
    row.push_back(std::to_string(r.rank));
    std::string status = r.status;
    for (char& c : status) {
      if (c == ',' || c == '\n' || c == '"') c = ';';
    }
    row.push_back(status);
    t.rows.push_back(std::move(row));
  }
  return {{"selection.csv", t.str()}};
}

inline Outputs cmd_synth(const RunConfig& cfg, std::optional<std::uint64_t> seed) {
  SynthOptions opts = cfg.synth;
  if (seed) opts.seed = *seed;
  const SynthTruth truth = simulate(cfg.spec, opts);
  CsvTable data;
  data.header = {"t", cfg.target};
  CsvTable side;
  side.header = {"t", "mu", "phi"};
  detail::append_indexed(side.header, "state", cfg.spec.p());
  for (Eigen::Index t = 0; t < truth.y.size(); ++t) {
    data.rows.push_back({std::to_string(t + 1), format_double(truth.y[t])});
    std::vector<std::string> row{std::to_string(t + 1), format_double(truth.mu[t]),
                                 format_double(truth.phi[t])};
    detail::append_vector(row, truth.states.row(t).transpose());
    side.rows.push_back(std::move(row));
  }
  return {{"data.csv", data.str()}, {"truth.csv", side.str()}};
}

inline void write_outputs(const std::filesystem::path& dir, const Outputs& outputs) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, contents] : outputs) atomic_write(dir / name, contents);
}

}  // namespace edglm::cli

#endif  // EDGLM_CLI_COMMANDS_HPP
