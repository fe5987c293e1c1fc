#ifndef EDGLM_CLI_CONFIG_HPP
#define EDGLM_CLI_CONFIG_HPP

// Run configuration, read from a JSON document. Relative data paths resolve
// against the directory holding the config file.
//
// {
//   "family": "beta",
//   "data": {"path": "series.csv", "target": "y", "covariates": []},
//   "mean_blocks": [{"type": "polynomial", "order": 2, "name": "trend", "discount": 0.9},
//                   {"type": "harmonic", "period": 12, "name": "season", "discount": 0.95}],
//   "precision_blocks": [{"type": "polynomial", "order": 1, "name": "level", "discount": 0.9}],
//   "m0": [...], "C0": [...],
//   "learning": 18, "horizon": 12, "level": 0.95, "grid_size": 4096,
//   "weights": [[...4x4...]],
//   "select": {"grid": [[0.9, 0.95], [0.95], [0.9, 0.95]], "criterion": "lpd"},
//   "synth": {"T": 120, "seed": 7, "beta0": [...]}
// }

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "edglm/errors.hpp"
#include "edglm/family.hpp"
#include "edglm/filter.hpp"
#include "edglm/metrics.hpp"
#include "edglm/model_spec.hpp"
#include "edglm/synth.hpp"

namespace edglm::cli {

using json = nlohmann::json;

struct RunConfig {
  std::filesystem::path config_path;
  FamilyId family = FamilyId::Normal;
  std::filesystem::path data_path;
  std::string target = "y";
  std::vector<std::string> covariates;
  ModelSpec spec;
  std::optional<Eigen::VectorXd> m0;
  std::optional<Eigen::MatrixXd> C0;
  int learning = 0;
  int horizon = 1;
  double level = 0.95;
  int grid_size = 4096;
  Weights weights = Weights::Identity();
  std::vector<std::vector<double>> grid;
  Criterion criterion = Criterion::LPD;
  SynthOptions synth;
  std::optional<std::filesystem::path> out;

  // Columns the data file must provide: target, covariates, regression inputs.
  std::vector<std::string> data_columns() const {
    std::vector<std::string> cols{target};
    cols.insert(cols.end(), covariates.begin(), covariates.end());
    for (std::size_t b = 0; b < spec.block_count(); ++b) {
      const Block& blk = spec.block(b);
      cols.insert(cols.end(), blk.columns.begin(), blk.columns.end());
    }
    return cols;
  }

  StateMoments init() const {
    StateMoments s = default_init(spec);
    if (m0) s.m = *m0;
    if (C0) s.C = *C0;
    return s;
  }
};

namespace detail {

[[noreturn]] inline void fail(const std::string& field, const std::string& why) {
  throw ConfigError("config field '" + field + "': " + why);
}

inline double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  return j.get<double>();
}

inline int get_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) fail(field, "expected an integer");
  return j.get<int>();
}

inline std::string get_string(const json& j, const std::string& field) {
  if (!j.is_string()) fail(field, "expected a string");
  return j.get<std::string>();
}

inline std::vector<double> get_numbers(const json& j, const std::string& field) {
  if (!j.is_array()) fail(field, "expected an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) {
    v.push_back(get_number(j[i], field + "[" + std::to_string(i) + "]"));
  }
  return v;
}

// Scalar s -> s I, flat list -> diagonal, nested list -> full matrix.
inline Eigen::MatrixXd get_matrix(const json& j, const std::string& field, Eigen::Index n) {
  if (j.is_number()) return j.get<double>() * Eigen::MatrixXd::Identity(n, n);
  if (!j.is_array()) fail(field, "expected a number, a list or a nested list");
  if (!j.empty() && j[0].is_array()) {
    if (static_cast<Eigen::Index>(j.size()) != n) {
      fail(field, "expected " + std::to_string(n) + " rows");
    }
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const std::vector<double> row =
          get_numbers(j[static_cast<std::size_t>(r)], field + "[" + std::to_string(r) + "]");
      if (static_cast<Eigen::Index>(row.size()) != n) {
        fail(field, "expected " + std::to_string(n) + " columns");
      }
      for (Eigen::Index c = 0; c < n; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
  }
  const std::vector<double> d = get_numbers(j, field);
  if (static_cast<Eigen::Index>(d.size()) != n) {
    fail(field, "expected " + std::to_string(n) + " diagonal entries");
  }
  return Eigen::Map<const Eigen::VectorXd>(d.data(), n).asDiagonal();
}

inline Block parse_block(const json& j, const std::string& field) {
  if (!j.is_object()) fail(field, "expected an object");
  if (!j.contains("type")) fail(field + ".type", "missing");
  const std::string type = get_string(j["type"], field + ".type");
  Block b;
  try {
    if (type == "polynomial") {
      b = polynomial_block(j.contains("order") ? get_int(j["order"], field + ".order") : 1);
    } else if (type == "harmonic") {
      double omega = 0.0;
      if (j.contains("omega")) {
        omega = get_number(j["omega"], field + ".omega");
      } else if (j.contains("period")) {
        omega = 2.0 * std::numbers::pi / get_number(j["period"], field + ".period");
      } else {
        fail(field, "harmonic block needs 'period' or 'omega'");
      }
      b = harmonic_block(omega);
    } else if (type == "regression") {
      if (!j.contains("columns") || !j["columns"].is_array()) {
        fail(field + ".columns", "expected a list of column names");
      }
      std::vector<std::string> cols;
      for (const json& c : j["columns"]) cols.push_back(get_string(c, field + ".columns"));
      const int lags = j.contains("lags") ? get_int(j["lags"], field + ".lags") : 1;
      bool intercept = true;
      if (j.contains("intercept")) {
        if (!j["intercept"].is_boolean()) fail(field + ".intercept", "expected true or false");
        intercept = j["intercept"].get<bool>();
      }
      b = regression_block(std::move(cols), lags, intercept);
    } else {
      fail(field + ".type", "unknown block type '" + type + "'");
    }
  } catch (const ConfigError& e) {
    if (std::string(e.what()).rfind("config field", 0) == 0) throw;
    fail(field, e.what());
  }
  if (j.contains("name")) b.name = get_string(j["name"], field + ".name");
  if (j.contains("discount")) b.discount = get_number(j["discount"], field + ".discount");
  if (j.contains("w")) b.w = get_matrix(j["w"], field + ".w", b.dim());
  return b;
}

inline std::vector<Block> parse_blocks(const json& root, const std::string& key) {
  if (!root.contains(key)) fail(key, "missing");
  const json& arr = root[key];
  if (!arr.is_array() || arr.empty()) fail(key, "expected a non-empty list of blocks");
  std::vector<Block> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(parse_block(arr[i], key + "[" + std::to_string(i) + "]"));
    if (out.back().name.empty()) {
      out.back().name = (key == "mean_blocks" ? "mean_" : "precision_") + std::to_string(i + 1);
    }
  }
  return out;
}

}  // namespace detail

inline RunConfig parse_config(const json& root, const std::filesystem::path& config_path = {}) {
  using detail::fail;
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  cfg.config_path = config_path;

  if (!root.contains("family")) fail("family", "missing");
  const std::string fam = detail::get_string(root["family"], "family");
  const auto family = parse_family(fam);
  if (!family) fail("family", "unknown family '" + fam + "'");
  cfg.family = *family;
  cfg.spec.family = *family;

  if (root.contains("data")) {
    const json& d = root["data"];
    if (!d.is_object()) fail("data", "expected an object");
    if (d.contains("path")) {
      std::filesystem::path p = detail::get_string(d["path"], "data.path");
      if (p.is_relative() && !config_path.empty()) p = config_path.parent_path() / p;
      cfg.data_path = p;
    }
    if (d.contains("target")) cfg.target = detail::get_string(d["target"], "data.target");
    if (d.contains("covariates")) {
      if (!d["covariates"].is_array()) fail("data.covariates", "expected a list of names");
      for (const json& c : d["covariates"]) {
        cfg.covariates.push_back(detail::get_string(c, "data.covariates"));
      }
    }
  }

  cfg.spec.mean_blocks = detail::parse_blocks(root, "mean_blocks");
  cfg.spec.precision_blocks = detail::parse_blocks(root, "precision_blocks");
  cfg.spec.validate();
  const Eigen::Index p = cfg.spec.p();

  if (root.contains("m0")) {
    const std::vector<double> m0 = detail::get_numbers(root["m0"], "m0");
    if (static_cast<Eigen::Index>(m0.size()) != p) {
      fail("m0", "expected " + std::to_string(p) + " entries");
    }
    cfg.m0 = Eigen::Map<const Eigen::VectorXd>(m0.data(), p);
  }
  if (root.contains("C0")) cfg.C0 = detail::get_matrix(root["C0"], "C0", p);
  if (root.contains("learning")) cfg.learning = detail::get_int(root["learning"], "learning");
  if (cfg.learning < 0) fail("learning", "must be non-negative");
  if (root.contains("horizon")) cfg.horizon = detail::get_int(root["horizon"], "horizon");
  if (cfg.horizon < 1) fail("horizon", "must be at least 1");
  if (root.contains("level")) cfg.level = detail::get_number(root["level"], "level");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) fail("level", "must lie in (0, 1)");
  if (root.contains("grid_size")) cfg.grid_size = detail::get_int(root["grid_size"], "grid_size");
  if (cfg.grid_size < 256) fail("grid_size", "must be at least 256");
  if (root.contains("weights")) {
    const Eigen::MatrixXd w = detail::get_matrix(root["weights"], "weights", 4);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (w + w.transpose()));
    if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-12 || es.eigenvalues().minCoeff() < 0.0) {
      fail("weights", "must be symmetric positive semidefinite");
    }
    cfg.weights = w;
  }

  if (root.contains("select")) {
    const json& s = root["select"];
    if (!s.is_object()) fail("select", "expected an object");
    if (s.contains("grid")) {
      const json& g = s["grid"];
      if (!g.is_array()) fail("select.grid", "expected one list of discounts per block");
      for (std::size_t i = 0; i < g.size(); ++i) {
        cfg.grid.push_back(detail::get_numbers(g[i], "select.grid[" + std::to_string(i) + "]"));
        for (double v : cfg.grid.back()) {
          if (!(v > 0.0 && v <= 1.0)) fail("select.grid", "discounts must lie in (0, 1]");
        }
      }
      if (cfg.grid.size() != cfg.spec.block_count()) {
        fail("select.grid", "expected " + std::to_string(cfg.spec.block_count()) +
                                " lists, one per block");
      }
    }
    if (s.contains("criterion")) {
      const std::string c = detail::get_string(s["criterion"], "select.criterion");
      const auto crit = parse_criterion(c);
      if (!crit) fail("select.criterion", "expected mse, ll or lpd");
      cfg.criterion = *crit;
    }
  }

  cfg.synth.beta0 = cfg.m0 ? *cfg.m0 : Eigen::VectorXd::Zero(p);
  cfg.synth.noise.assign(cfg.spec.block_count(), Eigen::MatrixXd());
  if (root.contains("synth")) {
    const json& s = root["synth"];
    if (!s.is_object()) fail("synth", "expected an object");
    if (s.contains("T")) cfg.synth.T = detail::get_int(s["T"], "synth.T");
    if (cfg.synth.T < 1) fail("synth.T", "must be at least 1");
    if (s.contains("seed")) {
      if (!s["seed"].is_number_unsigned()) fail("synth.seed", "expected a non-negative integer");
      cfg.synth.seed = s["seed"].get<std::uint64_t>();
    }
    if (s.contains("beta0")) {
      const std::vector<double> b = detail::get_numbers(s["beta0"], "synth.beta0");
      if (static_cast<Eigen::Index>(b.size()) != p) {
        fail("synth.beta0", "expected " + std::to_string(p) + " entries");
      }
      cfg.synth.beta0 = Eigen::Map<const Eigen::VectorXd>(b.data(), p);
    }
    if (s.contains("w")) {
      const json& w = s["w"];
      if (!w.is_object()) fail("synth.w", "expected an object keyed by block name");
      for (auto it = w.begin(); it != w.end(); ++it) {
        std::size_t b = 0;
        while (b < cfg.spec.block_count() && cfg.spec.block(b).name != it.key()) ++b;
        if (b == cfg.spec.block_count()) fail("synth.w", "no block named '" + it.key() + "'");
        cfg.synth.noise[b] =
            detail::get_matrix(it.value(), "synth.w." + it.key(), cfg.spec.block(b).dim());
      }
    }
  }
  if (root.contains("out")) {
    std::filesystem::path o = detail::get_string(root["out"], "out");
    if (o.is_relative() && !config_path.empty()) o = config_path.parent_path() / o;
    cfg.out = o;
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json root;
  try {
    root = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(root, path);
}

}  // namespace edglm::cli

#endif  // EDGLM_CLI_CONFIG_HPP
