#ifndef EDGLM_METRICS_HPP
#define EDGLM_METRICS_HPP

// One-step-ahead scoring and discount-factor grid search.
//
//   MSE  mean of (y_t - E[y_t | D_{t-1}])² over scored t
//   LL   Σ log p(y_t | μ̂_t, φ̂_t), plug-in at (μ̂, φ̂) = g⁻¹(h(τ*_t))
//   LPD  Σ log p(y_t | D_{t-1})

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "edglm/errors.hpp"
#include "edglm/filter.hpp"
#include "edglm/forecast.hpp"
#include "edglm/model_spec.hpp"

namespace edglm {

struct OneStep {
  Eigen::Index row = 0;
  double y = 0.0;
  PredictiveSummary summary;
  double log_density = 0.0;  // log p(y_t | D_{t-1})
  double plug_in = 0.0;      // log p(y_t | μ̂_t, φ̂_t)
};

struct ScoreReport {
  double mse = 0.0;
  double ll = 0.0;
  double lpd = 0.0;
  int n_scored = 0;
  int learning_excluded = 0;
  int warmup = 0;
};

struct ScoreOptions {
  int learning = 0;
  double level = 0.95;
  int grid_size = 4096;
  bool keep_grid = false;
};

inline OneStep one_step(FamilyId family, const StepRecord& rec, const ScoreOptions& options) {
  OneStep o;
  o.row = rec.row;
  o.y = rec.y;
  o.summary = predictive_summary(family, rec.tau, options.level, options.grid_size);
  if (!options.keep_grid) o.summary.grid.clear();
  o.log_density = predictive_log_density(family, rec.tau, rec.y);
  const MeanPrecision mp = inv_link(family, rec.f_star);
  o.plug_in = log_density(family, rec.y, mp.mu, mp.phi);
  return o;
}

// One-step predictives for filtered steps with index >= `from`.
inline std::vector<OneStep> one_step_predictives(FamilyId family, const FilterResult& fr,
                                                 const ScoreOptions& options,
                                                 std::size_t from = 0) {
  std::vector<OneStep> out;
  for (std::size_t k = from; k < fr.steps.size(); ++k) {
    try {
      out.push_back(one_step(family, fr.steps[k], options));
    } catch (const FilterError&) {
      throw;
    } catch (const Error& e) {
      throw FilterError(static_cast<std::size_t>(fr.steps[k].row + 1), "predictive", e.what());
    }
  }
  return out;
}

inline ScoreReport score_from(const std::vector<OneStep>& scored, int learning, int warmup) {
  ScoreReport r;
  r.learning_excluded = learning;
  r.warmup = warmup;
  r.n_scored = static_cast<int>(scored.size());
  double sq = 0.0;
  for (const OneStep& o : scored) {
    const double e = o.y - o.summary.mean;
    sq += e * e;
    r.ll += o.plug_in;
    r.lpd += o.log_density;
  }
  r.mse = scored.empty() ? 0.0 : sq / static_cast<double>(scored.size());
  return r;
}

inline void check_learning(const FilterResult& fr, int learning) {
  if (learning < 0 || static_cast<std::size_t>(learning) >= fr.steps.size()) {
    throw ConfigError("learning period (" + std::to_string(learning) +
                      ") must be smaller than the number of filtered observations (" +
                      std::to_string(fr.steps.size()) + ")");
  }
}

// Scores the filtered steps past the learning period.
inline ScoreReport score(const ModelSpec& spec, const FilterResult& fr,
                         const ScoreOptions& options) {
  check_learning(fr, options.learning);
  const std::vector<OneStep> scored = one_step_predictives(
      spec.family, fr, options, static_cast<std::size_t>(options.learning));
  return score_from(scored, options.learning, spec.warmup());
}

enum class Criterion { MSE, LL, LPD };

inline std::optional<Criterion> parse_criterion(std::string_view s) {
  if (s == "mse") return Criterion::MSE;
  if (s == "ll") return Criterion::LL;
  if (s == "lpd") return Criterion::LPD;
  return std::nullopt;
}

struct GridRow {
  std::vector<double> deltas;  // one per block, state order
  std::optional<ScoreReport> report;
  std::string status = "ok";
  int rank = 0;
};

struct GridSearchResult {
  std::vector<GridRow> rows;  // ordered by rank
};

// Worker count: EDGLM_THREADS if set and positive, else the hardware count.
inline unsigned grid_threads(std::size_t cells) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EDGLM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) n = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(cells, 1)));
}

// Cartesian product of per-block discount values, last block varying fastest.
inline std::vector<std::vector<double>> expand_grid(const std::vector<std::vector<double>>& grid) {
  std::vector<std::vector<double>> cells{{}};
  for (const auto& values : grid) {
    if (values.empty()) throw ConfigError("discount grid has a block with no values");
    std::vector<std::vector<double>> next;
    for (const auto& prefix : cells) {
      for (double v : values) {
        auto c = prefix;
        c.push_back(v);
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

inline bool better(Criterion c, const ScoreReport& a, const ScoreReport& b) {
  switch (c) {
    case Criterion::MSE:
      return a.mse < b.mse;
    case Criterion::LL:
      return a.ll > b.ll;
    case Criterion::LPD:
      return a.lpd > b.lpd;
  }
  return false;
}

inline GridSearchResult grid_search(const ModelSpec& base, const std::vector<std::vector<double>>& grid,
                                    const Eigen::VectorXd& y, const DataTable& data,
                                    const StateMoments& init, const FilterOptions& filter_options,
                                    const ScoreOptions& score_options, Criterion criterion) {
  if (grid.size() != base.block_count()) {
    throw ConfigError("discount grid lists " + std::to_string(grid.size()) +
                      " blocks but the model has " + std::to_string(base.block_count()));
  }
  const std::vector<std::vector<double>> cells = expand_grid(grid);
  std::vector<GridRow> rows(cells.size());
  FilterOptions fopts = filter_options;
  fopts.smooth = false;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      GridRow& row = rows[i];
      row.deltas = cells[i];
      try {
        ModelSpec spec = base;
        for (std::size_t b = 0; b < spec.block_count(); ++b) spec.block(b).discount = cells[i][b];
        const FilterResult fr = filter_pass(spec, y, data, init, fopts);
        row.report = score(spec, fr, score_options);
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        row.report.reset();
        row.status = e.what();
      }
    }
  };
  const unsigned n_threads = grid_threads(cells.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex mu;
    for (unsigned k = 0; k < n_threads; ++k) {
      pool.emplace_back([&] {
        try {
          worker();
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
          next = cells.size();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::stable_sort(rows.begin(), rows.end(), [&](const GridRow& a, const GridRow& b) {
    if (a.report.has_value() != b.report.has_value()) return a.report.has_value();
    if (a.report && b.report) {
      if (better(criterion, *a.report, *b.report)) return true;
      if (better(criterion, *b.report, *a.report)) return false;
    }
    return a.deltas < b.deltas;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = static_cast<int>(i + 1);
  return {std::move(rows)};
}

}  // namespace edglm

#endif  // EDGLM_METRICS_HPP
