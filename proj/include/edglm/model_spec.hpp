#ifndef EDGLM_MODEL_SPEC_HPP
#define EDGLM_MODEL_SPEC_HPP

// Structural blocks and their block-diagonal assembly
//
//   η_t = F_t' β_t,   β_t = G_t β_{t-1} + ω_t,
//
// with mean blocks feeding η1 and precision blocks feeding η2. Each block
// carries either a discount factor δ (R = D G C G' D, D = δ^{-1/2} I) or an
// explicit evolution variance W, which wins when both are given.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "edglm/errors.hpp"
#include "edglm/family.hpp"

namespace edglm {

// Numeric table with named columns; rows are time points.
struct DataTable {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;

  Eigen::Index rows() const { return values.rows(); }

  std::optional<Eigen::Index> find(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) return std::nullopt;
    return static_cast<Eigen::Index>(it - columns.begin());
  }

  Eigen::Index index_of(const std::string& name) const {
    if (auto i = find(name)) return *i;
    throw ConfigError("unknown data column '" + name + "'");
  }
};

enum class BlockKind { Polynomial, Harmonic, Regression };

struct Block {
  BlockKind kind = BlockKind::Polynomial;
  std::string name;
  int order = 1;                     // Polynomial
  double omega = 0.0;                // Harmonic, radians per step
  std::vector<std::string> columns;  // Regression
  int lags = 0;
  bool intercept = true;
  double discount = 1.0;
  std::optional<Eigen::MatrixXd> w;  // explicit evolution variance

  Eigen::Index dim() const {
    switch (kind) {
      case BlockKind::Polynomial:
        return order;
      case BlockKind::Harmonic:
        return 2;
      case BlockKind::Regression:
        return (intercept ? 1 : 0) + static_cast<Eigen::Index>(columns.size()) * lags;
    }
    return 0;
  }

  int max_lag() const { return kind == BlockKind::Regression ? lags : 0; }

  Eigen::MatrixXd local_g() const {
    const Eigen::Index n = dim();
    Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, n);
    if (kind == BlockKind::Polynomial) {
      for (Eigen::Index i = 0; i + 1 < n; ++i) g(i, i + 1) = 1.0;
    } else if (kind == BlockKind::Harmonic) {
      const double c = std::cos(omega), s = std::sin(omega);
      g << c, s, -s, c;
    }
    return g;
  }

  // Local regression vector at row t. Regression rows are lag-major:
  // (1, x_{1,t-1}, ..., x_{k,t-1}, x_{1,t-2}, ...).
  Eigen::VectorXd local_f(const DataTable& data, Eigen::Index t) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(dim());
    if (kind != BlockKind::Regression) {
      f[0] = 1.0;
      return f;
    }
    Eigen::Index k = 0;
    if (intercept) f[k++] = 1.0;
    for (int lag = 1; lag <= lags; ++lag) {
      const Eigen::Index row = t - lag;
      for (const std::string& col : columns) {
        if (row < 0) {
          throw WarmupError("row " + std::to_string(t + 1) + ": lag " + std::to_string(lag) +
                            " of '" + col + "' precedes the data");
        }
        if (row >= data.rows()) {
          throw HorizonError("covariate '" + col + "' is not available at row " +
                             std::to_string(row + 1) + " (data ends at row " +
                             std::to_string(data.rows()) + ")");
        }
        f[k++] = data.values(row, data.index_of(col));
      }
    }
    return f;
  }
};

inline Block polynomial_block(int order) {
  if (order < 1) throw ConfigError("polynomial block order must be at least 1");
  Block b;
  b.kind = BlockKind::Polynomial;
  b.order = order;
  return b;
}

inline Block harmonic_block(double omega) {
  if (!(omega > 0.0 && omega <= std::numbers::pi)) {
    throw ConfigError("harmonic block frequency must lie in (0, pi]");
  }
  Block b;
  b.kind = BlockKind::Harmonic;
  b.omega = omega;
  return b;
}

inline Block regression_block(std::vector<std::string> columns, int lags, bool intercept = true) {
  if (columns.empty()) throw ConfigError("regression block needs at least one column");
  if (lags < 1) throw ConfigError("regression block lags must be at least 1");
  Block b;
  b.kind = BlockKind::Regression;
  b.columns = std::move(columns);
  b.lags = lags;
  b.intercept = intercept;
  return b;
}

struct DesignAt {
  Eigen::MatrixXd F;  // p x 2
  Eigen::MatrixXd G;  // p x p
  Eigen::VectorXd d;  // diagonal of D
  Eigen::MatrixXd W;  // explicit evolution variance, zero on discounted blocks

  Eigen::MatrixXd D() const { return d.asDiagonal(); }
};

struct ModelSpec {
  FamilyId family = FamilyId::Normal;
  std::vector<Block> mean_blocks;
  std::vector<Block> precision_blocks;

  Eigen::Index p1() const {
    Eigen::Index n = 0;
    for (const Block& b : mean_blocks) n += b.dim();
    return n;
  }
  Eigen::Index p2() const {
    Eigen::Index n = 0;
    for (const Block& b : precision_blocks) n += b.dim();
    return n;
  }
  Eigen::Index p() const { return p1() + p2(); }

  std::size_t block_count() const { return mean_blocks.size() + precision_blocks.size(); }

  // Blocks in state order: mean blocks first.
  const Block& block(std::size_t i) const {
    return i < mean_blocks.size() ? mean_blocks[i] : precision_blocks[i - mean_blocks.size()];
  }
  Block& block(std::size_t i) {
    return i < mean_blocks.size() ? mean_blocks[i] : precision_blocks[i - mean_blocks.size()];
  }

  // Rows consumed to populate lagged covariates.
  int warmup() const {
    int lag = 0;
    for (std::size_t i = 0; i < block_count(); ++i) lag = std::max(lag, block(i).max_lag());
    return lag;
  }

  // Checks block parameters and covariate references against the data.
  void validate(const DataTable* data = nullptr) const {
    if (mean_blocks.empty() || precision_blocks.empty()) {
      throw ConfigError("model needs at least one mean block and one precision block");
    }
    for (std::size_t i = 0; i < block_count(); ++i) {
      const Block& b = block(i);
      const std::string label = b.name.empty() ? "block " + std::to_string(i + 1) : b.name;
      if (!(b.discount > 0.0 && b.discount <= 1.0)) {
        throw ConfigError(label + ": discount must lie in (0, 1]");
      }
      if (b.w && (b.w->rows() != b.dim() || b.w->cols() != b.dim())) {
        throw ConfigError(label + ": w must be " + std::to_string(b.dim()) + "x" +
                          std::to_string(b.dim()));
      }
      if (b.kind == BlockKind::Regression && data != nullptr) {
        for (const std::string& c : b.columns) data->index_of(c);
      }
    }
  }
};

inline DesignAt design_at(const ModelSpec& spec, Eigen::Index t, const DataTable& data) {
  const Eigen::Index p = spec.p(), p1 = spec.p1();
  DesignAt out;
  out.F = Eigen::MatrixXd::Zero(p, 2);
  out.G = Eigen::MatrixXd::Zero(p, p);
  out.d = Eigen::VectorXd::Ones(p);
  out.W = Eigen::MatrixXd::Zero(p, p);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < spec.block_count(); ++i) {
    const Block& b = spec.block(i);
    const Eigen::Index n = b.dim();
    const int column = at < p1 ? 0 : 1;
    out.F.block(at, column, n, 1) = b.local_f(data, t);
    out.G.block(at, at, n, n) = b.local_g();
    if (b.w) {
      out.W.block(at, at, n, n) = *b.w;
    } else {
      out.d.segment(at, n).setConstant(1.0 / std::sqrt(b.discount));
    }
    at += n;
  }
  return out;
}

}  // namespace edglm

#endif  // EDGLM_MODEL_SPEC_HPP
