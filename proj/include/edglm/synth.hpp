#ifndef EDGLM_SYNTH_HPP
#define EDGLM_SYNTH_HPP

// In-model simulation: β_t = G β_{t-1} + ω_t with Gaussian ω_t, then
// y_t drawn from the family at (μ_t, φ_t) = g⁻¹(F'β_t).

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "edglm/errors.hpp"
#include "edglm/family.hpp"
#include "edglm/model_spec.hpp"

namespace edglm {

struct SynthTruth {
  Eigen::VectorXd y;
  Eigen::VectorXd mu;
  Eigen::VectorXd phi;
  Eigen::MatrixXd states;  // T x p
};

struct SynthOptions {
  int T = 120;
  std::uint64_t seed = 1;
  Eigen::VectorXd beta0;
  // Evolution variance per block in state order; empty entries mean none.
  std::vector<Eigen::MatrixXd> noise;
};

namespace detail {

inline double draw_inverse_gaussian(std::mt19937_64& rng, double mu, double lambda) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double nu = normal(rng);
  const double y0 = nu * nu;
  const double x = mu + mu * mu * y0 / (2.0 * lambda) -
                   mu / (2.0 * lambda) * std::sqrt(4.0 * mu * lambda * y0 + mu * mu * y0 * y0);
  return unif(rng) <= mu / (mu + x) ? x : mu * mu / x;
}

inline double draw_observation(std::mt19937_64& rng, FamilyId f, double mu, double phi) {
  switch (f) {
    case FamilyId::Normal:
      return std::normal_distribution<double>(mu, 1.0 / std::sqrt(phi))(rng);
    case FamilyId::InverseGaussian:
      return draw_inverse_gaussian(rng, mu, phi);
    case FamilyId::Gamma:
      return std::gamma_distribution<double>(phi, mu / phi)(rng);
    case FamilyId::Beta: {
      const double a = std::gamma_distribution<double>(mu * phi, 1.0)(rng);
      const double b = std::gamma_distribution<double>((1.0 - mu) * phi, 1.0)(rng);
      return a / (a + b);
    }
  }
  return 0.0;
}

}  // namespace detail

inline SynthTruth simulate(const ModelSpec& spec, const SynthOptions& options) {
  if (options.T < 1) throw ConfigError("synth.T must be at least 1");
  for (std::size_t b = 0; b < spec.block_count(); ++b) {
    if (spec.block(b).kind == BlockKind::Regression) {
      throw ConfigError("synth supports polynomial and harmonic blocks only");
    }
  }
  const Eigen::Index p = spec.p();
  if (options.beta0.size() != p) {
    throw ConfigError("synth.beta0 must have " + std::to_string(p) + " entries");
  }
  if (options.noise.size() != spec.block_count()) {
    throw StructuralError("synth noise needs one entry per block");
  }
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(p, p);
  Eigen::Index at = 0;
  for (std::size_t b = 0; b < spec.block_count(); ++b) {
    const Eigen::Index n = spec.block(b).dim();
    const Eigen::MatrixXd& w = options.noise[b];
    if (w.size() != 0) {
      if (w.rows() != n || w.cols() != n) {
        throw ConfigError("synth_w of block " + std::to_string(b + 1) + " must be " +
                          std::to_string(n) + "x" + std::to_string(n));
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(w);
      if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() < 0.0).any()) {
        throw ConfigError("synth_w of block " + std::to_string(b + 1) + " is not PSD");
      }
      const Eigen::MatrixXd L = ldlt.matrixL();
      const Eigen::VectorXd sd = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
      chol.block(at, at, n, n) =
          ldlt.transpositionsP().transpose() * (L * sd.asDiagonal());
    }
    at += n;
  }

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const DataTable empty;
  SynthTruth out;
  out.y.resize(options.T);
  out.mu.resize(options.T);
  out.phi.resize(options.T);
  out.states.resize(options.T, p);
  Eigen::VectorXd beta = options.beta0;
  for (int t = 0; t < options.T; ++t) {
    const DesignAt design = design_at(spec, t, empty);
    bool accepted = false;
    for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
      Eigen::VectorXd z(p);
      for (Eigen::Index i = 0; i < p; ++i) z[i] = normal(rng);
      const Eigen::VectorXd next = design.G * beta + chol * z;
      const Eigen::Vector2d eta = design.F.transpose() * next;
      if (!eta.allFinite()) continue;
      const MeanPrecision mp = inv_link(spec.family, eta);
      if (!std::isfinite(mp.mu) || !std::isfinite(mp.phi) || !(mp.phi > 0.0)) continue;
      if (spec.family == FamilyId::Beta && !(mp.mu > 0.0 && mp.mu < 1.0)) continue;
      const double y = detail::draw_observation(rng, spec.family, mp.mu, mp.phi);
      if (!std::isfinite(y) || !in_support(spec.family, y)) continue;
      beta = next;
      out.y[t] = y;
      out.mu[t] = mp.mu;
      out.phi[t] = mp.phi;
      out.states.row(t) = beta.transpose();
      accepted = true;
    }
    if (!accepted) {
      throw NumericError("synth: 100 rejected draws at t=" + std::to_string(t + 1));
    }
  }
  return out;
}

}  // namespace edglm

#endif  // EDGLM_SYNTH_HPP
