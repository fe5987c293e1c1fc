#ifndef EDGLM_FILTER_HPP
#define EDGLM_FILTER_HPP

// Extended conjugate updating. At each t:
//
//   1. evolve      a = G m, R = D G C G' D (+ W), f = F'a, Q = F'RF
//   2. equate      τ = argmin Δ(τ; f, Q)' Ω Δ(τ; f, Q)
//   3. update      τ* = τ + (1, d1(y), d2(y)), (f*, Q*) = (h(τ*), H(τ*))
//   4. linear Bayes
//                  m = a + R F Q⁻¹ (f* - f)
//                  C = R + R F Q⁻¹ (Q* - Q) Q⁻¹ F' R
//
// followed, on request, by the backward smoothing recursion.

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "edglm/errors.hpp"
#include "edglm/family.hpp"
#include "edglm/model_spec.hpp"
#include "edglm/numerics.hpp"

namespace edglm {

struct StateMoments {
  Eigen::VectorXd m;
  Eigen::MatrixXd C;
};

struct PriorStateMoments {
  Eigen::VectorXd a;
  Eigen::MatrixXd R;
};

using Weights = Eigen::Matrix4d;

namespace detail {

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& A) { return 0.5 * (A + A.transpose()); }

// Adds 1e-10 to the diagonal of a 2x2 predictor covariance when its
// determinant falls below 1e-12.
inline Eigen::Matrix2d jitter_q(Eigen::Matrix2d Q) {
  if (Q.determinant() < 1e-12) Q.diagonal().array() += 1e-10;
  return Q;
}

// Same policy for state covariances, judged on the correlation determinant so
// that the test does not depend on the units of the states.
inline Eigen::MatrixXd jitter_r(Eigen::MatrixXd R) {
  const Eigen::VectorXd sd = R.diagonal().cwiseMax(0.0).cwiseSqrt();
  double log_det = -std::numeric_limits<double>::infinity();
  if ((sd.array() > 0.0).all()) {
    const Eigen::VectorXd inv = sd.cwiseInverse();
    const Eigen::MatrixXd corr = inv.asDiagonal() * R * inv.asDiagonal();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(corr);
    if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
      log_det = ldlt.vectorD().array().log().sum();
    }
  }
  if (log_det < std::log(1e-12)) R.diagonal().array() += 1e-10;
  return R;
}

}  // namespace detail

struct EvolveResult {
  PriorStateMoments prior;
  PredictorMoments predictor;
};

inline EvolveResult evolve(const StateMoments& prev, const DesignAt& design) {
  const Eigen::Index p = design.G.rows();
  if (prev.m.size() != p || prev.C.rows() != p || prev.C.cols() != p || design.F.rows() != p ||
      design.d.size() != p || design.W.rows() != p) {
    std::ostringstream os;
    os << "evolve: state of dimension " << prev.m.size() << " against design of dimension " << p;
    throw StructuralError(os.str());
  }
  EvolveResult out;
  out.prior.a = design.G * prev.m;
  const Eigen::MatrixXd gcg = design.G * prev.C * design.G.transpose();
  out.prior.R = detail::symmetrize(design.d.asDiagonal() * gcg * design.d.asDiagonal() + design.W);
  out.predictor.f = design.F.transpose() * out.prior.a;
  const Eigen::Matrix2d Q = design.F.transpose() * out.prior.R * design.F;
  out.predictor.Q = detail::jitter_q(0.5 * (Q + Q.transpose()));
  return out;
}

struct EquateResult {
  ConjugateParams tau;
  double objective = 0.0;
  int iterations = 0;
};

namespace detail {

// Solves the q22, f1 and f2 equations exactly and projects into the
// admissible region. Exact whenever (f, Q) is in the image of the moment map.
inline ConjugateParams equate_init(FamilyId family, const PredictorMoments& pm) {
  constexpr double kMargin = 1e-6;
  const double f1 = pm.f[0], f2 = pm.f[1], q22 = pm.Q(1, 1);
  ConjugateParams t;
  switch (family) {
    case FamilyId::Normal: {
      t.tau0 = std::max(2.0 / q22 - 1.0, 1.0 + kMargin);
      t.tau1 = t.tau0 * f1;
      const double rate = 0.5 * (t.tau0 + 1.0) * std::exp(-f2);
      t.tau2 = -t.tau1 * t.tau1 / (2.0 * t.tau0) - rate;
      break;
    }
    case FamilyId::InverseGaussian: {
      t.tau0 = std::max(2.0 / q22, kMargin);
      t.tau1 = t.tau0 * std::exp(f1);
      t.tau2 = t.tau0 * t.tau0 / t.tau1 + t.tau0 * std::exp(-f2);
      break;
    }
    case FamilyId::Gamma: {
      t.tau0 = std::max(2.0 / q22, kMargin);
      t.tau1 = t.tau0 * std::exp(f1);
      t.tau2 = t.tau0 * f1 - 0.5 * t.tau0 * std::exp(-f2);
      break;
    }
    case FamilyId::Beta: {
      t.tau0 = std::max(2.0 / q22, kMargin);
      t.tau1 = t.tau0 * f1;
      t.tau2 = -t.tau0 * softplus(f1) - 0.5 * t.tau0 * std::exp(-f2);
      break;
    }
  }
  return t;
}

inline numerics::BoxSpec equate_box(FamilyId family) {
  using numerics::Transform;
  using Span = std::span<const double>;
  switch (family) {
    case FamilyId::Normal:
      return {Transform::lower_bounded(1.0), Transform::free(),
              Transform::upper_bounded_by([](Span x) { return -x[1] * x[1] / (2.0 * x[0]); })};
    case FamilyId::InverseGaussian:
      return {Transform::lower_bounded(0.0), Transform::lower_bounded(0.0),
              Transform::lower_bounded_by([](Span x) { return x[0] * x[0] / x[1]; })};
    case FamilyId::Gamma:
      return {Transform::lower_bounded(0.0), Transform::lower_bounded(0.0),
              Transform::upper_bounded_by([](Span x) { return x[0] * std::log(x[1] / x[0]); })};
    case FamilyId::Beta:
      return {Transform::lower_bounded(0.0), Transform::free(),
              Transform::upper_bounded_by([](Span x) { return -x[0] * softplus(x[1] / x[0]); })};
  }
  return {};
}

inline double equate_objective(FamilyId family, const PredictorMoments& pm, const Weights& omega,
                               const ConjugateParams& t) {
  if (!admissible(family, t)) return std::numeric_limits<double>::infinity();
  PredictorMoments h;
  try {
    h = prior_moment_map(family, t);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
  const Eigen::Vector4d delta(pm.f[0] - h.f[0], pm.f[1] - h.f[1], pm.Q(0, 0) - h.Q(0, 0),
                              pm.Q(1, 1) - h.Q(1, 1));
  return delta.dot(omega * delta);
}

}  // namespace detail

// Prior parameters whose moments best match (f, Q) under the weights Ω.
inline EquateResult equate_prior_result(FamilyId family, const PredictorMoments& pm,
                                        const Weights& omega = Weights::Identity(),
                                        const std::optional<ConjugateParams>& warm_start =
                                            std::nullopt) {
  if (!pm.f.allFinite() || !pm.Q.allFinite() || !(pm.Q(0, 0) > 0.0) || !(pm.Q(1, 1) > 0.0)) {
    throw DomainError("equate_prior: predictor moments must be finite with positive variances");
  }
  const auto objective_at = [&](const ConjugateParams& t) {
    return detail::equate_objective(family, pm, omega, t);
  };
  ConjugateParams start = detail::equate_init(family, pm);
  double start_value = objective_at(start);
  if (warm_start && admissible(family, *warm_start)) {
    const double warm_value = objective_at(*warm_start);
    if (warm_value < start_value) {
      start = *warm_start;
      start_value = warm_value;
    }
  }
  if (!std::isfinite(start_value)) {
    std::ostringstream os;
    os << "equate_prior: no admissible starting point for f=(" << pm.f.transpose() << ")";
    throw EquateError(os.str(), start_value);
  }

  const numerics::BoxSpec box = detail::equate_box(family);
  const numerics::Objective fn = [&](const Eigen::VectorXd& x) {
    return objective_at(ConjugateParams{x[0], x[1], x[2]});
  };
  const numerics::OptimResult opt = numerics::minimize(fn, start.vec(), box);
  EquateResult out;
  out.tau = ConjugateParams{opt.argmin[0], opt.argmin[1], opt.argmin[2]};
  out.objective = opt.objective;
  out.iterations = opt.iterations;
  if (!opt.converged || !admissible(family, out.tau)) {
    std::ostringstream os;
    os << "equate_prior: optimizer did not converge (best tau " << out.tau << ", objective "
       << opt.objective << ")";
    throw EquateError(os.str(), opt.objective);
  }
  return out;
}

inline ConjugateParams equate_prior(FamilyId family, const PredictorMoments& pm,
                                    const Weights& omega = Weights::Identity(),
                                    const std::optional<ConjugateParams>& warm_start =
                                        std::nullopt) {
  return equate_prior_result(family, pm, omega, warm_start).tau;
}

struct UpdateResult {
  ConjugateParams tau_star;
  Eigen::Vector2d f_star;
  Eigen::Matrix2d Q_star;
};

inline UpdateResult update_step(FamilyId family, const ConjugateParams& tau, double y) {
  UpdateResult out;
  out.tau_star = conjugate_update(tau, family, y);
  const PredictorMoments pm = prior_moment_map(family, out.tau_star);
  out.f_star = pm.f;
  out.Q_star = pm.Q;
  return out;
}

inline StateMoments linear_bayes(const PriorStateMoments& prior, const Eigen::MatrixXd& F,
                                 const PredictorMoments& pm, const Eigen::Vector2d& f_star,
                                 const Eigen::Matrix2d& Q_star) {
  Eigen::LLT<Eigen::Matrix2d> llt(pm.Q);
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << "linear_bayes: Q is not positive definite after jitter (Q = [" << pm.Q.row(0) << "; "
       << pm.Q.row(1) << "], det " << pm.Q.determinant() << ")";
    throw DegeneracyError(os.str());
  }
  // gain' = Q⁻¹ F' R
  const Eigen::MatrixXd rf = prior.R * F;
  const Eigen::MatrixXd gain = llt.solve(rf.transpose()).transpose();
  StateMoments out;
  out.m = prior.a + gain * (f_star - pm.f);
  out.C = detail::symmetrize(prior.R + gain * (Q_star - pm.Q) * gain.transpose());
  return out;
}

struct StepRecord {
  Eigen::Index row = 0;  // 0-based data row
  double y = 0.0;
  Eigen::MatrixXd G;
  Eigen::MatrixXd F;
  Eigen::VectorXd a;
  Eigen::MatrixXd R;
  Eigen::Vector2d f;
  Eigen::Matrix2d Q;
  ConjugateParams tau;
  ConjugateParams tau_star;
  Eigen::Vector2d f_star;
  Eigen::Matrix2d Q_star;
  double equate_objective = 0.0;
  Eigen::VectorXd m;
  Eigen::MatrixXd C;
};

struct FilterResult {
  std::vector<StepRecord> steps;
  std::vector<StateMoments> smoothed;
  StateMoments init;
  Eigen::Index first_row = 0;
};

struct FilterOptions {
  Weights omega = Weights::Identity();
  bool smooth = true;
};

std::vector<StateMoments> smooth(const FilterResult& fr);

inline StateMoments default_init(const ModelSpec& spec) {
  return {Eigen::VectorXd::Zero(spec.p()), Eigen::MatrixXd::Identity(spec.p(), spec.p())};
}

// Checks every observation against the family support before filtering.
inline void validate_series(FamilyId family, const Eigen::VectorXd& y, Eigen::Index first_row) {
  for (Eigen::Index t = first_row; t < y.size(); ++t) {
    if (!std::isfinite(y[t]) || !in_support(family, y[t])) {
      std::ostringstream os;
      os << "row " << t + 1 << ": y = " << y[t] << " is outside the " << family_name(family)
         << " support";
      throw DataError(os.str());
    }
  }
}

// Filters y (rows of `data` aligned with y) from the first row past warm-up.
inline FilterResult filter_pass(const ModelSpec& spec, const Eigen::VectorXd& y,
                                const DataTable& data, const StateMoments& init,
                                const FilterOptions& options = {}) {
  spec.validate(&data);
  const Eigen::Index first = spec.warmup();
  if (y.size() <= first) throw DataError("series is empty after the warm-up rows");
  if (init.m.size() != spec.p() || init.C.rows() != spec.p() || init.C.cols() != spec.p()) {
    throw StructuralError("initial state dimension " + std::to_string(init.m.size()) +
                          " does not match model dimension " + std::to_string(spec.p()));
  }
  validate_series(spec.family, y, first);

  FilterResult fr;
  fr.init = init;
  fr.first_row = first;
  fr.steps.reserve(static_cast<std::size_t>(y.size() - first));
  StateMoments state = init;
  std::optional<ConjugateParams> warm;
  for (Eigen::Index t = first; t < y.size(); ++t) {
    const std::size_t index = static_cast<std::size_t>(t + 1);
    std::string step = "design";
    try {
      StepRecord rec;
      rec.row = t;
      rec.y = y[t];
      const DesignAt design = design_at(spec, t, data);
      rec.G = design.G;
      rec.F = design.F;
      step = "evolve";
      const EvolveResult ev = evolve(state, design);
      rec.a = ev.prior.a;
      rec.R = ev.prior.R;
      rec.f = ev.predictor.f;
      rec.Q = ev.predictor.Q;
      step = "equate_prior";
      const EquateResult eq = equate_prior_result(spec.family, ev.predictor, options.omega, warm);
      rec.tau = eq.tau;
      rec.equate_objective = eq.objective;
      warm = eq.tau;
      step = "update_step";
      const UpdateResult up = update_step(spec.family, eq.tau, y[t]);
      rec.tau_star = up.tau_star;
      rec.f_star = up.f_star;
      rec.Q_star = up.Q_star;
      step = "linear_bayes";
      state = linear_bayes(ev.prior, design.F, ev.predictor, up.f_star, up.Q_star);
      if (!state.m.allFinite() || !state.C.allFinite()) {
        throw NumericError("non-finite posterior state moments");
      }
      rec.m = state.m;
      rec.C = state.C;
      fr.steps.push_back(std::move(rec));
    } catch (const FilterError&) {
      throw;
    } catch (const WarmupError&) {
      throw;
    } catch (const HorizonError&) {
      throw;
    } catch (const Error& e) {
      throw FilterError(index, step, e.what());
    }
  }
  if (options.smooth) fr.smoothed = smooth(fr);
  return fr;
}

// Backward recursion from m^s_T = m_T, C^s_T = C_T.
inline std::vector<StateMoments> smooth(const FilterResult& fr) {
  const std::size_t n = fr.steps.size();
  std::vector<StateMoments> out(n);
  if (n == 0) return out;
  out[n - 1] = {fr.steps[n - 1].m, fr.steps[n - 1].C};
  for (std::size_t k = n - 1; k-- > 0;) {
    const StepRecord& cur = fr.steps[k];
    const StepRecord& next = fr.steps[k + 1];
    const Eigen::MatrixXd R = detail::jitter_r(next.R);
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) {
      throw DegeneracyError("smooth: R is singular at t=" + std::to_string(next.row + 1));
    }
    // B = C G' R⁻¹
    const Eigen::MatrixXd B = llt.solve(next.G * cur.C).transpose();
    out[k].m = cur.m + B * (out[k + 1].m - next.a);
    out[k].C = detail::symmetrize(cur.C + B * (out[k + 1].C - next.R) * B.transpose());
  }
  return out;
}

}  // namespace edglm

#endif  // EDGLM_FILTER_HPP
