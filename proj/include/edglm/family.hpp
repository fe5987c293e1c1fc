#ifndef EDGLM_FAMILY_HPP
#define EDGLM_FAMILY_HPP

// Two-parameter exponential family
//
//   p(y | θ, φ) = a(y) exp{ φ [θ d1(y) + d2(y)] - ρ(θ, φ) },
//
// indexed by mean μ and precision φ, with members
//
//   Normal           N(μ, 1/φ)                        θ = μ
//   InverseGaussian  mean μ, variance μ³/φ            θ = 1/(2μ²)
//   Gamma            mean μ, variance μ²/φ            θ = 1/μ
//   Beta             Beta(μφ, (1-μ)φ)                 θ = μ
//
// and the conjugate prior exp{φ[θ T1 + T2] - τ0 ρ(θ, φ)} on (θ, φ).
//
// The stored parameters τ = (τ0, τ1, τ2) follow each family's customary sign
// convention so that the admissible regions and moment maps read naturally:
// (T1, T2) = (τ1, τ2) for Normal and Beta, (-τ1, τ2) for Gamma and
// (-τ1, -τ2/2) for the inverse Gaussian. After observing y the Gamma prior
// accumulates (y, log y) and the inverse Gaussian prior (y, 1/y).

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "edglm/errors.hpp"
#include "edglm/special_functions.hpp"

namespace edglm {

enum class FamilyId { Normal, InverseGaussian, Gamma, Beta };

inline std::string_view family_name(FamilyId f) {
  switch (f) {
    case FamilyId::Normal:
      return "normal";
    case FamilyId::InverseGaussian:
      return "inverse_gaussian";
    case FamilyId::Gamma:
      return "gamma";
    case FamilyId::Beta:
      return "beta";
  }
  return "unknown";
}

inline std::optional<FamilyId> parse_family(std::string_view name) {
  if (name == "normal") return FamilyId::Normal;
  if (name == "inverse_gaussian" || name == "ig") return FamilyId::InverseGaussian;
  if (name == "gamma") return FamilyId::Gamma;
  if (name == "beta") return FamilyId::Beta;
  return std::nullopt;
}

struct NaturalParams {
  double theta = 0.0;
  double phi = 1.0;
};

struct ConjugateParams {
  double tau0 = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.0;

  Eigen::Vector3d vec() const { return {tau0, tau1, tau2}; }
  static ConjugateParams from(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }
  friend bool operator==(const ConjugateParams&, const ConjugateParams&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const ConjugateParams& t) {
  return os << "(" << t.tau0 << ", " << t.tau1 << ", " << t.tau2 << ")";
}

struct SuffStats {
  double d1 = 0.0;
  double d2 = 0.0;
};

// Mean f and covariance Q of the linear predictor η = (g1(μ), g2(φ)).
struct PredictorMoments {
  Eigen::Vector2d f = Eigen::Vector2d::Zero();
  Eigen::Matrix2d Q = Eigen::Matrix2d::Identity();
};

namespace detail {

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline std::string support_text(FamilyId f) {
  switch (f) {
    case FamilyId::Normal:
      return "(-inf, inf)";
    case FamilyId::InverseGaussian:
    case FamilyId::Gamma:
      return "(0, inf)";
    case FamilyId::Beta:
      return "(0, 1)";
  }
  return "?";
}

inline bool in_support(FamilyId f, double y) {
  if (!std::isfinite(y)) return false;
  switch (f) {
    case FamilyId::Normal:
      return true;
    case FamilyId::InverseGaussian:
    case FamilyId::Gamma:
      return y > 0.0;
    case FamilyId::Beta:
      return y > 0.0 && y < 1.0;
  }
  return false;
}

inline void require_support(FamilyId f, double y) {
  if (!in_support(f, y)) {
    std::ostringstream os;
    os << family_name(f) << ": observation " << y << " outside support " << support_text(f);
    throw DomainError(os.str());
  }
}

inline void require_mean_precision(FamilyId f, double mu, double phi) {
  bool ok = std::isfinite(mu) && std::isfinite(phi) && phi > 0.0;
  if (f == FamilyId::InverseGaussian || f == FamilyId::Gamma) ok = ok && mu > 0.0;
  if (f == FamilyId::Beta) ok = ok && mu > 0.0 && mu < 1.0;
  if (!ok) {
    std::ostringstream os;
    os << family_name(f) << ": (mu, phi) = (" << mu << ", " << phi << ") not admissible";
    throw DomainError(os.str());
  }
}

inline double log_a(FamilyId f, double y) {
  switch (f) {
    case FamilyId::Normal:
      return -0.5 * std::log(2.0 * std::numbers::pi);
    case FamilyId::InverseGaussian:
      return -0.5 * std::log(2.0 * std::numbers::pi * y * y * y);
    case FamilyId::Gamma:
      return -std::log(y);
    case FamilyId::Beta:
      return -std::log(y) - std::log1p(-y);
  }
  return 0.0;
}

}  // namespace detail

inline bool in_support(FamilyId f, double y) { return detail::in_support(f, y); }

inline SuffStats suff_stats(FamilyId f, double y) {
  detail::require_support(f, y);
  switch (f) {
    case FamilyId::Normal:
      return {y, -0.5 * y * y};
    case FamilyId::InverseGaussian:
      return {-y, -0.5 / y};
    case FamilyId::Gamma:
      return {-y, std::log(y)};
    case FamilyId::Beta:
      return {std::log(y) - std::log1p(-y), std::log1p(-y)};
  }
  return {};
}

// log a(y), the base-measure term of the density.
inline double log_base_measure(FamilyId f, double y) {
  detail::require_support(f, y);
  return detail::log_a(f, y);
}

inline NaturalParams to_natural(FamilyId f, double mu, double phi) {
  detail::require_mean_precision(f, mu, phi);
  switch (f) {
    case FamilyId::Normal:
    case FamilyId::Beta:
      return {mu, phi};
    case FamilyId::InverseGaussian:
      return {0.5 / (mu * mu), phi};
    case FamilyId::Gamma:
      return {1.0 / mu, phi};
  }
  return {};
}

inline double rho(FamilyId f, double mu, double phi) {
  detail::require_mean_precision(f, mu, phi);
  using numerics::log_gamma;
  double r = 0.0;
  switch (f) {
    case FamilyId::Normal:
      r = 0.5 * (mu * mu * phi - std::log(phi));
      break;
    case FamilyId::InverseGaussian:
      r = -(phi / mu + 0.5 * std::log(phi));
      break;
    case FamilyId::Gamma:
      r = log_gamma(phi) - phi * std::log(phi / mu);
      break;
    case FamilyId::Beta:
      r = log_gamma(phi * mu) + log_gamma(phi * (1.0 - mu)) - log_gamma(phi);
      break;
  }
  if (!std::isfinite(r)) throw NumericError("rho: non-finite value");
  return r;
}

inline double log_density(FamilyId f, double y, double mu, double phi) {
  detail::require_support(f, y);
  const NaturalParams nat = to_natural(f, mu, phi);
  const SuffStats d = suff_stats(f, y);
  const double v = detail::log_a(f, y) + phi * (nat.theta * d.d1 + d.d2) - rho(f, mu, phi);
  if (!std::isfinite(v)) throw NumericError("log_density: non-finite value");
  return v;
}

inline Eigen::Vector2d link(FamilyId f, double mu, double phi) {
  if (!std::isfinite(mu) || !std::isfinite(phi)) throw NumericError("link: non-finite input");
  detail::require_mean_precision(f, mu, phi);
  switch (f) {
    case FamilyId::Normal:
      return {mu, std::log(phi)};
    case FamilyId::InverseGaussian:
    case FamilyId::Gamma:
      return {std::log(mu), std::log(phi)};
    case FamilyId::Beta:
      return {std::log(mu) - std::log1p(-mu), std::log(phi)};
  }
  return {};
}

struct MeanPrecision {
  double mu = 0.0;
  double phi = 1.0;
};

inline MeanPrecision inv_link(FamilyId f, const Eigen::Vector2d& eta) {
  if (!eta.allFinite()) throw NumericError("inv_link: non-finite linear predictor");
  const double phi = std::exp(eta[1]);
  switch (f) {
    case FamilyId::Normal:
      return {eta[0], phi};
    case FamilyId::InverseGaussian:
    case FamilyId::Gamma:
      return {std::exp(eta[0]), phi};
    case FamilyId::Beta:
      return {detail::logistic(eta[0]), phi};
  }
  return {};
}

inline bool admissible(FamilyId f, const ConjugateParams& t) {
  if (!std::isfinite(t.tau0) || !std::isfinite(t.tau1) || !std::isfinite(t.tau2)) return false;
  switch (f) {
    case FamilyId::Normal:
      return t.tau0 > 1.0 && t.tau2 < -t.tau1 * t.tau1 / (2.0 * t.tau0);
    case FamilyId::InverseGaussian:
      return t.tau0 > 0.0 && t.tau1 > 0.0 && t.tau1 * t.tau2 > t.tau0 * t.tau0;
    case FamilyId::Gamma:
      return t.tau0 > 0.0 && t.tau1 > 0.0 && t.tau2 < t.tau0 * std::log(t.tau1 / t.tau0);
    case FamilyId::Beta:
      return t.tau0 > 0.0 && t.tau2 < -t.tau0 * detail::softplus(t.tau1 / t.tau0);
  }
  return false;
}

namespace detail {

inline void require_admissible(FamilyId f, const ConjugateParams& t, const char* where) {
  if (!admissible(f, t)) {
    std::ostringstream os;
    os << where << ": tau " << t << " not admissible for " << family_name(f);
    throw DomainError(os.str());
  }
}

}  // namespace detail

// Increment added to τ by one observation.
inline ConjugateParams conjugate_increment(FamilyId f, double y) {
  const SuffStats d = suff_stats(f, y);
  switch (f) {
    case FamilyId::Normal:
    case FamilyId::Beta:
      return {1.0, d.d1, d.d2};
    case FamilyId::Gamma:
      return {1.0, -d.d1, d.d2};
    case FamilyId::InverseGaussian:
      return {1.0, -d.d1, -2.0 * d.d2};
  }
  return {};
}

inline ConjugateParams conjugate_update(const ConjugateParams& tau, FamilyId f, double y) {
  const ConjugateParams inc = conjugate_increment(f, y);
  const ConjugateParams post{tau.tau0 + inc.tau0, tau.tau1 + inc.tau1, tau.tau2 + inc.tau2};
  if (!admissible(f, post)) {
    std::ostringstream os;
    os << "conjugate_update: " << family_name(f) << " posterior " << post
       << " not admissible (prior " << tau << ", y = " << y << ")";
    throw ConjugacyError(os.str());
  }
  return post;
}

// Conjugate-prior moments (h(τ), H(τ)) of the linear predictor. The
// off-diagonal of H is zero for all four members.
inline PredictorMoments prior_moment_map(FamilyId f, const ConjugateParams& t) {
  detail::require_admissible(f, t, "prior_moment_map");
  const double t0 = t.tau0, t1 = t.tau1, t2 = t.tau2;
  PredictorMoments pm;
  pm.Q.setZero();
  switch (f) {
    case FamilyId::Normal: {
      const double rate = -t1 * t1 / (2.0 * t0) - t2;
      const double shape = 0.5 * (t0 + 1.0);
      pm.f = {t1 / t0, std::log(shape / rate)};
      pm.Q(0, 0) = rate / (t0 * (shape - 1.0));
      pm.Q(1, 1) = 2.0 / (t0 + 1.0);
      break;
    }
    case FamilyId::InverseGaussian: {
      pm.f = {std::log(t1 / t0), std::log(t0 * t1 / (t1 * t2 - t0 * t0))};
      pm.Q(0, 0) = t1 * t2 / (t0 * t0 * t0) - 1.0 / t0;
      pm.Q(1, 1) = 2.0 / t0;
      break;
    }
    case FamilyId::Gamma: {
      const double log_mu = std::log(t1 / t0);
      const double log_phi = std::log(t0 / (2.0 * (t0 * log_mu - t2)));
      pm.f = {log_mu, log_phi};
      pm.Q(0, 0) = 1.0 / (t0 * std::exp(log_phi));
      pm.Q(1, 1) = 2.0 / t0;
      break;
    }
    case FamilyId::Beta: {
      const double logit_mu = t1 / t0;
      const double mu = detail::logistic(logit_mu);
      // log(1 - μ̃) = -softplus(logit μ̃), stable for large |logit|
      const double log_one_minus = -detail::softplus(logit_mu);
      const double log_phi = std::log(t0 / (2.0 * (t0 * log_one_minus - t2)));
      pm.f = {logit_mu, log_phi};
      pm.Q(0, 0) = 1.0 / (t0 * mu * (1.0 - mu) * std::exp(log_phi));
      pm.Q(1, 1) = 2.0 / t0;
      break;
    }
  }
  if (!pm.f.allFinite() || !(pm.Q(0, 0) > 0.0) || !(pm.Q(1, 1) > 0.0) ||
      !std::isfinite(pm.Q(0, 0)) || !std::isfinite(pm.Q(1, 1))) {
    std::ostringstream os;
    os << "prior_moment_map: non-positive or non-finite moment for admissible tau " << t
       << " (" << family_name(f) << ")";
    throw NumericError(os.str());
  }
  return pm;
}

}  // namespace edglm

#endif  // EDGLM_FAMILY_HPP
