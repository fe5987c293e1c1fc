#ifndef EDGLM_KAPPA_HPP
#define EDGLM_KAPPA_HPP

// Normalizing constant κ(τ) of the conjugate prior,
//
//   κ(τ)^{-1} = ∫∫ exp{φ[θ T1 + T2] - τ0 ρ(θ, φ)} dθ dφ,
//
// evaluated in the linear-predictor coordinates η = (g1(μ), log φ), with the
// Jacobian of (θ, φ) -> η folded into the log-integrand. The Normal member has
// a closed normal-gamma form; the others use a Laplace approximation with the
// next-order expansion term, locating the mode by damped Newton steps on the
// exact gradient and Hessian.

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

#include <Eigen/Dense>

#include "edglm/errors.hpp"
#include "edglm/family.hpp"
#include "edglm/numerics.hpp"
#include "edglm/special_functions.hpp"

namespace edglm {

struct IntegrandDerivatives {
  double value = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
};

namespace detail {

inline IntegrandDerivatives integrand_normal(const ConjugateParams& t, double u, double v) {
  const double phi = std::exp(v);
  const double mu = u;
  const double lin = mu * t.tau1 + t.tau2;
  IntegrandDerivatives d;
  d.value = phi * lin - 0.5 * t.tau0 * (mu * mu * phi - v) + v;
  d.gradient[0] = phi * (t.tau1 - t.tau0 * mu);
  d.gradient[1] = phi * lin - 0.5 * t.tau0 * mu * mu * phi + 0.5 * t.tau0 + 1.0;
  d.hessian(0, 0) = -t.tau0 * phi;
  d.hessian(0, 1) = d.hessian(1, 0) = phi * (t.tau1 - t.tau0 * mu);
  d.hessian(1, 1) = phi * lin - 0.5 * t.tau0 * mu * mu * phi;
  return d;
}

inline IntegrandDerivatives integrand_beta(const ConjugateParams& t, double u, double v,
                                           bool derivatives) {
  using numerics::digamma;
  using numerics::log_gamma;
  using numerics::trigamma;
  const double phi = std::exp(v);
  const double mu = logistic(u);
  const double nu = logistic(-u);
  const double a = phi * mu, b = phi * nu;
  IntegrandDerivatives d;
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(phi)) {
    d.value = -std::numeric_limits<double>::infinity();
    return d;
  }
  const double log_mu = -softplus(-u), log_nu = -softplus(u);
  d.value = phi * (mu * t.tau1 + t.tau2) +
            t.tau0 * (log_gamma(phi) - log_gamma(a) - log_gamma(b)) + log_mu + log_nu + v;
  if (!derivatives) return d;

  const double psi_phi = digamma(phi), psi_a = digamma(a), psi_b = digamma(b);
  const double tri_phi = trigamma(phi), tri_a = trigamma(a), tri_b = trigamma(b);
  const double s = mu * nu;
  const double dd = t.tau1 - t.tau0 * (psi_a - psi_b);
  const double bracket = psi_phi - mu * psi_a - nu * psi_b;
  d.gradient[0] = phi * s * dd + (nu - mu);
  d.gradient[1] = phi * (mu * t.tau1 + t.tau2) + t.tau0 * phi * bracket + 1.0;
  const double dd_u = -t.tau0 * phi * s * (tri_a + tri_b);
  const double dd_v = -t.tau0 * phi * (mu * tri_a - nu * tri_b);
  d.hessian(0, 0) = phi * s * (nu - mu) * dd + phi * s * dd_u - 2.0 * s;
  d.hessian(0, 1) = d.hessian(1, 0) = phi * s * dd + phi * s * dd_v;
  d.hessian(1, 1) = phi * (mu * t.tau1 + t.tau2) + t.tau0 * phi * bracket +
                    t.tau0 * phi * phi * (tri_phi - mu * mu * tri_a - nu * nu * tri_b);
  return d;
}

inline IntegrandDerivatives integrand_gamma(const ConjugateParams& t, double u, double v,
                                            bool derivatives) {
  using numerics::digamma;
  using numerics::log_gamma;
  using numerics::trigamma;
  const double phi = std::exp(v);
  const double inv_mu = std::exp(-u);
  IntegrandDerivatives d;
  if (!(phi > 0.0) || !std::isfinite(phi) || !std::isfinite(inv_mu)) {
    d.value = -std::numeric_limits<double>::infinity();
    return d;
  }
  const double lin = -t.tau1 * inv_mu + t.tau2;
  d.value = phi * lin - t.tau0 * (log_gamma(phi) - phi * v + phi * u) - u + v;
  if (!derivatives) return d;
  const double psi = digamma(phi), tri = trigamma(phi);
  d.gradient[0] = phi * t.tau1 * inv_mu - t.tau0 * phi - 1.0;
  d.gradient[1] = phi * lin - t.tau0 * (phi * psi - phi * v - phi + phi * u) + 1.0;
  d.hessian(0, 0) = -phi * t.tau1 * inv_mu;
  d.hessian(0, 1) = d.hessian(1, 0) = phi * t.tau1 * inv_mu - t.tau0 * phi;
  d.hessian(1, 1) =
      phi * lin - t.tau0 * (phi * psi + phi * phi * tri - phi * v - 2.0 * phi + phi * u);
  return d;
}

inline IntegrandDerivatives integrand_inverse_gaussian(const ConjugateParams& t, double u,
                                                       double v) {
  const double phi = std::exp(v);
  const double e1 = std::exp(-u);
  const double e2 = e1 * e1;
  IntegrandDerivatives d;
  const double lin = -0.5 * t.tau1 * e2 - 0.5 * t.tau2;
  d.value = phi * lin + t.tau0 * (phi * e1 + 0.5 * v) - 2.0 * u + v;
  d.gradient[0] = phi * t.tau1 * e2 - t.tau0 * phi * e1 - 2.0;
  d.gradient[1] = phi * lin + t.tau0 * phi * e1 + 0.5 * t.tau0 + 1.0;
  d.hessian(0, 0) = -2.0 * phi * t.tau1 * e2 + t.tau0 * phi * e1;
  d.hessian(0, 1) = d.hessian(1, 0) = phi * t.tau1 * e2 - t.tau0 * phi * e1;
  d.hessian(1, 1) = phi * lin + t.tau0 * phi * e1;
  if (!std::isfinite(d.value)) d.value = -std::numeric_limits<double>::infinity();
  return d;
}

}  // namespace detail

// Log-integrand of κ(τ)^{-1} at η, with its exact gradient and Hessian.
inline IntegrandDerivatives conjugate_log_integrand_derivatives(FamilyId f,
                                                                const ConjugateParams& t,
                                                                const Eigen::Vector2d& eta,
                                                                bool derivatives = true) {
  switch (f) {
    case FamilyId::Normal:
      return detail::integrand_normal(t, eta[0], eta[1]);
    case FamilyId::InverseGaussian:
      return detail::integrand_inverse_gaussian(t, eta[0], eta[1]);
    case FamilyId::Gamma:
      return detail::integrand_gamma(t, eta[0], eta[1], derivatives);
    case FamilyId::Beta:
      return detail::integrand_beta(t, eta[0], eta[1], derivatives);
  }
  return {};
}

inline double conjugate_log_integrand(FamilyId f, const ConjugateParams& t,
                                      const Eigen::Vector2d& eta) {
  return conjugate_log_integrand_derivatives(f, t, eta, false).value;
}

// Closed normal-gamma form: μ | φ ~ N(τ1/τ0, 1/(τ0 φ)), φ ~ Gamma((τ0+1)/2, rate b),
// b = -τ1²/(2τ0) - τ2.
inline double normal_log_kappa(const ConjugateParams& t) {
  detail::require_admissible(FamilyId::Normal, t, "normal_log_kappa");
  const double rate = -t.tau1 * t.tau1 / (2.0 * t.tau0) - t.tau2;
  const double shape = 0.5 * (t.tau0 + 1.0);
  const double log_integral = 0.5 * std::log(2.0 * std::numbers::pi / t.tau0) +
                              numerics::log_gamma(shape) - shape * std::log(rate);
  return -log_integral;
}

struct KappaLaplace {
  Eigen::Vector2d mode = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
  double log_f_at_mode = 0.0;
  double first_order = 0.0;  // log ∫ at first order
  double correction = 0.0;   // next-order expansion term
  int newton_steps = 0;
};

// Mode and curvature of the conjugate log-integrand. `start` seeds the
// search; without one the mode-based moment map supplies it.
inline KappaLaplace kappa_laplace(FamilyId f, const ConjugateParams& t,
                                  const std::optional<Eigen::Vector2d>& start = std::nullopt,
                                  bool second_order = true) {
  detail::require_admissible(f, t, "log_kappa");
  Eigen::Vector2d eta = start ? *start : prior_moment_map(f, t).f;
  IntegrandDerivatives cur = conjugate_log_integrand_derivatives(f, t, eta);
  if (!std::isfinite(cur.value)) {
    eta = prior_moment_map(f, t).f;
    cur = conjugate_log_integrand_derivatives(f, t, eta);
  }

  KappaLaplace out;
  bool done = false;
  for (int it = 0; it < 100 && !done; ++it) {
    Eigen::LLT<Eigen::Matrix2d> llt(-cur.hessian);
    if (llt.info() != Eigen::Success || !cur.gradient.allFinite()) break;
    Eigen::Vector2d step = llt.solve(cur.gradient);
    double scale = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Eigen::Vector2d trial = eta + scale * step;
      IntegrandDerivatives next = conjugate_log_integrand_derivatives(f, t, trial);
      if (std::isfinite(next.value) && next.value >= cur.value - 1e-12 * std::abs(cur.value)) {
        eta = trial;
        cur = next;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    ++out.newton_steps;
    if (!improved) break;
    if ((scale * step).lpNorm<Eigen::Infinity>() < 1e-11) done = true;
  }

  if (!done) {
    // fall back to the simplex search in η, then polish with Newton
    const numerics::Objective neg = [&](const Eigen::VectorXd& x) {
      return -conjugate_log_integrand(f, t, Eigen::Vector2d(x[0], x[1]));
    };
    const numerics::OptimResult opt =
        numerics::minimize(neg, Eigen::VectorXd(eta), numerics::free_box(2), 1e-15,
                           numerics::MinimizeOptions{1e-11, 4000, 3});
    if (!opt.converged) {
      std::ostringstream os;
      os << "log_kappa: mode search did not converge for tau " << t << " ("
         << family_name(f) << ")";
      throw OptimizerError(os.str());
    }
    eta = Eigen::Vector2d(opt.argmin[0], opt.argmin[1]);
    cur = conjugate_log_integrand_derivatives(f, t, eta);
    for (int it = 0; it < 5; ++it) {
      Eigen::LLT<Eigen::Matrix2d> llt(-cur.hessian);
      if (llt.info() != Eigen::Success) break;
      const Eigen::Vector2d trial = eta + llt.solve(cur.gradient);
      const IntegrandDerivatives next = conjugate_log_integrand_derivatives(f, t, trial);
      if (!(std::isfinite(next.value) && next.value >= cur.value)) break;
      eta = trial;
      cur = next;
    }
  }

  out.mode = eta;
  out.hessian = cur.hessian;
  out.log_f_at_mode = cur.value;
  const double log_det = numerics::log_det_negative(cur.hessian);
  out.first_order = cur.value + std::log(2.0 * std::numbers::pi) - 0.5 * log_det;
  if (second_order) {
    const numerics::HessianFn hess = [&](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
      return conjugate_log_integrand_derivatives(f, t, Eigen::Vector2d(x[0], x[1])).hessian;
    };
    out.correction =
        numerics::laplace_correction(hess, Eigen::VectorXd(eta), Eigen::MatrixXd(cur.hessian));
    if (!std::isfinite(out.correction)) {
      throw LaplaceError("log_kappa: non-finite expansion term");
    }
  }
  return out;
}

// log κ(τ). Closed form for Normal, expanded Laplace otherwise. `hint`, when
// given, seeds the mode search and receives the located mode.
inline double log_kappa(FamilyId f, const ConjugateParams& t, Eigen::Vector2d* hint = nullptr) {
  if (f == FamilyId::Normal) return normal_log_kappa(t);
  std::optional<Eigen::Vector2d> start;
  if (hint != nullptr && hint->allFinite()) start = *hint;
  const KappaLaplace lap = kappa_laplace(f, t, start);
  if (hint != nullptr) *hint = lap.mode;
  return -(lap.first_order + lap.correction);
}

}  // namespace edglm

#endif  // EDGLM_KAPPA_HPP
