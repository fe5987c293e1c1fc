#ifndef EDGLM_FORECAST_HPP
#define EDGLM_FORECAST_HPP

// h-step-ahead forecasting. States propagate as
//
//   a(h) = G a(h-1),  R(h) = D G R(h-1) G' D + W,  f(h) = F'a(h),  Q(h) = F'R(h)F,
//
// the conjugate prior τ_h is re-equated to (f(h), Q(h)), and the predictive
// density is the ratio
//
//   p(y) = a(y) κ(τ_h) / κ(τ_h + (1, d1(y), d2(y))).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "edglm/errors.hpp"
#include "edglm/family.hpp"
#include "edglm/filter.hpp"
#include "edglm/kappa.hpp"
#include "edglm/model_spec.hpp"

namespace edglm {

struct HorizonMoments {
  Eigen::VectorXd a;
  Eigen::MatrixXd R;
  Eigen::Vector2d f;
  Eigen::Matrix2d Q;
};

// Moments for h = 1..H past data row `last_row`, starting from (m, C) there.
inline std::vector<HorizonMoments> propagate(const ModelSpec& spec, const StateMoments& state,
                                             Eigen::Index last_row, int H,
                                             const DataTable& data) {
  if (H < 1) throw ConfigError("forecast horizon must be at least 1");
  std::vector<HorizonMoments> out;
  out.reserve(static_cast<std::size_t>(H));
  StateMoments cur = state;
  for (int h = 1; h <= H; ++h) {
    const DesignAt design = design_at(spec, last_row + h, data);
    const EvolveResult ev = evolve(cur, design);
    out.push_back({ev.prior.a, ev.prior.R, ev.predictor.f, ev.predictor.Q});
    cur = {ev.prior.a, ev.prior.R};
  }
  return out;
}

// log p(y) = log a(y) + log κ(τ) - log κ(τ*). `log_kappa_tau` may carry a
// precomputed log κ(τ); `hint` seeds and receives the Laplace mode for τ*.
inline double predictive_log_density(FamilyId family, const ConjugateParams& tau, double y,
                                     std::optional<double> log_kappa_tau = std::nullopt,
                                     Eigen::Vector2d* hint = nullptr) {
  detail::require_support(family, y);
  const ConjugateParams post = conjugate_update(tau, family, y);
  const double lk = log_kappa_tau ? *log_kappa_tau : log_kappa(family, tau);
  return log_base_measure(family, y) + lk - log_kappa(family, post, hint);
}

struct PredictiveSummary {
  double mean = 0.0;
  double mode = 0.0;
  double hpd_low = 0.0;
  double hpd_high = 0.0;
  double level = 0.95;
  double mass = 0.0;      // integral of the unnormalized grid density
  double hpd_mass = 0.0;  // normalized mass of [hpd_low, hpd_high]
  double set_mass = 0.0;  // normalized mass of the HPD set itself
  double set_length = 0.0;  // Lebesgue measure of the HPD set; the hull width when unimodal
  bool multimodal = false;
  int dropped = 0;  // grid points where the density could not be evaluated
  std::vector<std::pair<double, double>> grid;  // (y, density)
};

namespace detail {

// Grid coordinate z with y = y(z); the density is integrated in z.
struct GridMap {
  FamilyId family;
  double center = 0.0;
  double scale = 1.0;

  double y(double z) const {
    switch (family) {
      case FamilyId::Normal:
        return center + scale * std::sinh(z);
      case FamilyId::Beta:
        return logistic(z);
      default:
        return std::exp(z);
    }
  }
  double log_jacobian(double z) const {
    switch (family) {
      case FamilyId::Normal:
        return std::log(scale * std::cosh(z));
      case FamilyId::Beta:
        return -softplus(-z) - softplus(z);
      default:
        return z;
    }
  }
};

// Beta predictive at y = logistic(z), computed from z so that log y and
// log(1 - y) stay exact where y itself rounds to 0 or 1.
inline double beta_logit_log_density(const ConjugateParams& tau, double z, double log_kappa_tau,
                                     Eigen::Vector2d* hint) {
  const double log_one_minus = -softplus(z);
  const ConjugateParams post{tau.tau0 + 1.0, tau.tau1 + z, tau.tau2 + log_one_minus};
  if (!admissible(FamilyId::Beta, post)) {
    throw DomainError("beta predictive: updated parameters are not admissible");
  }
  return softplus(-z) + softplus(z) + log_kappa_tau - log_kappa(FamilyId::Beta, post, hint);
}

struct GridEval {
  std::vector<double> z, log_density;
  int dropped = 0;
};

inline std::vector<double> uniform_points(double lo, double hi, int n) {
  std::vector<double> z(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return z;
}

inline GridEval evaluate_grid(FamilyId family, const ConjugateParams& tau, double log_kappa_tau,
                              const GridMap& map, std::vector<double> zs) {
  GridEval g;
  g.z = std::move(zs);
  g.log_density.resize(g.z.size());
  Eigen::Vector2d hint = Eigen::Vector2d::Constant(std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < g.z.size(); ++i) {
    const double z = g.z[i];
    double ld = -std::numeric_limits<double>::infinity();
    const double y = map.y(z);
    if (family == FamilyId::Beta || edglm::in_support(family, y)) {
      try {
        ld = family == FamilyId::Beta
                 ? beta_logit_log_density(tau, z, log_kappa_tau, &hint)
                 : predictive_log_density(family, tau, y, log_kappa_tau, &hint);
        if (!std::isfinite(ld)) throw NumericError("non-finite density");
      } catch (const Error&) {
        ld = -std::numeric_limits<double>::infinity();
        hint.setConstant(std::numeric_limits<double>::quiet_NaN());
        ++g.dropped;
      }
    }
    g.log_density[i] = ld;
  }
  return g;
}

}  // namespace detail

// Gridded predictive summary. A coarse scan over the support locates the
// region holding the mass; the fine grid of `grid_size` points covers it.
inline PredictiveSummary predictive_summary(FamilyId family, const ConjugateParams& tau,
                                            double level = 0.95, int grid_size = 4096) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
  if (grid_size < 256) throw ConfigError("grid_size must be at least 256");
  detail::require_admissible(family, tau, "predictive_summary");
  constexpr int kCoarse = 512;
  constexpr double kDrop = 30.0;  // log-density span kept around the peak
  constexpr int kWiden = 6;

  const double lk = log_kappa(family, tau);
  detail::GridMap map{family};
  double lo = 0.0, hi = 0.0;
  const PredictorMoments pm = prior_moment_map(family, tau);
  switch (family) {
    case FamilyId::Normal: {
      // Student-t: location τ1/τ0, scale² = b (1 + 1/τ0) / α
      const double shape = 0.5 * (tau.tau0 + 1.0);
      const double rate = -tau.tau1 * tau.tau1 / (2.0 * tau.tau0) - tau.tau2;
      map.center = tau.tau1 / tau.tau0;
      map.scale = std::sqrt(rate * (1.0 + 1.0 / tau.tau0) / shape);
      lo = -std::asinh(1e4);
      hi = std::asinh(1e4);
      break;
    }
    case FamilyId::Beta: {
      const double eps = 1e-6;
      lo = std::log(eps / (1.0 - eps));
      hi = -lo;
      break;
    }
    default: {
      lo = pm.f[0] - 20.0;
      hi = pm.f[0] + 20.0;
      break;
    }
  }

  // coarse scan, widening the range until the retained region sits inside
  // it; Beta shapes below 1 put mass far out in logit space
  std::size_t first = 0, last = 0;
  int dropped = 0;
  double center = 0.0, spread = 1.0;
  for (int attempt = 0;; ++attempt) {
    const detail::GridEval coarse =
        detail::evaluate_grid(family, tau, lk, map, detail::uniform_points(lo, hi, kCoarse));
    std::vector<double> ell(coarse.z.size());
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ell.size(); ++i) {
      ell[i] = coarse.log_density[i] + map.log_jacobian(coarse.z[i]);
      peak = std::max(peak, ell[i]);
    }
    if (!std::isfinite(peak)) {
      std::ostringstream os;
      os << "predictive_summary: density undefined over the whole support for tau " << tau;
      throw NumericError(os.str());
    }
    first = ell.size();
    last = 0;
    for (std::size_t i = 0; i < ell.size(); ++i) {
      if (ell[i] > peak - kDrop) {
        first = std::min(first, i);
        last = std::max(last, i);
      }
    }
    const bool touches = first == 0 || last + 1 == ell.size();
    if (family == FamilyId::Normal || !touches || attempt == kWiden) {
      const double step = (hi - lo) / (kCoarse - 1);
      // centre and width of the bulk, where the integrand is within e² of the peak
      std::size_t ipeak = 0, b_lo = ell.size(), b_hi = 0;
      for (std::size_t i = 0; i < ell.size(); ++i) {
        if (ell[i] == peak && ipeak == 0) ipeak = i;
        if (ell[i] > peak - 2.0) {
          b_lo = std::min(b_lo, i);
          b_hi = std::max(b_hi, i);
        }
      }
      center = coarse.z[ipeak];
      spread = std::max(0.5 * (coarse.z[b_hi] - coarse.z[b_lo]), step);
      const double new_lo = std::max(lo, coarse.z[first] - step);
      const double new_hi = std::min(hi, coarse.z[last] + step);
      lo = new_lo;
      hi = new_hi;
      dropped = coarse.dropped;
      break;
    }
    const double width = hi - lo;
    if (first == 0) lo -= width;
    if (last + 1 == ell.size()) hi += width;
  }

  // fine grid uniform in u with z = center + spread * sinh(u): dense over the
  // bulk, geometric in the tails
  const double u_lo = std::asinh((lo - center) / spread);
  const double u_hi = std::asinh((hi - center) / spread);
  const std::vector<double> us = detail::uniform_points(u_lo, u_hi, grid_size);
  std::vector<double> zs(us.size());
  for (std::size_t i = 0; i < us.size(); ++i) zs[i] = center + spread * std::sinh(us[i]);
  const detail::GridEval fine = detail::evaluate_grid(family, tau, lk, map, zs);
  const std::size_t n = fine.z.size();
  const double du = (u_hi - u_lo) / static_cast<double>(n - 1);
  // trapezoid weights in u; w_i = p(y_i) y'(z_i) z'(u_i) Δu
  std::vector<double> y(n), dens(n), w(n), cell(n);
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = map.y(fine.z[i]);
    dens[i] = std::exp(fine.log_density[i]);
    const double trap = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    const double log_dz = std::log(spread * std::cosh(us[i]));
    cell[i] = trap * du * std::exp(map.log_jacobian(fine.z[i]) + log_dz);
    w[i] = trap * du * std::exp(fine.log_density[i] + map.log_jacobian(fine.z[i]) + log_dz);
    mass += w[i];
  }
  const std::vector<double>& log_dens = fine.log_density;
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw NumericError("predictive_summary: grid mass is not positive");
  }

  PredictiveSummary s;
  s.level = level;
  s.mass = mass;
  s.dropped = dropped + fine.dropped;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += y[i] * w[i];
  s.mean = mean / mass;
  // compared on the log scale: densities near a boundary can overflow
  const std::size_t imode = static_cast<std::size_t>(
      std::max_element(log_dens.begin(), log_dens.end()) - log_dens.begin());
  s.mode = y[imode];

  // water-filling: take points by decreasing density until the level is reached
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return log_dens[a] > log_dens[b]; });
  std::vector<char> in_set(n, 0);
  double acc = 0.0;
  for (std::size_t k = 0; k < n && acc < level * mass; ++k) {
    in_set[order[k]] = 1;
    acc += w[order[k]];
    s.set_length += cell[order[k]];
  }
  std::size_t lo_i = n, hi_i = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (in_set[i]) {
      lo_i = std::min(lo_i, i);
      hi_i = std::max(hi_i, i);
    }
  }
  double hull = 0.0;
  for (std::size_t i = lo_i; i <= hi_i; ++i) {
    hull += w[i];
    if (!in_set[i]) s.multimodal = true;
  }
  s.hpd_low = y[lo_i];
  s.hpd_high = y[hi_i];
  s.hpd_mass = hull / mass;
  s.set_mass = acc / mass;
  s.grid.reserve(n);
  for (std::size_t i = 0; i < n; ++i) s.grid.emplace_back(y[i], dens[i]);
  return s;
}

struct ForecastStep {
  int h = 0;
  HorizonMoments moments;
  ConjugateParams tau;
  PredictiveSummary summary;
};

// Forecasts h = 1..H from the final filtered state.
inline std::vector<ForecastStep> forecast_path(const ModelSpec& spec, const FilterResult& fr,
                                               int H, const DataTable& data, double level = 0.95,
                                               int grid_size = 4096,
                                               const Weights& omega = Weights::Identity()) {
  if (fr.steps.empty()) throw ConfigError("forecast needs a non-empty filter result");
  const StepRecord& last = fr.steps.back();
  const std::vector<HorizonMoments> path =
      propagate(spec, StateMoments{last.m, last.C}, last.row, H, data);
  std::vector<ForecastStep> out;
  out.reserve(path.size());
  std::optional<ConjugateParams> warm = last.tau;
  for (std::size_t k = 0; k < path.size(); ++k) {
    ForecastStep fs;
    fs.h = static_cast<int>(k + 1);
    fs.moments = path[k];
    fs.tau = equate_prior(spec.family, PredictorMoments{path[k].f, path[k].Q}, omega, warm);
    warm = fs.tau;
    fs.summary = predictive_summary(spec.family, fs.tau, level, grid_size);
    out.push_back(std::move(fs));
  }
  return out;
}

}  // namespace edglm

#endif  // EDGLM_FORECAST_HPP
