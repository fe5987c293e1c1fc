#ifndef EDGLM_NUMERICS_HPP
#define EDGLM_NUMERICS_HPP

// Numerical kernels shared by the moment equating, the normalizing-constant
// approximations and the test oracles: a derivative-free simplex minimizer
// running in unconstrained coordinates, central-difference Hessians, Laplace
// approximations of log-integrals and a log-space tensor Simpson rule.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "edglm/errors.hpp"
#include "edglm/special_functions.hpp"

namespace edglm::numerics {

using Objective = std::function<double(const Eigen::VectorXd&)>;

// Maps one unconstrained coordinate z onto its feasible range. Bounds given
// as functions see the already-mapped coordinates that precede this one.
struct Transform {
  enum class Kind { Free, LowerBounded, UpperBoundedByFn, LowerBoundedByFn };
  using BoundFn = std::function<double(std::span<const double>)>;

  Kind kind = Kind::Free;
  double bound = 0.0;
  BoundFn bound_fn;

  static Transform free() { return {}; }
  static Transform lower_bounded(double b) { return {Kind::LowerBounded, b, {}}; }
  static Transform upper_bounded_by(BoundFn fn) {
    return {Kind::UpperBoundedByFn, 0.0, std::move(fn)};
  }
  static Transform lower_bounded_by(BoundFn fn) {
    return {Kind::LowerBoundedByFn, 0.0, std::move(fn)};
  }
};

using BoxSpec = std::vector<Transform>;

inline BoxSpec free_box(Eigen::Index n) { return BoxSpec(static_cast<std::size_t>(n)); }

inline Eigen::VectorXd to_original(const BoxSpec& box, const Eigen::VectorXd& z) {
  Eigen::VectorXd x(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const Transform& tr = box[static_cast<std::size_t>(i)];
    std::span<const double> prefix(x.data(), static_cast<std::size_t>(i));
    switch (tr.kind) {
      case Transform::Kind::Free:
        x[i] = z[i];
        break;
      case Transform::Kind::LowerBounded:
        x[i] = tr.bound + std::exp(z[i]);
        break;
      case Transform::Kind::UpperBoundedByFn:
        x[i] = tr.bound_fn(prefix) - std::exp(z[i]);
        break;
      case Transform::Kind::LowerBoundedByFn:
        x[i] = tr.bound_fn(prefix) + std::exp(z[i]);
        break;
    }
  }
  return x;
}

inline Eigen::VectorXd to_transformed(const BoxSpec& box, const Eigen::VectorXd& x) {
  Eigen::VectorXd z(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Transform& tr = box[static_cast<std::size_t>(i)];
    std::span<const double> prefix(x.data(), static_cast<std::size_t>(i));
    double gap = 0.0;
    switch (tr.kind) {
      case Transform::Kind::Free:
        z[i] = x[i];
        continue;
      case Transform::Kind::LowerBounded:
        gap = x[i] - tr.bound;
        break;
      case Transform::Kind::UpperBoundedByFn:
        gap = tr.bound_fn(prefix) - x[i];
        break;
      case Transform::Kind::LowerBoundedByFn:
        gap = x[i] - tr.bound_fn(prefix);
        break;
    }
    if (!(gap > 0.0) || !std::isfinite(gap)) {
      throw DomainError("to_transformed: coordinate " + std::to_string(i) +
                        " is not strictly feasible");
    }
    z[i] = std::log(gap);
  }
  return z;
}

struct OptimResult {
  Eigen::VectorXd argmin;
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

struct MinimizeOptions {
  double xtol = 1e-8;
  int max_iterations = 2000;
  // Fresh simplexes built around the incumbent after a converged cycle.
  int restarts = 2;
};

namespace detail {

struct Simplex {
  std::vector<Eigen::VectorXd> z;
  std::vector<double> f;
};

inline double safe_eval(const Objective& fn, const BoxSpec& box, const Eigen::VectorXd& z) {
  const Eigen::VectorXd x = to_original(box, z);
  if (!x.allFinite()) return std::numeric_limits<double>::infinity();
  const double v = fn(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

// One Nelder-Mead run. Returns true if a stopping rule fired before the cap.
inline bool nelder_mead_cycle(const Objective& fn, const BoxSpec& box, Simplex& s, double tol,
                              const MinimizeOptions& opt, int& iterations) {
  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
  const std::size_t m = s.z.size();
  const Eigen::Index n = s.z.front().size();
  std::vector<std::size_t> order(m);

  while (iterations < opt.max_iterations) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s.f[a] < s.f[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[m - 2];

    const double spread = s.f[worst] - s.f[best];
    if (std::isfinite(s.f[worst]) && spread <= tol * std::abs(s.f[best])) return true;
    double size = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      size = std::max(size, (s.z[i] - s.z[best]).lpNorm<Eigen::Infinity>());
    }
    if (size < opt.xtol) return true;

    ++iterations;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k + 1 < m; ++k) centroid += s.z[order[k]];
    centroid /= static_cast<double>(m - 1);

    const Eigen::VectorXd zr = centroid + kReflect * (centroid - s.z[worst]);
    const double fr = safe_eval(fn, box, zr);
    if (fr < s.f[best]) {
      const Eigen::VectorXd ze = centroid + kExpand * (zr - centroid);
      const double fe = safe_eval(fn, box, ze);
      if (fe < fr) {
        s.z[worst] = ze;
        s.f[worst] = fe;
      } else {
        s.z[worst] = zr;
        s.f[worst] = fr;
      }
      continue;
    }
    if (fr < s.f[second_worst]) {
      s.z[worst] = zr;
      s.f[worst] = fr;
      continue;
    }
    bool accepted = false;
    if (fr < s.f[worst]) {
      const Eigen::VectorXd zc = centroid + kContract * (zr - centroid);
      const double fc = safe_eval(fn, box, zc);
      if (fc <= fr) {
        s.z[worst] = zc;
        s.f[worst] = fc;
        accepted = true;
      }
    } else {
      const Eigen::VectorXd zc = centroid + kContract * (s.z[worst] - centroid);
      const double fc = safe_eval(fn, box, zc);
      if (fc < s.f[worst]) {
        s.z[worst] = zc;
        s.f[worst] = fc;
        accepted = true;
      }
    }
    if (!accepted) {
      for (std::size_t i = 0; i < m; ++i) {
        if (i == best) continue;
        s.z[i] = s.z[best] + kShrink * (s.z[i] - s.z[best]);
        s.f[i] = safe_eval(fn, box, s.z[i]);
      }
    }
  }
  return false;
}

inline Simplex initial_simplex(const Objective& fn, const BoxSpec& box, const Eigen::VectorXd& z0,
                               double f0) {
  Simplex s;
  s.z.push_back(z0);
  s.f.push_back(f0);
  for (Eigen::Index i = 0; i < z0.size(); ++i) {
    double offset = 1.0;
    Eigen::VectorXd zi = z0;
    zi[i] += offset;
    double fi = safe_eval(fn, box, zi);
    // pull non-finite vertices back toward the start point
    for (int k = 0; k < 40 && !std::isfinite(fi); ++k) {
      offset *= 0.5;
      zi[i] = z0[i] + offset;
      fi = safe_eval(fn, box, zi);
    }
    s.z.push_back(zi);
    s.f.push_back(fi);
  }
  return s;
}

}  // namespace detail

// Derivative-free minimization over a box of smooth reparameterizations.
// Deterministic given (objective, init, tol, options).
inline OptimResult minimize(const Objective& objective, const Eigen::VectorXd& init,
                            const BoxSpec& box, double tol = 1e-10,
                            const MinimizeOptions& options = {}) {
  if (static_cast<Eigen::Index>(box.size()) != init.size()) {
    throw StructuralError("minimize: box has " + std::to_string(box.size()) +
                          " coordinates but init has " + std::to_string(init.size()));
  }
  OptimResult result;
  result.argmin = init;
  const Eigen::VectorXd z0 = to_transformed(box, init);
  const double f0 = detail::safe_eval(objective, box, z0);
  if (!std::isfinite(f0)) {
    result.converged = false;
    return result;
  }

  detail::Simplex simplex = detail::initial_simplex(objective, box, z0, f0);
  int iterations = 0;
  bool converged = detail::nelder_mead_cycle(objective, box, simplex, tol, options, iterations);
  auto best_index = [&] {
    return static_cast<std::size_t>(
        std::min_element(simplex.f.begin(), simplex.f.end()) - simplex.f.begin());
  };

  for (int r = 0; r < options.restarts && converged; ++r) {
    const std::size_t b = best_index();
    const double before = simplex.f[b];
    simplex = detail::initial_simplex(objective, box, simplex.z[b], before);
    converged = detail::nelder_mead_cycle(objective, box, simplex, tol, options, iterations);
    const double after = simplex.f[best_index()];
    if (before - after <= tol * std::abs(before)) break;
  }

  const std::size_t b = best_index();
  result.argmin = to_original(box, simplex.z[b]);
  result.objective = simplex.f[b];
  result.iterations = iterations;
  result.converged = converged && std::isfinite(result.objective);
  return result;
}

// Default per-coordinate step for second differences: 1e-3 * max(1, |x_i|).
// Rounding then costs about 1e-10 |f|, truncation about 1e-7 |f''''|.
inline double default_hessian_step(double xi) { return 1e-3 * std::max(1.0, std::abs(xi)); }

// Symmetric matrix of central second differences of f at x.
inline Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x,
                                       double step = 0.0) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double raw = step > 0.0 ? step * std::max(1.0, std::abs(x[i])) : default_hessian_step(x[i]);
    volatile double shifted = x[i] + raw;  // exactly representable step
    h[i] = shifted - x[i];
  }
  auto eval = [&](const Eigen::VectorXd& p) {
    const double v = f(p);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "numeric_hessian: non-finite value at stencil point (" << p.transpose() << ")";
      throw NumericError(os.str());
    }
    return v;
  };

  const double f0 = eval(x);
  Eigen::MatrixXd hess(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd p = x, q = x;
    p[i] += h[i];
    q[i] -= h[i];
    hess(i, i) = (eval(p) - 2.0 * f0 + eval(q)) / (h[i] * h[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
      pp[i] += h[i];
      pp[j] += h[j];
      pm[i] += h[i];
      pm[j] -= h[j];
      mp[i] -= h[i];
      mp[j] += h[j];
      mm[i] -= h[i];
      mm[j] -= h[j];
      const double v = (eval(pp) - eval(pm) - eval(mp) + eval(mm)) / (4.0 * h[i] * h[j]);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  return hess;
}

// log det of -H when -H is positive definite; throws LaplaceError otherwise.
inline double log_det_negative(const Eigen::MatrixXd& hessian) {
  const Eigen::MatrixXd neg = -0.5 * (hessian + hessian.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(neg);
  if (llt.info() != Eigen::Success || !neg.allFinite()) {
    std::ostringstream os;
    os << "Hessian at the mode is not negative definite:\n" << hessian;
    throw LaplaceError(os.str());
  }
  const Eigen::MatrixXd& l = llt.matrixL();
  return 2.0 * l.diagonal().array().log().sum();
}

struct LaplaceFit {
  Eigen::VectorXd mode;
  double log_f_at_mode = 0.0;
  Eigen::MatrixXd hessian;
  double log_integral = 0.0;
};

// Laplace approximation of log ∫ exp(log_f(x)) dx:
// log_f(mode) + (n/2) log 2π - ½ log det(-H).
inline LaplaceFit laplace_fit(const Objective& log_f, const Eigen::VectorXd& init) {
  const Objective neg = [&](const Eigen::VectorXd& x) { return -log_f(x); };
  const OptimResult opt = minimize(neg, init, free_box(init.size()), 1e-14,
                                   MinimizeOptions{1e-10, 4000, 3});
  if (!opt.converged) {
    throw OptimizerError("laplace: mode search did not converge (objective " +
                         std::to_string(opt.objective) + ")");
  }
  LaplaceFit fit;
  fit.mode = opt.argmin;
  fit.log_f_at_mode = -opt.objective;
  fit.hessian = numeric_hessian(log_f, fit.mode);
  const double n = static_cast<double>(init.size());
  fit.log_integral = fit.log_f_at_mode + 0.5 * n * std::log(2.0 * std::numbers::pi) -
                     0.5 * log_det_negative(fit.hessian);
  return fit;
}

inline double laplace_log_integral(const Objective& log_f, const Eigen::VectorXd& init) {
  return laplace_fit(log_f, init).log_integral;
}

using HessianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Next term of the Laplace expansion, log I ≈ Laplace + ε with
//   ε = 1/8 Σ g_ijkl S_ij S_kl + 1/8 Σ g_ijk g_lmn S_ij S_kl S_mn
//     + 1/12 Σ g_ijk g_lmn S_il S_jm S_kn,      S = (-H)^{-1}.
// Third and fourth derivatives come from central differences of an exact
// Hessian with steps scaled to the local standard deviations.
inline double laplace_correction(const HessianFn& hessian_at, const Eigen::VectorXd& mode,
                                 const Eigen::MatrixXd& hessian, double rel_step = 0.02) {
  const Eigen::Index n = mode.size();
  const Eigen::MatrixXd s = (-hessian).inverse();
  Eigen::VectorXd h(n);
  for (Eigen::Index k = 0; k < n; ++k) h[k] = rel_step * std::sqrt(std::max(s(k, k), 1e-300));

  std::vector<Eigen::MatrixXd> plus(n), minus(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::VectorXd p = mode, q = mode;
    p[k] += h[k];
    q[k] -= h[k];
    plus[k] = hessian_at(p);
    minus[k] = hessian_at(q);
  }
  // third[k](i,j) = d g_ij / d x_k
  std::vector<Eigen::MatrixXd> third(n);
  for (Eigen::Index k = 0; k < n; ++k) third[k] = (plus[k] - minus[k]) / (2.0 * h[k]);
  // fourth[k*n+l](i,j) = d² g_ij / d x_k d x_l
  std::vector<Eigen::MatrixXd> fourth(n * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    fourth[k * n + k] = (plus[k] - 2.0 * hessian + minus[k]) / (h[k] * h[k]);
    for (Eigen::Index l = 0; l < k; ++l) {
      Eigen::VectorXd pp = mode, pm = mode, mp = mode, mm = mode;
      pp[k] += h[k];
      pp[l] += h[l];
      pm[k] += h[k];
      pm[l] -= h[l];
      mp[k] -= h[k];
      mp[l] += h[l];
      mm[k] -= h[k];
      mm[l] -= h[l];
      const Eigen::MatrixXd d =
          (hessian_at(pp) - hessian_at(pm) - hessian_at(mp) + hessian_at(mm)) / (4.0 * h[k] * h[l]);
      fourth[k * n + l] = d;
      fourth[l * n + k] = d;
    }
  }
  auto g3 = [&](Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    // symmetrize over the three index placements
    return (third[k](i, j) + third[i](j, k) + third[j](i, k)) / 3.0;
  };
  auto g4 = [&](Eigen::Index i, Eigen::Index j, Eigen::Index k, Eigen::Index l) {
    return 0.5 * (fourth[k * n + l](i, j) + fourth[i * n + j](k, l));
  };

  double quartic = 0.0, cubic_a = 0.0, cubic_b = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index l = 0; l < n; ++l) quartic += g4(i, j, k, l) * s(i, j) * s(k, l);

  // v_k = Σ_ij g_ijk S_ij
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) v[k] += g3(i, j, k) * s(i, j);
  cubic_a = v.dot(s * v);

  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index l = 0; l < n; ++l)
          for (Eigen::Index m = 0; m < n; ++m)
            for (Eigen::Index o = 0; o < n; ++o)
              cubic_b += g3(i, j, k) * g3(l, m, o) * s(i, l) * s(j, m) * s(k, o);

  return quartic / 8.0 + cubic_a / 8.0 + cubic_b / 12.0;
}

enum class Coverage { Extend, Fixed };

using LogIntegrand2 = std::function<double(double, double)>;

// log of the tensor-product composite Simpson integral of exp(log_f) over
// center ± halfwidths, n intervals per axis (n even, n >= 64). With
// Coverage::Extend the box is doubled until the boundary ring carries less
// than 1e-10 of the total mass.
inline double quadrature_log_integral(const LogIntegrand2& log_f, const Eigen::Vector2d& center,
                                      Eigen::Vector2d halfwidths, int n,
                                      Coverage coverage = Coverage::Extend) {
  if (n < 64) throw DomainError("quadrature_log_integral: n must be at least 64");
  if (n % 2 != 0) ++n;
  constexpr double kBoundaryFraction = 1e-10;
  constexpr int kMaxDoublings = 5;

  auto simpson_weight = [&n](int i) {
    if (i == 0 || i == n) return 1.0;
    return (i % 2 == 1) ? 4.0 : 2.0;
  };

  for (int attempt = 0; attempt <= kMaxDoublings; ++attempt) {
    const double hx = 2.0 * halfwidths[0] / n;
    const double hy = 2.0 * halfwidths[1] / n;
    double max_all = -std::numeric_limits<double>::infinity(), sum_all = 0.0;
    double max_ring = -std::numeric_limits<double>::infinity(), sum_ring = 0.0;
    auto accumulate = [](double v, double& mx, double& sum) {
      if (v == -std::numeric_limits<double>::infinity()) return;
      if (v > mx) {
        sum = sum * std::exp(mx - v) + 1.0;
        mx = v;
      } else {
        sum += std::exp(v - mx);
      }
    };
    for (int i = 0; i <= n; ++i) {
      const double x = center[0] - halfwidths[0] + i * hx;
      const double wx = std::log(simpson_weight(i));
      for (int j = 0; j <= n; ++j) {
        const double y = center[1] - halfwidths[1] + j * hy;
        const double lf = log_f(x, y);
        if (std::isnan(lf) || lf == std::numeric_limits<double>::infinity()) {
          throw NumericError("quadrature_log_integral: invalid integrand value at (" +
                             std::to_string(x) + ", " + std::to_string(y) + ")");
        }
        const double v = lf + wx + std::log(simpson_weight(j));
        accumulate(v, max_all, sum_all);
        if (i == 0 || i == n || j == 0 || j == n) accumulate(v, max_ring, sum_ring);
      }
    }
    const double log_total = max_all + std::log(sum_all) + std::log(hx * hy / 9.0);
    if (!std::isfinite(log_total)) {
      throw NumericError("quadrature_log_integral: integrand vanishes on the whole box");
    }
    if (coverage == Coverage::Fixed) return log_total;
    const double log_ring = max_ring + std::log(sum_ring) + std::log(hx * hy / 9.0);
    if (sum_ring == 0.0 || log_ring - log_total < std::log(kBoundaryFraction)) return log_total;
    halfwidths *= 2.0;
    if (n < 4096) n *= 2;  // keep the node spacing while the box grows
  }
  throw CoverageError("quadrature_log_integral: boundary mass still above 1e-10 after " +
                      std::to_string(kMaxDoublings) + " box doublings");
}

}  // namespace edglm::numerics

#endif  // EDGLM_NUMERICS_HPP
