#pragma once

// Generalized gamma distribution (Stacy form)
//
//   f(x) = a x^{ap-1} exp(-(x/beta)^a) / (beta^{ap} Gamma(p)),   x >= 0
//
// with closed-form mean, Lorenz curve and generalized-entropy indices.
// X^a is Gamma(p, beta^a), so every probability reduces to the regularized
// incomplete gamma function of (x/beta)^a.

#include <cmath>
#include <string>

#include "edugamma/errors.hpp"
#include "edugamma/quadrature.hpp"
#include "edugamma/specfun.hpp"

namespace edugamma {

/// Shape a, scale beta (years of schooling), shape p. All strictly positive.
class GGParams {
 public:
  GGParams(double a, double beta, double p) : a_(a), beta_(beta), p_(p) {
    if (!valid(a, beta, p)) {
      throw DomainError("GG parameters must be positive and finite (a=" + std::to_string(a) +
                        ", beta=" + std::to_string(beta) + ", p=" + std::to_string(p) + ")");
    }
  }

  static bool valid(double a, double beta, double p) {
    return a > 0.0 && beta > 0.0 && p > 0.0 && std::isfinite(a) && std::isfinite(beta) &&
           std::isfinite(p);
  }

  double a() const { return a_; }
  double beta() const { return beta_; }
  double p() const { return p_; }

  friend bool operator==(const GGParams&, const GGParams&) = default;

 private:
  double a_;
  double beta_;
  double p_;
};

namespace gg {

namespace detail {

inline void require_nonnegative(double x) {
  if (!(x >= 0.0)) throw DomainError("GG argument must be >= 0, got " + std::to_string(x));
}

inline void require_probability_open(double u) {
  if (!(u >= 0.0 && u < 1.0)) {
    throw DomainError("probability must lie in [0, 1), got " + std::to_string(u));
  }
}

inline double standardized(const GGParams& g, double x) {
  return std::pow(x / g.beta(), g.a());
}

// ln Gamma(p + k/a) - ln Gamma(p)
inline double ln_gamma_ratio(const GGParams& g, double k) {
  return specfun::ln_gamma_ratio(g.p(), k / g.a());
}

}  // namespace detail

/// True when the density diverges at x (only x = 0 with a*p < 1).
inline bool density_singular_at(const GGParams& g, double x) {
  return x == 0.0 && g.a() * g.p() < 1.0;
}

/// Density. Throws SingularDensity at x = 0 when a*p < 1.
inline double pdf(const GGParams& g, double x) {
  detail::require_nonnegative(x);
  const double a = g.a();
  const double ap = a * g.p();
  if (x == 0.0) {
    if (ap > 1.0) return 0.0;
    if (ap == 1.0) return std::exp(std::log(a) - std::log(g.beta()) - specfun::ln_gamma(g.p()));
    throw SingularDensity("GG density diverges at x = 0 when a*p < 1");
  }
  if (std::isinf(x)) return 0.0;
  const double log_f = std::log(a) + (ap - 1.0) * std::log(x) - detail::standardized(g, x) -
                       ap * std::log(g.beta()) - specfun::ln_gamma(g.p());
  return std::exp(log_f);
}

inline double cdf(const GGParams& g, double x) {
  detail::require_nonnegative(x);
  return specfun::reg_lower_inc_gamma(g.p(), detail::standardized(g, x));
}

inline double survival(const GGParams& g, double x) {
  detail::require_nonnegative(x);
  return specfun::reg_upper_inc_gamma(g.p(), detail::standardized(g, x));
}

inline double quantile(const GGParams& g, double u) {
  detail::require_probability_open(u);
  if (u == 0.0) return 0.0;
  return g.beta() * std::pow(specfun::inv_reg_lower_inc_gamma(g.p(), u), 1.0 / g.a());
}

/// Mean years of schooling, beta * Gamma(p + 1/a) / Gamma(p).
inline double mean(const GGParams& g) {
  return g.beta() * std::exp(detail::ln_gamma_ratio(g, 1.0));
}

/// Distribution of the first incomplete moment, (1/mu) * int_0^x t f(t) dt.
inline double first_moment_cdf(const GGParams& g, double x) {
  detail::require_nonnegative(x);
  return specfun::reg_lower_inc_gamma(g.p() + 1.0 / g.a(), detail::standardized(g, x));
}

/// Lorenz curve L(u) = F_(1)(F^{-1}(u)). Independent of beta.
inline double lorenz(const GGParams& g, double u) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw DomainError("Lorenz ordinate needs u in [0, 1], got " + std::to_string(u));
  }
  if (u == 0.0) return 0.0;
  if (u == 1.0) return 1.0;
  // composing in the standardized variable skips the pow round trip
  const double y = specfun::inv_reg_lower_inc_gamma(g.p(), u);
  return specfun::reg_lower_inc_gamma(g.p() + 1.0 / g.a(), y);
}

/// Gini = 1 - 2 * int_0^1 L(u) du by 256-node Gauss-Legendre.
inline double gini(const GGParams& g) {
  const double area =
      quadrature::integrate_unit(quadrature::gauss_legendre_256(), [&](double u) { return lorenz(g, u); });
  return 1.0 - 2.0 * area;
}

/// GE(2), half the squared coefficient of variation.
inline double ge2(const GGParams& g) {
  const double log_ratio = detail::ln_gamma_ratio(g, 2.0) - 2.0 * detail::ln_gamma_ratio(g, 1.0);
  return 0.5 * std::expm1(log_ratio);
}

/// Mean log deviation, GE(0).
inline double mld(const GGParams& g) {
  return -specfun::digamma(g.p()) / g.a() + detail::ln_gamma_ratio(g, 1.0);
}

/// Theil index, GE(1).
inline double theil(const GGParams& g) {
  return specfun::digamma(g.p() + 1.0 / g.a()) / g.a() - detail::ln_gamma_ratio(g, 1.0);
}

/// GE(theta). theta = 0, 1, 2 dispatch to mld, theil, ge2; other values use
///   (Gamma(p+theta/a) Gamma(p)^{theta-1} / Gamma(p+1/a)^theta - 1) / (theta(theta-1)),
/// which is finite only when p + theta/a > 0.
inline double ge(const GGParams& g, double theta) {
  if (theta == 0.0) return mld(g);
  if (theta == 1.0) return theil(g);
  if (theta == 2.0) return ge2(g);
  if (!std::isfinite(theta)) throw DomainError("GE sensitivity parameter must be finite");
  const double shifted = g.p() + theta / g.a();
  if (!(shifted > 0.0)) {
    throw DomainError("GE(" + std::to_string(theta) + ") diverges for these parameters");
  }
  const double log_ratio = detail::ln_gamma_ratio(g, theta) - theta * detail::ln_gamma_ratio(g, 1.0);
  return std::expm1(log_ratio) / (theta * (theta - 1.0));
}

}  // namespace gg
}  // namespace edugamma
