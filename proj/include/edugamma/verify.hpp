#pragma once

// Test oracles: a GG sampler, Monte Carlo plug-in estimators and adaptive
// Gauss-Kronrod quadrature of the defining integrals. None of this is used by
// the production path, and none of it calls into specfun: densities and
// normalizing constants come from <cmath> (std::lgamma).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "edugamma/gg_model.hpp"
#include "edugamma/mixture.hpp"

namespace edugamma::verify {

// ---------------------------------------------------------------------------
// Random numbers

/// xoshiro256** seeded through splitmix64. split() derives an independent
/// stream from the current state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    for (auto& s : state_) s = splitmix(seed);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal, Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  Rng split() { return Rng(next()); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  static std::uint64_t splitmix(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Gamma(shape, 1) by Marsaglia & Tsang; shape < 1 boosted through
/// G(shape) = G(shape + 1) * U^{1/shape}.
inline double sample_standard_gamma(Rng& rng, double shape) {
  if (shape < 1.0) {
    const double u = rng.uniform();
    return sample_standard_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

/// X = beta * G^{1/a} with G ~ Gamma(p, 1).
inline std::vector<double> sample_gg(const GGParams& g, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) x = g.beta() * std::pow(sample_standard_gamma(rng, g.p()), 1.0 / g.a());
  return out;
}

/// Draws from a mixture: member chosen by weight, then a GG draw.
inline std::vector<double> sample_mixture(const Region& r, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& m : r.members()) cumulative.push_back(acc += m.weight);
  std::vector<double> out(n);
  for (auto& x : out) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                           r.size() - 1);
    const auto& g = r.members()[idx].params;
    x = g.beta() * std::pow(sample_standard_gamma(rng, g.p()), 1.0 / g.a());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo plug-in estimators

enum class Functional { mean, mld, theil, ge2, gini };

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

namespace detail {

inline double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double std_error_of(const std::vector<double>& influence) {
  const double n = static_cast<double>(influence.size());
  const double m = mean_of(influence);
  double ss = 0.0;
  for (double z : influence) ss += (z - m) * (z - m);
  return std::sqrt(ss / (n - 1.0) / n);
}

// n/(n-1)-corrected Gini of a sample, via the sorted-sample identity.
inline double gini_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    weighted += (2.0 * (static_cast<double>(i) + 1.0) - n - 1.0) * v[i];
    total += v[i];
  }
  if (total == 0.0) return 0.0;
  return weighted / (total * (n - 1.0));
}

}  // namespace detail

/// Plug-in estimate with a standard error. mean/mld/theil/ge2 use the
/// delta-method influence function; gini uses 100 batch estimates.
inline Estimate mc_functional(std::span<const double> x, Functional kind) {
  if (x.size() < 200) throw std::invalid_argument("mc_functional needs at least 200 draws");
  const double n = static_cast<double>(x.size());
  const double mu = detail::mean_of(x);
  std::vector<double> infl(x.size());
  Estimate est;
  switch (kind) {
    case Functional::mean: {
      est.value = mu;
      for (std::size_t i = 0; i < x.size(); ++i) infl[i] = x[i];
      break;
    }
    case Functional::mld: {
      // log mu - E[log X]
      double elog = 0.0;
      for (double v : x) elog += std::log(v);
      elog /= n;
      est.value = std::log(mu) - elog;
      for (std::size_t i = 0; i < x.size(); ++i) infl[i] = x[i] / mu - std::log(x[i]);
      break;
    }
    case Functional::theil: {
      // E[X log X]/mu - log mu
      double exlog = 0.0;
      for (double v : x) exlog += v * std::log(v);
      exlog /= n;
      est.value = exlog / mu - std::log(mu);
      for (std::size_t i = 0; i < x.size(); ++i) {
        infl[i] = x[i] * std::log(x[i]) / mu - (exlog / (mu * mu) + 1.0 / mu) * x[i];
      }
      break;
    }
    case Functional::ge2: {
      // E[X^2]/(2 mu^2) - 1/2
      double ex2 = 0.0;
      for (double v : x) ex2 += v * v;
      ex2 /= n;
      est.value = ex2 / (2.0 * mu * mu) - 0.5;
      for (std::size_t i = 0; i < x.size(); ++i) {
        infl[i] = x[i] * x[i] / (2.0 * mu * mu) - ex2 * x[i] / (mu * mu * mu);
      }
      break;
    }
    case Functional::gini: {
      std::vector<double> all(x.begin(), x.end());
      est.value = detail::gini_of(all);
      constexpr std::size_t batches = 100;
      const std::size_t len = x.size() / batches;
      std::vector<double> g(batches);
      for (std::size_t b = 0; b < batches; ++b) {
        g[b] = detail::gini_of(std::vector<double>(x.begin() + b * len, x.begin() + (b + 1) * len));
      }
      const double gm = detail::mean_of(g);
      double ss = 0.0;
      for (double v : g) ss += (v - gm) * (v - gm);
      est.std_error = std::sqrt(ss / (batches - 1.0) / batches);
      return est;
    }
  }
  est.std_error = detail::std_error_of(infl);
  return est;
}

/// Empirical Lorenz ordinate at u with a batch-means standard error.
inline Estimate mc_lorenz(std::span<const double> x, double u) {
  auto lorenz_of = [u](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    const double pos = u * static_cast<double>(v.size());
    const auto k = static_cast<std::size_t>(std::floor(pos));
    double part = std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
    if (k < v.size()) part += (pos - static_cast<double>(k)) * v[k];
    return part / total;
  };
  Estimate est;
  est.value = lorenz_of(std::vector<double>(x.begin(), x.end()));
  constexpr std::size_t batches = 100;
  const std::size_t len = x.size() / batches;
  std::vector<double> l(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    l[b] = lorenz_of(std::vector<double>(x.begin() + b * len, x.begin() + (b + 1) * len));
  }
  const double lm = detail::mean_of(l);
  double ss = 0.0;
  for (double v : l) ss += (v - lm) * (v - lm);
  est.std_error = std::sqrt(ss / (batches - 1.0) / batches);
  return est;
}

// ---------------------------------------------------------------------------
// Adaptive quadrature

namespace detail {

// Gauss-Kronrod 7/15 nodes on [-1, 1] (positive half) and weights.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
  double integral;
  double error;
};

template <typename F>
Piece gk15(F& f, double lo, double hi) {
  const double c = 0.5 * (lo + hi);
  const double h = 0.5 * (hi - lo);
  const double fc = f(c);
  double k = fc * kWgk[7];
  double g = fc * kWg[3];
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double s = f(c - dx) + f(c + dx);
    k += kWgk[j] * s;
    if (j % 2 == 1) g += kWg[j / 2] * s;
  }
  return {k * h, std::fabs((k - g) * h)};
}

template <typename F>
double adapt(F& f, double lo, double hi, double tol, Piece whole, int depth) {
  if (whole.error <= tol || depth >= 60 || hi - lo <= 1e-14 * std::max(1.0, std::fabs(hi))) {
    return whole.integral;
  }
  const double mid = 0.5 * (lo + hi);
  const Piece left = gk15(f, lo, mid);
  const Piece right = gk15(f, mid, hi);
  return adapt(f, lo, mid, 0.5 * tol, left, depth + 1) + adapt(f, mid, hi, 0.5 * tol, right, depth + 1);
}

}  // namespace detail

/// Recursive adaptive Gauss-Kronrod (7/15) on [lo, hi] with absolute tolerance.
template <typename F>
double integrate(F&& f, double lo, double hi, double tol = 1e-11) {
  auto& fn = f;
  return detail::adapt(fn, lo, hi, tol, detail::gk15(fn, lo, hi), 0);
}

/// GG density written out directly with std::lgamma.
inline double reference_pdf(const GGParams& g, double x) {
  if (x <= 0.0) return 0.0;
  const double a = g.a();
  const double p = g.p();
  return std::exp(std::log(a) + (a * p - 1.0) * std::log(x) - std::pow(x / g.beta(), a) -
                  a * p * std::log(g.beta()) - std::lgamma(p));
}

/// int_0^upper h(x) f(x) dx. On [0, beta] the substitution x = beta s^m with
/// m = ceil(2/(a p)) removes the power singularity of f at the origin; the
/// tail is integrated over doubling panels until they stop contributing.
inline double integrate_against_pdf(const GGParams& g, const std::function<double(double)>& h,
                                    double upper = std::numeric_limits<double>::infinity(),
                                    double tol = 1e-11) {
  const double beta = g.beta();
  const double m = std::max(1.0, std::ceil(2.0 / (g.a() * g.p())));
  const double head_end = std::min(beta, upper);
  auto head = [&](double s) {
    if (s <= 0.0) return 0.0;
    const double x = head_end * std::pow(s, m);
    if (x <= 0.0) return 0.0;
    return h(x) * reference_pdf(g, x) * head_end * m * std::pow(s, m - 1.0);
  };
  double total = integrate(head, 0.0, 1.0, tol);
  if (upper <= beta) return total;

  auto body = [&](double x) { return h(x) * reference_pdf(g, x); };
  double lo = beta;
  for (int panel = 0; panel < 200; ++panel) {
    const double hi = std::min(2.0 * lo, upper);
    const double piece = integrate(body, lo, hi, tol);
    total += piece;
    if (hi >= upper) break;
    // stop once a whole panel beyond the bulk contributes nothing measurable
    if (std::fabs(piece) < 1e-17 * std::max(1.0, std::fabs(total)) && lo > 4.0 * beta) break;
    lo = hi;
  }
  return total;
}

enum class QuadKind { mass, mean, mld, theil, ge2 };

/// Defining integral of a distributional functional.
inline double quad_functional(const GGParams& g, QuadKind kind) {
  const auto one = [](double) { return 1.0; };
  const auto ident = [](double x) { return x; };
  if (kind == QuadKind::mass) return integrate_against_pdf(g, one);
  const double mu = integrate_against_pdf(g, ident);
  switch (kind) {
    case QuadKind::mean:
      return mu;
    case QuadKind::mld:
      return integrate_against_pdf(g, [mu](double x) { return std::log(mu / x); });
    case QuadKind::theil:
      return integrate_against_pdf(g, [mu](double x) { return (x / mu) * std::log(x / mu); });
    case QuadKind::ge2:
      return 0.5 * integrate_against_pdf(g, [mu](double x) {
               const double r = x / mu;
               return r * r - 1.0;
             });
    case QuadKind::mass:
      break;
  }
  return 0.0;
}

/// F(x) as the integral of the reference density.
inline double quad_cdf(const GGParams& g, double x) {
  if (x <= 0.0) return 0.0;
  return integrate_against_pdf(g, [](double) { return 1.0; }, x, 1e-13);
}

/// Lorenz ordinate: bisection on quad_cdf for the quantile, then the
/// normalized partial mean.
inline double quad_lorenz(const GGParams& g, double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  double lo = 0.0;
  double hi = g.beta();
  while (quad_cdf(g, hi) < u) hi *= 2.0;
  for (int iter = 0; iter < 80 && hi - lo > 1e-14 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (quad_cdf(g, mid) < u) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double q = 0.5 * (lo + hi);
  const double mu = integrate_against_pdf(g, [](double x) { return x; });
  return integrate_against_pdf(g, [](double x) { return x; }, q, 1e-13) / mu;
}

}  // namespace edugamma::verify
