#pragma once

// Regional distributions: population-weighted mixtures of national GG fits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "edugamma/errors.hpp"
#include "edugamma/gg_model.hpp"
#include "edugamma/quadrature.hpp"

namespace edugamma {

struct RegionMember {
  std::string cell_id;
  GGParams params;
  double weight = 0.0;  // population share after normalization
  double mean = 0.0;    // cached national mean
};

/// Immutable set of weighted members. Raw weights are renormalized to sum 1.
class Region {
 public:
  struct Input {
    std::string cell_id;
    GGParams params;
    double weight;
  };

  explicit Region(const std::vector<Input>& inputs) {
    if (inputs.empty()) throw DomainError("a region needs at least one member");
    double total = 0.0;
    for (const auto& in : inputs) {
      if (!(in.weight >= 0.0) || !std::isfinite(in.weight)) {
        throw DomainError("population weight of " + in.cell_id + " must be finite and >= 0");
      }
      total += in.weight;
    }
    if (!(total > 0.0)) throw DomainError("population weights sum to zero");
    members_.reserve(inputs.size());
    for (const auto& in : inputs) {
      const double mu = gg::mean(in.params);
      if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw DomainError("member " + in.cell_id + " has a non-positive mean");
      }
      members_.push_back({in.cell_id, in.params, in.weight / total, mu});
    }
    for (const auto& m : members_) mean_ += m.weight * m.mean;
  }

  const std::vector<RegionMember>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  double mean() const { return mean_; }

 private:
  std::vector<RegionMember> members_;
  double mean_ = 0.0;
};

inline double mixture_cdf(const Region& r, double x) {
  if (!(x >= 0.0)) throw DomainError("mixture CDF argument must be >= 0");
  double sum = 0.0;
  for (const auto& m : r.members()) sum += m.weight * gg::cdf(m.params, x);
  return std::clamp(sum, 0.0, 1.0);
}

inline bool mixture_density_singular_at(const Region& r, double x) {
  return std::any_of(r.members().begin(), r.members().end(),
                     [x](const RegionMember& m) { return gg::density_singular_at(m.params, x); });
}

/// Weighted sum of member densities; throws SingularDensity where any
/// member with positive weight diverges.
inline double mixture_pdf(const Region& r, double x) {
  if (!(x >= 0.0)) throw DomainError("mixture density argument must be >= 0");
  double sum = 0.0;
  for (const auto& m : r.members()) {
    if (m.weight == 0.0) continue;
    sum += m.weight * gg::pdf(m.params, x);
  }
  return sum;
}

/// Regional MYS, the weighted average of national means.
inline double mixture_mean(const Region& r) { return r.mean(); }

/// Root of F(x) = u by bisection on [0, max_i F_i^{-1}(1 - 1e-12)].
inline double mixture_quantile(const Region& r, double u) {
  if (!(u >= 0.0 && u < 1.0)) throw DomainError("mixture quantile needs u in [0, 1)");
  if (u == 0.0) return 0.0;
  if (r.size() == 1) return gg::quantile(r.members().front().params, u);

  double hi = 0.0;
  for (const auto& m : r.members()) hi = std::max(hi, gg::quantile(m.params, 1.0 - 1e-12));
  double lo = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f = mixture_cdf(r, mid) - u;
    if (f == 0.0) return mid;
    if (f < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Lorenz curve of the mixture. The first incomplete moment of a mixture is
/// sum_i (lambda_i mu_i / mu) F_{i,(1)}.
inline double mixture_lorenz(const Region& r, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("Lorenz ordinate needs u in [0, 1]");
  if (u == 0.0) return 0.0;
  if (u == 1.0) return 1.0;
  if (r.size() == 1) return gg::lorenz(r.members().front().params, u);
  const double x = mixture_quantile(r, u);
  double sum = 0.0;
  for (const auto& m : r.members()) {
    sum += (m.weight * m.mean / r.mean()) * gg::first_moment_cdf(m.params, x);
  }
  return std::clamp(sum, 0.0, 1.0);
}

inline double mixture_gini(const Region& r) {
  const double area = quadrature::integrate_unit(quadrature::gauss_legendre_256(),
                                                 [&](double u) { return mixture_lorenz(r, u); });
  return 1.0 - 2.0 * area;
}

struct GeDecomposition {
  double total = 0.0;
  double between = 0.0;
  double within = 0.0;
};

/// Between/within split of GE(theta). total is defined as between + within.
inline GeDecomposition ge_decompose(const Region& r, double theta) {
  const double mu = r.mean();
  GeDecomposition d;
  for (const auto& m : r.members()) {
    if (!(m.mean > 0.0)) throw DomainError("member mean must be positive");
  }
  // Equal member means leave nothing between groups; skip the rounding noise of mu / m.mean.
  const bool flat = std::all_of(r.members().begin(), r.members().end(),
                                [&](const auto& m) { return m.mean == r.members().front().mean; });
  if (theta == 0.0) {
    for (const auto& m : r.members()) {
      d.within += m.weight * gg::mld(m.params);
      d.between += m.weight * std::log(mu / m.mean);
    }
  } else if (theta == 1.0) {
    for (const auto& m : r.members()) {
      const double s = m.weight * m.mean / mu;
      d.within += s * gg::theil(m.params);
      d.between += s * std::log(m.mean / mu);
    }
  } else {
    double moment = 0.0;
    for (const auto& m : r.members()) {
      if (m.weight == 0.0) continue;
      const double s = m.weight * m.mean / mu;
      d.within += std::pow(m.weight, 1.0 - theta) * std::pow(s, theta) * gg::ge(m.params, theta);
      moment += m.weight * std::pow(m.mean / mu, theta);
    }
    d.between = (moment - 1.0) / (theta * (theta - 1.0));
  }
  if (flat) d.between = 0.0;
  d.total = d.within + d.between;
  return d;
}

struct DominanceReport {
  bool dominates = false;       // F_a(x) <= F_b(x) at every grid point
  double max_violation = 0.0;   // max over the grid of F_a(x) - F_b(x), floored at 0
  double worst_x = 0.0;
};

/// First-order dominance of region a over region b on an evenly spaced grid
/// over [0, x_max]: a has no more mass than b below any grid point.
inline DominanceReport first_order_dominance(const Region& a, const Region& b, double x_max = 25.0,
                                             std::size_t points = 2001, double tolerance = 1e-12) {
  if (points < 2 || !(x_max > 0.0)) throw DomainError("dominance grid needs >= 2 points on (0, x_max]");
  DominanceReport rep;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = x_max * static_cast<double>(i) / static_cast<double>(points - 1);
    const double diff = mixture_cdf(a, x) - mixture_cdf(b, x);
    if (diff > rep.max_violation) {
      rep.max_violation = diff;
      rep.worst_x = x;
    }
  }
  rep.dominates = rep.max_violation <= tolerance;
  return rep;
}

}  // namespace edugamma
