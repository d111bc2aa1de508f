#pragma once

// Quasi-Newton (BFGS) minimizer for small fixed-size problems, with
// central-difference gradients and an Armijo backtracking line search.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace edugamma::optimize {

struct BfgsOptions {
  int max_iter = 500;
  double grad_tol = 1e-10;   // infinity norm of the gradient
  double obj_tol = 1e-14;    // objective decrease between accepted steps
  double rel_step = 1e-6;    // finite-difference step, relative to max(1, |x_i|)
  double max_step = 5.0;     // cap on the infinity norm of a trial step
};

template <std::size_t N>
struct BfgsResult {
  std::array<double, N> x{};
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

template <std::size_t N, typename F>
std::array<double, N> central_gradient(F& f, const std::array<double, N>& x, double fx,
                                       double rel_step) {
  std::array<double, N> g{};
  for (std::size_t i = 0; i < N; ++i) {
    const double h = rel_step * std::max(1.0, std::fabs(x[i]));
    auto xp = x;
    auto xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fp = f(xp);
    const double fm = f(xm);
    if (std::isfinite(fp) && std::isfinite(fm)) {
      g[i] = (fp - fm) / (2.0 * h);
    } else if (std::isfinite(fp)) {
      g[i] = (fp - fx) / h;
    } else if (std::isfinite(fm)) {
      g[i] = (fx - fm) / h;
    } else {
      g[i] = 0.0;
    }
  }
  return g;
}

template <std::size_t N, typename F>
BfgsResult<N> bfgs_minimize(F&& f, std::array<double, N> x, const BfgsOptions& opt = {}) {
  using Vec = std::array<double, N>;
  using Mat = std::array<std::array<double, N>, N>;

  auto dot = [](const Vec& u, const Vec& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += u[i] * v[i];
    return s;
  };
  auto identity = [] {
    Mat m{};
    for (std::size_t i = 0; i < N; ++i) m[i][i] = 1.0;
    return m;
  };
  auto inf_norm = [](const Vec& v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::fabs(e));
    return m;
  };

  BfgsResult<N> out;
  double fx = f(x);
  out.x = x;
  out.value = fx;
  if (!std::isfinite(fx)) return out;

  Vec g = central_gradient<N>(f, x, fx, opt.rel_step);
  Mat h = identity();
  bool fresh = true;

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    out.iterations = iter;
    if (inf_norm(g) < opt.grad_tol) {
      out.converged = true;
      break;
    }

    Vec d{};
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) d[i] -= h[i][j] * g[j];
    }
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      h = identity();
      fresh = true;
      for (std::size_t i = 0; i < N; ++i) d[i] = -g[i];
      slope = -dot(g, g);
    }
    const double dn = inf_norm(d);
    if (dn > opt.max_step) {
      for (auto& e : d) e *= opt.max_step / dn;
      slope *= opt.max_step / dn;
    }

    double alpha = 1.0;
    Vec xn{};
    double fn = fx;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < N; ++i) xn[i] = x[i] + alpha * d[i];
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (fresh) break;  // steepest descent cannot make progress either
      h = identity();
      fresh = true;
      continue;
    }

    const Vec gn = central_gradient<N>(f, xn, fn, opt.rel_step);
    Vec s{};
    Vec y{};
    for (std::size_t i = 0; i < N; ++i) {
      s[i] = xn[i] - x[i];
      y[i] = gn[i] - g[i];
    }
    const double improvement = fx - fn;
    x = xn;
    fx = fn;
    g = gn;
    out.x = x;
    out.value = fx;
    out.iterations = iter + 1;
    if (improvement < opt.obj_tol) {
      out.converged = true;
      break;
    }

    const double sy = dot(s, y);
    if (sy > 1e-300) {
      if (fresh) {
        const double scale = sy / dot(y, y);
        h = identity();
        for (std::size_t i = 0; i < N; ++i) h[i][i] = scale;
        fresh = false;
      }
      // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      const double rho = 1.0 / sy;
      Vec hy{};
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) hy[i] += h[i][j] * y[j];
      }
      const double yhy = dot(y, hy);
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
          h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
      }
    }
  }
  return out;
}

}  // namespace edugamma::optimize
