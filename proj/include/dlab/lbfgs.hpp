#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <vector>

namespace dlab {

struct LbfgsOptions {
  int max_iters = 500;
  double grad_tol = 1e-10;
  // Stop when the per-iteration improvement drops below
  // f_tol * max(|f|, 1); the default matches the usual 2.2e-16 * 1e7
  // convention of reference L-BFGS implementations.
  double f_tol = 2.220446049250313e-9;
  int history = 8;
  double fd_step = 1e-7;  // central-difference step for the numeric gradient
};

struct LbfgsResult {
  std::vector<double> x;
  double fx = 0;
  bool converged = false;
  int iters = 0;
};

// L-BFGS with two-loop recursion, numeric central-difference gradients, and
// Armijo backtracking. Meant for small, cheap objectives.
inline LbfgsResult lbfgs_minimize(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x0, const LbfgsOptions& opt = {}) {
  const std::size_t n = x0.size();
  auto grad = [&](const std::vector<double>& x) {
    std::vector<double> g(n);
    std::vector<double> probe = x;
    for (std::size_t i = 0; i < n; ++i) {
      double h = opt.fd_step * std::max(1.0, std::abs(x[i]));
      probe[i] = x[i] + h;
      double fp = f(probe);
      probe[i] = x[i] - h;
      double fm = f(probe);
      probe[i] = x[i];
      g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
  };

  LbfgsResult res;
  res.x = std::move(x0);
  res.fx = f(res.x);
  if (!std::isfinite(res.fx)) return res;
  std::vector<double> g = grad(res.x);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };

  for (int it = 0; it < opt.max_iters; ++it) {
    double gnorm = std::sqrt(dot(g, g));
    if (gnorm <= opt.grad_tol) {
      res.converged = true;
      res.iters = it;
      return res;
    }
    // Two-loop recursion for the search direction.
    std::vector<double> q = g;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * dot(s_hist[i], q);
      for (std::size_t j = 0; j < n; ++j) q[j] -= alpha[i] * y_hist[i][j];
    }
    if (!s_hist.empty()) {
      double gamma = dot(s_hist.back(), y_hist.back()) /
                     std::max(1e-300, dot(y_hist.back(), y_hist.back()));
      for (double& v : q) v *= gamma;
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      double beta = rho_hist[i] * dot(y_hist[i], q);
      for (std::size_t j = 0; j < n; ++j) q[j] += (alpha[i] - beta) * s_hist[i][j];
    }
    for (double& v : q) v = -v;  // descent direction

    double dir_deriv = dot(g, q);
    if (dir_deriv >= 0) {
      // Fall back to steepest descent if curvature info went bad.
      for (std::size_t j = 0; j < n; ++j) q[j] = -g[j];
      dir_deriv = -dot(g, g);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    // Armijo backtracking.
    double step = 1.0;
    const double c1 = 1e-4;
    std::vector<double> x_new(n);
    double f_new = 0;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      for (std::size_t j = 0; j < n; ++j) x_new[j] = res.x[j] + step * q[j];
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= res.fx + c1 * step * dir_deriv) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.iters = it;
      return res;  // stuck; caller treats non-converged restarts on merit
    }
    std::vector<double> g_new = grad(x_new);
    std::vector<double> s(n), y(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = x_new[j] - res.x[j];
      y[j] = g_new[j] - g[j];
    }
    double sy = dot(s, y);
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    double improvement = res.fx - f_new;
    res.x = std::move(x_new);
    res.fx = f_new;
    g = std::move(g_new);
    if (improvement < opt.f_tol * std::max(1.0, std::abs(res.fx))) {
      res.converged = true;
      res.iters = it + 1;
      return res;
    }
  }
  res.iters = opt.max_iters;
  return res;
}

}  // namespace dlab
