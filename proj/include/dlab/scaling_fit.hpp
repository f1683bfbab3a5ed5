#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlab/lbfgs.hpp"
#include "dlab/rng.hpp"

namespace dlab {

struct Observation {
  double n = 0;                 // model size
  std::optional<int> m;         // replica count, absent for Data-Parallel
  double value = 0;             // loss, lr, or batch size; must be > 0
};

using ObservationSet = std::vector<Observation>;

// |log y - log yhat|, the paper's residual metric.
inline double residual(double y, double yhat) {
  if (y <= 0 || yhat <= 0) {
    throw std::invalid_argument("residual: inputs must be > 0");
  }
  return std::abs(std::log(y) - std::log(yhat));
}

struct PowerLawFit {
  double a = 0;      // multiplier, > 0
  double alpha = 0;  // exponent on N
  std::optional<double> beta;  // exponent on M, joint fits only
  double rms_log_residual = 0;

  double predict(double n, std::optional<int> m = std::nullopt) const {
    double v = a * std::pow(n, alpha);
    if (beta) {
      if (!m) throw std::invalid_argument("PowerLawFit: joint fit needs m");
      v *= std::pow(static_cast<double>(*m), *beta);
    }
    return v;
  }
};

namespace detail {

// Solve a small symmetric linear system by Gaussian elimination with partial
// pivoting. Throws on (near-)singular systems.
template <std::size_t K>
std::array<double, K> solve(std::array<std::array<double, K>, K> a,
                            std::array<double, K> b) {
  for (std::size_t col = 0; col < K; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < K; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (std::abs(a[piv][col]) < 1e-12) {
      throw std::invalid_argument("fit: rank-deficient design");
    }
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < K; ++r) {
      double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < K; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::array<double, K> x{};
  for (int r = K - 1; r >= 0; --r) {
    double s = b[r];
    for (std::size_t c = r + 1; c < K; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

inline void check_positive(const ObservationSet& obs) {
  for (const auto& o : obs) {
    if (o.value <= 0 || o.n <= 0) {
      throw std::invalid_argument("fit: observations must be positive");
    }
  }
}

}  // namespace detail

// Least squares on (log n, log value): A = exp(intercept), alpha = slope.
inline PowerLawFit fit_power_law(const ObservationSet& obs) {
  detail::check_positive(obs);
  std::set<double> distinct;
  for (const auto& o : obs) distinct.insert(o.n);
  if (distinct.size() < 2) {
    throw std::invalid_argument("fit_power_law: need >= 2 distinct n values");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& o : obs) {
    double x = std::log(o.n), y = std::log(o.value);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double k = static_cast<double>(obs.size());
  auto q = detail::solve<2>({{{k, sx}, {sx, sxx}}}, {sy, sxy});
  PowerLawFit fit;
  fit.a = std::exp(q[0]);
  fit.alpha = q[1];
  double ss = 0;
  for (const auto& o : obs) {
    double r = residual(o.value, fit.predict(o.n));
    ss += r * r;
  }
  fit.rms_log_residual = std::sqrt(ss / k);
  return fit;
}

// Two-regressor least squares in the log domain: f(n, m) = A n^alpha m^beta.
inline PowerLawFit fit_joint_power_law(const ObservationSet& obs) {
  detail::check_positive(obs);
  std::set<double> ns;
  std::set<int> ms;
  for (const auto& o : obs) {
    if (!o.m) throw std::invalid_argument("fit_joint_power_law: missing m");
    ns.insert(o.n);
    ms.insert(*o.m);
  }
  if (obs.size() < 3 || ns.size() < 2 || ms.size() < 2) {
    throw std::invalid_argument(
        "fit_joint_power_law: need >= 3 points spanning >= 2 n and >= 2 m");
  }
  std::array<std::array<double, 3>, 3> ata{};
  std::array<double, 3> atb{};
  for (const auto& o : obs) {
    std::array<double, 3> row{1.0, std::log(o.n),
                              std::log(static_cast<double>(*o.m))};
    double y = std::log(o.value);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) ata[i][j] += row[i] * row[j];
      atb[i] += row[i] * y;
    }
  }
  auto q = detail::solve<3>(ata, atb);
  PowerLawFit fit;
  fit.a = std::exp(q[0]);
  fit.alpha = q[1];
  fit.beta = q[2];
  double ss = 0;
  for (const auto& o : obs) {
    double r = residual(o.value, fit.predict(o.n, o.m));
    ss += r * r;
  }
  fit.rms_log_residual = std::sqrt(ss / static_cast<double>(obs.size()));
  return fit;
}

// Fit loss as a quadratic in log2(B) and return the vertex as a real-valued
// batch size. Errors out when the quadratic does not open upward.
inline double optimal_batch(const std::vector<std::pair<double, double>>&
                                batch_loss /* (B, loss at best lr) */) {
  std::set<double> distinct;
  for (const auto& [b, l] : batch_loss) {
    if (b <= 0) throw std::invalid_argument("optimal_batch: batch must be > 0");
    distinct.insert(b);
  }
  if (distinct.size() < 3) {
    throw std::invalid_argument("optimal_batch: need >= 3 distinct batch sizes");
  }
  // Least squares for l = c0 + c1 x + c2 x^2 with x = log2(B).
  std::array<std::array<double, 3>, 3> ata{};
  std::array<double, 3> atb{};
  for (const auto& [b, l] : batch_loss) {
    double x = std::log2(b);
    std::array<double, 3> row{1.0, x, x * x};
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) ata[i][j] += row[i] * row[j];
      atb[i] += row[i] * l;
    }
  }
  auto c = detail::solve<3>(ata, atb);
  if (c[2] <= 1e-12) {
    throw std::domain_error(
        "optimal_batch: quadratic is flat or opens downward (grid argmin "
        "fallback is up to the caller)");
  }
  double vertex = -c[1] / (2.0 * c[2]);
  return std::pow(2.0, vertex);
}

enum class FitKind { kIndependent, kJoint };

struct LooResult {
  // Residual at the held-out n, one entry per m (or a single entry keyed 0
  // when the data has no m).
  std::map<int, double> residual_per_m;
  double average = 0;
};

// Leave-one-out validation: fit on all n != held_n, predict at held_n.
inline LooResult loo_validate(const ObservationSet& obs, double held_n,
                              FitKind kind) {
  ObservationSet train;
  ObservationSet held;
  for (const auto& o : obs) {
    (o.n == held_n ? held : train).push_back(o);
  }
  if (held.empty()) {
    throw std::invalid_argument("loo_validate: held n absent from data");
  }
  LooResult out;
  if (kind == FitKind::kJoint) {
    auto fit = fit_joint_power_law(train);
    for (const auto& o : held) {
      out.residual_per_m[*o.m] = residual(o.value, fit.predict(o.n, o.m));
    }
  } else {
    // Independent fit per m (or one fit when m is absent).
    std::map<int, ObservationSet> groups;
    for (const auto& o : train) groups[o.m.value_or(0)].push_back(o);
    for (const auto& o : held) {
      int key = o.m.value_or(0);
      auto it = groups.find(key);
      if (it == groups.end()) {
        throw std::invalid_argument("loo_validate: no training data for m");
      }
      ObservationSet strip = it->second;
      for (auto& t : strip) t.m.reset();
      auto fit = fit_power_law(strip);
      out.residual_per_m[key] = residual(o.value, fit.predict(o.n));
    }
  }
  double sum = 0;
  for (const auto& [m, r] : out.residual_per_m) sum += r;
  out.average = sum / static_cast<double>(out.residual_per_m.size());
  return out;
}

// Parametric forms for L(N, M):
//   1: A N^alpha M^beta
//   2: A N^alpha M^beta + C
//   3: A N^(alpha + beta M) + C
//   4: A N^alpha + B M^beta + C
struct ParametricFit {
  int form = 1;
  double a = 0;
  double alpha = 0;
  double beta = 0;
  double b = 0;  // form 4 only
  double c = 0;  // forms 2-4
  double heldout_avg_residual = 0;
  double train_objective = 0;
  int restart_count = 0;
  double huber_delta = 0;

  double predict(double n, int m) const {
    switch (form) {
      case 1:
        return a * std::pow(n, alpha) * std::pow(m, beta);
      case 2:
        return a * std::pow(n, alpha) * std::pow(m, beta) + c;
      case 3:
        return a * std::pow(n, alpha + beta * m) + c;
      case 4:
        return a * std::pow(n, alpha) + b * std::pow(m, beta) + c;
      default:
        throw std::invalid_argument("ParametricFit: bad form");
    }
  }
};

namespace detail {

inline double huber(double r, double delta) {
  double a = std::abs(r);
  if (a <= delta) return 0.5 * r * r;
  return delta * (a - 0.5 * delta);
}

inline int parametric_dim(int form) {
  switch (form) {
    case 1:
      return 3;
    case 2:
    case 3:
      return 4;
    case 4:
      return 5;
    default:
      throw std::invalid_argument("fit_parametric: form must be 1..4");
  }
}

// Internal parameter vector q -> fit. Multipliers live in log space so they
// stay positive under unconstrained optimization.
inline ParametricFit unpack(int form, const std::vector<double>& q) {
  ParametricFit fit;
  fit.form = form;
  fit.a = std::exp(q[0]);
  fit.alpha = q[1];
  if (form == 4) {
    fit.b = std::exp(q[2]);
    fit.beta = q[3];
    fit.c = q[4];
  } else {
    fit.beta = q[2];
    if (form >= 2) fit.c = q[3];
  }
  return fit;
}

}  // namespace detail

// Huber fit in log space over 256 random restarts of L-BFGS; the restart with
// the lowest average holdout residual wins (ties: lower train objective, then
// lower restart index). Deterministic given the master seed.
inline ParametricFit fit_parametric(int form, const ObservationSet& train,
                                    const ObservationSet& holdout,
                                    int restarts = 256, double delta = 1e-3,
                                    std::uint64_t seed = 7,
                                    bool parallel = true) {
  if (train.empty() || holdout.empty()) {
    throw std::invalid_argument("fit_parametric: train and holdout nonempty");
  }
  detail::check_positive(train);
  detail::check_positive(holdout);
  for (const auto& o : train) {
    if (!o.m) throw std::invalid_argument("fit_parametric: missing m");
  }
  const int dim = detail::parametric_dim(form);

  auto objective = [&](const std::vector<double>& q) {
    ParametricFit f = detail::unpack(form, q);
    double total = 0;
    for (const auto& o : train) {
      double pred = f.predict(o.n, *o.m);
      if (!(pred > 0) || !std::isfinite(pred)) return 1e10;
      total += detail::huber(std::log(pred) - std::log(o.value), delta);
    }
    return total;
  };

  auto holdout_residual = [&](const ParametricFit& f) -> std::optional<double> {
    double sum = 0;
    for (const auto& o : holdout) {
      double pred = f.predict(o.n, *o.m);
      if (!(pred > 0) || !std::isfinite(pred)) return std::nullopt;
      sum += residual(o.value, pred);
    }
    return sum / static_cast<double>(holdout.size());
  };

  struct Candidate {
    double holdout = 0;
    double train_obj = 0;
    int index = 0;
    ParametricFit fit;
  };

  auto run_restart = [&](int r) -> std::optional<Candidate> {
    auto rng = make_rng(stream_key(seed, "restart", static_cast<std::uint64_t>(r)));
    std::uniform_real_distribution<double> log_a(0.0, 4.0);
    std::uniform_real_distribution<double> expo(-1.5, 0.5);
    std::uniform_real_distribution<double> cval(0.0, 2.0);
    std::vector<double> q0(dim);
    q0[0] = log_a(rng);
    q0[1] = expo(rng);
    if (form == 4) {
      q0[2] = log_a(rng);
      q0[3] = expo(rng);
      q0[4] = cval(rng);
    } else {
      q0[2] = expo(rng);
      if (form >= 2) q0[3] = cval(rng);
    }
    auto res = lbfgs_minimize(objective, std::move(q0));
    if (!std::isfinite(res.fx) || res.fx >= 1e10) return std::nullopt;
    ParametricFit fit = detail::unpack(form, res.x);
    auto hr = holdout_residual(fit);
    if (!hr) return std::nullopt;
    Candidate c;
    c.holdout = *hr;
    c.train_obj = res.fx;
    c.index = r;
    c.fit = fit;
    return c;
  };

  std::vector<std::optional<Candidate>> results(restarts);
  if (parallel) {
    std::vector<std::future<std::optional<Candidate>>> futs;
    futs.reserve(restarts);
    for (int r = 0; r < restarts; ++r) {
      futs.push_back(std::async(std::launch::async | std::launch::deferred,
                                run_restart, r));
    }
    for (int r = 0; r < restarts; ++r) results[r] = futs[r].get();
  } else {
    for (int r = 0; r < restarts; ++r) results[r] = run_restart(r);
  }

  std::optional<Candidate> best;
  for (const auto& c : results) {
    if (!c) continue;
    if (!best || c->holdout < best->holdout ||
        (c->holdout == best->holdout && c->train_obj < best->train_obj) ||
        (c->holdout == best->holdout && c->train_obj == best->train_obj &&
         c->index < best->index)) {
      best = c;
    }
  }
  if (!best) {
    throw std::runtime_error(
        "fit_parametric: all restarts diverged or produced invalid fits");
  }
  ParametricFit fit = best->fit;
  fit.heldout_avg_residual = best->holdout;
  fit.train_objective = best->train_obj;
  fit.restart_count = restarts;
  fit.huber_delta = delta;
  return fit;
}

// The outer learning rate is deliberately not fitted: it is constant per M.
class OuterLrTable {
 public:
  void set(int m, double eta) { table_[m] = eta; }
  double lookup(int m) const {
    auto it = table_.find(m);
    if (it == table_.end()) {
      throw std::invalid_argument("OuterLrTable: no entry for m");
    }
    return it->second;
  }

 private:
  std::map<int, double> table_;
};

}  // namespace dlab
