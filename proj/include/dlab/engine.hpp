#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dlab/model_zoo.hpp"
#include "dlab/objectives.hpp"
#include "dlab/rng.hpp"

namespace dlab {

enum class Algorithm { kDataParallel, kDiLoCo };

inline std::string to_string(Algorithm a) {
  return a == Algorithm::kDataParallel ? "data-parallel" : "diloco";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "data-parallel" || s == "dp") return Algorithm::kDataParallel;
  if (s == "diloco") return Algorithm::kDiLoCo;
  throw std::invalid_argument("unknown algorithm: " + s);
}

struct Hyperparams {
  double inner_lr = 0.01;        // gamma, peak of the schedule
  double outer_lr = 1.0;         // eta, constant across training
  double global_batch = 64;      // B, tokens (samples for synthetic objectives)
  int replicas = 1;              // M
  int cadence = 30;              // H, inner steps between outer steps
  double beta1 = 0.9;
  double beta2 = 0.99;
  int warmup_steps = 1000;
  double final_lr_frac = 0.05;
  double clip_norm = 1.0;
  double weight_decay = -1.0;    // < 0 means "auto": set to 1/T per run
  double outer_momentum = 0.9;   // mu

  void validate() const {
    if (inner_lr <= 0 || outer_lr <= 0) {
      throw std::invalid_argument("Hyperparams: learning rates must be > 0");
    }
    if (replicas < 1 || cadence < 1) {
      throw std::invalid_argument("Hyperparams: replicas and cadence >= 1");
    }
    if (global_batch <= 0 ||
        std::fmod(global_batch, static_cast<double>(replicas)) != 0.0) {
      throw std::invalid_argument(
          "Hyperparams: global batch must be divisible by replicas");
    }
    if (clip_norm <= 0) throw std::invalid_argument("Hyperparams: clip_norm <= 0");
  }
};

// Linear warmup from 0 to peak, then cosine decay to final_frac * peak.
inline double lr_at(std::int64_t t, std::int64_t t_total, double peak,
                    int warmup = 1000, double final_frac = 0.05) {
  if (t < 0 || t > t_total) throw std::invalid_argument("lr_at: t out of range");
  if (t <= warmup) {
    if (warmup == 0) return peak;
    return peak * static_cast<double>(t) / warmup;
  }
  if (t_total <= warmup) return peak;
  double progress =
      static_cast<double>(t - warmup) / static_cast<double>(t_total - warmup);
  double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return peak * (final_frac + (1.0 - final_frac) * cosine);
}

inline double l2_norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline std::vector<double> clip_global(std::vector<double> g, double bound) {
  if (bound <= 0) throw std::invalid_argument("clip_global: bound must be > 0");
  double norm = l2_norm(g);
  if (norm > bound) {
    double scale = bound / norm;
    for (double& x : g) x *= scale;
  }
  return g;
}

struct ReplicaState {
  std::vector<double> theta;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::int64_t step_count = 0;
  Rng data_stream;

  explicit ReplicaState(std::vector<double> theta0, std::uint64_t stream)
      : theta(std::move(theta0)),
        adam_m(theta.size(), 0.0),
        adam_v(theta.size(), 0.0),
        data_stream(stream) {}
};

constexpr double kAdamEps = 1e-8;

// AdamW with bias correction and decoupled weight decay.
inline void adamw_step(ReplicaState& st, const std::vector<double>& g,
                       double lr, const Hyperparams& hp) {
  if (g.size() != st.theta.size()) {
    throw std::invalid_argument("adamw_step: gradient dimension mismatch");
  }
  for (double x : g) {
    if (!std::isfinite(x)) throw std::domain_error("adamw_step: non-finite gradient");
  }
  st.step_count += 1;
  double wd = hp.weight_decay < 0 ? 0.0 : hp.weight_decay;
  double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.step_count));
  double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.step_count));
  for (std::size_t i = 0; i < g.size(); ++i) {
    st.adam_m[i] = hp.beta1 * st.adam_m[i] + (1.0 - hp.beta1) * g[i];
    st.adam_v[i] = hp.beta2 * st.adam_v[i] + (1.0 - hp.beta2) * g[i] * g[i];
    double mhat = st.adam_m[i] / bc1;
    double vhat = st.adam_v[i] / bc2;
    st.theta[i] -= lr * (mhat / (std::sqrt(vhat) + kAdamEps) + wd * st.theta[i]);
  }
}

struct OuterState {
  std::vector<double> theta;         // most recent global model
  std::vector<double> momentum_buf;  // zero-initialized
  std::int64_t last_sync_step = 0;

  explicit OuterState(std::vector<double> theta0)
      : theta(std::move(theta0)), momentum_buf(theta.size(), 0.0) {}
};

// Delta = theta_prev - mean_m(theta_m). Fixed index-order reduction so the
// result is bitwise identical no matter how replicas were scheduled.
inline std::vector<double> outer_gradient(
    const std::vector<double>& theta_prev,
    const std::vector<const std::vector<double>*>& replicas) {
  if (replicas.empty()) {
    throw std::invalid_argument("outer_gradient: no replicas");
  }
  std::vector<double> mean(theta_prev.size(), 0.0);
  for (const auto* r : replicas) {
    if (r->size() != theta_prev.size()) {
      throw std::invalid_argument("outer_gradient: dimension mismatch");
    }
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (*r)[i];
  }
  double inv = 1.0 / static_cast<double>(replicas.size());
  std::vector<double> delta(theta_prev.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = theta_prev[i] - mean[i] * inv;
  }
  return delta;
}

// Sutskever-form Nesterov: buf <- mu buf + delta; theta <- theta - eta (delta + mu buf).
// With mu = 0, eta = 1 this reduces to theta <- mean of replicas.
inline void nesterov_outer_step(OuterState& outer,
                                const std::vector<double>& delta, double eta,
                                double mu) {
  if (delta.size() != outer.theta.size()) {
    throw std::invalid_argument("nesterov_outer_step: dimension mismatch");
  }
  for (std::size_t i = 0; i < delta.size(); ++i) {
    outer.momentum_buf[i] = mu * outer.momentum_buf[i] + delta[i];
    outer.theta[i] -= eta * (delta[i] + mu * outer.momentum_buf[i]);
  }
}

// Partition a batch into m contiguous shards of size B/M.
inline std::vector<Batch> shard_batch(const Batch& batch, int m) {
  if (m < 1) throw std::invalid_argument("shard_batch: m must be >= 1");
  if (batch.count % static_cast<std::size_t>(m) != 0) {
    throw std::invalid_argument("shard_batch: batch size not divisible by m");
  }
  std::size_t per = batch.count / m;
  std::vector<Batch> shards(m);
  for (int s = 0; s < m; ++s) {
    Batch& sh = shards[s];
    sh.count = per;
    sh.sample_dim = batch.sample_dim;
    sh.features.assign(
        batch.features.begin() + s * per * batch.sample_dim,
        batch.features.begin() + (s + 1) * per * batch.sample_dim);
    if (!batch.labels.empty()) {
      sh.labels.assign(batch.labels.begin() + s * per,
                       batch.labels.begin() + (s + 1) * per);
    }
  }
  return shards;
}

struct RunConfig {
  Algorithm algorithm = Algorithm::kDataParallel;
  double n = 0;         // model-size coordinate recorded with the run
  double tokens_d = 0;  // total budget (samples for synthetic objectives)
  Hyperparams hp;
  std::uint64_t seed = 0;
  std::size_t eval_batch = 256;
  std::int64_t eval_every = 0;  // 0: max(1, T/50)
  bool repartition_per_step = false;  // default: fixed shard per replica
  bool parallel_replicas = false;
  std::size_t param_dim = 0;  // filled from the objective
};

struct RunRecord {
  int schema_version = 1;
  std::string algorithm;
  double n = 0;
  int m = 1;
  int h = 1;
  double b = 0;
  double gamma = 0;
  double eta = 0;
  std::uint64_t seed = 0;
  double weight_decay = 0;
  std::int64_t t_steps = 0;
  double tokens_d = 0;
  std::vector<std::pair<std::int64_t, double>> loss_curve;
  double final_loss = 0;
  std::string status = "ok";  // ok | diverged
  std::vector<double> final_theta;  // kept for trajectory-level checks
};

namespace detail {

inline double eval_loss(const Objective& obj, const std::vector<double>& theta,
                        std::uint64_t seed, std::size_t eval_batch) {
  Batch held = obj.heldout(stream_key(seed, "eval"), eval_batch);
  return obj.loss(theta, held);
}

}  // namespace detail

// Draw `count` samples from a persistent replica stream. The stream advances
// deterministically, one key per draw.
inline Batch sample_from(const Objective& obj, Rng& stream, std::size_t count) {
  std::uint64_t key = stream();
  return obj.sample(key, count);
}

// Executes Data-Parallel or DiLoCo training. Deterministic for a fixed seed:
// each replica draws from its own stream and the sync reduction is done in
// index order, so sequential and parallel execution agree bitwise.
inline RunRecord train(const Objective& obj, RunConfig cfg) {
  cfg.hp.validate();
  const Hyperparams& hp = cfg.hp;
  const int m_count =
      cfg.algorithm == Algorithm::kDataParallel ? 1 : hp.replicas;
  const std::int64_t t_total = steps_for(cfg.tokens_d, hp.global_batch);
  const double wd =
      hp.weight_decay < 0 ? 1.0 / static_cast<double>(t_total) : hp.weight_decay;
  const std::size_t local_batch =
      static_cast<std::size_t>(hp.global_batch) / m_count;
  const std::int64_t eval_every =
      cfg.eval_every > 0 ? cfg.eval_every : std::max<std::int64_t>(1, t_total / 50);

  Hyperparams step_hp = hp;
  step_hp.weight_decay = wd;

  // Shared init across replicas and algorithms for a given seed.
  std::vector<double> theta0(obj.dim());
  {
    auto rng = make_rng(stream_key(cfg.seed, "init"));
    std::normal_distribution<double> n01(0.0, 0.1);
    for (double& v : theta0) v = n01(rng);
  }

  OuterState outer(theta0);
  std::vector<ReplicaState> replicas;
  replicas.reserve(m_count);
  for (int m = 0; m < m_count; ++m) {
    replicas.emplace_back(theta0, stream_key(cfg.seed, "data", m));
  }

  RunRecord rec;
  rec.algorithm = to_string(cfg.algorithm);
  rec.n = cfg.n;
  rec.m = m_count;
  rec.h = cfg.algorithm == Algorithm::kDiLoCo ? hp.cadence : 1;
  rec.b = hp.global_batch;
  rec.gamma = hp.inner_lr;
  rec.eta = hp.outer_lr;
  rec.seed = cfg.seed;
  rec.weight_decay = wd;
  rec.t_steps = t_total;
  rec.tokens_d = cfg.tokens_d;

  const bool diloco = cfg.algorithm == Algorithm::kDiLoCo;

  auto inner_step = [&](int m, std::int64_t t) {
    ReplicaState& st = replicas[m];
    Batch batch;
    if (cfg.repartition_per_step) {
      // Global batch re-partitioned each step; replica takes its slice.
      Batch global =
          obj.sample(stream_key(cfg.seed, "step", static_cast<std::uint64_t>(t)),
                     local_batch * m_count);
      batch = shard_batch(global, m_count)[m];
    } else {
      // Fixed shard per replica: draw from the replica's persistent stream.
      batch = sample_from(obj, st.data_stream, local_batch);
    }
    auto g = clip_global(obj.grad(st.theta, batch), hp.clip_norm);
    double lr = lr_at(t, t_total, hp.inner_lr, hp.warmup_steps, hp.final_lr_frac);
    adamw_step(st, g, lr, step_hp);
  };

  auto run_segment = [&](std::int64_t t_begin, std::int64_t t_end) {
    if (cfg.parallel_replicas && m_count > 1) {
      std::vector<std::thread> pool;
      pool.reserve(m_count);
      for (int m = 0; m < m_count; ++m) {
        pool.emplace_back([&, m] {
          for (std::int64_t t = t_begin; t <= t_end; ++t) inner_step(m, t);
        });
      }
      for (auto& th : pool) th.join();
    } else {
      for (int m = 0; m < m_count; ++m) {
        for (std::int64_t t = t_begin; t <= t_end; ++t) inner_step(m, t);
      }
    }
  };

  auto record_eval = [&](std::int64_t t) -> bool {
    // DiLoCo evaluates the most recent global model.
    const std::vector<double>& model = diloco ? outer.theta : replicas[0].theta;
    double loss = detail::eval_loss(obj, model, cfg.seed, cfg.eval_batch);
    rec.loss_curve.emplace_back(t, loss);
    if (!std::isfinite(loss)) {
      rec.status = "diverged";
      rec.final_loss = loss;
      rec.final_theta = model;
      return false;
    }
    return true;
  };

  std::int64_t t = 0;
  while (t < t_total) {
    // Advance to the next point of interest: sync boundary, eval point, or end.
    std::int64_t next = t_total;
    if (diloco) {
      std::int64_t next_sync = (t / hp.cadence + 1) * hp.cadence;
      next = std::min(next, next_sync);
    }
    std::int64_t next_eval = (t / eval_every + 1) * eval_every;
    next = std::min(next, next_eval);
    run_segment(t + 1, next);
    if (diloco && next % hp.cadence == 0) {
      std::vector<const std::vector<double>*> views;
      views.reserve(m_count);
      for (const auto& r : replicas) views.push_back(&r.theta);
      auto delta = outer_gradient(outer.theta, views);
      nesterov_outer_step(outer, delta, hp.outer_lr, hp.outer_momentum);
      outer.last_sync_step = next;
      for (auto& r : replicas) r.theta = outer.theta;  // broadcast
    }
    if (next % eval_every == 0 || next == t_total) {
      if (!record_eval(next)) return rec;
    }
    t = next;
  }
  rec.final_loss = rec.loss_curve.back().second;
  rec.final_theta = diloco ? outer.theta : replicas[0].theta;
  return rec;
}

}  // namespace dlab
