#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dlab/engine.hpp"
#include "dlab/records.hpp"

namespace dlab {

struct SweepSpec {
  std::vector<Algorithm> algorithms;
  std::vector<double> n_values;
  std::vector<int> m_values{1};     // DiLoCo only; DP always runs with M=1
  std::vector<int> h_values{30};
  std::vector<double> inner_lrs;    // powers of sqrt(2) by convention
  std::vector<double> batches;      // powers of 2 by convention
  std::vector<double> outer_lrs{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<std::uint64_t> seeds{0};
  double tokens_per_n = 20.0;       // D = tokens_per_n * N
  int warmup_steps = 10;
  std::size_t eval_batch = 256;

  void validate() const {
    if (algorithms.empty() || n_values.empty() || inner_lrs.empty() ||
        batches.empty() || outer_lrs.empty() || m_values.empty() ||
        h_values.empty() || seeds.empty()) {
      throw std::invalid_argument("SweepSpec: grids must be nonempty");
    }
    for (double b : batches) {
      for (int m : m_values) {
        if (std::fmod(b, static_cast<double>(m)) != 0.0) {
          throw std::invalid_argument(
              "SweepSpec: every batch must be divisible by every m");
        }
      }
    }
  }
};

struct SweepPoint {
  Algorithm algorithm;
  double n;
  int m;
  int h;
  double batch;
  double gamma;
  double eta;
  std::uint64_t seed;
};

inline std::vector<SweepPoint> expand_grid(const SweepSpec& spec) {
  spec.validate();
  std::vector<SweepPoint> points;
  for (auto algo : spec.algorithms) {
    const std::vector<int> ms =
        algo == Algorithm::kDataParallel ? std::vector<int>{1} : spec.m_values;
    const std::vector<int> hs =
        algo == Algorithm::kDataParallel ? std::vector<int>{1} : spec.h_values;
    const std::vector<double> etas = algo == Algorithm::kDataParallel
                                         ? std::vector<double>{1.0}
                                         : spec.outer_lrs;
    for (double n : spec.n_values)
      for (int m : ms)
        for (int h : hs)
          for (double b : spec.batches)
            for (double g : spec.inner_lrs)
              for (double eta : etas)
                for (auto seed : spec.seeds)
                  points.push_back({algo, n, m, h, b, g, eta, seed});
  }
  return points;
}

struct BestEntry {
  RunRecord record;
  // True when the argmin sits on the edge of the lr or batch grid; the paper
  // extends grids until the optimum is interior.
  bool boundary_optimum = false;
};

// Best run (lowest final loss) per (algorithm, n, m); recomputable from raw
// records by an independent scan.
using BestSummary = std::map<std::tuple<std::string, double, int>, BestEntry>;

inline RunConfig config_for(const SweepSpec& spec, const SweepPoint& p,
                            bool parallel_replicas) {
  RunConfig cfg;
  cfg.algorithm = p.algorithm;
  cfg.n = p.n;
  cfg.tokens_d = std::round(spec.tokens_per_n * p.n);
  cfg.hp.inner_lr = p.gamma;
  cfg.hp.outer_lr = p.eta;
  cfg.hp.global_batch = p.batch;
  cfg.hp.replicas = p.m;
  cfg.hp.cadence = p.h;
  cfg.hp.warmup_steps = spec.warmup_steps;
  cfg.seed = p.seed;
  cfg.eval_batch = spec.eval_batch;
  cfg.parallel_replicas = parallel_replicas;
  return cfg;
}

// Runs every grid point and appends records to the store. Grid points may run
// concurrently; output is independent of completion order because the store
// is keyed and the summary is a deterministic scan.
inline void run_sweep(const SweepSpec& spec, const Objective& obj,
                      RunStore& store, bool concurrent = false,
                      bool force = false) {
  auto points = expand_grid(spec);
  auto run_one = [&](const SweepPoint& p) {
    RunConfig cfg = config_for(spec, p, /*parallel_replicas=*/false);
    RunRecord probe;
    probe.algorithm = to_string(p.algorithm);
    probe.n = p.n;
    probe.m = p.algorithm == Algorithm::kDataParallel ? 1 : p.m;
    probe.h = p.algorithm == Algorithm::kDataParallel ? 1 : p.h;
    probe.b = p.batch;
    probe.gamma = p.gamma;
    probe.eta = p.eta;
    probe.seed = p.seed;
    if (!force && store.contains(key_of(probe))) return;
    store.put(train(obj, cfg), force);
  };
  if (concurrent) {
    std::vector<std::future<void>> futs;
    futs.reserve(points.size());
    for (const auto& p : points) {
      futs.push_back(std::async(std::launch::async | std::launch::deferred,
                                run_one, p));
    }
    for (auto& f : futs) f.get();
  } else {
    for (const auto& p : points) run_one(p);
  }
}

inline BestSummary best_per_group(const std::vector<RunRecord>& records,
                                  const SweepSpec& spec) {
  BestSummary best;
  for (const auto& r : records) {
    if (r.status != "ok") continue;
    auto key = std::make_tuple(r.algorithm, r.n, r.m);
    auto it = best.find(key);
    if (it == best.end() || r.final_loss < it->second.record.final_loss) {
      BestEntry e;
      e.record = r;
      best[key] = e;
    }
  }
  auto at_edge = [](double v, const std::vector<double>& grid) {
    if (grid.size() < 2) return false;
    auto [lo, hi] = std::minmax_element(grid.begin(), grid.end());
    return v == *lo || v == *hi;
  };
  for (auto& [key, entry] : best) {
    entry.boundary_optimum = at_edge(entry.record.gamma, spec.inner_lrs) ||
                             at_edge(entry.record.b, spec.batches);
  }
  return best;
}

}  // namespace dlab
