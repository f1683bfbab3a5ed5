#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "dlab/engine.hpp"

namespace dlab {

struct NetworkProfile {
  double bandwidth_w = 0;  // bits/second
  double latency_eps = 0;  // seconds

  void validate() const {
    if (bandwidth_w <= 0 || latency_eps <= 0) {
      throw std::invalid_argument("NetworkProfile: bandwidth and latency > 0");
    }
  }
};

// The three network archetypes.
inline NetworkProfile high_bandwidth_net() { return {400e9, 1e-4}; }
inline NetworkProfile medium_bandwidth_net() { return {100e9, 1e-3}; }
inline NetworkProfile low_bandwidth_net() { return {10e9, 1e-2}; }

inline NetworkProfile archetype(const std::string& name) {
  if (name == "high") return high_bandwidth_net();
  if (name == "medium") return medium_bandwidth_net();
  if (name == "low") return low_bandwidth_net();
  throw std::invalid_argument("unknown network archetype: " + name);
}

struct HardwareProfile {
  double chips_r = 1;
  double flops_per_chip_q = 3e14;  // 300 TFLOPs
  double bits_per_param = 16;      // bf16 weights and gradients

  void validate() const {
    if (chips_r <= 0 || flops_per_chip_q <= 0 || bits_per_param <= 0) {
      throw std::invalid_argument("HardwareProfile: all fields > 0");
    }
  }
};

struct CostBreakdown {
  double compute_s = 0;
  double comm_inner_s = 0;
  double comm_outer_s = 0;
  double total_s = 0;
  double utilization = 0;  // compute / total
};

// Bandwidth-optimal all-reduce of n parameters over r nodes:
// (2 n bits / W)(1 - 1/r) + eps.
inline double allreduce_time(double n, double bits, double r,
                             const NetworkProfile& net) {
  if (r < 1) throw std::invalid_argument("allreduce_time: r must be >= 1");
  net.validate();
  return (2.0 * n * bits / net.bandwidth_w) * (1.0 - 1.0 / r) + net.latency_eps;
}

// Total FLOPs C = 6 N D; compute time bounded below by C / (R Q).
inline double compute_time(double n, double d, const HardwareProfile& hw) {
  if (n <= 0 || d <= 0) throw std::invalid_argument("compute_time: n, d > 0");
  hw.validate();
  return 6.0 * n * d / (hw.chips_r * hw.flops_per_chip_q);
}

struct CommTime {
  double inner_s = 0;
  double outer_s = 0;
  double total() const { return inner_s + outer_s; }
};

// Per-algorithm total communication time over t_steps inner steps. The outer
// step count is modeled as the amortized T/H, matching the closed forms.
inline CommTime comm_time(Algorithm algo, int m, double n, double bits,
                          double t_steps, int h, double r,
                          const NetworkProfile& within,
                          const NetworkProfile& cross) {
  if (t_steps <= 0) throw std::invalid_argument("comm_time: t_steps > 0");
  if (h < 1) throw std::invalid_argument("comm_time: h >= 1");
  CommTime ct;
  if (algo == Algorithm::kDataParallel) {
    ct.inner_s = allreduce_time(n, bits, r, cross) * t_steps;
    return ct;
  }
  if (m == 1) {
    double per = allreduce_time(n, bits, r, cross);
    ct.inner_s = per * t_steps;
    ct.outer_s = per * t_steps / h;
    return ct;
  }
  if (r < m) throw std::invalid_argument("comm_time: r < m");
  // Each replica trains on r/m nodes within a datacenter.
  ct.inner_s =
      ((2.0 * n * bits / within.bandwidth_w) * (1.0 - m / r) + within.latency_eps) *
      t_steps;
  ct.outer_s = allreduce_time(n, bits, r, cross) * t_steps / h;
  return ct;
}

struct WallclockInput {
  Algorithm algorithm = Algorithm::kDataParallel;
  int m = 1;
  int h = 1;
  double n = 0;
  double tokens_d = 0;
  double t_steps = 0;
};

inline CostBreakdown wallclock(const WallclockInput& run,
                               const HardwareProfile& hw,
                               const NetworkProfile& within,
                               const NetworkProfile& cross) {
  CostBreakdown cb;
  cb.compute_s = compute_time(run.n, run.tokens_d, hw);
  CommTime ct = comm_time(run.algorithm, run.m, run.n, hw.bits_per_param,
                          run.t_steps, run.h, hw.chips_r, within, cross);
  cb.comm_inner_s = ct.inner_s;
  cb.comm_outer_s = ct.outer_s;
  cb.total_s = cb.compute_s + cb.comm_inner_s + cb.comm_outer_s;
  cb.utilization = cb.compute_s / cb.total_s;
  return cb;
}

struct BandwidthRequirement {
  bool feasible = false;
  double bandwidth_w = 0;  // bits/second
};

namespace detail {

// Per-step communication seconds as a function of cross-datacenter bandwidth.
inline double per_step_comm(Algorithm algo, int m, double n, double bits, int h,
                            double r, const NetworkProfile& within,
                            double cross_w, double cross_eps) {
  NetworkProfile cross{cross_w, cross_eps};
  CommTime ct = comm_time(algo, m, n, bits, 1.0, h, r, within, cross);
  return ct.total();
}

}  // namespace detail

// Minimal cross-datacenter bandwidth reaching utilization >= target, found by
// bisection (utilization is monotone in W). Per-step compute time is fixed at
// step_time_s. Latency can impose a floor that makes the target unreachable.
inline BandwidthRequirement required_bandwidth(
    double target_cu, double step_time_s, Algorithm algo, int m, double n,
    double bits, int h, double r, const NetworkProfile& within,
    double cross_latency_eps, bool snap_to_grid = false) {
  if (target_cu <= 0 || target_cu >= 1) {
    throw std::invalid_argument("required_bandwidth: 0 < target_cu < 1");
  }
  if (step_time_s <= 0) {
    throw std::invalid_argument("required_bandwidth: step_time_s > 0");
  }
  auto util = [&](double w) {
    double comm = detail::per_step_comm(algo, m, n, bits, h, r, within, w,
                                        cross_latency_eps);
    return step_time_s / (step_time_s + comm);
  };
  // Feasibility at the infinite-bandwidth limit (latency floor remains).
  double floor_comm = detail::per_step_comm(algo, m, n, bits, h, r, within,
                                            std::numeric_limits<double>::max(),
                                            cross_latency_eps);
  if (step_time_s / (step_time_s + floor_comm) < target_cu) {
    return {false, 0};
  }
  double lo = 1.0, hi = 1.0;
  while (util(hi) < target_cu) {
    hi *= 2;
    if (hi > 1e30) return {false, 0};
  }
  while (util(lo) >= target_cu && lo > 1e-12) lo /= 2;
  // Invariant: util(lo) < target <= util(hi).
  while ((hi - lo) / hi > 1e-9) {
    double mid = 0.5 * (lo + hi);
    if (util(mid) >= target_cu) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  double w = hi;
  if (snap_to_grid) {
    // Geometric grid of ratio 10^(1/12), snapped upward.
    double step = std::pow(10.0, 1.0 / 12.0);
    double k = std::ceil(std::log(w) / std::log(step) - 1e-12);
    w = std::pow(step, k);
  }
  return {true, w};
}

}  // namespace dlab
