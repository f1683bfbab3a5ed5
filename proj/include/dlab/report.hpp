#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "dlab/datasets.hpp"
#include "dlab/records.hpp"
#include "dlab/sweep.hpp"

namespace dlab {

struct SeriesPoint {
  double x = 0;
  double y = 0;
  std::string series;
};

// Percentage difference in evaluation loss relative to Data-Parallel,
// 100 * (L_diloco - L_dp) / L_dp, one series per M.
inline std::vector<SeriesPoint> pct_diff_series(
    const std::vector<LossRow>& rows) {
  std::map<double, double> dp_loss;
  for (const auto& r : rows) {
    if (r.algorithm == "data-parallel") dp_loss[r.n] = r.loss;
  }
  std::vector<SeriesPoint> out;
  for (const auto& r : rows) {
    if (r.algorithm != "diloco") continue;
    auto it = dp_loss.find(r.n);
    if (it == dp_loss.end()) continue;
    SeriesPoint p;
    p.x = r.n;
    p.y = 100.0 * (r.loss - it->second) / it->second;
    p.series = "M=" + std::to_string(r.m);
    out.push_back(p);
  }
  return out;
}

// Best outer learning rate per (n, m) from a sweep store.
inline std::vector<SeriesPoint> best_outer_lr_series(
    const std::vector<RunRecord>& records) {
  std::map<std::pair<double, int>, const RunRecord*> best;
  for (const auto& r : records) {
    if (r.algorithm != "diloco" || r.status != "ok") continue;
    auto key = std::make_pair(r.n, r.m);
    auto it = best.find(key);
    if (it == best.end() || r.final_loss < it->second->final_loss) {
      best[key] = &r;
    }
  }
  std::vector<SeriesPoint> out;
  for (const auto& [key, rec] : best) {
    out.push_back({key.first, rec->eta, "M=" + std::to_string(key.second)});
  }
  return out;
}

inline std::vector<LossRow> loss_rows_from_best(const BestSummary& best) {
  std::vector<LossRow> rows;
  for (const auto& [key, entry] : best) {
    LossRow r;
    r.algorithm = std::get<0>(key);
    r.n = std::get<1>(key);
    r.m = std::get<2>(key);
    r.loss = entry.record.final_loss;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace dlab
