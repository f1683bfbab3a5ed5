#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlab/scaling_fit.hpp"
#include "dlab/tables.hpp"

namespace dlab {

// One row of the bundled evaluation-loss dataset (long format).
struct LossRow {
  std::string algorithm;  // data-parallel | diloco
  int m = 1;
  double n = 0;
  double loss = 0;
};

inline std::vector<LossRow> load_loss_rows(const std::filesystem::path& path) {
  Table t = load_table(path);
  std::vector<LossRow> rows;
  rows.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    LossRow r;
    r.algorithm = t.str(i, "algorithm");
    r.m = static_cast<int>(t.num(i, "m"));
    r.n = t.num(i, "n");
    r.loss = t.num(i, "loss");
    rows.push_back(r);
  }
  return rows;
}

inline ObservationSet data_parallel_observations(
    const std::vector<LossRow>& rows) {
  ObservationSet obs;
  for (const auto& r : rows) {
    if (r.algorithm == "data-parallel") {
      obs.push_back({r.n, std::nullopt, r.loss});
    }
  }
  return obs;
}

inline ObservationSet diloco_observations(const std::vector<LossRow>& rows) {
  ObservationSet obs;
  for (const auto& r : rows) {
    if (r.algorithm == "diloco") {
      obs.push_back({r.n, r.m, r.loss});
    }
  }
  return obs;
}

// Split a joint observation set into train/holdout at a given n.
inline std::pair<ObservationSet, ObservationSet> split_holdout(
    const ObservationSet& obs, double holdout_n) {
  ObservationSet train, hold;
  for (const auto& o : obs) {
    (o.n == holdout_n ? hold : train).push_back(o);
  }
  if (hold.empty()) {
    throw std::invalid_argument("split_holdout: holdout n absent");
  }
  return {train, hold};
}

}  // namespace dlab
