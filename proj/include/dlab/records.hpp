#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "dlab/engine.hpp"

namespace dlab {

using RunKey = std::tuple<std::string, double, int, int, double, double, double,
                          std::uint64_t>;

inline RunKey key_of(const RunRecord& r) {
  return {r.algorithm, r.n, r.m, r.h, r.b, r.gamma, r.eta, r.seed};
}

inline nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json j;
  j["schema_version"] = r.schema_version;
  j["algorithm"] = r.algorithm;
  j["n"] = r.n;
  j["m"] = r.m;
  j["h"] = r.h;
  j["b"] = r.b;
  j["gamma"] = r.gamma;
  j["eta"] = r.eta;
  j["seed"] = r.seed;
  j["weight_decay"] = r.weight_decay;
  j["t_steps"] = r.t_steps;
  j["tokens_d"] = r.tokens_d;
  j["final_loss"] = r.final_loss;
  j["status"] = r.status;
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [step, loss] : r.loss_curve) {
    curve.push_back({step, loss});
  }
  j["loss_curve"] = curve;
  return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != 1) {
    throw std::runtime_error("RunRecord: unsupported schema version");
  }
  r.algorithm = j.at("algorithm").get<std::string>();
  r.n = j.at("n").get<double>();
  r.m = j.at("m").get<int>();
  r.h = j.at("h").get<int>();
  r.b = j.at("b").get<double>();
  r.gamma = j.at("gamma").get<double>();
  r.eta = j.at("eta").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.weight_decay = j.at("weight_decay").get<double>();
  r.t_steps = j.at("t_steps").get<std::int64_t>();
  r.tokens_d = j.at("tokens_d").get<double>();
  r.final_loss = j.at("final_loss").get<double>();
  r.status = j.at("status").get<std::string>();
  for (const auto& e : j.at("loss_curve")) {
    r.loss_curve.emplace_back(e.at(0).get<std::int64_t>(), e.at(1).get<double>());
  }
  return r;
}

// Append-only store of RunRecords, one JSON object per line. Re-running a
// completed key is a no-op unless forced. Appends are serialized so sweep
// workers can share a store.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
      std::ifstream in(path_);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        RunRecord r = record_from_json(nlohmann::json::parse(line));
        records_[key_of(r)] = r;
      }
    }
  }

  bool contains(const RunKey& k) const {
    std::lock_guard lock(mu_);
    return records_.count(k) > 0;
  }

  // Returns false when the key already existed and force was not set.
  bool put(const RunRecord& r, bool force = false) {
    std::lock_guard lock(mu_);
    auto k = key_of(r);
    if (records_.count(k) && !force) return false;
    // Forced reruns append a new line; the loader keeps the last occurrence.
    records_[k] = r;
    std::ofstream out(path_, std::ios::app);
    out << to_json(r).dump() << "\n";
    return true;
  }

  std::vector<RunRecord> all() const {
    std::lock_guard lock(mu_);
    std::vector<RunRecord> out;
    out.reserve(records_.size());
    for (const auto& [k, r] : records_) out.push_back(r);
    return out;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return records_.size();
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<RunKey, RunRecord> records_;
};

}  // namespace dlab
