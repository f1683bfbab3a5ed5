#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlab {

struct ModelScale {
  std::string name;
  int layers = 0;
  int heads = 0;
  int qkv_dim = 0;
  int hidden_dim = 0;
  int vocab_size = 32768;
  int seq_len = 2048;
  double nominal_n = 0;  // parameter count the scale is named after
  // Token budget listed alongside the architecture; the 35M row's listed
  // budget disagrees with the 20N rule, see budget_mismatch().
  double listed_token_budget = 0;

  void validate() const {
    if (layers <= 0 || heads <= 0 || qkv_dim <= 0 || hidden_dim <= 0 ||
        vocab_size <= 0 || seq_len <= 0) {
      throw std::invalid_argument("ModelScale: all dimensions must be > 0");
    }
    if (qkv_dim % heads != 0) {
      throw std::invalid_argument("ModelScale: qkv_dim not divisible by heads");
    }
  }
};

// Dense-transformer parameter estimate: 12 L d^2 for the blocks (4 d^2
// attention + 8 d^2 for the 4x feed-forward) plus tied embeddings.
inline double estimate_params(const ModelScale& s) {
  s.validate();
  return 12.0 * s.layers * static_cast<double>(s.qkv_dim) * s.qkv_dim +
         static_cast<double>(s.vocab_size) * s.qkv_dim;
}

// Chinchilla-style budget D = 20 N lambda, lambda >= 1 the overtraining
// multiplier.
inline double token_budget(double n, double lambda = 1.0) {
  if (n <= 0) throw std::invalid_argument("token_budget: n must be > 0");
  if (lambda < 1.0) throw std::invalid_argument("token_budget: lambda < 1");
  return std::round(20.0 * n * lambda);
}

struct Budget {
  double tokens_d = 0;
  double overtrain_lambda = 1.0;

  static Budget chinchilla(double n, double lambda = 1.0) {
    return Budget{token_budget(n, lambda), lambda};
  }
};

// T = ceil(D / B); doubling the batch size halves the step count.
inline std::int64_t steps_for(double tokens_d, double global_batch) {
  if (tokens_d <= 0) throw std::invalid_argument("steps_for: d must be > 0");
  if (global_batch <= 0) throw std::invalid_argument("steps_for: b must be > 0");
  return static_cast<std::int64_t>(std::ceil(tokens_d / global_batch));
}

// True when the listed budget disagrees with the 20N rule by more than 2x
// (the 35M row lists 70M tokens where 20N gives 700M).
inline bool budget_mismatch(const ModelScale& s) {
  if (s.listed_token_budget <= 0) return false;
  double formula = token_budget(s.nominal_n);
  double ratio = s.listed_token_budget / formula;
  return ratio > 2.0 || ratio < 0.5;
}

inline const std::vector<ModelScale>& builtin_scales() {
  static const std::vector<ModelScale> scales = {
      {"35M", 6, 8, 512, 2048, 32768, 2048, 35e6, 70e6},
      {"90M", 9, 12, 768, 3072, 32768, 2048, 90e6, 1.8e9},
      {"180M", 12, 16, 1024, 4096, 32768, 2048, 180e6, 3.6e9},
      {"335M", 15, 20, 1280, 5120, 32768, 2048, 335e6, 6.6e9},
      {"550M", 18, 24, 1536, 6144, 32768, 2048, 550e6, 11e9},
      {"1.3B", 24, 32, 2048, 8192, 32768, 2048, 1.3e9, 26e9},
      {"2.4B", 30, 40, 2560, 10240, 32768, 2048, 2.4e9, 48e9},
      {"4B", 36, 48, 3072, 12288, 32768, 2048, 4e9, 80e9},
      {"10B", 48, 64, 4096, 16384, 32768, 2048, 10e9, 200e9},
  };
  return scales;
}

inline const ModelScale& find_scale(const std::string& name) {
  for (const auto& s : builtin_scales()) {
    if (s.name == name) return s;
  }
  throw std::invalid_argument("unknown model scale: " + name);
}

}  // namespace dlab
