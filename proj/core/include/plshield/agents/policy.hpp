#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plshield/rng.hpp"
#include "plshield/shield/shield.hpp"

namespace plshield::agents {

enum class PolicyArch { Tabular, Mlp };

/// Differentiable softmax policy over discrete actions, indexed by a tabular
/// state id. Tabular keeps one logit row per state; Mlp runs the one-hot
/// state through a single tanh hidden layer.
struct PolicyParams {
  PolicyArch arch = PolicyArch::Tabular;
  int n_states = 0;
  int n_actions = 0;
  int hidden = 0;
  std::vector<double> w;

  static PolicyParams tabular(int n_states, int n_actions);
  static PolicyParams mlp(int n_states, int n_actions, int hidden, Rng& rng);

  size_t size() const { return w.size(); }
};

struct ForwardCache {
  int state = 0;
  std::vector<double> probs;
  std::vector<double> hidden_act;  // Mlp only
};

/// Softmax distribution for `state`; strictly positive entries.
/// Throws Error on non-finite parameters.
shield::PolicyDistribution policy_forward(const PolicyParams& p, int state,
                                          ForwardCache* cache = nullptr);

/// Accumulates d(objective)/d(w) into `grad` given d(objective)/d(logits).
void policy_backward(const PolicyParams& p, const ForwardCache& cache,
                     std::span<const double> dlogits, std::vector<double>& grad);

/// Flat little-endian doubles with a JSON header line (shape, algorithm,
/// step count).
void save_checkpoint(const std::string& path, const PolicyParams& p,
                     const std::string& algorithm, uint64_t step);
PolicyParams load_checkpoint(const std::string& path, std::string* algorithm = nullptr,
                             uint64_t* step = nullptr);

}  // namespace plshield::agents
