#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plshield/agents/policy.hpp"
#include "plshield/shield/shield.hpp"

namespace plshield::agents {

enum class Algorithm { Pg, Vsrl, EpsVsrl, Plpg };

enum class BaselineMode { None, StateMean };

Algorithm algorithm_from_string(const std::string& s);
std::string algorithm_name(Algorithm a);

struct TrainerConfig {
  Algorithm algorithm = Algorithm::Pg;
  double alpha = 1.0;    // weight of the safety gradient (Plpg)
  double epsilon = 0.0;  // probability of ignoring the mask (EpsVsrl)
  double lr = 0.1;
  double gamma = 0.99;
  int batch_episodes = 4;
  BaselineMode baseline = BaselineMode::StateMean;
  uint64_t seed = 1;
  PolicyArch arch = PolicyArch::Tabular;
  int hidden = 64;
  // Weight of the return term in Plpg; 0 isolates the safety gradient for
  // ablations.
  double return_weight = 1.0;
};

/// One environment transition as recorded for learning. `act_probs` is the
/// distribution the action was actually sampled from (the shielded policy for
/// shielded agents, the base policy otherwise).
struct StepRecord {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  shield::SensorReading sensors;
  std::vector<double> base_probs;
  std::vector<double> act_probs;
  std::vector<double> action_safety;  // shielded agents only
  double policy_safety = 1.0;
  bool fallback = false;
  bool violation = false;
};

struct EpisodeBatch {
  std::vector<std::vector<StepRecord>> episodes;
  double gamma = 0.99;
};

/// Running per-state mean of observed returns.
class Baseline {
 public:
  Baseline(BaselineMode mode, int n_states) : mode_(mode), mean_(n_states, 0.0), count_(n_states, 0) {}

  double value(int state) const { return mode_ == BaselineMode::None ? 0.0 : mean_[state]; }
  void record(int state, double ret) {
    if (mode_ == BaselineMode::None) return;
    ++count_[state];
    mean_[state] += (ret - mean_[state]) / static_cast<double>(count_[state]);
  }

 private:
  BaselineMode mode_;
  std::vector<double> mean_;
  std::vector<long> count_;
};

/// Discounted return-to-go minus the baseline, per step of each episode.
/// The baseline is read before being updated with the new returns.
std::vector<std::vector<double>> returns_to_go(const EpisodeBatch& batch, Baseline* baseline);

struct UpdateStats {
  double grad_norm = 0.0;
  int skipped = 0;         // non-finite gradient, update dropped
  int fallback_steps = 0;  // steps whose safety term was undefined
};

/// Vanilla likelihood-ratio update: theta += lr * mean_t psi_t grad log pi(a_t|s_t).
UpdateStats pg_update(PolicyParams& p, const EpisodeBatch& batch, const TrainerConfig& cfg,
                      Baseline& baseline);

/// Rejection-shielded baseline update. The batch was collected by acting with
/// the masked policy while the gradient uses log pi of the base policy; the
/// resulting off-policy mismatch is this baseline's defining behavior.
UpdateStats vsrl_update(PolicyParams& p, const EpisodeBatch& batch, const TrainerConfig& cfg,
                        Baseline& baseline);

/// Shielded policy gradient plus alpha-weighted safety gradient, both flowing
/// through the shield Jacobians into the softmax. Steps flagged as fallback
/// contribute only the return term.
UpdateStats plpg_update(PolicyParams& p, const EpisodeBatch& batch, const TrainerConfig& cfg,
                        Baseline& baseline);

/// Epsilon-greedy acceptance of unshielded actions: with probability epsilon
/// sample the base policy, otherwise the masked one. The coin uses its own
/// stream so acting reduces exactly to Pg at eps=1 and to Vsrl at eps=0.
int eps_vsrl_act(std::span<const double> renormalized, std::span<const double> base, double eps,
                 Rng& act_rng, Rng& explore_rng);

/// Log-safety of the shielded policy for one step, as used by plpg_update:
/// d log P_{pi+}(safe) / d pi_b given action safeties; P values are clamped to
/// [1e-12, inf) before the quotient.
std::vector<double> dlog_policy_safety_dpi(const std::vector<double>& safety,
                                           const std::vector<double>& pi);

}  // namespace plshield::agents
