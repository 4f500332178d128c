#pragma once

#include <memory>
#include <string>
#include <vector>

#include "plshield/circuit/circuit.hpp"
#include "plshield/logic/ast.hpp"
#include "plshield/logic/grounder.hpp"

namespace plshield::shield {

/// Per-sensor probabilities, parallel to the shield's sensor atom list.
struct SensorReading {
  std::vector<double> values;
};

/// Per-action probabilities of the base policy; sums to 1 within 1e-9.
struct PolicyDistribution {
  std::vector<double> probs;
};

struct ShieldDecision {
  std::vector<double> action_safety;  // P(safe | s, a), independent of the policy
  double policy_safety = 0.0;         // sum_a P(safe|s,a) pi(a|s)
  std::vector<double> shielded;       // pi+(a|s), Bayes renormalization of pi
  bool fallback = false;              // policy safety below the floor; shielded == pi
};

/// Jacobians of the decision with respect to the base policy entries.
struct ShieldGradients {
  std::vector<double> d_policy_safety;          // [b] = d PS / d pi_b
  std::vector<std::vector<double>> d_shielded;  // [a][b] = d pi+_a / d pi_b
};

struct RejectionDecision {
  std::vector<uint8_t> safe_mask;    // 1 = action accepted at the 0/1 sensor reading
  std::vector<double> renormalized;  // masked and renormalized policy
  bool fallback = false;             // every action masked unsafe; falls back to pi
};

/// Safety program compiled once and queried per state. The circuits for
/// {safe, safe&act(a_i), act(a_i)} share one variable table; only the
/// valuation (sensor readings and policy) changes between states.
/// Immutable after build; decide* are reentrant.
class CompiledShield {
 public:
  /// `bk` must define predicate `safe` and must not define the action atoms;
  /// the action choice and one probabilistic fact per sensor are added here.
  static CompiledShield build(const logic::Theory& bk, std::vector<logic::Atom> actions,
                              std::vector<logic::Atom> sensors,
                              const logic::GroundOptions& gopts = {},
                              const wmc::CompileOptions& copts = {});

  /// Builds from a shield program text carrying #actions / #sensors directives.
  static CompiledShield from_text(std::string_view program_text);
  static CompiledShield from_file(const std::string& path);

  ShieldDecision decide(const PolicyDistribution& pi, const SensorReading& h) const;
  std::pair<ShieldDecision, ShieldGradients> decide_with_gradients(
      const PolicyDistribution& pi, const SensorReading& h) const;
  RejectionDecision rejection_decide(const PolicyDistribution& pi, const SensorReading& h,
                                     double threshold = 0.5) const;

  /// Policy safety through the single circuit query with the policy valuation;
  /// agrees with ShieldDecision::policy_safety up to float error.
  double policy_safety_direct(const PolicyDistribution& pi, const SensorReading& h) const;

  size_t num_actions() const { return actions_.size(); }
  size_t num_sensors() const { return sensors_.size(); }
  size_t circuit_count() const { return 1 + 2 * actions_.size(); }
  const std::vector<logic::Atom>& actions() const { return actions_; }
  const std::vector<logic::Atom>& sensors() const { return sensors_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const wmc::Circuit& safe_circuit() const { return safe_; }
  const logic::GroundProgram& ground_program() const { return gp_; }

  /// Policy safety below this floor triggers the base-policy fallback.
  static constexpr double kSafetyFloor = 1e-9;

 private:
  std::vector<double> action_safeties(const SensorReading& h) const;
  wmc::Valuation valuation(const SensorReading& h, const std::vector<double>& pi) const;

  logic::GroundProgram gp_;
  std::shared_ptr<const wmc::VarTable> vars_;
  wmc::Circuit safe_;
  std::vector<wmc::Circuit> joint_;     // safe & act(a_i)
  std::vector<wmc::Circuit> marginal_;  // act(a_i)
  std::vector<logic::Atom> actions_;
  std::vector<logic::Atom> sensors_;
  std::vector<int> sensor_slot_;  // sensor -> fact index in gp_, -1 if pruned
  int pi_ad_ = -1;                // AD instance realizing the policy choice
  std::vector<double> uniform_pi_;
  std::vector<std::string> warnings_;
};

/// Renormalizes `pi` by per-action weights: out_a = w_a pi_a / sum_b w_b pi_b.
/// Shared by probabilistic and rejection shielding so that the two coincide
/// exactly when the weights are 0/1. Returns false when the mass is below
/// CompiledShield::kSafetyFloor (output left equal to pi).
bool renormalize_policy(const std::vector<double>& weights, const std::vector<double>& pi,
                        std::vector<double>& out, double* mass = nullptr);

/// Realizes a program's #actions/#sensors directives: adds the uniform action
/// choice and one 0.5-probability fact per undeclared sensor. Validates that
/// the program does not define the action atoms itself. Programs without
/// directives pass through unchanged.
logic::Theory complete_directives(const logic::Theory& t);

}  // namespace plshield::shield
