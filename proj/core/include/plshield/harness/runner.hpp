#pragma once

#include <optional>
#include <string>
#include <vector>

#include "plshield/agents/trainer.hpp"
#include "plshield/envs/gridworld.hpp"
#include "plshield/harness/kvconfig.hpp"
#include "plshield/shield/shield.hpp"

namespace plshield::harness {

struct RunSpec {
  envs::GridConfig env;
  agents::TrainerConfig trainer;
  long total_steps = 20000;
  std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
  int horizon = 1;
  std::string shield_path;              // explicit shield program, or
  std::optional<envs::Domain> shield_auto;  // generated via lookahead_program
  std::string out_dir = "runs/out";
  uint64_t env_fingerprint = 0;

  static RunSpec from_file(const std::string& path);
  static RunSpec from_kv(const KvConfig& kv, const std::string& base_dir);

  bool needs_shield() const { return trainer.algorithm != agents::Algorithm::Pg; }
};

/// One CSV row per finished episode; wall-clock time is reported in the
/// summary so repeated runs stay byte-identical.
struct MetricsRow {
  long step = 0;
  long episode = 0;
  double episodic_return = 0.0;
  double normalized_return = 0.0;
  long cumulative_violations = 0;
  double normalized_violation = 0.0;
  double mean_policy_safety = 0.0;  // NaN when the agent carries no shield
  long fallback_steps = 0;
};

struct SeedResult {
  uint64_t seed = 0;
  long episodes = 0;
  long steps = 0;
  long violations = 0;
  double normalized_violation = 0.0;
  double trailing_return = 0.0;  // mean over the last 100 episodes
  double trailing_return_norm = 0.0;
  double ema_return = 0.0;  // exponential moving average, coefficient 0.05
  double mean_policy_safety = 0.0;
  long fallback_steps = 0;
  int skipped_updates = 0;
  double wall_seconds = 0.0;
  std::string csv_path;
  std::vector<MetricsRow> rows;
};

struct RunSummary {
  std::string algorithm;
  double alpha = 0.0;
  double epsilon = 0.0;
  uint64_t env_fingerprint = 0;
  std::vector<SeedResult> per_seed;
  double mean_trailing_return = 0.0;
  double mean_trailing_return_norm = 0.0;
  double mean_violations = 0.0;
  double mean_normalized_violation = 0.0;
  std::string summary_path;
};

/// Trains every seed (in parallel up to PLSHIELD_THREADS), writing one
/// metrics CSV per seed plus summary.json under spec.out_dir.
RunSummary run(const RunSpec& spec);

/// Single-seed training without touching the filesystem.
SeedResult train_seed(const RunSpec& spec, const shield::CompiledShield* shield, uint64_t seed);

struct SweepResult {
  std::string parameter;
  std::vector<double> values;
  std::vector<RunSummary> summaries;
};

inline const std::vector<double> kDefaultAlphaGrid{0.0, 0.1, 0.5, 1.0, 5.0};
inline const std::vector<double> kDefaultEpsilonGrid{0.0, 0.005, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0};

/// Re-runs the spec once per parameter value (alpha or epsilon), defaulting
/// to the standard grids.
SweepResult sweep(const RunSpec& spec, const std::string& parameter,
                  std::vector<double> values = {});

struct LookaheadRow {
  int horizon = 0;
  size_t sensors = 0;
  size_t circuit_nodes = 0;  // compiled safety-query circuit
  double compile_seconds = 0.0;
  double eval_seconds = 0.0;  // mean per full shield decision
  bool over_budget = false;
};

std::vector<LookaheadRow> lookahead_report(envs::Domain domain, const std::vector<int>& horizons);
std::string lookahead_table(const std::vector<LookaheadRow>& rows);

/// Loads summary JSONs and tabulates return/violation per algorithm.
/// Throws ConfigError when the summaries come from different environments.
std::string compare(const std::vector<std::string>& summary_paths,
                    std::string* csv_out = nullptr);

RunSummary read_summary(const std::string& path);
void write_summary(const RunSpec& spec, const RunSummary& summary, const std::string& path);

/// Builds the shield configured by the spec (nullopt for plain pg).
std::optional<shield::CompiledShield> build_shield_for(const RunSpec& spec);

}  // namespace plshield::harness
