#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "plshield/rng.hpp"
#include "plshield/shield/shield.hpp"

namespace plshield::envs {

enum class Domain { Stars, Pacman };

using Cell = std::pair<int, int>;  // (x, y), origin bottom-left

/// Actions, in the order the shield programs use them.
enum Action : int { kStay = 0, kUp = 1, kDown = 2, kLeft = 3, kRight = 4 };
inline constexpr int kNumActions = 5;
Cell action_offset(int action);

struct SensorModel {
  bool noisy = false;
  double tp_rate = 1.0;  // mean confidence emitted on a true-positive cell
  double tn_rate = 1.0;  // 1 - mean confidence on a true-negative cell

  /// Concentration of the Beta confidence draws (51 makes tp=0.98 behave
  /// like Beta(50,1)).
  double concentration = 51.0;
};

struct GridConfig {
  Domain domain = Domain::Stars;
  int width = 5;
  int height = 5;
  Cell start{0, 0};
  std::vector<Cell> stars;
  std::vector<Cell> fires;  // static fires (Stars) or ghost starts (Pacman)
  double step_penalty = -0.1;
  double star_reward = 1.0;
  double completion_reward = 10.0;
  int max_steps = 200;
  double action_noise = 0.0;  // probability a move is replaced by a random one
  int horizon = 1;            // safety look-ahead used by sense()
  SensorModel sensors;

  // Normalization ranges for reported metrics.
  double return_lo = 0.0;
  double return_hi = 12.0;
  double violation_hi = 1000.0;

  size_t state_cap = 1u << 18;  // tabular index cap; hashed beyond

  void validate() const;
};

struct GridState {
  Cell agent{0, 0};
  uint32_t stars_taken = 0;  // bitmap over GridConfig::stars
  std::vector<Cell> ghosts;  // Pacman only; empty for Stars
  int steps = 0;
  bool done = false;
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
  bool violation = false;
};

GridState reset(const GridConfig& cfg, uint64_t seed);

/// One transition. Walls block; fires/ghosts end the episode with a violation
/// and without the completion bonus. Throws Error when stepping a finished
/// episode.
StepResult step(GridState& state, int action, const GridConfig& cfg, Rng& env_rng);

/// Sensor cells within Manhattan distance `horizon`, origin excluded, in the
/// order the look-ahead programs declare them.
std::vector<Cell> sensor_offsets(int horizon);

/// One confidence per sensor atom. Perfect mode emits exact 0/1 ground truth;
/// noisy mode draws calibrated Beta confidences.
shield::SensorReading sense(const GridState& state, const GridConfig& cfg, int horizon,
                            Rng& sensor_rng);

std::string render(const GridState& state, const GridConfig& cfg);

/// Deterministic tabular index over (agent, star bitmap, ghosts), hashed once
/// past the configured cap.
int state_index(const GridState& state, const GridConfig& cfg);
int state_space_size(const GridConfig& cfg);

}  // namespace plshield::envs
