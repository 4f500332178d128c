#include "plshield/envs/gridworld.hpp"

#include <algorithm>

#include "plshield/common.hpp"

namespace plshield::envs {

Cell action_offset(int action) {
  switch (action) {
    case kStay: return {0, 0};
    case kUp: return {0, 1};
    case kDown: return {0, -1};
    case kLeft: return {-1, 0};
    case kRight: return {1, 0};
  }
  throw Error("invalid action " + std::to_string(action));
}

void GridConfig::validate() const {
  auto in_bounds = [&](Cell c) {
    return c.first >= 0 && c.first < width && c.second >= 0 && c.second < height;
  };
  if (width < 1 || height < 1) throw ConfigError("grid must be at least 1x1");
  if (!in_bounds(start)) throw ConfigError("agent start out of bounds");
  for (Cell c : stars)
    if (!in_bounds(c)) throw ConfigError("star out of bounds");
  for (Cell c : fires)
    if (!in_bounds(c)) throw ConfigError("fire out of bounds");
  if (stars.size() > 20) throw ConfigError("too many stars for the tabular index");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (action_noise < 0.0 || action_noise > 1.0) throw ConfigError("action_noise must be in [0,1]");
  if (sensors.noisy && (sensors.tp_rate < 0.5 || sensors.tp_rate > 1.0 || sensors.tn_rate < 0.5 ||
                        sensors.tn_rate > 1.0))
    throw ConfigError("sensor rates must lie in [0.5, 1]");
}

GridState reset(const GridConfig& cfg, uint64_t /*seed*/) {
  cfg.validate();
  GridState s;
  s.agent = cfg.start;
  s.stars_taken = 0;
  if (cfg.domain == Domain::Pacman) s.ghosts = cfg.fires;
  return s;
}

namespace {

bool in_bounds(const GridConfig& cfg, Cell c) {
  return c.first >= 0 && c.first < cfg.width && c.second >= 0 && c.second < cfg.height;
}

bool threat_at(const GridState& s, const GridConfig& cfg, Cell c) {
  if (cfg.domain == Domain::Stars) {
    return std::find(cfg.fires.begin(), cfg.fires.end(), c) != cfg.fires.end();
  }
  return std::find(s.ghosts.begin(), s.ghosts.end(), c) != s.ghosts.end();
}

}  // namespace

StepResult step(GridState& state, int action, const GridConfig& cfg, Rng& env_rng) {
  if (state.done) throw Error("step() on a finished episode");
  StepResult r;
  r.reward = cfg.step_penalty;
  ++state.steps;

  if (cfg.action_noise > 0.0 && env_rng.uniform() < cfg.action_noise)
    action = static_cast<int>(env_rng.uniform_int(kNumActions));

  const Cell off = action_offset(action);
  const Cell dest{state.agent.first + off.first, state.agent.second + off.second};
  if (in_bounds(cfg, dest)) state.agent = dest;

  if (threat_at(state, cfg, state.agent)) {
    state.done = true;
    r.done = true;
    r.violation = true;
    return r;
  }

  for (size_t i = 0; i < cfg.stars.size(); ++i) {
    if (cfg.stars[i] == state.agent && !(state.stars_taken & (1u << i))) {
      state.stars_taken |= 1u << i;
      r.reward += cfg.star_reward;
    }
  }
  if (state.stars_taken == (1u << cfg.stars.size()) - 1u || cfg.stars.empty()) {
    r.reward += cfg.completion_reward;
    state.done = true;
    r.done = true;
    return r;
  }

  if (cfg.domain == Domain::Pacman) {
    for (auto& g : state.ghosts) {
      Cell moves[4];
      int n = 0;
      for (int a = kUp; a <= kRight; ++a) {
        const Cell o = action_offset(a);
        const Cell c{g.first + o.first, g.second + o.second};
        if (in_bounds(cfg, c)) moves[n++] = c;
      }
      if (n > 0) g = moves[env_rng.uniform_int(static_cast<uint64_t>(n))];
    }
    if (threat_at(state, cfg, state.agent)) {
      state.done = true;
      r.done = true;
      r.violation = true;
      return r;
    }
  }

  if (state.steps >= cfg.max_steps) {
    state.done = true;
    r.done = true;
  }
  return r;
}

std::vector<Cell> sensor_offsets(int horizon) {
  std::vector<Cell> out;
  for (int d = 1; d <= horizon; ++d) {
    out.push_back({0, d});
    out.push_back({0, -d});
    out.push_back({-d, 0});
    out.push_back({d, 0});
    for (int a = 1; a < d; ++a) {
      const int b = d - a;
      out.push_back({a, b});
      out.push_back({a, -b});
      out.push_back({-a, b});
      out.push_back({-a, -b});
    }
  }
  return out;
}

shield::SensorReading sense(const GridState& state, const GridConfig& cfg, int horizon,
                            Rng& sensor_rng) {
  shield::SensorReading r;
  const auto offsets = sensor_offsets(horizon);
  r.values.reserve(offsets.size());
  const double kappa = cfg.sensors.concentration;
  for (Cell off : offsets) {
    const Cell c{state.agent.first + off.first, state.agent.second + off.second};
    const bool truth = in_bounds(cfg, c) && threat_at(state, cfg, c);
    if (!cfg.sensors.noisy) {
      r.values.push_back(truth ? 1.0 : 0.0);
    } else if (truth) {
      r.values.push_back(sensor_rng.beta(kappa * cfg.sensors.tp_rate,
                                         kappa * (1.0 - cfg.sensors.tp_rate)));
    } else {
      r.values.push_back(1.0 - sensor_rng.beta(kappa * cfg.sensors.tn_rate,
                                               kappa * (1.0 - cfg.sensors.tn_rate)));
    }
  }
  return r;
}

std::string render(const GridState& state, const GridConfig& cfg) {
  std::string out;
  for (int y = cfg.height - 1; y >= 0; --y) {
    for (int x = 0; x < cfg.width; ++x) {
      const Cell c{x, y};
      char ch = '.';
      for (size_t i = 0; i < cfg.stars.size(); ++i)
        if (cfg.stars[i] == c && !(state.stars_taken & (1u << i))) ch = 'S';
      if (cfg.domain == Domain::Stars) {
        if (std::find(cfg.fires.begin(), cfg.fires.end(), c) != cfg.fires.end()) ch = 'F';
      } else {
        if (std::find(state.ghosts.begin(), state.ghosts.end(), c) != state.ghosts.end()) ch = 'G';
      }
      if (state.agent == c) ch = 'A';
      out += ch;
    }
    out += '\n';
  }
  return out;
}

int state_index(const GridState& state, const GridConfig& cfg) {
  const uint64_t cells = static_cast<uint64_t>(cfg.width) * cfg.height;
  uint64_t idx = static_cast<uint64_t>(state.agent.second) * cfg.width + state.agent.first;
  idx = idx * (1u << cfg.stars.size()) + state.stars_taken;
  for (const Cell& g : state.ghosts)
    idx = idx * cells + static_cast<uint64_t>(g.second) * cfg.width + g.first;

  const uint64_t full = static_cast<uint64_t>(state_space_size(cfg));
  if (full <= cfg.state_cap) return static_cast<int>(idx);
  // FNV-1a over the index; collisions are acceptable past the cap.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (int b = 0; b < 8; ++b) {
    h ^= (idx >> (8 * b)) & 0xff;
    h *= 0x100000001b3ULL;
  }
  return static_cast<int>(h % cfg.state_cap);
}

int state_space_size(const GridConfig& cfg) {
  const uint64_t cells = static_cast<uint64_t>(cfg.width) * cfg.height;
  uint64_t n = cells * (1u << cfg.stars.size());
  const size_t ghosts = cfg.domain == Domain::Pacman ? cfg.fires.size() : 0;
  for (size_t i = 0; i < ghosts; ++i) {
    if (n > cfg.state_cap) return static_cast<int>(cfg.state_cap);
    n *= cells;
  }
  return static_cast<int>(std::min<uint64_t>(n, cfg.state_cap));
}

}  // namespace plshield::envs
