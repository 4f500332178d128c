#pragma once

#include "plshield/envs/gridworld.hpp"
#include "plshield/logic/ast.hpp"

namespace plshield::envs {

struct LookaheadProgram {
  logic::Theory theory;
  std::vector<logic::Atom> actions;
  std::vector<logic::Atom> sensors;
};

/// Generates the safety program for an N-step look-ahead.
///
/// Pacman: the agent follows its action once and then stays; fires expand to
/// every neighboring cell each step; a crash is co-location at any time up to
/// the horizon. Sensors cover every cell within Manhattan distance N of the
/// agent (2N(N+1) of them).
///
/// Stars: fires are static, so one step of look-ahead is exact for any
/// horizon; the program checks the destination cell against the four adjacent
/// fire sensors.
///
/// Throws Error for horizons outside 1..4.
LookaheadProgram lookahead_program(Domain domain, int horizon);

}  // namespace plshield::envs
