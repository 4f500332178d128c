#include "plshield/envs/lookahead.hpp"

#include "plshield/common.hpp"

namespace plshield::envs {

using logic::Atom;
using logic::Clause;
using logic::Literal;
using logic::Term;
using logic::Theory;

namespace {

Atom atom(std::string pred, std::vector<Term> args = {}) {
  return Atom{std::move(pred), std::move(args)};
}

Term var(const char* name) { return Term::variable(name); }
Term num(long v) { return Term::integer(v); }

Term shifted(const char* name, long delta) {
  logic::LinearExpr e;
  e.vars.emplace_back(name, 1);
  e.constant = delta;
  return Term::expression(std::move(e));
}

const char* kActionNames[] = {"stay", "up", "down", "left", "right"};

std::vector<Atom> action_atoms() {
  std::vector<Atom> out;
  for (const char* n : kActionNames) out.push_back(atom("act", {Term::constant(n)}));
  return out;
}

LookaheadProgram stars_program() {
  LookaheadProgram p;
  p.actions = action_atoms();
  Theory& t = p.theory;
  for (Cell off : sensor_offsets(1)) {
    Atom s = atom("fire", {num(off.first), num(off.second)});
    p.sensors.push_back(s);
    t.facts.push_back({0.5, std::move(s), 0});
  }
  for (int a = 0; a < kNumActions; ++a) {
    const Cell off = action_offset(a);
    t.clauses.push_back(
        {atom("xagent", {Term::constant(kActionNames[a]), num(off.first), num(off.second)}), {}, 0});
  }
  Clause crash;
  crash.head = atom("crash");
  crash.body.push_back({false, atom("act", {var("A")})});
  crash.body.push_back({false, atom("xagent", {var("A"), var("X"), var("Y")})});
  crash.body.push_back({false, atom("fire", {var("X"), var("Y")})});
  t.clauses.push_back(std::move(crash));
  t.clauses.push_back({atom("safe"), {{true, atom("crash")}}, 0});
  return p;
}

LookaheadProgram pacman_program(int horizon) {
  LookaheadProgram p;
  p.actions = action_atoms();
  Theory& t = p.theory;
  t.int_domain = {{-2L * horizon, 2L * horizon}};

  for (Cell off : sensor_offsets(horizon)) {
    Atom s = atom("fire", {num(0), num(off.first), num(off.second)});
    p.sensors.push_back(s);
    t.facts.push_back({0.5, std::move(s), 0});
  }

  // Fires can move to any neighboring cell (or stay) each step.
  Clause spread;
  spread.head = atom("fire", {var("T"), var("X"), var("Y")});
  spread.body.push_back({false, atom("fire", {shifted("T", -1), var("PX"), var("PY")})});
  spread.body.push_back({false, atom("move", {var("PX"), var("PY"), var("A"), var("X"), var("Y")})});
  t.clauses.push_back(std::move(spread));

  // The agent follows its action once, then stays.
  Clause first;
  first.head = atom("agent", {num(1), var("X"), var("Y")});
  first.body.push_back({false, atom("act", {var("A")})});
  first.body.push_back({false, atom("move", {num(0), num(0), var("A"), var("X"), var("Y")})});
  t.clauses.push_back(std::move(first));
  for (int k = 2; k <= horizon; ++k) {
    Clause stay;
    stay.head = atom("agent", {num(k), var("X"), var("Y")});
    stay.body.push_back({false, atom("agent", {num(k - 1), var("X"), var("Y")})});
    t.clauses.push_back(std::move(stay));
  }

  t.clauses.push_back({atom("move", {var("X"), var("Y"), Term::constant("stay"), var("X"), var("Y")}), {}, 0});
  t.clauses.push_back(
      {atom("move", {var("X"), var("Y"), Term::constant("left"), shifted("X", -1), var("Y")}), {}, 0});
  t.clauses.push_back(
      {atom("move", {var("X"), var("Y"), Term::constant("right"), shifted("X", 1), var("Y")}), {}, 0});
  t.clauses.push_back(
      {atom("move", {var("X"), var("Y"), Term::constant("up"), var("X"), shifted("Y", 1)}), {}, 0});
  t.clauses.push_back(
      {atom("move", {var("X"), var("Y"), Term::constant("down"), var("X"), shifted("Y", -1)}), {}, 0});

  Clause crash;
  crash.head = atom("crash");
  crash.body.push_back({false, atom("fire", {var("T"), var("X"), var("Y")})});
  crash.body.push_back({false, atom("agent", {var("T"), var("X"), var("Y")})});
  t.clauses.push_back(std::move(crash));
  t.clauses.push_back({atom("safe"), {{true, atom("crash")}}, 0});
  return p;
}

}  // namespace

LookaheadProgram lookahead_program(Domain domain, int horizon) {
  if (horizon < 1 || horizon > 4)
    throw Error("look-ahead horizon must lie in 1..4, got " + std::to_string(horizon));
  return domain == Domain::Stars ? stars_program() : pacman_program(horizon);
}

}  // namespace plshield::envs
