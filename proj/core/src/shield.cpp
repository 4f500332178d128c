#include "plshield/shield/shield.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "plshield/common.hpp"
#include "plshield/logic/parser.hpp"

namespace plshield::shield {

using logic::Atom;
using logic::GroundProgram;
using logic::Theory;

bool renormalize_policy(const std::vector<double>& weights, const std::vector<double>& pi,
                        std::vector<double>& out, double* mass) {
  double denom = 0.0;
  for (size_t i = 0; i < pi.size(); ++i) denom += weights[i] * pi[i];
  if (mass) *mass = denom;
  if (denom < CompiledShield::kSafetyFloor) {
    out = pi;
    return false;
  }
  out.resize(pi.size());
  for (size_t i = 0; i < pi.size(); ++i) out[i] = weights[i] * pi[i] / denom;
  return true;
}

namespace {

bool unifiable_terms(const logic::Term& a, const logic::Term& b) {
  using K = logic::Term::Kind;
  if (a.kind == K::Var || b.kind == K::Var || a.kind == K::Expr || b.kind == K::Expr) return true;
  return a == b;
}

bool unifiable_atoms(const Atom& a, const Atom& b) {
  if (a.pred != b.pred || a.arity() != b.arity()) return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!unifiable_terms(a.args[i], b.args[i])) return false;
  return true;
}

Atom safe_atom() { return Atom{"safe", {}}; }

Atom joint_atom(size_t i) {
  return Atom{"__safe_and_act_" + std::to_string(i), {}};
}

}  // namespace

Theory complete_directives(const Theory& t) {
  if (t.actions.empty() && t.sensors.empty()) return t;
  for (const auto& a : t.actions) {
    for (const auto& c : t.clauses)
      if (unifiable_atoms(a, c.head))
        throw ConfigError("action atom '" + a.str() + "' is defined by the shield program");
    for (const auto& ad : t.ads)
      for (const auto& h : ad.heads)
        if (unifiable_atoms(a, h.atom))
          throw ConfigError("action atom '" + a.str() + "' is defined by the shield program");
  }
  Theory out = t;
  if (!t.actions.empty()) {
    const double uniform = 1.0 / static_cast<double>(t.actions.size());
    logic::AnnotatedDisjunction pi_ad;
    for (const auto& a : t.actions) pi_ad.heads.push_back({uniform, a});
    out.ads.push_back(std::move(pi_ad));
  }
  for (const auto& sensor : t.sensors) {
    bool declared = false;
    for (const auto& f : t.facts) declared |= f.atom == sensor;
    if (!declared) out.facts.push_back({0.5, sensor, 0});
  }
  out.actions.clear();
  out.sensors.clear();
  return out;
}

CompiledShield CompiledShield::build(const Theory& bk, std::vector<Atom> actions,
                                     std::vector<Atom> sensors, const logic::GroundOptions& gopts,
                                     const wmc::CompileOptions& copts) {
  if (actions.empty()) throw ConfigError("shield needs at least one action");
  CompiledShield s;
  s.actions_ = std::move(actions);
  s.sensors_ = std::move(sensors);

  bool safe_defined = false;
  for (const auto& c : bk.clauses) safe_defined |= c.head == safe_atom();
  for (const auto& ad : bk.ads)
    for (const auto& h : ad.heads) safe_defined |= h.atom == safe_atom();
  for (const auto& f : bk.facts) safe_defined |= f.atom == safe_atom();
  if (!safe_defined) throw ConfigError("shield program does not define predicate safe");

  for (const auto& a : s.actions_) {
    bool used = false;
    for (const auto& c : bk.clauses)
      for (const auto& lit : c.body) used |= unifiable_atoms(a, lit.atom);
    for (const auto& ad : bk.ads)
      for (const auto& lit : ad.body) used |= unifiable_atoms(a, lit.atom);
    if (!used)
      s.warnings_.push_back("action '" + a.str() +
                            "' does not occur in the safety program; it is unconditionally safe");
  }

  Theory directives = bk;
  directives.actions = s.actions_;
  directives.sensors = s.sensors_;
  Theory theory = complete_directives(directives);

  const size_t m = s.actions_.size();
  s.uniform_pi_.assign(m, 1.0 / static_cast<double>(m));

  std::vector<Atom> queries{safe_atom()};
  for (size_t i = 0; i < m; ++i) {
    logic::Clause c;
    c.head = joint_atom(i);
    c.body.push_back({false, safe_atom()});
    c.body.push_back({false, s.actions_[i]});
    theory.clauses.push_back(std::move(c));
    queries.push_back(joint_atom(i));
  }
  for (const auto& a : s.actions_) queries.push_back(a);

  s.gp_ = logic::ground_multi(theory, queries, gopts);
  s.vars_ = wmc::VarTable::from(s.gp_);

  const auto atom_id = [&](const Atom& a) {
    auto id = s.gp_.atom_id(a.str());
    if (!id) throw CompileError("shield query atom '" + a.str() + "' missing from ground program");
    return *id;
  };
  s.safe_ = wmc::compile_atom(s.gp_, atom_id(safe_atom()), s.vars_, copts);
  for (size_t i = 0; i < m; ++i) {
    s.joint_.push_back(wmc::compile_atom(s.gp_, atom_id(joint_atom(i)), s.vars_, copts));
    s.marginal_.push_back(wmc::compile_atom(s.gp_, atom_id(s.actions_[i]), s.vars_, copts));
  }

  // Locate the policy choice instance: the AD whose heads are the actions.
  std::vector<uint32_t> act_ids;
  for (const auto& a : s.actions_) act_ids.push_back(atom_id(a));
  for (size_t j = 0; j < s.gp_.ads.size(); ++j) {
    if (s.gp_.ads[j].heads == act_ids) {
      s.pi_ad_ = static_cast<int>(j);
      break;
    }
  }
  if (s.pi_ad_ < 0) throw CompileError("policy choice instance missing from ground program");

  for (const auto& sensor : s.sensors_) {
    const auto id = s.gp_.atom_id(sensor.str());
    int slot = -1;
    if (id) {
      if (auto f = s.gp_.fact_index(*id)) slot = static_cast<int>(*f);
    }
    if (slot < 0)
      s.warnings_.push_back("sensor '" + sensor.str() + "' is irrelevant to the safety query");
    s.sensor_slot_.push_back(slot);
  }
  return s;
}

CompiledShield CompiledShield::from_text(std::string_view program_text) {
  Theory t = logic::parse(program_text);
  if (t.actions.empty()) throw ConfigError("shield program lacks an #actions directive");
  return build(t, t.actions, t.sensors);
}

CompiledShield CompiledShield::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open shield program '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

wmc::Valuation CompiledShield::valuation(const SensorReading& h,
                                         const std::vector<double>& pi) const {
  wmc::Valuation v = wmc::Valuation::defaults(gp_);
  for (size_t k = 0; k < sensor_slot_.size(); ++k)
    if (sensor_slot_[k] >= 0) v.fact_probs[sensor_slot_[k]] = h.values[k];
  v.ad_probs[pi_ad_] = pi;
  return v;
}

std::vector<double> CompiledShield::action_safeties(const SensorReading& h) const {
  if (h.values.size() != sensors_.size())
    throw ShapeError("sensor reading has " + std::to_string(h.values.size()) + " values, shield expects " +
                     std::to_string(sensors_.size()));
  // Conditioning on act(a_i) makes the quotient independent of the policy
  // weights, so a fixed uniform valuation avoids 0/0 when pi(a) = 0.
  const wmc::Valuation v = valuation(h, uniform_pi_);
  std::vector<double> safety(actions_.size());
  for (size_t i = 0; i < actions_.size(); ++i) {
    const double sa = wmc::conditional(joint_[i], marginal_[i], v);
    safety[i] = std::clamp(sa, 0.0, 1.0);
  }
  return safety;
}

ShieldDecision CompiledShield::decide(const PolicyDistribution& pi, const SensorReading& h) const {
  if (pi.probs.size() != actions_.size())
    throw ShapeError("policy has " + std::to_string(pi.probs.size()) + " actions, shield expects " +
                     std::to_string(actions_.size()));
  ShieldDecision d;
  d.action_safety = action_safeties(h);
  double mass = 0.0;
  d.fallback = !renormalize_policy(d.action_safety, pi.probs, d.shielded, &mass);
  d.policy_safety = mass;
  return d;
}

std::pair<ShieldDecision, ShieldGradients> CompiledShield::decide_with_gradients(
    const PolicyDistribution& pi, const SensorReading& h) const {
  ShieldDecision d = decide(pi, h);
  const size_t m = actions_.size();
  ShieldGradients g;
  g.d_policy_safety = d.action_safety;  // policy safety is linear in pi
  g.d_shielded.assign(m, std::vector<double>(m, 0.0));
  if (d.fallback) {
    for (size_t a = 0; a < m; ++a) g.d_shielded[a][a] = 1.0;
    return {std::move(d), std::move(g)};
  }
  const double ps = d.policy_safety;
  for (size_t a = 0; a < m; ++a) {
    const double sa = d.action_safety[a];
    for (size_t b = 0; b < m; ++b) {
      double v = -sa * pi.probs[a] * d.action_safety[b] / (ps * ps);
      if (a == b) v += sa / ps;
      g.d_shielded[a][b] = v;
    }
  }
  return {std::move(d), std::move(g)};
}

RejectionDecision CompiledShield::rejection_decide(const PolicyDistribution& pi,
                                                   const SensorReading& h,
                                                   double threshold) const {
  if (pi.probs.size() != actions_.size())
    throw ShapeError("policy has " + std::to_string(pi.probs.size()) + " actions, shield expects " +
                     std::to_string(actions_.size()));
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ShapeError("discretization threshold must lie in (0,1)");
  SensorReading h01;
  h01.values.reserve(h.values.size());
  for (double x : h.values) h01.values.push_back(x >= threshold ? 1.0 : 0.0);

  const std::vector<double> safety = action_safeties(h01);
  RejectionDecision r;
  std::vector<double> weights(actions_.size());
  for (size_t i = 0; i < actions_.size(); ++i) {
    const bool safe = safety[i] > 1.0 - 1e-9;
    r.safe_mask.push_back(safe ? 1 : 0);
    weights[i] = safe ? 1.0 : 0.0;
  }
  r.fallback = !renormalize_policy(weights, pi.probs, r.renormalized, nullptr);
  return r;
}

double CompiledShield::policy_safety_direct(const PolicyDistribution& pi,
                                            const SensorReading& h) const {
  return safe_.evaluate(valuation(h, pi.probs));
}

}  // namespace plshield::shield
