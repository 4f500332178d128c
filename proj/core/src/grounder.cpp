#include "plshield/logic/grounder.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "plshield/common.hpp"

namespace plshield::logic {

std::optional<uint32_t> GroundProgram::atom_id(const std::string& name) const {
  for (uint32_t i = 0; i < atom_names.size(); ++i)
    if (atom_names[i] == name) return i;
  return std::nullopt;
}

std::optional<uint32_t> GroundProgram::fact_index(uint32_t atom) const {
  for (uint32_t i = 0; i < facts.size(); ++i)
    if (facts[i].atom == atom) return i;
  return std::nullopt;
}

std::string GroundProgram::dump() const {
  std::string out;
  char buf[64];
  for (uint32_t i = 0; i < atom_names.size(); ++i)
    out += "atom " + std::to_string(i) + " " + atom_names[i] + "\n";
  for (const auto& f : facts) {
    std::snprintf(buf, sizeof buf, "%.17g", f.prob);
    out += "fact " + std::to_string(f.atom) + " " + buf + "\n";
  }
  for (const auto& ad : ads) {
    out += "ad";
    for (size_t i = 0; i < ad.heads.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", ad.probs[i]);
      out += " " + std::to_string(ad.heads[i]) + ":" + buf;
    }
    out += "\n";
  }
  for (const auto& r : rules) {
    out += "rule " + std::to_string(r.head) + " <-";
    for (int32_t lit : r.body) out += " " + std::to_string(lit);
    if (r.ad >= 0)
      out += " choice " + std::to_string(r.ad) + "=" + std::to_string(r.ad_value);
    out += "\n";
  }
  out += "query " + std::to_string(query) + "\n";
  return out;
}

namespace {

// ---------------------------------------------------------------------------
// Substitutions and matching

struct Bindings {
  std::vector<std::pair<std::string, Term>> items;  // values are Int or Const

  const Term* find(const std::string& v) const {
    for (const auto& [name, t] : items)
      if (name == v) return &t;
    return nullptr;
  }
  void bind(const std::string& v, Term t) { items.emplace_back(v, std::move(t)); }
};

/// Looks a variable up through alias chains (X bound to Y bound to 3).
const Term* resolve_var(const std::string& name, const Bindings& b) {
  const Term* v = b.find(name);
  for (int depth = 0; v && v->kind == Term::Kind::Var; ++depth) {
    if (depth > 64) throw GroundError("variable alias cycle through " + name);
    const Term* next = b.find(v->name);
    if (!next) break;
    v = next;
  }
  return v;
}

/// Substitutes bound variables into a term and folds arithmetic.
Term substitute(const Term& t, const Bindings& b) {
  switch (t.kind) {
    case Term::Kind::Int:
    case Term::Kind::Const:
      return t;
    case Term::Kind::Var: {
      const Term* v = resolve_var(t.name, b);
      return v ? *v : t;
    }
    case Term::Kind::Expr: {
      LinearExpr e;
      e.constant = t.expr.constant;
      for (const auto& [var, coef] : t.expr.vars) {
        const Term* v = resolve_var(var, b);
        if (!v) {
          e.vars.emplace_back(var, coef);
        } else if (v->kind == Term::Kind::Int) {
          e.constant += coef * v->int_value;
        } else if (v->kind == Term::Kind::Var) {
          e.vars.emplace_back(v->name, coef);  // still unbound, canonical name
        } else {
          throw GroundError("arithmetic over non-integer binding for variable " + var);
        }
      }
      return Term::expression(std::move(e));
    }
  }
  return t;
}

Atom substitute(const Atom& a, const Bindings& b) {
  Atom out;
  out.pred = a.pred;
  out.args.reserve(a.args.size());
  for (const auto& t : a.args) out.args.push_back(substitute(t, b));
  return out;
}

/// Unifies a (substituted) pattern term against a ground term, extending `b`.
/// Returns false on mismatch. Expressions that still hold several unbound
/// variables are reported via `deferred`.
bool unify_against_ground(const Term& pattern, const Term& ground, Bindings& b, bool& deferred) {
  const Term p = substitute(pattern, b);
  switch (p.kind) {
    case Term::Kind::Int:
      return ground.kind == Term::Kind::Int && ground.int_value == p.int_value;
    case Term::Kind::Const:
      return ground.kind == Term::Kind::Const && ground.name == p.name;
    case Term::Kind::Var:
      b.bind(p.name, ground);
      return true;
    case Term::Kind::Expr: {
      if (ground.kind != Term::Kind::Int) return false;
      // Solvable directly when one unit-coefficient variable remains.
      if (p.expr.vars.size() == 1 && std::abs(p.expr.vars[0].second) == 1) {
        const auto& [var, coef] = p.expr.vars[0];
        b.bind(var, Term::integer((ground.int_value - p.expr.constant) * coef));
        return true;
      }
      deferred = true;
      return true;
    }
  }
  return false;
}

struct DeferredEq {
  Term pattern;  // expression with unbound variables
  long target;
};

// ---------------------------------------------------------------------------
// Grounding engine

struct SourceRule {
  Atom head;
  std::vector<Literal> body;
  int ad_source = -1;  // index into theory.ads when this is an AD body
  int line = 0;
};

class Grounder {
 public:
  Grounder(const Theory& theory, std::vector<Atom> queries, const GroundOptions& opts)
      : theory_(theory), queries_(std::move(queries)), opts_(opts) {
    domain_ = opts.domain ? opts.domain : theory.int_domain;
  }

  GroundProgram run() {
    check_query_defined();
    register_facts();
    collect_rules();
    fixpoint();
    return extract();
  }

 private:
  // -- atom interning -------------------------------------------------------

  uint32_t intern(const Atom& a) {
    const std::string key = a.str();
    auto it = atom_ids_.find(key);
    if (it != atom_ids_.end()) return it->second;
    const uint32_t id = static_cast<uint32_t>(atoms_.size());
    if (atoms_.size() >= opts_.max_atoms)
      throw GroundError("grounding exceeds atom budget (" + std::to_string(opts_.max_atoms) + ")");
    atom_ids_.emplace(key, id);
    atoms_.push_back(a);
    atom_keys_.push_back(key);
    derivable_.push_back(false);
    return id;
  }

  void mark_derivable(uint32_t id) {
    if (derivable_[id]) return;
    derivable_[id] = true;
    const Atom& a = atoms_[id];
    by_pred_[pred_key(a)].push_back(id);
    changed_ = true;
  }

  static std::string pred_key(const Atom& a) { return a.pred + "/" + std::to_string(a.arity()); }

  // -- domain ---------------------------------------------------------------

  bool in_domain(const Atom& a) const {
    if (!domain_) return true;
    for (const auto& t : a.args)
      if (t.kind == Term::Kind::Int &&
          (t.int_value < domain_->first || t.int_value > domain_->second))
        return false;
    return true;
  }

  // -- setup ----------------------------------------------------------------

  void check_query_defined() {
    std::set<std::string> defined;
    for (const auto& f : theory_.facts) defined.insert(pred_key(f.atom));
    for (const auto& ad : theory_.ads)
      for (const auto& h : ad.heads) defined.insert(pred_key(h.atom));
    for (const auto& c : theory_.clauses) defined.insert(pred_key(c.head));
    for (const auto& q : queries_) {
      if (!q.is_ground()) throw GroundError("query atom '" + q.str() + "' must be ground");
      if (!defined.count(pred_key(q)))
        throw GroundError("query predicate '" + pred_key(q) + "' is undefined");
    }
  }

  void register_facts() {
    for (const auto& f : theory_.facts) {
      if (!in_domain(f.atom)) continue;
      const uint32_t id = intern(f.atom);
      if (fact_of_.count(id)) continue;  // duplicate declaration keeps the first
      fact_of_[id] = static_cast<uint32_t>(fact_list_.size());
      fact_list_.push_back({id, f.prob});
      creation_seq_.push_back({VarRef::Kind::Fact, static_cast<uint32_t>(fact_list_.size() - 1)});
      mark_derivable(id);
    }
  }

  void collect_rules() {
    for (size_t i = 0; i < theory_.ads.size(); ++i) {
      const auto& ad = theory_.ads[i];
      SourceRule r;
      r.ad_source = static_cast<int>(i);
      r.body = ad.body;
      r.line = ad.line;
      rules_.push_back(std::move(r));
    }
    for (const auto& c : theory_.clauses) {
      if (c.body.empty() && !c.head.is_ground()) {
        patterns_.push_back(c);  // matched on demand, never enumerated
        continue;
      }
      SourceRule r;
      r.head = c.head;
      r.body = c.body;
      r.line = c.line;
      rules_.push_back(std::move(r));
    }
  }

  // -- joins ----------------------------------------------------------------

  /// All bindings that satisfy the positive body literals.
  std::vector<Bindings> join(const std::vector<Literal>& body, int line) {
    std::vector<Bindings> acc{Bindings{}};
    // Positive literals, greedily most-bound first.
    std::vector<const Literal*> pos;
    for (const auto& lit : body)
      if (!lit.negated) pos.push_back(&lit);

    std::vector<bool> used(pos.size(), false);
    std::vector<std::string> bound_vars;
    for (size_t step = 0; step < pos.size(); ++step) {
      // Pick the unused literal with the fewest variables not yet bound.
      size_t best = pos.size();
      size_t best_unbound = SIZE_MAX;
      for (size_t i = 0; i < pos.size(); ++i) {
        if (used[i]) continue;
        std::vector<std::string> vars;
        pos[i]->atom.collect_vars(vars);
        size_t unbound = 0;
        for (const auto& v : vars)
          if (std::find(bound_vars.begin(), bound_vars.end(), v) == bound_vars.end()) ++unbound;
        if (unbound < best_unbound) {
          best_unbound = unbound;
          best = i;
        }
      }
      used[best] = true;
      std::vector<std::string> vars;
      pos[best]->atom.collect_vars(vars);
      for (auto& v : vars) bound_vars.push_back(v);

      std::vector<Bindings> next;
      for (const auto& b : acc) extend(pos[best]->atom, b, next, line);
      acc = std::move(next);
      if (acc.empty()) return acc;
    }
    return acc;
  }

  /// Extends `b` with every match of `literal_atom` against derivable atoms
  /// and pattern facts.
  void extend(const Atom& literal_atom, const Bindings& b, std::vector<Bindings>& out, int line) {
    const Atom probe = substitute(literal_atom, b);
    const auto it = by_pred_.find(pred_key(probe));
    if (it != by_pred_.end()) {
      for (const uint32_t cand : it->second) {
        Bindings nb = b;
        if (match_ground(probe, atoms_[cand], nb, line)) out.push_back(std::move(nb));
      }
    }
    for (size_t pi = 0; pi < patterns_.size(); ++pi) {
      const Atom& pat = patterns_[pi].head;
      if (pat.pred != probe.pred || pat.arity() != probe.arity()) continue;
      match_pattern(probe, pat, b, out, line);
    }
  }

  bool match_ground(const Atom& probe, const Atom& ground, Bindings& b, int line) {
    std::vector<DeferredEq> deferred;
    for (size_t i = 0; i < probe.args.size(); ++i) {
      bool defer = false;
      if (!unify_against_ground(probe.args[i], ground.args[i], b, defer)) return false;
      if (defer) deferred.push_back({probe.args[i], ground.args[i].int_value});
    }
    return resolve_deferred(deferred, b, line);
  }

  /// Retries deferred equations as bindings accumulate, enumerating the
  /// integer domain for whatever remains.
  bool resolve_deferred(std::vector<DeferredEq>& deferred, Bindings& b, int line) {
    bool progress = true;
    while (progress && !deferred.empty()) {
      progress = false;
      for (size_t i = 0; i < deferred.size();) {
        const Term t = substitute(deferred[i].pattern, b);
        if (t.kind == Term::Kind::Int) {
          if (t.int_value != deferred[i].target) return false;
          deferred.erase(deferred.begin() + i);
          progress = true;
        } else if (t.kind == Term::Kind::Expr && t.expr.vars.size() == 1 &&
                   std::abs(t.expr.vars[0].second) == 1) {
          const auto& [var, coef] = t.expr.vars[0];
          b.bind(var, Term::integer((deferred[i].target - t.expr.constant) * coef));
          deferred.erase(deferred.begin() + i);
          progress = true;
        } else {
          ++i;
        }
      }
    }
    if (deferred.empty()) return true;
    // Enumerate the remaining variables over the declared domain. Matching
    // produces a single binding set, so the solution must be unique; an
    // ambiguous constraint is outside the supported arithmetic subset.
    if (!domain_)
      throw GroundError("cannot solve arithmetic constraint at line " + std::to_string(line) +
                        " without a #domain declaration");
    std::vector<std::string> vars;
    for (const auto& d : deferred) substitute(d.pattern, b).collect_vars(vars);
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());

    std::optional<Bindings> solution;
    int hits = 0;
    enumerate_solve(vars, 0, deferred, b, solution, hits);
    if (hits == 0) return false;
    if (hits > 1)
      throw GroundError("ambiguous arithmetic constraint at line " + std::to_string(line));
    b = std::move(*solution);
    return true;
  }

  void enumerate_solve(const std::vector<std::string>& vars, size_t k,
                       const std::vector<DeferredEq>& deferred, const Bindings& b,
                       std::optional<Bindings>& solution, int& hits) {
    if (k == vars.size()) {
      for (const auto& d : deferred) {
        const Term t = substitute(d.pattern, b);
        if (t.kind != Term::Kind::Int || t.int_value != d.target) return;
      }
      ++hits;
      if (!solution) solution = b;
      return;
    }
    for (long v = domain_->first; v <= domain_->second && hits <= 1; ++v) {
      Bindings trial = b;
      trial.bind(vars[k], Term::integer(v));
      enumerate_solve(vars, k + 1, deferred, trial, solution, hits);
    }
  }

  /// Matches against a non-ground unit clause (a "pattern fact") such as
  /// move(X, Y, stay, X, Y); pattern variables are renamed apart.
  void match_pattern(const Atom& probe, const Atom& pattern, const Bindings& base,
                     std::vector<Bindings>& out, int line) {
    Atom pat = pattern;
    rename_apart(pat);
    Bindings b = base;
    // Iterate argument pairs until no further progress; both sides may bind.
    std::vector<bool> done(probe.args.size(), false);
    bool progress = true;
    size_t remaining = probe.args.size();
    while (progress && remaining > 0) {
      progress = false;
      for (size_t i = 0; i < probe.args.size(); ++i) {
        if (done[i]) continue;
        const Term p = substitute(probe.args[i], b);
        const Term q = substitute(pat.args[i], b);
        if (q.is_ground()) {
          bool defer = false;
          if (!unify_against_ground(p, q, b, defer)) return;
          if (defer) continue;  // retry next round
          done[i] = true;
          --remaining;
          progress = true;
        } else if (p.is_ground()) {
          bool defer = false;
          if (!unify_against_ground(q, p, b, defer)) return;
          if (defer) continue;
          done[i] = true;
          --remaining;
          progress = true;
        } else if (p.kind == Term::Kind::Var && q.kind == Term::Kind::Var) {
          // Alias the two variables by binding the pattern's to the probe's.
          b.bind(q.name, p);
          done[i] = true;
          --remaining;
          progress = true;
        }
      }
    }
    if (remaining > 0) {
      // Residual non-ground pairs: enumerate probe-side variables over the
      // domain and re-check.
      if (!domain_)
        throw GroundError("cannot match pattern '" + pattern.str() + "' at line " +
                          std::to_string(line) + " without a #domain declaration");
      std::vector<std::string> vars;
      for (size_t i = 0; i < probe.args.size(); ++i) {
        if (done[i]) continue;
        substitute(probe.args[i], b).collect_vars(vars);
        substitute(pat.args[i], b).collect_vars(vars);
      }
      std::sort(vars.begin(), vars.end());
      vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
      enumerate_pattern(probe, pat, b, vars, 0, out);
      return;
    }
    out.push_back(std::move(b));
  }

  void enumerate_pattern(const Atom& probe, const Atom& pat, const Bindings& b,
                         const std::vector<std::string>& vars, size_t k,
                         std::vector<Bindings>& out) {
    if (k == vars.size()) {
      Bindings check = b;
      for (size_t i = 0; i < probe.args.size(); ++i) {
        const Term p = substitute(probe.args[i], check);
        const Term q = substitute(pat.args[i], check);
        if (!(p.is_ground() && q.is_ground() && p == q)) return;
      }
      out.push_back(check);
      return;
    }
    for (long v = domain_->first; v <= domain_->second; ++v) {
      Bindings trial = b;
      trial.bind(vars[k], Term::integer(v));
      enumerate_pattern(probe, pat, trial, vars, k + 1, out);
    }
  }

  void rename_apart(Atom& a) {
    const std::string suffix = "@" + std::to_string(rename_counter_++);
    for (auto& t : a.args) {
      if (t.kind == Term::Kind::Var) {
        t.name += suffix;
      } else if (t.kind == Term::Kind::Expr) {
        for (auto& [v, c] : t.expr.vars) v += suffix;
      }
    }
  }

  // -- fixpoint -------------------------------------------------------------

  void fixpoint() {
    do {
      changed_ = false;
      for (auto& rule : rules_) instantiate_rule(rule);
    } while (changed_);
  }

  void instantiate_rule(const SourceRule& rule) {
    std::vector<Bindings> matches = join(rule.body, rule.line);
    for (auto& b : matches) {
      if (rule.ad_source >= 0)
        emit_ad_instance(rule, b);
      else
        emit_clause_instance(rule, b);
    }
  }

  /// Grounds remaining head/negative-literal variables over the int domain.
  void for_each_completion(const std::vector<Atom>& head_atoms, const std::vector<Literal>& body,
                           Bindings& b, int line, auto&& emit) {
    std::vector<std::string> vars;
    for (const auto& head : head_atoms) substitute(head, b).collect_vars(vars);
    for (const auto& lit : body)
      if (lit.negated) substitute(lit.atom, b).collect_vars(vars);
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    if (vars.empty()) {
      emit(b);
      return;
    }
    if (!domain_)
      throw GroundError("unbound variable " + vars.front() + " at line " + std::to_string(line) +
                        " requires a #domain declaration");
    complete_rec(vars, 0, b, emit);
  }

  void complete_rec(const std::vector<std::string>& vars, size_t k, Bindings& b, auto&& emit) {
    if (k == vars.size()) {
      emit(b);
      return;
    }
    for (long v = domain_->first; v <= domain_->second; ++v) {
      Bindings trial = b;
      trial.bind(vars[k], Term::integer(v));
      complete_rec(vars, k + 1, trial, emit);
    }
  }

  /// Folds body literals under `b` into the encoded form. Returns false when
  /// the instance is vacuous (a positive literal is out of domain) and strips
  /// negative literals on out-of-domain atoms (those are simply false).
  bool encode_body(const std::vector<Literal>& body, const Bindings& b,
                   std::vector<int32_t>& out) {
    for (const auto& lit : body) {
      const Atom ga = substitute(lit.atom, b);
      if (!ga.is_ground())
        throw GroundError("literal '" + lit.atom.str() + "' not ground after substitution");
      if (!in_domain(ga)) {
        if (lit.negated) continue;  // negated out-of-domain literal holds trivially
        return false;
      }
      const uint32_t id = intern(ga);
      materialize_pattern_instance(ga, id);
      out.push_back(lit.negated ? -static_cast<int32_t>(id + 1) : static_cast<int32_t>(id + 1));
    }
    return true;
  }

  /// A ground atom covered by a non-ground unit clause is unconditionally
  /// true; back it with an empty-body rule so the ground program is
  /// self-contained for both polarities.
  void materialize_pattern_instance(const Atom& ga, uint32_t id) {
    for (const auto& pat : patterns_) {
      if (pat.head.pred != ga.pred || pat.head.arity() != ga.arity()) continue;
      Atom renamed = pat.head;
      rename_apart(renamed);
      Bindings b;
      if (match_ground(renamed, ga, b, pat.line)) {
        add_rule(id, {}, -1, -1);
        return;
      }
    }
  }

  void emit_clause_instance(const SourceRule& rule, Bindings& b) {
    for_each_completion({rule.head}, rule.body, b, rule.line, [&](const Bindings& full) {
      const Atom head = substitute(rule.head, full);
      if (!head.is_ground() || !in_domain(head)) return;
      std::vector<int32_t> body;
      if (!encode_body(rule.body, full, body)) return;
      add_rule(intern(head), std::move(body), -1, -1);
    });
  }

  void emit_ad_instance(const SourceRule& rule, Bindings& b) {
    const auto& ad = theory_.ads[rule.ad_source];
    std::vector<Atom> head_atoms;
    for (const auto& h : ad.heads) head_atoms.push_back(h.atom);
    for_each_completion(head_atoms, rule.body, b, rule.line, [&](const Bindings& full) {
      std::vector<int32_t> body;
      if (!encode_body(rule.body, full, body)) return;
      // One choice instance per distinct ground body.
      std::vector<uint32_t> head_ids;
      std::vector<double> probs;
      for (const auto& h : ad.heads) {
        const Atom ha = substitute(h.atom, full);
        if (!ha.is_ground())
          throw GroundError("head '" + h.atom.str() + "' not ground after substitution");
        if (!in_domain(ha)) return;  // whole instance dropped
        head_ids.push_back(intern(ha));
        probs.push_back(h.prob);
      }
      std::string key = std::to_string(rule.ad_source) + "|";
      for (int32_t lit : body) key += std::to_string(lit) + ",";
      for (uint32_t h : head_ids) key += "#" + std::to_string(h);
      auto [it, inserted] = ad_seen_.emplace(std::move(key), static_cast<uint32_t>(ad_list_.size()));
      if (inserted) {
        ad_list_.push_back({head_ids, probs});
        creation_seq_.push_back({VarRef::Kind::AdChoice, static_cast<uint32_t>(ad_list_.size() - 1)});
        for (size_t i = 0; i < head_ids.size(); ++i) {
          add_rule(head_ids[i], std::vector<int32_t>(body), static_cast<int32_t>(ad_list_.size() - 1),
                   static_cast<int32_t>(i));
        }
      }
    });
  }

  void add_rule(uint32_t head, std::vector<int32_t> body, int32_t ad, int32_t ad_value) {
    std::string key = std::to_string(head) + "<-";
    for (int32_t lit : body) key += std::to_string(lit) + ",";
    if (ad >= 0) key += "@" + std::to_string(ad) + "=" + std::to_string(ad_value);
    if (!rule_seen_.insert(std::move(key)).second) return;
    if (fact_of_.count(head))
      throw GroundError("probabilistic fact '" + atom_keys_[head] + "' is also derived by a clause");
    if (rule_list_.size() >= opts_.max_rules)
      throw GroundError("grounding exceeds rule budget (" + std::to_string(opts_.max_rules) + ")");
    rule_list_.push_back({head, std::move(body), ad, ad_value});
    mark_derivable(head);
  }

  // -- extraction -----------------------------------------------------------

  GroundProgram extract() {
    // Backward relevance from the query atoms over rules and AD instances.
    std::vector<uint32_t> query_ids;
    for (const auto& q : queries_) {
      auto it = atom_ids_.find(q.str());
      if (it == atom_ids_.end()) query_ids.push_back(intern(q));
      else query_ids.push_back(it->second);
    }

    std::vector<std::vector<uint32_t>> rules_by_head(atoms_.size());
    for (uint32_t r = 0; r < rule_list_.size(); ++r)
      rules_by_head[rule_list_[r].head].push_back(r);

    std::vector<bool> atom_keep(atoms_.size(), false);
    std::vector<bool> rule_keep(rule_list_.size(), false);
    std::vector<bool> ad_keep(ad_list_.size(), false);
    std::vector<uint32_t> stack = query_ids;
    for (uint32_t id : query_ids) atom_keep[id] = true;
    auto push = [&](uint32_t id) {
      if (!atom_keep[id]) {
        atom_keep[id] = true;
        stack.push_back(id);
      }
    };
    while (!stack.empty()) {
      const uint32_t id = stack.back();
      stack.pop_back();
      for (uint32_t r : rules_by_head[id]) {
        if (rule_keep[r]) continue;
        rule_keep[r] = true;
        const auto& rule = rule_list_[r];
        if (rule.ad >= 0 && !ad_keep[rule.ad]) {
          // Keep the whole choice instance so every head stays queryable.
          ad_keep[rule.ad] = true;
          for (uint32_t h : ad_list_[rule.ad].heads) push(h);
        }
        for (int32_t lit : rule.body)
          push(static_cast<uint32_t>(std::abs(lit)) - 1);
      }
    }

    // Renumber, preserving creation order.
    GroundProgram gp;
    std::vector<uint32_t> atom_map(atoms_.size(), UINT32_MAX);
    for (uint32_t i = 0; i < atoms_.size(); ++i) {
      if (!atom_keep[i]) continue;
      atom_map[i] = static_cast<uint32_t>(gp.atom_names.size());
      gp.atom_names.push_back(atom_keys_[i]);
    }
    std::vector<uint32_t> fact_map(fact_list_.size(), UINT32_MAX);
    std::vector<uint32_t> ad_map(ad_list_.size(), UINT32_MAX);
    for (const VarRef& vr : creation_seq_) {
      if (vr.kind == VarRef::Kind::Fact) {
        const auto& f = fact_list_[vr.index];
        if (!atom_keep[f.atom]) continue;
        fact_map[vr.index] = static_cast<uint32_t>(gp.facts.size());
        gp.facts.push_back({atom_map[f.atom], f.prob});
        gp.var_order.push_back({VarRef::Kind::Fact, fact_map[vr.index]});
      } else {
        if (!ad_keep[vr.index]) continue;
        const auto& ad = ad_list_[vr.index];
        GroundProgram::AdInstance out;
        out.probs = ad.probs;
        for (uint32_t h : ad.heads) out.heads.push_back(atom_map[h]);
        ad_map[vr.index] = static_cast<uint32_t>(gp.ads.size());
        gp.ads.push_back(std::move(out));
        gp.var_order.push_back({VarRef::Kind::AdChoice, ad_map[vr.index]});
      }
    }
    for (uint32_t r = 0; r < rule_list_.size(); ++r) {
      if (!rule_keep[r]) continue;
      const auto& rule = rule_list_[r];
      GroundProgram::Rule out;
      out.head = atom_map[rule.head];
      for (int32_t lit : rule.body) {
        const uint32_t b = static_cast<uint32_t>(std::abs(lit)) - 1;
        out.body.push_back(lit > 0 ? static_cast<int32_t>(atom_map[b] + 1)
                                   : -static_cast<int32_t>(atom_map[b] + 1));
      }
      if (rule.ad >= 0) {
        out.ad = static_cast<int32_t>(ad_map[rule.ad]);
        out.ad_value = rule.ad_value;
      }
      gp.rules.push_back(std::move(out));
    }
    gp.query = atom_map[query_ids[0]];
    for (size_t i = 1; i < query_ids.size(); ++i) gp.extra_queries.push_back(atom_map[query_ids[i]]);

    check_acyclic(gp);
    return gp;
  }

  /// The language restricts recursion to decreasing integer arguments, so the
  /// ground dependency graph must be a DAG (through negation too).
  static void check_acyclic(const GroundProgram& gp) {
    const size_t n = gp.atom_names.size();
    std::vector<std::vector<uint32_t>> deps(n);
    for (const auto& r : gp.rules)
      for (int32_t lit : r.body)
        deps[r.head].push_back(static_cast<uint32_t>(std::abs(lit)) - 1);
    std::vector<int> state(n, 0);  // 0 new, 1 open, 2 done
    std::vector<std::pair<uint32_t, size_t>> stack;
    for (uint32_t s = 0; s < n; ++s) {
      if (state[s]) continue;
      stack.push_back({s, 0});
      state[s] = 1;
      while (!stack.empty()) {
        auto& [v, i] = stack.back();
        if (i < deps[v].size()) {
          const uint32_t w = deps[v][i++];
          if (state[w] == 1)
            throw GroundError("cyclic ground dependency through atom '" + gp.atom_names[w] + "'");
          if (state[w] == 0) {
            state[w] = 1;
            stack.push_back({w, 0});
          }
        } else {
          state[v] = 2;
          stack.pop_back();
        }
      }
    }
  }

  const Theory& theory_;
  std::vector<Atom> queries_;
  GroundOptions opts_;
  std::optional<std::pair<long, long>> domain_;

  std::vector<Atom> atoms_;
  std::vector<std::string> atom_keys_;
  std::vector<bool> derivable_;
  std::unordered_map<std::string, uint32_t> atom_ids_;
  std::unordered_map<std::string, std::vector<uint32_t>> by_pred_;

  std::vector<Clause> patterns_;
  std::vector<SourceRule> rules_;

  std::vector<GroundProgram::Fact> fact_list_;
  std::unordered_map<uint32_t, uint32_t> fact_of_;
  std::vector<GroundProgram::AdInstance> ad_list_;
  std::unordered_map<std::string, uint32_t> ad_seen_;
  std::vector<GroundProgram::Rule> rule_list_;
  std::unordered_set<std::string> rule_seen_;
  std::vector<VarRef> creation_seq_;

  bool changed_ = false;
  uint64_t rename_counter_ = 0;
};

}  // namespace

GroundProgram ground(const Theory& theory, const Atom& query, const GroundOptions& opts) {
  return Grounder(theory, {query}, opts).run();
}

GroundProgram ground_multi(const Theory& theory, const std::vector<Atom>& queries,
                           const GroundOptions& opts) {
  if (queries.empty()) throw GroundError("at least one query atom is required");
  return Grounder(theory, queries, opts).run();
}

}  // namespace plshield::logic
