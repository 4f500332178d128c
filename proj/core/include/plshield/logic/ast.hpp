#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace plshield::logic {

/// Linear integer expression: constant + sum of (+/-1)-coefficient variables.
/// This is the only arithmetic the language admits in atom arguments.
struct LinearExpr {
  long constant = 0;
  std::vector<std::pair<std::string, int>> vars;  // (name, coefficient), coefficient in {-1, +1, ...}

  bool operator==(const LinearExpr&) const = default;
};

struct Term {
  enum class Kind { Int, Const, Var, Expr };

  Kind kind = Kind::Int;
  long int_value = 0;    // Kind::Int
  std::string name;      // Kind::Const / Kind::Var
  LinearExpr expr;       // Kind::Expr

  static Term integer(long v);
  static Term constant(std::string name);
  static Term variable(std::string name);
  /// Builds an expression term, collapsing to Int or Var when possible.
  static Term expression(LinearExpr e);

  bool is_ground() const { return kind == Kind::Int || kind == Kind::Const; }
  void collect_vars(std::vector<std::string>& out) const;
  std::string str() const;

  bool operator==(const Term&) const = default;
};

struct Atom {
  std::string pred;
  std::vector<Term> args;

  size_t arity() const { return args.size(); }
  bool is_ground() const;
  void collect_vars(std::vector<std::string>& out) const;
  /// Canonical text form; doubles as the identity key for ground atoms.
  std::string str() const;

  bool operator==(const Atom&) const = default;
};

struct Literal {
  bool negated = false;
  Atom atom;

  std::string str() const;
  bool operator==(const Literal&) const = default;
};

struct ProbFact {
  double prob = 0.0;
  Atom atom;
  int line = 0;

  bool operator==(const ProbFact& o) const { return prob == o.prob && atom == o.atom; }
};

struct ADHead {
  double prob = 0.0;
  Atom atom;

  bool operator==(const ADHead&) const = default;
};

/// Multi-headed probabilistic clause: exactly one head holds when the body
/// does, chosen by the head distribution. A single head with a body is the
/// probabilistic-clause special case.
struct AnnotatedDisjunction {
  std::vector<ADHead> heads;
  std::vector<Literal> body;
  int line = 0;

  bool operator==(const AnnotatedDisjunction& o) const {
    return heads == o.heads && body == o.body;
  }
};

struct Clause {
  Atom head;
  std::vector<Literal> body;
  int line = 0;

  bool operator==(const Clause& o) const { return head == o.head && body == o.body; }
};

struct Theory {
  std::vector<ProbFact> facts;
  std::vector<AnnotatedDisjunction> ads;
  std::vector<Clause> clauses;

  /// Declared domain for integer-valued variables: every ground integer
  /// argument must lie inside [lo, hi]; instances outside are dropped.
  std::optional<std::pair<long, long>> int_domain;

  /// Shield-file directives; empty for plain programs.
  std::vector<Atom> actions;
  std::vector<Atom> sensors;

  bool operator==(const Theory& o) const {
    return facts == o.facts && ads == o.ads && clauses == o.clauses &&
           int_domain == o.int_domain && actions == o.actions && sensors == o.sensors;
  }
};

/// Canonical re-serialization; parse(serialize(parse(s))) == parse(s).
std::string serialize(const Theory& theory);

}  // namespace plshield::logic
