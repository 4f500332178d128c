#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plshield/logic/ast.hpp"

namespace plshield::logic {

/// A variable of the probabilistic model, in grounding order.
struct VarRef {
  enum class Kind : uint8_t { Fact, AdChoice };
  Kind kind;
  uint32_t index;  // into GroundProgram::facts or GroundProgram::ads

  bool operator==(const VarRef&) const = default;
};

/// Finite, variable-free program restricted to the rules relevant to the
/// query atoms. Atom 0..n-1 index into `atom_names`; body literals encode a
/// positive atom `a` as +(a+1) and a negated one as -(a+1).
struct GroundProgram {
  struct Fact {
    uint32_t atom;
    double prob;
  };
  /// One independent multi-valued choice; value i selects heads[i], the
  /// implicit last value selects none of them (residual mass 1 - sum(probs)).
  struct AdInstance {
    std::vector<uint32_t> heads;
    std::vector<double> probs;
  };
  struct Rule {
    uint32_t head;
    std::vector<int32_t> body;
    int32_t ad = -1;        // AD instance whose choice guards this rule, or -1
    int32_t ad_value = -1;  // required choice value when ad >= 0
  };

  std::vector<std::string> atom_names;
  std::vector<Fact> facts;
  std::vector<AdInstance> ads;
  std::vector<Rule> rules;
  std::vector<VarRef> var_order;
  uint32_t query = 0;
  std::vector<uint32_t> extra_queries;  // additional roots kept relevant

  std::optional<uint32_t> atom_id(const std::string& name) const;
  std::optional<uint32_t> fact_index(uint32_t atom) const;

  /// Deterministic text form; byte-identical across runs for equal input.
  std::string dump() const;
};

struct GroundOptions {
  std::optional<std::pair<long, long>> domain;  // overrides the theory's declaration
  size_t max_atoms = 200000;
  size_t max_rules = 1000000;
};

/// Grounds `theory` with respect to `query`: the result contains exactly the
/// ground rules backward-reachable from the query, with all integer
/// arithmetic folded and instances outside the declared domain dropped.
///
/// Throws GroundError when the query predicate is undefined, a variable
/// cannot be bound and no integer domain was declared, the ground dependency
/// graph is cyclic, or the size budget is exceeded.
GroundProgram ground(const Theory& theory, const Atom& query, const GroundOptions& opts = {});

/// As `ground`, keeping every atom in `queries` relevant; queries[0] becomes
/// the primary query.
GroundProgram ground_multi(const Theory& theory, const std::vector<Atom>& queries,
                           const GroundOptions& opts = {});

}  // namespace plshield::logic
