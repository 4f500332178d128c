#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "plshield/logic/grounder.hpp"

namespace plshield::wmc {

/// One decision variable of the compiled model.
struct CircuitVar {
  enum class Kind : uint8_t { Fact, AdChoice };
  Kind kind;
  uint32_t source;  // index into GroundProgram::facts or ::ads
  uint32_t arity;   // 2 for facts, heads+1 (residual) for choices
};

/// Shared between every circuit compiled from one ground program.
struct VarTable {
  std::vector<CircuitVar> vars;
  size_t n_facts = 0;
  std::vector<uint32_t> ad_head_counts;  // per AD instance

  static std::shared_ptr<const VarTable> from(const logic::GroundProgram& gp);
};

/// Probabilities for every fact and AD instance, indexed like the ground
/// program. AD vectors hold the head probabilities; the residual mass is
/// implicit.
struct Valuation {
  std::vector<double> fact_probs;
  std::vector<std::vector<double>> ad_probs;

  static Valuation defaults(const logic::GroundProgram& gp);
};

/// Partial derivatives of a circuit value, shaped like a Valuation.
struct GradientVector {
  std::vector<double> fact_grads;
  std::vector<std::vector<double>> ad_grads;
};

struct CompileOptions {
  size_t max_nodes = 4000000;
};

/// Smooth, decomposable arithmetic circuit over fact and AD-choice variables.
/// Immutable after compilation; evaluation and gradients allocate per-call
/// scratch and are safe to run concurrently.
class Circuit {
 public:
  enum class NodeKind : uint8_t { Constant, Literal, Sum, Product };

  struct Node {
    NodeKind kind;
    uint8_t const_value = 0;  // Constant
    uint32_t var = 0;         // Literal: var-table index
    uint32_t value = 0;       // Literal: 0/1 for facts, head index or residual for ADs
    std::vector<uint32_t> children;
  };

  /// Weighted model count of the query at `v`; exact up to float rounding.
  double evaluate(const Valuation& v) const;

  /// Exact partial derivatives of evaluate at `v`, one backward pass.
  GradientVector gradient(const Valuation& v) const;

  size_t size() const { return nodes_.size(); }
  uint32_t root() const { return root_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::shared_ptr<const VarTable>& var_table() const { return vars_; }

  /// Line-oriented dump: `id KIND ...` per node, `root <id>` last.
  std::string dump() const;

 private:
  friend class CircuitBuilder;
  std::vector<Node> nodes_;
  uint32_t root_ = 0;
  std::shared_ptr<const VarTable> vars_;

  void check_shape(const Valuation& v) const;
  void forward(const Valuation& v, std::vector<double>& values) const;
  double literal_weight(const Node& n, const Valuation& v) const;
};

/// Compiles the program's query atom into a circuit computing its success
/// probability for every valuation. Throws CompileError past the node budget.
Circuit compile(const logic::GroundProgram& gp, const CompileOptions& opts = {});

/// Compiles an arbitrary atom of `gp` over a shared variable table.
Circuit compile_atom(const logic::GroundProgram& gp, uint32_t atom,
                     std::shared_ptr<const VarTable> vars, const CompileOptions& opts = {});

/// P(joint)/P(evidence); both circuits must share one variable table.
/// Throws EvidenceError when the evidence has zero probability.
double conditional(const Circuit& joint, const Circuit& evidence, const Valuation& v);

/// Structural checks (every sum's children mention the same variables;
/// every product's children mention disjoint variables).
bool is_smooth(const Circuit& c);
bool is_decomposable(const Circuit& c);

}  // namespace plshield::wmc
