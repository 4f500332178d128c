#include "plshield/circuit/circuit.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "plshield/common.hpp"

namespace plshield::wmc {

using logic::GroundProgram;
using logic::VarRef;

std::shared_ptr<const VarTable> VarTable::from(const GroundProgram& gp) {
  auto vt = std::make_shared<VarTable>();
  vt->n_facts = gp.facts.size();
  for (const auto& ad : gp.ads) vt->ad_head_counts.push_back(static_cast<uint32_t>(ad.heads.size()));
  for (const auto& vr : gp.var_order) {
    if (vr.kind == VarRef::Kind::Fact) {
      vt->vars.push_back({CircuitVar::Kind::Fact, vr.index, 2});
    } else {
      vt->vars.push_back({CircuitVar::Kind::AdChoice, vr.index,
                          static_cast<uint32_t>(gp.ads[vr.index].heads.size()) + 1});
    }
  }
  return vt;
}

Valuation Valuation::defaults(const GroundProgram& gp) {
  Valuation v;
  for (const auto& f : gp.facts) v.fact_probs.push_back(f.prob);
  for (const auto& ad : gp.ads) v.ad_probs.push_back(ad.probs);
  return v;
}

// ---------------------------------------------------------------------------
// Multi-valued decision diagrams with a fixed variable order.

namespace {

struct VecHash {
  size_t operator()(const std::vector<uint32_t>& v) const {
    size_t h = 0x9e3779b97f4a7c15ULL;
    for (uint32_t x : v) h = (h ^ x) * 0x100000001b3ULL;
    return h;
  }
};

class Mdd {
 public:
  static constexpr uint32_t kFalse = 0;
  static constexpr uint32_t kTrue = 1;

  Mdd(std::vector<uint32_t> arities, size_t max_nodes)
      : arities_(std::move(arities)), max_nodes_(max_nodes) {
    nodes_.push_back({terminal_level(), {}});  // false
    nodes_.push_back({terminal_level(), {}});  // true
  }

  uint32_t terminal_level() const { return static_cast<uint32_t>(arities_.size()); }
  uint32_t level(uint32_t id) const { return nodes_[id].level; }
  const std::vector<uint32_t>& kids(uint32_t id) const { return nodes_[id].kids; }
  size_t size() const { return nodes_.size(); }

  uint32_t literal(uint32_t lvl, uint32_t value) {
    std::vector<uint32_t> kids(arities_[lvl], kFalse);
    kids[value] = kTrue;
    return make(lvl, std::move(kids));
  }

  uint32_t apply_and(uint32_t f, uint32_t g) { return apply(OpAnd, f, g); }
  uint32_t apply_or(uint32_t f, uint32_t g) { return apply(OpOr, f, g); }

  uint32_t negate(uint32_t f) {
    if (f == kFalse) return kTrue;
    if (f == kTrue) return kFalse;
    auto it = neg_cache_.find(f);
    if (it != neg_cache_.end()) return it->second;
    std::vector<uint32_t> kids;
    kids.reserve(nodes_[f].kids.size());
    for (uint32_t k : nodes_[f].kids) kids.push_back(negate(k));
    const uint32_t r = make(nodes_[f].level, std::move(kids));
    neg_cache_.emplace(f, r);
    return r;
  }

 private:
  enum Op : uint32_t { OpAnd = 0, OpOr = 1 };

  struct Node {
    uint32_t level;
    std::vector<uint32_t> kids;
  };

  uint32_t make(uint32_t lvl, std::vector<uint32_t> kids) {
    bool all_same = true;
    for (uint32_t k : kids) all_same &= k == kids[0];
    if (all_same) return kids[0];
    std::vector<uint32_t> key;
    key.reserve(kids.size() + 1);
    key.push_back(lvl);
    key.insert(key.end(), kids.begin(), kids.end());
    auto it = unique_.find(key);
    if (it != unique_.end()) return it->second;
    if (nodes_.size() >= max_nodes_)
      throw CompileError("compilation exceeds node budget (" + std::to_string(max_nodes_) + ")");
    const uint32_t id = static_cast<uint32_t>(nodes_.size());
    nodes_.push_back({lvl, std::move(kids)});
    unique_.emplace(std::move(key), id);
    return id;
  }

  uint32_t apply(Op op, uint32_t f, uint32_t g) {
    if (op == OpAnd) {
      if (f == kFalse || g == kFalse) return kFalse;
      if (f == kTrue) return g;
      if (g == kTrue) return f;
    } else {
      if (f == kTrue || g == kTrue) return kTrue;
      if (f == kFalse) return g;
      if (g == kFalse) return f;
    }
    if (f == g) return f;
    if (f > g) std::swap(f, g);
    const uint64_t key = (static_cast<uint64_t>(op) << 62) |
                         (static_cast<uint64_t>(f) << 31) | static_cast<uint64_t>(g);
    auto it = op_cache_.find(key);
    if (it != op_cache_.end()) return it->second;
    const uint32_t lf = level(f), lg = level(g);
    const uint32_t lvl = std::min(lf, lg);
    std::vector<uint32_t> kids(arities_[lvl]);
    for (uint32_t v = 0; v < arities_[lvl]; ++v) {
      const uint32_t cf = lf == lvl ? nodes_[f].kids[v] : f;
      const uint32_t cg = lg == lvl ? nodes_[g].kids[v] : g;
      kids[v] = apply(op, cf, cg);
    }
    const uint32_t r = make(lvl, std::move(kids));
    op_cache_.emplace(key, r);
    return r;
  }

  std::vector<uint32_t> arities_;
  size_t max_nodes_;
  std::vector<Node> nodes_;
  std::unordered_map<std::vector<uint32_t>, uint32_t, VecHash> unique_;
  std::unordered_map<uint64_t, uint32_t> op_cache_;
  std::unordered_map<uint32_t, uint32_t> neg_cache_;
};

/// Per-level bitsets tracking which variables a diagram node mentions.
class VarSets {
 public:
  VarSets(size_t n_levels) : words_((n_levels + 63) / 64) {}

  const std::vector<uint64_t>& of(const Mdd& mdd, uint32_t id) {
    if (id < sets_.size() && computed_[id]) return sets_[id];
    if (sets_.size() <= id) {
      sets_.resize(id + 1, std::vector<uint64_t>(words_, 0));
      computed_.resize(id + 1, false);
    }
    std::vector<uint64_t> acc(words_, 0);
    if (id != Mdd::kFalse && id != Mdd::kTrue) {
      acc[mdd.level(id) / 64] |= 1ULL << (mdd.level(id) % 64);
      for (uint32_t k : mdd.kids(id)) {
        const auto& ks = of(mdd, k);
        for (size_t w = 0; w < words_; ++w) acc[w] |= ks[w];
      }
    }
    sets_[id] = std::move(acc);
    computed_[id] = true;
    return sets_[id];
  }

  size_t words() const { return words_; }

 private:
  size_t words_;
  std::vector<std::vector<uint64_t>> sets_;
  std::vector<bool> computed_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Circuit construction

class CircuitBuilder {
 public:
  CircuitBuilder(const GroundProgram& gp, std::shared_ptr<const VarTable> vars,
                 const CompileOptions& opts)
      : gp_(gp), opts_(opts) {
    circuit_.vars_ = std::move(vars);
    fact_level_.assign(gp.facts.size(), 0);
    ad_level_.assign(gp.ads.size(), 0);
    arities_.reserve(gp.var_order.size());
    for (uint32_t lvl = 0; lvl < gp.var_order.size(); ++lvl) {
      const auto& vr = gp.var_order[lvl];
      if (vr.kind == VarRef::Kind::Fact) {
        fact_level_[vr.index] = lvl;
        arities_.push_back(2);
      } else {
        ad_level_[vr.index] = lvl;
        arities_.push_back(static_cast<uint32_t>(gp.ads[vr.index].heads.size()) + 1);
      }
    }
    fact_of_atom_.assign(gp.atom_names.size(), -1);
    for (uint32_t i = 0; i < gp.facts.size(); ++i) fact_of_atom_[gp.facts[i].atom] = static_cast<int>(i);
    rules_by_head_.assign(gp.atom_names.size(), {});
    for (uint32_t r = 0; r < gp.rules.size(); ++r)
      rules_by_head_[gp.rules[r].head].push_back(r);
  }

  Circuit build(uint32_t query_atom) {
    Mdd mdd(arities_, opts_.max_nodes);
    std::vector<int64_t> memo(gp_.atom_names.size(), -1);
    const uint32_t f = atom_mdd(mdd, memo, query_atom);
    convert_all(mdd, f);
    return std::move(circuit_);
  }

 private:
  uint32_t atom_mdd(Mdd& mdd, std::vector<int64_t>& memo, uint32_t atom) {
    if (memo[atom] >= 0) return static_cast<uint32_t>(memo[atom]);
    uint32_t acc = Mdd::kFalse;
    if (fact_of_atom_[atom] >= 0)
      acc = mdd.literal(fact_level_[fact_of_atom_[atom]], 1);
    for (uint32_t r : rules_by_head_[atom]) {
      const auto& rule = gp_.rules[r];
      uint32_t body = Mdd::kTrue;
      if (rule.ad >= 0)
        body = mdd.literal(ad_level_[rule.ad], static_cast<uint32_t>(rule.ad_value));
      for (int32_t lit : rule.body) {
        if (body == Mdd::kFalse) break;
        const uint32_t b = static_cast<uint32_t>(std::abs(lit)) - 1;
        uint32_t m = atom_mdd(mdd, memo, b);
        if (lit < 0) m = mdd.negate(m);
        body = mdd.apply_and(body, m);
      }
      acc = mdd.apply_or(acc, body);
    }
    memo[atom] = acc;
    return acc;
  }

  // -- conversion to a smooth arithmetic circuit ----------------------------

  void convert_all(const Mdd& mdd, uint32_t root) {
    VarSets sets(arities_.size());
    std::unordered_map<uint32_t, uint32_t> memo;
    circuit_.root_ = convert(mdd, sets, memo, root);
  }

  uint32_t convert(const Mdd& mdd, VarSets& sets, std::unordered_map<uint32_t, uint32_t>& memo,
                   uint32_t f) {
    if (f == Mdd::kFalse) return const_node(0);
    if (f == Mdd::kTrue) return const_node(1);
    auto it = memo.find(f);
    if (it != memo.end()) return it->second;

    const uint32_t lvl = mdd.level(f);
    const auto& node_vars = sets.of(mdd, f);
    std::vector<uint32_t> branches;
    for (uint32_t v = 0; v < mdd.kids(f).size(); ++v) {
      const uint32_t kid = mdd.kids(f)[v];
      if (kid == Mdd::kFalse) continue;
      std::vector<uint32_t> children{literal_node(lvl, v)};
      // Smoothing: mention every variable of this subtree that the branch
      // would otherwise skip, through value-summing gadgets.
      const auto& kid_vars = sets.of(mdd, kid);
      for (size_t w = 0; w < sets.words(); ++w) {
        uint64_t missing = node_vars[w] & ~kid_vars[w];
        if (w == lvl / 64) missing &= ~(1ULL << (lvl % 64));
        while (missing) {
          const uint32_t bit = static_cast<uint32_t>(__builtin_ctzll(missing));
          missing &= missing - 1;
          children.push_back(gadget(static_cast<uint32_t>(w * 64 + bit)));
        }
      }
      if (kid != Mdd::kTrue) children.push_back(convert(mdd, sets, memo, kid));
      branches.push_back(product(std::move(children)));
    }
    uint32_t out;
    if (branches.empty())
      out = const_node(0);
    else if (branches.size() == 1)
      out = branches[0];
    else
      out = sum(std::move(branches));
    memo.emplace(f, out);
    return out;
  }

  uint32_t gadget(uint32_t lvl) {
    if (gadgets_.size() <= lvl) gadgets_.resize(lvl + 1, UINT32_MAX);
    if (gadgets_[lvl] != UINT32_MAX) return gadgets_[lvl];
    std::vector<uint32_t> lits;
    for (uint32_t v = 0; v < arities_[lvl]; ++v) lits.push_back(literal_node(lvl, v));
    return gadgets_[lvl] = sum(std::move(lits));
  }

  uint32_t const_node(uint8_t v) {
    Circuit::Node n;
    n.kind = Circuit::NodeKind::Constant;
    n.const_value = v;
    return intern(std::move(n));
  }

  uint32_t literal_node(uint32_t var, uint32_t value) {
    Circuit::Node n;
    n.kind = Circuit::NodeKind::Literal;
    n.var = var;
    n.value = value;
    return intern(std::move(n));
  }

  uint32_t sum(std::vector<uint32_t> children) {
    Circuit::Node n;
    n.kind = Circuit::NodeKind::Sum;
    n.children = std::move(children);
    return intern(std::move(n));
  }

  uint32_t product(std::vector<uint32_t> children) {
    if (children.size() == 1) return children[0];
    Circuit::Node n;
    n.kind = Circuit::NodeKind::Product;
    n.children = std::move(children);
    return intern(std::move(n));
  }

  uint32_t intern(Circuit::Node n) {
    std::vector<uint32_t> key{static_cast<uint32_t>(n.kind), n.const_value, n.var, n.value};
    key.insert(key.end(), n.children.begin(), n.children.end());
    auto it = node_unique_.find(key);
    if (it != node_unique_.end()) return it->second;
    if (circuit_.nodes_.size() >= opts_.max_nodes)
      throw CompileError("compilation exceeds node budget (" + std::to_string(opts_.max_nodes) +
                         ")");
    const uint32_t id = static_cast<uint32_t>(circuit_.nodes_.size());
    circuit_.nodes_.push_back(std::move(n));
    node_unique_.emplace(std::move(key), id);
    return id;
  }

  const GroundProgram& gp_;
  CompileOptions opts_;
  Circuit circuit_;
  std::vector<uint32_t> arities_;
  std::vector<uint32_t> fact_level_;
  std::vector<uint32_t> ad_level_;
  std::vector<int> fact_of_atom_;
  std::vector<std::vector<uint32_t>> rules_by_head_;
  std::vector<uint32_t> gadgets_;
  std::unordered_map<std::vector<uint32_t>, uint32_t, VecHash> node_unique_;
};

Circuit compile(const GroundProgram& gp, const CompileOptions& opts) {
  return compile_atom(gp, gp.query, VarTable::from(gp), opts);
}

Circuit compile_atom(const GroundProgram& gp, uint32_t atom, std::shared_ptr<const VarTable> vars,
                     const CompileOptions& opts) {
  if (atom >= gp.atom_names.size()) throw CompileError("query atom index out of range");
  CircuitBuilder builder(gp, std::move(vars), opts);
  return builder.build(atom);
}

// ---------------------------------------------------------------------------
// Evaluation and gradients

void Circuit::check_shape(const Valuation& v) const {
  if (v.fact_probs.size() != vars_->n_facts)
    throw ShapeError("valuation has " + std::to_string(v.fact_probs.size()) + " fact entries, circuit expects " +
                     std::to_string(vars_->n_facts));
  if (v.ad_probs.size() != vars_->ad_head_counts.size())
    throw ShapeError("valuation has " + std::to_string(v.ad_probs.size()) + " AD entries, circuit expects " +
                     std::to_string(vars_->ad_head_counts.size()));
  for (size_t i = 0; i < v.ad_probs.size(); ++i)
    if (v.ad_probs[i].size() != vars_->ad_head_counts[i])
      throw ShapeError("AD valuation " + std::to_string(i) + " has wrong arity");
}

double Circuit::literal_weight(const Node& n, const Valuation& v) const {
  const CircuitVar& var = vars_->vars[n.var];
  if (var.kind == CircuitVar::Kind::Fact) {
    const double p = v.fact_probs[var.source];
    return n.value == 1 ? p : 1.0 - p;
  }
  const auto& probs = v.ad_probs[var.source];
  if (n.value < probs.size()) return probs[n.value];
  double sum = 0.0;
  for (double p : probs) sum += p;
  return 1.0 - sum;  // residual mass; never clamped so evaluate stays multilinear
}

void Circuit::forward(const Valuation& v, std::vector<double>& values) const {
  values.resize(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.kind) {
      case NodeKind::Constant:
        values[i] = n.const_value;
        break;
      case NodeKind::Literal:
        values[i] = literal_weight(n, v);
        break;
      case NodeKind::Sum: {
        double s = 0.0;
        for (uint32_t c : n.children) s += values[c];
        values[i] = s;
        break;
      }
      case NodeKind::Product: {
        double p = 1.0;
        for (uint32_t c : n.children) p *= values[c];
        values[i] = p;
        break;
      }
    }
  }
}

double Circuit::evaluate(const Valuation& v) const {
  check_shape(v);
  std::vector<double> values;
  forward(v, values);
  return values[root_];
}

GradientVector Circuit::gradient(const Valuation& v) const {
  check_shape(v);
  std::vector<double> values;
  forward(v, values);

  std::vector<double> adj(nodes_.size(), 0.0);
  adj[root_] = 1.0;
  GradientVector g;
  g.fact_grads.assign(vars_->n_facts, 0.0);
  for (uint32_t m : vars_->ad_head_counts) g.ad_grads.emplace_back(m, 0.0);

  std::vector<double> scratch;
  for (size_t i = nodes_.size(); i-- > 0;) {
    const Node& n = nodes_[i];
    const double a = adj[i];
    if (a == 0.0 && n.kind != NodeKind::Literal) continue;
    switch (n.kind) {
      case NodeKind::Constant:
        break;
      case NodeKind::Literal: {
        const CircuitVar& var = vars_->vars[n.var];
        if (var.kind == CircuitVar::Kind::Fact) {
          if (n.value == 1)
            g.fact_grads[var.source] += a;
          else
            g.fact_grads[var.source] -= a;
        } else {
          auto& row = g.ad_grads[var.source];
          if (n.value < row.size()) {
            row[n.value] += a;
          } else {
            for (double& x : row) x -= a;  // residual weight is 1 - sum(heads)
          }
        }
        break;
      }
      case NodeKind::Sum:
        for (uint32_t c : n.children) adj[c] += a;
        break;
      case NodeKind::Product: {
        const size_t k = n.children.size();
        scratch.assign(k + 1, 1.0);
        for (size_t j = k; j-- > 0;) scratch[j] = scratch[j + 1] * values[n.children[j]];
        double prefix = 1.0;
        for (size_t j = 0; j < k; ++j) {
          adj[n.children[j]] += a * prefix * scratch[j + 1];
          prefix *= values[n.children[j]];
        }
        break;
      }
    }
  }
  return g;
}

std::string Circuit::dump() const {
  std::string out;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    out += std::to_string(i);
    switch (n.kind) {
      case NodeKind::Constant:
        out += " const " + std::to_string(static_cast<int>(n.const_value));
        break;
      case NodeKind::Literal:
        out += " lit " + std::to_string(n.var) + " " + std::to_string(n.value);
        break;
      case NodeKind::Sum:
        out += " sum";
        for (uint32_t c : n.children) out += " " + std::to_string(c);
        break;
      case NodeKind::Product:
        out += " prod";
        for (uint32_t c : n.children) out += " " + std::to_string(c);
        break;
    }
    out += "\n";
  }
  out += "root " + std::to_string(root_) + "\n";
  return out;
}

double conditional(const Circuit& joint, const Circuit& evidence, const Valuation& v) {
  if (joint.var_table() != evidence.var_table())
    throw ShapeError("joint and evidence circuits use different variable tables");
  const double pe = evidence.evaluate(v);
  if (pe <= 0.0)
    throw EvidenceError("conditioning on evidence with zero probability");
  return joint.evaluate(v) / pe;
}

// ---------------------------------------------------------------------------
// Structural checks

namespace {

std::vector<std::vector<uint64_t>> mention_sets(const Circuit& c) {
  const size_t n_levels = c.var_table()->vars.size();
  const size_t words = (n_levels + 63) / 64;
  std::vector<std::vector<uint64_t>> sets(c.nodes().size(), std::vector<uint64_t>(words, 0));
  for (size_t i = 0; i < c.nodes().size(); ++i) {
    const auto& n = c.nodes()[i];
    if (n.kind == Circuit::NodeKind::Literal) {
      sets[i][n.var / 64] |= 1ULL << (n.var % 64);
    } else {
      for (uint32_t k : n.children)
        for (size_t w = 0; w < words; ++w) sets[i][w] |= sets[k][w];
    }
  }
  return sets;
}

}  // namespace

bool is_smooth(const Circuit& c) {
  const auto sets = mention_sets(c);
  for (const auto& n : c.nodes()) {
    if (n.kind != Circuit::NodeKind::Sum || n.children.empty()) continue;
    const auto& first = sets[n.children[0]];
    for (uint32_t k : n.children)
      if (sets[k] != first) return false;
  }
  return true;
}

bool is_decomposable(const Circuit& c) {
  const auto sets = mention_sets(c);
  const size_t words = sets.empty() ? 0 : sets[0].size();
  for (const auto& n : c.nodes()) {
    if (n.kind != Circuit::NodeKind::Product) continue;
    std::vector<uint64_t> acc(words, 0);
    for (uint32_t k : n.children) {
      for (size_t w = 0; w < words; ++w) {
        if (acc[w] & sets[k][w]) return false;
        acc[w] |= sets[k][w];
      }
    }
  }
  return true;
}

}  // namespace plshield::wmc
