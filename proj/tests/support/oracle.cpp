#include "support/oracle.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace plshield::testsupport {

using logic::GroundProgram;

uint64_t world_count(const GroundProgram& gp) {
  uint64_t n = 1;
  for (size_t i = 0; i < gp.facts.size(); ++i) n *= 2;
  for (const auto& ad : gp.ads) n *= ad.heads.size() + 1;
  return n;
}

namespace {

/// Atoms in dependency order (children before heads).
std::vector<uint32_t> topo_order(const GroundProgram& gp) {
  const size_t n = gp.atom_names.size();
  std::vector<std::vector<uint32_t>> deps(n);
  for (const auto& r : gp.rules)
    for (int32_t lit : r.body) deps[r.head].push_back(static_cast<uint32_t>(std::abs(lit)) - 1);
  std::vector<int> state(n, 0);
  std::vector<uint32_t> order;
  std::vector<std::pair<uint32_t, size_t>> stack;
  for (uint32_t s = 0; s < n; ++s) {
    if (state[s]) continue;
    stack.push_back({s, 0});
    state[s] = 1;
    while (!stack.empty()) {
      auto& [v, i] = stack.back();
      if (i < deps[v].size()) {
        const uint32_t w = deps[v][i++];
        if (state[w] == 1) throw std::runtime_error("cyclic ground program in oracle");
        if (state[w] == 0) {
          state[w] = 1;
          stack.push_back({w, 0});
        }
      } else {
        state[v] = 2;
        order.push_back(v);
        stack.pop_back();
      }
    }
  }
  return order;
}

}  // namespace

double enumerate_success_atom(const GroundProgram& gp, const wmc::Valuation& v, uint32_t atom) {
  const size_t n_atoms = gp.atom_names.size();
  std::vector<int> fact_of(n_atoms, -1);
  for (size_t i = 0; i < gp.facts.size(); ++i) fact_of[gp.facts[i].atom] = static_cast<int>(i);
  std::vector<std::vector<uint32_t>> rules_by_head(n_atoms);
  for (uint32_t r = 0; r < gp.rules.size(); ++r) rules_by_head[gp.rules[r].head].push_back(r);
  const std::vector<uint32_t> order = topo_order(gp);

  const size_t nf = gp.facts.size();
  const size_t na = gp.ads.size();
  std::vector<int> fact_bit(nf, 0);
  std::vector<size_t> ad_val(na, 0);

  double total = 0.0;
  for (;;) {
    // Weight of this total choice.
    double w = 1.0;
    for (size_t i = 0; i < nf; ++i)
      w *= fact_bit[i] ? v.fact_probs[i] : 1.0 - v.fact_probs[i];
    for (size_t j = 0; j < na; ++j) {
      const auto& probs = v.ad_probs[j];
      if (ad_val[j] < probs.size()) {
        w *= probs[ad_val[j]];
      } else {
        double s = 0.0;
        for (double p : probs) s += p;
        w *= std::max(0.0, 1.0 - s);
      }
    }

    if (w > 0.0) {
      // Least fixpoint over the DAG.
      std::vector<char> truth(n_atoms, 0);
      for (uint32_t a : order) {
        bool t = fact_of[a] >= 0 && fact_bit[fact_of[a]];
        for (uint32_t ri : rules_by_head[a]) {
          if (t) break;
          const auto& rule = gp.rules[ri];
          if (rule.ad >= 0 && ad_val[rule.ad] != static_cast<size_t>(rule.ad_value)) continue;
          bool body = true;
          for (int32_t lit : rule.body) {
            const bool val = truth[static_cast<uint32_t>(std::abs(lit)) - 1];
            if ((lit > 0) != val) {
              body = false;
              break;
            }
          }
          t |= body;
        }
        truth[a] = t;
      }
      if (truth[atom]) total += w;
    }

    // Odometer.
    size_t k = 0;
    for (; k < nf; ++k) {
      if (fact_bit[k] == 0) {
        fact_bit[k] = 1;
        break;
      }
      fact_bit[k] = 0;
    }
    if (k < nf) continue;
    size_t j = 0;
    for (; j < na; ++j) {
      if (ad_val[j] < gp.ads[j].heads.size()) {
        ++ad_val[j];
        break;
      }
      ad_val[j] = 0;
    }
    if (j == na) break;
  }
  return total;
}

}  // namespace plshield::testsupport
