#include "plshield/agents/trainer.hpp"

#include <cmath>

#include "plshield/common.hpp"

namespace plshield::agents {

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "pg") return Algorithm::Pg;
  if (s == "vsrl") return Algorithm::Vsrl;
  if (s == "eps-vsrl") return Algorithm::EpsVsrl;
  if (s == "plpg") return Algorithm::Plpg;
  throw ConfigError("unknown algorithm '" + s + "' (expected pg|vsrl|eps-vsrl|plpg)");
}

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Pg: return "pg";
    case Algorithm::Vsrl: return "vsrl";
    case Algorithm::EpsVsrl: return "eps-vsrl";
    case Algorithm::Plpg: return "plpg";
  }
  return "?";
}

std::vector<std::vector<double>> returns_to_go(const EpisodeBatch& batch, Baseline* baseline) {
  std::vector<std::vector<double>> out;
  out.reserve(batch.episodes.size());
  for (const auto& ep : batch.episodes) {
    std::vector<double> psi(ep.size(), 0.0);
    double g = 0.0;
    for (size_t t = ep.size(); t-- > 0;) {
      g = ep[t].reward + batch.gamma * g;
      psi[t] = g;
    }
    if (baseline) {
      for (size_t t = 0; t < ep.size(); ++t) {
        const double raw = psi[t];
        psi[t] -= baseline->value(ep[t].state);
        baseline->record(ep[t].state, raw);
      }
    }
    out.push_back(std::move(psi));
  }
  return out;
}

namespace {

constexpr double kLogClamp = 1e-12;

size_t batch_steps(const EpisodeBatch& batch) {
  size_t n = 0;
  for (const auto& ep : batch.episodes) n += ep.size();
  return n;
}

/// d f / d logits from d f / d probs through the softmax Jacobian.
void chain_softmax(const std::vector<double>& probs, const std::vector<double>& dprobs,
                   std::vector<double>& dlogits) {
  double inner = 0.0;
  for (size_t c = 0; c < probs.size(); ++c) inner += dprobs[c] * probs[c];
  dlogits.resize(probs.size());
  for (size_t b = 0; b < probs.size(); ++b) dlogits[b] = probs[b] * (dprobs[b] - inner);
}

UpdateStats apply_gradient(PolicyParams& p, const TrainerConfig& cfg, std::vector<double>& grad,
                           size_t n_steps, int fallback_steps) {
  UpdateStats stats;
  stats.fallback_steps = fallback_steps;
  if (n_steps == 0) return stats;
  double norm2 = 0.0;
  bool finite = true;
  for (double& g : grad) {
    g /= static_cast<double>(n_steps);
    finite &= std::isfinite(g);
    norm2 += g * g;
  }
  if (!finite) {
    stats.skipped = 1;
    return stats;
  }
  stats.grad_norm = std::sqrt(norm2);
  for (size_t i = 0; i < p.w.size(); ++i) p.w[i] += cfg.lr * grad[i];
  return stats;
}

/// Likelihood-ratio ascent on log pi of the taken action; shared by the
/// plain and the rejection-shielded trainers.
UpdateStats reinforce_update(PolicyParams& p, const EpisodeBatch& batch, const TrainerConfig& cfg,
                             Baseline& baseline) {
  const auto psi = returns_to_go(batch, &baseline);
  std::vector<double> grad(p.w.size(), 0.0);
  std::vector<double> dlogits(p.n_actions);
  ForwardCache cache;
  for (size_t e = 0; e < batch.episodes.size(); ++e) {
    for (size_t t = 0; t < batch.episodes[e].size(); ++t) {
      const StepRecord& step = batch.episodes[e][t];
      policy_forward(p, step.state, &cache);
      for (int b = 0; b < p.n_actions; ++b) {
        const double ind = b == step.action ? 1.0 : 0.0;
        dlogits[b] = psi[e][t] * (ind - cache.probs[b]);
      }
      policy_backward(p, cache, dlogits, grad);
    }
  }
  return apply_gradient(p, cfg, grad, batch_steps(batch), 0);
}

}  // namespace

UpdateStats pg_update(PolicyParams& p, const EpisodeBatch& batch, const TrainerConfig& cfg,
                      Baseline& baseline) {
  return reinforce_update(p, batch, cfg, baseline);
}

UpdateStats vsrl_update(PolicyParams& p, const EpisodeBatch& batch, const TrainerConfig& cfg,
                        Baseline& baseline) {
  return reinforce_update(p, batch, cfg, baseline);
}

std::vector<double> dlog_policy_safety_dpi(const std::vector<double>& safety,
                                           const std::vector<double>& pi) {
  double es = 0.0, es2 = 0.0;
  for (size_t a = 0; a < pi.size(); ++a) {
    es += safety[a] * pi[a];
    es2 += safety[a] * safety[a] * pi[a];
  }
  es = std::max(es, kLogClamp);
  es2 = std::max(es2, kLogClamp);
  std::vector<double> d(pi.size());
  for (size_t b = 0; b < pi.size(); ++b) d[b] = safety[b] * safety[b] / es2 - safety[b] / es;
  return d;
}

UpdateStats plpg_update(PolicyParams& p, const EpisodeBatch& batch, const TrainerConfig& cfg,
                        Baseline& baseline) {
  const auto psi = returns_to_go(batch, &baseline);
  std::vector<double> grad(p.w.size(), 0.0);
  std::vector<double> dprobs(p.n_actions), dlogits(p.n_actions);
  ForwardCache cache;
  int fallback_steps = 0;
  for (size_t e = 0; e < batch.episodes.size(); ++e) {
    for (size_t t = 0; t < batch.episodes[e].size(); ++t) {
      const StepRecord& step = batch.episodes[e][t];
      policy_forward(p, step.state, &cache);
      const std::vector<double>& pi = cache.probs;
      const int a = step.action;

      if (step.fallback || step.action_safety.empty()) {
        // Safety quotient undefined; only the return term applies (pi+ == pi).
        ++fallback_steps;
        for (int b = 0; b < p.n_actions; ++b) {
          const double ind = b == a ? 1.0 : 0.0;
          dlogits[b] = cfg.return_weight * psi[e][t] * (ind - pi[b]);
        }
        policy_backward(p, cache, dlogits, grad);
        continue;
      }

      const std::vector<double>& s = step.action_safety;
      double ps = 0.0;
      for (int b = 0; b < p.n_actions; ++b) ps += s[b] * pi[b];
      ps = std::max(ps, kLogClamp);

      // d log pi+_a / d pi_b, from pi+_a = s_a pi_a / ps.
      for (int b = 0; b < p.n_actions; ++b) {
        dprobs[b] = (b == a ? 1.0 / pi[a] : 0.0) - s[b] / ps;
        dprobs[b] *= cfg.return_weight * psi[e][t];
      }
      const std::vector<double> dsafe = dlog_policy_safety_dpi(s, pi);
      for (int b = 0; b < p.n_actions; ++b) dprobs[b] += cfg.alpha * dsafe[b];

      chain_softmax(pi, dprobs, dlogits);
      policy_backward(p, cache, dlogits, grad);
    }
  }
  return apply_gradient(p, cfg, grad, batch_steps(batch), fallback_steps);
}

int eps_vsrl_act(std::span<const double> renormalized, std::span<const double> base, double eps,
                 Rng& act_rng, Rng& explore_rng) {
  const bool explore = explore_rng.uniform() < eps;
  const auto& dist = explore ? base : renormalized;
  return act_rng.discrete(dist);
}

}  // namespace plshield::agents
