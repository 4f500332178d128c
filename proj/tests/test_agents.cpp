#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "plshield/agents/trainer.hpp"
#include "plshield/common.hpp"
#include "plshield/rng.hpp"
#include "support/genprog.hpp"

using namespace plshield;
using namespace plshield::agents;
using plshield::shield::CompiledShield;
using plshield::shield::PolicyDistribution;
using plshield::shield::SensorReading;
namespace ts = plshield::testsupport;

namespace {

/// Two-armed one-state safety bandit: arm 0 is almost always unsafe, arm 1
/// almost always safe; no rewards anywhere.
const CompiledShield& soft_bandit_shield() {
  static const CompiledShield s = CompiledShield::from_text(
      "#actions act(a), act(b).\n"
      "0.98::crash :- act(a).\n"
      "0.02::crash :- act(b).\n"
      "safe :- not(crash).\n");
  return s;
}

StepRecord bandit_step(const CompiledShield& s, PolicyParams& p, Rng& rng) {
  StepRecord rec;
  rec.state = 0;
  const PolicyDistribution pi = policy_forward(p, 0);
  rec.base_probs = pi.probs;
  const auto d = s.decide(pi, SensorReading{});
  rec.action_safety = d.action_safety;
  rec.policy_safety = d.policy_safety;
  rec.fallback = d.fallback;
  rec.act_probs = d.shielded;
  rec.action = rng.discrete(d.shielded);
  rec.reward = 0.0;
  return rec;
}

double base_policy_safety(const PolicyParams& p, const CompiledShield& s) {
  const PolicyDistribution pi = policy_forward(p, 0);
  const auto d = s.decide(pi, SensorReading{});
  double out = 0.0;
  for (size_t a = 0; a < pi.probs.size(); ++a) out += d.action_safety[a] * pi.probs[a];
  return out;
}

TrainerConfig plpg_config(double alpha, double lr) {
  TrainerConfig cfg;
  cfg.algorithm = Algorithm::Plpg;
  cfg.alpha = alpha;
  cfg.lr = lr;
  cfg.gamma = 1.0;
  cfg.batch_episodes = 1;
  return cfg;
}

}  // namespace

TEST_CASE("zero parameters give the uniform distribution") {
  const PolicyParams p = PolicyParams::tabular(3, 5);
  const PolicyDistribution pi = policy_forward(p, 1);
  for (double x : pi.probs) CHECK(x == doctest::Approx(0.2));
}

TEST_CASE("a hot logit dominates the softmax") {
  PolicyParams p = PolicyParams::tabular(1, 5);
  p.w[2] = 10.0;
  const PolicyDistribution pi = policy_forward(p, 0);
  CHECK(pi.probs[2] > 0.99);
}

TEST_CASE("non-finite parameters are rejected") {
  PolicyParams p = PolicyParams::tabular(1, 2);
  p.w[0] = std::nan("");
  CHECK_THROWS_AS(policy_forward(p, 0), Error);
}

TEST_CASE("log-policy gradients match finite differences (tabular and mlp)") {
  Rng rng(31);
  const double h = 1e-6;
  for (const PolicyArch arch : {PolicyArch::Tabular, PolicyArch::Mlp}) {
    PolicyParams p = arch == PolicyArch::Tabular ? PolicyParams::tabular(3, 4)
                                                 : PolicyParams::mlp(3, 4, 8, rng);
    for (auto& w : p.w) w += 0.3 * rng.normal();
    const int state = 1, action = 2;
    ForwardCache cache;
    policy_forward(p, state, &cache);
    std::vector<double> dlogits(4);
    for (int b = 0; b < 4; ++b)
      dlogits[b] = (b == action ? 1.0 : 0.0) - cache.probs[b];
    std::vector<double> grad;
    policy_backward(p, cache, dlogits, grad);
    for (size_t i = 0; i < p.w.size(); i += 3) {
      PolicyParams pp = p, pm = p;
      pp.w[i] += h;
      pm.w[i] -= h;
      const double fp = std::log(policy_forward(pp, state).probs[action]);
      const double fm = std::log(policy_forward(pm, state).probs[action]);
      CHECK(std::abs(grad[i] - (fp - fm) / (2 * h)) < 1e-6);
    }
  }
}

TEST_CASE("returns-to-go without discounting") {
  EpisodeBatch batch;
  batch.gamma = 1.0;
  batch.episodes.push_back({StepRecord{}, StepRecord{}, StepRecord{}});
  for (auto& s : batch.episodes[0]) s.reward = 1.0;
  const auto psi = returns_to_go(batch, nullptr);
  CHECK(psi[0][0] == doctest::Approx(3.0));
  CHECK(psi[0][1] == doctest::Approx(2.0));
  CHECK(psi[0][2] == doctest::Approx(1.0));
}

TEST_CASE("returns-to-go with discounting") {
  EpisodeBatch batch;
  batch.gamma = 0.5;
  batch.episodes.push_back({StepRecord{}, StepRecord{}, StepRecord{}});
  batch.episodes[0][2].reward = 10.0;
  const auto psi = returns_to_go(batch, nullptr);
  CHECK(psi[0][0] == doctest::Approx(2.5));
  CHECK(psi[0][1] == doctest::Approx(5.0));
  CHECK(psi[0][2] == doctest::Approx(10.0));
}

TEST_CASE("a constant baseline shifts returns uniformly") {
  EpisodeBatch batch;
  batch.gamma = 1.0;
  batch.episodes.push_back({StepRecord{}, StepRecord{}});
  batch.episodes[0][0].reward = 2.0;
  batch.episodes[0][1].reward = 1.0;
  // Pre-train the baseline so that every state holds the constant b = 3.
  Baseline baseline(BaselineMode::StateMean, 1);
  baseline.record(0, 3.0);
  const auto raw = returns_to_go(batch, nullptr);
  Baseline b2 = baseline;
  const auto shifted = returns_to_go(batch, &b2);
  for (size_t t = 0; t < raw[0].size(); ++t)
    CHECK(shifted[0][t] == doctest::Approx(raw[0][t] - 3.0));
}

TEST_CASE("a positive-return step raises the taken action's probability") {
  PolicyParams p = PolicyParams::tabular(1, 3);
  EpisodeBatch batch;
  batch.gamma = 1.0;
  StepRecord s;
  s.state = 0;
  s.action = 1;
  s.reward = 1.0;
  batch.episodes.push_back({s});
  TrainerConfig cfg;
  cfg.lr = 0.1;
  cfg.baseline = BaselineMode::None;
  Baseline baseline(cfg.baseline, 1);
  const double before = policy_forward(p, 0).probs[1];
  pg_update(p, batch, cfg, baseline);
  CHECK(policy_forward(p, 0).probs[1] > before);
}

TEST_CASE("zero returns leave the parameters unchanged") {
  PolicyParams p = PolicyParams::tabular(1, 3);
  p.w = {0.3, -0.2, 0.1};
  const auto saved = p.w;
  EpisodeBatch batch;
  batch.gamma = 1.0;
  StepRecord s;
  s.action = 0;
  s.reward = 0.0;
  batch.episodes.push_back({s, s});
  TrainerConfig cfg;
  cfg.baseline = BaselineMode::None;
  Baseline baseline(cfg.baseline, 1);
  pg_update(p, batch, cfg, baseline);
  CHECK(p.w == saved);
}

TEST_CASE("policy gradient solves the two-state chain") {
  // s0: arm 0 pays 1, arm 1 pays 0; then s1: arm 1 pays 1, arm 0 pays 0.
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    Rng rng(seed);
    PolicyParams p = PolicyParams::tabular(2, 2);
    TrainerConfig cfg;
    cfg.lr = 0.4;
    cfg.gamma = 1.0;
    cfg.batch_episodes = 4;
    Baseline baseline(cfg.baseline, 2);
    for (int update = 0; update < 2000; ++update) {
      EpisodeBatch batch;
      batch.gamma = cfg.gamma;
      for (int e = 0; e < cfg.batch_episodes; ++e) {
        std::vector<StepRecord> ep;
        for (int st = 0; st < 2; ++st) {
          StepRecord rec;
          rec.state = st;
          const auto pi = policy_forward(p, st);
          rec.base_probs = pi.probs;
          rec.act_probs = pi.probs;
          rec.action = rng.discrete(pi.probs);
          rec.reward = (rec.action == st) ? 1.0 : 0.0;
          ep.push_back(rec);
        }
        batch.episodes.push_back(std::move(ep));
      }
      pg_update(p, batch, cfg, baseline);
    }
    CHECK(policy_forward(p, 0).probs[0] > 0.95);
    CHECK(policy_forward(p, 1).probs[1] > 0.95);
  }
}

TEST_CASE("rejection update equals the plain update when everything is safe") {
  PolicyParams p1 = PolicyParams::tabular(1, 3);
  PolicyParams p2 = p1;
  EpisodeBatch batch;
  batch.gamma = 0.9;
  StepRecord s;
  s.state = 0;
  s.action = 2;
  s.reward = 0.7;
  s.base_probs = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  s.act_probs = s.base_probs;  // all actions accepted: acting == base
  batch.episodes.push_back({s});
  TrainerConfig cfg;
  Baseline b1(cfg.baseline, 1), b2(cfg.baseline, 1);
  pg_update(p1, batch, cfg, b1);
  vsrl_update(p2, batch, cfg, b2);
  CHECK(p1.w == p2.w);
}

TEST_CASE("an active mask makes acting and update distributions differ") {
  const CompiledShield s = CompiledShield::from_text(
      "#actions act(a), act(b).\n#sensors s0.\n"
      "crash :- act(a), s0.\nsafe :- not(crash).\n");
  const PolicyDistribution pi{{0.4, 0.6}};
  const auto rd = s.rejection_decide(pi, SensorReading{{1.0}});
  REQUIRE(rd.safe_mask == std::vector<uint8_t>{0, 1});
  // The distribution actually acted with is not the one whose log-gradient
  // the rejection baseline updates.
  CHECK(rd.renormalized != pi.probs);
  // The support condition for off-policy correction fails: pi(a) > 0 while
  // the acting distribution gives a zero mass.
  CHECK(pi.probs[0] > 0.0);
  CHECK(rd.renormalized[0] == 0.0);
  // With perfect sensors the masked action never appears in a batch.
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) CHECK(rng.discrete(rd.renormalized) != 0);
}

TEST_CASE("epsilon mixing is degenerate at the endpoints") {
  Rng act1(5, 3), act2(5, 3), explore1(5, 4), explore2(5, 4);
  const std::vector<double> renorm{0.0, 1.0};
  const std::vector<double> base{0.5, 0.5};
  for (int i = 0; i < 200; ++i) {
    // eps = 0: always the masked distribution.
    CHECK(eps_vsrl_act(renorm, base, 0.0, act1, explore1) == 1);
  }
  int base_draws[2] = {0, 0};
  for (int i = 0; i < 1000; ++i)
    ++base_draws[eps_vsrl_act(renorm, base, 1.0, act2, explore2)];
  CHECK(base_draws[0] > 400);  // eps = 1 samples the base policy
}

TEST_CASE("epsilon mixing matches the mixture distribution") {
  Rng act(7, 3), explore(7, 4);
  const std::vector<double> renorm{0.0, 0.5, 0.5};
  const std::vector<double> base{0.6, 0.2, 0.2};
  const double eps = 0.5;
  const int n = 100000;
  std::vector<double> counts(3, 0.0);
  for (int i = 0; i < n; ++i) ++counts[eps_vsrl_act(renorm, base, eps, act, explore)];
  double tv = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double want = (1 - eps) * renorm[a] + eps * base[a];
    tv += std::abs(counts[a] / n - want);
  }
  CHECK(tv / 2 < 0.01);
}

TEST_CASE("shielded update with zero weight and full safety equals the plain update") {
  const CompiledShield& s = *[] {
    static CompiledShield sh =
        CompiledShield::from_text("#actions act(a), act(b), act(c).\nsafe.\n");
    return &sh;
  }();
  PolicyParams p1 = PolicyParams::tabular(1, 3);
  p1.w = {0.2, -0.1, 0.05};
  PolicyParams p2 = p1;
  EpisodeBatch batch;
  batch.gamma = 1.0;
  StepRecord rec;
  rec.state = 0;
  rec.action = 1;
  rec.reward = 0.5;
  rec.base_probs = policy_forward(p1, 0).probs;
  const auto d = s.decide(PolicyDistribution{rec.base_probs}, SensorReading{});
  rec.act_probs = d.shielded;
  rec.action_safety = d.action_safety;
  rec.policy_safety = d.policy_safety;
  batch.episodes.push_back({rec});
  TrainerConfig cfg = plpg_config(/*alpha=*/0.0, /*lr=*/0.2);
  TrainerConfig pg_cfg = cfg;
  pg_cfg.algorithm = Algorithm::Pg;
  Baseline b1(cfg.baseline, 1), b2(cfg.baseline, 1);
  plpg_update(p1, batch, cfg, b1);
  pg_update(p2, batch, pg_cfg, b2);
  for (size_t i = 0; i < p1.w.size(); ++i)
    CHECK(p1.w[i] == doctest::Approx(p2.w[i]).epsilon(1e-12));
}

TEST_CASE("the safety gradient alone drives the bandit toward the safe arm") {
  for (uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
    Rng rng(seed);
    PolicyParams p = PolicyParams::tabular(1, 2);
    const TrainerConfig cfg = plpg_config(/*alpha=*/1.0, /*lr=*/2.0);
    Baseline baseline(cfg.baseline, 1);
    double prev = base_policy_safety(p, soft_bandit_shield());
    CHECK(prev == doctest::Approx(0.5).epsilon(1e-9));
    for (int update = 0; update < 2000; ++update) {
      EpisodeBatch batch;
      batch.gamma = 1.0;
      batch.episodes.push_back({bandit_step(soft_bandit_shield(), p, rng)});
      plpg_update(p, batch, cfg, baseline);
      const double cur = base_policy_safety(p, soft_bandit_shield());
      CHECK(cur >= prev - 1e-12);  // reward-free safety never decreases
      prev = cur;
    }
    CHECK(prev > 0.95);
  }
}

TEST_CASE("the safety gradient touches logits of actions never taken") {
  PolicyParams p = PolicyParams::tabular(1, 2);
  EpisodeBatch batch;
  batch.gamma = 1.0;
  StepRecord rec;
  rec.state = 0;
  rec.action = 1;  // only the safe arm is ever taken
  rec.reward = 0.0;
  rec.base_probs = {0.5, 0.5};
  rec.act_probs = {0.5, 0.5};
  rec.action_safety = {0.02, 0.98};
  rec.policy_safety = 0.5;
  batch.episodes.push_back({rec});
  const TrainerConfig cfg = plpg_config(1.0, 1.0);
  Baseline baseline(cfg.baseline, 1);
  plpg_update(p, batch, cfg, baseline);
  CHECK(p.w[0] != 0.0);  // the unsafe arm's logit moved (downward)
  CHECK(p.w[0] < 0.0);
  CHECK(p.w[1] > 0.0);
}

TEST_CASE("the full per-step objective gradient matches finite differences") {
  Rng rng(77);
  const double h = 1e-5;
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform_int(3));
    std::vector<double> safety(m);
    for (auto& x : safety) x = rng.uniform(0.05, 0.95);
    const int action = static_cast<int>(rng.uniform_int(m));
    const double psi = rng.uniform(-2.0, 2.0);
    const double alpha = rng.uniform(0.0, 2.0);

    PolicyParams p = PolicyParams::tabular(1, m);
    for (auto& w : p.w) w = 0.5 * rng.normal();

    const auto objective = [&](const PolicyParams& params) {
      const auto pi = policy_forward(params, 0).probs;
      double ps = 0.0, ps2 = 0.0;
      for (int b = 0; b < m; ++b) {
        ps += safety[b] * pi[b];
        ps2 += safety[b] * safety[b] * pi[b];
      }
      const double shielded_a = safety[action] * pi[action] / ps;
      return psi * std::log(shielded_a) + alpha * std::log(ps2 / ps);
    };

    // One plpg step against the same frozen shield outputs.
    EpisodeBatch batch;
    batch.gamma = 1.0;
    StepRecord rec;
    rec.state = 0;
    rec.action = action;
    rec.reward = psi;  // single step: return-to-go == reward
    rec.base_probs = policy_forward(p, 0).probs;
    rec.act_probs = rec.base_probs;
    rec.action_safety = safety;
    rec.policy_safety = 0.5;
    batch.episodes.push_back({rec});
    TrainerConfig cfg = plpg_config(alpha, 1.0);
    cfg.baseline = BaselineMode::None;
    Baseline baseline(cfg.baseline, 1);
    PolicyParams updated = p;
    plpg_update(updated, batch, cfg, baseline);

    for (int i = 0; i < m; ++i) {
      PolicyParams pp = p, pm = p;
      pp.w[i] += h;
      pm.w[i] -= h;
      const double fd = (objective(pp) - objective(pm)) / (2 * h);
      const double analytic = updated.w[i] - p.w[i];  // lr == 1
      CHECK(std::abs(analytic - fd) <= 1e-5 * std::max({1.0, std::abs(analytic), std::abs(fd)}));
    }
  }
}

TEST_CASE("updates are deterministic") {
  EpisodeBatch batch;
  batch.gamma = 0.97;
  Rng rng(13);
  for (int e = 0; e < 3; ++e) {
    std::vector<StepRecord> ep;
    for (int t = 0; t < 5; ++t) {
      StepRecord rec;
      rec.state = static_cast<int>(rng.uniform_int(4));
      rec.action = static_cast<int>(rng.uniform_int(3));
      rec.reward = rng.uniform(-1, 1);
      rec.base_probs = {0.3, 0.3, 0.4};
      rec.act_probs = rec.base_probs;
      rec.action_safety = {0.5, 0.9, 0.7};
      rec.policy_safety = 0.7;
      ep.push_back(rec);
    }
    batch.episodes.push_back(std::move(ep));
  }
  TrainerConfig cfg;
  cfg.algorithm = Algorithm::Plpg;
  cfg.alpha = 0.7;
  PolicyParams p1 = PolicyParams::tabular(4, 3);
  PolicyParams p2 = p1;
  Baseline b1(cfg.baseline, 4), b2(cfg.baseline, 4);
  plpg_update(p1, batch, cfg, b1);
  plpg_update(p2, batch, cfg, b2);
  CHECK(p1.w == p2.w);
}

TEST_CASE("fallback steps contribute only the return term") {
  PolicyParams p = PolicyParams::tabular(1, 2);
  EpisodeBatch batch;
  batch.gamma = 1.0;
  StepRecord rec;
  rec.state = 0;
  rec.action = 0;
  rec.reward = 0.0;
  rec.base_probs = {0.5, 0.5};
  rec.act_probs = {0.5, 0.5};
  rec.action_safety = {0.0, 0.0};
  rec.policy_safety = 0.0;
  rec.fallback = true;
  batch.episodes.push_back({rec});
  TrainerConfig cfg = plpg_config(1.0, 1.0);
  cfg.baseline = BaselineMode::None;
  Baseline baseline(cfg.baseline, 1);
  const auto stats = plpg_update(p, batch, cfg, baseline);
  CHECK(stats.fallback_steps == 1);
  CHECK(p.w[0] == 0.0);  // zero return and no safety term: nothing moves
  CHECK(p.w[1] == 0.0);
}

TEST_CASE("the acting distribution is the one the shielded update differentiates") {
  // On-policy premise: acting samples pi+ computed from the same parameters
  // and safeties the update later recombines.
  Rng rng(55);
  PolicyParams p = PolicyParams::tabular(1, 2);
  for (auto& w : p.w) w = 0.4 * rng.normal();
  const auto pi = policy_forward(p, 0);
  const auto d = soft_bandit_shield().decide(pi, SensorReading{});
  StepRecord rec;
  rec.state = 0;
  rec.base_probs = pi.probs;
  rec.act_probs = d.shielded;
  rec.action_safety = d.action_safety;
  rec.policy_safety = d.policy_safety;
  // Recombine exactly as plpg_update does internally.
  double ps = 0.0;
  for (size_t b = 0; b < 2; ++b) ps += rec.action_safety[b] * pi.probs[b];
  for (size_t a = 0; a < 2; ++a)
    CHECK(rec.action_safety[a] * pi.probs[a] / ps == doctest::Approx(rec.act_probs[a]).epsilon(1e-12));
}

TEST_CASE("checkpoints round-trip") {
  Rng rng(99);
  PolicyParams p = PolicyParams::mlp(6, 4, 8, rng);
  save_checkpoint("/tmp/plshield_ckpt.bin", p, "plpg", 1234);
  std::string algorithm;
  uint64_t step = 0;
  const PolicyParams q = load_checkpoint("/tmp/plshield_ckpt.bin", &algorithm, &step);
  CHECK(algorithm == "plpg");
  CHECK(step == 1234);
  CHECK(q.arch == PolicyArch::Mlp);
  CHECK(q.w == p.w);
}
