#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "plshield/common.hpp"
#include "plshield/rng.hpp"
#include "plshield/shield/shield.hpp"
#include "support/genprog.hpp"
#include "support/programs.hpp"

using namespace plshield;
using namespace plshield::shield;
namespace ts = plshield::testsupport;

namespace {

const CompiledShield& ghost_shield() {
  static const CompiledShield s = CompiledShield::from_text(ts::kGhostShield);
  return s;
}

const CompiledShield& car_shield() {
  static const CompiledShield s = CompiledShield::from_text(ts::kCarShield);
  return s;
}

const CompiledShield& stars_shield() {
  static const CompiledShield s = CompiledShield::from_text(ts::kStarsShield);
  return s;
}

double shielded_safety(const ShieldDecision& d) {
  double out = 0.0;
  for (size_t a = 0; a < d.shielded.size(); ++a) out += d.shielded[a] * d.action_safety[a];
  return out;
}

}  // namespace

TEST_CASE("car shield caches one circuit per query") {
  const auto& s = car_shield();
  CHECK(s.num_actions() == 5);
  CHECK(s.num_sensors() == 3);
  CHECK(s.circuit_count() == 11);
}

TEST_CASE("vacuously safe program shields nothing") {
  const CompiledShield s =
      CompiledShield::from_text("#actions act(a), act(b).\n#sensors s0.\nsafe.\n");
  CHECK(s.warnings().size() >= 2);  // both actions unused, sensor irrelevant
  Rng rng(1);
  const auto d = s.decide(ts::random_policy(rng, 2), SensorReading{{0.7}});
  CHECK(d.action_safety[0] == doctest::Approx(1.0));
  CHECK(d.action_safety[1] == doctest::Approx(1.0));
}

TEST_CASE("staying is always safe under the one-step grid shield") {
  const auto& s = stars_shield();
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto d = s.decide(ts::random_policy(rng, 5), ts::random_reading(rng, 4));
    CHECK(d.action_safety[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("ghost crossing decision matches the hand computation") {
  const auto& s = ghost_shield();
  const PolicyDistribution pi{{0.2, 0.6, 0.2}};
  const SensorReading h{{0.8, 0.1}};
  const ShieldDecision d = s.decide(pi, h);
  CHECK(d.action_safety[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(d.action_safety[1] == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(d.action_safety[2] == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(d.policy_safety == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(d.shielded[0] == doctest::Approx(0.40).epsilon(1e-9));
  CHECK(d.shielded[1] == doctest::Approx(0.24).epsilon(1e-9));
  CHECK(d.shielded[2] == doctest::Approx(0.36).epsilon(1e-9));
  CHECK(!d.fallback);
}

TEST_CASE("uniform safety leaves the policy unchanged") {
  const CompiledShield s = CompiledShield::from_text(
      "#actions act(a), act(b), act(c).\n#sensors s0.\n"
      "0.35::crash :- act(a), s0.\n0.35::crash :- act(b), s0.\n0.35::crash :- act(c), s0.\n"
      "safe :- not(crash).\n");
  Rng rng(6);
  const PolicyDistribution pi = ts::random_policy(rng, 3);
  const ShieldDecision d = s.decide(pi, SensorReading{{0.4}});
  for (size_t a = 0; a < 3; ++a)
    CHECK(d.shielded[a] == doctest::Approx(pi.probs[a]).epsilon(1e-9));
}

TEST_CASE("shielding discourages accelerating toward an obstacle") {
  const auto& s = car_shield();
  const PolicyDistribution pi{{0.1, 0.5, 0.1, 0.1, 0.2}};
  const SensorReading h{{0.8, 0.2, 0.5}};
  const ShieldDecision d = s.decide(pi, h);
  CHECK(d.shielded[1] < 0.5);  // accelerate gets suppressed
  CHECK(d.shielded[2] > 0.1);  // braking gains mass
  CHECK(d.action_safety[1] == doctest::Approx(0.28).epsilon(1e-9));
}

TEST_CASE("policy safety gradient equals the action safeties") {
  const auto& s = ghost_shield();
  const auto [d, g] =
      s.decide_with_gradients(PolicyDistribution{{0.2, 0.6, 0.2}}, SensorReading{{0.8, 0.1}});
  CHECK(g.d_policy_safety[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(g.d_policy_safety[1] == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(g.d_policy_safety[2] == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("uniformly safe shield passes gradients through unchanged") {
  const CompiledShield s =
      CompiledShield::from_text("#actions act(a), act(b), act(c).\n#sensors s0.\nsafe.\n");
  const PolicyDistribution pi{{0.3, 0.5, 0.2}};
  const auto [d, g] = s.decide_with_gradients(pi, SensorReading{{0.5}});
  for (size_t a = 0; a < 3; ++a)
    CHECK(d.shielded[a] == doctest::Approx(pi.probs[a]).epsilon(1e-12));
  // The Jacobian acts as the identity on every direction that keeps the
  // total probability mass fixed (all directions a softmax can produce).
  for (size_t a = 0; a < 3; ++a) {
    for (size_t b = 0; b + 1 < 3; ++b) {
      const double jv = g.d_shielded[a][b] - g.d_shielded[a][b + 1];
      const double want = (a == b ? 1.0 : 0.0) - (a == b + 1 ? 1.0 : 0.0);
      CHECK(jv == doctest::Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("decision Jacobians match finite differences") {
  Rng rng(71);
  const double h = 1e-6;
  for (int trial = 0; trial < 25; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform_int(3));
    const int k = 2 + static_cast<int>(rng.uniform_int(4));
    const CompiledShield s = CompiledShield::from_text(ts::random_shield_text(rng, m, k));
    const PolicyDistribution pi = ts::random_policy(rng, m);
    const SensorReading reading = ts::random_reading(rng, k);
    const auto [d, g] = s.decide_with_gradients(pi, reading);
    if (d.fallback) continue;
    for (int b = 0; b < m; ++b) {
      PolicyDistribution pp = pi, pm = pi;
      pp.probs[b] += h;
      pm.probs[b] -= h;
      const ShieldDecision dp = s.decide(pp, reading);
      const ShieldDecision dm = s.decide(pm, reading);
      const double fd_ps = (dp.policy_safety - dm.policy_safety) / (2 * h);
      CHECK(std::abs(g.d_policy_safety[b] - fd_ps) < 1e-6);
      for (int a = 0; a < m; ++a) {
        const double fd = (dp.shielded[a] - dm.shielded[a]) / (2 * h);
        CHECK(std::abs(g.d_shielded[a][b] - fd) < 1e-5);
      }
    }
  }
}

TEST_CASE("readings discretize at one half") {
  const CompiledShield s = CompiledShield::from_text(
      "#actions act(a).\n#sensors s0, s1, s2, s3.\n"
      "crash :- act(a), s1.\nsafe :- not(crash).\n");
  const RejectionDecision r =
      s.rejection_decide(PolicyDistribution{{1.0}}, SensorReading{{0.6, 0.1, 0.1, 0.4}});
  // Only the 0.6 reading rounds up; it does not appear in act(a)'s clause.
  CHECK(r.safe_mask[0] == 1);
  const RejectionDecision r2 =
      s.rejection_decide(PolicyDistribution{{1.0}}, SensorReading{{0.1, 0.6, 0.1, 0.4}});
  CHECK(r2.safe_mask[0] == 0);
}

TEST_CASE("all actions safe renormalizes to the base policy") {
  const auto& s = ghost_shield();
  const PolicyDistribution pi{{0.2, 0.6, 0.2}};
  const RejectionDecision r = s.rejection_decide(pi, SensorReading{{0.2, 0.3}});
  CHECK(r.safe_mask == std::vector<uint8_t>{1, 1, 1});
  for (size_t a = 0; a < 3; ++a) CHECK(r.renormalized[a] == doctest::Approx(pi.probs[a]));
}

TEST_CASE("masked crossing renormalizes to one half each") {
  const auto& s = ghost_shield();
  const PolicyDistribution pi{{0.2, 0.6, 0.2}};
  const RejectionDecision r = s.rejection_decide(pi, SensorReading{{1.0, 0.0}});
  CHECK(r.safe_mask == std::vector<uint8_t>{1, 0, 1});
  CHECK(r.renormalized[0] == doctest::Approx(0.5));
  CHECK(r.renormalized[1] == doctest::Approx(0.0));
  CHECK(r.renormalized[2] == doctest::Approx(0.5));
}

TEST_CASE("shielding never lowers policy safety") {
  Rng rng(72);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform_int(4));
    const int k = 2 + static_cast<int>(rng.uniform_int(4));
    const CompiledShield s = CompiledShield::from_text(ts::random_shield_text(rng, m, k));
    for (int i = 0; i < 50; ++i) {
      const ShieldDecision d = s.decide(ts::random_policy(rng, m), ts::random_reading(rng, k));
      if (d.fallback) continue;
      CHECK(shielded_safety(d) >= d.policy_safety - 1e-9);
      double sum = 0.0;
      for (double p : d.shielded) sum += p;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      ++checked;
    }
  }
  CHECK(checked > 1500);
}

TEST_CASE("shielding twice never lowers safety either") {
  Rng rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    const CompiledShield s = CompiledShield::from_text(ts::random_shield_text(rng, 3, 3));
    const SensorReading h = ts::random_reading(rng, 3);
    const ShieldDecision a = s.decide(ts::random_policy(rng, 3), h);
    if (a.fallback) continue;
    const ShieldDecision b = s.decide(PolicyDistribution{a.shielded}, h);
    if (b.fallback) continue;
    CHECK(shielded_safety(b) >= shielded_safety(a) - 1e-9);
  }
}

TEST_CASE("policy safety agrees with the direct circuit query") {
  Rng rng(74);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform_int(3));
    const int k = 2 + static_cast<int>(rng.uniform_int(3));
    const CompiledShield s = CompiledShield::from_text(ts::random_shield_text(rng, m, k));
    const PolicyDistribution pi = ts::random_policy(rng, m);
    const SensorReading h = ts::random_reading(rng, k);
    const ShieldDecision d = s.decide(pi, h);
    CHECK(d.policy_safety == doctest::Approx(s.policy_safety_direct(pi, h)).epsilon(1e-9));
  }
}

TEST_CASE("hard safeties make both shields coincide exactly") {
  Rng rng(75);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform_int(4));
    const int k = 2 + static_cast<int>(rng.uniform_int(4));
    const CompiledShield s =
        CompiledShield::from_text(ts::random_shield_text(rng, m, k, /*deterministic_only=*/true));
    const PolicyDistribution pi = ts::random_policy(rng, m);
    SensorReading h;
    for (int j = 0; j < k; ++j) h.values.push_back(rng.uniform() < 0.5 ? 0.0 : 1.0);
    const ShieldDecision d = s.decide(pi, h);
    const RejectionDecision r = s.rejection_decide(pi, h);
    CHECK(d.fallback == r.fallback);
    for (int a = 0; a < m; ++a) {
      CHECK(d.action_safety[a] == doctest::Approx(r.safe_mask[a] ? 1.0 : 0.0));
      CHECK(d.shielded[a] == r.renormalized[a]);  // bitwise equal by construction
    }
  }
}

TEST_CASE("zero policy safety falls back to the base policy") {
  const CompiledShield s = CompiledShield::from_text(
      "#actions act(a), act(b).\n#sensors s0.\n"
      "crash :- act(a), s0.\ncrash :- act(b), s0.\nsafe :- not(crash).\n");
  const PolicyDistribution pi{{0.4, 0.6}};
  const ShieldDecision d = s.decide(pi, SensorReading{{1.0}});
  CHECK(d.fallback);
  CHECK(d.shielded[0] == doctest::Approx(0.4));
  CHECK(d.shielded[1] == doctest::Approx(0.6));
  const RejectionDecision r = s.rejection_decide(pi, SensorReading{{1.0}});
  CHECK(r.fallback);
  CHECK(r.renormalized[0] == doctest::Approx(0.4));
}

TEST_CASE("a shield program must define safe") {
  CHECK_THROWS_AS(
      CompiledShield::from_text("#actions act(a).\n#sensors s0.\ncrash :- act(a), s0.\n"),
      ConfigError);
}

TEST_CASE("defining an action atom in the program is rejected") {
  CHECK_THROWS_AS(
      CompiledShield::from_text("#actions act(a).\n#sensors s0.\nact(a) :- s0.\nsafe.\n"),
      ConfigError);
}

TEST_CASE("unused actions produce a warning, not an error") {
  const CompiledShield s = CompiledShield::from_text(
      "#actions act(a), act(b).\n#sensors s0.\n"
      "crash :- act(a), s0.\nsafe :- not(crash).\n");
  REQUIRE(s.warnings().size() == 1);
  CHECK(s.warnings()[0].find("act(b)") != std::string::npos);
  const ShieldDecision d = s.decide(PolicyDistribution{{0.5, 0.5}}, SensorReading{{1.0}});
  CHECK(d.action_safety[1] == doctest::Approx(1.0));
}
