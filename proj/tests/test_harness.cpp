#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "plshield/common.hpp"
#include "plshield/harness/runner.hpp"
#include "support/programs.hpp"

using namespace plshield;
using namespace plshield::harness;
namespace fs = std::filesystem;
namespace ts = plshield::testsupport;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("plshield_harness_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int counter() {
    static int n = 0;
    return n++;
  }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = path / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
};

std::string tiny_spec(const std::string& algorithm, const std::string& extra = "") {
  return "env.domain = stars\n"
         "env.width = 4\n"
         "env.height = 4\n"
         "env.start = 0,0\n"
         "env.stars = 3,3\n"
         "env.fires = 1,1\n"
         "env.max_steps = 30\n"
         "env.return_hi = 11\n"
         "env.violation_hi = 100\n"
         "trainer.algorithm = " + algorithm + "\n"
         "trainer.lr = 0.2\n"
         "trainer.gamma = 0.99\n"
         "run.total_steps = 600\n"
         "run.seeds = 1,2\n"
         "run.shield = stars.pl\n" + extra;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// step,episode,return,violations columns only (drops safety columns so
/// shielded and unshielded runs can be compared).
std::string core_columns(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    int commas = 0;
    std::string kept;
    for (char c : line) {
      if (c == ',') ++commas;
      if (commas >= 5) break;
      kept += c;
    }
    out += kept + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("key-value configs parse and fingerprint") {
  const KvConfig kv = KvConfig::from_text("a = 1\n# comment\nb.c = hello  # tail\n\n");
  CHECK(kv.get_long("a", 0) == 1);
  CHECK(kv.get("b.c") == "hello");
  CHECK_THROWS_AS(kv.get("missing"), ConfigError);
  CHECK_THROWS_AS(KvConfig::from_text("oops\n"), ConfigError);
  const KvConfig other = KvConfig::from_text("b.c = hello\na = 1\n");
  CHECK(kv.fingerprint() == other.fingerprint());
}

TEST_CASE("cell lists parse") {
  const auto cells = parse_cells("1,2; 3,4 ; 0,0");
  REQUIRE(cells.size() == 3);
  CHECK(cells[1] == std::pair<int, int>{3, 4});
  CHECK_THROWS_AS(parse_cells("1;2"), ConfigError);
}

TEST_CASE("run specs validate") {
  TempDir dir;
  dir.file("stars.pl", ts::kStarsShield);
  const RunSpec spec = RunSpec::from_file(dir.file("spec.cfg", tiny_spec("plpg")));
  CHECK(spec.env.width == 4);
  CHECK(spec.trainer.algorithm == agents::Algorithm::Plpg);
  CHECK(spec.seeds == std::vector<uint64_t>{1, 2});
  CHECK(!spec.shield_path.empty());

  CHECK_THROWS_AS(RunSpec::from_kv(KvConfig::from_text("run.seeds =\n"), ""), ConfigError);
  CHECK_THROWS_AS(
      RunSpec::from_kv(KvConfig::from_text("trainer.algorithm = plpg\n"), ""), ConfigError);
}

TEST_CASE("training writes one CSV per seed plus a summary") {
  TempDir dir;
  dir.file("stars.pl", ts::kStarsShield);
  RunSpec spec = RunSpec::from_file(dir.file("spec.cfg", tiny_spec("pg")));
  spec.out_dir = (dir.path / "out").string();
  const RunSummary s = run(spec);
  CHECK(fs::exists(dir.path / "out" / "seed_1.csv"));
  CHECK(fs::exists(dir.path / "out" / "seed_2.csv"));
  CHECK(fs::exists(dir.path / "out" / "summary.json"));
  // Final policies are checkpointed next to the metrics.
  const auto ckpt =
      agents::load_checkpoint((dir.path / "out" / "seed_1.ckpt").string());
  CHECK(ckpt.n_actions == 5);
  CHECK(s.per_seed.size() == 2);
  for (const auto& seed : s.per_seed) {
    CHECK(seed.steps >= spec.total_steps);
    CHECK(seed.episodes > 0);
    CHECK(static_cast<long>(seed.rows.size()) == seed.episodes);
    // Metric integrity: the cumulative column matches the counted flags.
    CHECK(seed.rows.back().cumulative_violations == seed.violations);
    long prev = 0;
    for (const auto& row : seed.rows) {
      CHECK(row.cumulative_violations >= prev);
      prev = row.cumulative_violations;
    }
  }
  const RunSummary loaded = read_summary(s.summary_path);
  CHECK(loaded.algorithm == "pg");
  CHECK(loaded.per_seed.size() == 2);
  CHECK(loaded.mean_violations == doctest::Approx(s.mean_violations));
}

TEST_CASE("normalized return clips into the unit interval") {
  TempDir dir;
  dir.file("stars.pl", ts::kStarsShield);
  RunSpec spec = RunSpec::from_file(dir.file("spec.cfg", tiny_spec("pg")));
  spec.out_dir = (dir.path / "out").string();
  const RunSummary s = run(spec);
  for (const auto& seed : s.per_seed) {
    for (const auto& row : seed.rows) {
      CHECK(row.normalized_return >= 0.0);
      CHECK(row.normalized_return <= 1.0);
      const double expected =
          std::min(1.0, std::max(0.0, (row.episodic_return - spec.env.return_lo) /
                                          (spec.env.return_hi - spec.env.return_lo)));
      CHECK(row.normalized_return == doctest::Approx(expected));
    }
  }
}

TEST_CASE("repeated runs are byte-identical") {
  TempDir dir;
  dir.file("stars.pl", ts::kStarsShield);
  RunSpec spec = RunSpec::from_file(dir.file("spec.cfg", tiny_spec("plpg")));
  spec.out_dir = (dir.path / "a").string();
  run(spec);
  spec.out_dir = (dir.path / "b").string();
  run(spec);
  for (const char* f : {"seed_1.csv", "seed_2.csv"}) {
    const std::string a = read_file((dir.path / "a" / f).string());
    const std::string b = read_file((dir.path / "b" / f).string());
    CHECK(a == b);
    CHECK(!a.empty());
  }
}

TEST_CASE("epsilon one behaves exactly like the plain gradient") {
  TempDir dir;
  dir.file("stars.pl", ts::kStarsShield);
  RunSpec pg_spec = RunSpec::from_file(dir.file("spec_pg.cfg", tiny_spec("pg")));
  pg_spec.out_dir = (dir.path / "pg").string();
  run(pg_spec);
  RunSpec eps_spec = RunSpec::from_file(
      dir.file("spec_eps.cfg", tiny_spec("eps-vsrl", "trainer.epsilon = 1.0\n")));
  eps_spec.out_dir = (dir.path / "eps").string();
  run(eps_spec);
  for (const char* f : {"seed_1.csv", "seed_2.csv"}) {
    const std::string a = core_columns(read_file((dir.path / "pg" / f).string()));
    const std::string b = core_columns(read_file((dir.path / "eps" / f).string()));
    CHECK(a == b);
  }
}

TEST_CASE("epsilon zero behaves exactly like the rejection baseline") {
  TempDir dir;
  dir.file("stars.pl", ts::kStarsShield);
  RunSpec v_spec = RunSpec::from_file(dir.file("spec_v.cfg", tiny_spec("vsrl")));
  v_spec.out_dir = (dir.path / "vsrl").string();
  run(v_spec);
  RunSpec eps_spec = RunSpec::from_file(
      dir.file("spec_eps.cfg", tiny_spec("eps-vsrl", "trainer.epsilon = 0.0\n")));
  eps_spec.out_dir = (dir.path / "eps").string();
  run(eps_spec);
  for (const char* f : {"seed_1.csv", "seed_2.csv"}) {
    const std::string a = read_file((dir.path / "vsrl" / f).string());
    const std::string b = read_file((dir.path / "eps" / f).string());
    CHECK(a == b);
  }
}

TEST_CASE("sweeps cover the default grids") {
  TempDir dir;
  dir.file("stars.pl", ts::kStarsShield);
  RunSpec spec = RunSpec::from_file(dir.file("spec.cfg", tiny_spec("plpg")));
  spec.total_steps = 120;
  spec.seeds = {1};
  spec.out_dir = (dir.path / "sweep").string();
  const SweepResult sr = sweep(spec, "alpha");
  CHECK(sr.values == kDefaultAlphaGrid);
  CHECK(sr.summaries.size() == 5);
  CHECK(fs::exists(dir.path / "sweep" / "sweep.json"));
  CHECK_THROWS_AS(sweep(spec, "gamma"), ConfigError);
}

TEST_CASE("comparison tabulates return and violation") {
  TempDir dir;
  dir.file("stars.pl", ts::kStarsShield);
  RunSpec pg_spec = RunSpec::from_file(dir.file("s1.cfg", tiny_spec("pg")));
  pg_spec.out_dir = (dir.path / "pg").string();
  const RunSummary a = run(pg_spec);
  RunSpec plpg_spec = RunSpec::from_file(dir.file("s2.cfg", tiny_spec("plpg")));
  plpg_spec.out_dir = (dir.path / "plpg").string();
  const RunSummary b = run(plpg_spec);

  std::string csv;
  const std::string table = compare({a.summary_path, b.summary_path}, &csv);
  CHECK(table.find("pg") != std::string::npos);
  CHECK(table.find("plpg") != std::string::npos);
  CHECK(csv.find("algorithm,alpha,epsilon,mean_return,mean_violation") == 0);
  CHECK(csv.find("return_1") != std::string::npos);

  // Self-comparison carries identical numbers.
  const std::string self = compare({a.summary_path, a.summary_path}, nullptr);
  std::istringstream in(self);
  std::string header, r1, r2;
  std::getline(in, header);
  std::getline(in, r1);
  std::getline(in, r2);
  CHECK(r1 == r2);
}

TEST_CASE("comparison refuses mismatched environments") {
  TempDir dir;
  dir.file("stars.pl", ts::kStarsShield);
  RunSpec a_spec = RunSpec::from_file(dir.file("a.cfg", tiny_spec("pg")));
  a_spec.out_dir = (dir.path / "a").string();
  const RunSummary a = run(a_spec);
  RunSpec b_spec =
      RunSpec::from_file(dir.file("b.cfg", tiny_spec("pg", "env.step_penalty = -0.2\n")));
  b_spec.out_dir = (dir.path / "b").string();
  const RunSummary b = run(b_spec);
  CHECK_THROWS_AS(compare({a.summary_path, b.summary_path}, nullptr), ConfigError);
}

TEST_CASE("look-ahead report covers the requested horizons") {
  const auto rows = lookahead_report(envs::Domain::Pacman, {1, 2});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].sensors == 4);
  CHECK(rows[1].sensors == 12);
  CHECK(!rows[0].over_budget);
  CHECK(rows[1].circuit_nodes > rows[0].circuit_nodes);
  const std::string table = lookahead_table(rows);
  CHECK(table.find("horizon,sensors,circuit_nodes") == 0);
}

TEST_CASE("auto-generated shields train too") {
  TempDir dir;
  const std::string spec_text =
      "env.domain = pacman\n"
      "env.width = 4\nenv.height = 4\n"
      "env.start = 0,0\nenv.stars = 3,3\nenv.fires = 2,2\n"
      "env.max_steps = 25\n"
      "trainer.algorithm = plpg\n"
      "run.total_steps = 200\nrun.seeds = 1\nrun.horizon = 1\n"
      "run.shield_auto = pacman\n";
  RunSpec spec = RunSpec::from_file(dir.file("spec.cfg", spec_text));
  spec.out_dir = (dir.path / "out").string();
  const RunSummary s = run(spec);
  CHECK(s.per_seed[0].steps >= 200);
}
