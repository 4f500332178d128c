#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "plshield/circuit/circuit.hpp"
#include "plshield/common.hpp"
#include "plshield/envs/lookahead.hpp"
#include "plshield/shield/shield.hpp"
#include "plshield/harness/runner.hpp"
#include "plshield/logic/parser.hpp"

namespace {

using namespace plshield;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Grounds and compiles `query` (optionally joint with `evidence`) from a
/// program file; returns the circuits plus the default valuation.
struct CompiledQuery {
  logic::GroundProgram gp;
  wmc::Circuit query;
  std::optional<wmc::Circuit> joint;
  std::optional<wmc::Circuit> evidence;
};

CompiledQuery compile_query(const std::string& program_path, const std::string& query_text,
                            const std::string& evidence_text) {
  // Directive-bearing programs are completed the way the shield layer would:
  // a uniform action choice plus 0.5 placeholder sensors.
  logic::Theory theory = shield::complete_directives(logic::parse(read_file(program_path)));
  const logic::Atom query = logic::parse_atom(query_text);
  CompiledQuery out;
  if (evidence_text.empty()) {
    out.gp = logic::ground(theory, query);
    out.query = wmc::compile(out.gp);
    return out;
  }
  const logic::Atom evidence = logic::parse_atom(evidence_text);
  logic::Clause joint;
  joint.head = logic::Atom{"__joint", {}};
  joint.body.push_back({false, query});
  joint.body.push_back({false, evidence});
  theory.clauses.push_back(joint);
  out.gp = logic::ground_multi(theory, {logic::Atom{"__joint", {}}, query, evidence});
  auto vars = wmc::VarTable::from(out.gp);
  out.joint = wmc::compile_atom(out.gp, *out.gp.atom_id("__joint"), vars);
  out.evidence = wmc::compile_atom(out.gp, *out.gp.atom_id(evidence.str()), vars);
  out.query = wmc::compile_atom(out.gp, *out.gp.atom_id(query.str()), vars);
  return out;
}

int cmd_compile(const std::string& program, const std::string& query, const std::string& dump) {
  const CompiledQuery cq = compile_query(program, query, "");
  std::cout << "atoms: " << cq.gp.atom_names.size() << "\n"
            << "facts: " << cq.gp.facts.size() << "\n"
            << "choices: " << cq.gp.ads.size() << "\n"
            << "rules: " << cq.gp.rules.size() << "\n"
            << "circuit nodes: " << cq.query.size() << "\n";
  if (!dump.empty()) {
    std::ofstream out(dump);
    if (!out) throw ConfigError("cannot write '" + dump + "'");
    out << cq.query.dump();
    std::cout << "circuit dumped to " << dump << "\n";
  }
  return 0;
}

int cmd_query(const std::string& program, const std::string& query,
              const std::string& evidence) {
  const CompiledQuery cq = compile_query(program, query, evidence);
  const wmc::Valuation v = wmc::Valuation::defaults(cq.gp);
  double p;
  if (evidence.empty()) {
    p = cq.query.evaluate(v);
  } else {
    p = wmc::conditional(*cq.joint, *cq.evidence, v);
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", p);
  std::cout << buf << "\n";
  return 0;
}

int cmd_train(const std::string& spec_path) {
  const harness::RunSpec spec = harness::RunSpec::from_file(spec_path);
  const harness::RunSummary s = harness::run(spec);
  std::cout << "algorithm: " << s.algorithm << "\n"
            << "seeds: " << s.per_seed.size() << "\n"
            << "mean trailing return: " << s.mean_trailing_return << "\n"
            << "mean violations: " << s.mean_violations << "\n"
            << "summary: " << s.summary_path << "\n";
  return 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& param,
              const std::vector<double>& values) {
  const harness::RunSpec spec = harness::RunSpec::from_file(spec_path);
  const harness::SweepResult sr = harness::sweep(spec, param, values);
  std::cout << param << " sweep over " << sr.values.size() << " values\n";
  for (size_t i = 0; i < sr.values.size(); ++i)
    std::cout << "  " << param << "=" << sr.values[i]
              << "  return=" << sr.summaries[i].mean_trailing_return
              << "  violations=" << sr.summaries[i].mean_violations << "\n";
  return 0;
}

int cmd_lookahead(const std::string& domain_name, const std::string& horizons_text,
                  const std::string& out_path) {
  envs::Domain domain;
  if (domain_name == "stars")
    domain = envs::Domain::Stars;
  else if (domain_name == "pacman")
    domain = envs::Domain::Pacman;
  else
    throw ConfigError("--domain must be stars or pacman");
  std::vector<int> horizons;
  for (double v : harness::parse_double_list(horizons_text)) horizons.push_back(static_cast<int>(v));
  const auto rows = harness::lookahead_report(domain, horizons);
  const std::string table = harness::lookahead_table(rows);
  std::cout << table;
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw ConfigError("cannot write '" + out_path + "'");
    out << table;
  }
  return 0;
}

int cmd_compare(const std::vector<std::string>& summaries, const std::string& out_path) {
  std::string csv;
  const std::string table = harness::compare(summaries, &csv);
  std::cout << table;
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw ConfigError("cannot write '" + out_path + "'");
    out << csv;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic logic shields for safe policy-gradient learning"};
  app.require_subcommand(1);

  std::string program, query_text, evidence, dump, spec_path, param, domain, horizons, out_path;
  std::vector<double> values;
  std::vector<std::string> summaries;

  auto* compile = app.add_subcommand("compile", "Ground and compile a program's query circuit");
  compile->add_option("program", program, "program file")->required();
  compile->add_option("--query", query_text, "query atom")->required();
  compile->add_option("--dump", dump, "write the circuit dump here");

  auto* query = app.add_subcommand("query", "Evaluate a (conditional) success probability");
  query->add_option("program", program, "program file")->required();
  query->add_option("--query", query_text, "query atom")->required();
  query->add_option("--evidence", evidence, "evidence atom");

  auto* train = app.add_subcommand("train", "Train per the run specification");
  train->add_option("runspec", spec_path, "run specification file")->required();

  auto* sweep = app.add_subcommand("sweep", "Re-run the spec over a hyperparameter grid");
  sweep->add_option("runspec", spec_path, "run specification file")->required();
  sweep->add_option("--param", param, "alpha or epsilon")->required();
  sweep->add_option("--values", values, "grid values (defaults to the standard grid)");

  auto* lookahead = app.add_subcommand("lookahead", "Multi-step look-ahead cost report");
  lookahead->add_option("--domain", domain, "stars or pacman")->required();
  lookahead->add_option("--horizons", horizons, "comma-separated horizons, e.g. 1,2,3")->required();
  lookahead->add_option("--out", out_path, "also write the CSV table here");

  auto* compare = app.add_subcommand("compare", "Tabulate return/violation across summaries");
  compare->add_option("summaries", summaries, "summary.json files")->required()->expected(-2);
  compare->add_option("--out", out_path, "also write the CSV report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (compile->parsed()) return cmd_compile(program, query_text, dump);
    if (query->parsed()) return cmd_query(program, query_text, evidence);
    if (train->parsed()) return cmd_train(spec_path);
    if (sweep->parsed()) return cmd_sweep(spec_path, param, values);
    if (lookahead->parsed()) return cmd_lookahead(domain, horizons, out_path);
    if (compare->parsed()) return cmd_compare(summaries, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
