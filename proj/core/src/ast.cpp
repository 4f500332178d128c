#include "plshield/logic/ast.hpp"

#include <sstream>

namespace plshield::logic {

Term Term::integer(long v) {
  Term t;
  t.kind = Kind::Int;
  t.int_value = v;
  return t;
}

Term Term::constant(std::string name) {
  Term t;
  t.kind = Kind::Const;
  t.name = std::move(name);
  return t;
}

Term Term::variable(std::string name) {
  Term t;
  t.kind = Kind::Var;
  t.name = std::move(name);
  return t;
}

Term Term::expression(LinearExpr e) {
  // Merge repeated variables, drop zero coefficients, collapse degenerate forms.
  std::vector<std::pair<std::string, int>> vars;
  for (auto& [v, c] : e.vars) {
    bool merged = false;
    for (auto& [v2, c2] : vars) {
      if (v2 == v) {
        c2 += c;
        merged = true;
        break;
      }
    }
    if (!merged) vars.emplace_back(v, c);
  }
  std::erase_if(vars, [](const auto& p) { return p.second == 0; });
  e.vars = std::move(vars);
  if (e.vars.empty()) return integer(e.constant);
  if (e.vars.size() == 1 && e.vars[0].second == 1 && e.constant == 0)
    return variable(e.vars[0].first);
  Term t;
  t.kind = Kind::Expr;
  t.expr = std::move(e);
  return t;
}

void Term::collect_vars(std::vector<std::string>& out) const {
  if (kind == Kind::Var) {
    out.push_back(name);
  } else if (kind == Kind::Expr) {
    for (const auto& [v, c] : expr.vars) out.push_back(v);
  }
}

std::string Term::str() const {
  switch (kind) {
    case Kind::Int:
      return std::to_string(int_value);
    case Kind::Const:
    case Kind::Var:
      return name;
    case Kind::Expr: {
      std::string s;
      bool first = true;
      for (const auto& [v, c] : expr.vars) {
        if (c >= 0 && !first) s += "+";
        if (c < 0) s += "-";
        s += v;
        first = false;
      }
      if (expr.constant > 0) s += "+" + std::to_string(expr.constant);
      if (expr.constant < 0) s += std::to_string(expr.constant);
      return s;
    }
  }
  return {};
}

bool Atom::is_ground() const {
  for (const auto& a : args)
    if (!a.is_ground()) return false;
  return true;
}

void Atom::collect_vars(std::vector<std::string>& out) const {
  for (const auto& a : args) a.collect_vars(out);
}

std::string Atom::str() const {
  if (args.empty()) return pred;
  std::string s = pred + "(";
  for (size_t i = 0; i < args.size(); ++i) {
    if (i) s += ",";
    s += args[i].str();
  }
  return s + ")";
}

std::string Literal::str() const {
  return negated ? "not(" + atom.str() + ")" : atom.str();
}

namespace {

std::string prob_str(double p) {
  std::ostringstream os;
  os.precision(17);
  os << p;
  return os.str();
}

void append_body(std::string& s, const std::vector<Literal>& body) {
  if (body.empty()) return;
  s += " :- ";
  for (size_t i = 0; i < body.size(); ++i) {
    if (i) s += ", ";
    s += body[i].str();
  }
}

}  // namespace

std::string serialize(const Theory& theory) {
  std::string out;
  if (theory.int_domain) {
    out += "#domain var_range(" + std::to_string(theory.int_domain->first) + ", " +
           std::to_string(theory.int_domain->second) + ").\n";
  }
  if (!theory.actions.empty()) {
    out += "#actions ";
    for (size_t i = 0; i < theory.actions.size(); ++i) {
      if (i) out += ", ";
      out += theory.actions[i].str();
    }
    out += ".\n";
  }
  if (!theory.sensors.empty()) {
    out += "#sensors ";
    for (size_t i = 0; i < theory.sensors.size(); ++i) {
      if (i) out += ", ";
      out += theory.sensors[i].str();
    }
    out += ".\n";
  }
  for (const auto& f : theory.facts) {
    out += prob_str(f.prob) + "::" + f.atom.str() + ".\n";
  }
  for (const auto& ad : theory.ads) {
    std::string s;
    for (size_t i = 0; i < ad.heads.size(); ++i) {
      if (i) s += "; ";
      s += prob_str(ad.heads[i].prob) + "::" + ad.heads[i].atom.str();
    }
    append_body(s, ad.body);
    out += s + ".\n";
  }
  for (const auto& c : theory.clauses) {
    std::string s = c.head.str();
    append_body(s, c.body);
    out += s + ".\n";
  }
  return out;
}

}  // namespace plshield::logic
