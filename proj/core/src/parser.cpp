#include "plshield/logic/parser.hpp"

#include <cctype>
#include <cstdlib>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "plshield/common.hpp"

namespace plshield::logic {

namespace {

enum class Tok {
  Symbol,
  Var,
  Number,
  Turnstile,   // :-
  DoubleColon, // ::
  LParen,
  RParen,
  Comma,
  Semicolon,
  Dot,
  Plus,
  Minus,
  NafBackslash,  // \+
  Hash,
  End,
};

struct Token {
  Tok kind;
  std::string text;
  int line;
  int col;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      if (pos_ >= src_.size()) break;
      const int line = line_, col = col_;
      const char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        out.push_back({Tok::Number, lex_number(), line, col});
      } else if (std::islower(static_cast<unsigned char>(c))) {
        out.push_back({Tok::Symbol, lex_name(), line, col});
      } else if (std::isupper(static_cast<unsigned char>(c)) || c == '_') {
        out.push_back({Tok::Var, lex_name(), line, col});
      } else if (c == ':' && peek(1) == ':') {
        advance(2);
        out.push_back({Tok::DoubleColon, "::", line, col});
      } else if (c == ':' && peek(1) == '-') {
        advance(2);
        out.push_back({Tok::Turnstile, ":-", line, col});
      } else if (c == '\\' && peek(1) == '+') {
        advance(2);
        out.push_back({Tok::NafBackslash, "\\+", line, col});
      } else {
        advance(1);
        switch (c) {
          case '(': out.push_back({Tok::LParen, "(", line, col}); break;
          case ')': out.push_back({Tok::RParen, ")", line, col}); break;
          case ',': out.push_back({Tok::Comma, ",", line, col}); break;
          case ';': out.push_back({Tok::Semicolon, ";", line, col}); break;
          case '.': out.push_back({Tok::Dot, ".", line, col}); break;
          case '+': out.push_back({Tok::Plus, "+", line, col}); break;
          case '-': out.push_back({Tok::Minus, "-", line, col}); break;
          case '#': out.push_back({Tok::Hash, "#", line, col}); break;
          default:
            throw ParseError(std::string("unexpected character '") + c + "'", line, col);
        }
      }
    }
    out.push_back({Tok::End, "", line_, col_});
    return out;
  }

 private:
  char peek(size_t k) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }

  void advance(size_t n) {
    for (size_t i = 0; i < n && pos_ < src_.size(); ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_space() {
    for (;;) {
      while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance(1);
      if (pos_ < src_.size() && src_[pos_] == '%') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance(1);
        continue;
      }
      break;
    }
  }

  std::string lex_name() {
    const size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      advance(1);
    return std::string(src_.substr(start, pos_ - start));
  }

  std::string lex_number() {
    const size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance(1);
    // A '.' belongs to the number only when a digit follows; otherwise it
    // terminates the statement.
    if (pos_ < src_.size() && src_[pos_] == '.' &&
        std::isdigit(static_cast<unsigned char>(peek(1)))) {
      advance(1);
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance(1);
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      size_t k = 1;
      if (peek(1) == '+' || peek(1) == '-') k = 2;
      if (std::isdigit(static_cast<unsigned char>(peek(k)))) {
        advance(k);
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance(1);
      }
    }
    return std::string(src_.substr(start, pos_ - start));
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Theory run() {
    Theory theory;
    while (cur().kind != Tok::End) {
      if (cur().kind == Tok::Hash) {
        parse_directive(theory);
      } else {
        parse_statement(theory);
      }
    }
    return theory;
  }

  Atom parse_single_atom() {
    Atom a = parse_atom_inner();
    if (cur().kind == Tok::Dot) next();
    expect(Tok::End, "end of input");
    return a;
  }

 private:
  const Token& cur() const { return toks_[idx_]; }
  const Token& next() { return toks_[idx_++]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, cur().line, cur().col);
  }

  Token expect(Tok kind, const std::string& what) {
    if (cur().kind != kind) fail("expected " + what);
    return next();
  }

  void parse_directive(Theory& theory) {
    next();  // '#'
    const Token name = expect(Tok::Symbol, "directive name");
    if (name.text == "domain") {
      Atom a = parse_atom_inner();
      if (a.pred != "var_range" || a.arity() != 2 || a.args[0].kind != Term::Kind::Int ||
          a.args[1].kind != Term::Kind::Int)
        fail("expected var_range(Lo, Hi)");
      if (a.args[0].int_value > a.args[1].int_value) fail("empty variable range");
      theory.int_domain = {a.args[0].int_value, a.args[1].int_value};
    } else if (name.text == "actions" || name.text == "sensors") {
      std::vector<Atom> atoms;
      for (;;) {
        Atom a = parse_atom_inner();
        if (!a.is_ground()) fail("directive atoms must be ground");
        atoms.push_back(std::move(a));
        if (cur().kind != Tok::Comma) break;
        next();
      }
      if (name.text == "actions")
        theory.actions = std::move(atoms);
      else
        theory.sensors = std::move(atoms);
    } else {
      fail("unknown directive '#" + name.text + "'");
    }
    expect(Tok::Dot, "'.'");
  }

  void parse_statement(Theory& theory) {
    const int line = cur().line;
    std::vector<ADHead> heads;
    bool annotated = false;

    if (cur().kind == Tok::Number || cur().kind == Tok::Minus) {
      annotated = true;
      for (;;) {
        const Token& at = cur();
        double p = parse_probability();
        expect(Tok::DoubleColon, "'::'");
        Atom a = parse_atom_inner();
        if (p < 0.0 || p > 1.0)
          throw ParseError("probability out of [0,1]", at.line, at.col);
        heads.push_back({p, std::move(a)});
        if (cur().kind != Tok::Semicolon) break;
        next();
      }
    }

    Atom plain_head;
    if (!annotated) plain_head = parse_atom_inner();

    std::vector<Literal> body;
    if (cur().kind == Tok::Turnstile) {
      next();
      for (;;) {
        body.push_back(parse_literal());
        if (cur().kind != Tok::Comma) break;
        next();
      }
    }
    expect(Tok::Dot, "'.'");

    if (!annotated) {
      theory.clauses.push_back({std::move(plain_head), std::move(body), line});
      return;
    }
    if (heads.size() == 1 && body.empty()) {
      theory.facts.push_back({heads[0].prob, std::move(heads[0].atom), line});
      return;
    }
    double sum = 0.0;
    for (const auto& h : heads) sum += h.prob;
    if (sum > 1.0 + 1e-9)
      throw ParseError("annotated disjunction probabilities sum to " + std::to_string(sum) +
                           " > 1",
                       line, 1);
    for (size_t i = 0; i < heads.size(); ++i)
      for (size_t j = i + 1; j < heads.size(); ++j)
        if (heads[i].atom == heads[j].atom)
          throw ParseError("duplicate head '" + heads[i].atom.str() + "' in annotated disjunction",
                           line, 1);
    theory.ads.push_back({std::move(heads), std::move(body), line});
  }

  double parse_probability() {
    bool neg = false;
    if (cur().kind == Tok::Minus) {
      neg = true;
      next();
    }
    const Token t = expect(Tok::Number, "probability");
    const double v = std::strtod(t.text.c_str(), nullptr);
    return neg ? -v : v;
  }

  Literal parse_literal() {
    if (cur().kind == Tok::NafBackslash) {
      next();
      return {true, parse_atom_inner()};
    }
    if (cur().kind == Tok::Symbol && cur().text == "not" && toks_[idx_ + 1].kind == Tok::LParen) {
      next();
      next();
      Atom a = parse_atom_inner();
      expect(Tok::RParen, "')'");
      return {true, std::move(a)};
    }
    return {false, parse_atom_inner()};
  }

  Atom parse_atom_inner() {
    const Token name = expect(Tok::Symbol, "predicate symbol");
    Atom a;
    a.pred = name.text;
    if (cur().kind == Tok::LParen) {
      next();
      for (;;) {
        a.args.push_back(parse_term());
        if (cur().kind != Tok::Comma) break;
        next();
      }
      expect(Tok::RParen, "')'");
    }
    return a;
  }

  Term parse_term() {
    LinearExpr expr;
    bool has_const_sym = false;
    std::string const_sym;
    int sign = 1;
    if (cur().kind == Tok::Minus) {
      sign = -1;
      next();
    } else if (cur().kind == Tok::Plus) {
      next();
    }
    for (;;) {
      const Token t = cur();
      if (t.kind == Tok::Number) {
        next();
        if (t.text.find('.') != std::string::npos || t.text.find('e') != std::string::npos ||
            t.text.find('E') != std::string::npos)
          throw ParseError("non-integer value in term position", t.line, t.col);
        expr.constant += sign * std::strtol(t.text.c_str(), nullptr, 10);
      } else if (t.kind == Tok::Var) {
        next();
        expr.vars.emplace_back(t.text, sign);
      } else if (t.kind == Tok::Symbol) {
        next();
        if (sign < 0) throw ParseError("cannot negate a constant symbol", t.line, t.col);
        if (has_const_sym || !expr.vars.empty() || expr.constant != 0)
          throw ParseError("arithmetic over non-integer constant '" + t.text + "'", t.line,
                           t.col);
        has_const_sym = true;
        const_sym = t.text;
      } else {
        fail("expected term");
      }
      if (cur().kind == Tok::Plus) {
        if (has_const_sym) fail("arithmetic over non-integer constant");
        sign = 1;
        next();
      } else if (cur().kind == Tok::Minus) {
        if (has_const_sym) fail("arithmetic over non-integer constant");
        sign = -1;
        next();
      } else {
        break;
      }
    }
    if (has_const_sym) return Term::constant(const_sym);
    return Term::expression(std::move(expr));
  }

  std::vector<Token> toks_;
  size_t idx_ = 0;
};

struct PredKey {
  std::string pred;
  size_t arity;
  bool operator<(const PredKey& o) const {
    return pred != o.pred ? pred < o.pred : arity < o.arity;
  }
  bool operator==(const PredKey&) const = default;
};

/// Rejects negation cycles at the predicate level: a strongly connected
/// component of the dependency graph must not contain a negative edge.
void check_stratification(const Theory& theory) {
  std::map<PredKey, int> ids;
  auto id_of = [&](const Atom& a) {
    auto [it, inserted] = ids.emplace(PredKey{a.pred, a.arity()}, static_cast<int>(ids.size()));
    return it->second;
  };
  struct Edge {
    int from, to;
    bool negated;
    int line;
  };
  std::vector<Edge> edges;
  auto add_edges = [&](const Atom& head, const std::vector<Literal>& body, int line) {
    const int h = id_of(head);
    for (const auto& lit : body) edges.push_back({h, id_of(lit.atom), lit.negated, line});
  };
  for (const auto& c : theory.clauses) add_edges(c.head, c.body, c.line);
  for (const auto& ad : theory.ads)
    for (const auto& h : ad.heads) add_edges(h.atom, ad.body, ad.line);

  const int n = static_cast<int>(ids.size());
  std::vector<std::vector<int>> adj(n);
  for (const auto& e : edges) adj[e.from].push_back(e.to);

  // Tarjan SCC.
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  int counter = 0, ncomp = 0;
  struct Frame {
    int v;
    size_t child;
  };
  for (int start = 0; start < n; ++start) {
    if (index[start] != -1) continue;
    std::vector<Frame> frames{{start, 0}};
    index[start] = low[start] = counter++;
    stack.push_back(start);
    on_stack[start] = true;
    while (!frames.empty()) {
      auto& [v, child] = frames.back();
      if (child < adj[v].size()) {
        const int w = adj[v][child++];
        if (index[w] == -1) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      } else {
        if (low[v] == index[v]) {
          for (;;) {
            const int w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            comp[w] = ncomp;
            if (w == v) break;
          }
          ++ncomp;
        }
        const int v_done = v;
        frames.pop_back();
        if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v_done]);
      }
    }
  }
  for (const auto& e : edges) {
    if (e.negated && comp[e.from] == comp[e.to])
      throw ParseError("unstratifiable negation through '" +
                           [&] {
                             for (const auto& [k, v] : ids)
                               if (v == e.to) return k.pred;
                             return std::string();
                           }() +
                           "'",
                       e.line, 1);
  }
}

void validate_theory(const Theory& theory) {
  for (const auto& f : theory.facts) {
    if (!f.atom.is_ground())
      throw ParseError("probabilistic fact '" + f.atom.str() + "' must be ground", f.line, 1);
    for (const auto& c : theory.clauses) {
      // Ground identity; non-ground heads are checked again per instance at
      // grounding time.
      if (c.head.is_ground() && f.atom == c.head)
        throw ParseError("probabilistic fact '" + f.atom.str() + "' is also a clause head",
                         f.line, 1);
    }
  }
  for (const auto& ad : theory.ads) {
    if (ad.body.empty()) {
      for (const auto& h : ad.heads)
        if (!h.atom.is_ground())
          throw ParseError("annotated-disjunction head '" + h.atom.str() +
                               "' must be ground when the body is empty",
                           ad.line, 1);
    } else {
      // Head variables must be bound by the body.
      std::vector<std::string> body_vars;
      for (const auto& lit : ad.body)
        if (!lit.negated) lit.atom.collect_vars(body_vars);
      for (const auto& h : ad.heads) {
        std::vector<std::string> head_vars;
        h.atom.collect_vars(head_vars);
        for (const auto& v : head_vars) {
          bool found = false;
          for (const auto& bv : body_vars) found |= bv == v;
          if (!found)
            throw ParseError("variable " + v + " in head '" + h.atom.str() +
                                 "' not bound by a positive body literal",
                             ad.line, 1);
        }
      }
    }
    for (const auto& h : ad.heads)
      if (h.prob < 0.0)
        throw ParseError("negative head probability", ad.line, 1);
  }
  check_stratification(theory);
}

}  // namespace

Theory parse(std::string_view source) {
  Lexer lexer(source);
  Parser parser(lexer.run());
  Theory theory = parser.run();
  validate_theory(theory);
  return theory;
}

Atom parse_atom(std::string_view text) {
  Lexer lexer(text);
  Parser parser(lexer.run());
  return parser.parse_single_atom();
}

}  // namespace plshield::logic
