#pragma once

#include <string>
#include <string_view>

#include "plshield/logic/ast.hpp"

namespace plshield::logic {

/// Parses a program text into a validated Theory.
///
/// Statement syntax, one statement per line or spanning lines, '.'-terminated,
/// '%' comments:
///   P::atom.                          probabilistic fact
///   P1::h1; ...; Pm::hm [:- body].    annotated disjunction
///   h [:- b1, ..., bn].               clause / deterministic fact
///   not(a) or \+a                     negation in bodies
///   #domain var_range(Lo, Hi).        integer domain declaration
///   #actions act(a1), ..., act(am).   shield action list
///   #sensors s1, ..., sk.             shield sensor list
///
/// Throws ParseError (with line/column) on syntax errors, probabilities
/// outside [0,1], annotated-disjunction probabilities summing above 1 + 1e-9,
/// and negation that cannot be stratified.
Theory parse(std::string_view source);

/// Parses a single ground-or-nonground atom, e.g. "safe" or "fire(0,1)".
Atom parse_atom(std::string_view text);

}  // namespace plshield::logic
