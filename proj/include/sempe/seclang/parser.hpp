#pragma once

#include <string_view>

#include "sempe/seclang/ast.hpp"

namespace sempe::seclang {

struct ParseResult {
  bool ok = false;
  Ast ast;
  std::vector<Diag> diags;
};

// Grammar sketch:
//   program := (decl | proc)*
//   decl    := ['@secret'] 'int' name ['[' number ']'] ['=' number] ';'
//   proc    := 'proc' name '(' ')' block
//   block   := '{' stmt* '}'
//   stmt    := 'if' '(' expr ')' block ['else' (block | if-stmt)]
//            | 'while' '(' expr ')' block
//            | name '(' ')' ';'
//            | name ['[' expr ']'] '=' expr ';'
// Operators by rising precedence: || && | ^ & (== !=) < (<< >>) (+ -) (* /)
// and unary ! - bool(). Division and shift amounts must be integer literals
// (division additionally nonzero), so no arithmetic can fault at runtime.
ParseResult parse(std::string_view source);

}  // namespace sempe::seclang
