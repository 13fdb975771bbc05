#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sempe/isa.hpp"

namespace sempe::seclang {

enum class BinOp {
  add, sub, mul, divc,   // divc: rhs is a nonzero integer literal
  band, bor, bxor,
  shl, shr,              // shift amount is an integer literal
  lt, eq, ne,
  land, lor,             // logical; value is 0/1
};

enum class UnOp { neg, lnot, boolcast };

struct Expr;
using ExprPtr = std::shared_ptr<Expr>;

// Expression trees are immutable once built; transforms share subtrees
// freely and clone only when a fresh line number matters.
struct Expr {
  enum class Kind { num, var, index, binary, unary };
  Kind kind = Kind::num;
  int64_t num = 0;
  std::string var;  // variable name; array base for index
  ExprPtr a, b;     // binary operands; index subscript in a; unary operand in a
  BinOp bop = BinOp::add;
  UnOp uop = UnOp::neg;
  int line = 0;

  static ExprPtr number(int64_t v, int line = 0);
  static ExprPtr variable(std::string name, int line = 0);
  static ExprPtr index(std::string base, ExprPtr sub, int line = 0);
  static ExprPtr binary(BinOp op, ExprPtr lhs, ExprPtr rhs, int line = 0);
  static ExprPtr unary(UnOp op, ExprPtr operand, int line = 0);
};

struct Stmt;
using StmtPtr = std::shared_ptr<Stmt>;

struct Block {
  std::vector<StmtPtr> stmts;
};

struct Stmt {
  enum class Kind { assign, if_, while_, call };
  Kind kind = Kind::assign;
  // assign
  std::string target;
  ExprPtr target_index;  // null for scalar targets
  ExprPtr value;
  // if_/while_ (while_ uses body as the loop body)
  ExprPtr cond;
  Block body;
  Block else_body;
  // call
  std::string callee;
  int line = 0;
};

struct Decl {
  std::string name;
  bool secret = false;
  int64_t array_size = 0;  // 0 for scalars
  int64_t init = 0;
  int line = 0;
};

struct ProcDef {
  std::string name;
  Block body;
  int line = 0;
};

struct Ast {
  std::vector<Decl> decls;
  std::vector<ProcDef> procs;  // execution starts at "main"

  const Decl* find_decl(const std::string& name) const;
  const ProcDef* find_proc(const std::string& name) const;
};

Block clone(const Block& b);
StmtPtr clone(const StmtPtr& s);

// Replaces call statements with cloned callee bodies. Fails on recursion or
// unknown callees.
struct InlineResult {
  bool ok = false;
  Ast ast;
  std::vector<Diag> diags;
};
InlineResult inline_calls(const Ast& ast);

}  // namespace sempe::seclang
