#pragma once

#include <optional>

#include "sempe/seclang/ast.hpp"

namespace sempe::seclang {

// Blocks hold straight-line assignments only. Control structure lives in the
// terminators. For a branch, succ_then is taken when cond evaluates nonzero
// and is always laid out as the fall-through arm.
struct BasicBlock {
  std::vector<StmtPtr> stmts;
  enum class Term { jump, branch, exit };
  Term term = Term::exit;
  ExprPtr cond;        // branch only
  int succ_then = -1;  // cond != 0
  int succ_else = -1;  // cond == 0
  int succ = -1;       // jump
  bool loop_header = false;
  int line = 0;
};

struct Cfg {
  std::vector<BasicBlock> blocks;
  int entry = 0;
  int exit = -1;
};

struct LowerResult {
  bool ok = false;
  Cfg cfg;
  std::vector<Diag> diags;
};

// Rewrites ||, && and ! at the top of if conditions into nested ifs with
// duplicated arms, so every branch tests a single value and every arm body
// has exactly one entry edge. Loop conditions get their logical operators
// materialized as 0/1 arithmetic instead (the loop shape is kept intact).
Block normalize_conditions(const Block& b);

// Truthiness-preserving branch-free form of a condition: || becomes bitwise
// or, && and ! go through 0/1 folds. Non-logical expressions pass through.
ExprPtr materialize_condition(const ExprPtr& e);

// Inlined AST in, CFG out. Arms are emitted then-first, so a branch block's
// fall-through order is: cond block, then-arm, else-arm, join.
LowerResult lower(const Ast& ast);

// Immediate postdominator per block, computed over the reversed graph with
// the exit as root. ipdom[exit] == exit.
std::vector<int> postdominators(const Cfg& cfg);

std::vector<std::vector<int>> predecessors(const Cfg& cfg);
std::vector<int> successors(const BasicBlock& b);

}  // namespace sempe::seclang
