#pragma once

#include <set>

#include "sempe/seclang/ast.hpp"

namespace sempe::seclang {

// Rewrites secret branch shapes to cut the number of secure branches a run
// pushes: logical conditions become branch-free 0/1 arithmetic under a single
// branch, and a secret if whose sole content is another secret if (no elses)
// folds into one branch over the conjunction. Public branches are left alone;
// they cost nothing extra.
Ast collapse_nesting(const Ast& ast, const std::set<std::string>& secret);

struct TransformResult {
  bool ok = false;
  Ast ast;
  std::vector<Diag> diags;
};

// Branch-free baseline: removes every secret branch by predicating the
// assignments under it. Condition atoms are hoisted into 0/1 temps, the arm
// guard is a sum over the satisfying minterms of those temps, and each
// assignment x = e under accumulated guard g becomes
//   _g = <guard product>; x = _g * (e) + (1 - _g) * x;
// The guard product is rebuilt per assignment, so cost grows with nesting
// depth. Rejects secret loop conditions and secret-indexed accesses; caps
// conditions at 6 atoms.
TransformResult transform_cte(const Ast& ast,
                              const std::set<std::string>& secret);

// Counts add/sub/mul nodes over every statement tree, shared subtrees
// counted per occurrence. Used to compare baseline costs.
int count_arith_ops(const Ast& ast);

}  // namespace sempe::seclang
