#pragma once

#include <set>

#include "sempe/seclang/cfg.hpp"

namespace sempe::seclang {

struct TaintResult {
  std::set<std::string> secret;      // variables carrying secret data
  std::vector<char> secret_branch;   // per block: branch condition is secret
};

// Fixpoint over explicit flows (secret operand taints the assignment target,
// whole arrays taint as a unit) and implicit flows (any assignment between a
// secret branch and its join taints its target). Branch classification only
// ever grows, so the result is the least fixpoint.
TaintResult taint(const Cfg& cfg, const Ast& ast);

bool expr_reads_secret(const ExprPtr& e, const std::set<std::string>& secret);

// True if the expression contains an array access whose subscript reads a
// secret. Address-dependent lookups leak through the memory trace no matter
// how branches are handled, so callers reject these outright.
bool has_secret_index(const ExprPtr& e, const std::set<std::string>& secret);

// Blocks strictly between a branch and its join: everything reachable from
// either arm without passing through ipdom[branch].
std::vector<int> region_blocks(const Cfg& cfg, const std::vector<int>& ipdom,
                               int branch);

}  // namespace sempe::seclang
