#include "sempe/seclang/taint.hpp"

#include <algorithm>

namespace sempe::seclang {

bool expr_reads_secret(const ExprPtr& e, const std::set<std::string>& secret) {
  if (!e) return false;
  switch (e->kind) {
    case Expr::Kind::num: return false;
    case Expr::Kind::var: return secret.count(e->var) != 0;
    case Expr::Kind::index:
      return secret.count(e->var) != 0 || expr_reads_secret(e->a, secret);
    case Expr::Kind::binary:
      return expr_reads_secret(e->a, secret) || expr_reads_secret(e->b, secret);
    case Expr::Kind::unary:
      return expr_reads_secret(e->a, secret);
  }
  return false;
}

bool has_secret_index(const ExprPtr& e, const std::set<std::string>& secret) {
  if (!e) return false;
  switch (e->kind) {
    case Expr::Kind::num:
    case Expr::Kind::var:
      return false;
    case Expr::Kind::index:
      return expr_reads_secret(e->a, secret) || has_secret_index(e->a, secret);
    case Expr::Kind::binary:
      return has_secret_index(e->a, secret) || has_secret_index(e->b, secret);
    case Expr::Kind::unary:
      return has_secret_index(e->a, secret);
  }
  return false;
}

std::vector<int> region_blocks(const Cfg& cfg, const std::vector<int>& ipdom,
                               int branch) {
  int join = ipdom[branch];
  std::vector<char> in(cfg.blocks.size(), 0);
  std::vector<int> work;
  const auto& bb = cfg.blocks[branch];
  for (int s : {bb.succ_then, bb.succ_else})
    if (s != join && !in[s]) {
      in[s] = 1;
      work.push_back(s);
    }
  while (!work.empty()) {
    int b = work.back();
    work.pop_back();
    for (int s : successors(cfg.blocks[b]))
      if (s != join && !in[s]) {
        in[s] = 1;
        work.push_back(s);
      }
  }
  std::vector<int> out;
  for (int b = 0; b < (int)cfg.blocks.size(); b++)
    if (in[b]) out.push_back(b);
  return out;
}

TaintResult taint(const Cfg& cfg, const Ast& ast) {
  TaintResult r;
  r.secret_branch.assign(cfg.blocks.size(), 0);
  for (const auto& d : ast.decls)
    if (d.secret) r.secret.insert(d.name);

  auto ipdom = postdominators(cfg);
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<char> pc_secret(cfg.blocks.size(), 0);
    for (int b = 0; b < (int)cfg.blocks.size(); b++) {
      const auto& bb = cfg.blocks[b];
      if (bb.term != BasicBlock::Term::branch) continue;
      if (expr_reads_secret(bb.cond, r.secret)) {
        r.secret_branch[b] = 1;
        for (int rb : region_blocks(cfg, ipdom, b)) pc_secret[rb] = 1;
      }
    }
    for (int b = 0; b < (int)cfg.blocks.size(); b++) {
      for (const auto& s : cfg.blocks[b].stmts) {
        bool tainted = pc_secret[b] || expr_reads_secret(s->value, r.secret) ||
                       (s->target_index &&
                        expr_reads_secret(s->target_index, r.secret));
        if (tainted && r.secret.insert(s->target).second) changed = true;
      }
    }
  }
  return r;
}

}  // namespace sempe::seclang
