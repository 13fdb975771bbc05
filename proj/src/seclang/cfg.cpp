#include "sempe/seclang/cfg.hpp"

#include <algorithm>
#include <cassert>

namespace sempe::seclang {

namespace {

bool is_logical(const ExprPtr& e) {
  if (!e) return false;
  if (e->kind == Expr::Kind::binary)
    return e->bop == BinOp::land || e->bop == BinOp::lor;
  return e->kind == Expr::Kind::unary && e->uop == UnOp::lnot;
}

StmtPtr make_if(ExprPtr cond, Block then_b, Block else_b, int line) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::if_;
  s->cond = std::move(cond);
  s->body = std::move(then_b);
  s->else_body = std::move(else_b);
  s->line = line;
  return s;
}

// Splits top-level || and && into nested ifs, duplicating the arm that both
// outcomes share. Sharing an arm block between two branches is not an option
// here: each branch's bookkeeping pairs with the join it dominates, and a
// shared arm would be reached under two different pending branches.
StmtPtr split_if(ExprPtr cond, Block then_b, Block else_b, int line) {
  while (cond && cond->kind == Expr::Kind::unary && cond->uop == UnOp::lnot) {
    cond = cond->a;
    std::swap(then_b, else_b);
  }
  if (cond && cond->kind == Expr::Kind::binary && cond->bop == BinOp::lor) {
    Block inner;
    inner.stmts.push_back(
        split_if(cond->b, clone(then_b), std::move(else_b), line));
    return split_if(cond->a, std::move(then_b), std::move(inner), line);
  }
  if (cond && cond->kind == Expr::Kind::binary && cond->bop == BinOp::land) {
    Block inner;
    inner.stmts.push_back(
        split_if(cond->b, std::move(then_b), clone(else_b), line));
    return split_if(cond->a, std::move(inner), std::move(else_b), line);
  }
  return make_if(std::move(cond), std::move(then_b), std::move(else_b), line);
}

}  // namespace

// OR can stay bitwise on raw values; AND and NOT need both sides folded to
// 0/1 first.
ExprPtr materialize_condition(const ExprPtr& e) {
  if (!is_logical(e)) return e;
  if (e->kind == Expr::Kind::unary)
    return Expr::binary(
        BinOp::bxor,
        Expr::unary(UnOp::boolcast, materialize_condition(e->a), e->line),
        Expr::number(1, e->line), e->line);
  if (e->bop == BinOp::lor)
    return Expr::binary(BinOp::bor, materialize_condition(e->a),
                        materialize_condition(e->b), e->line);
  return Expr::binary(
      BinOp::band,
      Expr::unary(UnOp::boolcast, materialize_condition(e->a), e->line),
      Expr::unary(UnOp::boolcast, materialize_condition(e->b), e->line),
      e->line);
}

Block normalize_conditions(const Block& b) {
  Block out;
  for (const auto& s : b.stmts) {
    switch (s->kind) {
      case Stmt::Kind::if_: {
        Block then_b = normalize_conditions(s->body);
        Block else_b = normalize_conditions(s->else_body);
        if (is_logical(s->cond)) {
          out.stmts.push_back(
              split_if(s->cond, std::move(then_b), std::move(else_b), s->line));
        } else {
          out.stmts.push_back(make_if(s->cond, std::move(then_b),
                                      std::move(else_b), s->line));
        }
        break;
      }
      case Stmt::Kind::while_: {
        auto c = clone(s);
        c->cond = materialize_condition(s->cond);
        c->body = normalize_conditions(s->body);
        out.stmts.push_back(std::move(c));
        break;
      }
      default:
        out.stmts.push_back(s);
    }
  }
  return out;
}

namespace {

class Lowerer {
 public:
  LowerResult run(const Ast& ast) {
    LowerResult r;
    const ProcDef* main = ast.find_proc("main");
    if (!main) {
      r.diags.push_back({1, "missing proc main"});
      return r;
    }
    Block body = normalize_conditions(main->body);
    int end = lower_block(body, new_block());
    blocks_[end].term = BasicBlock::Term::exit;
    r.cfg.blocks = std::move(blocks_);
    r.cfg.entry = 0;
    r.cfg.exit = end;
    r.diags = std::move(diags_);
    r.ok = r.diags.empty();
    return r;
  }

 private:
  int new_block() {
    blocks_.emplace_back();
    return (int)blocks_.size() - 1;
  }

  int lower_block(const Block& b, int cur) {
    for (const auto& s : b.stmts) {
      switch (s->kind) {
        case Stmt::Kind::assign:
          blocks_[cur].stmts.push_back(s);
          break;
        case Stmt::Kind::call:
          diags_.push_back({s->line, "call survived inlining"});
          break;
        case Stmt::Kind::if_: {
          blocks_[cur].term = BasicBlock::Term::branch;
          blocks_[cur].cond = s->cond;
          blocks_[cur].line = s->line;
          int then_entry = new_block();
          blocks_[cur].succ_then = then_entry;
          int then_end = lower_block(s->body, then_entry);
          int else_entry = new_block();
          blocks_[cur].succ_else = else_entry;
          int else_end = lower_block(s->else_body, else_entry);
          int join = new_block();
          blocks_[then_end].term = BasicBlock::Term::jump;
          blocks_[then_end].succ = join;
          blocks_[else_end].term = BasicBlock::Term::jump;
          blocks_[else_end].succ = join;
          cur = join;
          break;
        }
        case Stmt::Kind::while_: {
          int header = new_block();
          blocks_[cur].term = BasicBlock::Term::jump;
          blocks_[cur].succ = header;
          blocks_[header].term = BasicBlock::Term::branch;
          blocks_[header].cond = s->cond;
          blocks_[header].loop_header = true;
          blocks_[header].line = s->line;
          int body_entry = new_block();
          blocks_[header].succ_then = body_entry;
          int body_end = lower_block(s->body, body_entry);
          blocks_[body_end].term = BasicBlock::Term::jump;
          blocks_[body_end].succ = header;
          int after = new_block();
          blocks_[header].succ_else = after;
          cur = after;
          break;
        }
      }
    }
    return cur;
  }

  std::vector<BasicBlock> blocks_;
  std::vector<Diag> diags_;
};

}  // namespace

LowerResult lower(const Ast& ast) {
  return Lowerer().run(ast);
}

std::vector<int> successors(const BasicBlock& b) {
  switch (b.term) {
    case BasicBlock::Term::branch: return {b.succ_then, b.succ_else};
    case BasicBlock::Term::jump: return {b.succ};
    case BasicBlock::Term::exit: return {};
  }
  return {};
}

std::vector<std::vector<int>> predecessors(const Cfg& cfg) {
  std::vector<std::vector<int>> preds(cfg.blocks.size());
  for (int b = 0; b < (int)cfg.blocks.size(); b++)
    for (int s : successors(cfg.blocks[b])) preds[s].push_back(b);
  return preds;
}

// Cooper/Harvey/Kennedy dominators over the reversed graph.
std::vector<int> postdominators(const Cfg& cfg) {
  int n = (int)cfg.blocks.size();
  auto preds = predecessors(cfg);

  // Postorder of the reversed graph, rooted at exit and walking pred edges.
  std::vector<int> order;
  std::vector<char> seen(n, 0);
  std::vector<std::pair<int, size_t>> stack;
  stack.push_back({cfg.exit, 0});
  seen[cfg.exit] = 1;
  while (!stack.empty()) {
    auto& [b, i] = stack.back();
    if (i < preds[b].size()) {
      int p = preds[b][i++];
      if (!seen[p]) {
        seen[p] = 1;
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(b);
      stack.pop_back();
    }
  }
  assert((int)order.size() == n && "all blocks must reach the exit");

  std::vector<int> rpo_num(n, -1);
  std::vector<int> rpo(order.rbegin(), order.rend());
  for (int i = 0; i < n; i++) rpo_num[rpo[i]] = i;

  std::vector<int> ipdom(n, -1);
  ipdom[cfg.exit] = cfg.exit;
  auto intersect = [&](int u, int v) {
    while (u != v) {
      while (rpo_num[u] > rpo_num[v]) u = ipdom[u];
      while (rpo_num[v] > rpo_num[u]) v = ipdom[v];
    }
    return u;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int b : rpo) {
      if (b == cfg.exit) continue;
      int idom = -1;
      for (int s : successors(cfg.blocks[b])) {
        if (ipdom[s] == -1) continue;
        idom = idom == -1 ? s : intersect(idom, s);
      }
      if (idom != -1 && ipdom[b] != idom) {
        ipdom[b] = idom;
        changed = true;
      }
    }
  }
  return ipdom;
}

}  // namespace sempe::seclang
