#include "sempe/seclang/transform.hpp"

#include "sempe/seclang/cfg.hpp"
#include "sempe/seclang/taint.hpp"

namespace sempe::seclang {

namespace {

bool is_logical_node(const ExprPtr& e) {
  if (!e) return false;
  if (e->kind == Expr::Kind::binary)
    return e->bop == BinOp::land || e->bop == BinOp::lor;
  return e->kind == Expr::Kind::unary && e->uop == UnOp::lnot;
}

Block collapse_block(const Block& b, const std::set<std::string>& secret);

StmtPtr collapse_if(StmtPtr s, const std::set<std::string>& secret) {
  auto c = std::make_shared<Stmt>(*s);
  c->body = collapse_block(s->body, secret);
  c->else_body = collapse_block(s->else_body, secret);
  if (!expr_reads_secret(c->cond, secret)) return c;
  c->cond = materialize_condition(c->cond);
  // if (a) { if (b) S }  ==>  if (bool(a) & bool(b)) S
  while (c->else_body.stmts.empty() && c->body.stmts.size() == 1 &&
         c->body.stmts[0]->kind == Stmt::Kind::if_ &&
         c->body.stmts[0]->else_body.stmts.empty() &&
         expr_reads_secret(c->body.stmts[0]->cond, secret)) {
    auto inner = c->body.stmts[0];
    c->cond = Expr::binary(
        BinOp::band, Expr::unary(UnOp::boolcast, c->cond, c->line),
        Expr::unary(UnOp::boolcast, materialize_condition(inner->cond),
                    inner->line),
        c->line);
    c->body = inner->body;
  }
  return c;
}

Block collapse_block(const Block& b, const std::set<std::string>& secret) {
  Block out;
  for (const auto& s : b.stmts) {
    switch (s->kind) {
      case Stmt::Kind::if_:
        out.stmts.push_back(collapse_if(s, secret));
        break;
      case Stmt::Kind::while_: {
        auto c = std::make_shared<Stmt>(*s);
        c->body = collapse_block(s->body, secret);
        out.stmts.push_back(std::move(c));
        break;
      }
      default:
        out.stmts.push_back(s);
    }
  }
  return out;
}

}  // namespace

Ast collapse_nesting(const Ast& ast, const std::set<std::string>& secret) {
  Ast out;
  out.decls = ast.decls;
  for (const auto& p : ast.procs) {
    ProcDef np;
    np.name = p.name;
    np.line = p.line;
    np.body = collapse_block(p.body, secret);
    out.procs.push_back(std::move(np));
  }
  return out;
}

namespace {

constexpr int kMaxAtoms = 6;

class CteRewriter {
 public:
  CteRewriter(const Ast& ast, const std::set<std::string>& secret)
      : ast_(ast), secret_(secret) {
    for (const auto& d : ast.decls) used_.insert(d.name);
  }

  TransformResult run() {
    TransformResult r;
    r.ast.decls = ast_.decls;
    const ProcDef* main = ast_.find_proc("main");
    if (!main) {
      r.diags.push_back({1, "missing proc main"});
      return r;
    }
    ProcDef np;
    np.name = "main";
    np.line = main->line;
    np.body = rewrite_block(main->body, {});
    r.diags = std::move(diags_);
    if (!r.diags.empty()) return r;
    for (const auto& t : temps_) {
      Decl d;
      d.name = t;
      r.ast.decls.push_back(d);
    }
    r.ast.procs.push_back(std::move(np));
    r.ok = true;
    return r;
  }

 private:
  void fail(int line, std::string msg) {
    if (diags_.empty()) diags_.push_back({line, std::move(msg)});
  }

  std::string fresh(const char* stem) {
    std::string name;
    do {
      name = stem + std::to_string(counter_++);
    } while (used_.count(name));
    used_.insert(name);
    temps_.push_back(name);
    return name;
  }

  void check_expr(const ExprPtr& e, int line) {
    if (has_secret_index(e, secret_))
      fail(line, "array index depends on a secret");
  }

  StmtPtr make_assign(std::string target, ExprPtr value, int line) {
    auto s = std::make_shared<Stmt>();
    s->kind = Stmt::Kind::assign;
    s->target = std::move(target);
    s->value = std::move(value);
    s->line = line;
    return s;
  }

  // Maximal non-logical subtrees, left to right. The logical skeleton above
  // them decides which truth assignments select each arm.
  void collect_atoms(const ExprPtr& e, std::vector<ExprPtr>& atoms) {
    if (is_logical_node(e)) {
      collect_atoms(e->a, atoms);
      if (e->kind == Expr::Kind::binary) collect_atoms(e->b, atoms);
      return;
    }
    atoms.push_back(e);
  }

  // Atom leaves consume bits in the same left-to-right order collect_atoms
  // produced them.
  bool eval_skeleton(const ExprPtr& e, unsigned bits, size_t& next) {
    if (is_logical_node(e)) {
      if (e->kind == Expr::Kind::unary) return !eval_skeleton(e->a, bits, next);
      bool a = eval_skeleton(e->a, bits, next);
      bool b = eval_skeleton(e->b, bits, next);
      return e->bop == BinOp::land ? (a && b) : (a || b);
    }
    return (bits >> next++) & 1u;
  }

  // Sum over the minterms with the wanted truth value. Each minterm is a
  // product of b_i and (1 - b_i) factors over the hoisted atom temps.
  ExprPtr minterm_sum(const ExprPtr& cond, const std::vector<std::string>& bs,
                      bool want, int line) {
    ExprPtr sum;
    for (unsigned bits = 0; bits < (1u << bs.size()); bits++) {
      size_t next = 0;
      if (eval_skeleton(cond, bits, next) != want) continue;
      ExprPtr term;
      for (size_t i = 0; i < bs.size(); i++) {
        ExprPtr factor = Expr::variable(bs[i], line);
        if (!((bits >> i) & 1u))
          factor = Expr::binary(BinOp::sub, Expr::number(1, line), factor, line);
        term = term ? Expr::binary(BinOp::mul, term, factor, line) : factor;
      }
      if (!term) term = Expr::number(want ? 1 : 0, line);
      sum = sum ? Expr::binary(BinOp::add, sum, term, line) : term;
    }
    return sum ? sum : Expr::number(0, line);
  }

  ExprPtr guard_product(const std::vector<ExprPtr>& guards, int line) {
    ExprPtr g;
    for (const auto& f : guards)
      g = g ? Expr::binary(BinOp::mul, g, f, line) : f;
    return g;
  }

  Block rewrite_block(const Block& b, std::vector<ExprPtr> guards) {
    Block out;
    for (const auto& s : b.stmts) {
      if (!diags_.empty()) return out;
      switch (s->kind) {
        case Stmt::Kind::assign: {
          check_expr(s->value, s->line);
          if (s->target_index) check_expr(s->target_index, s->line);
          if (s->target_index && expr_reads_secret(s->target_index, secret_))
            fail(s->line, "array index depends on a secret");
          if (guards.empty()) {
            out.stmts.push_back(s);
            break;
          }
          std::string g = fresh("_g");
          out.stmts.push_back(
              make_assign(g, guard_product(guards, s->line), s->line));
          ExprPtr old = s->target_index
                            ? Expr::index(s->target, s->target_index, s->line)
                            : Expr::variable(s->target, s->line);
          ExprPtr gv = Expr::variable(g, s->line);
          ExprPtr keep = Expr::binary(
              BinOp::mul,
              Expr::binary(BinOp::sub, Expr::number(1, s->line), gv, s->line),
              old, s->line);
          ExprPtr take = Expr::binary(BinOp::mul, gv, s->value, s->line);
          auto ns = std::make_shared<Stmt>(*s);
          ns->value = Expr::binary(BinOp::add, take, keep, s->line);
          out.stmts.push_back(std::move(ns));
          break;
        }
        case Stmt::Kind::if_: {
          check_expr(s->cond, s->line);
          if (!expr_reads_secret(s->cond, secret_)) {
            auto ns = std::make_shared<Stmt>(*s);
            ns->body = rewrite_block(s->body, guards);
            ns->else_body = rewrite_block(s->else_body, guards);
            out.stmts.push_back(std::move(ns));
            break;
          }
          std::vector<ExprPtr> atoms;
          collect_atoms(s->cond, atoms);
          if ((int)atoms.size() > kMaxAtoms) {
            fail(s->line, "secret condition has too many atoms");
            break;
          }
          std::vector<std::string> bs;
          for (const auto& a : atoms) {
            std::string b_name = fresh("_b");
            out.stmts.push_back(make_assign(
                b_name, Expr::unary(UnOp::boolcast, a, s->line), s->line));
            bs.push_back(b_name);
          }
          auto then_guards = guards;
          then_guards.push_back(minterm_sum(s->cond, bs, true, s->line));
          Block then_b = rewrite_block(s->body, then_guards);
          out.stmts.insert(out.stmts.end(), then_b.stmts.begin(),
                           then_b.stmts.end());
          if (!s->else_body.stmts.empty()) {
            auto else_guards = guards;
            else_guards.push_back(minterm_sum(s->cond, bs, false, s->line));
            Block else_b = rewrite_block(s->else_body, else_guards);
            out.stmts.insert(out.stmts.end(), else_b.stmts.begin(),
                             else_b.stmts.end());
          }
          break;
        }
        case Stmt::Kind::while_: {
          check_expr(s->cond, s->line);
          if (expr_reads_secret(s->cond, secret_)) {
            fail(s->line, "loop condition depends on a secret");
            break;
          }
          auto ns = std::make_shared<Stmt>(*s);
          ns->body = rewrite_block(s->body, guards);
          out.stmts.push_back(std::move(ns));
          break;
        }
        case Stmt::Kind::call:
          fail(s->line, "call survived inlining");
          break;
      }
    }
    return out;
  }

  const Ast& ast_;
  const std::set<std::string>& secret_;
  std::set<std::string> used_;
  std::vector<std::string> temps_;
  std::vector<Diag> diags_;
  int counter_ = 0;
};

int count_expr_ops(const ExprPtr& e) {
  if (!e) return 0;
  int n = 0;
  if (e->kind == Expr::Kind::binary) {
    if (e->bop == BinOp::add || e->bop == BinOp::sub || e->bop == BinOp::mul)
      n = 1;
    return n + count_expr_ops(e->a) + count_expr_ops(e->b);
  }
  if (e->kind == Expr::Kind::unary || e->kind == Expr::Kind::index)
    return count_expr_ops(e->a);
  return 0;
}

int count_block_ops(const Block& b) {
  int n = 0;
  for (const auto& s : b.stmts) {
    n += count_expr_ops(s->value) + count_expr_ops(s->cond) +
         count_expr_ops(s->target_index);
    n += count_block_ops(s->body) + count_block_ops(s->else_body);
  }
  return n;
}

}  // namespace

TransformResult transform_cte(const Ast& ast,
                              const std::set<std::string>& secret) {
  return CteRewriter(ast, secret).run();
}

int count_arith_ops(const Ast& ast) {
  int n = 0;
  for (const auto& p : ast.procs) n += count_block_ops(p.body);
  return n;
}

}  // namespace sempe::seclang
