#include <functional>
#include <random>
#include <set>

#include "doctest.h"
#include "sempe/seclang/cfg.hpp"
#include "sempe/seclang/parser.hpp"
#include "sempe/seclang/taint.hpp"
#include "sempe/seclang/transform.hpp"
#include "support/interp.hpp"

using namespace sempe;
using namespace sempe::seclang;
using sempe::testing::interpret;

namespace {

Ast parse_ok(const std::string& src) {
  auto r = parse(src);
  REQUIRE_MESSAGE(r.ok, format_diags(r.diags));
  return r.ast;
}

Ast with_main_body(Ast ast, Block b) {
  for (auto& p : ast.procs)
    if (p.name == "main") p.body = std::move(b);
  return ast;
}

bool logical_top(const ExprPtr& e) {
  if (e->kind == Expr::Kind::binary)
    return e->bop == BinOp::land || e->bop == BinOp::lor;
  return e->kind == Expr::Kind::unary && e->uop == UnOp::lnot;
}

void for_each_if(const Block& b, const std::function<void(const Stmt&)>& fn) {
  for (const auto& s : b.stmts) {
    if (s->kind == Stmt::Kind::if_) {
      fn(*s);
      for_each_if(s->body, fn);
      for_each_if(s->else_body, fn);
    } else if (s->kind == Stmt::Kind::while_) {
      for_each_if(s->body, fn);
    }
  }
}

// Quadratic reference: B postdominates A exactly when removing B cuts every
// path from A to the exit. The immediate one is the member of that set no
// other member can reach the exit without.
std::vector<int> oracle_ipdom(const Cfg& cfg) {
  const int n = static_cast<int>(cfg.blocks.size());
  auto reaches_exit_avoiding = [&](int from, int avoid) {
    std::vector<char> seen(n, 0);
    std::vector<int> work{from};
    while (!work.empty()) {
      int b = work.back();
      work.pop_back();
      if (b == avoid || seen[b]) continue;
      seen[b] = 1;
      if (b == cfg.exit) return true;
      for (int s : successors(cfg.blocks[b])) work.push_back(s);
    }
    return false;
  };
  std::vector<std::set<int>> sp(n);
  for (int a = 0; a < n; a++) {
    if (a == cfg.exit) continue;
    for (int b = 0; b < n; b++)
      if (b != a && !reaches_exit_avoiding(a, b)) sp[a].insert(b);
  }
  std::vector<int> ipdom(n, -1);
  ipdom[cfg.exit] = cfg.exit;
  for (int a = 0; a < n; a++) {
    if (a == cfg.exit) continue;
    for (int b : sp[a]) {
      bool dominated_elsewhere = false;
      for (int c : sp[a])
        if (c != b && sp[c].count(b)) dominated_elsewhere = true;
      if (!dominated_elsewhere) {
        ipdom[a] = b;
        break;
      }
    }
  }
  return ipdom;
}

// Structured statement soup for exercising the lowerer from every shape.
struct AstFuzzer {
  std::mt19937_64 rng;
  int pick(int n) { return static_cast<int>(rng() % static_cast<uint64_t>(n)); }

  ExprPtr cond() {
    switch (pick(5)) {
      case 0: return Expr::variable("c");
      case 1: return Expr::binary(BinOp::land, Expr::variable("c"), Expr::variable("d"));
      case 2: return Expr::binary(BinOp::lor, Expr::variable("c"), Expr::variable("d"));
      case 3: return Expr::unary(UnOp::lnot, Expr::variable("c"));
      default: return Expr::binary(BinOp::lt, Expr::variable("c"), Expr::number(3));
    }
  }

  StmtPtr assign() {
    auto s = std::make_shared<Stmt>();
    s->kind = Stmt::Kind::assign;
    s->target = "x";
    s->value = Expr::number(pick(9));
    return s;
  }

  Block block(int depth) {
    Block b;
    int n = 1 + pick(3);
    for (int i = 0; i < n; i++) {
      int kind = depth > 0 ? pick(4) : 0;
      if (kind == 0) {
        b.stmts.push_back(assign());
        continue;
      }
      auto s = std::make_shared<Stmt>();
      s->cond = cond();
      if (kind == 1) {
        s->kind = Stmt::Kind::if_;
        s->body = block(depth - 1);
      } else if (kind == 2) {
        s->kind = Stmt::Kind::if_;
        s->body = block(depth - 1);
        s->else_body = block(depth - 1);
      } else {
        s->kind = Stmt::Kind::while_;
        s->body = block(depth - 1);
      }
      b.stmts.push_back(std::move(s));
    }
    return b;
  }

  Ast ast() {
    Ast a;
    for (const char* n : {"c", "d", "x"}) a.decls.push_back({n, false, 0, 0, 0});
    a.procs.push_back({"main", block(3), 0});
    return a;
  }
};

}  // namespace

TEST_CASE("expression precedence and operator semantics") {
  struct Case {
    const char* expr;
    uint64_t want;
  };
  const Case cases[] = {
      {"1 + 2 * 3", 7},
      {"(1 + 2) * 3", 9},
      {"1 ^ 3 & 2", 3},
      {"4 | 1 ^ 1", 4},
      {"3 + 1 << 2", 16},
      {"2 < 1 << 3", 1},
      {"1 == 2 < 3", 1},
      {"7 != 7 == 0", 1},
      {"3 && 0 || 1", 1},
      {"0 || 2", 1},
      {"5 && 2", 1},
      {"-3 + 1", static_cast<uint64_t>(-2)},
      {"!5", 0},
      {"!0", 1},
      {"bool(7)", 1},
      {"bool(0)", 0},
      {"0x10 + 1", 17},
      {"-7 / 2", static_cast<uint64_t>(-3)},
      {"15 >> 2", 3},
      {"1 - 2", ~0ull},
      {"3 << 62", 0xC000000000000000ull},
  };
  for (const auto& c : cases) {
    INFO("expr: " << c.expr);
    auto ast = parse_ok(std::string("int x;\nproc main() { x = ") + c.expr + "; }");
    auto r = interpret(ast);
    REQUIRE_MESSAGE(r.ok, r.error);
    CHECK(r.scalar("x") == c.want);
  }
}

TEST_CASE("declarations carry secrecy, initializers, and array sizes") {
  auto ast = parse_ok(
      "@secret int s;\n"
      "int x = -5;\n"
      "int a[4];\n"
      "proc main() { a[1] = x + s; x = a[1]; }\n");
  REQUIRE(ast.find_decl("s"));
  CHECK(ast.find_decl("s")->secret);
  CHECK(!ast.find_decl("x")->secret);
  CHECK(ast.find_decl("x")->init == -5);
  CHECK(ast.find_decl("a")->array_size == 4);
  auto r = interpret(ast, {{"s", 7}});
  REQUIRE(r.ok);
  CHECK(r.scalar("x") == 2);
}

TEST_CASE("parser rejects ill-formed programs") {
  const char* bad[] = {
      "int x; int x; proc main() {}",             // duplicate declaration
      "proc main() { x = 1; }",                   // undeclared variable
      "int x; proc f() { x = 1; }",               // no main
      "int a[3]; proc main() { a = 1; }",         // array without subscript
      "int x; proc main() { x[0] = 1; }",         // subscript on a scalar
      "int a[3]; proc main() { a[5] = 1; }",      // constant index out of range
      "int a[3]; int x; proc main() { x = a[3]; }",  // constant read out of range
      "int x; int y; proc main() { x = y << x; }",  // shift amount not literal
      "int x; proc main() { x = x << 64; }",      // shift amount too large
      "int x; int y; proc main() { x = x / y; }", // divisor not literal
      "int x; proc main() { x = x / 0; }",        // zero divisor
      "int a[2] = 1; proc main() {}",             // array initializer
      "int f; proc f() {} proc main() {}",        // name clash
      "proc f() {} proc f() {} proc main() {}",   // duplicate proc
      "int x; proc main() { x = ; }",             // missing expression
      "int x; proc main() { if x { x = 1; } }",   // missing parens
  };
  for (const char* src : bad) {
    INFO("source: " << src);
    auto r = parse(src);
    CHECK(!r.ok);
    CHECK(!r.diags.empty());
  }

  // A negative literal subscript is a unary expression, so it flows through
  // as a dynamic index and fails at evaluation time instead.
  auto dyn = parse("int a[3]; proc main() { a[-1] = 1; }");
  REQUIRE(dyn.ok);
  CHECK(!interpret(dyn.ast).ok);
}

TEST_CASE("diagnostics carry source lines") {
  auto r = parse("int x;\nint y;\nproc main() {\n  z = 1;\n}\n");
  REQUIRE(!r.ok);
  REQUIRE(!r.diags.empty());
  CHECK(r.diags[0].line == 4);
}

TEST_CASE("else-if chains parse") {
  auto ast = parse_ok(
      "int c; int x;\n"
      "proc main() {\n"
      "  if (c == 0) { x = 10; }\n"
      "  else if (c == 1) { x = 11; }\n"
      "  else { x = 12; }\n"
      "}\n");
  for (uint64_t c : {0ull, 1ull, 2ull}) {
    auto r = interpret(ast, {{"c", c}});
    REQUIRE(r.ok);
    CHECK(r.scalar("x") == 10 + std::min<uint64_t>(c, 2));
  }
}

TEST_CASE("calls inline to call-free bodies with identical behavior") {
  auto ast = parse_ok(
      "int x; int y;\n"
      "proc bump() { x = x + 2; }\n"
      "proc twice() { bump(); bump(); }\n"
      "proc main() { x = 1; twice(); bump(); y = x; }\n");
  auto inl = inline_calls(ast);
  REQUIRE_MESSAGE(inl.ok, format_diags(inl.diags));

  bool any_call = false;
  std::function<void(const Block&)> scan = [&](const Block& b) {
    for (const auto& s : b.stmts) {
      if (s->kind == Stmt::Kind::call) any_call = true;
      scan(s->body);
      scan(s->else_body);
    }
  };
  scan(inl.ast.find_proc("main")->body);
  CHECK(!any_call);

  auto a = interpret(ast);
  auto b = interpret(inl.ast);
  REQUIRE(a.ok);
  REQUIRE(b.ok);
  CHECK(a.scalar("y") == 7);
  CHECK(a.scalar("y") == b.scalar("y"));
}

TEST_CASE("recursion is rejected at inline time, unknown callees at parse") {
  auto direct = inline_calls(parse_ok("proc main() { main(); }"));
  CHECK(!direct.ok);

  auto mutual = inline_calls(parse_ok(
      "proc f() { g(); }\nproc g() { f(); }\nproc main() { f(); }\n"));
  CHECK(!mutual.ok);

  CHECK(!parse("proc main() { f(); }").ok);
}

TEST_CASE("lowering a diamond puts the then arm on the fall-through") {
  auto ast = parse_ok(
      "int c; int x; int y;\n"
      "proc main() { if (c) { x = 1; } else { x = 2; } y = 3; }\n");
  auto low = lower(ast);
  REQUIRE(low.ok);
  const Cfg& cfg = low.cfg;

  int branch = -1;
  for (int i = 0; i < static_cast<int>(cfg.blocks.size()); i++)
    if (cfg.blocks[i].term == BasicBlock::Term::branch) {
      REQUIRE(branch == -1);
      branch = i;
    }
  REQUIRE(branch >= 0);
  CHECK(cfg.blocks[branch].succ_then == branch + 1);

  auto ipdom = postdominators(cfg);
  int join = ipdom[branch];
  REQUIRE(join >= 0);
  REQUIRE(cfg.blocks[join].stmts.size() == 1);
  CHECK(cfg.blocks[join].stmts[0]->target == "y");

  auto region = region_blocks(cfg, ipdom, branch);
  std::set<int> rset(region.begin(), region.end());
  CHECK(rset.count(cfg.blocks[branch].succ_then));
  CHECK(rset.count(cfg.blocks[branch].succ_else));
  CHECK(!rset.count(join));
  CHECK(!rset.count(branch));
}

TEST_CASE("lowering a loop marks the header") {
  auto ast = parse_ok("int i;\nproc main() { while (i < 3) { i = i + 1; } }\n");
  auto low = lower(ast);
  REQUIRE(low.ok);
  const Cfg& cfg = low.cfg;

  int header = -1;
  for (int i = 0; i < static_cast<int>(cfg.blocks.size()); i++)
    if (cfg.blocks[i].loop_header) header = i;
  REQUIRE(header >= 0);
  REQUIRE(cfg.blocks[header].term == BasicBlock::Term::branch);

  int body = cfg.blocks[header].succ_then;
  CHECK(body == header + 1);
  REQUIRE(cfg.blocks[body].term == BasicBlock::Term::jump);
  CHECK(cfg.blocks[body].succ == header);

  auto ipdom = postdominators(cfg);
  CHECK(ipdom[header] == cfg.blocks[header].succ_else);
}

TEST_CASE("branch conditions normalize to single tests, arms duplicated") {
  const char* conds[] = {"a || b", "a && b", "!a", "a && !b", "!(a || b) && c",
                         "a || b || c", "a && b && c"};
  for (const char* cond : conds) {
    INFO("cond: " << cond);
    auto ast = parse_ok(std::string("int a; int b; int c; int x;\n") +
                        "proc main() { if (" + cond +
                        ") { x = 1; } else { x = 2; } }\n");
    Block norm = normalize_conditions(ast.find_proc("main")->body);
    for_each_if(norm, [&](const Stmt& s) { CHECK(!logical_top(s.cond)); });

    Ast rewritten = with_main_body(ast, norm);
    for (uint64_t a = 0; a < 3; a++)
      for (uint64_t b = 0; b < 3; b++)
        for (uint64_t cc = 0; cc < 3; cc++) {
          std::map<std::string, uint64_t> env = {
              {"a", a * 3}, {"b", b}, {"c", cc}};
          auto r0 = interpret(ast, env);
          auto r1 = interpret(rewritten, env);
          REQUIRE(r0.ok);
          REQUIRE(r1.ok);
          CHECK(r0.scalar("x") == r1.scalar("x"));
        }
  }
}

TEST_CASE("loop conditions materialize without restructuring") {
  auto ast = parse_ok(
      "int a; int b;\n"
      "proc main() { while (a && b) { a = a - 1; } }\n");
  Block norm = normalize_conditions(ast.find_proc("main")->body);
  REQUIRE(norm.stmts.size() == 1);
  REQUIRE(norm.stmts[0]->kind == Stmt::Kind::while_);
  CHECK(!logical_top(norm.stmts[0]->cond));

  Ast rewritten = with_main_body(ast, norm);
  for (uint64_t a : {0ull, 1ull, 4ull})
    for (uint64_t b : {0ull, 1ull, 9ull}) {
      auto r0 = interpret(ast, {{"a", a}, {"b", b}});
      auto r1 = interpret(rewritten, {{"a", a}, {"b", b}});
      REQUIRE(r0.ok);
      REQUIRE(r1.ok);
      CHECK(r0.scalar("a") == r1.scalar("a"));
    }
}

TEST_CASE("materialized conditions keep truthiness") {
  auto mk = [](BinOp op, ExprPtr l, ExprPtr r) { return Expr::binary(op, l, r); };
  ExprPtr a = Expr::variable("a"), b = Expr::variable("b");
  const ExprPtr exprs[] = {
      mk(BinOp::lor, a, b),
      mk(BinOp::land, a, b),
      Expr::unary(UnOp::lnot, mk(BinOp::land, a, b)),
      mk(BinOp::lor, Expr::unary(UnOp::lnot, a), mk(BinOp::land, a, b)),
      mk(BinOp::land, mk(BinOp::lor, a, b), Expr::unary(UnOp::lnot, b)),
  };
  for (const auto& e : exprs) {
    ExprPtr m = materialize_condition(e);
    Ast ast;
    ast.decls = {{"a", false, 0, 0, 0}, {"b", false, 0, 0, 0},
                 {"x", false, 0, 0, 0}, {"y", false, 0, 0, 0}};
    auto sx = std::make_shared<Stmt>();
    sx->kind = Stmt::Kind::assign;
    sx->target = "x";
    sx->value = e;
    auto sy = std::make_shared<Stmt>();
    sy->kind = Stmt::Kind::assign;
    sy->target = "y";
    sy->value = m;
    Block body;
    body.stmts = {sx, sy};
    ast.procs.push_back({"main", body, 0});
    for (uint64_t va : {0ull, 1ull, 7ull, ~0ull})
      for (uint64_t vb : {0ull, 1ull, 2ull}) {
        auto r = interpret(ast, {{"a", va}, {"b", vb}});
        REQUIRE(r.ok);
        CHECK((r.scalar("x") != 0) == (r.scalar("y") != 0));
      }
  }
}

TEST_CASE("computed postdominators match the path oracle") {
  const char* fixed[] = {
      "int x; proc main() { x = 1; x = 2; }",
      "int c; int x; proc main() { if (c) { x = 1; } }",
      "int c; int x; proc main() { if (c) { x = 1; } else { x = 2; } }",
      "int c; int d; int x; proc main() {"
      "  if (c) { if (d) { x = 1; } else { x = 2; } x = 3; } x = 4; }",
      "int c; int x; proc main() { while (c) { x = x + 1; c = c - 1; } }",
      "int c; int d; int x; proc main() {"
      "  while (c) { if (d) { x = 1; } c = c - 1; } x = 9; }",
      "int c; int d; int x; proc main() {"
      "  if (c || d) { x = 1; } else { while (d) { d = d - 1; } } }",
  };
  for (const char* src : fixed) {
    INFO("source: " << src);
    auto low = lower(parse_ok(src));
    REQUIRE(low.ok);
    CHECK(postdominators(low.cfg) == oracle_ipdom(low.cfg));
  }

  AstFuzzer fz{std::mt19937_64(0xcf9u)};
  for (int t = 0; t < 60; t++) {
    auto low = lower(fz.ast());
    REQUIRE(low.ok);
    auto got = postdominators(low.cfg);
    auto want = oracle_ipdom(low.cfg);
    REQUIRE_MESSAGE(got == want, "fuzz case " << t);
  }
}

namespace {

// Every variable the analysis calls clean must be unaffected by secrets.
void check_taint(const char* src,
                 const std::vector<std::pair<std::string, bool>>& expect) {
  INFO("source: " << src);
  auto ast = parse_ok(src);
  auto inl = inline_calls(ast);
  REQUIRE(inl.ok);
  auto low = lower(inl.ast);
  REQUIRE(low.ok);
  auto tr = taint(low.cfg, inl.ast);

  for (const auto& [name, secret] : expect) {
    CAPTURE(name);
    CHECK(tr.secret.count(name) == (secret ? 1u : 0u));
  }

  std::vector<std::string> secret_decls;
  for (const auto& d : ast.decls)
    if (d.secret) secret_decls.push_back(d.name);
  std::vector<std::map<std::string, uint64_t>> runs;
  runs.push_back({});
  for (size_t i = 0; i < secret_decls.size(); i++) {
    std::map<std::string, uint64_t> env;
    for (size_t j = 0; j < secret_decls.size(); j++)
      env[secret_decls[j]] = i == j ? 1 : 0;
    runs.push_back(env);
  }
  std::vector<sempe::testing::InterpResult> results;
  for (const auto& env : runs) {
    results.push_back(interpret(ast, env));
    REQUIRE(results.back().ok);
  }
  for (const auto& d : ast.decls) {
    if (tr.secret.count(d.name)) continue;
    for (size_t i = 1; i < results.size(); i++) {
      CAPTURE(d.name);
      CHECK(results[0].env.at(d.name) == results[i].env.at(d.name));
    }
  }
}

}  // namespace

TEST_CASE("explicit flows taint assignment targets") {
  check_taint(
      "@secret int s; int x; int y; int z;\n"
      "proc main() { x = s + 1; y = 2; z = x * 2; }\n",
      {{"s", true}, {"x", true}, {"y", false}, {"z", true}});
}

TEST_CASE("implicit flows taint everything written under a secret branch") {
  check_taint(
      "@secret int s; int x; int y; int p;\n"
      "proc main() {\n"
      "  if (s) { x = 1; } else {}\n"
      "  y = 2;\n"
      "  if (p) { p = 3; }\n"
      "}\n",
      {{"x", true}, {"y", false}, {"p", false}});
}

TEST_CASE("a public branch inside a secret region is still secret context") {
  check_taint(
      "@secret int s; int p; int x; int y;\n"
      "proc main() {\n"
      "  p = 1;\n"
      "  if (s) { if (p) { x = 1; } } else {}\n"
      "  y = p;\n"
      "}\n",
      {{"x", true}, {"y", false}, {"p", false}});
}

TEST_CASE("arrays taint as a unit") {
  check_taint(
      "@secret int s; int a[4]; int y; int z;\n"
      "proc main() { a[1] = s; y = a[0]; z = 5; }\n",
      {{"a", true}, {"y", true}, {"z", false}});
}

TEST_CASE("taint reaches variables read after the region through the fixpoint") {
  check_taint(
      "@secret int s; int x; int y;\n"
      "proc main() { if (s) { x = 1; } else {} y = x; }\n",
      {{"x", true}, {"y", true}});
}

TEST_CASE("branch classification separates secret and public tests") {
  auto ast = parse_ok(
      "@secret int s; int p; int x;\n"
      "proc main() { if (p) { x = 1; } if (s) { x = 2; } }\n");
  auto low = lower(ast);
  REQUIRE(low.ok);
  auto tr = taint(low.cfg, ast);
  int secret_branches = 0, public_branches = 0;
  for (size_t i = 0; i < low.cfg.blocks.size(); i++) {
    if (low.cfg.blocks[i].term != BasicBlock::Term::branch) continue;
    (tr.secret_branch[i] ? secret_branches : public_branches)++;
  }
  CHECK(secret_branches == 1);
  CHECK(public_branches == 1);
}

TEST_CASE("helper predicates see through expression trees") {
  std::set<std::string> secret = {"s"};
  auto e = Expr::binary(BinOp::add, Expr::variable("x"),
                        Expr::index("a", Expr::variable("s")));
  CHECK(expr_reads_secret(e, secret));
  CHECK(has_secret_index(e, secret));
  auto f = Expr::index("a", Expr::variable("i"));
  CHECK(!expr_reads_secret(f, secret));
  CHECK(!has_secret_index(f, secret));
}

TEST_CASE("nested sole secret branches collapse into one conjunction") {
  auto ast = parse_ok(
      "@secret int s1; @secret int s2; int x;\n"
      "proc main() { if (s1) { if (s2) { x = 1; } } }\n");
  std::set<std::string> secret = {"s1", "s2"};
  Ast out = collapse_nesting(ast, secret);

  int ifs = 0;
  for_each_if(out.find_proc("main")->body, [&](const Stmt&) { ifs++; });
  CHECK(ifs == 1);

  for (uint64_t a : {0ull, 1ull, 5ull})
    for (uint64_t b : {0ull, 1ull, 5ull}) {
      auto r0 = interpret(ast, {{"s1", a}, {"s2", b}});
      auto r1 = interpret(out, {{"s1", a}, {"s2", b}});
      REQUIRE(r0.ok);
      REQUIRE(r1.ok);
      CHECK(r0.scalar("x") == r1.scalar("x"));
    }
}

TEST_CASE("collapse leaves branches with else arms or extra statements alone") {
  const char* keep[] = {
      "@secret int s1; @secret int s2; int x;\n"
      "proc main() { if (s1) { if (s2) { x = 1; } else { x = 2; } } }\n",
      "@secret int s1; @secret int s2; int x;\n"
      "proc main() { if (s1) { if (s2) { x = 1; } x = 3; } }\n",
      "@secret int s1; @secret int s2; int x;\n"
      "proc main() { if (s1) { if (s2) { x = 1; } } else { x = 4; } }\n",
  };
  for (const char* src : keep) {
    INFO("source: " << src);
    auto ast = parse_ok(src);
    Ast out = collapse_nesting(ast, {"s1", "s2"});
    int ifs = 0;
    for_each_if(out.find_proc("main")->body, [&](const Stmt&) { ifs++; });
    CHECK(ifs == 2);
    for (uint64_t a : {0ull, 1ull})
      for (uint64_t b : {0ull, 1ull}) {
        auto r0 = interpret(ast, {{"s1", a}, {"s2", b}});
        auto r1 = interpret(out, {{"s1", a}, {"s2", b}});
        REQUIRE(r0.ok);
        REQUIRE(r1.ok);
        CHECK(r0.scalar("x") == r1.scalar("x"));
      }
  }
}

TEST_CASE("collapse materializes logical secret conditions") {
  auto ast = parse_ok(
      "@secret int s1; @secret int s2; int x;\n"
      "proc main() { if (s1 || s2) { x = 1; } else { x = 2; } }\n");
  Ast out = collapse_nesting(ast, {"s1", "s2"});
  for_each_if(out.find_proc("main")->body,
              [&](const Stmt& s) { CHECK(!logical_top(s.cond)); });
  for (uint64_t a : {0ull, 1ull, 6ull})
    for (uint64_t b : {0ull, 1ull, 6ull}) {
      auto r0 = interpret(ast, {{"s1", a}, {"s2", b}});
      auto r1 = interpret(out, {{"s1", a}, {"s2", b}});
      REQUIRE(r0.ok);
      REQUIRE(r1.ok);
      CHECK(r0.scalar("x") == r1.scalar("x"));
    }
}

TEST_CASE("collapse does not rewrite public logical conditions") {
  auto ast = parse_ok(
      "int p; int q; int x;\n"
      "proc main() { if (p && q) { x = 1; } }\n");
  Ast out = collapse_nesting(ast, {});
  const auto& s = out.find_proc("main")->body.stmts[0];
  REQUIRE(s->kind == Stmt::Kind::if_);
  CHECK(logical_top(s->cond));
}

TEST_CASE("the three-branch nest drops to two secure branches") {
  auto ast = parse_ok(
      "@secret int s1; @secret int s2; @secret int s3; int x; int y;\n"
      "proc main() {\n"
      "  if (s1) { if (s2) { x = 1; } }\n"
      "  if (s3) { y = 1; } else { y = 2; }\n"
      "}\n");
  std::set<std::string> secret = {"s1", "s2", "s3"};

  int before = 0;
  for_each_if(ast.find_proc("main")->body, [&](const Stmt&) { before++; });
  CHECK(before == 3);

  Ast out = collapse_nesting(ast, secret);
  int after = 0;
  for_each_if(out.find_proc("main")->body, [&](const Stmt&) { after++; });
  CHECK(after == 2);
}
