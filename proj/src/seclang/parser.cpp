#include "sempe/seclang/parser.hpp"

#include <cctype>
#include <map>
#include <set>

namespace sempe::seclang {

ExprPtr Expr::number(int64_t v, int line) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::num;
  e->num = v;
  e->line = line;
  return e;
}

ExprPtr Expr::variable(std::string name, int line) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::var;
  e->var = std::move(name);
  e->line = line;
  return e;
}

ExprPtr Expr::index(std::string base, ExprPtr sub, int line) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::index;
  e->var = std::move(base);
  e->a = std::move(sub);
  e->line = line;
  return e;
}

ExprPtr Expr::binary(BinOp op, ExprPtr lhs, ExprPtr rhs, int line) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::binary;
  e->bop = op;
  e->a = std::move(lhs);
  e->b = std::move(rhs);
  e->line = line;
  return e;
}

ExprPtr Expr::unary(UnOp op, ExprPtr operand, int line) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::unary;
  e->uop = op;
  e->a = std::move(operand);
  e->line = line;
  return e;
}

const Decl* Ast::find_decl(const std::string& name) const {
  for (const auto& d : decls)
    if (d.name == name) return &d;
  return nullptr;
}

const ProcDef* Ast::find_proc(const std::string& name) const {
  for (const auto& p : procs)
    if (p.name == name) return &p;
  return nullptr;
}

StmtPtr clone(const StmtPtr& s) {
  if (!s) return nullptr;
  auto c = std::make_shared<Stmt>(*s);  // shallow copies of shared exprs are fine
  c->body = clone(s->body);
  c->else_body = clone(s->else_body);
  return c;
}

Block clone(const Block& b) {
  Block c;
  c.stmts.reserve(b.stmts.size());
  for (const auto& s : b.stmts) c.stmts.push_back(clone(s));
  return c;
}

namespace {

enum class Tok {
  end, ident, number, secret_mark,
  kw_int, kw_proc, kw_if, kw_else, kw_while, kw_bool,
  lparen, rparen, lbrace, rbrace, lbracket, rbracket,
  semi, comma, assign,
  plus, minus, star, slash, amp, pipe, caret, shl, shr,
  lt, eq, ne, and_and, or_or, bang,
};

struct Token {
  Tok kind = Tok::end;
  std::string text;
  int64_t num = 0;
  int line = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_ws();
    Token t;
    t.line = line_;
    if (pos_ >= src_.size()) return t;
    char c = src_[pos_];
    if (std::isalpha((unsigned char)c) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum((unsigned char)src_[pos_]) || src_[pos_] == '_'))
        pos_++;
      t.text = std::string(src_.substr(start, pos_ - start));
      if (t.text == "int") t.kind = Tok::kw_int;
      else if (t.text == "proc") t.kind = Tok::kw_proc;
      else if (t.text == "if") t.kind = Tok::kw_if;
      else if (t.text == "else") t.kind = Tok::kw_else;
      else if (t.text == "while") t.kind = Tok::kw_while;
      else if (t.text == "bool") t.kind = Tok::kw_bool;
      else t.kind = Tok::ident;
      return t;
    }
    if (std::isdigit((unsigned char)c)) {
      size_t start = pos_;
      int base = 10;
      if (c == '0' && pos_ + 1 < src_.size() &&
          (src_[pos_ + 1] == 'x' || src_[pos_ + 1] == 'X')) {
        base = 16;
        pos_ += 2;
        start = pos_;
      }
      while (pos_ < src_.size() &&
             (std::isalnum((unsigned char)src_[pos_])))
        pos_++;
      t.kind = Tok::number;
      t.text = std::string(src_.substr(start, pos_ - start));
      try {
        t.num = std::stoll(t.text, nullptr, base);
      } catch (...) {
        t.kind = Tok::end;
        t.text = "bad number";
      }
      return t;
    }
    if (c == '@') {
      size_t start = ++pos_;
      while (pos_ < src_.size() && std::isalpha((unsigned char)src_[pos_])) pos_++;
      t.text = std::string(src_.substr(start, pos_ - start));
      t.kind = Tok::secret_mark;
      return t;
    }
    pos_++;
    auto two = [&](char want, Tok yes, Tok no) {
      if (pos_ < src_.size() && src_[pos_] == want) {
        pos_++;
        t.kind = yes;
      } else {
        t.kind = no;
      }
    };
    switch (c) {
      case '(': t.kind = Tok::lparen; break;
      case ')': t.kind = Tok::rparen; break;
      case '{': t.kind = Tok::lbrace; break;
      case '}': t.kind = Tok::rbrace; break;
      case '[': t.kind = Tok::lbracket; break;
      case ']': t.kind = Tok::rbracket; break;
      case ';': t.kind = Tok::semi; break;
      case ',': t.kind = Tok::comma; break;
      case '+': t.kind = Tok::plus; break;
      case '-': t.kind = Tok::minus; break;
      case '*': t.kind = Tok::star; break;
      case '/': t.kind = Tok::slash; break;
      case '^': t.kind = Tok::caret; break;
      case '=': two('=', Tok::eq, Tok::assign); break;
      case '!': two('=', Tok::ne, Tok::bang); break;
      case '&': two('&', Tok::and_and, Tok::amp); break;
      case '|': two('|', Tok::or_or, Tok::pipe); break;
      case '<': two('<', Tok::shl, Tok::lt); break;
      case '>':
        two('>', Tok::shr, Tok::end);
        if (t.kind == Tok::end) t.text = "unexpected '>'";
        break;
      default:
        t.kind = Tok::end;
        t.text = std::string("unexpected character '") + c + "'";
    }
    return t;
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        line_++;
        pos_++;
      } else if (std::isspace((unsigned char)c)) {
        pos_++;
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') pos_++;
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) { advance(); }

  ParseResult run() {
    ParseResult r;
    while (cur_.kind != Tok::end || !cur_.text.empty()) {
      if (cur_.kind == Tok::end) {
        error(cur_.line, cur_.text);
        break;
      }
      if (cur_.kind == Tok::secret_mark || cur_.kind == Tok::kw_int) {
        parse_decl();
      } else if (cur_.kind == Tok::kw_proc) {
        parse_proc();
      } else {
        error(cur_.line, "expected declaration or proc");
        break;
      }
      if (!diags_.empty()) break;
    }
    r.ast = std::move(ast_);
    r.diags = std::move(diags_);
    r.ok = r.diags.empty();
    if (r.ok) check_semantics(r);
    return r;
  }

 private:
  void advance() { cur_ = lex_.next(); }

  bool accept(Tok k) {
    if (cur_.kind != k) return false;
    advance();
    return true;
  }

  void expect(Tok k, const char* what) {
    if (!accept(k)) error(cur_.line, std::string("expected ") + what);
  }

  void error(int line, std::string msg) {
    if (diags_.empty()) diags_.push_back({line, std::move(msg)});
  }

  void parse_decl() {
    Decl d;
    d.line = cur_.line;
    if (cur_.kind == Tok::secret_mark) {
      if (cur_.text != "secret") {
        error(cur_.line, "unknown marker @" + cur_.text);
        return;
      }
      d.secret = true;
      advance();
    }
    expect(Tok::kw_int, "'int'");
    if (cur_.kind != Tok::ident) {
      error(cur_.line, "expected variable name");
      return;
    }
    d.name = cur_.text;
    advance();
    if (accept(Tok::lbracket)) {
      if (cur_.kind != Tok::number || cur_.num <= 0) {
        error(cur_.line, "array size must be a positive integer");
        return;
      }
      d.array_size = cur_.num;
      advance();
      expect(Tok::rbracket, "']'");
    }
    if (accept(Tok::assign)) {
      bool neg = accept(Tok::minus);
      if (cur_.kind != Tok::number) {
        error(cur_.line, "initializer must be an integer");
        return;
      }
      d.init = neg ? -cur_.num : cur_.num;
      advance();
      if (d.array_size > 0) {
        error(d.line, "array initializers are not supported");
        return;
      }
    }
    expect(Tok::semi, "';'");
    ast_.decls.push_back(std::move(d));
  }

  void parse_proc() {
    ProcDef p;
    p.line = cur_.line;
    advance();
    if (cur_.kind != Tok::ident) {
      error(cur_.line, "expected proc name");
      return;
    }
    p.name = cur_.text;
    advance();
    expect(Tok::lparen, "'('");
    expect(Tok::rparen, "')'");
    p.body = parse_block();
    ast_.procs.push_back(std::move(p));
  }

  Block parse_block() {
    Block b;
    expect(Tok::lbrace, "'{'");
    while (cur_.kind != Tok::rbrace) {
      if (cur_.kind == Tok::end || !diags_.empty()) break;
      auto s = parse_stmt();
      if (s) b.stmts.push_back(std::move(s));
    }
    expect(Tok::rbrace, "'}'");
    return b;
  }

  StmtPtr parse_stmt() {
    auto s = std::make_shared<Stmt>();
    s->line = cur_.line;
    if (cur_.kind == Tok::kw_if) {
      advance();
      s->kind = Stmt::Kind::if_;
      expect(Tok::lparen, "'('");
      s->cond = parse_expr();
      expect(Tok::rparen, "')'");
      s->body = parse_block();
      if (accept(Tok::kw_else)) {
        if (cur_.kind == Tok::kw_if) {
          auto inner = parse_stmt();
          if (inner) s->else_body.stmts.push_back(std::move(inner));
        } else {
          s->else_body = parse_block();
        }
      }
      return s;
    }
    if (cur_.kind == Tok::kw_while) {
      advance();
      s->kind = Stmt::Kind::while_;
      expect(Tok::lparen, "'('");
      s->cond = parse_expr();
      expect(Tok::rparen, "')'");
      s->body = parse_block();
      return s;
    }
    if (cur_.kind != Tok::ident) {
      error(cur_.line, "expected statement");
      return nullptr;
    }
    std::string name = cur_.text;
    advance();
    if (accept(Tok::lparen)) {
      expect(Tok::rparen, "')'");
      expect(Tok::semi, "';'");
      s->kind = Stmt::Kind::call;
      s->callee = std::move(name);
      return s;
    }
    s->kind = Stmt::Kind::assign;
    s->target = std::move(name);
    if (accept(Tok::lbracket)) {
      s->target_index = parse_expr();
      expect(Tok::rbracket, "']'");
    }
    expect(Tok::assign, "'='");
    s->value = parse_expr();
    expect(Tok::semi, "';'");
    return s;
  }

  ExprPtr parse_expr() { return parse_or(); }

  ExprPtr parse_or() {
    auto e = parse_and();
    while (cur_.kind == Tok::or_or) {
      int ln = cur_.line;
      advance();
      e = Expr::binary(BinOp::lor, e, parse_and(), ln);
    }
    return e;
  }

  ExprPtr parse_and() {
    auto e = parse_bitor();
    while (cur_.kind == Tok::and_and) {
      int ln = cur_.line;
      advance();
      e = Expr::binary(BinOp::land, e, parse_bitor(), ln);
    }
    return e;
  }

  ExprPtr parse_bitor() {
    auto e = parse_bitxor();
    while (cur_.kind == Tok::pipe) {
      int ln = cur_.line;
      advance();
      e = Expr::binary(BinOp::bor, e, parse_bitxor(), ln);
    }
    return e;
  }

  ExprPtr parse_bitxor() {
    auto e = parse_bitand();
    while (cur_.kind == Tok::caret) {
      int ln = cur_.line;
      advance();
      e = Expr::binary(BinOp::bxor, e, parse_bitand(), ln);
    }
    return e;
  }

  ExprPtr parse_bitand() {
    auto e = parse_eq();
    while (cur_.kind == Tok::amp) {
      int ln = cur_.line;
      advance();
      e = Expr::binary(BinOp::band, e, parse_eq(), ln);
    }
    return e;
  }

  ExprPtr parse_eq() {
    auto e = parse_rel();
    while (cur_.kind == Tok::eq || cur_.kind == Tok::ne) {
      BinOp op = cur_.kind == Tok::eq ? BinOp::eq : BinOp::ne;
      int ln = cur_.line;
      advance();
      e = Expr::binary(op, e, parse_rel(), ln);
    }
    return e;
  }

  ExprPtr parse_rel() {
    auto e = parse_shift();
    while (cur_.kind == Tok::lt) {
      int ln = cur_.line;
      advance();
      e = Expr::binary(BinOp::lt, e, parse_shift(), ln);
    }
    return e;
  }

  ExprPtr parse_shift() {
    auto e = parse_add();
    while (cur_.kind == Tok::shl || cur_.kind == Tok::shr) {
      BinOp op = cur_.kind == Tok::shl ? BinOp::shl : BinOp::shr;
      int ln = cur_.line;
      advance();
      auto rhs = parse_add();
      if (rhs && (rhs->kind != Expr::Kind::num || rhs->num < 0 || rhs->num > 63))
        error(ln, "shift amount must be a literal in 0..63");
      e = Expr::binary(op, e, rhs, ln);
    }
    return e;
  }

  ExprPtr parse_add() {
    auto e = parse_mul();
    while (cur_.kind == Tok::plus || cur_.kind == Tok::minus) {
      BinOp op = cur_.kind == Tok::plus ? BinOp::add : BinOp::sub;
      int ln = cur_.line;
      advance();
      e = Expr::binary(op, e, parse_mul(), ln);
    }
    return e;
  }

  ExprPtr parse_mul() {
    auto e = parse_unary();
    while (cur_.kind == Tok::star || cur_.kind == Tok::slash) {
      BinOp op = cur_.kind == Tok::star ? BinOp::mul : BinOp::divc;
      int ln = cur_.line;
      advance();
      auto rhs = parse_unary();
      if (op == BinOp::divc && rhs &&
          (rhs->kind != Expr::Kind::num || rhs->num == 0))
        error(ln, "divisor must be a nonzero integer literal");
      e = Expr::binary(op, e, rhs, ln);
    }
    return e;
  }

  ExprPtr parse_unary() {
    int ln = cur_.line;
    if (accept(Tok::bang)) return Expr::unary(UnOp::lnot, parse_unary(), ln);
    if (accept(Tok::minus)) return Expr::unary(UnOp::neg, parse_unary(), ln);
    if (cur_.kind == Tok::kw_bool) {
      advance();
      expect(Tok::lparen, "'('");
      auto e = parse_expr();
      expect(Tok::rparen, "')'");
      return Expr::unary(UnOp::boolcast, e, ln);
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    int ln = cur_.line;
    if (cur_.kind == Tok::number) {
      int64_t v = cur_.num;
      advance();
      return Expr::number(v, ln);
    }
    if (cur_.kind == Tok::ident) {
      std::string name = cur_.text;
      advance();
      if (accept(Tok::lbracket)) {
        auto sub = parse_expr();
        expect(Tok::rbracket, "']'");
        return Expr::index(std::move(name), sub, ln);
      }
      return Expr::variable(std::move(name), ln);
    }
    if (accept(Tok::lparen)) {
      auto e = parse_expr();
      expect(Tok::rparen, "')'");
      return e;
    }
    error(ln, cur_.text.empty() ? "expected expression" : cur_.text);
    advance();
    return Expr::number(0, ln);
  }

  // Name resolution and shape checks after a clean parse.
  void check_semantics(ParseResult& r) {
    std::set<std::string> names;
    for (const auto& d : r.ast.decls) {
      if (!names.insert(d.name).second)
        r.diags.push_back({d.line, "duplicate declaration of " + d.name});
    }
    std::set<std::string> procs;
    for (const auto& p : r.ast.procs) {
      if (!procs.insert(p.name).second)
        r.diags.push_back({p.line, "duplicate proc " + p.name});
      if (names.count(p.name))
        r.diags.push_back({p.line, p.name + " is both a variable and a proc"});
    }
    if (!r.ast.find_proc("main"))
      r.diags.push_back({1, "missing proc main"});
    for (const auto& p : r.ast.procs) check_block(r, p.body);
    r.ok = r.diags.empty();
  }

  void check_block(ParseResult& r, const Block& b) {
    for (const auto& s : b.stmts) check_stmt(r, *s);
  }

  void check_stmt(ParseResult& r, const Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::assign: {
        const Decl* d = r.ast.find_decl(s.target);
        if (!d) {
          r.diags.push_back({s.line, "undeclared variable " + s.target});
          return;
        }
        if (d->array_size > 0 && !s.target_index)
          r.diags.push_back({s.line, s.target + " is an array; index required"});
        if (d->array_size == 0 && s.target_index)
          r.diags.push_back({s.line, s.target + " is a scalar; cannot index"});
        if (s.target_index && s.target_index->kind == Expr::Kind::num &&
            (s.target_index->num < 0 || s.target_index->num >= d->array_size))
          r.diags.push_back({s.line, "index out of range for " + s.target});
        if (s.target_index) check_expr(r, *s.target_index, s.line);
        check_expr(r, *s.value, s.line);
        break;
      }
      case Stmt::Kind::if_:
        check_expr(r, *s.cond, s.line);
        check_block(r, s.body);
        check_block(r, s.else_body);
        break;
      case Stmt::Kind::while_:
        check_expr(r, *s.cond, s.line);
        check_block(r, s.body);
        break;
      case Stmt::Kind::call:
        if (!r.ast.find_proc(s.callee))
          r.diags.push_back({s.line, "call to unknown proc " + s.callee});
        break;
    }
  }

  void check_expr(ParseResult& r, const Expr& e, int line) {
    switch (e.kind) {
      case Expr::Kind::num:
        break;
      case Expr::Kind::var: {
        const Decl* d = r.ast.find_decl(e.var);
        if (!d)
          r.diags.push_back({e.line ? e.line : line, "undeclared variable " + e.var});
        else if (d->array_size > 0)
          r.diags.push_back({e.line ? e.line : line,
                             e.var + " is an array; index required"});
        break;
      }
      case Expr::Kind::index: {
        const Decl* d = r.ast.find_decl(e.var);
        if (!d)
          r.diags.push_back({e.line ? e.line : line, "undeclared variable " + e.var});
        else if (d->array_size == 0)
          r.diags.push_back({e.line ? e.line : line,
                             e.var + " is a scalar; cannot index"});
        if (d && e.a && e.a->kind == Expr::Kind::num &&
            (e.a->num < 0 || e.a->num >= d->array_size))
          r.diags.push_back({e.line ? e.line : line,
                             "index out of range for " + e.var});
        check_expr(r, *e.a, line);
        break;
      }
      case Expr::Kind::binary:
        check_expr(r, *e.a, line);
        check_expr(r, *e.b, line);
        break;
      case Expr::Kind::unary:
        check_expr(r, *e.a, line);
        break;
    }
  }

  Lexer lex_;
  Token cur_;
  Ast ast_;
  std::vector<Diag> diags_;
};

void inline_block(const Ast& ast, const Block& in, Block& out,
                  std::vector<Diag>& diags) {
  for (const auto& s : in.stmts) {
    if (s->kind == Stmt::Kind::call) {
      const ProcDef* p = ast.find_proc(s->callee);
      if (!p) {
        diags.push_back({s->line, "call to unknown proc " + s->callee});
        return;
      }
      inline_block(ast, p->body, out, diags);
      continue;
    }
    auto c = clone(s);
    if (c->kind == Stmt::Kind::if_ || c->kind == Stmt::Kind::while_) {
      Block body, els;
      inline_block(ast, c->body, body, diags);
      inline_block(ast, c->else_body, els, diags);
      c->body = std::move(body);
      c->else_body = std::move(els);
    }
    out.stmts.push_back(std::move(c));
  }
}

bool find_call_cycle(const Ast& ast, const std::string& proc,
                     std::set<std::string>& path, std::vector<Diag>& diags);

bool cycle_in_block(const Ast& ast, const Block& b, std::set<std::string>& path,
                    std::vector<Diag>& diags) {
  for (const auto& s : b.stmts) {
    if (s->kind == Stmt::Kind::call) {
      if (path.count(s->callee)) {
        diags.push_back({s->line, "recursive call to " + s->callee});
        return true;
      }
      if (find_call_cycle(ast, s->callee, path, diags)) return true;
    } else if (s->kind == Stmt::Kind::if_ || s->kind == Stmt::Kind::while_) {
      if (cycle_in_block(ast, s->body, path, diags)) return true;
      if (cycle_in_block(ast, s->else_body, path, diags)) return true;
    }
  }
  return false;
}

bool find_call_cycle(const Ast& ast, const std::string& proc,
                     std::set<std::string>& path, std::vector<Diag>& diags) {
  const ProcDef* p = ast.find_proc(proc);
  if (!p) return false;  // reported by the parser already
  path.insert(proc);
  bool cyc = cycle_in_block(ast, p->body, path, diags);
  path.erase(proc);
  return cyc;
}

}  // namespace

ParseResult parse(std::string_view source) {
  return Parser(source).run();
}

InlineResult inline_calls(const Ast& ast) {
  InlineResult r;
  r.ast.decls = ast.decls;
  const ProcDef* main = ast.find_proc("main");
  if (!main) {
    r.diags.push_back({1, "missing proc main"});
    return r;
  }
  std::set<std::string> path;
  if (find_call_cycle(ast, "main", path, r.diags)) return r;
  ProcDef flat;
  flat.name = "main";
  flat.line = main->line;
  inline_block(ast, main->body, flat.body, r.diags);
  if (!r.diags.empty()) return r;
  r.ast.procs.push_back(std::move(flat));
  r.ok = true;
  return r;
}

}  // namespace sempe::seclang
