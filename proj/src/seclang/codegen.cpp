#include "sempe/seclang/codegen.hpp"

#include <algorithm>
#include <cassert>

#include "json.hpp"
#include "sempe/seclang/cfg.hpp"
#include "sempe/seclang/taint.hpp"
#include "sempe/seclang/transform.hpp"

namespace sempe::seclang {

namespace {

constexpr int kScratch = 4;
constexpr int kEvalStackPad = 8;

struct Region {
  int branch = -1;
  int join = -1;
  int depth = 0;
  int pred_reg = -1;
  std::vector<char> member;   // per block
  std::vector<char> nt_side;  // per block, valid where member
  std::vector<std::string> shadowed;
  std::map<std::string, std::pair<uint64_t, uint64_t>> copy;  // nt, t
};

// (region index, block is on the not-taken side) pairs, innermost first.
using Context = std::vector<std::pair<int, bool>>;

class Codegen {
 public:
  Codegen(const Ast& ast, const Cfg& cfg, const TaintResult& tt, bool sempe,
          const CodegenOptions& opt)
      : ast_(ast), cfg_(cfg), taint_(tt), sempe_(sempe), opt_(opt) {}

  CompileOutput run() {
    CompileOutput out;
    out.layout.register_count = opt_.register_count;
    if (sempe_) discover_regions();
    static_checks();
    if (!diags_.empty()) {
      out.diags = std::move(diags_);
      return out;
    }
    assign_storage();
    if (!diags_.empty()) {
      out.diags = std::move(diags_);
      return out;
    }
    emit_all();
    if (!diags_.empty()) {
      out.diags = std::move(diags_);
      return out;
    }
    out.program.instructions = std::move(code_);
    out.program.entry = 0;
    out.program.register_count = opt_.register_count;
    out.program.data_size = layout_.total_words;
    for (size_t i = 0; i < block_pc_.size(); i++)
      out.program.labels["B" + std::to_string(i)] = block_pc_[i];
    out.layout = layout_;
    out.layout.register_count = opt_.register_count;
    out.ok = true;
    return out;
  }

 private:
  void fail(int line, std::string msg) {
    if (diags_.empty()) diags_.push_back({line, std::move(msg)});
  }

  // ---- analysis ----

  void discover_regions() {
    ipdom_ = postdominators(cfg_);
    int n = (int)cfg_.blocks.size();
    for (int b = 0; b < n; b++) {
      if (!taint_.secret_branch[b]) continue;
      Region r;
      r.branch = b;
      r.join = ipdom_[b];
      r.member.assign(n, 0);
      r.nt_side.assign(n, 0);
      for (int m : region_blocks(cfg_, ipdom_, b)) r.member[m] = 1;
      mark_side(r, cfg_.blocks[b].succ_then, true);
      mark_side(r, cfg_.blocks[b].succ_else, false);
      regions_.push_back(std::move(r));
    }
    // Nesting depth: how many other regions contain this branch block.
    for (auto& r : regions_) {
      for (const auto& q : regions_)
        if (q.branch != r.branch && q.member[r.branch]) r.depth++;
    }
    max_depth_ = 0;
    for (const auto& r : regions_) max_depth_ = std::max(max_depth_, r.depth + 1);
  }

  void mark_side(Region& r, int entry, bool nt) {
    if (entry == r.join || !r.member[entry]) return;  // empty arm
    char tag = nt ? 2 : 1;
    std::vector<int> work{entry};
    while (!work.empty()) {
      int b = work.back();
      work.pop_back();
      if (r.nt_side[b] != 0) continue;
      r.nt_side[b] = tag;
      for (int s : successors(cfg_.blocks[b]))
        if (s != r.join && r.member[s] && r.nt_side[s] == 0) work.push_back(s);
    }
  }

  bool on_nt_side(const Region& r, int block) const {
    return r.nt_side[block] == 2;
  }

  void static_checks() {
    for (int b = 0; b < (int)cfg_.blocks.size(); b++) {
      const auto& bb = cfg_.blocks[b];
      if (sempe_ && bb.loop_header && taint_.secret_branch[b])
        fail(bb.line, "loop condition depends on a secret");
      if (bb.cond) check_indices(bb.cond, bb.line, in_any_region(b));
      bool in_region = in_any_region(b);
      for (const auto& s : bb.stmts) {
        check_indices(s->value, s->line, in_region);
        if (s->target_index) {
          check_indices(s->target_index, s->line, in_region);
          if (expr_reads_secret(s->target_index, taint_.secret))
            fail(s->line, "array index depends on a secret");
          if (sempe_ && in_region && s->target_index->kind != Expr::Kind::num)
            fail(s->line,
                 "array index inside a secure region must be a constant");
        }
      }
    }
    if (sempe_ && max_depth_ > opt_.jb_capacity)
      fail(1, "secret branch nesting exceeds the jump-back capacity of " +
                  std::to_string(opt_.jb_capacity));
    if (opt_.register_count < 1 + kScratch + max_depth_)
      fail(1, "register file too small for this nesting depth");
  }

  bool in_any_region(int b) const {
    for (const auto& r : regions_)
      if (r.member[b]) return true;
    return false;
  }

  void check_indices(const ExprPtr& e, int line, bool in_region) {
    if (!e) return;
    if (has_secret_index(e, taint_.secret))
      fail(line, "array index depends on a secret");
    if (sempe_ && in_region) reject_dynamic_index(e, line);
  }

  void reject_dynamic_index(const ExprPtr& e, int line) {
    if (!e) return;
    if (e->kind == Expr::Kind::index && e->a->kind != Expr::Kind::num)
      fail(line, "array index inside a secure region must be a constant");
    reject_dynamic_index(e->a, line);
    reject_dynamic_index(e->b, line);
  }

  // ---- storage ----

  void assign_storage() {
    int R = opt_.register_count;
    scratch0_ = R - kScratch;
    pred0_ = R - kScratch - max_depth_;
    int budget = pred0_ - 1;  // r0 stays zero
    int next_reg = 1;
    uint64_t addr = 0;
    for (const auto& d : ast_.decls) {
      VarSlot slot;
      slot.size = d.array_size > 0 ? d.array_size : 1;
      slot.addr = addr;
      addr += slot.size;
      bool reg_ok = d.array_size == 0 && !d.secret && !opt_.privatize_all;
      if (reg_ok && next_reg <= budget) {
        slot.in_reg = true;
        slot.reg = next_reg++;
      }
      layout_.vars[d.name] = slot;
      if (d.secret) layout_.secrets.push_back(d.name);
    }
    layout_.globals_end = addr;

    for (auto& r : regions_) {
      r.pred_reg = pred0_ + r.depth;
      for (const auto& d : ast_.decls) {
        if (layout_.vars[d.name].in_reg) continue;
        if (!region_writes(r, d.name)) continue;
        r.shadowed.push_back(d.name);
        uint64_t nt = addr;
        addr += layout_.vars[d.name].size;
        uint64_t t = addr;
        addr += layout_.vars[d.name].size;
        r.copy[d.name] = {nt, t};
      }
    }

    eval_stack_base_ = addr;
    uint64_t stack_cap = max_eval_stack() + kEvalStackPad;
    layout_.total_words = eval_stack_base_ + stack_cap;
  }

  bool region_writes(const Region& r, const std::string& name) const {
    for (int b = 0; b < (int)cfg_.blocks.size(); b++) {
      if (!r.member[b]) continue;
      for (const auto& s : cfg_.blocks[b].stmts)
        if (s->target == name) return true;
    }
    return false;
  }

  // ---- scratch accounting ----

  int need(const ExprPtr& e) const {
    switch (e->kind) {
      case Expr::Kind::num:
      case Expr::Kind::var:
        return 1;
      case Expr::Kind::index:
        return e->a->kind == Expr::Kind::num ? 1 : need(e->a);
      case Expr::Kind::unary:
        if (e->uop == UnOp::neg) return need(e->a);
        return std::max(need(e->a), 2);  // 0/1 folds use one extra
      case Expr::Kind::binary: {
        if (e->bop == BinOp::divc || e->bop == BinOp::shl ||
            e->bop == BinOp::shr)
          return need(e->a);
        int base = std::max(need(e->a), need(e->b) + 1);
        if (e->bop == BinOp::eq || e->bop == BinOp::ne ||
            e->bop == BinOp::lor)
          return std::max(base, 2);
        if (e->bop == BinOp::land) return std::max(base, 3);
        return base;
      }
    }
    return 1;
  }

  int stack_need(const ExprPtr& e) const {
    if (need(e) <= kScratch) return 1;
    switch (e->kind) {
      case Expr::Kind::binary:
        if (e->bop == BinOp::divc || e->bop == BinOp::shl ||
            e->bop == BinOp::shr)
          return stack_need(e->a);
        return std::max(stack_need(e->a), stack_need(e->b) + 1);
      case Expr::Kind::unary:
        return stack_need(e->a);
      case Expr::Kind::index:
        return stack_need(e->a);
      default:
        return 1;
    }
  }

  uint64_t max_eval_stack() const {
    uint64_t m = 0;
    for (const auto& bb : cfg_.blocks) {
      if (bb.cond) m = std::max<uint64_t>(m, stack_need(bb.cond));
      for (const auto& s : bb.stmts) {
        m = std::max<uint64_t>(m, stack_need(s->value));
        if (s->target_index)
          m = std::max<uint64_t>(m, stack_need(s->target_index) + 1);
      }
    }
    return m;
  }

  // ---- emission helpers ----

  void op3(Opcode op, int dst, int s1, int s2, int line) {
    Instruction in;
    in.op = op;
    in.dst = (uint8_t)dst;
    in.src1 = (uint8_t)s1;
    in.src2 = (uint8_t)s2;
    in.source_line = line;
    code_.push_back(in);
  }

  void op_imm(Opcode op, int dst, int s1, int64_t imm, int line) {
    Instruction in;
    in.op = op;
    in.dst = (uint8_t)dst;
    in.src1 = (uint8_t)s1;
    in.imm = imm;
    in.source_line = line;
    code_.push_back(in);
  }

  void ldi(int dst, int64_t v, int line) { op_imm(Opcode::LDI, dst, 0, v, line); }
  void mov(int dst, int src, int line) { op3(Opcode::MOV, dst, src, 0, line); }
  void ld(int dst, int base, uint64_t off, int line) {
    op_imm(Opcode::LD, dst, base, (int64_t)off, line);
  }
  void st(int val, int base, uint64_t off, int line) {
    Instruction in;
    in.op = Opcode::ST;
    in.src1 = (uint8_t)val;
    in.src2 = (uint8_t)base;
    in.imm = (int64_t)off;
    in.source_line = line;
    code_.push_back(in);
  }

  void jump_to(int block, int line) {
    Instruction in;
    in.op = Opcode::JMP;
    in.source_line = line;
    fixups_.push_back({(int)code_.size(), block});
    code_.push_back(in);
  }

  void branch_to(Opcode op, int cond_reg, int block, bool secure, int line) {
    Instruction in;
    in.op = op;
    in.src1 = (uint8_t)cond_reg;
    in.secure = secure;
    in.source_line = line;
    fixups_.push_back({(int)code_.size(), block});
    code_.push_back(in);
  }

  int S(int d) const { return scratch0_ + d; }

  // Resolve a variable's current storage: the innermost enclosing region
  // that shadows it owns the copy for whichever arm this code sits on.
  uint64_t mem_addr(const std::string& name, const Context& ctx) const {
    for (const auto& [ri, nt] : ctx) {
      auto it = regions_[ri].copy.find(name);
      if (it != regions_[ri].copy.end())
        return nt ? it->second.first : it->second.second;
    }
    return layout_.vars.at(name).addr;
  }

  // Result of a fold to 0/1 replaces S(d); uses S(d+1).
  void boolify(int d, int line) {
    op3(Opcode::SUB, S(d + 1), 0, S(d), line);
    op3(Opcode::OR, S(d), S(d), S(d + 1), line);
    op_imm(Opcode::SHR, S(d), S(d), 63, line);
  }

  void flip01(int d, int line) {  // S(d) in {0,1} -> 1 - S(d)
    ldi(S(d + 1), 1, line);
    op3(Opcode::SUB, S(d), S(d + 1), S(d), line);
  }

  static Opcode arith_op(BinOp op) {
    switch (op) {
      case BinOp::add: return Opcode::ADD;
      case BinOp::sub: return Opcode::SUB;
      case BinOp::mul: return Opcode::MUL;
      case BinOp::band: return Opcode::AND;
      case BinOp::bor: return Opcode::OR;
      case BinOp::bxor: return Opcode::XOR;
      case BinOp::lt: return Opcode::SLT;
      default: return Opcode::NOP;
    }
  }

  // Value of e into S(d), using S(d..kScratch-1). Caller checked need().
  void gen_r(const ExprPtr& e, int d, const Context& ctx) {
    int line = e->line;
    switch (e->kind) {
      case Expr::Kind::num:
        ldi(S(d), e->num, line);
        return;
      case Expr::Kind::var: {
        const auto& slot = layout_.vars.at(e->var);
        if (slot.in_reg)
          mov(S(d), slot.reg, line);
        else
          ld(S(d), 0, mem_addr(e->var, ctx), line);
        return;
      }
      case Expr::Kind::index: {
        uint64_t base = mem_addr(e->var, ctx);
        if (e->a->kind == Expr::Kind::num) {
          ld(S(d), 0, base + (uint64_t)e->a->num, line);
        } else {
          gen_r(e->a, d, ctx);
          ld(S(d), S(d), base, line);
        }
        return;
      }
      case Expr::Kind::unary:
        gen_r(e->a, d, ctx);
        if (e->uop == UnOp::neg) {
          op3(Opcode::SUB, S(d), 0, S(d), line);
        } else {
          boolify(d, line);
          if (e->uop == UnOp::lnot) flip01(d, line);
        }
        return;
      case Expr::Kind::binary:
        break;
    }
    if (e->bop == BinOp::divc || e->bop == BinOp::shl || e->bop == BinOp::shr) {
      gen_r(e->a, d, ctx);
      Opcode op = e->bop == BinOp::divc
                      ? Opcode::DIVC
                      : (e->bop == BinOp::shl ? Opcode::SHL : Opcode::SHR);
      op_imm(op, S(d), S(d), e->b->num, line);
      return;
    }
    if (e->bop == BinOp::land) {
      gen_r(e->a, d, ctx);
      boolify(d, line);
      gen_r(e->b, d + 1, ctx);
      boolify(d + 1, line);
      op3(Opcode::AND, S(d), S(d), S(d + 1), line);
      return;
    }
    gen_r(e->a, d, ctx);
    gen_r(e->b, d + 1, ctx);
    switch (e->bop) {
      case BinOp::lor:
        op3(Opcode::OR, S(d), S(d), S(d + 1), line);
        boolify(d, line);
        break;
      case BinOp::eq:
        op3(Opcode::XOR, S(d), S(d), S(d + 1), line);
        boolify(d, line);
        flip01(d, line);
        break;
      case BinOp::ne:
        op3(Opcode::XOR, S(d), S(d), S(d + 1), line);
        boolify(d, line);
        break;
      default:
        op3(arith_op(e->bop), S(d), S(d), S(d + 1), line);
    }
  }

  void push_s0(int line) {
    assert(sp_ < layout_.total_words - eval_stack_base_);
    st(S(0), 0, eval_stack_base_ + sp_++, line);
  }

  void pop_to(int reg, int line) {
    ld(reg, 0, eval_stack_base_ + --sp_, line);
  }

  // Deep expressions spill partial results to a compile-time-addressed
  // scratch area, so evaluation order and addresses never depend on data.
  void gen_stack(const ExprPtr& e, const Context& ctx) {
    if (need(e) <= kScratch) {
      gen_r(e, 0, ctx);
      push_s0(e->line);
      return;
    }
    int line = e->line;
    switch (e->kind) {
      case Expr::Kind::binary: {
        if (e->bop == BinOp::divc || e->bop == BinOp::shl ||
            e->bop == BinOp::shr) {
          gen_stack(e->a, ctx);
          pop_to(S(0), line);
          Opcode op = e->bop == BinOp::divc
                          ? Opcode::DIVC
                          : (e->bop == BinOp::shl ? Opcode::SHL : Opcode::SHR);
          op_imm(op, S(0), S(0), e->b->num, line);
          push_s0(line);
          return;
        }
        gen_stack(e->a, ctx);
        gen_stack(e->b, ctx);
        pop_to(S(1), line);
        pop_to(S(0), line);
        switch (e->bop) {
          case BinOp::land:
            mov(S(2), S(1), line);  // boolify(0) scratches S(1)
            boolify(0, line);
            boolify(2, line);
            op3(Opcode::AND, S(0), S(0), S(2), line);
            break;
          case BinOp::lor:
            op3(Opcode::OR, S(0), S(0), S(1), line);
            boolify(0, line);
            break;
          case BinOp::eq:
            op3(Opcode::XOR, S(0), S(0), S(1), line);
            boolify(0, line);
            flip01(0, line);
            break;
          case BinOp::ne:
            op3(Opcode::XOR, S(0), S(0), S(1), line);
            boolify(0, line);
            break;
          default:
            op3(arith_op(e->bop), S(0), S(0), S(1), line);
        }
        push_s0(line);
        return;
      }
      case Expr::Kind::unary:
        gen_stack(e->a, ctx);
        pop_to(S(0), line);
        if (e->uop == UnOp::neg) {
          op3(Opcode::SUB, S(0), 0, S(0), line);
        } else {
          boolify(0, line);
          if (e->uop == UnOp::lnot) flip01(0, line);
        }
        push_s0(line);
        return;
      case Expr::Kind::index:
        gen_stack(e->a, ctx);
        pop_to(S(0), line);
        ld(S(0), S(0), mem_addr(e->var, ctx), line);
        push_s0(line);
        return;
      default:
        gen_r(e, 0, ctx);
        push_s0(line);
    }
  }

  // Value of e into S(0).
  void emit_expr(const ExprPtr& e, const Context& ctx) {
    if (need(e) <= kScratch) {
      gen_r(e, 0, ctx);
    } else {
      gen_stack(e, ctx);
      pop_to(S(0), e->line);
    }
    assert(sp_ == 0);
  }

  void emit_assign(const StmtPtr& s, const Context& ctx) {
    const auto& slot = layout_.vars.at(s->target);
    if (!s->target_index) {
      emit_expr(s->value, ctx);
      if (slot.in_reg)
        mov(slot.reg, S(0), s->line);
      else
        st(S(0), 0, mem_addr(s->target, ctx), s->line);
      return;
    }
    if (s->target_index->kind == Expr::Kind::num) {
      emit_expr(s->value, ctx);
      st(S(0), 0, mem_addr(s->target, ctx) + (uint64_t)s->target_index->num,
         s->line);
      return;
    }
    // Dynamic index: value first, index into S(1).
    emit_expr(s->value, ctx);
    if (need(s->target_index) <= kScratch - 1) {
      gen_r(s->target_index, 1, ctx);
    } else {
      push_s0(s->line);
      gen_stack(s->target_index, ctx);
      pop_to(S(1), s->line);
      pop_to(S(0), s->line);
    }
    st(S(0), S(1), mem_addr(s->target, ctx), s->line);
  }

  // ---- instrumentation pieces ----

  Context block_context(int b) const {
    std::vector<std::pair<int, int>> found;  // (depth, region index)
    for (int ri = 0; ri < (int)regions_.size(); ri++)
      if (regions_[ri].member[b]) found.push_back({regions_[ri].depth, ri});
    std::sort(found.begin(), found.end(),
              [](auto& a, auto& b) { return a.first > b.first; });
    Context ctx;
    for (auto& [d, ri] : found)
      ctx.push_back({ri, on_nt_side(regions_[ri], b)});
    return ctx;
  }

  // Both copies seeded from the variable's current storage before the branch
  // commits, so each arm starts from the same state the original program saw.
  void emit_shadow_init(const Region& r, const Context& outer_ctx) {
    for (const auto& name : r.shadowed) {
      const auto& slot = layout_.vars.at(name);
      uint64_t src = mem_addr(name, outer_ctx);
      auto [nt, t] = r.copy.at(name);
      for (int64_t w = 0; w < slot.size; w++) {
        ld(S(0), 0, src + w, cfg_.blocks[r.branch].line);
        st(S(0), 0, nt + w, cfg_.blocks[r.branch].line);
        st(S(0), 0, t + w, cfg_.blocks[r.branch].line);
      }
    }
  }

  // The predicate register still holds the branch condition: nonzero means
  // the not-taken arm was the real one, so its copy wins.
  void emit_merge(const Region& r, const Context& outer_ctx, int line) {
    for (const auto& name : r.shadowed) {
      const auto& slot = layout_.vars.at(name);
      uint64_t dst = mem_addr(name, outer_ctx);
      auto [nt, t] = r.copy.at(name);
      for (int64_t w = 0; w < slot.size; w++) {
        ld(S(0), 0, t + w, line);
        ld(S(1), 0, nt + w, line);
        op3(Opcode::CMOV, S(0), r.pred_reg, S(1), line);
        st(S(0), 0, dst + w, line);
      }
    }
  }

  // ---- whole-program emission ----

  void emit_all() {
    int n = (int)cfg_.blocks.size();
    block_pc_.assign(n, 0);

    // Seed explicit initial values, then pull register-resident variables
    // out of their memory homes so external pokes of init memory apply.
    for (const auto& d : ast_.decls) {
      if (d.init == 0) continue;
      const auto& slot = layout_.vars.at(d.name);
      ldi(S(0), d.init, d.line);
      st(S(0), 0, slot.addr, d.line);
    }
    for (const auto& d : ast_.decls) {
      const auto& slot = layout_.vars.at(d.name);
      if (slot.in_reg) ld(slot.reg, 0, slot.addr, d.line);
    }

    for (int b = 0; b < n; b++) {
      block_pc_[b] = (int)code_.size();
      const auto& bb = cfg_.blocks[b];
      Context ctx = block_context(b);

      // Joins: close every region ending here, innermost first. The
      // end-of-branch marker must come before any merge code so the final
      // arrival restores registers before the merges run once.
      std::vector<int> ending;
      for (int ri = 0; ri < (int)regions_.size(); ri++)
        if (regions_[ri].join == b) ending.push_back(ri);
      std::sort(ending.begin(), ending.end(), [&](int x, int y) {
        return regions_[x].depth > regions_[y].depth;
      });
      for (int ri : ending) {
        Instruction in;
        in.op = Opcode::EOSJMP;
        in.source_line = cfg_.blocks[regions_[ri].branch].line;
        code_.push_back(in);
      }
      for (int ri : ending)
        emit_merge(regions_[ri], block_context(regions_[ri].branch),
                   cfg_.blocks[regions_[ri].branch].line);

      for (const auto& s : bb.stmts) emit_assign(s, ctx);

      switch (bb.term) {
        case BasicBlock::Term::branch: {
          assert(bb.succ_then == b + 1 && "then arm must fall through");
          const Region* r = nullptr;
          if (sempe_ && taint_.secret_branch[b]) {
            for (const auto& q : regions_)
              if (q.branch == b) r = &q;
          }
          if (r) emit_shadow_init(*r, ctx);
          emit_expr(bb.cond, ctx);
          if (r) {
            mov(r->pred_reg, S(0), bb.line);
            branch_to(Opcode::BZ, S(0), bb.succ_else, true, bb.line);
          } else {
            branch_to(Opcode::BZ, S(0), bb.succ_else, false, bb.line);
          }
          break;
        }
        case BasicBlock::Term::jump:
          if (bb.succ != b + 1) jump_to(bb.succ, bb.line);
          break;
        case BasicBlock::Term::exit: {
          for (const auto& d : ast_.decls) {
            const auto& slot = layout_.vars.at(d.name);
            if (slot.in_reg) st(slot.reg, 0, slot.addr, 0);
          }
          Instruction in;
          in.op = Opcode::HALT;
          code_.push_back(in);
          break;
        }
      }
    }

    for (const auto& [idx, block] : fixups_)
      code_[idx].imm = block_pc_[block];
  }

  const Ast& ast_;
  const Cfg& cfg_;
  const TaintResult& taint_;
  bool sempe_;
  CodegenOptions opt_;

  std::vector<Diag> diags_;
  std::vector<Region> regions_;
  std::vector<int> ipdom_;
  int max_depth_ = 0;
  Layout layout_;
  int scratch0_ = 0;
  int pred0_ = 0;
  uint64_t eval_stack_base_ = 0;
  uint64_t sp_ = 0;

  std::vector<Instruction> code_;
  std::vector<int> block_pc_;
  std::vector<std::pair<int, int>> fixups_;  // instruction index -> block
};

}  // namespace

CompileOutput compile(const Ast& parsed, Pipeline pipe,
                      const CodegenOptions& opt) {
  CompileOutput out;
  auto inl = inline_calls(parsed);
  if (!inl.ok) {
    out.diags = std::move(inl.diags);
    return out;
  }
  Ast ast = std::move(inl.ast);

  if (pipe == Pipeline::cte) {
    auto low0 = lower(ast);
    if (!low0.ok) {
      out.diags = std::move(low0.diags);
      return out;
    }
    auto t0 = taint(low0.cfg, ast);
    auto tr = transform_cte(ast, t0.secret);
    if (!tr.ok) {
      out.diags = std::move(tr.diags);
      return out;
    }
    ast = std::move(tr.ast);
  } else if (pipe == Pipeline::sempe && opt.collapse) {
    auto low0 = lower(ast);
    if (!low0.ok) {
      out.diags = std::move(low0.diags);
      return out;
    }
    auto t0 = taint(low0.cfg, ast);
    ast = collapse_nesting(ast, t0.secret);
  }

  auto low = lower(ast);
  if (!low.ok) {
    out.diags = std::move(low.diags);
    return out;
  }
  auto tn = taint(low.cfg, ast);
  if (pipe == Pipeline::cte) {
    for (int b = 0; b < (int)low.cfg.blocks.size(); b++)
      if (tn.secret_branch[b]) {
        out.diags.push_back(
            {low.cfg.blocks[b].line, "secret branch survived the rewrite"});
        return out;
      }
  }

  Codegen gen(ast, low.cfg, tn, pipe == Pipeline::sempe, opt);
  return gen.run();
}

std::string layout_json(const CompileOutput& out) {
  nlohmann::json j;
  j["registers"] = out.layout.register_count;
  j["globals_end"] = out.layout.globals_end;
  j["data_words"] = out.layout.total_words;
  nlohmann::json vars = nlohmann::json::object();
  for (const auto& [name, slot] : out.layout.vars) {
    nlohmann::json v;
    v["addr"] = slot.addr;
    v["size"] = slot.size;
    if (slot.in_reg) v["reg"] = slot.reg;
    v["secret"] = std::find(out.layout.secrets.begin(),
                            out.layout.secrets.end(),
                            name) != out.layout.secrets.end();
    vars[name] = v;
  }
  j["variables"] = vars;
  nlohmann::json lines = nlohmann::json::array();
  for (const auto& in : out.program.instructions)
    lines.push_back(in.source_line);
  j["source_lines"] = lines;
  return j.dump(2);
}

}  // namespace sempe::seclang
