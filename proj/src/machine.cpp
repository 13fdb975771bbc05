#include "sempe/machine.hpp"

#include <algorithm>
#include <cassert>
#include <climits>
#include <cstdint>

namespace sempe {

namespace {
constexpr size_t kDefaultDataWords = 4096;
constexpr int kMaxCallDepth = 4096;
}  // namespace

std::string_view trap_name(TrapKind k) {
  switch (k) {
    case TrapKind::jbtable_overflow:    return "jbtable_overflow";
    case TrapKind::unmatched_eosjmp:    return "unmatched_eosjmp";
    case TrapKind::step_limit_exceeded: return "step_limit_exceeded";
    case TrapKind::memory_out_of_bounds: return "memory_out_of_bounds";
    case TrapKind::call_depth_exceeded: return "call_depth_exceeded";
  }
  return "?";
}

Machine::Machine(const Program& program, Mode mode, MachineConfig cfg,
                 std::vector<uint64_t> init_mem, std::vector<uint64_t> init_regs,
                 TraceSink* sink)
    : prog_(program), mode_(mode), cfg_(cfg), sink_(sink) {
  regs_.assign(static_cast<size_t>(prog_.register_count), 0);
  for (size_t i = 0; i < init_regs.size() && i < regs_.size(); i++)
    regs_[i] = init_regs[i];
  size_t words = kDefaultDataWords;
  if (prog_.data_size > 0) words = std::max(words, static_cast<size_t>(prog_.data_size));
  words = std::max(words, init_mem.size());
  mem_ = std::move(init_mem);
  mem_.resize(words, 0);
  pc_ = prog_.entry;
  spm_.resize(static_cast<size_t>(std::max(0, cfg_.jb_capacity)));
  if (cfg_.timing.cache_enabled) {
    const auto& t = cfg_.timing;
    int64_t sets = std::max<int64_t>(1, t.cache_size / (t.cache_line * t.cache_ways));
    cache_.assign(static_cast<size_t>(sets * t.cache_ways), -1);
    cache_lru_.assign(cache_.size(), 0);
  }
}

void Machine::raise(TrapKind kind) {
  trap_ = Trap{kind, pc_};
  if (sink_) sink_->on_trap(kind, pc_, cycle_);
}

// Every architectural register write funnels through here so each active
// nesting level records it in the bit-vector of its current phase.
void Machine::wreg(int i, uint64_t v) {
  regs_[static_cast<size_t>(i)] = v;
  for (size_t d = 0; d < jb_.size(); d++) {
    Snapshot& s = spm_[d];
    (jb_[d].jb ? s.modified_t : s.modified_nt)[static_cast<size_t>(i)] = 1;
  }
}

int64_t Machine::mem_access_cost(uint64_t word_addr) {
  const auto& t = cfg_.timing;
  if (!t.cache_enabled) return 0;
  int64_t line = static_cast<int64_t>(word_addr * 8) / t.cache_line;
  int64_t sets = std::max<int64_t>(1, t.cache_size / (t.cache_line * t.cache_ways));
  int64_t set = line % sets;
  int64_t tag = line / sets;
  size_t base = static_cast<size_t>(set * t.cache_ways);
  lru_clock_++;
  for (int64_t w = 0; w < t.cache_ways; w++) {
    if (cache_[base + static_cast<size_t>(w)] == tag) {
      cache_lru_[base + static_cast<size_t>(w)] = lru_clock_;
      return 0;
    }
  }
  size_t victim = base;
  for (int64_t w = 1; w < t.cache_ways; w++)
    if (cache_lru_[base + static_cast<size_t>(w)] < cache_lru_[victim])
      victim = base + static_cast<size_t>(w);
  cache_[victim] = tag;
  cache_lru_[victim] = lru_clock_;
  return t.cache_miss_penalty;
}

void Machine::step_sjmp(const Instruction& in, bool taken) {
  const int R = static_cast<int>(regs_.size());
  jb_.push_back(JbEntry{static_cast<int>(in.imm), taken, true, false});
  const int slot = static_cast<int>(jb_.size()) - 1;
  Snapshot& s = spm_[static_cast<size_t>(slot)];
  s.regs_pre = regs_;
  s.regs_nt.assign(static_cast<size_t>(R), 0);
  s.modified_nt.assign(static_cast<size_t>(R), 0);
  s.modified_t.assign(static_cast<size_t>(R), 0);
  if (sink_) {
    const uint64_t base = static_cast<uint64_t>(slot) * 2 * static_cast<uint64_t>(R);
    for (int i = 0; i < R; i++) sink_->on_spm(true, pc_, base + static_cast<uint64_t>(i), cycle_);
    sink_->on_drain(pc_, cycle_);
  }
  pending_cost_ +=
      cfg_.timing.drain_penalty + cfg_.timing.spm_transfer_cycles(8 * static_cast<int64_t>(R));
}

int Machine::step_eosjmp() {
  const int R = static_cast<int>(regs_.size());
  const int slot = static_cast<int>(jb_.size()) - 1;
  JbEntry& e = jb_.back();
  Snapshot& s = spm_[static_cast<size_t>(slot)];
  const uint64_t base = static_cast<uint64_t>(slot) * 2 * static_cast<uint64_t>(R);
  assert(e.valid);

  if (!e.jb) {
    // First commit: end of the not-taken path. Save the registers that path
    // modified, roll them back to their pre-branch values so the taken path
    // computes from clean state, then jump to the taken target. The rollback
    // is a hardware restore and leaves the modified bit-vectors alone.
    e.jb = true;
    s.regs_nt = regs_;
    int64_t m = 0;
    for (int i = 0; i < R; i++) {
      if (!s.modified_nt[static_cast<size_t>(i)]) continue;
      m++;
      if (sink_)
        sink_->on_spm(true, pc_, base + static_cast<uint64_t>(R + i), cycle_);
      regs_[static_cast<size_t>(i)] = s.regs_pre[static_cast<size_t>(i)];
    }
    if (sink_) sink_->on_drain(pc_, cycle_);
    pending_cost_ += cfg_.timing.drain_penalty +
                     cfg_.timing.spm_transfer_cycles(8 * m + 2 * ((R + 7) / 8));
    return e.next_pc;
  }

  // Second commit: oblivious restore. The SPM read set and the transfer cost
  // cover modified_nt | modified_t whichever way the branch resolved. On a
  // taken outcome every touched register self-overwrites with its live
  // value; not-taken-only writes were already rolled back at the first
  // commit, so the live value is the right one across the whole set.
  std::vector<std::pair<int, uint64_t>> writes;
  int64_t m = 0;
  for (int i = 0; i < R; i++) {
    const bool in_nt = s.modified_nt[static_cast<size_t>(i)] != 0;
    const bool in_t = s.modified_t[static_cast<size_t>(i)] != 0;
    if (!in_nt && !in_t) continue;
    m++;
    const uint64_t candidate =
        in_nt ? s.regs_nt[static_cast<size_t>(i)] : s.regs_pre[static_cast<size_t>(i)];
    if (sink_)
      sink_->on_spm(false, pc_,
                    in_nt ? base + static_cast<uint64_t>(R + i) : base + static_cast<uint64_t>(i),
                    cycle_);
    const uint64_t live = regs_[static_cast<size_t>(i)];
    writes.emplace_back(i, e.outcome_taken ? live : candidate);
  }
  if (sink_) sink_->on_drain(pc_, cycle_);
  pending_cost_ += cfg_.timing.drain_penalty + cfg_.timing.spm_transfer_cycles(8 * m);
  jb_.pop_back();  // pop first so the restore writes land in outer bit-vectors
  for (const auto& [i, v] : writes) wreg(i, v);
  return pc_ + 1;
}

bool Machine::step() {
  if (halted_ || trap_) return false;
  if (committed_ >= cfg_.step_limit) {
    raise(TrapKind::step_limit_exceeded);
    return false;
  }
  if (pc_ < 0 || pc_ >= static_cast<int>(prog_.instructions.size())) {
    raise(TrapKind::memory_out_of_bounds);
    return false;
  }
  const Instruction& in = prog_.instructions[static_cast<size_t>(pc_)];
  const bool sempe_mode = mode_ == Mode::sempe;

  // Trap preconditions resolve before any architectural effect; a trapping
  // instruction does not commit.
  uint64_t ea = 0;
  switch (in.op) {
    case Opcode::LD:
      ea = rreg(in.src1) + static_cast<uint64_t>(in.imm);
      if (ea >= mem_.size()) {
        raise(TrapKind::memory_out_of_bounds);
        return false;
      }
      break;
    case Opcode::ST:
      ea = rreg(in.src2) + static_cast<uint64_t>(in.imm);
      if (ea >= mem_.size()) {
        raise(TrapKind::memory_out_of_bounds);
        return false;
      }
      break;
    case Opcode::BZ:
    case Opcode::BNZ:
      if (in.secure && sempe_mode &&
          static_cast<int>(jb_.size()) >= cfg_.jb_capacity) {
        raise(TrapKind::jbtable_overflow);
        return false;
      }
      break;
    case Opcode::EOSJMP:
      if (sempe_mode && jb_.empty()) {
        raise(TrapKind::unmatched_eosjmp);
        return false;
      }
      break;
    case Opcode::CALL:
      if (static_cast<int>(ret_stack_.size()) >= kMaxCallDepth) {
        raise(TrapKind::call_depth_exceeded);
        return false;
      }
      break;
    default:
      break;
  }

  if (sink_) sink_->on_commit(pc_, cycle_);
  committed_++;
  pending_cost_ = cfg_.timing.base_cpi;
  int next = pc_ + 1;

  switch (in.op) {
    case Opcode::LDI:
      wreg(in.dst, static_cast<uint64_t>(in.imm));
      break;
    case Opcode::MOV:
      wreg(in.dst, rreg(in.src1));
      break;
    case Opcode::ADD:
      wreg(in.dst, rreg(in.src1) + rreg(in.src2));
      break;
    case Opcode::SUB:
      wreg(in.dst, rreg(in.src1) - rreg(in.src2));
      break;
    case Opcode::MUL:
      wreg(in.dst, rreg(in.src1) * rreg(in.src2));
      break;
    case Opcode::DIVC: {
      const int64_t a = static_cast<int64_t>(rreg(in.src1));
      const int64_t d = in.imm;
      const int64_t q = (a == INT64_MIN && d == -1) ? INT64_MIN : a / d;
      wreg(in.dst, static_cast<uint64_t>(q));
      break;
    }
    case Opcode::AND:
      wreg(in.dst, rreg(in.src1) & rreg(in.src2));
      break;
    case Opcode::OR:
      wreg(in.dst, rreg(in.src1) | rreg(in.src2));
      break;
    case Opcode::XOR:
      wreg(in.dst, rreg(in.src1) ^ rreg(in.src2));
      break;
    case Opcode::SHL:
      wreg(in.dst, rreg(in.src1) << (in.imm & 63));
      break;
    case Opcode::SHR:
      wreg(in.dst, rreg(in.src1) >> (in.imm & 63));
      break;
    case Opcode::SLT:
      wreg(in.dst, static_cast<int64_t>(rreg(in.src1)) < static_cast<int64_t>(rreg(in.src2))
                       ? 1
                       : 0);
      break;
    case Opcode::LD:
      wreg(in.dst, mem_[ea]);
      if (sink_) sink_->on_mem(false, pc_, ea, cycle_);
      pending_cost_ += mem_access_cost(ea);
      break;
    case Opcode::ST:
      mem_[ea] = rreg(in.src1);
      if (sink_) sink_->on_mem(true, pc_, ea, cycle_);
      pending_cost_ += mem_access_cost(ea);
      break;
    case Opcode::JMP:
      next = static_cast<int>(in.imm);
      break;
    case Opcode::BZ:
    case Opcode::BNZ: {
      const bool taken =
          in.op == Opcode::BZ ? rreg(in.src1) == 0 : rreg(in.src1) != 0;
      if (in.secure && sempe_mode) {
        // Secure branch: record the outcome, fall through into the not-taken
        // path whichever way the condition resolved.
        step_sjmp(in, taken);
      } else {
        next = taken ? static_cast<int>(in.imm) : pc_ + 1;
      }
      break;
    }
    case Opcode::CMOV:
      wreg(in.dst, rreg(in.src1) != 0 ? rreg(in.src2) : rreg(in.dst));
      break;
    case Opcode::CALL:
      ret_stack_.push_back(pc_ + 1);
      next = static_cast<int>(in.imm);
      break;
    case Opcode::RET:
      if (ret_stack_.empty()) {
        halted_ = true;  // top-level return
      } else {
        next = ret_stack_.back();
        ret_stack_.pop_back();
      }
      break;
    case Opcode::NOP:
      break;
    case Opcode::HALT:
      halted_ = true;
      break;
    case Opcode::EOSJMP:
      if (sempe_mode) next = step_eosjmp();
      // Legacy parts execute 2E 90 as a NOP.
      break;
  }

  cycle_ += pending_cost_;
  if (!halted_) pc_ = next;
  return !halted_ && !trap_;
}

ExecutionResult Machine::run() {
  while (step()) {
  }
  ExecutionResult r;
  r.regs = regs_;
  r.mem = mem_;
  r.cycles = cycle_;
  r.committed = committed_;
  r.halted = halted_;
  r.trap = trap_;
  return r;
}

ExecutionResult run(const Program& program, Mode mode, const MachineConfig& cfg,
                    std::vector<uint64_t> init_mem, std::vector<uint64_t> init_regs,
                    TraceSink* sink) {
  Machine m(program, mode, cfg, std::move(init_mem), std::move(init_regs), sink);
  return m.run();
}

}  // namespace sempe
