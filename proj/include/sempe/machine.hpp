#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sempe/isa.hpp"

namespace sempe {

// Cost model. Committed instructions cost base_cpi; a secure branch adds one
// pipeline drain plus the register-file save, and each eosJMP commit adds a
// drain plus its SPM transfer. All costs depend on program structure only,
// never on register data values.
struct TimingModel {
  int64_t base_cpi = 1;
  int64_t drain_penalty = 14;
  int64_t spm_bytes_per_cycle = 64;
  bool cache_enabled = false;  // off by default; qualitative only
  int64_t cache_size = 32 * 1024;
  int64_t cache_ways = 2;
  int64_t cache_line = 64;
  int64_t cache_miss_penalty = 20;

  int64_t spm_transfer_cycles(int64_t bytes) const {
    return (bytes + spm_bytes_per_cycle - 1) / spm_bytes_per_cycle;
  }
};

struct MachineConfig {
  int jb_capacity = 30;
  int64_t step_limit = 100'000'000;
  TimingModel timing;
};

enum class TrapKind {
  jbtable_overflow,
  unmatched_eosjmp,
  step_limit_exceeded,
  memory_out_of_bounds,
  call_depth_exceeded,
};

std::string_view trap_name(TrapKind k);

struct Trap {
  TrapKind kind;
  int pc;
};

// One jump-back table entry, pushed when a secure branch commits.
struct JbEntry {
  int next_pc = 0;           // taken-path target
  bool outcome_taken = false;  // true branch outcome, fixed at sJMP commit
  bool valid = false;          // set exactly once, at sJMP commit
  bool jb = false;             // set when the first eosJMP jumps back
};

// Register snapshots for one nesting level. regs_pre is captured at the
// sJMP, regs_nt at the first eosJMP; the bit-vectors track writes during the
// not-taken and taken phases.
struct Snapshot {
  std::vector<uint64_t> regs_pre;
  std::vector<uint64_t> regs_nt;
  std::vector<uint8_t> modified_nt;
  std::vector<uint8_t> modified_t;
};

// SPM bytes one nesting level occupies: both register images plus the two
// modified bit-vectors.
inline int64_t spm_bytes_per_slot(int register_count) {
  return 2 * 8 * static_cast<int64_t>(register_count) + 2 * ((register_count + 7) / 8);
}

// Microarchitectural observer. Addresses are word-granular; data values are
// never reported. SPM addresses are slot*2R + area*R + reg with area 0 for
// the pre image and 1 for the not-taken image.
struct TraceSink {
  virtual ~TraceSink() = default;
  virtual void on_commit(int pc, int64_t cycle) { (void)pc, (void)cycle; }
  virtual void on_mem(bool write, int pc, uint64_t addr, int64_t cycle) {
    (void)write, (void)pc, (void)addr, (void)cycle;
  }
  virtual void on_spm(bool write, int pc, uint64_t addr, int64_t cycle) {
    (void)write, (void)pc, (void)addr, (void)cycle;
  }
  virtual void on_drain(int pc, int64_t cycle) { (void)pc, (void)cycle; }
  virtual void on_trap(TrapKind kind, int pc, int64_t cycle) {
    (void)kind, (void)pc, (void)cycle;
  }
};

struct ExecutionResult {
  std::vector<uint64_t> regs;
  std::vector<uint64_t> mem;
  int64_t cycles = 0;
  int64_t committed = 0;
  bool halted = false;
  std::optional<Trap> trap;
};

class Machine {
 public:
  Machine(const Program& program, Mode mode, MachineConfig cfg = {},
          std::vector<uint64_t> init_mem = {}, std::vector<uint64_t> init_regs = {},
          TraceSink* sink = nullptr);

  // Executes one instruction; returns false once halted or trapped.
  bool step();
  ExecutionResult run();

  int pc() const { return pc_; }
  int64_t cycle() const { return cycle_; }
  int64_t committed() const { return committed_; }
  bool halted() const { return halted_; }
  const std::optional<Trap>& trap() const { return trap_; }
  const std::vector<uint64_t>& regs() const { return regs_; }
  const std::vector<uint64_t>& mem() const { return mem_; }
  const std::vector<JbEntry>& jb_table() const { return jb_; }
  const Snapshot& spm_slot(int i) const { return spm_[i]; }

 private:
  uint64_t rreg(int i) const { return regs_[i]; }
  void wreg(int i, uint64_t v);
  void raise(TrapKind kind);
  int64_t mem_access_cost(uint64_t word_addr);

  void step_sjmp(const Instruction& in, bool taken);
  int step_eosjmp();  // returns the next pc

  const Program& prog_;
  Mode mode_;
  MachineConfig cfg_;
  TraceSink* sink_;

  int pc_ = 0;
  int64_t cycle_ = 0;
  int64_t committed_ = 0;
  bool halted_ = false;
  std::optional<Trap> trap_;
  std::vector<uint64_t> regs_;
  std::vector<uint64_t> mem_;
  std::vector<int> ret_stack_;
  std::vector<JbEntry> jb_;      // LIFO; size is the current nesting depth
  std::vector<Snapshot> spm_;    // parallel to jb_
  std::vector<int64_t> cache_;   // tag per way, -1 empty; lru in cache_lru_
  std::vector<int64_t> cache_lru_;
  int64_t lru_clock_ = 0;
  int64_t pending_cost_ = 0;
};

// Convenience wrapper: construct, run to completion.
ExecutionResult run(const Program& program, Mode mode, const MachineConfig& cfg = {},
                    std::vector<uint64_t> init_mem = {},
                    std::vector<uint64_t> init_regs = {}, TraceSink* sink = nullptr);

}  // namespace sempe
