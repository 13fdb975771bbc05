#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sempe/machine.hpp"

namespace sempe {

// What the modeled attacker sees: committed pcs, memory and SPM addresses,
// pipeline drains, traps, and when each happened. Never data values.
enum class EventKind : uint8_t {
  commit,
  mem_read,
  mem_write,
  drain,
  spm_read,
  spm_write,
  trap,
};

std::string_view event_kind_name(EventKind k);

struct ObservationEvent {
  EventKind kind;
  int pc = 0;
  uint64_t addr = 0;  // word address; trap kind ordinal for trap events
  int64_t cycle = 0;

  bool operator==(const ObservationEvent& o) const {
    return kind == o.kind && pc == o.pc && addr == o.addr && cycle == o.cycle;
  }
};

struct Observation {
  std::vector<ObservationEvent> events;
  int64_t total_cycles = 0;
};

// TraceSink that accumulates an Observation. A trap is recorded as the final
// event so a secret-dependent trap fails comparison like any other leak.
class Recorder : public TraceSink {
 public:
  void on_commit(int pc, int64_t cycle) override;
  void on_mem(bool write, int pc, uint64_t addr, int64_t cycle) override;
  void on_spm(bool write, int pc, uint64_t addr, int64_t cycle) override;
  void on_drain(int pc, int64_t cycle) override;
  void on_trap(TrapKind kind, int pc, int64_t cycle) override;

  Observation obs;
};

// Runs the program and captures its observation. The execution result is
// written through out_result when given.
Observation observe(const Program& program, Mode mode, const MachineConfig& cfg = {},
                    std::vector<uint64_t> init_mem = {},
                    std::vector<uint64_t> init_regs = {},
                    ExecutionResult* out_result = nullptr);

struct DiffReport {
  bool equal = false;
  int64_t first_divergence = -1;  // event index; -1 when equal
  std::optional<ObservationEvent> lhs, rhs;  // absent side ran out of events
  size_t events_a = 0, events_b = 0;
  int64_t cycles_a = 0, cycles_b = 0;
};

// Exact elementwise comparison; no tolerance anywhere.
DiffReport compare(const Observation& a, const Observation& b);

std::string render(const DiffReport& d);

std::string serialize(const Observation& o);

struct TraceParseResult {
  bool ok = false;
  Observation obs;
  std::string error;
};

TraceParseResult parse_observation(const std::string& text);

struct SecretVar {
  std::string name;
  uint64_t addr = 0;  // word address of the input slot
  std::vector<uint64_t> domain;
};

struct ScanReport {
  bool indistinguishable = false;
  bool capped = false;
  size_t assignments_tested = 0;
  std::vector<std::vector<uint64_t>> assignments;
  std::vector<int64_t> cycles;
  // First offending pair when distinguishable.
  size_t pair_a = 0, pair_b = 0;
  DiffReport diff;
  int source_line = 0;  // source line of the first divergent event, if mapped
};

// Runs the program under every assignment of the secret variables (cartesian
// product, capped) and compares the observations pairwise against the first.
ScanReport leakage_scan(const Program& program, Mode mode,
                        const std::vector<SecretVar>& secrets,
                        const MachineConfig& cfg = {},
                        std::vector<uint64_t> base_mem = {},
                        std::vector<uint64_t> init_regs = {}, size_t cap = 256);

}  // namespace sempe
