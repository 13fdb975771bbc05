#include "sempe/trace.hpp"

#include <charconv>
#include <sstream>

namespace sempe {

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::commit:    return "commit";
    case EventKind::mem_read:  return "mem_read";
    case EventKind::mem_write: return "mem_write";
    case EventKind::drain:     return "drain";
    case EventKind::spm_read:  return "spm_read";
    case EventKind::spm_write: return "spm_write";
    case EventKind::trap:      return "trap";
  }
  return "?";
}

void Recorder::on_commit(int pc, int64_t cycle) {
  obs.events.push_back({EventKind::commit, pc, 0, cycle});
}

void Recorder::on_mem(bool write, int pc, uint64_t addr, int64_t cycle) {
  obs.events.push_back(
      {write ? EventKind::mem_write : EventKind::mem_read, pc, addr, cycle});
}

void Recorder::on_spm(bool write, int pc, uint64_t addr, int64_t cycle) {
  obs.events.push_back(
      {write ? EventKind::spm_write : EventKind::spm_read, pc, addr, cycle});
}

void Recorder::on_drain(int pc, int64_t cycle) {
  obs.events.push_back({EventKind::drain, pc, 0, cycle});
}

void Recorder::on_trap(TrapKind kind, int pc, int64_t cycle) {
  obs.events.push_back(
      {EventKind::trap, pc, static_cast<uint64_t>(kind), cycle});
}

Observation observe(const Program& program, Mode mode, const MachineConfig& cfg,
                    std::vector<uint64_t> init_mem, std::vector<uint64_t> init_regs,
                    ExecutionResult* out_result) {
  Recorder rec;
  ExecutionResult r =
      run(program, mode, cfg, std::move(init_mem), std::move(init_regs), &rec);
  rec.obs.total_cycles = r.cycles;
  if (out_result) *out_result = std::move(r);
  return std::move(rec.obs);
}

DiffReport compare(const Observation& a, const Observation& b) {
  DiffReport d;
  d.events_a = a.events.size();
  d.events_b = b.events.size();
  d.cycles_a = a.total_cycles;
  d.cycles_b = b.total_cycles;
  const size_t n = std::min(a.events.size(), b.events.size());
  for (size_t i = 0; i < n; i++) {
    if (!(a.events[i] == b.events[i])) {
      d.first_divergence = static_cast<int64_t>(i);
      d.lhs = a.events[i];
      d.rhs = b.events[i];
      return d;
    }
  }
  if (a.events.size() != b.events.size()) {
    d.first_divergence = static_cast<int64_t>(n);
    if (n < a.events.size()) d.lhs = a.events[n];
    if (n < b.events.size()) d.rhs = b.events[n];
    return d;
  }
  if (a.total_cycles != b.total_cycles) {
    d.first_divergence = static_cast<int64_t>(n);
    return d;
  }
  d.equal = true;
  return d;
}

namespace {

void render_event(std::ostringstream& os, const ObservationEvent& e) {
  os << "cycle " << e.cycle << " " << event_kind_name(e.kind) << " pc " << e.pc;
  if (e.kind != EventKind::commit && e.kind != EventKind::drain)
    os << " addr " << e.addr;
}

}  // namespace

std::string render(const DiffReport& d) {
  std::ostringstream os;
  if (d.equal) {
    os << "observations are identical (" << d.events_a << " events, "
       << d.cycles_a << " cycles)\n";
  } else {
    os << "observations diverge at event " << d.first_divergence << "\n";
    os << "  lhs: ";
    if (d.lhs) render_event(os, *d.lhs);
    else os << "<end of trace>";
    os << "\n  rhs: ";
    if (d.rhs) render_event(os, *d.rhs);
    else os << "<end of trace>";
    os << "\n";
  }
  os << "equal=" << (d.equal ? "true" : "false") << "\n";
  os << "first_divergence=" << d.first_divergence << "\n";
  os << "events_a=" << d.events_a << "\nevents_b=" << d.events_b << "\n";
  os << "cycles_a=" << d.cycles_a << "\ncycles_b=" << d.cycles_b << "\n";
  return os.str();
}

std::string serialize(const Observation& o) {
  std::ostringstream os;
  for (const auto& e : o.events) {
    os << e.cycle << " " << event_kind_name(e.kind) << " " << e.pc;
    if (e.kind != EventKind::commit && e.kind != EventKind::drain)
      os << " " << e.addr;
    os << "\n";
  }
  os << "total_cycles " << o.total_cycles << "\n";
  return os.str();
}

TraceParseResult parse_observation(const std::string& text) {
  TraceParseResult r;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool saw_total = false;
  auto fail = [&](const std::string& m) {
    r.ok = false;
    r.error = "trace line " + std::to_string(lineno) + ": " + m;
    return r;
  };
  while (std::getline(is, line)) {
    lineno++;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string first;
    ls >> first;
    if (first == "total_cycles") {
      if (!(ls >> r.obs.total_cycles)) return fail("malformed total_cycles");
      saw_total = true;
      continue;
    }
    ObservationEvent e;
    try {
      e.cycle = std::stoll(first);
    } catch (...) {
      return fail("expected cycle count");
    }
    std::string kind;
    if (!(ls >> kind >> e.pc)) return fail("malformed event");
    bool known = false;
    for (EventKind k :
         {EventKind::commit, EventKind::mem_read, EventKind::mem_write,
          EventKind::drain, EventKind::spm_read, EventKind::spm_write,
          EventKind::trap}) {
      if (kind == event_kind_name(k)) {
        e.kind = k;
        known = true;
        break;
      }
    }
    if (!known) return fail("unknown event kind '" + kind + "'");
    if (e.kind != EventKind::commit && e.kind != EventKind::drain) {
      if (!(ls >> e.addr)) return fail("event kind '" + kind + "' needs an address");
    }
    r.obs.events.push_back(e);
  }
  if (!saw_total) {
    lineno = 0;
    return fail("missing total_cycles line");
  }
  r.ok = true;
  return r;
}

ScanReport leakage_scan(const Program& program, Mode mode,
                        const std::vector<SecretVar>& secrets,
                        const MachineConfig& cfg, std::vector<uint64_t> base_mem,
                        std::vector<uint64_t> init_regs, size_t cap) {
  ScanReport report;

  // Enumerate the cartesian product of the secret domains, capped.
  std::vector<size_t> idx(secrets.size(), 0);
  bool done = secrets.empty() ? false : false;
  for (;;) {
    if (report.assignments.size() >= cap) {
      report.capped = true;
      break;
    }
    std::vector<uint64_t> a(secrets.size());
    for (size_t i = 0; i < secrets.size(); i++) a[i] = secrets[i].domain[idx[i]];
    report.assignments.push_back(std::move(a));
    if (secrets.empty()) break;
    size_t k = secrets.size();
    while (k > 0) {
      k--;
      if (++idx[k] < secrets[k].domain.size()) break;
      idx[k] = 0;
      if (k == 0) done = true;
    }
    if (done) break;
  }

  std::optional<Observation> first;
  for (size_t n = 0; n < report.assignments.size(); n++) {
    std::vector<uint64_t> mem = base_mem;
    for (size_t i = 0; i < secrets.size(); i++) {
      if (secrets[i].addr >= mem.size()) mem.resize(secrets[i].addr + 1, 0);
      mem[secrets[i].addr] = report.assignments[n][i];
    }
    Observation obs = observe(program, mode, cfg, std::move(mem), init_regs);
    report.cycles.push_back(obs.total_cycles);
    report.assignments_tested = n + 1;
    if (!first) {
      first = std::move(obs);
      continue;
    }
    DiffReport d = compare(*first, obs);
    if (!d.equal) {
      report.indistinguishable = false;
      report.pair_a = 0;
      report.pair_b = n;
      report.diff = d;
      const ObservationEvent* ev = d.lhs ? &*d.lhs : (d.rhs ? &*d.rhs : nullptr);
      if (ev && ev->pc >= 0 &&
          ev->pc < static_cast<int>(program.instructions.size()))
        report.source_line = program.instructions[static_cast<size_t>(ev->pc)].source_line;
      return report;
    }
  }
  report.indistinguishable = true;
  return report;
}

}  // namespace sempe
