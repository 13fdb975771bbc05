#include "sempe/isa.hpp"

#include <algorithm>
#include <cassert>
#include <cctype>
#include <charconv>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace sempe {

std::string_view opcode_name(Opcode op) {
  switch (op) {
    case Opcode::LDI:    return "ldi";
    case Opcode::MOV:    return "mov";
    case Opcode::ADD:    return "add";
    case Opcode::SUB:    return "sub";
    case Opcode::MUL:    return "mul";
    case Opcode::DIVC:   return "divc";
    case Opcode::AND:    return "and";
    case Opcode::OR:     return "or";
    case Opcode::XOR:    return "xor";
    case Opcode::SHL:    return "shl";
    case Opcode::SHR:    return "shr";
    case Opcode::SLT:    return "slt";
    case Opcode::LD:     return "ld";
    case Opcode::ST:     return "st";
    case Opcode::JMP:    return "jmp";
    case Opcode::BZ:     return "bz";
    case Opcode::BNZ:    return "bnz";
    case Opcode::CMOV:   return "cmov";
    case Opcode::CALL:   return "call";
    case Opcode::RET:    return "ret";
    case Opcode::HALT:   return "halt";
    case Opcode::NOP:    return "nop";
    case Opcode::EOSJMP: return "eosjmp";
  }
  return "?";
}

std::optional<Opcode> opcode_from_name(std::string_view name) {
  static const std::map<std::string_view, Opcode> table = {
      {"ldi", Opcode::LDI},   {"mov", Opcode::MOV},   {"add", Opcode::ADD},
      {"sub", Opcode::SUB},   {"mul", Opcode::MUL},   {"divc", Opcode::DIVC},
      {"and", Opcode::AND},   {"or", Opcode::OR},     {"xor", Opcode::XOR},
      {"shl", Opcode::SHL},   {"shr", Opcode::SHR},   {"slt", Opcode::SLT},
      {"ld", Opcode::LD},     {"st", Opcode::ST},     {"jmp", Opcode::JMP},
      {"bz", Opcode::BZ},     {"bnz", Opcode::BNZ},   {"cmov", Opcode::CMOV},
      {"call", Opcode::CALL}, {"ret", Opcode::RET},   {"halt", Opcode::HALT},
      {"nop", Opcode::NOP},   {"eosjmp", Opcode::EOSJMP},
  };
  auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

bool has_imm(Opcode op) {
  switch (op) {
    case Opcode::LDI:
    case Opcode::DIVC:
    case Opcode::SHL:
    case Opcode::SHR:
    case Opcode::LD:
    case Opcode::ST:
    case Opcode::JMP:
    case Opcode::BZ:
    case Opcode::BNZ:
    case Opcode::CALL:
      return true;
    default:
      return false;
  }
}

bool is_jump_target(Opcode op) {
  return op == Opcode::JMP || op == Opcode::BZ || op == Opcode::BNZ ||
         op == Opcode::CALL;
}

int encoded_size(const Instruction& in) {
  if (in.op == Opcode::NOP) return 1;
  if (in.op == Opcode::EOSJMP) return 2;
  int n = 4 + (has_imm(in.op) ? 8 : 0);
  if (in.secure) n += 1;
  return n;
}

std::string format_diags(const std::vector<Diag>& diags) {
  std::ostringstream os;
  for (const auto& d : diags) {
    if (d.line > 0) os << "line " << d.line << ": ";
    os << d.msg << "\n";
  }
  return os.str();
}

// ─── validate ────────────────────────────────────────────────────────────

namespace {

struct OperandUse {
  bool dst = false, src1 = false, src2 = false;
};

OperandUse operand_use(Opcode op) {
  switch (op) {
    case Opcode::LDI:  return {true, false, false};
    case Opcode::MOV:  return {true, true, false};
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
    case Opcode::AND:
    case Opcode::OR:
    case Opcode::XOR:
    case Opcode::SLT:
    case Opcode::CMOV: return {true, true, true};
    case Opcode::DIVC:
    case Opcode::SHL:
    case Opcode::SHR:
    case Opcode::LD:   return {true, true, false};
    case Opcode::ST:   return {false, true, true};
    case Opcode::BZ:
    case Opcode::BNZ:  return {false, true, false};
    default:           return {false, false, false};
  }
}

}  // namespace

std::vector<Diag> validate(const Program& p) {
  std::vector<Diag> diags;
  auto err = [&](int i, std::string m) { diags.push_back({i + 1, std::move(m)}); };

  if (p.register_count < 1 || p.register_count > 256) {
    diags.push_back({0, "register_count must be in [1, 256]"});
    return diags;
  }
  const int n = static_cast<int>(p.instructions.size());
  if (n == 0) {
    diags.push_back({0, "empty program"});
    return diags;
  }
  if (p.entry < 0 || p.entry >= n) diags.push_back({0, "entry point out of range"});

  const unsigned R = static_cast<unsigned>(p.register_count);
  for (int i = 0; i < n; i++) {
    const Instruction& in = p.instructions[i];
    OperandUse use = operand_use(in.op);
    if ((use.dst && in.dst >= R) || (use.src1 && in.src1 >= R) ||
        (use.src2 && in.src2 >= R))
      err(i, "register index out of range");
    if ((!use.dst && in.dst != 0) || (!use.src1 && in.src1 != 0) ||
        (!use.src2 && in.src2 != 0))
      err(i, "unused operand byte must be zero");
    if (in.secure && in.op != Opcode::BZ && in.op != Opcode::BNZ)
      err(i, "secure prefix is only valid on bz/bnz");
    if (in.op == Opcode::DIVC && in.imm == 0) err(i, "divc divisor must be nonzero");
    if ((in.op == Opcode::SHL || in.op == Opcode::SHR) &&
        (in.imm < 0 || in.imm > 63))
      err(i, "shift amount must be in [0, 63]");
    if (is_jump_target(in.op) && (in.imm < 0 || in.imm >= n))
      err(i, "branch target out of range");
    if (!has_imm(in.op) && in.imm != 0) err(i, "unused immediate must be zero");
  }
  if (!diags.empty()) return diags;

  // Best-effort reachability of a stopping instruction from entry.
  std::vector<char> seen(n, 0);
  std::deque<int> work{p.entry};
  bool stop_reachable = false;
  while (!work.empty()) {
    int i = work.front();
    work.pop_front();
    if (i < 0 || i >= n || seen[i]) continue;
    seen[i] = 1;
    const Instruction& in = p.instructions[i];
    if (in.op == Opcode::HALT || in.op == Opcode::RET) {
      stop_reachable = true;
      continue;
    }
    if (in.op == Opcode::JMP) {
      work.push_back(static_cast<int>(in.imm));
      continue;
    }
    if (is_jump_target(in.op)) work.push_back(static_cast<int>(in.imm));
    work.push_back(i + 1);
  }
  if (!stop_reachable)
    diags.push_back({0, "no halt or ret is reachable from the entry point"});
  return diags;
}

// ─── assembler ───────────────────────────────────────────────────────────

namespace {

std::vector<std::string> split_operands(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& t : out) {
    size_t a = t.find_first_not_of(" \t");
    size_t b = t.find_last_not_of(" \t");
    t = (a == std::string::npos) ? "" : t.substr(a, b - a + 1);
  }
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

bool parse_reg(const std::string& t, uint8_t* out) {
  if (t.size() < 2 || (t[0] != 'r' && t[0] != 'R')) return false;
  unsigned v = 0;
  auto [p, ec] = std::from_chars(t.data() + 1, t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || v > 255) return false;
  *out = static_cast<uint8_t>(v);
  return true;
}

bool parse_int(const std::string& t, int64_t* out) {
  if (t.empty()) return false;
  std::string_view s = t;
  bool neg = false;
  if (s[0] == '+' || s[0] == '-') {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) return false;
  uint64_t v = 0;
  std::from_chars_result res{};
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X'))
    res = std::from_chars(s.data() + 2, s.data() + s.size(), v, 16);
  else
    res = std::from_chars(s.data(), s.data() + s.size(), v, 10);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return false;
  *out = neg ? -static_cast<int64_t>(v) : static_cast<int64_t>(v);
  return true;
}

bool valid_label(const std::string& t) {
  if (t.empty() || (!std::isalpha(static_cast<unsigned char>(t[0])) && t[0] != '_'))
    return false;
  return std::all_of(t.begin(), t.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

}  // namespace

AsmResult assemble(std::string_view source) {
  AsmResult r;
  struct Line {
    int number;
    std::string text;
  };
  std::vector<Line> lines;
  {
    int num = 1;
    std::string cur;
    for (size_t i = 0; i <= source.size(); i++) {
      if (i == source.size() || source[i] == '\n') {
        size_t semi = cur.find(';');
        if (semi != std::string::npos) cur.erase(semi);
        lines.push_back({num++, cur});
        cur.clear();
      } else {
        cur += source[i];
      }
    }
  }

  auto err = [&](int line, std::string m) { r.diags.push_back({line, std::move(m)}); };

  // Pass 1: labels and instruction slots.
  struct Slot {
    int line;
    std::string mnemonic;
    std::string rest;
  };
  std::vector<Slot> slots;
  for (auto& ln : lines) {
    std::string s = ln.text;
    for (;;) {
      size_t a = s.find_first_not_of(" \t");
      if (a == std::string::npos) {
        s.clear();
        break;
      }
      s.erase(0, a);
      size_t colon = s.find(':');
      size_t space = s.find_first_of(" \t");
      if (colon != std::string::npos && (space == std::string::npos || colon < space)) {
        std::string label = s.substr(0, colon);
        if (!valid_label(label)) {
          err(ln.number, "invalid label '" + label + "'");
        } else if (r.program.labels.count(label)) {
          err(ln.number, "duplicate label '" + label + "'");
        } else {
          r.program.labels[label] = static_cast<int>(slots.size());
        }
        s.erase(0, colon + 1);
        continue;
      }
      break;
    }
    if (s.empty()) continue;
    size_t sp = s.find_first_of(" \t");
    std::string mnem = s.substr(0, sp);
    std::string rest = sp == std::string::npos ? "" : s.substr(sp + 1);
    slots.push_back({ln.number, mnem, rest});
  }

  // Pass 2: operands.
  for (auto& slot : slots) {
    Instruction in;
    in.source_line = slot.line;
    std::string mnem = slot.mnemonic;
    if (mnem.rfind("s.", 0) == 0) {
      in.secure = true;
      mnem = mnem.substr(2);
    }
    auto op = opcode_from_name(mnem);
    if (!op) {
      err(slot.line, "unknown mnemonic '" + slot.mnemonic + "'");
      continue;
    }
    in.op = *op;
    if (in.secure && in.op != Opcode::BZ && in.op != Opcode::BNZ) {
      err(slot.line, "secure prefix is only valid on bz/bnz");
      continue;
    }
    auto ops = split_operands(slot.rest);
    auto want = [&](size_t k) {
      if (ops.size() == k) return true;
      std::ostringstream os;
      os << opcode_name(in.op) << " expects " << k << " operand(s), got " << ops.size();
      err(slot.line, os.str());
      return false;
    };
    auto reg = [&](const std::string& t, uint8_t* out) {
      if (parse_reg(t, out)) return true;
      err(slot.line, "expected register, got '" + t + "'");
      return false;
    };
    auto imm = [&](const std::string& t) {
      if (parse_int(t, &in.imm)) return true;
      err(slot.line, "expected integer, got '" + t + "'");
      return false;
    };
    // Branch targets resolve in a fixup pass; stash the token.
    std::string target_tok;
    bool bad = false;
    switch (in.op) {
      case Opcode::LDI:
        bad = !want(2) || !reg(ops[0], &in.dst) || !imm(ops[1]);
        break;
      case Opcode::MOV:
        bad = !want(2) || !reg(ops[0], &in.dst) || !reg(ops[1], &in.src1);
        break;
      case Opcode::ADD:
      case Opcode::SUB:
      case Opcode::MUL:
      case Opcode::AND:
      case Opcode::OR:
      case Opcode::XOR:
      case Opcode::SLT:
      case Opcode::CMOV:
        bad = !want(3) || !reg(ops[0], &in.dst) || !reg(ops[1], &in.src1) ||
              !reg(ops[2], &in.src2);
        break;
      case Opcode::DIVC:
      case Opcode::SHL:
      case Opcode::SHR:
        bad = !want(3) || !reg(ops[0], &in.dst) || !reg(ops[1], &in.src1) ||
              !imm(ops[2]);
        break;
      case Opcode::LD:
        bad = !want(3) || !reg(ops[0], &in.dst) || !reg(ops[1], &in.src1) ||
              !imm(ops[2]);
        break;
      case Opcode::ST:
        bad = !want(3) || !reg(ops[0], &in.src1) || !reg(ops[1], &in.src2) ||
              !imm(ops[2]);
        break;
      case Opcode::JMP:
      case Opcode::CALL:
        if (!want(1)) { bad = true; break; }
        target_tok = ops[0];
        break;
      case Opcode::BZ:
      case Opcode::BNZ:
        if (!want(2) || !reg(ops[0], &in.src1)) { bad = true; break; }
        target_tok = ops[1];
        break;
      case Opcode::RET:
      case Opcode::NOP:
      case Opcode::HALT:
      case Opcode::EOSJMP:
        bad = !want(0);
        break;
    }
    if (bad) continue;
    if (!target_tok.empty()) {
      if (auto it = r.program.labels.find(target_tok); it != r.program.labels.end()) {
        in.imm = it->second;
      } else if (int64_t v; parse_int(target_tok, &v)) {
        in.imm = v;
      } else {
        err(slot.line, "undefined label '" + target_tok + "'");
        continue;
      }
    }
    r.program.instructions.push_back(in);
  }

  // Labels may also point one past the end (common for a trailing target),
  // but branch range is checked by validate against the final count.
  r.ok = r.diags.empty();
  return r;
}

std::string program_to_asm(const Program& p) {
  // Synthesize labels for every referenced target.
  std::map<int, std::string> names;
  for (const auto& [name, idx] : p.labels) names.emplace(idx, name);
  int next = 0;
  for (const auto& in : p.instructions)
    if (is_jump_target(in.op) && !names.count(static_cast<int>(in.imm)))
      names[static_cast<int>(in.imm)] = "L" + std::to_string(next++);

  std::ostringstream os;
  for (size_t i = 0; i < p.instructions.size(); i++) {
    if (auto it = names.find(static_cast<int>(i)); it != names.end())
      os << it->second << ":\n";
    const Instruction& in = p.instructions[i];
    os << "    ";
    if (in.secure) os << "s.";
    os << opcode_name(in.op);
    auto r = [](int v) { return "r" + std::to_string(v); };
    auto tgt = [&](int64_t v) {
      auto it = names.find(static_cast<int>(v));
      return it != names.end() ? it->second : std::to_string(v);
    };
    switch (in.op) {
      case Opcode::LDI:
        os << " " << r(in.dst) << ", " << in.imm;
        break;
      case Opcode::MOV:
        os << " " << r(in.dst) << ", " << r(in.src1);
        break;
      case Opcode::ADD:
      case Opcode::SUB:
      case Opcode::MUL:
      case Opcode::AND:
      case Opcode::OR:
      case Opcode::XOR:
      case Opcode::SLT:
      case Opcode::CMOV:
        os << " " << r(in.dst) << ", " << r(in.src1) << ", " << r(in.src2);
        break;
      case Opcode::DIVC:
      case Opcode::SHL:
      case Opcode::SHR:
      case Opcode::LD:
        os << " " << r(in.dst) << ", " << r(in.src1) << ", " << in.imm;
        break;
      case Opcode::ST:
        os << " " << r(in.src1) << ", " << r(in.src2) << ", " << in.imm;
        break;
      case Opcode::JMP:
      case Opcode::CALL:
        os << " " << tgt(in.imm);
        break;
      case Opcode::BZ:
      case Opcode::BNZ:
        os << " " << r(in.src1) << ", " << tgt(in.imm);
        break;
      default:
        break;
    }
    os << "\n";
  }
  // A label may sit one past the last instruction.
  if (auto it = names.find(static_cast<int>(p.instructions.size())); it != names.end())
    os << it->second << ":\n";
  return os.str();
}

// ─── encode / decode ─────────────────────────────────────────────────────

BinaryImage encode(const Program& p) {
  BinaryImage img;
  const int n = static_cast<int>(p.instructions.size());
  img.byte_offsets.reserve(n);
  uint32_t off = 0;
  for (const auto& in : p.instructions) {
    img.byte_offsets.push_back(off);
    off += static_cast<uint32_t>(encoded_size(in));
  }
  img.bytes.reserve(off);

  for (int i = 0; i < n; i++) {
    const Instruction& in = p.instructions[i];
    if (in.op == Opcode::NOP) {
      img.bytes.push_back(kNopByte);
      continue;
    }
    if (in.op == Opcode::EOSJMP) {
      img.bytes.push_back(kSecurePrefix);
      img.bytes.push_back(kNopByte);
      continue;
    }
    if (in.secure) img.bytes.push_back(kSecurePrefix);
    img.bytes.push_back(static_cast<uint8_t>(in.op));
    img.bytes.push_back(in.dst);
    img.bytes.push_back(in.src1);
    img.bytes.push_back(in.src2);
    if (has_imm(in.op)) {
      int64_t v = in.imm;
      if (is_jump_target(in.op)) {
        if (v < 0 || v >= n)
          throw std::out_of_range("encode: branch target out of range");
        uint32_t end = img.byte_offsets[i] + static_cast<uint32_t>(encoded_size(in));
        v = static_cast<int64_t>(img.byte_offsets[static_cast<int>(v)]) -
            static_cast<int64_t>(end);
      }
      uint64_t u = static_cast<uint64_t>(v);
      for (int b = 0; b < 8; b++) img.bytes.push_back(static_cast<uint8_t>(u >> (8 * b)));
    }
  }
  return img;
}

DecodeResult decode(const std::vector<uint8_t>& bytes, Mode mode) {
  DecodeResult r;
  auto fail = [&](size_t off, const std::string& m) {
    std::ostringstream os;
    os << m << " at byte offset " << off;
    r.error = os.str();
    r.ok = false;
    return r;
  };

  std::map<uint32_t, int> start_to_index;
  struct Fixup {
    int index;
    int64_t disp;
    uint32_t end;  // offset just past the referencing instruction
  };
  std::vector<Fixup> fixups;

  size_t pos = 0;
  while (pos < bytes.size()) {
    const uint32_t start = static_cast<uint32_t>(pos);
    Instruction in;
    bool prefixed = false;
    uint8_t b = bytes[pos];

    if (b == kSecurePrefix) {
      if (pos + 1 >= bytes.size()) return fail(start, "truncated instruction");
      if (bytes[pos + 1] == kNopByte) {
        in.op = mode == Mode::sempe ? Opcode::EOSJMP : Opcode::NOP;
        pos += 2;
        start_to_index[start] = static_cast<int>(r.program.instructions.size());
        r.program.instructions.push_back(in);
        continue;
      }
      prefixed = true;
      pos++;
      b = bytes[pos];
    }

    if (b == kNopByte) {
      if (prefixed) return fail(start, "secure prefix on nop");  // unreachable
      in.op = Opcode::NOP;
      pos += 1;
    } else {
      if (b < static_cast<uint8_t>(Opcode::LDI) || b > static_cast<uint8_t>(Opcode::HALT)) {
        std::ostringstream os;
        os << "unknown opcode byte 0x" << std::hex << static_cast<int>(b);
        return fail(start, os.str());
      }
      in.op = static_cast<Opcode>(b);
      if (prefixed && in.op != Opcode::BZ && in.op != Opcode::BNZ)
        return fail(start, "secure prefix on non-branch opcode");
      size_t need = 4 + (has_imm(in.op) ? 8 : 0);
      if (pos + need > bytes.size()) return fail(start, "truncated instruction");
      in.dst = bytes[pos + 1];
      in.src1 = bytes[pos + 2];
      in.src2 = bytes[pos + 3];
      pos += 4;
      if (has_imm(in.op)) {
        uint64_t u = 0;
        for (int i = 0; i < 8; i++) u |= static_cast<uint64_t>(bytes[pos + i]) << (8 * i);
        in.imm = static_cast<int64_t>(u);
        pos += 8;
      }
      // Legacy hardware consumes the prefix and ignores it.
      in.secure = prefixed && mode == Mode::sempe;
      if (is_jump_target(in.op))
        fixups.push_back({static_cast<int>(r.program.instructions.size()), in.imm,
                          static_cast<uint32_t>(pos)});
    }
    start_to_index[start] = static_cast<int>(r.program.instructions.size());
    r.program.instructions.push_back(in);
  }

  for (const auto& f : fixups) {
    int64_t target_off = static_cast<int64_t>(f.end) + f.disp;
    auto it = target_off < 0
                  ? start_to_index.end()
                  : start_to_index.find(static_cast<uint32_t>(target_off));
    if (target_off < 0 || it == start_to_index.end())
      return fail(f.end, "branch displacement does not land on an instruction start");
    r.program.instructions[f.index].imm = it->second;
  }
  r.ok = true;
  return r;
}

}  // namespace sempe
