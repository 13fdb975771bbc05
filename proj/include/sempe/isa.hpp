#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sempe {

// Instruction-start byte reserved for the secure prefix and for eosJMP.
inline constexpr uint8_t kSecurePrefix = 0x2E;
// Single-byte NOP; 2E 90 is eosJMP on sempe hardware and a NOP on legacy parts.
inline constexpr uint8_t kNopByte = 0x90;

enum class Opcode : uint8_t {
  LDI  = 0x01,  // dst <- imm
  MOV  = 0x02,  // dst <- src1
  ADD  = 0x03,  // dst <- src1 + src2 (wrapping)
  SUB  = 0x04,
  MUL  = 0x05,
  DIVC = 0x06,  // dst <- src1 / imm, signed, imm a nonzero constant
  AND  = 0x07,
  OR   = 0x08,
  XOR  = 0x09,
  SHL  = 0x0A,  // dst <- src1 << imm
  SHR  = 0x0B,  // logical shift
  SLT  = 0x0C,  // dst <- (src1 <s src2) ? 1 : 0
  LD   = 0x0D,  // dst <- mem[src1 + imm], word addressed
  ST   = 0x0E,  // mem[src2 + imm] <- src1
  JMP  = 0x0F,  // pc <- imm (instruction index; encoded as displacement)
  BZ   = 0x10,  // if src1 == 0 goto imm
  BNZ  = 0x11,
  CMOV = 0x12,  // dst <- (src1 != 0) ? src2 : dst; always writes dst
  CALL = 0x13,
  RET  = 0x14,
  HALT = 0x15,
  NOP    = 0x90,         // encodes as the single byte 90
  EOSJMP = kSecurePrefix, // encodes as 2E 90; no operands
};

enum class Mode { sempe, legacy };

std::string_view opcode_name(Opcode op);
std::optional<Opcode> opcode_from_name(std::string_view name);

// True for opcodes that carry the 8-byte immediate field.
bool has_imm(Opcode op);
// True for opcodes whose imm is an instruction index (encoded as displacement).
bool is_jump_target(Opcode op);

struct Instruction {
  Opcode op = Opcode::NOP;
  uint8_t dst = 0;
  uint8_t src1 = 0;
  uint8_t src2 = 0;
  int64_t imm = 0;
  bool secure = false;  // 0x2E prefix; permitted on BZ/BNZ only
  int source_line = 0;  // metadata, not part of instruction identity

  bool operator==(const Instruction& o) const {
    return op == o.op && dst == o.dst && src1 == o.src1 && src2 == o.src2 &&
           imm == o.imm && secure == o.secure;
  }
};

// Encoded size in bytes: NOP 1, EOSJMP 2, else prefix? + opcode + 3 operand
// bytes + imm?.
int encoded_size(const Instruction& in);

struct Program {
  std::vector<Instruction> instructions;
  std::map<std::string, int> labels;  // assembler bookkeeping, optional
  int entry = 0;
  int register_count = 16;
  int64_t data_size = 0;  // data memory words; 0 lets the machine pick
};

struct BinaryImage {
  std::vector<uint8_t> bytes;
  std::vector<uint32_t> byte_offsets;  // instruction index -> offset of first byte
};

struct Diag {
  int line = 0;  // 1-based source or instruction line; 0 when not applicable
  std::string msg;
};

std::string format_diags(const std::vector<Diag>& diags);

// Static well-formedness: operand register indices < register_count, branch
// targets in range, DIVC divisor nonzero, shift amounts 0..63, secure prefix
// only on BZ/BNZ, and best-effort reachability of a HALT from entry.
std::vector<Diag> validate(const Program& p);

struct AsmResult {
  bool ok = false;
  Program program;
  std::vector<Diag> diags;
};

// Two-pass assembler. One instruction per line, `label:` definitions,
// `;` comments, lowercase mnemonics, `s.` secure prefix on bz/bnz.
AsmResult assemble(std::string_view source);

// Round-trip-able assembly text; branch targets become synthetic labels.
std::string program_to_asm(const Program& p);

BinaryImage encode(const Program& p);

struct DecodeResult {
  bool ok = false;
  Program program;
  std::string error;
};

// Linear decode of an encoded image. In sempe mode 2E is the secure prefix
// and 2E 90 is eosJMP; in legacy mode the prefix is consumed and ignored and
// 2E 90 decodes to NOP. Branch displacements must land on instruction starts.
DecodeResult decode(const std::vector<uint8_t>& bytes, Mode mode);

}  // namespace sempe
