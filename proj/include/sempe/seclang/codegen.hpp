#pragma once

#include <map>

#include "sempe/isa.hpp"
#include "sempe/seclang/ast.hpp"

namespace sempe::seclang {

struct VarSlot {
  bool in_reg = false;
  int reg = -1;
  uint64_t addr = 0;  // word address of the memory home; always valid
  int64_t size = 1;
};

struct Layout {
  std::map<std::string, VarSlot> vars;
  uint64_t globals_end = 0;  // declared variables end here (words)
  uint64_t total_words = 0;  // includes snapshots of shadowed state + scratch
  std::vector<std::string> secrets;
  int register_count = 16;
};

enum class Pipeline {
  plain,  // straight translation, secret branches stay ordinary branches
  sempe,  // secure branches + shadow copies + join merges
  cte,    // branch-free predication of secret control flow
};

struct CodegenOptions {
  int register_count = 16;
  int jb_capacity = 30;        // static nesting budget for secure branches
  bool collapse = true;        // merge nested secret branches first (sempe)
  bool privatize_all = false;  // keep every variable memory resident
};

struct CompileOutput {
  bool ok = false;
  Program program;
  Layout layout;
  std::vector<Diag> diags;
};

CompileOutput compile(const Ast& parsed, Pipeline pipe,
                      const CodegenOptions& opt = {});

// Sidecar with the variable layout and the per-instruction source lines,
// which is what trace tooling needs to point a divergence back at a line.
std::string layout_json(const CompileOutput& out);

}  // namespace sempe::seclang
