#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "sempe/bench.hpp"
#include "sempe/config.hpp"
#include "sempe/isa.hpp"
#include "sempe/machine.hpp"
#include "sempe/seclang/codegen.hpp"
#include "sempe/seclang/parser.hpp"
#include "sempe/trace.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kCompileError = 2;
constexpr int kTrap = 3;
constexpr int kDistinguishable = 4;

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out.write(data.data(), (std::streamsize)data.size());
  return out.good();
}

bool write_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  return write_file(path,
                    std::string(bytes.begin(), bytes.end()));
}

std::vector<uint64_t> to_words(const std::string& raw) {
  std::vector<uint64_t> words(raw.size() / 8, 0);
  for (size_t i = 0; i < words.size(); i++)
    for (int b = 0; b < 8; b++)
      words[i] |= (uint64_t)(uint8_t)raw[i * 8 + b] << (8 * b);
  return words;
}

std::string with_suffix(std::string path, const std::string& suffix) {
  auto dot = path.rfind('.');
  auto slash = path.find_last_of('/');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash))
    path.resize(dot);
  return path + suffix;
}

sempe::Mode parse_mode(const std::string& m) {
  return m == "legacy" ? sempe::Mode::legacy : sempe::Mode::sempe;
}

struct RunInputs {
  std::string config_path;
  std::string init_mem_path;
  std::vector<std::string> pokes;
};

bool apply_run_inputs(const RunInputs& ri, sempe::RunConfig* rc,
                      std::vector<uint64_t>* mem, std::string* err) {
  if (!ri.config_path.empty()) {
    auto cr = sempe::load_config(ri.config_path);
    if (!cr.ok) {
      *err = cr.error;
      return false;
    }
    *rc = cr.config;
  }
  if (!ri.init_mem_path.empty()) {
    auto raw = read_file(ri.init_mem_path);
    if (!raw) {
      *err = "cannot read " + ri.init_mem_path;
      return false;
    }
    *mem = to_words(*raw);
  }
  for (const auto& p : ri.pokes) {
    auto eq = p.find('=');
    if (eq == std::string::npos) {
      *err = "bad --poke '" + p + "', expected addr=value";
      return false;
    }
    try {
      uint64_t addr = std::stoull(p.substr(0, eq));
      uint64_t value = std::stoull(p.substr(eq + 1), nullptr, 0);
      if (mem->size() <= addr) mem->resize(addr + 1, 0);
      (*mem)[addr] = value;
    } catch (...) {
      *err = "bad --poke '" + p + "'";
      return false;
    }
  }
  return true;
}

int cmd_asm(const std::string& input, std::string output) {
  auto text = read_file(input);
  if (!text) {
    std::cerr << "cannot read " << input << "\n";
    return kUsage;
  }
  auto res = sempe::assemble(*text);
  if (!res.ok) {
    std::cerr << sempe::format_diags(res.diags);
    return kCompileError;
  }
  auto diags = sempe::validate(res.program);
  if (!diags.empty()) {
    std::cerr << sempe::format_diags(diags);
    return kCompileError;
  }
  if (output.empty()) output = with_suffix(input, ".bin");
  auto img = sempe::encode(res.program);
  if (!write_bytes(output, img.bytes)) {
    std::cerr << "cannot write " << output << "\n";
    return kUsage;
  }
  std::cout << output << ": " << res.program.instructions.size()
            << " instructions, " << img.bytes.size() << " bytes\n";
  return kOk;
}

int cmd_compile(const std::string& input, std::string output,
                const std::string& pipe_name, int registers, bool no_collapse,
                bool privatize) {
  auto text = read_file(input);
  if (!text) {
    std::cerr << "cannot read " << input << "\n";
    return kUsage;
  }
  auto parsed = sempe::seclang::parse(*text);
  if (!parsed.ok) {
    std::cerr << sempe::format_diags(parsed.diags);
    return kCompileError;
  }
  sempe::seclang::Pipeline pipe = sempe::seclang::Pipeline::sempe;
  if (pipe_name == "cte") pipe = sempe::seclang::Pipeline::cte;
  if (pipe_name == "plain") pipe = sempe::seclang::Pipeline::plain;
  sempe::seclang::CodegenOptions opt;
  opt.register_count = registers;
  opt.collapse = !no_collapse;
  opt.privatize_all = privatize;
  auto out = sempe::seclang::compile(parsed.ast, pipe, opt);
  if (!out.ok) {
    std::cerr << sempe::format_diags(out.diags);
    return kCompileError;
  }
  if (output.empty()) output = with_suffix(input, ".bin");
  auto img = sempe::encode(out.program);
  if (!write_bytes(output, img.bytes)) {
    std::cerr << "cannot write " << output << "\n";
    return kUsage;
  }
  write_file(with_suffix(output, ".asm"),
             sempe::program_to_asm(out.program));
  write_file(with_suffix(output, ".layout.json"),
             sempe::seclang::layout_json(out));
  std::cout << output << ": " << out.program.instructions.size()
            << " instructions, " << img.bytes.size() << " bytes, "
            << out.layout.total_words << " data words\n";
  return kOk;
}

int cmd_run(const std::string& input, const std::string& mode_name,
            const RunInputs& ri, const std::string& trace_path,
            int dump_mem) {
  auto raw = read_file(input);
  if (!raw) {
    std::cerr << "cannot read " << input << "\n";
    return kUsage;
  }
  sempe::Mode mode = parse_mode(mode_name);
  auto dec = sempe::decode(
      std::vector<uint8_t>(raw->begin(), raw->end()), mode);
  if (!dec.ok) {
    std::cerr << dec.error << "\n";
    return kCompileError;
  }
  sempe::RunConfig rc;
  std::vector<uint64_t> mem;
  std::string err;
  if (!apply_run_inputs(ri, &rc, &mem, &err)) {
    std::cerr << err << "\n";
    return kUsage;
  }
  if (rc.register_override > 0)
    dec.program.register_count = rc.register_override;
  sempe::Recorder rec;
  sempe::Machine m(dec.program, mode, rc.machine, mem, {},
                   trace_path.empty() ? nullptr : &rec);
  auto res = m.run();
  std::cout << "cycles " << res.cycles << "\ncommitted " << res.committed
            << "\n";
  if (!trace_path.empty()) {
    std::string text = sempe::serialize(rec.obs);
    if (trace_path == "-")
      std::cout << text;
    else if (!write_file(trace_path, text)) {
      std::cerr << "cannot write " << trace_path << "\n";
      return kUsage;
    }
  }
  if (dump_mem > 0) {
    for (int i = 0; i < dump_mem && i < (int)res.mem.size(); i++)
      std::cout << "mem[" << i << "] = " << (int64_t)res.mem[i] << "\n";
  }
  if (res.trap) {
    std::cout << "trap " << sempe::trap_name(res.trap->kind) << " at pc "
              << res.trap->pc << "\n";
    return kTrap;
  }
  return kOk;
}

int cmd_leakcheck(const std::string& input, const std::string& mode_name,
                  const std::string& config_path, int cap,
                  const std::vector<std::string>& sets, int registers) {
  auto text = read_file(input);
  if (!text) {
    std::cerr << "cannot read " << input << "\n";
    return kUsage;
  }
  auto parsed = sempe::seclang::parse(*text);
  if (!parsed.ok) {
    std::cerr << sempe::format_diags(parsed.diags);
    return kCompileError;
  }
  sempe::seclang::CodegenOptions opt;
  opt.register_count = registers;
  auto out =
      sempe::seclang::compile(parsed.ast, sempe::seclang::Pipeline::sempe, opt);
  if (!out.ok) {
    std::cerr << sempe::format_diags(out.diags);
    return kCompileError;
  }
  sempe::RunConfig rc;
  if (!config_path.empty()) {
    auto cr = sempe::load_config(config_path);
    if (!cr.ok) {
      std::cerr << cr.error << "\n";
      return kUsage;
    }
    rc = cr.config;
  }
  if (rc.register_override > 0)
    out.program.register_count = rc.register_override;

  std::vector<uint64_t> base_mem(out.layout.total_words, 0);
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos ||
        !out.layout.vars.count(s.substr(0, eq))) {
      std::cerr << "bad --set '" << s << "'\n";
      return kUsage;
    }
    base_mem[out.layout.vars.at(s.substr(0, eq)).addr] =
        (uint64_t)std::stoll(s.substr(eq + 1), nullptr, 0);
  }

  std::vector<sempe::SecretVar> secrets;
  for (const auto& name : out.layout.secrets)
    secrets.push_back({name, out.layout.vars.at(name).addr, {0, 1}});
  if (secrets.empty()) {
    std::cout << "no secrets declared; trivially indistinguishable\n";
    return kOk;
  }

  auto report = sempe::leakage_scan(out.program, parse_mode(mode_name),
                                    secrets, rc.machine, base_mem, {},
                                    (size_t)cap);
  std::cout << "assignments tested: " << report.assignments_tested
            << (report.capped ? " (capped)" : "") << "\n";
  if (report.indistinguishable) {
    std::cout << "traces indistinguishable across the secret domain\n";
    return kOk;
  }
  std::cout << "distinguishable: assignment " << report.pair_a << " vs "
            << report.pair_b << "\n"
            << sempe::render(report.diff);
  if (report.source_line > 0)
    std::cout << "first divergence maps to source line " << report.source_line
              << "\n";
  return kDistinguishable;
}

int cmd_bench(const std::vector<std::string>& workloads,
              const std::vector<int>& widths, int iters, uint64_t seed,
              const std::string& out_csv, const std::string& plot_path,
              bool no_cte, int registers) {
  sempe::bench::BenchConfig cfg;
  if (!workloads.empty()) cfg.workloads = workloads;
  if (!widths.empty()) cfg.widths = widths;
  cfg.iters = iters;
  cfg.seed = seed;
  cfg.with_cte = !no_cte;
  cfg.register_count = registers;
  auto rep = sempe::bench::run_bench(cfg);
  std::cout << sempe::bench::summary(rep);
  if (!out_csv.empty() && !write_file(out_csv, sempe::bench::to_csv(rep))) {
    std::cerr << "cannot write " << out_csv << "\n";
    return kUsage;
  }
  if (!plot_path.empty() &&
      !write_file(plot_path, sempe::bench::plot_data(rep))) {
    std::cerr << "cannot write " << plot_path << "\n";
    return kUsage;
  }
  return rep.errors.empty() ? kOk : kCompileError;
}

int cmd_trace_diff(const std::string& a, const std::string& b) {
  auto ta = read_file(a);
  auto tb = read_file(b);
  if (!ta || !tb) {
    std::cerr << "cannot read input traces\n";
    return kUsage;
  }
  auto pa = sempe::parse_observation(*ta);
  auto pb = sempe::parse_observation(*tb);
  if (!pa.ok || !pb.ok) {
    std::cerr << (pa.ok ? pb.error : pa.error) << "\n";
    return kUsage;
  }
  auto diff = sempe::compare(pa.obs, pb.obs);
  std::cout << sempe::render(diff);
  return diff.equal ? kOk : kDistinguishable;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic dual-path ISA simulator and toolchain"};
  app.require_subcommand(1);

  std::string in, out, mode = "sempe", config, init_mem, trace, pipe = "sempe";
  std::string trace_a, trace_b, out_csv, plot_path;
  std::vector<std::string> pokes, sets, workloads;
  std::vector<int> widths;
  int registers = 16, dump_mem = 0, cap = 256, iters = 4;
  uint64_t seed = 0x5eedbeef;
  bool no_collapse = false, privatize = false, no_cte = false;

  auto* casm = app.add_subcommand("asm", "assemble textual assembly");
  casm->add_option("input", in)->required();
  casm->add_option("-o,--output", out);

  auto* ccomp = app.add_subcommand("compile", "compile a source program");
  ccomp->add_option("input", in)->required();
  ccomp->add_option("-o,--output", out);
  ccomp->add_flag_callback("--sempe", [&] { pipe = "sempe"; },
                           "secure dual-path build (default)");
  ccomp->add_flag_callback("--cte", [&] { pipe = "cte"; },
                           "branch-free predicated build");
  ccomp->add_flag_callback("--plain", [&] { pipe = "plain"; },
                           "unprotected build");
  ccomp->add_option("--registers", registers);
  ccomp->add_flag("--no-collapse", no_collapse);
  ccomp->add_flag("--privatize-all", privatize);

  auto* crun = app.add_subcommand("run", "run an encoded binary");
  crun->add_option("input", in)->required();
  crun->add_option("--mode", mode)->check(CLI::IsMember({"sempe", "legacy"}));
  crun->add_option("--config", config);
  crun->add_option("--init-mem", init_mem);
  crun->add_option("--poke", pokes);
  crun->add_option("--trace", trace);
  crun->add_option("--dump-mem", dump_mem);

  auto* cleak = app.add_subcommand("leakcheck",
                                   "scan for secret-dependent traces");
  cleak->add_option("input", in)->required();
  cleak->add_option("--mode", mode)->check(CLI::IsMember({"sempe", "legacy"}));
  cleak->add_option("--config", config);
  cleak->add_option("--cap", cap);
  cleak->add_option("--set", sets);
  cleak->add_option("--registers", registers);

  auto* cbench = app.add_subcommand("bench", "overhead scaling benchmarks");
  cbench->add_option("--workloads", workloads)->delimiter(',');
  cbench->add_option("--W,--widths", widths)->delimiter(',');
  cbench->add_option("--iters", iters);
  cbench->add_option("--seed", seed);
  cbench->add_option("--out", out_csv);
  cbench->add_option("--emit-plotdata", plot_path);
  cbench->add_flag("--no-cte", no_cte);
  cbench->add_option("--registers", registers);

  auto* cdiff = app.add_subcommand("trace-diff", "compare two trace files");
  cdiff->add_option("a", trace_a)->required();
  cdiff->add_option("b", trace_b)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (casm->parsed()) return cmd_asm(in, out);
  if (ccomp->parsed())
    return cmd_compile(in, out, pipe, registers, no_collapse, privatize);
  if (crun->parsed())
    return cmd_run(in, mode, {config, init_mem, pokes}, trace, dump_mem);
  if (cleak->parsed())
    return cmd_leakcheck(in, mode, config, cap, sets, registers);
  if (cbench->parsed())
    return cmd_bench(workloads, widths, iters, seed, out_csv, plot_path,
                     no_cte, registers);
  if (cdiff->parsed()) return cmd_trace_diff(trace_a, trace_b);
  return kUsage;
}
