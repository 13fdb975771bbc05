#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sempe::bench {

// Each workload is a chain of secret-selected instances: branch k runs
// instance k or falls into branch k+1, and the final else holds instance
// W+1. Instance bodies are straight-line compare/accumulate kernels, sized
// mildly unevenly so the chain is not perfectly balanced. The all-zero
// secret vector selects the deepest (largest) instance and is the vector
// the overhead numbers are quoted against.
extern const std::vector<std::string> kWorkloads;  // fib, ones, qsort, queens

std::string workload_source(const std::string& name, int width, int iters,
                            uint64_t seed);

struct BenchConfig {
  std::vector<std::string> workloads = {"fib", "ones", "qsort", "queens"};
  std::vector<int> widths = {1, 2, 5, 10};
  int iters = 4;                // top-level public repeats
  uint64_t seed = 0x5eedbeef;   // public input seed
  bool with_cte = true;
  int register_count = 16;
};

struct BenchCell {
  std::string workload;
  int width = 0;
  uint64_t baseline_cycles = 0;
  uint64_t sempe_cycles = 0;
  uint64_t cte_cycles = 0;       // 0 when CTE was skipped
  uint64_t committed_baseline = 0;
  uint64_t committed_sempe = 0;
  double overhead_sempe = 0.0;   // vs the plain build, all-zero secrets
  double overhead_cte = 0.0;
  double ideal_overhead = 0.0;   // sum of per-path plain costs / deepest path
  double vs_ideal = 0.0;         // overhead_sempe / ideal_overhead
};

struct BenchReport {
  std::vector<BenchCell> cells;
  std::vector<std::string> errors;
};

// Compiles every workload x width with all variables memory resident (both
// the plain baseline and the protected builds, so per-instance code quality
// matches and the ratios measure the scheme, not the register allocator),
// then runs: plain/legacy for the baseline and the per-path ideal, the
// instrumented build in secure mode, and the branch-free rewrite.
BenchReport run_bench(const BenchConfig& cfg);

std::string to_csv(const BenchReport& r);
std::string summary(const BenchReport& r);
// Per-workload blocks of "width sempe cte ideal" rows, ready for plotting.
std::string plot_data(const BenchReport& r);

}  // namespace sempe::bench
