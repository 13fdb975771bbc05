#include "doctest.h"
#include "sempe/isa.hpp"
#include "sempe/trace.hpp"

using namespace sempe;

namespace {

Program asm_ok(const char* text) {
  auto r = assemble(text);
  REQUIRE_MESSAGE(r.ok, format_diags(r.diags));
  return r.program;
}

const char* kLeakyBranch =
    "    ld r1, r0, 0\n"
    "    bz r1, zero\n"
    "    ldi r2, 1\n"
    "    jmp done\n"
    "zero:\n"
    "    ldi r2, 2\n"
    "done:\n"
    "    halt\n";

const char* kGuardedBranch =
    "    ld r1, r0, 0\n"
    "    s.bz r1, zero\n"
    "    ldi r2, 1\n"
    "    jmp done\n"
    "zero:\n"
    "    ldi r2, 2\n"
    "done:\n"
    "    eosjmp\n"
    "    halt\n";

}  // namespace

TEST_CASE("serialized observations parse back verbatim") {
  auto p = asm_ok(kGuardedBranch);
  auto obs = observe(p, Mode::sempe, {}, {1});
  REQUIRE(obs.events.size() > 5);  // commits, mem read, drains, spm traffic

  auto parsed = parse_observation(serialize(obs));
  REQUIRE_MESSAGE(parsed.ok, parsed.error);
  CHECK(parsed.obs.total_cycles == obs.total_cycles);
  REQUIRE(parsed.obs.events.size() == obs.events.size());
  for (size_t i = 0; i < obs.events.size(); i++)
    CHECK(parsed.obs.events[i] == obs.events[i]);

  // A trapping run serializes too, with the trap as the final event.
  auto trapped = observe(asm_ok("    eosjmp\n    halt\n"), Mode::sempe);
  auto back = parse_observation(serialize(trapped));
  REQUIRE(back.ok);
  REQUIRE(!back.obs.events.empty());
  CHECK(back.obs.events.back().kind == EventKind::trap);
}

TEST_CASE("trace parser accepts comments and rejects malformed lines") {
  auto ok = parse_observation("# intro\n\n3 commit 7\n5 mem_read 7 12\ntotal_cycles 6\n");
  REQUIRE(ok.ok);
  REQUIRE(ok.obs.events.size() == 2);
  CHECK(ok.obs.events[0].kind == EventKind::commit);
  CHECK(ok.obs.events[1].addr == 12);
  CHECK(ok.obs.total_cycles == 6);

  CHECK(!parse_observation("nonsense\n").ok);
  CHECK(!parse_observation("3 sideload 7\ntotal_cycles 1\n").ok);
  CHECK(!parse_observation("3 mem_read 7\ntotal_cycles 1\n").ok);  // no addr
  CHECK(!parse_observation("3 commit 7\n").ok);  // no total
  CHECK(parse_observation("3 commit 7\n").error.find("total_cycles") !=
        std::string::npos);
}

TEST_CASE("compare pinpoints the first difference") {
  Observation a, b;
  a.events = {{EventKind::commit, 0, 0, 0}, {EventKind::commit, 1, 0, 1}};
  b.events = a.events;
  a.total_cycles = b.total_cycles = 2;
  CHECK(compare(a, b).equal);

  b.events[1].pc = 5;
  auto d = compare(a, b);
  CHECK(!d.equal);
  CHECK(d.first_divergence == 1);
  REQUIRE(d.lhs);
  REQUIRE(d.rhs);
  CHECK(d.lhs->pc == 1);
  CHECK(d.rhs->pc == 5);

  // One trace being a prefix of the other is a difference too.
  b.events = a.events;
  b.events.push_back({EventKind::drain, 2, 0, 2});
  d = compare(a, b);
  CHECK(!d.equal);
  CHECK(d.first_divergence == 2);
  CHECK(!d.lhs);
  REQUIRE(d.rhs);

  // Same events but different totals (padding at the end) still differ.
  b.events = a.events;
  b.total_cycles = 9;
  d = compare(a, b);
  CHECK(!d.equal);
  CHECK(d.first_divergence == 2);

  auto text = render(d);
  CHECK(text.find("diverge") != std::string::npos);
  CHECK(text.find("cycles_b=9") != std::string::npos);
}

TEST_CASE("leakage scan flags a plain branch on a secret") {
  auto p = asm_ok(kLeakyBranch);
  std::vector<SecretVar> secrets = {{"k", 0, {0, 1}}};
  auto rep = leakage_scan(p, Mode::legacy, secrets);
  CHECK(!rep.indistinguishable);
  CHECK(rep.assignments_tested == 2);
  CHECK(rep.pair_a == 0);
  CHECK(rep.pair_b == 1);
  CHECK(!rep.diff.equal);
  CHECK(rep.source_line == 6);  // the arm only one assignment reaches
}

TEST_CASE("leakage scan passes the protected form of the same branch") {
  auto p = asm_ok(kGuardedBranch);
  std::vector<SecretVar> secrets = {{"k", 0, {0, 1}}};
  auto rep = leakage_scan(p, Mode::sempe, secrets);
  CHECK(rep.indistinguishable);
  CHECK(rep.assignments_tested == 2);
  REQUIRE(rep.cycles.size() == 2);
  CHECK(rep.cycles[0] == rep.cycles[1]);
}

TEST_CASE("leakage scan covers the assignment product and honors the cap") {
  auto p = asm_ok("    halt\n");
  std::vector<SecretVar> secrets = {{"a", 0, {0, 1, 2}}, {"b", 1, {0, 1}}};
  auto rep = leakage_scan(p, Mode::legacy, secrets);
  CHECK(rep.indistinguishable);
  CHECK(!rep.capped);
  CHECK(rep.assignments.size() == 6);
  CHECK(rep.assignments_tested == 6);

  auto capped = leakage_scan(p, Mode::legacy, secrets, {}, {}, {}, 4);
  CHECK(capped.capped);
  CHECK(capped.assignments.size() == 4);
}

TEST_CASE("a secret-dependent trap is a reportable difference") {
  // r1 selects between a valid word address and one past the last.
  auto p = asm_ok(
      "    ld r1, r0, 0\n"
      "    shl r1, r1, 12\n"
      "    ld r2, r1, 0\n"
      "    halt\n");
  std::vector<SecretVar> secrets = {{"k", 0, {0, 1}}};
  auto rep = leakage_scan(p, Mode::legacy, secrets);
  CHECK(!rep.indistinguishable);
  bool trap_visible =
      (rep.diff.lhs && rep.diff.lhs->kind == EventKind::trap) ||
      (rep.diff.rhs && rep.diff.rhs->kind == EventKind::trap);
  CHECK(trap_visible);
}
