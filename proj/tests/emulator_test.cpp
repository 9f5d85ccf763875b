#include <random>

#include <gtest/gtest.h>

#include "rvi/corpus.hpp"
#include "rvi/emulator.hpp"
#include "support/programs.hpp"

using namespace rvi;
using namespace rvi::emu;
using namespace rvi::testing;

namespace {

EmulatorFault::Kind fault_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const EmulatorFault& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an EmulatorFault";
  return EmulatorFault::Kind::LIMIT_EXCEEDED;
}

MachineState at(Address pc) {
  MachineState s;
  s.pc = pc;
  return s;
}

}  // namespace

TEST(EmulatorRun, ExitProgram) {
  Asm a;
  a.li(Reg::a7, 93).li(Reg::a0, 0).ecall().ret();
  const auto img = a.image();
  const auto r = run(state_for(img, img.base), synthetic_kernel());
  ASSERT_EQ(r.trace.events.size(), 1u);
  const auto& e = r.trace.events[0];
  EXPECT_EQ(e.kind, Event::Kind::SYSCALL);
  EXPECT_EQ(e.number, 93u);
  EXPECT_EQ(e.via, Via::DIRECT);
  EXPECT_EQ(e.pc, img.base + 8);
  EXPECT_EQ(r.state.pc, kHaltAddress);
  EXPECT_EQ(r.state.instret, 4u);
  EXPECT_EQ(r.trace.kernel_cost_total, kDefaultCostUnits);
}

TEST(EmulatorRun, EmptyProgram) {
  Asm a;
  a.ret();
  const auto r = run(state_for(a.image(), a.base()), synthetic_kernel());
  EXPECT_EQ(r.state.instret, 1u);
  EXPECT_TRUE(r.trace.events.empty());
}

TEST(EmulatorRun, Faults) {
  EXPECT_EQ(fault_of([] { run(initial_state(0x50000), synthetic_kernel()); }), EmulatorFault::Kind::UNMAPPED_FETCH);
  try {
    run(initial_state(0x50000), synthetic_kernel());
  } catch (const EmulatorFault& e) {
    EXPECT_EQ(e.pc(), 0x50000u);
  }

  Asm bad;
  bad.raw16(0x0000);
  EXPECT_EQ(fault_of([&] { run(state_for(bad.image(), bad.base()), synthetic_kernel()); }),
            EmulatorFault::Kind::ILLEGAL_INSTRUCTION);

  Asm loop;
  loop.op(isa::Op::JAL, Reg::zero, Reg::zero, Reg::zero, 0);
  EXPECT_EQ(fault_of([&] { run(state_for(loop.image(), loop.base()), synthetic_kernel(), nullptr, {.max_instret = 100}); }),
            EmulatorFault::Kind::LIMIT_EXCEEDED);

  Asm misaligned;
  misaligned.op(isa::Op::LD, Reg::a0, Reg::sp, Reg::zero, 4).ret();
  EXPECT_EQ(fault_of([&] { run(state_for(misaligned.image(), misaligned.base()), synthetic_kernel()); }),
            EmulatorFault::Kind::MISALIGNED_ACCESS);

  Asm unmapped;
  unmapped.op(isa::Op::SD, Reg::zero, Reg::zero, Reg::a0, 0x100).ret();
  EXPECT_EQ(fault_of([&] { run(state_for(unmapped.image(), unmapped.base()), synthetic_kernel()); }),
            EmulatorFault::Kind::UNMAPPED_ACCESS);

  Asm odd_jump;
  odd_jump.nop().ret();
  EXPECT_EQ(fault_of([&] { run(state_for(odd_jump.image(), odd_jump.base() + 1), synthetic_kernel()); }),
            EmulatorFault::Kind::MISALIGNED_FETCH);

  Asm brk;
  brk.op(isa::Op::EBREAK).ret();
  EXPECT_EQ(fault_of([&] { run(state_for(brk.image(), brk.base()), synthetic_kernel()); }),
            EmulatorFault::Kind::UNHANDLED_EBREAK);
}

TEST(EmulatorStep, Examples) {
  auto s = at(0x1000);
  execute(s, isa::make(isa::Op::AUIPC, Reg::t0, Reg::zero, Reg::zero, 0x1000));
  EXPECT_EQ(s.reg(Reg::t0), 0x2000u);
  EXPECT_EQ(s.pc, 0x1004u);

  s = at(0x1000);
  execute(s, isa::make(isa::Op::JAL, Reg::ra, Reg::zero, Reg::zero, 0));
  EXPECT_EQ(s.reg(Reg::ra), 0x1004u);
  EXPECT_EQ(s.pc, 0x1000u);

  s = at(0x1000);
  s.set(Reg::sp, 0x8000);
  const auto c = isa::make(isa::Op::C_ADDI16SP, Reg::sp, Reg::sp, Reg::zero, -16);
  execute(s, c);
  EXPECT_EQ(s.reg(Reg::sp), 0x8000u - 16);
  EXPECT_EQ(c.width, 2);
  EXPECT_EQ(s.pc, 0x1002u);
}

TEST(EmulatorStep, MulDivEdgeCases) {
  auto s = at(0x1000);
  s.set(Reg::a0, 7);
  s.set(Reg::a1, 0);
  execute(s, isa::make(isa::Op::DIV, Reg::a2, Reg::a0, Reg::a1));
  EXPECT_EQ(s.reg(Reg::a2), ~0ull);
  execute(s, isa::make(isa::Op::REMU, Reg::a2, Reg::a0, Reg::a1));
  EXPECT_EQ(s.reg(Reg::a2), 7u);
  s.set(Reg::a0, 1ull << 63);
  s.set(Reg::a1, ~0ull);
  execute(s, isa::make(isa::Op::DIV, Reg::a2, Reg::a0, Reg::a1));
  EXPECT_EQ(s.reg(Reg::a2), 1ull << 63);
  execute(s, isa::make(isa::Op::REM, Reg::a2, Reg::a0, Reg::a1));
  EXPECT_EQ(s.reg(Reg::a2), 0u);
  s.set(Reg::a0, ~0ull);
  s.set(Reg::a1, ~0ull);
  execute(s, isa::make(isa::Op::MULHU, Reg::a2, Reg::a0, Reg::a1));
  EXPECT_EQ(s.reg(Reg::a2), ~0ull - 1);
  s.set(Reg::a0, 0x7fffffff);
  s.set(Reg::a1, 1);
  execute(s, isa::make(isa::Op::ADDW, Reg::a2, Reg::a0, Reg::a1));
  EXPECT_EQ(s.reg(Reg::a2), 0xffffffff80000000ull);
}

// Random words that decode to something other than a trap, run from random
// register files, never leave x0 non-zero and keep pc even.
TEST(EmulatorProperties, ZeroRegisterAndPcAlignment) {
  std::mt19937_64 rng(11);
  std::size_t executed = 0;
  for (int i = 0; i < 200000; ++i) {
    const auto w = static_cast<std::uint32_t>(rng());
    const std::uint8_t raw[4] = {std::uint8_t(w), std::uint8_t(w >> 8), std::uint8_t(w >> 16), std::uint8_t(w >> 24)};
    const auto insn = isa::decode(raw);
    if (insn.op == isa::Op::UNKNOWN || insn.op == isa::Op::ECALL || insn.op == isa::Op::EBREAK) continue;
    auto s = at(0x10000);
    for (auto& r : s.regs) r = rng() & ~1ull;
    s.regs[0] = 0;
    s.memory.map(0, 0x1000);
    try {
      execute(s, insn);
    } catch (const EmulatorFault&) {
      continue;
    }
    ++executed;
    ASSERT_EQ(s.regs[0], 0u) << isa::to_string(insn);
    ASSERT_EQ(s.pc % 2, 0u) << isa::to_string(insn);
  }
  EXPECT_GT(executed, 50000u);
}

TEST(EmulatorProperties, LinkRegisterLaw) {
  std::mt19937_64 rng(12);
  const isa::Op jumps[] = {isa::Op::JAL, isa::Op::JALR, isa::Op::C_JALR};
  for (int i = 0; i < 10000; ++i) {
    const auto op = jumps[rng() % 3];
    const Address pc = 0x10000 + 2 * (rng() % 0x8000);
    auto s = at(pc);
    for (auto& r : s.regs) r = rng() & ~1ull;
    s.regs[0] = 0;
    const Reg src = static_cast<Reg>(1 + rng() % 31);
    isa::Instruction insn;
    if (op == isa::Op::JAL) {
      insn = isa::make(op, static_cast<Reg>(1 + rng() % 31), Reg::zero, Reg::zero, 2 * (std::int64_t(rng() % 1000) - 500));
    } else if (op == isa::Op::JALR) {
      insn = isa::make(op, static_cast<Reg>(1 + rng() % 31), src, Reg::zero, 2 * (std::int64_t(rng() % 1000) - 500));
    } else {
      insn = isa::make(op, Reg::ra, src);
    }
    execute(s, insn);
    ASSERT_EQ(s.reg(insn.rd), pc + insn.width) << isa::to_string(insn);
  }
}

TEST(EmulatorProperties, KernelPairLaw) {
  std::mt19937_64 rng(13);
  const auto kernel = synthetic_kernel();
  Asm a;
  a.ecall().ret();
  const auto img = a.image();
  for (int i = 0; i < 2000; ++i) {
    auto s = state_for(img, img.base);
    const auto n = i % 7 == 0 ? 220 : rng() % 500;
    s.set(Reg::a7, n);
    SyscallArgs args;
    for (std::size_t k = 0; k < 6; ++k) {
      args[k] = rng();
      s.set(static_cast<Reg>(idx(Reg::a0) + k), args[k]);
    }
    const auto expect = kernel.call(n, args, s);
    const auto r = run(std::move(s), kernel);
    EXPECT_EQ(r.state.reg(Reg::a0), expect.ret0);
    EXPECT_EQ(r.state.reg(Reg::a1), expect.ret1);
    ASSERT_FALSE(r.trace.events.empty());
    EXPECT_EQ(r.trace.events[0].args, args);
    if (kernel.is_clone(n)) {
      ASSERT_EQ(r.trace.events.size(), 2u);
      EXPECT_EQ(r.trace.events[1].kind, Event::Kind::POST_CLONE);
      EXPECT_EQ(r.trace.events[1].child, expect.ret0);
    } else {
      EXPECT_EQ(r.trace.events.size(), 1u);
    }
  }
}

TEST(EmulatorProperties, Determinism) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    corpus::CorpusSpec spec;
    spec.seed = seed;
    const auto c = corpus::generate(spec);
    auto s = state_for(c.image, c.entry);
    s.regs = random_registers(seed);
    const auto a = run(s, synthetic_kernel());
    const auto b = run(s, synthetic_kernel());
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.state.regs, b.state.regs);
    EXPECT_EQ(a.state.instret, b.state.instret);
    ASSERT_EQ(a.state.memory.pages().size(), b.state.memory.pages().size());
    for (const auto& [addr, page] : a.state.memory.pages()) EXPECT_EQ(*page, *b.state.memory.pages().at(addr));
  }
}

TEST(EmulatorMemory, SparseLittleEndian) {
  Memory m;
  EXPECT_FALSE(m.is_mapped(0x1000));
  EXPECT_FALSE(m.write_u64(0x1000, 1));
  m.map(0x1ffc, 8);
  EXPECT_TRUE(m.is_mapped(0x1ffc, 8));
  EXPECT_EQ(m.pages().size(), 2u);
  EXPECT_TRUE(m.write_u64(0x1ffc, 0x0807060504030201ull));
  std::uint8_t b[8];
  ASSERT_TRUE(m.read(0x1ffc, b));
  for (int i = 0; i < 8; ++i) EXPECT_EQ(b[i], i + 1);
  const Memory copy = m;
  EXPECT_EQ(copy.read_u64(0x1ffc), 0x0807060504030201ull);
}
