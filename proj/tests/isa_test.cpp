#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "rvi/emulator.hpp"
#include "rvi/error.hpp"
#include "rvi/isa.hpp"

using namespace rvi;
using namespace rvi::isa;

namespace {

std::vector<std::uint8_t> le(std::uint32_t w, unsigned width) {
  std::vector<std::uint8_t> b;
  for (unsigned i = 0; i < width; ++i) b.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
  return b;
}

// Independent reach oracles: representability in the raw immediate fields.
bool jal_oracle(std::int64_t d) {
  if (d & 1) return false;
  const std::int64_t field = d & ((1 << 21) - 1);
  const std::int64_t back = field >= (1 << 20) ? field - (1 << 21) : field;
  return back == d;
}

bool auipc_jalr_oracle(std::int64_t d) {
  if (d & 1) return false;
  // hi is a sign-extended 20-bit field shifted by 12, lo a signed 12-bit value.
  for (std::int64_t lo = -2048; lo <= 2047; ++lo) {
    const std::int64_t hi = d - lo;
    if (hi % 4096 != 0) continue;
    const std::int64_t u = hi / 4096;
    if (u >= -(1 << 19) && u < (1 << 19)) return true;
  }
  return false;
}

}  // namespace

TEST(IsaDecode, SpecExamples) {
  const auto ecall = decode(le(0x00000073, 4));
  EXPECT_EQ(ecall.op, Op::ECALL);
  EXPECT_EQ(ecall.opclass, OpClass::ECALL);
  EXPECT_EQ(ecall.width, 4);

  const auto li = decode(le(0x04000893, 4));
  EXPECT_EQ(li.op, Op::ADDI);
  EXPECT_EQ(li.opclass, OpClass::ALU_IMM);
  EXPECT_EQ(li.rd, Reg::a7);
  EXPECT_EQ(li.rs1, Reg::zero);
  EXPECT_EQ(li.imm, 64);
  EXPECT_EQ(to_string(li), "addi a7, zero, 64");
}

TEST(IsaDecode, AllZeroHalfwordIsIllegal) {
  // 0x0001 is c.nop (c.addi x0, 0); the canonical illegal halfword is 0x0000.
  const auto z = decode(le(0x0000, 2));
  EXPECT_EQ(z.op, Op::UNKNOWN);
  EXPECT_EQ(z.opclass, OpClass::UNKNOWN);
  EXPECT_EQ(z.width, 2);
  EXPECT_EQ(decode(le(0x0001, 2)).op, Op::C_NOP);
}

TEST(IsaDecode, TruncatedInput) {
  EXPECT_THROW(decode(std::vector<std::uint8_t>{0x73}), TruncatedCode);
  EXPECT_THROW(decode(std::vector<std::uint8_t>{0x73, 0x00}), TruncatedCode);
  EXPECT_THROW(decode(std::vector<std::uint8_t>{0x73, 0x00, 0x00}), TruncatedCode);
  EXPECT_THROW(decode(std::vector<std::uint8_t>{}), TruncatedCode);
  EXPECT_EQ(decode(std::vector<std::uint8_t>{0x01, 0x00}).width, 2);
}

TEST(IsaDecode, WidthFollowsLowBits) {
  for (std::uint32_t low = 0; low < 4; ++low) {
    const auto insn = decode_word(0x00000000u | low);
    EXPECT_EQ(insn.width, low == 3 ? 4 : 2);
  }
}

// Encodings frozen from clang's integrated assembler (tests/oracles).
TEST(IsaDecode, MatchesReferenceAssembler) {
  std::ifstream in(std::string(RVI_TEST_DATA_DIR) + "/reference_encodings.txt");
  ASSERT_TRUE(in) << "missing reference_encodings.txt";
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    ASSERT_NE(tab, std::string::npos);
    const std::string hex = line.substr(0, tab);
    const std::string text = line.substr(tab + 1);
    const auto word = static_cast<std::uint32_t>(std::stoul(hex, nullptr, 16));
    const unsigned width = hex.size() == 4 ? 2 : 4;
    const auto insn = decode(le(word, width));
    EXPECT_NE(insn.op, Op::UNKNOWN) << text;
    EXPECT_EQ(insn.width, width) << text;
    EXPECT_EQ(to_string(insn), text) << hex;
    EXPECT_EQ(encode(insn), word) << text;
    ++n;
  }
  EXPECT_GE(n, 250u);
}

TEST(IsaRoundTrip, Exhaustive16Bit) {
  std::size_t known = 0;
  for (std::uint32_t w = 0; w < 0x10000; ++w) {
    if ((w & 3) == 3) continue;
    const auto insn = decode_word(w);
    ASSERT_EQ(insn.width, 2);
    if (insn.op == Op::UNKNOWN) continue;
    ++known;
    ASSERT_TRUE(is_compressed(insn.op)) << std::hex << w;
    ASSERT_EQ(encode(insn), w) << std::hex << w << " " << to_string(insn);
    ASSERT_EQ(decode_word(encode(insn)), insn);
  }
  // 49152 compressed halfwords less the four FP load/store slots and reserved forms.
  EXPECT_GT(known, 38000u);
  EXPECT_LT(known, 49152u - 4 * 2048);
}

TEST(IsaRoundTrip, Random32Bit) {
  std::mt19937_64 rng(11);
  std::size_t known = 0;
  for (int i = 0; i < 2'000'000; ++i) {
    const auto w = static_cast<std::uint32_t>(rng()) | 3u;
    const auto insn = decode_word(w);
    ASSERT_EQ(insn.width, 4);
    if (insn.op == Op::UNKNOWN) {
      ASSERT_EQ(encode(insn), w);
      continue;
    }
    ++known;
    ASSERT_EQ(encode(insn), w) << std::hex << w << " " << to_string(insn);
  }
  EXPECT_GT(known, 100000u);
}

TEST(IsaRoundTrip, MakeValidatesRanges) {
  EXPECT_THROW(make(Op::ADDI, Reg::a0, Reg::a0, Reg::zero, 2048), RangeError);
  EXPECT_THROW(make(Op::C_LI, Reg::a7, Reg::zero, Reg::zero, 57), RangeError);
  EXPECT_THROW(make(Op::JAL, Reg::ra, Reg::zero, Reg::zero, 3), RangeError);
  EXPECT_THROW(make(Op::C_LD, Reg::a0, Reg::ra, Reg::zero, 0), RangeError);
  EXPECT_NO_THROW(make(Op::ADDI, Reg::a0, Reg::a0, Reg::zero, -2048));
}

TEST(IsaRelocatable, SpecExamples) {
  EXPECT_TRUE(is_relocatable(make(Op::ADDI, Reg::a7, Reg::zero, Reg::zero, 64)));
  EXPECT_FALSE(is_relocatable(make(Op::AUIPC, Reg::t0, Reg::zero, Reg::zero, 0)));
  EXPECT_FALSE(is_relocatable(make(Op::C_BEQZ, Reg::zero, Reg::a0, Reg::zero, 8)));
}

TEST(IsaRelocatable, ClassTable) {
  const std::vector<Instruction> yes = {
      make(Op::ADD, Reg::a0, Reg::a1, Reg::a2),    make(Op::ADDI, Reg::a0, Reg::a1, Reg::zero, 1),
      make(Op::LD, Reg::a0, Reg::sp, Reg::zero, 8), make(Op::SD, Reg::zero, Reg::sp, Reg::a0, 8),
      make(Op::LUI, Reg::a0, Reg::zero, Reg::zero, 0x12000), make(Op::MUL, Reg::a0, Reg::a1, Reg::a2),
      make(Op::C_LI, Reg::a7, Reg::zero, Reg::zero, 17), make(Op::C_MV, Reg::a0, Reg::zero, Reg::a1),
      make(Op::C_LDSP, Reg::t0, Reg::sp), make(Op::C_SDSP, Reg::zero, Reg::sp, Reg::t0),
      make(Op::C_LUI, Reg::a0, Reg::zero, Reg::zero, 0x1000), make(Op::C_NOP)};
  for (const auto& i : yes) EXPECT_TRUE(is_relocatable(i)) << to_string(i);
  const std::vector<Instruction> no = {
      make(Op::AUIPC, Reg::t0),  make(Op::JAL, Reg::ra, Reg::zero, Reg::zero, 8),
      make(Op::JALR, Reg::zero, Reg::ra), make(Op::BEQ, Reg::zero, Reg::a0, Reg::a1, 8),
      make(Op::ECALL),           make(Op::EBREAK),
      make(Op::C_J, Reg::zero, Reg::zero, Reg::zero, 8), make(Op::C_JR, Reg::zero, Reg::ra),
      make(Op::C_JALR, Reg::ra, Reg::t0), make(Op::C_BNEZ, Reg::zero, Reg::a0, Reg::zero, -4),
      make(Op::C_EBREAK),        make(Op::FENCE, Reg::zero, Reg::zero, Reg::zero, 0x0ff),
      make(Op::FENCE_I),         make(Op::CSRRS, Reg::a0, Reg::zero, Reg::zero, 0xc00),
      decode_word(0x0000)};
  for (const auto& i : no) EXPECT_FALSE(is_relocatable(i)) << to_string(i);
}

TEST(IsaReach, JalExamples) {
  EXPECT_FALSE(jal_in_range(0x10000, 0x110000));
  EXPECT_TRUE(jal_in_range(0x110000, 0x10000));
  EXPECT_TRUE(jal_in_range(0x4242, 0x4242));
  EXPECT_FALSE(jal_in_range(0x1000, 0x1001));
}

TEST(IsaReach, JalBoundaryScanMatchesImmediateField) {
  const Address pc = 0x40000000;
  for (std::int64_t limit : {kJalReach.min_offset, kJalReach.max_offset}) {
    for (std::int64_t d = limit - 8; d <= limit + 8; ++d) {
      EXPECT_EQ(jal_in_range(pc, pc + static_cast<Address>(d)), jal_oracle(d)) << d;
    }
  }
}

TEST(IsaReach, AuipcJalrExamples) {
  const Address pc = 0x100000000;
  EXPECT_TRUE(auipc_jalr_in_range(pc, pc - 0x80000800));
  EXPECT_FALSE(auipc_jalr_in_range(pc, pc + 0x7ffff800));
  EXPECT_TRUE(auipc_jalr_in_range(pc, pc));
  EXPECT_TRUE(auipc_jalr_in_range(pc, pc + 0x7ffff7fe));
  EXPECT_FALSE(auipc_jalr_in_range(pc, pc - 0x80000802));
}

TEST(IsaReach, AuipcJalrBoundaryScanMatchesFieldSplit) {
  const Address pc = 0x100000000;
  for (std::int64_t limit : {kAuipcJalrReach.min_offset, kAuipcJalrReach.max_offset}) {
    for (std::int64_t d = limit - 8; d <= limit + 8; ++d) {
      EXPECT_EQ(auipc_jalr_in_range(pc, pc + static_cast<Address>(d)), auipc_jalr_oracle(d)) << d;
    }
  }
}

TEST(IsaEncode, JalExamples) {
  const auto w = encode_jal(Reg::ra, 0x1000, 0x1008);
  const auto d = decode_word(w);
  EXPECT_EQ(d.op, Op::JAL);
  EXPECT_EQ(d.rd, Reg::ra);
  EXPECT_EQ(d.imm, 8);

  const auto self = decode_word(encode_jal(Reg::a7, 0x1000, 0x1000));
  EXPECT_EQ(self.rd, Reg::a7);
  EXPECT_EQ(self.imm, 0);

  EXPECT_THROW(encode_jal(Reg::ra, 0, 0x100000), RangeError);
  EXPECT_NO_THROW(encode_jal(Reg::ra, 0, 0xffffe));
}

TEST(IsaEncode, SplitHiLo) {
  EXPECT_EQ(split_hi_lo(0), std::make_pair(std::int64_t{0}, std::int64_t{0}));
  // Sign-bias case: bit 11 set makes the low part negative.
  EXPECT_EQ(split_hi_lo(0x800), std::make_pair(std::int64_t{0x1000}, std::int64_t{-0x800}));
  EXPECT_EQ(split_hi_lo(0x7ff), std::make_pair(std::int64_t{0}, std::int64_t{0x7ff}));
  const auto [hi, lo] = split_hi_lo(0x12345678);
  EXPECT_EQ(hi + lo, 0x12345678);
}

namespace {

// Runs the pair from `pc` in the emulator and returns the final pc and scratch value.
std::pair<Address, std::uint64_t> run_pair(Address pc, Address target) {
  const auto [w0, w1] = encode_auipc_jalr_pair(Reg::t0, pc, target, Reg::zero);
  emu::MachineState s;
  s.pc = pc;
  execute(s, decode_word(w0));
  execute(s, decode_word(w1));
  return {s.pc, s.reg(Reg::t0)};
}

}  // namespace

TEST(IsaEncode, AuipcJalrPairReachesTarget) {
  const Address pc = 0x200000000;
  EXPECT_EQ(run_pair(pc, pc + 0x12345678).first, pc + 0x12345678);
  EXPECT_EQ(run_pair(pc, pc + 0x800).first, pc + 0x800);
  const auto [w0, w1] = encode_auipc_jalr_pair(Reg::t0, pc, pc);
  EXPECT_EQ(decode_word(w0).imm, 0);
  EXPECT_EQ(decode_word(w1).imm, 0);
  EXPECT_THROW(encode_auipc_jalr_pair(Reg::t0, pc, pc + 0x7ffff800), RangeError);
}

TEST(IsaEncode, AuipcJalrPairDefaultsLinkToScratch) {
  const auto [w0, w1] = encode_auipc_jalr_pair(Reg::t0, 0x1000, 0x3000);
  EXPECT_EQ(decode_word(w0).op, Op::AUIPC);
  const auto j = decode_word(w1);
  EXPECT_EQ(j.op, Op::JALR);
  EXPECT_EQ(j.rd, Reg::t0);
  EXPECT_EQ(j.rs1, Reg::t0);
}

TEST(IsaEncode, AuipcJalrPairRandomDeltas) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int64_t> dist(kAuipcJalrReach.min_offset / 2, kAuipcJalrReach.max_offset / 2);
  const Address pc = 0x400000000;
  int ok = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const std::int64_t d = dist(rng) * 2;
    const Address target = pc + static_cast<Address>(d);
    if (run_pair(pc, target).first == target) ++ok;
  }
  EXPECT_EQ(ok, n);
}

TEST(IsaSetter, Examples) {
  EXPECT_EQ(extract_register_setter_immediate(make(Op::ADDI, Reg::a7, Reg::zero, Reg::zero, 64), Reg::a7), 64u);
  // c.li only encodes [-32, 31]; 17 exercises the compressed form.
  EXPECT_EQ(extract_register_setter_immediate(make(Op::C_LI, Reg::a7, Reg::zero, Reg::zero, 17), Reg::a7), 17u);
  EXPECT_EQ(extract_register_setter_immediate(make(Op::ADDI, Reg::a7, Reg::a7, Reg::zero, 1), Reg::a7), std::nullopt);
  EXPECT_EQ(extract_register_setter_immediate(make(Op::ADDI, Reg::a6, Reg::zero, Reg::zero, 64), Reg::a7),
            std::nullopt);
  EXPECT_EQ(extract_register_setter_immediate(make(Op::ORI, Reg::a7, Reg::zero, Reg::zero, 93), Reg::a7), 93u);
  EXPECT_EQ(extract_register_setter_immediate(make(Op::ADDIW, Reg::a7, Reg::zero, Reg::zero, 220), Reg::a7), 220u);
  EXPECT_EQ(extract_register_setter_immediate(make(Op::LD, Reg::a7, Reg::sp, Reg::zero, 0), Reg::a7), std::nullopt);
  EXPECT_EQ(extract_register_setter_immediate(make(Op::C_LI, Reg::a7, Reg::zero, Reg::zero, -1), Reg::a7),
            ~std::uint64_t{0});
}

TEST(IsaControl, DirectTargets) {
  EXPECT_EQ(direct_target(make(Op::JAL, Reg::ra, Reg::zero, Reg::zero, 8), 0x100), 0x108u);
  EXPECT_EQ(direct_target(make(Op::C_BNEZ, Reg::zero, Reg::a0, Reg::zero, -4), 0x106), 0x102u);
  EXPECT_EQ(direct_target(make(Op::JALR, Reg::zero, Reg::ra), 0x100), std::nullopt);
  EXPECT_EQ(direct_target(make(Op::ADDI), 0x100), std::nullopt);
}

// Relocatability oracle: execute each fuzzed instruction at two addresses
// from the same state. A relocatable instruction must produce the same
// registers and memory and fall through in both places.
TEST(IsaRelocatable, AddressShiftOracle) {
  std::mt19937_64 rng(31);
  const Address data = 0x80000000;
  const Address pc_a = 0x10000;
  const Address pc_b = 0x7654000;
  int relocatable = 0, checked = 0, pc_dependent = 0;
  while (checked < 10000) {
    const bool wide = rng() & 1;
    const auto w = wide ? (static_cast<std::uint32_t>(rng()) | 3u) : static_cast<std::uint32_t>(rng() & 0xffff);
    if (!wide && (w & 3) == 3) continue;
    const auto insn = decode_word(w);
    if (insn.op == Op::UNKNOWN || insn.opclass == OpClass::ECALL || insn.opclass == OpClass::EBREAK ||
        insn.opclass == OpClass::C_EBREAK)
      continue;
    ++checked;

    emu::MachineState base;
    base.memory.map(data - 0x2000, 0x4000);
    for (unsigned r = 1; r < 32; ++r) base.regs[r] = data + 8 * (rng() % 64);
    std::vector<std::uint8_t> seed(0x4000);
    for (auto& b : seed) b = static_cast<std::uint8_t>(rng());
    base.memory.write(data - 0x2000, seed);

    auto run_at = [&](Address pc) -> std::optional<emu::MachineState> {
      emu::MachineState s = base;
      s.pc = pc;
      try {
        execute(s, insn);
      } catch (const emu::EmulatorFault&) {
        return std::nullopt;
      }
      return s;
    };
    const auto a = run_at(pc_a);
    const auto b = run_at(pc_b);
    const bool same = a.has_value() == b.has_value() &&
                      (!a || (a->regs == b->regs && a->pc - pc_a == b->pc - pc_b && a->pc == pc_a + insn.width &&
                              [&] {
                                std::vector<std::uint8_t> ma(0x4000), mb(0x4000);
                                a->memory.read(data - 0x2000, ma);
                                b->memory.read(data - 0x2000, mb);
                                return ma == mb;
                              }()));
    if (!same) ++pc_dependent;
    if (is_relocatable(insn)) {
      ++relocatable;
      EXPECT_TRUE(same) << to_string(insn);
    }
  }
  EXPECT_GT(relocatable, 3000);
  // The oracle must actually see pc-dependent behaviour (auipc, jumps, taken branches).
  EXPECT_GT(pc_dependent, 500);
}
