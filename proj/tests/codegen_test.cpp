#include <set>

#include <gtest/gtest.h>

#include "rvi/codegen.hpp"
#include "rvi/corpus.hpp"
#include "rvi/emulator.hpp"
#include "support/programs.hpp"

using namespace rvi;
using namespace rvi::codegen;
using namespace rvi::testing;
using isa::Op;

namespace {

PlannedPatch patch_at(PatchKind kind, Address region_start, bool rvc = true) {
  PlannedPatch p;
  p.kind = kind;
  p.rvc = rvc;
  p.region_start = region_start;
  p.patch_length = planner::PatchBudget::for_mode(rvc).of(kind);
  p.region_length = p.patch_length;
  p.link_register = kind == PatchKind::GATEWAY ? Reg::t0 : kind == PatchKind::MIDDLE ? Reg::ra : Reg::a7;
  if (kind == PatchKind::SMALL) p.syscall_number = 64;
  return p;
}

std::vector<isa::Instruction> decode_all(const std::vector<std::uint8_t>& bytes) {
  std::vector<isa::Instruction> out;
  for (std::size_t off = 0; off < bytes.size();) {
    out.push_back(isa::decode(std::span(bytes).subspan(off)));
    off += out.back().width;
  }
  return out;
}

std::vector<Op> ops(const std::vector<std::uint8_t>& bytes) {
  std::vector<Op> out;
  for (const auto& i : decode_all(bytes)) out.push_back(i.op);
  return out;
}

/// Runs `code` at `at` from a fuzzed register file until pc == stop.
emu::MachineState run_from(Address at, const std::vector<std::uint8_t>& code, Address stop,
                           const std::vector<std::pair<Address, std::vector<std::uint8_t>>>& extra,
                           const std::array<std::uint64_t, 32>& regs) {
  auto s = emu::initial_state(at);
  s.regs = regs;
  s.memory.load(at, code);
  for (const auto& [addr, bytes] : extra) s.memory.load(addr, bytes);
  return emu::run(std::move(s), emu::synthetic_kernel(), nullptr, {.max_instret = 1000, .halt_address = stop}).state;
}

}  // namespace

TEST(CodegenPatch, GatewayLayout) {
  const auto p = patch_at(PatchKind::GATEWAY, 0x10000);
  const auto bytes = emit_gateway_patch(p, 0x12000);
  ASSERT_EQ(bytes.size(), 16u);
  EXPECT_EQ(ops(bytes), (std::vector<Op>{Op::C_ADDI, Op::C_SDSP, Op::AUIPC, Op::JALR, Op::C_LDSP, Op::C_ADDI}));
  const auto insns = decode_all(bytes);
  EXPECT_EQ(insns[0].imm, -16);
  EXPECT_EQ(insns[1].rs2, Reg::t0);
  EXPECT_EQ(insns[2].rd, Reg::t0);
  EXPECT_EQ(insns[3].rd, Reg::t0);
  EXPECT_EQ(insns[3].rs1, Reg::t0);
  EXPECT_EQ(insns[4].rd, Reg::t0);
  EXPECT_EQ(insns[5].imm, 16);

  const auto wide = emit_gateway_patch(patch_at(PatchKind::GATEWAY, 0x10000, false), 0x12000);
  ASSERT_EQ(wide.size(), 24u);
  EXPECT_EQ(ops(wide), (std::vector<Op>{Op::ADDI, Op::SD, Op::AUIPC, Op::JALR, Op::LD, Op::ADDI}));
}

TEST(CodegenPatch, GatewayRoundTripWithReturningStub) {
  for (bool rvc : {true, false}) {
    const Address at = 0x10000;
    const Address entry = at + 0x2000;
    const auto p = patch_at(PatchKind::GATEWAY, at, rvc);
    const auto bytes = emit_gateway_patch(p, entry);
    std::vector<std::uint8_t> stub;
    isa::append(stub, isa::make(Op::JALR, Reg::zero, Reg::t0));
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto regs = random_registers(seed);
      const auto s = run_from(at, bytes, at + bytes.size(), {{entry, stub}}, regs);
      EXPECT_EQ(s.regs, regs) << "rvc " << rvc << " seed " << seed;
    }
  }
}

TEST(CodegenPatch, GatewayReachBoundary) {
  const auto p = patch_at(PatchKind::GATEWAY, 0x10000);
  EXPECT_NO_THROW(emit_gateway_patch(p, p.jump_pc() + 0x7ffff7fe));
  EXPECT_NO_THROW(emit_gateway_patch(p, p.jump_pc() - 0x80000800));
  EXPECT_THROW(emit_gateway_patch(p, p.jump_pc() + 0x7ffff7ff), InternalError);
  EXPECT_THROW(emit_gateway_patch(p, p.jump_pc() + 0x7ffff800), InternalError);
}

TEST(CodegenPatch, MiddleLayoutAndKey) {
  const Address at = 0x10000;
  const auto p = patch_at(PatchKind::MIDDLE, at);
  const Address gateway = p.jump_pc() + 0x400;
  const auto bytes = emit_middle_patch(p, gateway);
  ASSERT_EQ(bytes.size(), 12u);
  EXPECT_EQ(ops(bytes), (std::vector<Op>{Op::C_ADDI, Op::C_SDSP, Op::JAL, Op::C_LDSP, Op::C_ADDI}));
  EXPECT_EQ(decode_all(bytes)[2].rd, Reg::ra);

  const auto s = run_from(at, bytes, gateway, {}, random_registers(3));
  EXPECT_EQ(s.reg(Reg::ra), p.jump_pc() + 4);
  EXPECT_EQ(p.key(), p.jump_pc() + 4);

  const auto wide = emit_middle_patch(patch_at(PatchKind::MIDDLE, at, false), gateway);
  EXPECT_EQ(wide.size(), 16u);
  EXPECT_EQ(ops(wide), (std::vector<Op>{Op::ADDI, Op::SD, Op::JAL, Op::LD}));
}

TEST(CodegenPatch, MiddleRejectsSelfJumpAndFarGateway) {
  const auto p = patch_at(PatchKind::MIDDLE, 0x10000);
  EXPECT_THROW(emit_middle_patch(p, p.jump_pc()), InternalError);
  EXPECT_THROW(emit_middle_patch(p, p.jump_pc() + 0x100000), InternalError);
}

TEST(CodegenPatch, SmallLayoutAndKey) {
  const Address at = 0x10000;
  auto p = patch_at(PatchKind::SMALL, at);
  const Address gateway = at - 0x300;
  const auto bytes = emit_small_patch(p, gateway);
  ASSERT_EQ(bytes.size(), 4u);
  const auto j = isa::decode(bytes);
  EXPECT_EQ(j.op, Op::JAL);
  EXPECT_EQ(j.rd, Reg::a7);
  const auto s = run_from(at, bytes, gateway, {}, random_registers(4));
  EXPECT_EQ(s.reg(Reg::a7), at + 4);
  EXPECT_EQ(p.key(), at + 4);

  p.syscall_number.reset();
  EXPECT_THROW(emit_small_patch(p, gateway), InternalError);
}

TEST(CodegenPatch, PaddingFillsRegion) {
  auto p = patch_at(PatchKind::MIDDLE, 0x10000);
  p.region_length = 14;
  const auto padded = pad_to_region(emit_middle_patch(p, p.jump_pc() + 0x40), p);
  ASSERT_EQ(padded.size(), 14u);
  EXPECT_EQ(ops(padded).back(), Op::C_NOP);
  auto q = patch_at(PatchKind::GATEWAY, 0x10000, false);
  q.region_length = 28;
  const auto wide = pad_to_region(emit_gateway_patch(q, 0x12000), q);
  ASSERT_EQ(wide.size(), 28u);
  EXPECT_EQ(ops(wide).back(), Op::ADDI);
}

TEST(CodegenEntryPoint, SavesEveryRegisterThenBreaks) {
  const auto bytes = emit_entry_point();
  EXPECT_EQ(bytes.size(), entry_point_size());
  const auto insns = decode_all(bytes);
  EXPECT_EQ(insns.front().op, Op::ADDI);
  EXPECT_EQ(insns.front().imm, -static_cast<std::int64_t>(kEntryFrameBytes));
  EXPECT_EQ(insns.back().op, Op::EBREAK);
  std::set<Reg> saved;
  for (std::size_t i = 1; i + 1 < insns.size(); ++i) {
    EXPECT_EQ(insns[i].op, Op::SD);
    EXPECT_EQ(insns[i].imm, 8 * static_cast<std::int64_t>(idx(insns[i].rs2)));
    saved.insert(insns[i].rs2);
  }
  EXPECT_EQ(saved.size(), 30u);
  EXPECT_FALSE(saved.contains(Reg::sp));
}

TEST(CodegenRuntime, DispatchMapAndBlocks) {
  corpus::CorpusSpec spec;
  spec.n_sites = 3;
  spec.gateway_fraction = 1.0 / 3;
  spec.middle_fraction = 1.0 / 3;
  spec.small_fraction = 1.0 / 3;
  spec.six_byte_fixture = false;
  const auto c = corpus::generate(spec);
  const auto plan = planner::plan(c.image);
  ASSERT_EQ(plan.patches.size(), 3u);
  const auto a = build_runtime(plan, c.image);
  EXPECT_EQ(a.dispatch_map.size(), 3u);
  for (const auto& [key, id] : a.dispatch_map) {
    const auto& r = a.patches.at(id);
    EXPECT_EQ(r.key, key);
    EXPECT_GE(key - 4, r.region_start);
    EXPECT_LT(key - 4, r.region_end());
  }
  EXPECT_LE(a.trampoline.bytes.size(), 24u);
  EXPECT_EQ(a.bitmap.bytes.size(), bitmap_length(c.image.size()));
  EXPECT_EQ(a.relocated_table.bytes.size(), 3 * kRelocatedBlockStride);
  EXPECT_EQ(a.relocated_table.address % 64, 0u);
  EXPECT_LT(a.entry_point.end(), a.relocated_table.address + 1);
}

TEST(CodegenRuntime, RelocatedBlockKeepsOrderAroundGate) {
  Asm a;
  a.li(Reg::a7, 64).clamp();
  a.op(Op::ADDI, Reg::a0, Reg::a0, Reg::zero, 1).op(Op::ADDI, Reg::a1, Reg::a1, Reg::zero, 2);
  a.ecall();
  a.op(Op::ADDI, Reg::a2, Reg::a2, Reg::zero, 3).clamp().ret();
  const auto img = a.image();
  const auto plan = planner::plan(img);
  ASSERT_EQ(plan.patches.size(), 1u);
  ASSERT_EQ(plan.patches[0].kind, PatchKind::GATEWAY);
  ASSERT_EQ(plan.patches[0].relocated_pre.size(), 2u);
  ASSERT_EQ(plan.patches[0].relocated_post.size(), 1u);
  const auto art = build_runtime(plan, img);
  const auto& r = art.patches[0];
  EXPECT_EQ(r.relocated_pre_count, 2u);
  EXPECT_EQ(r.relocated_post_count, 1u);
  const auto block = std::span(art.relocated_table.bytes).subspan(r.block_address - art.relocated_table.address);
  std::vector<isa::Instruction> seq;
  for (std::size_t off = 0; seq.size() < 4; off += seq.back().width) seq.push_back(isa::decode(block.subspan(off)));
  EXPECT_EQ(isa::to_string(seq[0]), "addi a0, a0, 1");
  EXPECT_EQ(isa::to_string(seq[1]), "addi a1, a1, 2");
  EXPECT_EQ(seq[2].op, Op::EBREAK);
  EXPECT_EQ(r.gate_address, r.block_address + 8);
  EXPECT_EQ(isa::to_string(seq[3]), "addi a2, a2, 3");
}

TEST(CodegenRuntime, PlacementErrors) {
  Asm a;
  a.li(Reg::a7, 64).clamp().fill(2).ecall().fill(2).clamp().ret();
  const auto img = a.image();
  const auto plan = planner::plan(img);
  EXPECT_THROW(build_runtime(plan, img, img.base), PlacementError);
  EXPECT_THROW(build_runtime(plan, img, plan.entry_point + 2), PlacementError);
  EXPECT_THROW(build_runtime(plan, img, img.base + 0x90000000ull), PlacementError);
  EXPECT_NO_THROW(build_runtime(plan, img, plan.entry_point + 0x10000));
}

TEST(CodegenFootprint, Bitmap) {
  EXPECT_EQ(bitmap_length(1u << 20), 65536u);
  EXPECT_EQ(bitmap_length(1u << 20, 1), 131072u);
  EXPECT_EQ(bitmap_length(16), 1u);
  EXPECT_EQ(bitmap_length(18), 2u);

  const auto img = load_raw(std::vector<std::uint8_t>(1u << 20, 0x01), 0x10000);  // all c.nop
  const auto plan = planner::plan(img);
  const auto art = build_runtime(plan, img);
  EXPECT_EQ(art.bitmap.bytes.size(), 65536u);
  EXPECT_EQ(art.footprint.relocated_bytes, 0u);
  EXPECT_LE(art.footprint.trampoline_bytes, 24u);
  EXPECT_EQ(art.footprint.bitmap_bytes, 65536u);
}

TEST(CodegenFootprint, TotalIsSumAndLinear) {
  for (std::size_t n : {0, 1, 7, 2048}) {
    PatchArtifacts a;
    a.trampoline.bytes.resize(4);
    a.bitmap.bytes.resize(65536);
    a.entry_point.bytes.resize(entry_point_size());
    const auto f = account_footprint(a, n);
    EXPECT_EQ(f.total_bytes,
              f.relocated_bytes + f.trampoline_bytes + f.bitmap_bytes + f.dispatch_bytes + f.entry_point_bytes);
    EXPECT_EQ(f.relocated_bytes, n * kRelocatedBlockStride);
    const auto g = account_footprint(a, 2 * n);
    EXPECT_EQ(g.relocated_bytes, 2 * f.relocated_bytes);
  }
}

// Bit set exactly for the 2-byte units covered by some patch region.
TEST(CodegenProperties, BitmapMatchesRegions) {
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    corpus::CorpusSpec spec;
    spec.seed = seed;
    spec.rvc = seed % 2 == 1;
    const auto c = corpus::generate(spec);
    const auto plan = planner::plan(c.image, {.rvc = spec.rvc});
    const auto a = build_runtime(plan, c.image);
    for (Address addr = c.image.base; addr < c.image.end(); addr += 2) {
      bool covered = false;
      for (const auto& p : plan.patches) covered |= addr >= p.region_start && addr < p.region_end();
      ASSERT_EQ(bitmap_test(a, addr), covered) << std::hex << addr;
    }
  }
}

TEST(CodegenProperties, PatchBytesMatchRegionLengthAndKeysAreInjective) {
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    corpus::CorpusSpec spec;
    spec.seed = seed;
    spec.rvc = seed % 2 == 0;
    const auto c = corpus::generate(spec);
    const auto plan = planner::plan(c.image, {.rvc = spec.rvc});
    const auto a = build_runtime(plan, c.image);
    EXPECT_EQ(a.dispatch_map.size(), a.patches.size());
    for (const auto& p : plan.patches) EXPECT_EQ(a.patch_bytes.at(p.id).size(), p.region_length);
    EXPECT_EQ(a.footprint.total_bytes, a.footprint.relocated_bytes + a.footprint.trampoline_bytes +
                                           a.footprint.bitmap_bytes + a.footprint.dispatch_bytes +
                                           a.footprint.entry_point_bytes);
  }
}
