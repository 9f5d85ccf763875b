#include "rvi/isa.hpp"

#include <array>
#include <cstdio>

#include "rvi/error.hpp"

namespace rvi {

namespace {

constexpr std::array<std::string_view, 32> kRegNames = {
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0",
    "a1",   "a2", "a3", "a4", "a5", "a6", "a7", "s2", "s3", "s4", "s5",
    "s6",   "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6",
};

}  // namespace

std::string_view reg_name(Reg r) { return kRegNames[idx(r)]; }

namespace isa {

namespace {

using u32 = std::uint32_t;
using i64 = std::int64_t;

constexpr u32 bits(u32 v, unsigned hi, unsigned lo) { return (v >> lo) & ((1u << (hi - lo + 1)) - 1u); }
constexpr u32 bit(u32 v, unsigned b) { return (v >> b) & 1u; }

constexpr i64 sext(std::uint64_t v, unsigned width) {
  const std::uint64_t m = 1ull << (width - 1);
  v &= (width == 64) ? ~0ull : ((1ull << width) - 1);
  return static_cast<i64>((v ^ m) - m);
}

struct OpInfo {
  std::string_view name;
  OpClass cls;
};

constexpr OpInfo info_of(Op op) {
  switch (op) {
    case Op::UNKNOWN: return {"unknown", OpClass::UNKNOWN};
    case Op::LUI: return {"lui", OpClass::LUI};
    case Op::AUIPC: return {"auipc", OpClass::AUIPC};
    case Op::JAL: return {"jal", OpClass::JAL};
    case Op::JALR: return {"jalr", OpClass::JALR};
    case Op::BEQ: return {"beq", OpClass::BRANCH};
    case Op::BNE: return {"bne", OpClass::BRANCH};
    case Op::BLT: return {"blt", OpClass::BRANCH};
    case Op::BGE: return {"bge", OpClass::BRANCH};
    case Op::BLTU: return {"bltu", OpClass::BRANCH};
    case Op::BGEU: return {"bgeu", OpClass::BRANCH};
    case Op::LB: return {"lb", OpClass::LOAD};
    case Op::LH: return {"lh", OpClass::LOAD};
    case Op::LW: return {"lw", OpClass::LOAD};
    case Op::LD: return {"ld", OpClass::LOAD};
    case Op::LBU: return {"lbu", OpClass::LOAD};
    case Op::LHU: return {"lhu", OpClass::LOAD};
    case Op::LWU: return {"lwu", OpClass::LOAD};
    case Op::SB: return {"sb", OpClass::STORE};
    case Op::SH: return {"sh", OpClass::STORE};
    case Op::SW: return {"sw", OpClass::STORE};
    case Op::SD: return {"sd", OpClass::STORE};
    case Op::ADDI: return {"addi", OpClass::ALU_IMM};
    case Op::SLTI: return {"slti", OpClass::ALU_IMM};
    case Op::SLTIU: return {"sltiu", OpClass::ALU_IMM};
    case Op::XORI: return {"xori", OpClass::ALU_IMM};
    case Op::ORI: return {"ori", OpClass::ALU_IMM};
    case Op::ANDI: return {"andi", OpClass::ALU_IMM};
    case Op::SLLI: return {"slli", OpClass::ALU_IMM};
    case Op::SRLI: return {"srli", OpClass::ALU_IMM};
    case Op::SRAI: return {"srai", OpClass::ALU_IMM};
    case Op::ADD: return {"add", OpClass::ALU};
    case Op::SUB: return {"sub", OpClass::ALU};
    case Op::SLL: return {"sll", OpClass::ALU};
    case Op::SLT: return {"slt", OpClass::ALU};
    case Op::SLTU: return {"sltu", OpClass::ALU};
    case Op::XOR: return {"xor", OpClass::ALU};
    case Op::SRL: return {"srl", OpClass::ALU};
    case Op::SRA: return {"sra", OpClass::ALU};
    case Op::OR: return {"or", OpClass::ALU};
    case Op::AND: return {"and", OpClass::ALU};
    case Op::ADDIW: return {"addiw", OpClass::ALU_IMM};
    case Op::SLLIW: return {"slliw", OpClass::ALU_IMM};
    case Op::SRLIW: return {"srliw", OpClass::ALU_IMM};
    case Op::SRAIW: return {"sraiw", OpClass::ALU_IMM};
    case Op::ADDW: return {"addw", OpClass::ALU};
    case Op::SUBW: return {"subw", OpClass::ALU};
    case Op::SLLW: return {"sllw", OpClass::ALU};
    case Op::SRLW: return {"srlw", OpClass::ALU};
    case Op::SRAW: return {"sraw", OpClass::ALU};
    case Op::FENCE: return {"fence", OpClass::FENCE};
    case Op::FENCE_I: return {"fence.i", OpClass::FENCE};
    case Op::ECALL: return {"ecall", OpClass::ECALL};
    case Op::EBREAK: return {"ebreak", OpClass::EBREAK};
    case Op::CSRRW: return {"csrrw", OpClass::CSR};
    case Op::CSRRS: return {"csrrs", OpClass::CSR};
    case Op::CSRRC: return {"csrrc", OpClass::CSR};
    case Op::CSRRWI: return {"csrrwi", OpClass::CSR};
    case Op::CSRRSI: return {"csrrsi", OpClass::CSR};
    case Op::CSRRCI: return {"csrrci", OpClass::CSR};
    case Op::MUL: return {"mul", OpClass::ALU};
    case Op::MULH: return {"mulh", OpClass::ALU};
    case Op::MULHSU: return {"mulhsu", OpClass::ALU};
    case Op::MULHU: return {"mulhu", OpClass::ALU};
    case Op::DIV: return {"div", OpClass::ALU};
    case Op::DIVU: return {"divu", OpClass::ALU};
    case Op::REM: return {"rem", OpClass::ALU};
    case Op::REMU: return {"remu", OpClass::ALU};
    case Op::MULW: return {"mulw", OpClass::ALU};
    case Op::DIVW: return {"divw", OpClass::ALU};
    case Op::DIVUW: return {"divuw", OpClass::ALU};
    case Op::REMW: return {"remw", OpClass::ALU};
    case Op::REMUW: return {"remuw", OpClass::ALU};
    case Op::C_ADDI4SPN: return {"c.addi4spn", OpClass::C_ALU_IMM};
    case Op::C_LW: return {"c.lw", OpClass::C_LOAD};
    case Op::C_LD: return {"c.ld", OpClass::C_LOAD};
    case Op::C_SW: return {"c.sw", OpClass::C_STORE};
    case Op::C_SD: return {"c.sd", OpClass::C_STORE};
    case Op::C_NOP: return {"c.nop", OpClass::C_ALU_IMM};
    case Op::C_ADDI: return {"c.addi", OpClass::C_ALU_IMM};
    case Op::C_ADDIW: return {"c.addiw", OpClass::C_ALU_IMM};
    case Op::C_LI: return {"c.li", OpClass::C_ALU_IMM};
    case Op::C_ADDI16SP: return {"c.addi16sp", OpClass::C_ALU_IMM};
    case Op::C_LUI: return {"c.lui", OpClass::C_LUI};
    case Op::C_SRLI: return {"c.srli", OpClass::C_ALU_IMM};
    case Op::C_SRAI: return {"c.srai", OpClass::C_ALU_IMM};
    case Op::C_ANDI: return {"c.andi", OpClass::C_ALU_IMM};
    case Op::C_SUB: return {"c.sub", OpClass::C_ALU};
    case Op::C_XOR: return {"c.xor", OpClass::C_ALU};
    case Op::C_OR: return {"c.or", OpClass::C_ALU};
    case Op::C_AND: return {"c.and", OpClass::C_ALU};
    case Op::C_SUBW: return {"c.subw", OpClass::C_ALU};
    case Op::C_ADDW: return {"c.addw", OpClass::C_ALU};
    case Op::C_J: return {"c.j", OpClass::C_JAL};
    case Op::C_BEQZ: return {"c.beqz", OpClass::C_BRANCH};
    case Op::C_BNEZ: return {"c.bnez", OpClass::C_BRANCH};
    case Op::C_SLLI: return {"c.slli", OpClass::C_ALU_IMM};
    case Op::C_LWSP: return {"c.lwsp", OpClass::C_LOAD};
    case Op::C_LDSP: return {"c.ldsp", OpClass::C_LOAD};
    case Op::C_JR: return {"c.jr", OpClass::C_JALR};
    case Op::C_MV: return {"c.mv", OpClass::C_ALU};
    case Op::C_EBREAK: return {"c.ebreak", OpClass::C_EBREAK};
    case Op::C_JALR: return {"c.jalr", OpClass::C_JALR};
    case Op::C_ADD: return {"c.add", OpClass::C_ALU};
    case Op::C_SWSP: return {"c.swsp", OpClass::C_STORE};
    case Op::C_SDSP: return {"c.sdsp", OpClass::C_STORE};
    case Op::COUNT_: break;
  }
  return {"unknown", OpClass::UNKNOWN};
}

Instruction finish(Instruction insn) {
  insn.opclass = info_of(insn.op).cls;
  return insn;
}

Reg creg(u32 three_bits) { return reg(8u + three_bits); }

// ---- 32-bit -------------------------------------------------------------

i64 imm_i(u32 w) { return sext(bits(w, 31, 20), 12); }
i64 imm_s(u32 w) { return sext((bits(w, 31, 25) << 5) | bits(w, 11, 7), 12); }
i64 imm_b(u32 w) {
  return sext((bit(w, 31) << 12) | (bit(w, 7) << 11) | (bits(w, 30, 25) << 5) | (bits(w, 11, 8) << 1), 13);
}
i64 imm_u(u32 w) { return sext(w & 0xfffff000u, 32); }
i64 imm_j(u32 w) {
  return sext((bit(w, 31) << 20) | (bits(w, 19, 12) << 12) | (bit(w, 20) << 11) | (bits(w, 30, 21) << 1), 21);
}

Instruction decode32(u32 w) {
  Instruction in;
  in.raw = w;
  in.width = 4;
  const u32 opcode = bits(w, 6, 0);
  const u32 f3 = bits(w, 14, 12);
  const u32 f7 = bits(w, 31, 25);
  in.rd = reg(bits(w, 11, 7));
  in.rs1 = reg(bits(w, 19, 15));
  in.rs2 = reg(bits(w, 24, 20));
  auto unknown = [&] {
    Instruction u;
    u.raw = w;
    u.width = 4;
    return finish(u);
  };
  auto r_fields_only = [&] { in.imm = 0; };
  switch (opcode) {
    case 0x37: in.op = Op::LUI; in.rs1 = in.rs2 = Reg::zero; in.imm = imm_u(w); break;
    case 0x17: in.op = Op::AUIPC; in.rs1 = in.rs2 = Reg::zero; in.imm = imm_u(w); break;
    case 0x6f: in.op = Op::JAL; in.rs1 = in.rs2 = Reg::zero; in.imm = imm_j(w); break;
    case 0x67:
      if (f3 != 0) return unknown();
      in.op = Op::JALR; in.rs2 = Reg::zero; in.imm = imm_i(w);
      break;
    case 0x63: {
      static constexpr Op kBr[8] = {Op::BEQ, Op::BNE, Op::UNKNOWN, Op::UNKNOWN,
                                    Op::BLT, Op::BGE, Op::BLTU, Op::BGEU};
      if (kBr[f3] == Op::UNKNOWN) return unknown();
      in.op = kBr[f3]; in.rd = Reg::zero; in.imm = imm_b(w);
      break;
    }
    case 0x03: {
      static constexpr Op kLd[8] = {Op::LB, Op::LH, Op::LW, Op::LD, Op::LBU, Op::LHU, Op::LWU, Op::UNKNOWN};
      if (kLd[f3] == Op::UNKNOWN) return unknown();
      in.op = kLd[f3]; in.rs2 = Reg::zero; in.imm = imm_i(w);
      break;
    }
    case 0x23: {
      static constexpr Op kSt[8] = {Op::SB, Op::SH, Op::SW, Op::SD,
                                    Op::UNKNOWN, Op::UNKNOWN, Op::UNKNOWN, Op::UNKNOWN};
      if (kSt[f3] == Op::UNKNOWN) return unknown();
      in.op = kSt[f3]; in.rd = Reg::zero; in.imm = imm_s(w);
      break;
    }
    case 0x13: {
      in.rs2 = Reg::zero;
      const u32 f6 = bits(w, 31, 26);
      switch (f3) {
        case 0: in.op = Op::ADDI; in.imm = imm_i(w); break;
        case 2: in.op = Op::SLTI; in.imm = imm_i(w); break;
        case 3: in.op = Op::SLTIU; in.imm = imm_i(w); break;
        case 4: in.op = Op::XORI; in.imm = imm_i(w); break;
        case 6: in.op = Op::ORI; in.imm = imm_i(w); break;
        case 7: in.op = Op::ANDI; in.imm = imm_i(w); break;
        case 1:
          if (f6 != 0) return unknown();
          in.op = Op::SLLI; in.imm = bits(w, 25, 20);
          break;
        case 5:
          if (f6 == 0) in.op = Op::SRLI;
          else if (f6 == 0x10) in.op = Op::SRAI;
          else return unknown();
          in.imm = bits(w, 25, 20);
          break;
      }
      break;
    }
    case 0x1b: {
      in.rs2 = Reg::zero;
      if (f3 == 0) { in.op = Op::ADDIW; in.imm = imm_i(w); break; }
      if (f3 == 1 && f7 == 0) { in.op = Op::SLLIW; in.imm = bits(w, 24, 20); break; }
      if (f3 == 5 && f7 == 0) { in.op = Op::SRLIW; in.imm = bits(w, 24, 20); break; }
      if (f3 == 5 && f7 == 0x20) { in.op = Op::SRAIW; in.imm = bits(w, 24, 20); break; }
      return unknown();
    }
    case 0x33: {
      r_fields_only();
      static constexpr Op kBase[8] = {Op::ADD, Op::SLL, Op::SLT, Op::SLTU, Op::XOR, Op::SRL, Op::OR, Op::AND};
      static constexpr Op kMul[8] = {Op::MUL, Op::MULH, Op::MULHSU, Op::MULHU,
                                     Op::DIV, Op::DIVU, Op::REM, Op::REMU};
      if (f7 == 0) in.op = kBase[f3];
      else if (f7 == 1) in.op = kMul[f3];
      else if (f7 == 0x20 && f3 == 0) in.op = Op::SUB;
      else if (f7 == 0x20 && f3 == 5) in.op = Op::SRA;
      else return unknown();
      break;
    }
    case 0x3b: {
      r_fields_only();
      if (f7 == 0 && f3 == 0) in.op = Op::ADDW;
      else if (f7 == 0 && f3 == 1) in.op = Op::SLLW;
      else if (f7 == 0 && f3 == 5) in.op = Op::SRLW;
      else if (f7 == 0x20 && f3 == 0) in.op = Op::SUBW;
      else if (f7 == 0x20 && f3 == 5) in.op = Op::SRAW;
      else if (f7 == 1 && f3 == 0) in.op = Op::MULW;
      else if (f7 == 1 && f3 == 4) in.op = Op::DIVW;
      else if (f7 == 1 && f3 == 5) in.op = Op::DIVUW;
      else if (f7 == 1 && f3 == 6) in.op = Op::REMW;
      else if (f7 == 1 && f3 == 7) in.op = Op::REMUW;
      else return unknown();
      break;
    }
    case 0x0f:
      if (f3 > 1) return unknown();
      in.op = f3 == 0 ? Op::FENCE : Op::FENCE_I;
      in.rs2 = Reg::zero;
      in.imm = bits(w, 31, 20);
      break;
    case 0x73: {
      if (f3 == 0) {
        if (w == 0x00000073u) return finish(Instruction{w, 4, Op::ECALL});
        if (w == 0x00100073u) return finish(Instruction{w, 4, Op::EBREAK});
        return unknown();
      }
      static constexpr Op kCsr[8] = {Op::UNKNOWN, Op::CSRRW,  Op::CSRRS,  Op::CSRRC,
                                     Op::UNKNOWN, Op::CSRRWI, Op::CSRRSI, Op::CSRRCI};
      if (kCsr[f3] == Op::UNKNOWN) return unknown();
      in.op = kCsr[f3];
      in.rs2 = Reg::zero;
      in.imm = bits(w, 31, 20);
      break;
    }
    default:
      return unknown();
  }
  return finish(in);
}

// ---- 16-bit -------------------------------------------------------------

Instruction decode16(u32 w) {
  w &= 0xffffu;
  Instruction in;
  in.raw = w;
  in.width = 2;
  auto unknown = [&] {
    Instruction u;
    u.raw = w;
    u.width = 2;
    return finish(u);
  };
  const u32 quadrant = bits(w, 1, 0);
  const u32 f3 = bits(w, 15, 13);
  const Reg rd_full = reg(bits(w, 11, 7));
  const Reg rs2_full = reg(bits(w, 6, 2));
  const i64 ci_imm = sext((bit(w, 12) << 5) | bits(w, 6, 2), 6);
  const u32 ci_uimm = (bit(w, 12) << 5) | bits(w, 6, 2);

  if (quadrant == 0) {
    const Reg rdp = creg(bits(w, 4, 2));
    const Reg rs1p = creg(bits(w, 9, 7));
    const u32 lw_off = (bits(w, 12, 10) << 3) | (bit(w, 6) << 2) | (bit(w, 5) << 6);
    const u32 ld_off = (bits(w, 12, 10) << 3) | (bits(w, 6, 5) << 6);
    switch (f3) {
      case 0: {
        const u32 nz = (bits(w, 12, 11) << 4) | (bits(w, 10, 7) << 6) | (bit(w, 6) << 2) | (bit(w, 5) << 3);
        if (nz == 0) return unknown();
        in.op = Op::C_ADDI4SPN; in.rd = rdp; in.rs1 = Reg::sp; in.imm = nz;
        break;
      }
      case 2: in.op = Op::C_LW; in.rd = rdp; in.rs1 = rs1p; in.imm = lw_off; break;
      case 3: in.op = Op::C_LD; in.rd = rdp; in.rs1 = rs1p; in.imm = ld_off; break;
      case 6: in.op = Op::C_SW; in.rs2 = rdp; in.rs1 = rs1p; in.imm = lw_off; break;
      case 7: in.op = Op::C_SD; in.rs2 = rdp; in.rs1 = rs1p; in.imm = ld_off; break;
      default: return unknown();
    }
    return finish(in);
  }

  if (quadrant == 1) {
    switch (f3) {
      case 0:
        in.op = idx(rd_full) == 0 ? Op::C_NOP : Op::C_ADDI;
        in.rd = in.rs1 = rd_full; in.imm = ci_imm;
        break;
      case 1:
        if (idx(rd_full) == 0) return unknown();
        in.op = Op::C_ADDIW; in.rd = in.rs1 = rd_full; in.imm = ci_imm;
        break;
      case 2: in.op = Op::C_LI; in.rd = rd_full; in.imm = ci_imm; break;
      case 3:
        if (rd_full == Reg::sp) {
          const i64 nz = sext((bit(w, 12) << 9) | (bit(w, 6) << 4) | (bit(w, 5) << 6) | (bits(w, 4, 3) << 7) |
                                  (bit(w, 2) << 5),
                              10);
          if (nz == 0) return unknown();
          in.op = Op::C_ADDI16SP; in.rd = in.rs1 = Reg::sp; in.imm = nz;
        } else {
          if (ci_uimm == 0) return unknown();
          in.op = Op::C_LUI; in.rd = rd_full; in.imm = sext(static_cast<std::uint64_t>(ci_uimm) << 12, 18);
        }
        break;
      case 4: {
        const Reg rdp = creg(bits(w, 9, 7));
        const Reg rs2p = creg(bits(w, 4, 2));
        in.rd = in.rs1 = rdp;
        switch (bits(w, 11, 10)) {
          case 0: in.op = Op::C_SRLI; in.imm = ci_uimm; break;
          case 1: in.op = Op::C_SRAI; in.imm = ci_uimm; break;
          case 2: in.op = Op::C_ANDI; in.imm = ci_imm; break;
          case 3: {
            in.rs2 = rs2p;
            const u32 sel = bits(w, 6, 5);
            if (bit(w, 12) == 0) {
              static constexpr Op kOps[4] = {Op::C_SUB, Op::C_XOR, Op::C_OR, Op::C_AND};
              in.op = kOps[sel];
            } else if (sel == 0) {
              in.op = Op::C_SUBW;
            } else if (sel == 1) {
              in.op = Op::C_ADDW;
            } else {
              return unknown();
            }
            break;
          }
        }
        break;
      }
      case 5:
        in.op = Op::C_J;
        in.imm = sext((bit(w, 12) << 11) | (bit(w, 11) << 4) | (bits(w, 10, 9) << 8) | (bit(w, 8) << 10) |
                          (bit(w, 7) << 6) | (bit(w, 6) << 7) | (bits(w, 5, 3) << 1) | (bit(w, 2) << 5),
                      12);
        break;
      case 6:
      case 7:
        in.op = f3 == 6 ? Op::C_BEQZ : Op::C_BNEZ;
        in.rs1 = creg(bits(w, 9, 7));
        in.imm = sext((bit(w, 12) << 8) | (bits(w, 11, 10) << 3) | (bits(w, 6, 5) << 6) | (bits(w, 4, 3) << 1) |
                          (bit(w, 2) << 5),
                      9);
        break;
    }
    return finish(in);
  }

  // quadrant 2
  switch (f3) {
    case 0: in.op = Op::C_SLLI; in.rd = in.rs1 = rd_full; in.imm = ci_uimm; break;
    case 2:
      if (idx(rd_full) == 0) return unknown();
      in.op = Op::C_LWSP; in.rd = rd_full; in.rs1 = Reg::sp;
      in.imm = (bit(w, 12) << 5) | (bits(w, 6, 4) << 2) | (bits(w, 3, 2) << 6);
      break;
    case 3:
      if (idx(rd_full) == 0) return unknown();
      in.op = Op::C_LDSP; in.rd = rd_full; in.rs1 = Reg::sp;
      in.imm = (bit(w, 12) << 5) | (bits(w, 6, 5) << 3) | (bits(w, 4, 2) << 6);
      break;
    case 4:
      if (bit(w, 12) == 0) {
        if (idx(rs2_full) == 0) {
          if (idx(rd_full) == 0) return unknown();
          in.op = Op::C_JR; in.rs1 = rd_full;
        } else {
          in.op = Op::C_MV; in.rd = rd_full; in.rs2 = rs2_full;
        }
      } else {
        if (idx(rs2_full) == 0 && idx(rd_full) == 0) {
          in.op = Op::C_EBREAK;
        } else if (idx(rs2_full) == 0) {
          in.op = Op::C_JALR; in.rd = Reg::ra; in.rs1 = rd_full;
        } else {
          in.op = Op::C_ADD; in.rd = in.rs1 = rd_full; in.rs2 = rs2_full;
        }
      }
      break;
    case 6:
      in.op = Op::C_SWSP; in.rs1 = Reg::sp; in.rs2 = rs2_full;
      in.imm = (bits(w, 12, 9) << 2) | (bits(w, 8, 7) << 6);
      break;
    case 7:
      in.op = Op::C_SDSP; in.rs1 = Reg::sp; in.rs2 = rs2_full;
      in.imm = (bits(w, 12, 10) << 3) | (bits(w, 9, 7) << 6);
      break;
    default: return unknown();
  }
  return finish(in);
}

// ---- encoding helpers ---------------------------------------------------

void require(bool cond, const Instruction& insn, const char* what) {
  if (!cond) throw RangeError(std::string(op_name(insn.op)) + ": " + what);
}

bool fits_signed(i64 v, unsigned width) { return v >= -(i64{1} << (width - 1)) && v < (i64{1} << (width - 1)); }

u32 enc_r(u32 opcode, u32 f3, u32 f7, const Instruction& in) {
  return opcode | (idx(in.rd) << 7) | (f3 << 12) | (idx(in.rs1) << 15) | (idx(in.rs2) << 20) | (f7 << 25);
}
u32 enc_i(u32 opcode, u32 f3, const Instruction& in) {
  require(fits_signed(in.imm, 12), in, "immediate out of 12-bit range");
  return opcode | (idx(in.rd) << 7) | (f3 << 12) | (idx(in.rs1) << 15) | ((static_cast<u32>(in.imm) & 0xfffu) << 20);
}
u32 enc_shift(u32 opcode, u32 f3, u32 f6, unsigned shamt_bits, const Instruction& in) {
  require(in.imm >= 0 && in.imm < (1 << shamt_bits), in, "shift amount out of range");
  const u32 hi = shamt_bits == 6 ? (f6 << 26) : (f6 << 25);
  return opcode | (idx(in.rd) << 7) | (f3 << 12) | (idx(in.rs1) << 15) | (static_cast<u32>(in.imm) << 20) | hi;
}
u32 enc_s(u32 f3, const Instruction& in) {
  require(fits_signed(in.imm, 12), in, "offset out of 12-bit range");
  const u32 v = static_cast<u32>(in.imm) & 0xfffu;
  return 0x23u | (bits(v, 4, 0) << 7) | (f3 << 12) | (idx(in.rs1) << 15) | (idx(in.rs2) << 20) | (bits(v, 11, 5) << 25);
}
u32 enc_b(u32 f3, const Instruction& in) {
  require(fits_signed(in.imm, 13) && (in.imm & 1) == 0, in, "branch offset out of range or odd");
  const u32 v = static_cast<u32>(in.imm) & 0x1fffu;
  return 0x63u | (bit(v, 11) << 7) | (bits(v, 4, 1) << 8) | (f3 << 12) | (idx(in.rs1) << 15) | (idx(in.rs2) << 20) |
         (bits(v, 10, 5) << 25) | (bit(v, 12) << 31);
}
u32 enc_u(u32 opcode, const Instruction& in) {
  require((in.imm & 0xfff) == 0 && fits_signed(in.imm, 32), in, "upper immediate not representable");
  return opcode | (idx(in.rd) << 7) | (static_cast<u32>(in.imm) & 0xfffff000u);
}
u32 enc_j(const Instruction& in) {
  require(fits_signed(in.imm, 21) && (in.imm & 1) == 0, in, "jump offset out of range or odd");
  const u32 v = static_cast<u32>(in.imm) & 0x1fffffu;
  return 0x6fu | (idx(in.rd) << 7) | (bits(v, 19, 12) << 12) | (bit(v, 11) << 20) | (bits(v, 10, 1) << 21) |
         (bit(v, 20) << 31);
}

bool is_creg(Reg r) { return idx(r) >= 8 && idx(r) <= 15; }
u32 cr3(Reg r) { return idx(r) - 8u; }

u32 enc_ci(u32 f3, u32 quadrant, Reg rd, u32 six) {
  return quadrant | (bits(six, 4, 0) << 2) | (idx(rd) << 7) | (bit(six, 5) << 12) | (f3 << 13);
}

u32 encode16(const Instruction& in) {
  auto uimm = [&](u32 max, u32 align) {
    require(in.imm >= 0 && in.imm <= static_cast<i64>(max) && in.imm % align == 0, in, "unsigned offset out of range");
    return static_cast<u32>(in.imm);
  };
  auto simm6 = [&] {
    require(fits_signed(in.imm, 6), in, "immediate out of 6-bit range");
    return static_cast<u32>(in.imm) & 0x3fu;
  };
  auto need_creg = [&](Reg r) { require(is_creg(r), in, "register must be x8..x15"); };
  switch (in.op) {
    case Op::C_ADDI4SPN: {
      need_creg(in.rd);
      require(in.rs1 == Reg::sp, in, "base must be sp");
      const u32 v = uimm(1020, 4);
      require(v != 0, in, "immediate must be non-zero");
      return 0x0u | (cr3(in.rd) << 2) | (bit(v, 3) << 5) | (bit(v, 2) << 6) | (bits(v, 9, 6) << 7) |
             (bits(v, 5, 4) << 11);
    }
    case Op::C_LW:
    case Op::C_SW: {
      const Reg data = in.op == Op::C_LW ? in.rd : in.rs2;
      need_creg(data);
      need_creg(in.rs1);
      const u32 v = uimm(124, 4);
      const u32 f3 = in.op == Op::C_LW ? 2u : 6u;
      return (f3 << 13) | (bits(v, 5, 3) << 10) | (cr3(in.rs1) << 7) | (bit(v, 2) << 6) | (bit(v, 6) << 5) |
             (cr3(data) << 2);
    }
    case Op::C_LD:
    case Op::C_SD: {
      const Reg data = in.op == Op::C_LD ? in.rd : in.rs2;
      need_creg(data);
      need_creg(in.rs1);
      const u32 v = uimm(248, 8);
      const u32 f3 = in.op == Op::C_LD ? 3u : 7u;
      return (f3 << 13) | (bits(v, 5, 3) << 10) | (cr3(in.rs1) << 7) | (bits(v, 7, 6) << 5) | (cr3(data) << 2);
    }
    case Op::C_NOP:
      require(idx(in.rd) == 0, in, "c.nop writes x0");
      return enc_ci(0, 1, Reg::zero, simm6());
    case Op::C_ADDI:
      require(idx(in.rd) != 0 && in.rd == in.rs1, in, "rd must equal rs1 and be non-zero");
      return enc_ci(0, 1, in.rd, simm6());
    case Op::C_ADDIW:
      require(idx(in.rd) != 0 && in.rd == in.rs1, in, "rd must equal rs1 and be non-zero");
      return enc_ci(1, 1, in.rd, simm6());
    case Op::C_LI: return enc_ci(2, 1, in.rd, simm6());
    case Op::C_ADDI16SP: {
      require(in.rd == Reg::sp && in.rs1 == Reg::sp, in, "operand must be sp");
      require(in.imm != 0 && in.imm % 16 == 0 && fits_signed(in.imm, 10), in, "immediate out of range");
      const u32 v = static_cast<u32>(in.imm) & 0x3ffu;
      return 0x1u | (bit(v, 5) << 2) | (bits(v, 8, 7) << 3) | (bit(v, 6) << 5) | (bit(v, 4) << 6) | (2u << 7) |
             (bit(v, 9) << 12) | (3u << 13);
    }
    case Op::C_LUI: {
      require(in.rd != Reg::sp, in, "rd must not be sp");
      require((in.imm & 0xfff) == 0 && fits_signed(in.imm, 18) && in.imm != 0, in, "immediate out of range");
      return enc_ci(3, 1, in.rd, static_cast<u32>(in.imm >> 12) & 0x3fu);
    }
    case Op::C_SRLI:
    case Op::C_SRAI:
    case Op::C_ANDI: {
      need_creg(in.rd);
      require(in.rd == in.rs1, in, "rd must equal rs1");
      u32 six;
      u32 sel;
      if (in.op == Op::C_ANDI) {
        six = simm6();
        sel = 2;
      } else {
        six = uimm(63, 1);
        sel = in.op == Op::C_SRLI ? 0u : 1u;
      }
      return 0x1u | (bits(six, 4, 0) << 2) | (cr3(in.rd) << 7) | (sel << 10) | (bit(six, 5) << 12) | (4u << 13);
    }
    case Op::C_SUB:
    case Op::C_XOR:
    case Op::C_OR:
    case Op::C_AND:
    case Op::C_SUBW:
    case Op::C_ADDW: {
      need_creg(in.rd);
      need_creg(in.rs2);
      require(in.rd == in.rs1, in, "rd must equal rs1");
      u32 sel = 0;
      u32 w = 0;
      switch (in.op) {
        case Op::C_SUB: sel = 0; break;
        case Op::C_XOR: sel = 1; break;
        case Op::C_OR: sel = 2; break;
        case Op::C_AND: sel = 3; break;
        case Op::C_SUBW: sel = 0; w = 1; break;
        default: sel = 1; w = 1; break;
      }
      return 0x1u | (cr3(in.rs2) << 2) | (sel << 5) | (cr3(in.rd) << 7) | (3u << 10) | (w << 12) | (4u << 13);
    }
    case Op::C_J: {
      require(fits_signed(in.imm, 12) && (in.imm & 1) == 0, in, "jump offset out of range or odd");
      const u32 v = static_cast<u32>(in.imm) & 0xfffu;
      return 0x1u | (bit(v, 5) << 2) | (bits(v, 3, 1) << 3) | (bit(v, 7) << 6) | (bit(v, 6) << 7) |
             (bit(v, 10) << 8) | (bits(v, 9, 8) << 9) | (bit(v, 4) << 11) | (bit(v, 11) << 12) | (5u << 13);
    }
    case Op::C_BEQZ:
    case Op::C_BNEZ: {
      need_creg(in.rs1);
      require(fits_signed(in.imm, 9) && (in.imm & 1) == 0, in, "branch offset out of range or odd");
      const u32 v = static_cast<u32>(in.imm) & 0x1ffu;
      const u32 f3 = in.op == Op::C_BEQZ ? 6u : 7u;
      return 0x1u | (bit(v, 5) << 2) | (bits(v, 2, 1) << 3) | (bits(v, 7, 6) << 5) | (cr3(in.rs1) << 7) |
             (bits(v, 4, 3) << 10) | (bit(v, 8) << 12) | (f3 << 13);
    }
    case Op::C_SLLI:
      require(in.rd == in.rs1, in, "rd must equal rs1");
      return enc_ci(0, 2, in.rd, uimm(63, 1));
    case Op::C_LWSP: {
      require(idx(in.rd) != 0 && in.rs1 == Reg::sp, in, "rd non-zero, base sp");
      const u32 v = uimm(252, 4);
      return 0x2u | (bits(v, 7, 6) << 2) | (bits(v, 4, 2) << 4) | (idx(in.rd) << 7) | (bit(v, 5) << 12) | (2u << 13);
    }
    case Op::C_LDSP: {
      require(idx(in.rd) != 0 && in.rs1 == Reg::sp, in, "rd non-zero, base sp");
      const u32 v = uimm(504, 8);
      return 0x2u | (bits(v, 8, 6) << 2) | (bits(v, 4, 3) << 5) | (idx(in.rd) << 7) | (bit(v, 5) << 12) | (3u << 13);
    }
    case Op::C_JR:
      require(idx(in.rs1) != 0, in, "rs1 must be non-zero");
      return 0x2u | (idx(in.rs1) << 7) | (4u << 13);
    case Op::C_MV:
      require(idx(in.rs2) != 0, in, "rs2 must be non-zero");
      return 0x2u | (idx(in.rs2) << 2) | (idx(in.rd) << 7) | (4u << 13);
    case Op::C_EBREAK: return 0x9002u;
    case Op::C_JALR:
      require(idx(in.rs1) != 0, in, "rs1 must be non-zero");
      return 0x2u | (idx(in.rs1) << 7) | (1u << 12) | (4u << 13);
    case Op::C_ADD:
      require(idx(in.rs2) != 0 && in.rd == in.rs1, in, "rs2 non-zero, rd == rs1");
      return 0x2u | (idx(in.rs2) << 2) | (idx(in.rd) << 7) | (1u << 12) | (4u << 13);
    case Op::C_SWSP: {
      require(in.rs1 == Reg::sp, in, "base must be sp");
      const u32 v = uimm(252, 4);
      return 0x2u | (idx(in.rs2) << 2) | (bits(v, 7, 6) << 7) | (bits(v, 5, 2) << 9) | (6u << 13);
    }
    case Op::C_SDSP: {
      require(in.rs1 == Reg::sp, in, "base must be sp");
      const u32 v = uimm(504, 8);
      return 0x2u | (idx(in.rs2) << 2) | (bits(v, 8, 6) << 7) | (bits(v, 5, 3) << 10) | (7u << 13);
    }
    default: break;
  }
  throw InternalError("encode16: not a compressed op");
}

std::string fence_set(u32 four) {
  std::string s;
  if (four & 8) s += 'i';
  if (four & 4) s += 'o';
  if (four & 2) s += 'r';
  if (four & 1) s += 'w';
  return s.empty() ? "0" : s;
}

}  // namespace

std::string_view op_name(Op op) { return info_of(op).name; }

std::string_view op_class_name(OpClass c) {
  static constexpr std::array<std::string_view, 23> kNames = {
      "ALU",   "ALU_IMM", "LOAD",      "STORE",   "LUI",    "AUIPC",   "JAL",     "JALR",
      "BRANCH", "ECALL",  "EBREAK",    "FENCE",   "CSR",    "C_ALU",   "C_ALU_IMM", "C_LOAD",
      "C_STORE", "C_LUI", "C_JAL",     "C_JALR",  "C_BRANCH", "C_EBREAK", "UNKNOWN"};
  return kNames[static_cast<unsigned>(c)];
}

OpClass op_class(Op op) { return info_of(op).cls; }

bool is_compressed(Op op) { return op >= Op::C_ADDI4SPN && op < Op::COUNT_; }

Instruction decode_word(std::uint32_t raw) {
  return width_of(static_cast<std::uint16_t>(raw)) == 4 ? decode32(raw) : decode16(raw);
}

Instruction decode(std::span<const std::uint8_t> bytes, Address pc) {
  if (bytes.size() < 2)
    throw TruncatedCode("truncated code at " + std::to_string(pc) + ": need 2 bytes, have " +
                        std::to_string(bytes.size()));
  const std::uint16_t lo = static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
  if (width_of(lo) == 2) return decode16(lo);
  if (bytes.size() < 4)
    throw TruncatedCode("truncated code at " + std::to_string(pc) + ": need 4 bytes, have " +
                        std::to_string(bytes.size()));
  const std::uint32_t w = lo | (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
  return decode32(w);
}

std::uint32_t encode(const Instruction& in) {
  switch (in.op) {
    case Op::UNKNOWN: return in.raw;
    case Op::LUI: return enc_u(0x37, in);
    case Op::AUIPC: return enc_u(0x17, in);
    case Op::JAL: return enc_j(in);
    case Op::JALR: return enc_i(0x67, 0, in);
    case Op::BEQ: return enc_b(0, in);
    case Op::BNE: return enc_b(1, in);
    case Op::BLT: return enc_b(4, in);
    case Op::BGE: return enc_b(5, in);
    case Op::BLTU: return enc_b(6, in);
    case Op::BGEU: return enc_b(7, in);
    case Op::LB: return enc_i(0x03, 0, in);
    case Op::LH: return enc_i(0x03, 1, in);
    case Op::LW: return enc_i(0x03, 2, in);
    case Op::LD: return enc_i(0x03, 3, in);
    case Op::LBU: return enc_i(0x03, 4, in);
    case Op::LHU: return enc_i(0x03, 5, in);
    case Op::LWU: return enc_i(0x03, 6, in);
    case Op::SB: return enc_s(0, in);
    case Op::SH: return enc_s(1, in);
    case Op::SW: return enc_s(2, in);
    case Op::SD: return enc_s(3, in);
    case Op::ADDI: return enc_i(0x13, 0, in);
    case Op::SLTI: return enc_i(0x13, 2, in);
    case Op::SLTIU: return enc_i(0x13, 3, in);
    case Op::XORI: return enc_i(0x13, 4, in);
    case Op::ORI: return enc_i(0x13, 6, in);
    case Op::ANDI: return enc_i(0x13, 7, in);
    case Op::SLLI: return enc_shift(0x13, 1, 0x00, 6, in);
    case Op::SRLI: return enc_shift(0x13, 5, 0x00, 6, in);
    case Op::SRAI: return enc_shift(0x13, 5, 0x10, 6, in);
    case Op::ADD: return enc_r(0x33, 0, 0x00, in);
    case Op::SUB: return enc_r(0x33, 0, 0x20, in);
    case Op::SLL: return enc_r(0x33, 1, 0x00, in);
    case Op::SLT: return enc_r(0x33, 2, 0x00, in);
    case Op::SLTU: return enc_r(0x33, 3, 0x00, in);
    case Op::XOR: return enc_r(0x33, 4, 0x00, in);
    case Op::SRL: return enc_r(0x33, 5, 0x00, in);
    case Op::SRA: return enc_r(0x33, 5, 0x20, in);
    case Op::OR: return enc_r(0x33, 6, 0x00, in);
    case Op::AND: return enc_r(0x33, 7, 0x00, in);
    case Op::ADDIW: return enc_i(0x1b, 0, in);
    case Op::SLLIW: return enc_shift(0x1b, 1, 0x00, 5, in);
    case Op::SRLIW: return enc_shift(0x1b, 5, 0x00, 5, in);
    case Op::SRAIW: return enc_shift(0x1b, 5, 0x20, 5, in);
    case Op::ADDW: return enc_r(0x3b, 0, 0x00, in);
    case Op::SUBW: return enc_r(0x3b, 0, 0x20, in);
    case Op::SLLW: return enc_r(0x3b, 1, 0x00, in);
    case Op::SRLW: return enc_r(0x3b, 5, 0x00, in);
    case Op::SRAW: return enc_r(0x3b, 5, 0x20, in);
    case Op::FENCE:
    case Op::FENCE_I:
      require(in.imm >= 0 && in.imm < 4096, in, "fence field out of range");
      return 0x0fu | (idx(in.rd) << 7) | ((in.op == Op::FENCE ? 0u : 1u) << 12) | (idx(in.rs1) << 15) |
             (static_cast<u32>(in.imm) << 20);
    case Op::ECALL: return 0x00000073u;
    case Op::EBREAK: return 0x00100073u;
    case Op::CSRRW:
    case Op::CSRRS:
    case Op::CSRRC:
    case Op::CSRRWI:
    case Op::CSRRSI:
    case Op::CSRRCI: {
      require(in.imm >= 0 && in.imm < 4096, in, "csr number out of range");
      static constexpr u32 kF3[] = {1, 2, 3, 5, 6, 7};
      const u32 f3 = kF3[static_cast<unsigned>(in.op) - static_cast<unsigned>(Op::CSRRW)];
      return 0x73u | (idx(in.rd) << 7) | (f3 << 12) | (idx(in.rs1) << 15) | (static_cast<u32>(in.imm) << 20);
    }
    case Op::MUL: return enc_r(0x33, 0, 1, in);
    case Op::MULH: return enc_r(0x33, 1, 1, in);
    case Op::MULHSU: return enc_r(0x33, 2, 1, in);
    case Op::MULHU: return enc_r(0x33, 3, 1, in);
    case Op::DIV: return enc_r(0x33, 4, 1, in);
    case Op::DIVU: return enc_r(0x33, 5, 1, in);
    case Op::REM: return enc_r(0x33, 6, 1, in);
    case Op::REMU: return enc_r(0x33, 7, 1, in);
    case Op::MULW: return enc_r(0x3b, 0, 1, in);
    case Op::DIVW: return enc_r(0x3b, 4, 1, in);
    case Op::DIVUW: return enc_r(0x3b, 5, 1, in);
    case Op::REMW: return enc_r(0x3b, 6, 1, in);
    case Op::REMUW: return enc_r(0x3b, 7, 1, in);
    default: return encode16(in);
  }
}

Instruction make(Op op, Reg rd, Reg rs1, Reg rs2, std::int64_t imm) {
  Instruction in;
  in.op = op;
  in.rd = rd;
  in.rs1 = rs1;
  in.rs2 = rs2;
  in.imm = imm;
  in.width = is_compressed(op) ? 2 : 4;
  in.opclass = op_class(op);
  in.raw = encode(in);
  return in;
}

std::string to_string(const Instruction& in) {
  const auto r = [](Reg x) { return std::string(reg_name(x)); };
  const std::string n(op_name(in.op));
  const std::string imm = std::to_string(in.imm);
  const auto mem = [&](Reg data) { return n + " " + r(data) + ", " + imm + "(" + r(in.rs1) + ")"; };
  switch (in.opclass) {
    case OpClass::UNKNOWN: {
      char buf[32];
      if (in.width == 2) std::snprintf(buf, sizeof buf, ".half 0x%04x", in.raw & 0xffffu);
      else std::snprintf(buf, sizeof buf, ".word 0x%08x", in.raw);
      return buf;
    }
    case OpClass::ECALL:
    case OpClass::EBREAK:
    case OpClass::C_EBREAK: return n;
    case OpClass::LUI:
    case OpClass::AUIPC:
    case OpClass::C_LUI:
      return n + " " + r(in.rd) + ", " + std::to_string((static_cast<std::uint64_t>(in.imm) >> 12) & 0xfffffu);
    case OpClass::JAL: return n + " " + r(in.rd) + ", " + imm;
    case OpClass::C_JAL: return n + " " + imm;
    case OpClass::JALR: return n + " " + r(in.rd) + ", " + imm + "(" + r(in.rs1) + ")";
    case OpClass::C_JALR: return n + " " + r(in.rs1);
    case OpClass::BRANCH: return n + " " + r(in.rs1) + ", " + r(in.rs2) + ", " + imm;
    case OpClass::C_BRANCH: return n + " " + r(in.rs1) + ", " + imm;
    case OpClass::LOAD:
    case OpClass::C_LOAD: return mem(in.rd);
    case OpClass::STORE:
    case OpClass::C_STORE: return mem(in.rs2);
    case OpClass::ALU: return n + " " + r(in.rd) + ", " + r(in.rs1) + ", " + r(in.rs2);
    case OpClass::ALU_IMM: return n + " " + r(in.rd) + ", " + r(in.rs1) + ", " + imm;
    case OpClass::C_ALU:
      return n + " " + r(in.rd) + ", " + r(in.rs2);
    case OpClass::C_ALU_IMM:
      if (in.op == Op::C_NOP) return in.imm == 0 ? n : n + " " + imm;
      if (in.op == Op::C_ADDI4SPN) return n + " " + r(in.rd) + ", sp, " + imm;
      return n + " " + r(in.rd) + ", " + imm;
    case OpClass::FENCE:
      if (in.op == Op::FENCE_I) return n;
      return n + " " + fence_set(bits(static_cast<u32>(in.imm), 7, 4)) + ", " +
             fence_set(bits(static_cast<u32>(in.imm), 3, 0));
    case OpClass::CSR: {
      const bool uimm = in.op == Op::CSRRWI || in.op == Op::CSRRSI || in.op == Op::CSRRCI;
      return n + " " + r(in.rd) + ", " + imm + ", " + (uimm ? std::to_string(idx(in.rs1)) : r(in.rs1));
    }
  }
  return n;
}

bool is_relocatable(const Instruction& in) {
  switch (in.opclass) {
    case OpClass::ALU:
    case OpClass::ALU_IMM:
    case OpClass::LOAD:
    case OpClass::STORE:
    case OpClass::LUI:
    case OpClass::C_ALU:
    case OpClass::C_ALU_IMM:
    case OpClass::C_LOAD:
    case OpClass::C_STORE:
    case OpClass::C_LUI: return true;
    default: return false;
  }
}

bool is_control_flow(const Instruction& in) {
  switch (in.opclass) {
    case OpClass::JAL:
    case OpClass::JALR:
    case OpClass::BRANCH:
    case OpClass::ECALL:
    case OpClass::EBREAK:
    case OpClass::C_JAL:
    case OpClass::C_JALR:
    case OpClass::C_BRANCH:
    case OpClass::C_EBREAK: return true;
    default: return false;
  }
}

std::optional<Address> direct_target(const Instruction& in, Address pc) {
  switch (in.opclass) {
    case OpClass::JAL:
    case OpClass::BRANCH:
    case OpClass::C_JAL:
    case OpClass::C_BRANCH: return pc + static_cast<Address>(in.imm);
    default: return std::nullopt;
  }
}

std::optional<Reg> written_register(const Instruction& in) {
  switch (in.opclass) {
    case OpClass::STORE:
    case OpClass::C_STORE:
    case OpClass::BRANCH:
    case OpClass::C_BRANCH:
    case OpClass::ECALL:
    case OpClass::EBREAK:
    case OpClass::C_EBREAK:
    case OpClass::UNKNOWN: return std::nullopt;
    case OpClass::FENCE: return std::nullopt;
    case OpClass::C_JAL: return std::nullopt;
    case OpClass::C_JALR: return in.op == Op::C_JALR ? std::optional<Reg>(Reg::ra) : std::nullopt;
    default: break;
  }
  if (in.op == Op::C_NOP || idx(in.rd) == 0) return std::nullopt;
  return in.rd;
}

std::optional<std::uint64_t> extract_register_setter_immediate(const Instruction& in, Reg r) {
  if (idx(r) == 0 || in.rd != r) return std::nullopt;
  switch (in.op) {
    case Op::ADDI:
    case Op::ADDIW:
    case Op::ORI:
    case Op::XORI:
      if (in.rs1 != Reg::zero) return std::nullopt;
      return static_cast<std::uint64_t>(in.imm);
    case Op::C_LI: return static_cast<std::uint64_t>(in.imm);
    default: return std::nullopt;
  }
}

bool jal_in_range(Address from_pc, Address target) {
  const auto d = delta(from_pc, target);
  return (d & 1) == 0 && d >= kJalReach.min_offset && d <= kJalReach.max_offset;
}

bool auipc_jalr_in_range(Address from_pc, Address target) {
  const auto d = delta(from_pc, target);
  return (d & 1) == 0 && d >= kAuipcJalrReach.min_offset && d <= kAuipcJalrReach.max_offset;
}

std::uint32_t encode_jal(Reg link, Address from_pc, Address target) {
  if (!jal_in_range(from_pc, target))
    throw RangeError("jal offset " + std::to_string(delta(from_pc, target)) + " out of range");
  return make(Op::JAL, link, Reg::zero, Reg::zero, delta(from_pc, target)).raw;
}

std::pair<std::int64_t, std::int64_t> split_hi_lo(std::int64_t d) {
  const std::int64_t lo = sext(static_cast<std::uint64_t>(d) & 0xfffu, 12);
  return {d - lo, lo};
}

std::pair<std::uint32_t, std::uint32_t> encode_auipc_jalr_pair(Reg scratch, Address from_pc, Address target,
                                                               std::optional<Reg> link) {
  if (!auipc_jalr_in_range(from_pc, target))
    throw RangeError("auipc+jalr offset " + std::to_string(delta(from_pc, target)) + " out of range");
  const auto [hi, lo] = split_hi_lo(delta(from_pc, target));
  const Instruction up = make(Op::AUIPC, scratch, Reg::zero, Reg::zero, hi);
  const Instruction jump = make(Op::JALR, link.value_or(scratch), scratch, Reg::zero, lo);
  return {up.raw, jump.raw};
}

}  // namespace isa
}  // namespace rvi
