#pragma once

// RV64IMC decode/encode and the reach/relocatability predicates the patch
// planner is built on.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

namespace rvi {

using Address = std::uint64_t;

enum class Reg : std::uint8_t {
  zero, ra, sp, gp, tp, t0, t1, t2,
  s0, s1, a0, a1, a2, a3, a4, a5,
  a6, a7, s2, s3, s4, s5, s6, s7,
  s8, s9, s10, s11, t3, t4, t5, t6,
};

constexpr unsigned idx(Reg r) { return static_cast<unsigned>(r); }
constexpr Reg reg(unsigned i) { return static_cast<Reg>(i & 31u); }
std::string_view reg_name(Reg r);

namespace isa {

enum class Op : std::uint8_t {
  UNKNOWN,
  // RV64I
  LUI, AUIPC, JAL, JALR,
  BEQ, BNE, BLT, BGE, BLTU, BGEU,
  LB, LH, LW, LD, LBU, LHU, LWU,
  SB, SH, SW, SD,
  ADDI, SLTI, SLTIU, XORI, ORI, ANDI, SLLI, SRLI, SRAI,
  ADD, SUB, SLL, SLT, SLTU, XOR, SRL, SRA, OR, AND,
  ADDIW, SLLIW, SRLIW, SRAIW,
  ADDW, SUBW, SLLW, SRLW, SRAW,
  FENCE, FENCE_I, ECALL, EBREAK,
  CSRRW, CSRRS, CSRRC, CSRRWI, CSRRSI, CSRRCI,
  // M
  MUL, MULH, MULHSU, MULHU, DIV, DIVU, REM, REMU,
  MULW, DIVW, DIVUW, REMW, REMUW,
  // C (RV64 integer subset)
  C_ADDI4SPN, C_LW, C_LD, C_SW, C_SD,
  C_NOP, C_ADDI, C_ADDIW, C_LI, C_ADDI16SP, C_LUI,
  C_SRLI, C_SRAI, C_ANDI, C_SUB, C_XOR, C_OR, C_AND, C_SUBW, C_ADDW,
  C_J, C_BEQZ, C_BNEZ,
  C_SLLI, C_LWSP, C_LDSP, C_JR, C_MV, C_EBREAK, C_JALR, C_ADD,
  C_SWSP, C_SDSP,
  COUNT_,
};

enum class OpClass : std::uint8_t {
  ALU, ALU_IMM, LOAD, STORE, LUI, AUIPC, JAL, JALR, BRANCH,
  ECALL, EBREAK, FENCE, CSR,
  C_ALU, C_ALU_IMM, C_LOAD, C_STORE, C_LUI, C_JAL, C_JALR, C_BRANCH, C_EBREAK,
  UNKNOWN,
};

std::string_view op_name(Op op);
std::string_view op_class_name(OpClass c);
OpClass op_class(Op op);
bool is_compressed(Op op);

/// One decoded instruction. `imm` is always the sign-extended architectural
/// value: byte offsets for jumps/branches/memory, `imm << 12` for lui/auipc
/// and their compressed mirrors, the shift amount for shifts, the CSR number
/// for CSR ops and bits [31:20] for fences.
struct Instruction {
  std::uint32_t raw = 0;
  std::uint8_t width = 4;
  Op op = Op::UNKNOWN;
  OpClass opclass = OpClass::UNKNOWN;
  Reg rd = Reg::zero;
  Reg rs1 = Reg::zero;
  Reg rs2 = Reg::zero;
  std::int64_t imm = 0;

  bool operator==(const Instruction&) const = default;
};

/// Width implied by the two lowest bits of the first halfword.
constexpr unsigned width_of(std::uint16_t low_half) { return (low_half & 3u) == 3u ? 4u : 2u; }

/// Decodes one instruction from little-endian bytes. Throws TruncatedCode
/// when fewer than the implied width are available.
Instruction decode(std::span<const std::uint8_t> bytes, Address pc = 0);

/// Decodes a raw word; compressed forms use only the low 16 bits.
Instruction decode_word(std::uint32_t raw);

/// Re-encodes from the decoded fields (UNKNOWN yields `raw`). Throws
/// RangeError when a field does not fit the encoding.
std::uint32_t encode(const Instruction& insn);

/// Builds an instruction from fields and fills in `raw`, width and class.
Instruction make(Op op, Reg rd = Reg::zero, Reg rs1 = Reg::zero, Reg rs2 = Reg::zero,
                 std::int64_t imm = 0);

/// Writes the instruction's bytes (2 or 4) at the end of `out`.
template <typename Container>
void append(Container& out, const Instruction& insn) {
  for (unsigned i = 0; i < insn.width; ++i) out.push_back(static_cast<std::uint8_t>(insn.raw >> (8 * i)));
}

/// Assembly text with ABI register names, e.g. "addi a7, zero, 64".
std::string to_string(const Instruction& insn);

bool is_relocatable(const Instruction& insn);
bool is_control_flow(const Instruction& insn);

/// Target of a direct jal/branch (or compressed mirror) decoded at `pc`.
std::optional<Address> direct_target(const Instruction& insn, Address pc);

/// Register written by the instruction, if any (x0 writes are reported as absent).
std::optional<Reg> written_register(const Instruction& insn);

/// Constant loaded into `r` by an li idiom (addi/addiw/ori/xori from x0, c.li).
std::optional<std::uint64_t> extract_register_setter_immediate(const Instruction& insn, Reg r);

// ---- jump reach ----------------------------------------------------------

enum class JumpKind : std::uint8_t { JAL, AUIPC_JALR };

struct JumpReach {
  JumpKind kind;
  std::int64_t min_offset;
  std::int64_t max_offset;
};

inline constexpr JumpReach kJalReach{JumpKind::JAL, -1048576, 1048574};
inline constexpr JumpReach kAuipcJalrReach{JumpKind::AUIPC_JALR, -0x80000800LL, 0x7ffff7feLL};

constexpr std::int64_t delta(Address from_pc, Address target) {
  return static_cast<std::int64_t>(target - from_pc);
}

bool jal_in_range(Address from_pc, Address target);
bool auipc_jalr_in_range(Address from_pc, Address target);

/// `jal link, target - from_pc`.
std::uint32_t encode_jal(Reg link, Address from_pc, Address target);

/// Splits a pc-relative delta into the auipc upper immediate (already
/// shifted by 12) and the sign-extended low 12 bits.
std::pair<std::int64_t, std::int64_t> split_hi_lo(std::int64_t delta);

/// `auipc scratch, hi; jalr link, lo(scratch)`; link defaults to scratch.
std::pair<std::uint32_t, std::uint32_t> encode_auipc_jalr_pair(Reg scratch, Address from_pc, Address target,
                                                               std::optional<Reg> link = std::nullopt);

}  // namespace isa
}  // namespace rvi
