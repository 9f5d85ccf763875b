#include "rvi/emulator.hpp"

#include <cstring>

namespace rvi::emu {

using isa::Op;
using u64 = std::uint64_t;
using i64 = std::int64_t;

// ---- memory ---------------------------------------------------------------

Memory::Memory(const Memory& other) { *this = other; }

Memory& Memory::operator=(const Memory& other) {
  if (this == &other) return *this;
  pages_.clear();
  for (const auto& [base, p] : other.pages_) pages_.emplace(base, std::make_unique<Page>(*p));
  return *this;
}

const Memory::Page* Memory::page(Address addr) const {
  const auto it = pages_.find(addr & ~(kPageSize - 1));
  return it == pages_.end() ? nullptr : it->second.get();
}

Memory::Page* Memory::page(Address addr) {
  const auto it = pages_.find(addr & ~(kPageSize - 1));
  return it == pages_.end() ? nullptr : it->second.get();
}

void Memory::map(Address addr, u64 len) {
  if (len == 0) return;
  const Address first = addr & ~(kPageSize - 1);
  const Address last = (addr + len - 1) & ~(kPageSize - 1);
  for (Address p = first;; p += kPageSize) {
    auto& slot = pages_[p];
    if (!slot) slot = std::make_unique<Page>(Page{});
    if (p == last) break;
  }
}

void Memory::load(Address addr, std::span<const std::uint8_t> bytes) {
  map(addr, bytes.size());
  write(addr, bytes);
}

bool Memory::is_mapped(Address addr, u64 len) const {
  for (u64 i = 0; i < len;) {
    const Address a = addr + i;
    if (!page(a)) return false;
    i += kPageSize - (a & (kPageSize - 1));
  }
  return true;
}

bool Memory::read(Address addr, std::span<std::uint8_t> out) const {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Page* p = page(addr + i);
    if (!p) return false;
    out[i] = (*p)[(addr + i) & (kPageSize - 1)];
  }
  return true;
}

bool Memory::write(Address addr, std::span<const std::uint8_t> in) {
  if (!is_mapped(addr, in.size())) return false;
  for (std::size_t i = 0; i < in.size(); ++i) (*page(addr + i))[(addr + i) & (kPageSize - 1)] = in[i];
  return true;
}

std::optional<u64> Memory::read_u64(Address addr) const {
  std::array<std::uint8_t, 8> b{};
  if (!read(addr, b)) return std::nullopt;
  u64 v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

bool Memory::write_u64(Address addr, u64 v) {
  std::array<std::uint8_t, 8> b{};
  for (std::size_t i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  return write(addr, b);
}

// ---- kernel ---------------------------------------------------------------

namespace {

u64 mix(u64 x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

}  // namespace

KernelModel synthetic_kernel(u64 cost_units) {
  KernelModel k;
  k.handler = [cost_units](u64 number, const SyscallArgs& args, const MachineState&) {
    KernelResult r;
    r.cost_units = cost_units;
    switch (number) {
      case 172: r.ret0 = 1000; break;  // getpid
      case 93:
      case 94: r.ret0 = 0; break;  // exit, exit_group
      case 220:
      case 435: r.ret0 = 0x4000 + (mix(args[0] ^ args[1]) & 0xfff); break;
      default: {
        u64 h = mix(number);
        for (u64 a : args) h = mix(h ^ a);
        r.ret0 = h & 0xffff;
        r.ret1 = h >> 48;
        break;
      }
    }
    return r;
  };
  return k;
}

std::string_view event_kind_name(Event::Kind k) {
  switch (k) {
    case Event::Kind::SYSCALL: return "SYSCALL";
    case Event::Kind::HOOK_PRE: return "HOOK_PRE";
    case Event::Kind::HOOK_POST: return "HOOK_POST";
    case Event::Kind::POST_CLONE: return "POST_CLONE";
    case Event::Kind::BREAK: return "BREAK";
  }
  return "?";
}

std::vector<Event> ExecutionTrace::syscalls() const {
  std::vector<Event> out;
  for (const auto& e : events)
    if (e.kind == Event::Kind::SYSCALL) out.push_back(e);
  return out;
}

std::string_view fault_name(EmulatorFault::Kind k) {
  switch (k) {
    case EmulatorFault::Kind::ILLEGAL_INSTRUCTION: return "illegal-instruction";
    case EmulatorFault::Kind::MISALIGNED_ACCESS: return "misaligned-access";
    case EmulatorFault::Kind::MISALIGNED_FETCH: return "misaligned-fetch";
    case EmulatorFault::Kind::UNMAPPED_FETCH: return "unmapped-fetch";
    case EmulatorFault::Kind::UNMAPPED_ACCESS: return "unmapped-access";
    case EmulatorFault::Kind::LIMIT_EXCEEDED: return "limit-exceeded";
    case EmulatorFault::Kind::DISPATCH_FAILURE: return "dispatch-failure";
    case EmulatorFault::Kind::UNHANDLED_EBREAK: return "unhandled-ebreak";
  }
  return "?";
}

namespace {

std::string hex(u64 v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

EmulatorFault::EmulatorFault(Kind kind, Address pc, const std::string& what)
    : Error(std::string(fault_name(kind)) + " at " + hex(pc) + (what.empty() ? "" : ": " + what)),
      kind_(kind),
      pc_(pc) {}

// ---- execution ------------------------------------------------------------

namespace {

using Fault = EmulatorFault::Kind;

u64 load(const MachineState& s, Address addr, unsigned size, bool sign) {
  if (addr % size != 0) throw EmulatorFault(Fault::MISALIGNED_ACCESS, s.pc, "load " + hex(addr));
  std::array<std::uint8_t, 8> b{};
  if (!s.memory.read(addr, std::span(b.data(), size))) throw EmulatorFault(Fault::UNMAPPED_ACCESS, s.pc, "load " + hex(addr));
  u64 v = 0;
  for (unsigned i = size; i-- > 0;) v = (v << 8) | b[i];
  if (sign && size < 8) {
    const unsigned shift = 64 - 8 * size;
    v = static_cast<u64>(static_cast<i64>(v << shift) >> shift);
  }
  return v;
}

void store(MachineState& s, Address addr, unsigned size, u64 v) {
  if (addr % size != 0) throw EmulatorFault(Fault::MISALIGNED_ACCESS, s.pc, "store " + hex(addr));
  std::array<std::uint8_t, 8> b{};
  for (unsigned i = 0; i < size; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  if (!s.memory.write(addr, std::span<const std::uint8_t>(b.data(), size)))
    throw EmulatorFault(Fault::UNMAPPED_ACCESS, s.pc, "store " + hex(addr));
}

u64 sext32(u64 v) { return static_cast<u64>(static_cast<i64>(static_cast<std::int32_t>(v))); }

u64 mulh(i64 a, i64 b) { return static_cast<u64>((static_cast<__int128>(a) * b) >> 64); }
u64 mulhu(u64 a, u64 b) { return static_cast<u64>((static_cast<unsigned __int128>(a) * b) >> 64); }
u64 mulhsu(i64 a, u64 b) {
  return static_cast<u64>((static_cast<__int128>(a) * static_cast<__int128>(static_cast<unsigned __int128>(b))) >> 64);
}

u64 div_s(i64 a, i64 b) {
  if (b == 0) return ~u64{0};
  if (a == INT64_MIN && b == -1) return static_cast<u64>(a);
  return static_cast<u64>(a / b);
}
u64 rem_s(i64 a, i64 b) {
  if (b == 0) return static_cast<u64>(a);
  if (a == INT64_MIN && b == -1) return 0;
  return static_cast<u64>(a % b);
}
u64 div_u(u64 a, u64 b) { return b == 0 ? ~u64{0} : a / b; }
u64 rem_u(u64 a, u64 b) { return b == 0 ? a : a % b; }

u64 divw(u64 a, u64 b) {
  const auto x = static_cast<std::int32_t>(a);
  const auto y = static_cast<std::int32_t>(b);
  if (y == 0) return ~u64{0};
  if (x == INT32_MIN && y == -1) return sext32(static_cast<u64>(static_cast<std::uint32_t>(x)));
  return sext32(static_cast<u64>(static_cast<std::uint32_t>(x / y)));
}
u64 remw(u64 a, u64 b) {
  const auto x = static_cast<std::int32_t>(a);
  const auto y = static_cast<std::int32_t>(b);
  if (y == 0) return sext32(static_cast<u64>(static_cast<std::uint32_t>(x)));
  if (x == INT32_MIN && y == -1) return 0;
  return sext32(static_cast<u64>(static_cast<std::uint32_t>(x % y)));
}
u64 divuw(u64 a, u64 b) {
  const auto x = static_cast<std::uint32_t>(a);
  const auto y = static_cast<std::uint32_t>(b);
  return y == 0 ? ~u64{0} : sext32(x / y);
}
u64 remuw(u64 a, u64 b) {
  const auto x = static_cast<std::uint32_t>(a);
  const auto y = static_cast<std::uint32_t>(b);
  return sext32(y == 0 ? x : x % y);
}

}  // namespace

void execute(MachineState& s, const isa::Instruction& in) {
  const u64 a = s.reg(in.rs1);
  const u64 b = s.reg(in.rs2);
  const u64 imm = static_cast<u64>(in.imm);
  const Address pc = s.pc;
  Address next = pc + in.width;
  const auto sh = [](u64 v) { return static_cast<unsigned>(v & 63); };
  const auto shw = [](u64 v) { return static_cast<unsigned>(v & 31); };
  const auto branch = [&](bool taken) {
    if (taken) next = pc + imm;
  };

  switch (in.op) {
    case Op::LUI:
    case Op::C_LUI: s.set(in.rd, imm); break;
    case Op::AUIPC: s.set(in.rd, pc + imm); break;
    case Op::JAL:
      s.set(in.rd, pc + 4);
      next = pc + imm;
      break;
    case Op::JALR: {
      const Address t = (a + imm) & ~Address{1};
      s.set(in.rd, pc + 4);
      next = t;
      break;
    }
    case Op::BEQ: branch(a == b); break;
    case Op::BNE: branch(a != b); break;
    case Op::BLT: branch(static_cast<i64>(a) < static_cast<i64>(b)); break;
    case Op::BGE: branch(static_cast<i64>(a) >= static_cast<i64>(b)); break;
    case Op::BLTU: branch(a < b); break;
    case Op::BGEU: branch(a >= b); break;
    case Op::LB: s.set(in.rd, load(s, a + imm, 1, true)); break;
    case Op::LH: s.set(in.rd, load(s, a + imm, 2, true)); break;
    case Op::LW:
    case Op::C_LW:
    case Op::C_LWSP: s.set(in.rd, load(s, a + imm, 4, true)); break;
    case Op::LD:
    case Op::C_LD:
    case Op::C_LDSP: s.set(in.rd, load(s, a + imm, 8, false)); break;
    case Op::LBU: s.set(in.rd, load(s, a + imm, 1, false)); break;
    case Op::LHU: s.set(in.rd, load(s, a + imm, 2, false)); break;
    case Op::LWU: s.set(in.rd, load(s, a + imm, 4, false)); break;
    case Op::SB: store(s, a + imm, 1, b); break;
    case Op::SH: store(s, a + imm, 2, b); break;
    case Op::SW:
    case Op::C_SW:
    case Op::C_SWSP: store(s, a + imm, 4, b); break;
    case Op::SD:
    case Op::C_SD:
    case Op::C_SDSP: store(s, a + imm, 8, b); break;
    case Op::ADDI:
    case Op::C_ADDI:
    case Op::C_ADDI16SP:
    case Op::C_ADDI4SPN: s.set(in.rd, a + imm); break;
    case Op::C_NOP: break;
    case Op::C_LI: s.set(in.rd, imm); break;
    case Op::SLTI: s.set(in.rd, static_cast<i64>(a) < in.imm ? 1 : 0); break;
    case Op::SLTIU: s.set(in.rd, a < imm ? 1 : 0); break;
    case Op::XORI: s.set(in.rd, a ^ imm); break;
    case Op::ORI: s.set(in.rd, a | imm); break;
    case Op::ANDI:
    case Op::C_ANDI: s.set(in.rd, a & imm); break;
    case Op::SLLI:
    case Op::C_SLLI: s.set(in.rd, a << sh(imm)); break;
    case Op::SRLI:
    case Op::C_SRLI: s.set(in.rd, a >> sh(imm)); break;
    case Op::SRAI:
    case Op::C_SRAI: s.set(in.rd, static_cast<u64>(static_cast<i64>(a) >> sh(imm))); break;
    case Op::ADD: s.set(in.rd, a + b); break;
    case Op::C_ADD: s.set(in.rd, a + b); break;
    case Op::C_MV: s.set(in.rd, b); break;
    case Op::SUB:
    case Op::C_SUB: s.set(in.rd, a - b); break;
    case Op::SLL: s.set(in.rd, a << sh(b)); break;
    case Op::SLT: s.set(in.rd, static_cast<i64>(a) < static_cast<i64>(b) ? 1 : 0); break;
    case Op::SLTU: s.set(in.rd, a < b ? 1 : 0); break;
    case Op::XOR:
    case Op::C_XOR: s.set(in.rd, a ^ b); break;
    case Op::SRL: s.set(in.rd, a >> sh(b)); break;
    case Op::SRA: s.set(in.rd, static_cast<u64>(static_cast<i64>(a) >> sh(b))); break;
    case Op::OR:
    case Op::C_OR: s.set(in.rd, a | b); break;
    case Op::AND:
    case Op::C_AND: s.set(in.rd, a & b); break;
    case Op::ADDIW:
    case Op::C_ADDIW: s.set(in.rd, sext32(a + imm)); break;
    case Op::SLLIW: s.set(in.rd, sext32(a << shw(imm))); break;
    case Op::SRLIW: s.set(in.rd, sext32(static_cast<std::uint32_t>(a) >> shw(imm))); break;
    case Op::SRAIW:
      s.set(in.rd, static_cast<u64>(static_cast<i64>(static_cast<std::int32_t>(a) >> shw(imm))));
      break;
    case Op::ADDW:
    case Op::C_ADDW: s.set(in.rd, sext32(a + b)); break;
    case Op::SUBW:
    case Op::C_SUBW: s.set(in.rd, sext32(a - b)); break;
    case Op::SLLW: s.set(in.rd, sext32(a << shw(b))); break;
    case Op::SRLW: s.set(in.rd, sext32(static_cast<std::uint32_t>(a) >> shw(b))); break;
    case Op::SRAW: s.set(in.rd, static_cast<u64>(static_cast<i64>(static_cast<std::int32_t>(a) >> shw(b)))); break;
    case Op::MUL: s.set(in.rd, a * b); break;
    case Op::MULH: s.set(in.rd, mulh(static_cast<i64>(a), static_cast<i64>(b))); break;
    case Op::MULHSU: s.set(in.rd, mulhsu(static_cast<i64>(a), b)); break;
    case Op::MULHU: s.set(in.rd, mulhu(a, b)); break;
    case Op::DIV: s.set(in.rd, div_s(static_cast<i64>(a), static_cast<i64>(b))); break;
    case Op::DIVU: s.set(in.rd, div_u(a, b)); break;
    case Op::REM: s.set(in.rd, rem_s(static_cast<i64>(a), static_cast<i64>(b))); break;
    case Op::REMU: s.set(in.rd, rem_u(a, b)); break;
    case Op::MULW: s.set(in.rd, sext32(a * b)); break;
    case Op::DIVW: s.set(in.rd, divw(a, b)); break;
    case Op::DIVUW: s.set(in.rd, divuw(a, b)); break;
    case Op::REMW: s.set(in.rd, remw(a, b)); break;
    case Op::REMUW: s.set(in.rd, remuw(a, b)); break;
    case Op::C_J: next = pc + imm; break;
    case Op::C_BEQZ: branch(a == 0); break;
    case Op::C_BNEZ: branch(a != 0); break;
    case Op::C_JR: next = a & ~Address{1}; break;
    case Op::C_JALR:
      s.set(Reg::ra, pc + 2);
      next = a & ~Address{1};
      break;
    case Op::FENCE:
    case Op::FENCE_I: break;
    default:
      throw EmulatorFault(Fault::ILLEGAL_INSTRUCTION, pc, isa::to_string(in));
  }
  s.regs[0] = 0;
  s.pc = next;
  ++s.instret;
}

void dispatch_syscall(MachineState& s, const KernelModel& kernel, ExecutionTrace& trace, Via via, Address pc) {
  Event e;
  e.kind = Event::Kind::SYSCALL;
  e.number = s.reg(Reg::a7);
  for (unsigned i = 0; i < 6; ++i) e.args[i] = s.regs[idx(Reg::a0) + i];
  e.via = via;
  e.pc = pc;
  const KernelResult r = kernel.call(e.number, e.args, s);
  e.ret0 = r.ret0;
  e.ret1 = r.ret1;
  s.set(Reg::a0, r.ret0);
  s.set(Reg::a1, r.ret1);
  trace.kernel_cost_total += r.cost_units;
  trace.events.push_back(e);
  if (kernel.is_clone(e.number)) {
    Event c;
    c.kind = Event::Kind::POST_CLONE;
    c.number = e.number;
    c.child = r.ret0;
    c.pc = pc;
    trace.events.push_back(c);
  }
}

void step(MachineState& s, const KernelModel& kernel, Interceptor* runtime, ExecutionTrace& trace) {
  const Address pc = s.pc;
  if (pc & 1) throw EmulatorFault(Fault::MISALIGNED_FETCH, pc, "");
  std::array<std::uint8_t, 4> b{};
  if (!s.memory.read(pc, std::span(b.data(), 2))) throw EmulatorFault(Fault::UNMAPPED_FETCH, pc, "");
  const unsigned width = isa::width_of(static_cast<std::uint16_t>(b[0] | (b[1] << 8)));
  if (width == 4 && !s.memory.read(pc + 2, std::span(b.data() + 2, 2)))
    throw EmulatorFault(Fault::UNMAPPED_FETCH, pc + 2, "");
  const isa::Instruction in = isa::decode(std::span<const std::uint8_t>(b.data(), width), pc);

  if (in.op == Op::ECALL) {
    ++s.instret;
    dispatch_syscall(s, kernel, trace, Via::DIRECT, pc);
    s.pc = pc + 4;
    return;
  }
  if (in.op == Op::EBREAK || in.op == Op::C_EBREAK) {
    if (!runtime) throw EmulatorFault(Fault::UNHANDLED_EBREAK, pc, "no interceptor installed");
    ++s.instret;
    runtime->on_ebreak(s, trace, pc);
    s.regs[0] = 0;
    return;
  }
  execute(s, in);
}

RunResult run(MachineState initial, const KernelModel& kernel, Interceptor* runtime, const RunLimits& limits) {
  RunResult r{std::move(initial), {}};
  const u64 start = r.state.instret;
  while (r.state.pc != limits.halt_address) {
    if (r.state.instret - start >= limits.max_instret)
      throw EmulatorFault(Fault::LIMIT_EXCEEDED, r.state.pc, std::to_string(limits.max_instret) + " instructions");
    step(r.state, kernel, runtime, r.trace);
  }
  r.trace.instret_total = r.state.instret - start;
  return r;
}

MachineState initial_state(Address entry) {
  MachineState s;
  s.pc = entry;
  s.set(Reg::sp, kStackTop);
  s.set(Reg::ra, kHaltAddress);
  s.memory.map(kStackTop - kStackSize, kStackSize);
  return s;
}

}  // namespace rvi::emu
