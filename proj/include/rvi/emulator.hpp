#pragma once

// Deterministic RV64IMC interpreter. ecall traps into a KernelModel, ebreak
// into an optional Interceptor; execution stops when pc reaches the halt
// sentinel.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rvi/error.hpp"
#include "rvi/isa.hpp"

namespace rvi::emu {

/// Programs finish by jumping here (the initial ra of every harness run).
inline constexpr Address kHaltAddress = 0xdead0000;
inline constexpr Address kStackTop = 0x7ff00000;
inline constexpr std::uint64_t kStackSize = 64 * 1024;
inline constexpr std::uint64_t kDefaultCostUnits = 2000;

class Memory {
 public:
  static constexpr std::uint64_t kPageSize = 4096;

  void map(Address addr, std::uint64_t len);
  /// Maps and copies `bytes` at `addr`.
  void load(Address addr, std::span<const std::uint8_t> bytes);
  bool is_mapped(Address addr, std::uint64_t len = 1) const;

  /// Return false when any byte is unmapped.
  bool read(Address addr, std::span<std::uint8_t> out) const;
  bool write(Address addr, std::span<const std::uint8_t> in);

  std::optional<std::uint64_t> read_u64(Address addr) const;
  bool write_u64(Address addr, std::uint64_t v);

  using Page = std::array<std::uint8_t, kPageSize>;
  const std::map<Address, std::unique_ptr<Page>>& pages() const { return pages_; }

  Memory() = default;
  Memory(const Memory& other);
  Memory& operator=(const Memory& other);
  Memory(Memory&&) noexcept = default;
  Memory& operator=(Memory&&) noexcept = default;

 private:
  const Page* page(Address addr) const;
  Page* page(Address addr);
  std::map<Address, std::unique_ptr<Page>> pages_;
};

struct MachineState {
  std::array<std::uint64_t, 32> regs{};
  Address pc = 0;
  Memory memory;
  std::uint64_t instret = 0;

  std::uint64_t reg(Reg r) const { return regs[idx(r)]; }
  void set(Reg r, std::uint64_t v) {
    if (r != Reg::zero) regs[idx(r)] = v;
  }
};

struct KernelResult {
  std::uint64_t ret0 = 0;
  std::uint64_t ret1 = 0;
  std::uint64_t cost_units = 0;
};

using SyscallArgs = std::array<std::uint64_t, 6>;

struct KernelModel {
  std::function<KernelResult(std::uint64_t number, const SyscallArgs& args, const MachineState& state)> handler;
  std::set<std::uint64_t> clone_numbers{220, 435};

  bool is_clone(std::uint64_t number) const { return clone_numbers.contains(number); }
  KernelResult call(std::uint64_t number, const SyscallArgs& args, const MachineState& state) const {
    return handler(number, args, state);
  }
};

/// Deterministic stand-in kernel: getpid returns 1000, clone-family calls
/// return a child id derived from their arguments, everything else a mix of
/// number and arguments. Every call costs `cost_units`.
KernelModel synthetic_kernel(std::uint64_t cost_units = kDefaultCostUnits);

enum class Via : std::uint8_t { DIRECT, INTERCEPTED };
enum class HookDecision : std::uint8_t { PASSTHROUGH, BYPASS };

struct Event {
  enum class Kind : std::uint8_t { SYSCALL, HOOK_PRE, HOOK_POST, POST_CLONE, BREAK };
  Kind kind = Kind::SYSCALL;
  std::uint64_t number = 0;
  SyscallArgs args{};
  std::uint64_t ret0 = 0;
  std::uint64_t ret1 = 0;
  Via via = Via::DIRECT;
  HookDecision decision = HookDecision::PASSTHROUGH;
  std::uint64_t child = 0;
  Address key = 0;
  Address pc = 0;

  bool operator==(const Event&) const = default;
};

std::string_view event_kind_name(Event::Kind k);

struct ExecutionTrace {
  std::vector<Event> events;
  std::uint64_t instret_total = 0;
  std::uint64_t kernel_cost_total = 0;

  std::vector<Event> syscalls() const;
  bool operator==(const ExecutionTrace&) const = default;
};

class EmulatorFault : public Error {
 public:
  enum class Kind : std::uint8_t {
    ILLEGAL_INSTRUCTION,
    MISALIGNED_ACCESS,
    MISALIGNED_FETCH,
    UNMAPPED_FETCH,
    UNMAPPED_ACCESS,
    LIMIT_EXCEEDED,
    DISPATCH_FAILURE,
    UNHANDLED_EBREAK,
  };
  EmulatorFault(Kind kind, Address pc, const std::string& what);
  Kind kind() const { return kind_; }
  Address pc() const { return pc_; }

 private:
  Kind kind_;
  Address pc_;
};

std::string_view fault_name(EmulatorFault::Kind k);

/// Host-side handler for ebreak; `pc` is the ebreak's address. It must leave
/// state.pc at the continuation.
class Interceptor {
 public:
  virtual ~Interceptor() = default;
  virtual void on_ebreak(MachineState& state, ExecutionTrace& trace, Address pc) = 0;
};

struct RunLimits {
  std::uint64_t max_instret = 10'000'000;
  Address halt_address = kHaltAddress;
};

struct RunResult {
  MachineState state;
  ExecutionTrace trace;
};

/// Executes one instruction at state.pc. ecall and ebreak are handled here.
void step(MachineState& state, const KernelModel& kernel, Interceptor* runtime, ExecutionTrace& trace);

/// Applies `insn`'s architectural effect; ecall/ebreak are not accepted.
void execute(MachineState& state, const isa::Instruction& insn);

RunResult run(MachineState initial, const KernelModel& kernel, Interceptor* runtime = nullptr,
              const RunLimits& limits = {});

/// Registers zeroed except sp = kStackTop and ra = kHaltAddress; stack mapped.
MachineState initial_state(Address entry);

/// Performs a syscall against the kernel with the state's a7/a0..a5, writes
/// (a0, a1) and records SYSCALL plus POST_CLONE where applicable.
void dispatch_syscall(MachineState& state, const KernelModel& kernel, ExecutionTrace& trace, Via via, Address pc);

}  // namespace rvi::emu
