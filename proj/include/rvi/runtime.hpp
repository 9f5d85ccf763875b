#pragma once

// Host side of the interception protocol: identifies the patch behind an
// entry-point ebreak, restores the patched context, runs the hooks at the
// syscall gate and resumes in the relocated block.

#include <cstdint>
#include <functional>
#include <map>
#include <set>

#include "rvi/codegen.hpp"
#include "rvi/emulator.hpp"

namespace rvi::runtime {

using emu::HookDecision;

struct SyscallContext {
  std::size_t patch_id = 0;
  std::uint64_t number = 0;
  emu::SyscallArgs args{};
};

struct PreHookResult {
  HookDecision decision = HookDecision::PASSTHROUGH;
  std::uint64_t ret0 = 0;
  std::uint64_t ret1 = 0;
};

struct Hooks {
  std::function<PreHookResult(const SyscallContext&)> pre;
  std::function<void(const SyscallContext&, std::uint64_t ret0, std::uint64_t ret1)> post;
  std::function<void(std::uint64_t number, std::uint64_t child)> post_clone;

  static Hooks passthrough();
  /// Bypasses every syscall whose number is in `numbers`, answering (ret0, ret1).
  static Hooks bypass(std::set<std::uint64_t> numbers, std::uint64_t ret0, std::uint64_t ret1 = 0);
  static Hooks bypass_all(std::uint64_t ret0, std::uint64_t ret1 = 0);
};

class InterceptorRuntime final : public emu::Interceptor {
 public:
  InterceptorRuntime(const codegen::PatchArtifacts& artifacts, Hooks hooks, emu::KernelModel kernel);

  void on_ebreak(emu::MachineState& state, emu::ExecutionTrace& trace, Address pc) override;

  /// Checks the bitmap bit of the patch instruction behind every identified key.
  bool check_bitmap = true;

 private:
  void enter(emu::MachineState& state, emu::ExecutionTrace& trace, Address pc);
  void syscall_gate(emu::MachineState& state, emu::ExecutionTrace& trace, const codegen::PatchRecord& p, Address pc);

  const codegen::PatchArtifacts& artifacts_;
  Hooks hooks_;
  emu::KernelModel kernel_;
  std::map<Address, std::size_t> gateway_keys_;
  std::map<Address, std::size_t> middle_keys_;
  std::map<Address, std::size_t> small_keys_;
  std::map<Address, std::size_t> gates_;
};

InterceptorRuntime install_interceptor(const codegen::PatchArtifacts& artifacts, Hooks hooks,
                                       emu::KernelModel kernel);

}  // namespace rvi::runtime
