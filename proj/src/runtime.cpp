#include "rvi/runtime.hpp"

namespace rvi::runtime {

using codegen::PatchKind;
using emu::EmulatorFault;
using emu::Event;
using Fault = EmulatorFault::Kind;

Hooks Hooks::passthrough() {
  return {};
}

Hooks Hooks::bypass(std::set<std::uint64_t> numbers, std::uint64_t ret0, std::uint64_t ret1) {
  Hooks h;
  h.pre = [numbers = std::move(numbers), ret0, ret1](const SyscallContext& c) {
    if (numbers.contains(c.number)) return PreHookResult{HookDecision::BYPASS, ret0, ret1};
    return PreHookResult{};
  };
  return h;
}

Hooks Hooks::bypass_all(std::uint64_t ret0, std::uint64_t ret1) {
  Hooks h;
  h.pre = [ret0, ret1](const SyscallContext&) { return PreHookResult{HookDecision::BYPASS, ret0, ret1}; };
  return h;
}

InterceptorRuntime::InterceptorRuntime(const codegen::PatchArtifacts& artifacts, Hooks hooks, emu::KernelModel kernel)
    : artifacts_(artifacts), hooks_(std::move(hooks)), kernel_(std::move(kernel)) {
  for (const auto& p : artifacts_.patches) {
    auto& keys = p.kind == PatchKind::GATEWAY ? gateway_keys_ : p.kind == PatchKind::MIDDLE ? middle_keys_ : small_keys_;
    keys.emplace(p.key, p.id);
    gates_.emplace(p.gate_address, p.id);
  }
}

InterceptorRuntime install_interceptor(const codegen::PatchArtifacts& artifacts, Hooks hooks, emu::KernelModel kernel) {
  return InterceptorRuntime(artifacts, std::move(hooks), std::move(kernel));
}

void InterceptorRuntime::on_ebreak(emu::MachineState& s, emu::ExecutionTrace& trace, Address pc) {
  if (pc == artifacts_.entry_gate) return enter(s, trace, pc);
  if (const auto it = gates_.find(pc); it != gates_.end())
    return syscall_gate(s, trace, artifacts_.patches[it->second], pc);
  throw EmulatorFault(Fault::UNHANDLED_EBREAK, pc, "ebreak outside the runtime gates");
}

void InterceptorRuntime::enter(emu::MachineState& s, emu::ExecutionTrace& trace, Address pc) {
  // The entry point saved x1 and x3..x31 at frame + 8*i.
  const Address frame = s.reg(Reg::sp);
  auto saved = [&](Reg r) {
    const auto v = s.memory.read_u64(frame + 8 * idx(r));
    if (!v) throw EmulatorFault(Fault::UNMAPPED_ACCESS, pc, "entry frame");
    return *v;
  };
  const std::uint64_t ra = saved(Reg::ra);
  const std::uint64_t a7 = saved(Reg::a7);
  const std::uint64_t t0 = saved(Reg::t0);

  const codegen::PatchRecord* p = nullptr;
  Address key = 0;
  if (auto it = middle_keys_.find(ra); it != middle_keys_.end()) {
    p = &artifacts_.patches[it->second];
    key = ra;
  } else if (auto it2 = small_keys_.find(a7); it2 != small_keys_.end()) {
    p = &artifacts_.patches[it2->second];
    key = a7;
  } else if (auto it3 = gateway_keys_.find(t0); it3 != gateway_keys_.end()) {
    p = &artifacts_.patches[it3->second];
    key = t0;
  }
  if (!p) throw EmulatorFault(Fault::DISPATCH_FAILURE, pc, "no patch for ra/a7/t0 link values");
  if (p->kind != PatchKind::GATEWAY && t0 != p->gateway_key)
    throw EmulatorFault(Fault::DISPATCH_FAILURE, pc, "patch " + std::to_string(p->id) + " arrived via the wrong gateway");
  if (check_bitmap && !codegen::bitmap_test(artifacts_, key - 4))
    throw EmulatorFault(Fault::DISPATCH_FAILURE, pc, "bitmap does not cover the patch jump");

  Event e;
  e.kind = Event::Kind::BREAK;
  e.key = key;
  e.pc = pc;
  trace.events.push_back(e);

  for (unsigned i = 1; i < 32; ++i)
    if (i != idx(Reg::sp)) s.regs[i] = saved(reg(i));

  // Undo the pushes made on the way in: the gateway's t0 slot, then the
  // middle patch's ra slot above it.
  const Address sp_e = frame + codegen::kEntryFrameBytes;
  auto word = [&](Address a) {
    const auto v = s.memory.read_u64(a);
    if (!v) throw EmulatorFault(Fault::UNMAPPED_ACCESS, pc, "patch stack slot");
    return *v;
  };
  s.set(Reg::t0, word(sp_e));
  switch (p->kind) {
    case PatchKind::GATEWAY: s.set(Reg::sp, sp_e + 16); break;
    case PatchKind::MIDDLE:
      s.set(Reg::ra, word(sp_e + 16));
      s.set(Reg::sp, sp_e + 32);
      break;
    case PatchKind::SMALL:
      s.set(Reg::sp, sp_e + 16);
      s.set(Reg::a7, *p->syscall_number);
      break;
  }
  s.pc = p->block_address;
}

void InterceptorRuntime::syscall_gate(emu::MachineState& s, emu::ExecutionTrace& trace, const codegen::PatchRecord& p,
                                      Address pc) {
  SyscallContext c;
  c.patch_id = p.id;
  c.number = s.reg(Reg::a7);
  for (unsigned i = 0; i < 6; ++i) c.args[i] = s.regs[idx(Reg::a0) + i];

  const PreHookResult pre = hooks_.pre ? hooks_.pre(c) : PreHookResult{};
  Event h;
  h.kind = Event::Kind::HOOK_PRE;
  h.number = c.number;
  h.args = c.args;
  h.decision = pre.decision;
  h.pc = pc;
  trace.events.push_back(h);

  std::uint64_t r0 = pre.ret0;
  std::uint64_t r1 = pre.ret1;
  if (pre.decision == HookDecision::PASSTHROUGH) {
    // dispatch_syscall records POST_CLONE itself; keep it after HOOK_POST instead.
    emu::ExecutionTrace local;
    emu::dispatch_syscall(s, kernel_, local, emu::Via::INTERCEPTED, pc);
    trace.kernel_cost_total += local.kernel_cost_total;
    trace.events.push_back(local.events.front());
    r0 = s.reg(Reg::a0);
    r1 = s.reg(Reg::a1);
  } else {
    s.set(Reg::a0, r0);
    s.set(Reg::a1, r1);
  }

  if (hooks_.post) hooks_.post(c, r0, r1);
  Event post;
  post.kind = Event::Kind::HOOK_POST;
  post.number = c.number;
  post.ret0 = r0;
  post.ret1 = r1;
  post.pc = pc;
  trace.events.push_back(post);

  if (kernel_.is_clone(c.number)) {
    if (hooks_.post_clone) hooks_.post_clone(c.number, r0);
    Event pc_ev;
    pc_ev.kind = Event::Kind::POST_CLONE;
    pc_ev.number = c.number;
    pc_ev.child = r0;
    pc_ev.pc = pc;
    trace.events.push_back(pc_ev);
  }
  s.pc = pc + 4;
}

}  // namespace rvi::runtime
