#include <gtest/gtest.h>

#include "rvi/corpus.hpp"
#include "rvi/runtime.hpp"
#include "rvi/verify.hpp"
#include "support/programs.hpp"

using namespace rvi;
using namespace rvi::testing;
using emu::Event;
using planner::PatchKind;

namespace {

emu::RunResult run_patched(const verify::PatchedProgram& p, Address entry, runtime::Hooks hooks,
                           const emu::KernelModel& kernel = emu::synthetic_kernel(),
                           std::optional<std::array<std::uint64_t, 32>> regs = std::nullopt) {
  auto s = emu::initial_state(entry);
  if (regs) s.regs = *regs;
  verify::map_patched(s, p.patched_text, p.artifacts);
  auto rt = runtime::install_interceptor(p.artifacts, std::move(hooks), kernel);
  return emu::run(std::move(s), kernel, &rt);
}

emu::RunResult run_original(const CodeImage& img, Address entry,
                            const emu::KernelModel& kernel = emu::synthetic_kernel()) {
  auto s = emu::initial_state(entry);
  verify::map_original(s, img);
  return emu::run(std::move(s), kernel);
}

std::size_t count(const emu::ExecutionTrace& t, Event::Kind k) {
  return std::count_if(t.events.begin(), t.events.end(), [&](const Event& e) { return e.kind == k; });
}

// Every INTERCEPTED syscall sits between a HOOK_PRE and a HOOK_POST for the
// same number, and every clone-family syscall is followed by POST_CLONE.
void expect_trace_invariants(const emu::ExecutionTrace& t, const emu::KernelModel& kernel) {
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const auto& e = t.events[i];
    if (e.kind == Event::Kind::SYSCALL && e.via == emu::Via::INTERCEPTED) {
      ASSERT_GT(i, 0u);
      ASSERT_LT(i + 1, t.events.size());
      EXPECT_EQ(t.events[i - 1].kind, Event::Kind::HOOK_PRE);
      EXPECT_EQ(t.events[i - 1].number, e.number);
      EXPECT_EQ(t.events[i + 1].kind, Event::Kind::HOOK_POST);
      EXPECT_EQ(t.events[i + 1].number, e.number);
    }
    if (e.kind == Event::Kind::HOOK_POST && kernel.is_clone(e.number)) {
      ASSERT_LT(i + 1, t.events.size());
      EXPECT_EQ(t.events[i + 1].kind, Event::Kind::POST_CLONE);
      EXPECT_EQ(t.events[i + 1].child, e.ret0);
    }
  }
}

}  // namespace

TEST(Runtime, BypassSetsReturnPair) {
  const auto img = single_site_program(16, 172);
  const auto p = verify::patch_image(img);
  ASSERT_EQ(p.plan.patches.size(), 1u);
  const auto r = run_patched(p, img.base, runtime::Hooks::bypass({172}, 4242, 0));
  EXPECT_EQ(r.state.reg(Reg::a0), 4242u);
  EXPECT_EQ(r.state.reg(Reg::a1), 0u);
  EXPECT_EQ(count(r.trace, Event::Kind::SYSCALL), 0u);
  EXPECT_EQ(r.trace.kernel_cost_total, 0u);
  ASSERT_EQ(count(r.trace, Event::Kind::HOOK_PRE), 1u);
  const auto pre = std::find_if(r.trace.events.begin(), r.trace.events.end(),
                                [](const Event& e) { return e.kind == Event::Kind::HOOK_PRE; });
  EXPECT_EQ(pre->decision, emu::HookDecision::BYPASS);
  EXPECT_EQ(pre->number, 172u);

  const auto pair = run_patched(p, img.base, runtime::Hooks::bypass({172}, 7, 0x1234));
  EXPECT_EQ(pair.state.reg(Reg::a0), 7u);
  EXPECT_EQ(pair.state.reg(Reg::a1), 0x1234u);
}

TEST(Runtime, PassthroughMatchesUnpatchedSequence) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    corpus::CorpusSpec spec;
    spec.seed = seed;
    const auto c = corpus::generate(spec);
    const auto p = verify::patch_image(c.image);
    const auto a = run_original(c.image, c.entry);
    const auto b = run_patched(p, c.entry, runtime::Hooks::passthrough());
    const auto sa = a.trace.syscalls();
    const auto sb = b.trace.syscalls();
    ASSERT_EQ(sa.size(), sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i) {
      EXPECT_EQ(sa[i].number, sb[i].number);
      EXPECT_EQ(sa[i].args, sb[i].args);
      EXPECT_EQ(sa[i].ret0, sb[i].ret0);
      EXPECT_EQ(sa[i].ret1, sb[i].ret1);
      EXPECT_EQ(sa[i].via, emu::Via::DIRECT);
      EXPECT_EQ(sb[i].via, emu::Via::INTERCEPTED);
    }
    expect_trace_invariants(b.trace, emu::synthetic_kernel());
    EXPECT_EQ(count(b.trace, Event::Kind::BREAK), sb.size());
  }
}

TEST(Runtime, PostCloneFiresOnPassthroughAndBypass) {
  for (std::uint64_t number : {220u, 435u}) {
    const auto img = single_site_program(16, number);
    const auto p = verify::patch_image(img);
    std::vector<std::uint64_t> children;
    auto hooks = runtime::Hooks::passthrough();
    hooks.post_clone = [&](std::uint64_t, std::uint64_t child) { children.push_back(child); };
    const auto pass = run_patched(p, img.base, hooks);
    EXPECT_EQ(count(pass.trace, Event::Kind::POST_CLONE), 1u);
    ASSERT_EQ(children.size(), 1u);
    EXPECT_EQ(children[0], pass.state.reg(Reg::a0));
    expect_trace_invariants(pass.trace, emu::synthetic_kernel());

    auto bypass = runtime::Hooks::bypass({number}, 0x77);
    bypass.post_clone = hooks.post_clone;
    const auto by = run_patched(p, img.base, bypass);
    EXPECT_EQ(count(by.trace, Event::Kind::POST_CLONE), 1u);
    ASSERT_EQ(children.size(), 2u);
    EXPECT_EQ(children[1], 0x77u);
  }
}

TEST(Runtime, UnknownKeyIsDispatchFailure) {
  const auto img = single_site_program(16, 172);
  auto p = verify::patch_image(img);
  auto broken = p.artifacts;
  broken.patches[0].key += 64;
  auto s = emu::initial_state(img.base);
  verify::map_patched(s, p.patched_text, broken);
  auto rt = runtime::install_interceptor(broken, runtime::Hooks::passthrough(), emu::synthetic_kernel());
  try {
    emu::run(std::move(s), emu::synthetic_kernel(), &rt);
    FAIL() << "expected a dispatch failure";
  } catch (const emu::EmulatorFault& e) {
    EXPECT_EQ(e.kind(), emu::EmulatorFault::Kind::DISPATCH_FAILURE);
    EXPECT_EQ(e.pc(), p.artifacts.entry_gate);
  }
}

TEST(Runtime, BitmapGuardsDispatch) {
  const auto img = single_site_program(16, 172);
  auto p = verify::patch_image(img);
  auto broken = p.artifacts;
  std::fill(broken.bitmap.bytes.begin(), broken.bitmap.bytes.end(), 0);
  auto s = emu::initial_state(img.base);
  verify::map_patched(s, p.patched_text, broken);
  auto rt = runtime::install_interceptor(broken, runtime::Hooks::passthrough(), emu::synthetic_kernel());
  EXPECT_THROW(emu::run(s, emu::synthetic_kernel(), &rt), emu::EmulatorFault);
  rt.check_bitmap = false;
  EXPECT_NO_THROW(emu::run(s, emu::synthetic_kernel(), &rt));
}

TEST(Runtime, SmallSiteDeliversExtractedNumber) {
  for (bool rvc : {true, false}) {
    const auto f = kind_fixture(PatchKind::SMALL, rvc);
    ASSERT_EQ(f.target().kind, PatchKind::SMALL);
    ASSERT_EQ(f.target().syscall_number, 64u);
    std::vector<std::uint64_t> seen;
    auto kernel = emu::synthetic_kernel();
    const auto inner = kernel.handler;
    kernel.handler = [&](std::uint64_t n, const emu::SyscallArgs& a, const emu::MachineState& st) {
      seen.push_back(st.reg(Reg::a7));
      return inner(n, a, st);
    };
    const auto r = run_patched(f.patched, f.image.base, runtime::Hooks::passthrough(), kernel);
    EXPECT_EQ(seen, (std::vector<std::uint64_t>{172, 64}));
    EXPECT_EQ(r.trace.syscalls().at(1).number, 64u);
  }
}

TEST(Runtime, EveryKindRestoresContextAtRegionEnd) {
  for (bool rvc : {true, false}) {
    for (auto kind : {PatchKind::GATEWAY, PatchKind::MIDDLE, PatchKind::SMALL}) {
      const auto f = kind_fixture(kind, rvc);
      ASSERT_EQ(f.target().kind, kind);
      for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto diff = context_round_trip(f, random_registers(seed));
        ASSERT_FALSE(diff) << planner::kind_name(kind) << " rvc " << rvc << " seed " << seed << ": " << *diff;
      }
    }
  }
}

TEST(Runtime, HookSeesArgumentsAndPostSeesResult) {
  const auto img = single_site_program(16, 64);
  const auto p = verify::patch_image(img);
  auto regs = random_registers(21);
  std::vector<runtime::SyscallContext> pre;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> post;
  runtime::Hooks h;
  h.pre = [&](const runtime::SyscallContext& c) {
    pre.push_back(c);
    return runtime::PreHookResult{};
  };
  h.post = [&](const runtime::SyscallContext&, std::uint64_t r0, std::uint64_t r1) { post.emplace_back(r0, r1); };
  const auto r = run_patched(p, img.base, h, emu::synthetic_kernel(), regs);
  ASSERT_EQ(pre.size(), 1u);
  EXPECT_EQ(pre[0].number, 64u);
  EXPECT_EQ(pre[0].patch_id, 0u);
  for (unsigned i = 0; i < 6; ++i) EXPECT_EQ(pre[0].args[i], regs[idx(Reg::a0) + i]);
  ASSERT_EQ(post.size(), 1u);
  EXPECT_EQ(post[0].first, r.state.reg(Reg::a0));
  EXPECT_EQ(post[0].second, r.state.reg(Reg::a1));
}
