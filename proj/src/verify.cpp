#include "rvi/verify.hpp"

#include <algorithm>
#include <sstream>

#include "rvi/error.hpp"

namespace rvi::verify {

using emu::Event;
using isa::Op;

PatchedProgram patch_image(const CodeImage& image, const planner::PlannerOptions& options) {
  PatchedProgram out;
  out.plan = planner::plan(image, options);
  out.artifacts = codegen::build_runtime(out.plan, image);
  out.patched_text = image;
  out.patched_text.bytes = write_patched_image(image, out.artifacts);
  return out;
}

void map_original(emu::MachineState& s, const CodeImage& text) { s.memory.load(text.base, text.bytes); }

void map_patched(emu::MachineState& s, const CodeImage& patched_text, const codegen::PatchArtifacts& a) {
  s.memory.load(patched_text.base, patched_text.bytes);
  for (const auto* blob : {&a.entry_point, &a.trampoline, &a.relocated_table, &a.bitmap})
    if (!blob->bytes.empty()) s.memory.load(blob->address, blob->bytes);
}

std::string_view divergence_name(Divergence::Kind k) {
  switch (k) {
    case Divergence::Kind::FAULT_ORIGINAL: return "fault-original";
    case Divergence::Kind::FAULT_PATCHED: return "fault-patched";
    case Divergence::Kind::SYSCALL_SEQUENCE: return "syscall-sequence";
    case Divergence::Kind::NOT_INTERCEPTED: return "not-intercepted";
    case Divergence::Kind::REGISTER: return "register";
    case Divergence::Kind::MEMORY: return "memory";
  }
  return "?";
}

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

// One syscall as the program observed it, whichever path served it.
struct Observed {
  std::uint64_t number = 0;
  emu::SyscallArgs args{};
  std::uint64_t ret0 = 0;
  std::uint64_t ret1 = 0;
  bool intercepted = false;
  bool bypassed = false;
  std::size_t event_index = 0;

  bool same_call(const Observed& o) const {
    return number == o.number && args == o.args && ret0 == o.ret0 && ret1 == o.ret1;
  }
};

std::vector<Observed> observed_syscalls(const emu::ExecutionTrace& t) {
  std::vector<Observed> out;
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const auto& e = t.events[i];
    if (e.kind == Event::Kind::SYSCALL) {
      out.push_back({e.number, e.args, e.ret0, e.ret1, e.via == emu::Via::INTERCEPTED, false, i});
    } else if (e.kind == Event::Kind::HOOK_PRE && e.decision == emu::HookDecision::BYPASS) {
      Observed o{e.number, e.args, 0, 0, true, true, i};
      for (std::size_t j = i + 1; j < t.events.size(); ++j) {
        if (t.events[j].kind == Event::Kind::HOOK_POST) {
          o.ret0 = t.events[j].ret0;
          o.ret1 = t.events[j].ret1;
          break;
        }
      }
      out.push_back(o);
    }
  }
  return out;
}

std::string describe(const Observed& o) {
  std::ostringstream os;
  os << "syscall " << o.number << " args(" << hex(o.args[0]) << ", " << hex(o.args[1]) << ", ...) -> (" << hex(o.ret0)
     << ", " << hex(o.ret1) << ")" << (o.bypassed ? " [bypassed]" : "");
  return os.str();
}

struct Range {
  Address lo;
  Address hi;
};

bool excluded(Address a, const std::vector<Range>& ranges) {
  for (const auto& r : ranges)
    if (a >= r.lo && a < r.hi) return true;
  return false;
}

void diverge(Verdict& v, Divergence::Kind kind, std::size_t index, std::string detail) {
  v.details.push_back(std::string(divergence_name(kind)) + ": " + detail);
  if (!v.first_divergence) v.first_divergence = Divergence{kind, index, std::move(detail)};
}

}  // namespace

Verdict differential_run(const CodeImage& original, const CodeImage& patched_text,
                         const codegen::PatchArtifacts& artifacts, Address entry, const emu::KernelModel& kernel,
                         const runtime::Hooks& hooks, const DiffOptions& options) {
  Verdict v;

  auto prepare = [&] {
    emu::MachineState s = emu::initial_state(entry);
    if (options.initial_regs) {
      s.regs = *options.initial_regs;
      s.regs[0] = 0;
    }
    return s;
  };

  // The reference kernel answers bypassed calls the way the hook would.
  emu::KernelModel reference_kernel = kernel;
  if (options.mode == Mode::BYPASS && hooks.pre) {
    reference_kernel.handler = [&kernel, &hooks](std::uint64_t number, const emu::SyscallArgs& args,
                                                 const emu::MachineState& st) {
      runtime::SyscallContext c;
      c.number = number;
      c.args = args;
      const auto pre = hooks.pre(c);
      if (pre.decision == emu::HookDecision::BYPASS) return emu::KernelResult{pre.ret0, pre.ret1, 0};
      return kernel.call(number, args, st);
    };
  }

  std::optional<emu::RunResult> ref;
  std::optional<emu::RunResult> pat;
  try {
    auto s = prepare();
    map_original(s, original);
    ref = emu::run(std::move(s), reference_kernel, nullptr, options.limits);
  } catch (const emu::EmulatorFault& f) {
    diverge(v, Divergence::Kind::FAULT_ORIGINAL, 0, f.what());
  }
  auto interceptor = runtime::install_interceptor(artifacts, hooks, kernel);
  try {
    auto s = prepare();
    map_patched(s, patched_text, artifacts);
    pat = emu::run(std::move(s), kernel, &interceptor, options.limits);
  } catch (const emu::EmulatorFault& f) {
    diverge(v, Divergence::Kind::FAULT_PATCHED, 0, f.what());
  }
  if (!ref || !pat) return v;

  v.original_instret = ref->trace.instret_total;
  v.patched_instret = pat->trace.instret_total;

  const auto a = observed_syscalls(ref->trace);
  const auto b = observed_syscalls(pat->trace);
  v.original_syscalls = a.size();
  v.patched_syscalls = b.size();
  for (const auto& o : b) {
    v.intercepted += o.intercepted;
    v.bypassed += o.bypassed;
  }

  // (a) syscall sequences
  const std::size_t common = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < common; ++i) {
    const bool bypass_is_divergence = options.mode == Mode::STRICT && b[i].bypassed;
    if (!a[i].same_call(b[i]) || bypass_is_divergence) {
      diverge(v, Divergence::Kind::SYSCALL_SEQUENCE, i,
              "call " + std::to_string(i) + ": original " + describe(a[i]) + ", patched " + describe(b[i]));
      break;
    }
  }
  if (a.size() != b.size())
    diverge(v, Divergence::Kind::SYSCALL_SEQUENCE, common,
            "original made " + std::to_string(a.size()) + " calls, patched " + std::to_string(b.size()));
  if (options.require_all_intercepted) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!b[i].intercepted) {
        diverge(v, Divergence::Kind::NOT_INTERCEPTED, i,
                "call " + std::to_string(i) + " (" + std::to_string(b[i].number) + ") reached the kernel directly");
        break;
      }
    }
  }

  // (b) registers
  for (unsigned r = 1; r < 32; ++r) {
    if (ref->state.regs[r] != pat->state.regs[r]) {
      diverge(v, Divergence::Kind::REGISTER, r,
              std::string(reg_name(reg(r))) + ": original " + hex(ref->state.regs[r]) + ", patched " +
                  hex(pat->state.regs[r]));
    }
  }

  // (c) memory outside text, runtime blobs and the transient stack area
  const Address sp = pat->state.reg(Reg::sp);
  const auto [rt_lo, rt_hi] = artifacts.runtime_span();
  const std::vector<Range> skip = {{original.base, original.end()},
                                   {rt_lo, rt_hi},
                                   {sp - options.sp_transient_bytes, sp}};
  // Programs cannot map memory (stores to unmapped addresses fault), so only
  // pages present in both runs carry comparable program-visible state.
  std::size_t memory_diffs = 0;
  const auto& pp = pat->state.memory.pages();
  for (const auto& [page, rpage] : ref->state.memory.pages()) {
    const auto pi = pp.find(page);
    if (pi == pp.end()) continue;
    for (Address off = 0; off < emu::Memory::kPageSize; ++off) {
      const Address addr = page + off;
      if (excluded(addr, skip)) continue;
      const int x = (*rpage)[off];
      const int y = (*pi->second)[off];
      if (x != y) {
        if (memory_diffs++ == 0)
          diverge(v, Divergence::Kind::MEMORY, static_cast<std::size_t>(addr),
                  "byte " + hex(addr) + ": original " + hex(x) + ", patched " + hex(y));
      }
    }
  }
  if (memory_diffs > 1) v.details.push_back(std::to_string(memory_diffs) + " differing memory bytes in total");

  v.equivalent = !v.first_divergence;
  return v;
}

// ---- footprint ------------------------------------------------------------

ArchCostModel riscv_model() { return {"riscv", 0, 0, 24, 2, codegen::kRelocatedBlockStride}; }

ArchCostModel x86_reference_model() {
  // 1 MiB / 2048 = 512 B of template + relocated code, 256 KiB / 2048 = 128 B of trampoline.
  return {"x86-reference", 512, 128, 0, 1, 0};
}

ModelBreakdown model_footprint(const ArchCostModel& m, std::size_t n, std::uint64_t text_length) {
  ModelBreakdown b;
  b.relocated_bytes = m.relocated_block_bytes * n;
  b.template_bytes = m.per_patch_template_bytes * n;
  b.trampoline_bytes = m.per_patch_trampoline_bytes * n + m.shared_trampoline_bytes;
  b.bitmap_bytes = codegen::bitmap_length(text_length, m.bitmap_alignment_bytes);
  b.total_bytes = b.relocated_bytes + b.template_bytes + b.trampoline_bytes + b.bitmap_bytes;
  return b;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

FootprintComparison footprint_compare(std::size_t n, std::uint64_t text_length, const ArchCostModel& riscv,
                                      const ArchCostModel& x86, std::vector<std::size_t> fit_points) {
  FootprintComparison c;
  c.n_patches = n;
  c.text_length = text_length;
  c.riscv = model_footprint(riscv, n, text_length);
  c.x86 = model_footprint(x86, n, text_length);
  c.ratio = c.x86.total_bytes == 0 ? 0.0 : static_cast<double>(c.riscv.total_bytes) / c.x86.total_bytes;
  c.fit_points = std::move(fit_points);
  std::vector<double> xs, yr, yx;
  for (auto k : c.fit_points) {
    xs.push_back(static_cast<double>(k));
    yr.push_back(static_cast<double>(model_footprint(riscv, k, text_length).total_bytes));
    yx.push_back(static_cast<double>(model_footprint(x86, k, text_length).total_bytes));
  }
  c.riscv_slope = fit_slope(xs, yr);
  c.x86_slope = fit_slope(xs, yx);
  c.slope_ratio = c.riscv_slope == 0.0 ? 0.0 : c.x86_slope / c.riscv_slope;
  return c;
}

// ---- bench ----------------------------------------------------------------

std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::NORMAL: return "NORMAL";
    case Scenario::INTERCEPT_BYPASS: return "INTERCEPT_BYPASS";
    case Scenario::INTERCEPT_KERNEL: return "INTERCEPT_KERNEL";
  }
  return "?";
}

namespace {

void put(std::vector<std::uint8_t>& out, Op op, Reg rd = Reg::zero, Reg rs1 = Reg::zero, Reg rs2 = Reg::zero,
         std::int64_t imm = 0) {
  isa::append(out, isa::make(op, rd, rs1, rs2, imm));
}

void put_fillers(std::vector<std::uint8_t>& out, std::uint64_t count) {
  static constexpr Reg kRegs[] = {Reg::t1, Reg::t2, Reg::t3, Reg::t4, Reg::t5};
  for (std::uint64_t i = 0; i < count; ++i) put(out, Op::ADDI, kRegs[i % 5], kRegs[i % 5], Reg::zero, 1);
}

}  // namespace

CodeImage bench_program(planner::PatchKind kind, bool rvc, std::uint64_t number, Address base) {
  const auto budget = planner::PatchBudget::for_mode(rvc);
  const auto n = static_cast<std::int64_t>(number);
  std::vector<std::uint8_t> code;
  // loop: if (s0 == 0) goto done; <site>; s0 -= 1; if (s0 != 0) goto loop; done: ret
  std::vector<std::uint8_t> body;
  switch (kind) {
    case planner::PatchKind::GATEWAY:
      put(body, Op::ADDI, Reg::a7, Reg::zero, Reg::zero, n);
      put_fillers(body, (budget.gateway - 12) / 4);
      put(body, Op::ECALL);
      put(body, Op::ADDI, Reg::s0, Reg::s0, Reg::zero, -1);
      break;
    case planner::PatchKind::MIDDLE:
      put(body, Op::ADDI, Reg::a7, Reg::zero, Reg::zero, n);
      put_fillers(body, (budget.middle - 12) / 4);
      put(body, Op::ECALL);
      put(body, Op::ADDI, Reg::s0, Reg::s0, Reg::zero, -1);
      break;
    case planner::PatchKind::SMALL:
      put(body, Op::ADDI, Reg::s0, Reg::s0, Reg::zero, -1);
      put(body, Op::FENCE, Reg::zero, Reg::zero, Reg::zero, 0x0ff);
      put(body, Op::ADDI, Reg::a7, Reg::zero, Reg::zero, n);
      put(body, Op::ECALL);
      break;
  }
  const std::int64_t guard_width = rvc ? 2 : 4;
  const std::int64_t back_width = rvc ? 2 : 4;
  const auto body_len = static_cast<std::int64_t>(body.size());
  if (rvc) put(code, Op::C_BEQZ, Reg::zero, Reg::s0, Reg::zero, guard_width + body_len + back_width);
  else put(code, Op::BEQ, Reg::zero, Reg::s0, Reg::zero, guard_width + body_len + back_width);
  code.insert(code.end(), body.begin(), body.end());
  if (rvc) put(code, Op::C_BNEZ, Reg::zero, Reg::s0, Reg::zero, -(guard_width + body_len));
  else put(code, Op::BNE, Reg::zero, Reg::s0, Reg::zero, -(guard_width + body_len));
  put(code, Op::JALR, Reg::zero, Reg::ra);
  if (kind != planner::PatchKind::GATEWAY) {
    // Never executed; exists so the loop site has a gateway to jump to.
    put(code, Op::FENCE, Reg::zero, Reg::zero, Reg::zero, 0x0ff);
    put(code, Op::ADDI, Reg::a7, Reg::zero, Reg::zero, n);
    put_fillers(code, (budget.gateway - 8) / 4);
    put(code, Op::ECALL);
    put(code, Op::FENCE, Reg::zero, Reg::zero, Reg::zero, 0x0ff);
    put(code, Op::JALR, Reg::zero, Reg::ra);
  }
  return load_raw(std::move(code), base);
}

BenchResult bench(const BenchConfig& cfg) {
  BenchResult out;
  out.config = cfg;
  const CodeImage image = bench_program(cfg.site_kind, cfg.rvc, cfg.syscall_number);
  planner::PlannerOptions opts;
  opts.rvc = cfg.rvc;
  const PatchedProgram patched = patch_image(image, opts);
  if (!patched.plan.unpatchable.empty() || patched.plan.patches.empty() ||
      patched.plan.patches.front().kind != cfg.site_kind)
    throw InternalError("bench program did not plan as a single " + std::string(planner::kind_name(cfg.site_kind)) +
                        " loop site");

  const auto kernel = emu::synthetic_kernel(cfg.cost_units);
  emu::RunLimits limits;
  limits.max_instret = 1000 + cfg.iterations * 1000;
  auto start = [&] {
    auto s = emu::initial_state(image.base);
    s.set(Reg::s0, cfg.iterations);
    return s;
  };
  auto report = [](Scenario sc, const emu::RunResult& r) {
    BenchReport b;
    b.scenario = sc;
    b.instret = r.trace.instret_total;
    b.kernel_cost = r.trace.kernel_cost_total;
    b.total_cost = b.instret + b.kernel_cost;
    for (const auto& e : r.trace.events)
      if (e.kind == Event::Kind::SYSCALL || (e.kind == Event::Kind::HOOK_PRE && e.decision == emu::HookDecision::BYPASS))
        ++b.syscalls;
    return b;
  };

  {
    auto s = start();
    map_original(s, image);
    out.reports[0] = report(Scenario::NORMAL, emu::run(std::move(s), kernel, nullptr, limits));
  }
  const runtime::Hooks hook_sets[2] = {runtime::Hooks::bypass_all(cfg.bypass_ret0), runtime::Hooks::passthrough()};
  const Scenario scenarios[2] = {Scenario::INTERCEPT_BYPASS, Scenario::INTERCEPT_KERNEL};
  for (int i = 0; i < 2; ++i) {
    auto interceptor = runtime::install_interceptor(patched.artifacts, hook_sets[i], kernel);
    auto s = start();
    map_patched(s, patched.patched_text, patched.artifacts);
    out.reports[1 + i] = report(scenarios[i], emu::run(std::move(s), kernel, &interceptor, limits));
  }
  const double base_total = static_cast<double>(out.reports[0].total_cost);
  for (auto& r : out.reports)
    r.overhead_vs_normal = base_total == 0 ? 0.0 : 100.0 * (static_cast<double>(r.total_cost) - base_total) / base_total;
  if (cfg.iterations > 0)
    out.per_interception_instret =
        (static_cast<double>(out.reports[2].instret) - static_cast<double>(out.reports[0].instret)) /
        static_cast<double>(cfg.iterations);
  return out;
}

}  // namespace rvi::verify
