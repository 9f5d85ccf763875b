#pragma once

// Differential verification (original vs patched under the emulator), the
// cross-architecture footprint model and the three-scenario overhead bench.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rvi/codegen.hpp"
#include "rvi/emulator.hpp"
#include "rvi/runtime.hpp"

namespace rvi::verify {

// ---- placing programs -----------------------------------------------------

/// Patched text plus everything needed to run it.
struct PatchedProgram {
  planner::Plan plan;
  codegen::PatchArtifacts artifacts;
  CodeImage patched_text;
};

PatchedProgram patch_image(const CodeImage& image, const planner::PlannerOptions& options = {});

void map_original(emu::MachineState& state, const CodeImage& text);
void map_patched(emu::MachineState& state, const CodeImage& patched_text, const codegen::PatchArtifacts& artifacts);

// ---- differential run -----------------------------------------------------

enum class Mode : std::uint8_t {
  /// Syscall sequences, registers and memory must all match.
  STRICT,
  /// The reference run sees the hook's answers for bypassed calls; only the
  /// bypassed kernel calls may be missing from the patched run.
  BYPASS,
};

struct Divergence {
  enum class Kind : std::uint8_t {
    FAULT_ORIGINAL,
    FAULT_PATCHED,
    SYSCALL_SEQUENCE,
    NOT_INTERCEPTED,
    REGISTER,
    MEMORY,
  };
  Kind kind;
  std::size_t index = 0;  // event index, register number or byte address
  std::string detail;
};

std::string_view divergence_name(Divergence::Kind k);

struct Verdict {
  bool equivalent = false;
  std::optional<Divergence> first_divergence;
  std::vector<std::string> details;
  std::size_t original_syscalls = 0;
  std::size_t patched_syscalls = 0;
  std::size_t intercepted = 0;
  std::size_t bypassed = 0;
  std::uint64_t original_instret = 0;
  std::uint64_t patched_instret = 0;
};

struct DiffOptions {
  Mode mode = Mode::STRICT;
  bool require_all_intercepted = true;
  emu::RunLimits limits{};
  /// Register file both runs start from (x0, pc ignored). Defaults to
  /// emu::initial_state.
  std::optional<std::array<std::uint64_t, 32>> initial_regs;
  /// Bytes below the final sp that may differ (patch stack traffic).
  std::uint64_t sp_transient_bytes = 512;
};

Verdict differential_run(const CodeImage& original, const CodeImage& patched_text,
                         const codegen::PatchArtifacts& artifacts, Address entry, const emu::KernelModel& kernel,
                         const runtime::Hooks& hooks = runtime::Hooks::passthrough(), const DiffOptions& options = {});

// ---- footprint model ------------------------------------------------------

struct ArchCostModel {
  std::string name;
  std::uint64_t per_patch_template_bytes = 0;
  std::uint64_t per_patch_trampoline_bytes = 0;
  std::uint64_t shared_trampoline_bytes = 0;
  std::uint64_t bitmap_alignment_bytes = 1;
  std::uint64_t relocated_block_bytes = 0;
};

/// RISC-V: 64-byte relocated blocks, one 24-byte trampoline, 2-byte bitmap units.
ArchCostModel riscv_model();
/// x86 reference: 512 B of template and relocated code plus a 128 B absolute
/// jump trampoline per patch, 1-byte bitmap units. Back-solved from the
/// published aggregates at 2048 patches over 1 MiB of text.
ArchCostModel x86_reference_model();

inline constexpr std::size_t kCalibrationPatchCount = 2048;
inline constexpr std::uint64_t kCalibrationTextLength = 1u << 20;

struct ModelBreakdown {
  std::uint64_t relocated_bytes = 0;
  std::uint64_t template_bytes = 0;
  std::uint64_t trampoline_bytes = 0;
  std::uint64_t bitmap_bytes = 0;
  std::uint64_t total_bytes = 0;
};

ModelBreakdown model_footprint(const ArchCostModel& model, std::size_t n_patches, std::uint64_t text_length);

struct FootprintComparison {
  std::size_t n_patches = 0;
  std::uint64_t text_length = 0;
  ModelBreakdown riscv;
  ModelBreakdown x86;
  double ratio = 0.0;  // riscv / x86
  std::vector<std::size_t> fit_points;
  double riscv_slope = 0.0;
  double x86_slope = 0.0;
  double slope_ratio = 0.0;  // x86 / riscv
};

FootprintComparison footprint_compare(std::size_t n_patches, std::uint64_t text_length,
                                      const ArchCostModel& riscv = riscv_model(),
                                      const ArchCostModel& x86 = x86_reference_model(),
                                      std::vector<std::size_t> fit_points = {100, 200, 400, 800});

/// Least-squares slope of y over x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

// ---- overhead bench -------------------------------------------------------

enum class Scenario : std::uint8_t { NORMAL, INTERCEPT_BYPASS, INTERCEPT_KERNEL };
std::string_view scenario_name(Scenario s);

struct BenchReport {
  Scenario scenario = Scenario::NORMAL;
  std::uint64_t instret = 0;
  std::uint64_t kernel_cost = 0;
  std::uint64_t total_cost = 0;
  double overhead_vs_normal = 0.0;  // percent
  std::uint64_t syscalls = 0;
};

struct BenchConfig {
  std::uint64_t iterations = 1000;
  std::uint64_t cost_units = emu::kDefaultCostUnits;
  planner::PatchKind site_kind = planner::PatchKind::GATEWAY;
  bool rvc = true;
  std::uint64_t syscall_number = 172;
  std::uint64_t bypass_ret0 = 1000;
};

struct BenchResult {
  BenchConfig config;
  std::array<BenchReport, 3> reports;
  /// Extra instructions per intercepted call, (patched - normal) / iterations.
  double per_interception_instret = 0.0;
};

/// Loop of `iterations` identical syscalls from one site of the requested
/// kind (a never-executed gateway follows the loop for MIDDLE/SMALL sites).
CodeImage bench_program(planner::PatchKind kind, bool rvc, std::uint64_t syscall_number, Address base = 0x10000);

BenchResult bench(const BenchConfig& config);

}  // namespace rvi::verify
