#pragma once

// Patch-kind classification, region selection and gateway assignment.

#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "rvi/analysis.hpp"

namespace rvi::planner {

enum class PatchKind : std::uint8_t { GATEWAY, MIDDLE, SMALL };

enum class UnpatchableReason : std::uint8_t {
  SMALL_WITHOUT_KNOWN_NUMBER,
  NO_REACHABLE_GATEWAY,
  ENTRY_POINT_OUT_OF_REACH,
};

std::string_view kind_name(PatchKind k);
std::string_view reason_name(UnpatchableReason r);

/// Minimum patch lengths per kind. No-RVC mode spells every prologue and
/// epilogue instruction with a 4-byte encoding.
struct PatchBudget {
  std::uint64_t gateway;
  std::uint64_t middle;
  std::uint64_t small;

  static constexpr PatchBudget for_mode(bool rvc) { return rvc ? PatchBudget{16, 12, 4} : PatchBudget{24, 16, 4}; }
  std::uint64_t of(PatchKind k) const {
    return k == PatchKind::GATEWAY ? gateway : k == PatchKind::MIDDLE ? middle : small;
  }
};

struct PlannerOptions {
  bool rvc = true;
  /// Load address of the shared entry point; defaults to the first 4 KiB
  /// boundary at or after the end of the text.
  std::optional<Address> placement;
};

Address default_placement(const CodeImage& image);

struct PlannedPatch {
  std::size_t id = 0;
  analysis::EcallSite site;
  PatchKind kind = PatchKind::GATEWAY;
  Address region_start = 0;
  /// Bytes overwritten. May exceed patch_length; the excess is nop padding.
  std::uint64_t region_length = 0;
  std::uint64_t patch_length = 0;
  std::optional<std::size_t> gateway;
  /// Window instructions displaced by the patch, in original address order.
  std::vector<analysis::Located> relocated_pre;
  std::vector<analysis::Located> relocated_post;
  std::optional<std::uint64_t> syscall_number;
  Reg link_register = Reg::t0;
  bool rvc = true;

  Address region_end() const { return region_start + region_length; }
  /// Address of the jal (MIDDLE/SMALL) or auipc (GATEWAY) that leaves the patch.
  Address jump_pc() const;
  /// Value of the link register on arrival at the entry point; unique per patch.
  Address key() const;
};

struct Unpatchable {
  analysis::EcallSite site;
  UnpatchableReason reason;
  std::uint64_t usable_bytes = 0;
  std::optional<std::uint64_t> syscall_number;
};

struct Distribution {
  std::size_t total = 0;
  std::size_t gateway = 0;
  std::size_t middle = 0;
  std::size_t small = 0;
  std::size_t unpatchable = 0;

  double percent(std::size_t count) const { return total == 0 ? 0.0 : 100.0 * static_cast<double>(count) / total; }
};

struct Plan {
  Address text_base = 0;
  std::uint64_t text_length = 0;
  Address entry_point = 0;
  bool rvc = true;
  std::vector<PlannedPatch> patches;  // ascending site address; id == index
  std::vector<Unpatchable> unpatchable;
  std::vector<analysis::PatchWindow> windows;  // one per scanned site
  Distribution distribution;
};

using Classification = std::variant<PatchKind, UnpatchableReason>;

Classification classify(const analysis::PatchWindow& window, const analysis::SyscallNumberFact& fact,
                        const PatchBudget& budget = PatchBudget::for_mode(true));

struct RegionChoice {
  std::size_t pre_count = 0;
  std::size_t post_count = 0;
  Address start = 0;
  std::uint64_t length = 0;
};

/// Smallest sub-window around the ecall holding `patch_length` bytes.
/// Ties go to the more balanced split, then to the longer pre side.
std::optional<RegionChoice> select_region(const analysis::PatchWindow& window, std::uint64_t patch_length, bool rvc);

struct ClassifiedSite {
  analysis::PatchWindow window;
  analysis::SyscallNumberFact fact;
  Classification classification;
};

Plan assign_gateways(const std::vector<ClassifiedSite>& sites, const CodeImage& image,
                     const PlannerOptions& options = {});

Plan plan(const CodeImage& image, const PlannerOptions& options = {});

}  // namespace rvi::planner
