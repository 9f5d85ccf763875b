#pragma once

// Machine code for patches, the shared entry point, the shared trampoline and
// the relocated-instruction table, plus dispatch metadata and footprint
// accounting.
//
// Runtime blob layout, starting at the placement address:
//   entry point | trampoline | relocated table (64-aligned) | bitmap (64-aligned)

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "rvi/planner.hpp"

namespace rvi::codegen {

using planner::PatchKind;
using planner::PlannedPatch;

inline constexpr std::uint64_t kRelocatedBlockStride = 64;
inline constexpr std::uint64_t kEntryFrameBytes = 256;
/// Bytes per dispatch-map entry (64-bit key, 64-bit patch id).
inline constexpr std::uint64_t kDispatchEntryBytes = 16;

struct Blob {
  Address address = 0;
  std::vector<std::uint8_t> bytes;

  Address end() const { return address + bytes.size(); }
  bool operator==(const Blob&) const = default;
};

/// Everything the interceptor runtime needs to know about one patch.
struct PatchRecord {
  std::size_t id = 0;
  PatchKind kind = PatchKind::GATEWAY;
  Address site = 0;
  Address region_start = 0;
  std::uint64_t region_length = 0;
  std::uint64_t patch_length = 0;
  Address key = 0;
  std::optional<std::size_t> gateway;
  Address gateway_key = 0;
  std::optional<std::uint64_t> syscall_number;
  Reg link_register = Reg::t0;
  Address block_address = 0;
  /// Address of the syscall gate (ebreak) inside the relocated block.
  Address gate_address = 0;
  std::uint32_t relocated_pre_count = 0;
  std::uint32_t relocated_post_count = 0;

  Address region_end() const { return region_start + region_length; }
  bool operator==(const PatchRecord&) const = default;
};

struct FootprintReport {
  std::uint64_t relocated_bytes = 0;
  std::uint64_t trampoline_bytes = 0;
  std::uint64_t bitmap_bytes = 0;
  std::uint64_t dispatch_bytes = 0;
  std::uint64_t entry_point_bytes = 0;
  std::uint64_t total_bytes = 0;
  std::uint64_t per_patch_marginal_bytes = 0;
  std::size_t n_patches = 0;

  bool operator==(const FootprintReport&) const = default;
};

struct PatchArtifacts {
  bool rvc = true;
  Address text_base = 0;
  std::uint64_t text_length = 0;
  std::vector<PatchRecord> patches;
  std::map<std::size_t, std::vector<std::uint8_t>> patch_bytes;
  Blob entry_point;
  /// The ebreak that ends the entry point.
  Address entry_gate = 0;
  Blob trampoline;
  /// Offsets of the `jr t0` and `jr ra` stubs inside the trampoline.
  Address trampoline_t0 = 0;
  Address trampoline_ra = 0;
  Blob relocated_table;
  Blob bitmap;
  std::map<Address, std::size_t> dispatch_map;
  FootprintReport footprint;

  /// [lowest, highest) address covered by the runtime blobs.
  std::pair<Address, Address> runtime_span() const;
  bool operator==(const PatchArtifacts&) const = default;
};

std::vector<std::uint8_t> emit_gateway_patch(const PlannedPatch& p, Address entry_point_addr);
std::vector<std::uint8_t> emit_middle_patch(const PlannedPatch& p, Address gateway_addr);
std::vector<std::uint8_t> emit_small_patch(const PlannedPatch& p, Address gateway_addr);

/// Fills the region tail beyond the patch with c.nop (RVC) or nop.
std::vector<std::uint8_t> pad_to_region(std::vector<std::uint8_t> patch, const PlannedPatch& p);

std::vector<std::uint8_t> emit_entry_point();
std::uint64_t entry_point_size();

/// Builds all artifacts. `placement` overrides the plan's entry-point
/// address; reach is re-checked and PlacementError raised on violation.
PatchArtifacts build_runtime(const planner::Plan& plan, const CodeImage& image,
                             std::optional<Address> placement = std::nullopt);

FootprintReport account_footprint(const PatchArtifacts& artifacts, std::size_t n_patches);

std::uint64_t bitmap_length(std::uint64_t text_length, std::uint64_t alignment = 2);
bool bitmap_test(const PatchArtifacts& artifacts, Address addr);

}  // namespace rvi::codegen
