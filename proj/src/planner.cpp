#include "rvi/planner.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "rvi/error.hpp"

namespace rvi::planner {

std::string_view kind_name(PatchKind k) {
  switch (k) {
    case PatchKind::GATEWAY: return "GATEWAY";
    case PatchKind::MIDDLE: return "MIDDLE";
    case PatchKind::SMALL: return "SMALL";
  }
  return "?";
}

std::string_view reason_name(UnpatchableReason r) {
  switch (r) {
    case UnpatchableReason::SMALL_WITHOUT_KNOWN_NUMBER: return "small-without-known-number";
    case UnpatchableReason::NO_REACHABLE_GATEWAY: return "no-reachable-gateway";
    case UnpatchableReason::ENTRY_POINT_OUT_OF_REACH: return "entry-point-out-of-reach";
  }
  return "?";
}

Address default_placement(const CodeImage& image) { return (image.end() + 0xfff) & ~Address{0xfff}; }

Address PlannedPatch::jump_pc() const {
  switch (kind) {
    case PatchKind::GATEWAY:
    case PatchKind::MIDDLE: return region_start + (rvc ? 4 : 8);
    case PatchKind::SMALL: return region_start;
  }
  return region_start;
}

Address PlannedPatch::key() const {
  // GATEWAY: link is written by the jalr that follows the auipc.
  if (kind == PatchKind::GATEWAY) return jump_pc() + 8;
  return jump_pc() + 4;
}

Classification classify(const analysis::PatchWindow& window, const analysis::SyscallNumberFact& fact,
                        const PatchBudget& budget) {
  const auto usable = window.usable_bytes();
  if (usable >= budget.gateway) return PatchKind::GATEWAY;
  if (usable >= budget.middle) return PatchKind::MIDDLE;
  if (usable >= budget.small && fact.value) return PatchKind::SMALL;
  return UnpatchableReason::SMALL_WITHOUT_KNOWN_NUMBER;
}

std::optional<RegionChoice> select_region(const analysis::PatchWindow& window, std::uint64_t patch_length,
                                          bool rvc) {
  std::vector<std::uint64_t> pre_sums{0};
  for (const auto& l : window.pre) pre_sums.push_back(pre_sums.back() + l.insn.width);
  std::vector<std::uint64_t> post_sums{0};
  for (const auto& l : window.post) post_sums.push_back(post_sums.back() + l.insn.width);

  std::optional<RegionChoice> best;
  std::uint64_t best_imbalance = 0;
  std::uint64_t best_pre = 0;
  for (std::size_t i = 0; i < pre_sums.size(); ++i) {
    for (std::size_t j = 0; j < post_sums.size(); ++j) {
      const std::uint64_t p = pre_sums[i];
      const std::uint64_t q = post_sums[j];
      const std::uint64_t len = p + 4 + q;
      if (len < patch_length) continue;
      if (!rvc && (len - patch_length) % 4 != 0) continue;
      const std::uint64_t imbalance = p > q ? p - q : q - p;
      const bool better = !best || len < best->length ||
                          (len == best->length && (imbalance < best_imbalance ||
                                                   (imbalance == best_imbalance && p > best_pre)));
      if (better) {
        best = RegionChoice{i, j, window.site.address - p, len};
        best_imbalance = imbalance;
        best_pre = p;
      }
    }
  }
  return best;
}

namespace {

struct Draft {
  const ClassifiedSite* source;
  PlannedPatch patch;
};

std::optional<PlannedPatch> materialize(const ClassifiedSite& cs, PatchKind kind, const PatchBudget& budget,
                                        bool rvc) {
  const std::uint64_t need = budget.of(kind);
  RegionChoice region;
  if (kind == PatchKind::SMALL) {
    region = {0, 0, cs.window.site.address, 4};
  } else if (auto r = select_region(cs.window, need, rvc)) {
    region = *r;
  } else {
    return std::nullopt;
  }
  PlannedPatch p;
  p.site = cs.window.site;
  p.kind = kind;
  p.rvc = rvc;
  p.region_start = region.start;
  p.region_length = region.length;
  p.patch_length = need;
  p.syscall_number = cs.fact.value;
  p.link_register = kind == PatchKind::GATEWAY ? Reg::t0 : kind == PatchKind::MIDDLE ? Reg::ra : Reg::a7;
  p.relocated_pre.assign(cs.window.pre.begin(), cs.window.pre.begin() + static_cast<std::ptrdiff_t>(region.pre_count));
  std::reverse(p.relocated_pre.begin(), p.relocated_pre.end());
  p.relocated_post.assign(cs.window.post.begin(),
                          cs.window.post.begin() + static_cast<std::ptrdiff_t>(region.post_count));
  return p;
}

}  // namespace

Plan assign_gateways(const std::vector<ClassifiedSite>& sites, const CodeImage& image, const PlannerOptions& options) {
  const PatchBudget budget = PatchBudget::for_mode(options.rvc);
  Plan out;
  out.text_base = image.base;
  out.text_length = image.size();
  out.rvc = options.rvc;
  out.entry_point = options.placement.value_or(default_placement(image));

  std::vector<Draft> drafts;
  std::vector<Unpatchable> rejected;
  auto reject = [&](const ClassifiedSite& cs, UnpatchableReason why) {
    rejected.push_back({cs.window.site, why, cs.window.usable_bytes(), cs.fact.value});
  };

  for (const auto& cs : sites) {
    out.windows.push_back(cs.window);
    if (const auto* why = std::get_if<UnpatchableReason>(&cs.classification)) {
      reject(cs, *why);
      continue;
    }
    // A region that cannot be carved at the classified size (only possible
    // when 2-byte padding is unavailable) falls back to the next kind down.
    std::optional<PlannedPatch> p;
    for (auto kind = std::get<PatchKind>(cs.classification);; kind = static_cast<PatchKind>(static_cast<int>(kind) + 1)) {
      if (kind == PatchKind::SMALL && !cs.fact.value) break;
      if ((p = materialize(cs, kind, budget, options.rvc))) break;
      if (kind == PatchKind::SMALL) break;
    }
    if (!p) {
      reject(cs, UnpatchableReason::SMALL_WITHOUT_KNOWN_NUMBER);
      continue;
    }
    if (p->kind == PatchKind::GATEWAY && !isa::auipc_jalr_in_range(p->jump_pc(), out.entry_point)) {
      reject(cs, UnpatchableReason::ENTRY_POINT_OUT_OF_REACH);
      continue;
    }
    drafts.push_back({&cs, std::move(*p)});
  }

  std::vector<std::size_t> gateway_drafts;
  for (std::size_t i = 0; i < drafts.size(); ++i)
    if (drafts[i].patch.kind == PatchKind::GATEWAY) gateway_drafts.push_back(i);

  std::vector<bool> keep(drafts.size(), true);
  std::map<std::size_t, std::size_t> gateway_of;  // draft -> gateway draft
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    auto& p = drafts[i].patch;
    if (p.kind == PatchKind::GATEWAY) continue;
    const Address from = p.jump_pc();
    std::optional<std::size_t> best;
    std::uint64_t best_dist = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t g : gateway_drafts) {
      const Address target = drafts[g].patch.region_start;
      if (!isa::jal_in_range(from, target)) continue;
      const std::uint64_t dist = target > from ? target - from : from - target;
      // gateway_drafts is address-ordered, so strict < keeps the lower address on ties.
      if (dist < best_dist) {
        best = g;
        best_dist = dist;
      }
    }
    if (!best) {
      keep[i] = false;
      reject(*drafts[i].source, UnpatchableReason::NO_REACHABLE_GATEWAY);
      continue;
    }
    gateway_of[i] = *best;
  }

  std::map<std::size_t, std::size_t> id_of;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    if (!keep[i]) continue;
    id_of[i] = out.patches.size();
    drafts[i].patch.id = out.patches.size();
    out.patches.push_back(drafts[i].patch);
  }
  for (const auto& [draft, gw] : gateway_of) out.patches[id_of.at(draft)].gateway = id_of.at(gw);

  for (std::size_t i = 1; i < out.patches.size(); ++i)
    if (out.patches[i].region_start < out.patches[i - 1].region_end())
      throw InternalError("planner produced overlapping regions");

  std::sort(rejected.begin(), rejected.end(),
            [](const Unpatchable& a, const Unpatchable& b) { return a.site.address < b.site.address; });
  out.unpatchable = std::move(rejected);

  auto& d = out.distribution;
  d.total = sites.size();
  d.unpatchable = out.unpatchable.size();
  for (const auto& p : out.patches) {
    if (p.kind == PatchKind::GATEWAY) ++d.gateway;
    else if (p.kind == PatchKind::MIDDLE) ++d.middle;
    else ++d.small;
  }
  return out;
}

Plan plan(const CodeImage& image, const PlannerOptions& options) {
  const analysis::Listing listing(image);
  const auto targets = analysis::collect_branch_targets(image, listing);
  const PatchBudget budget = PatchBudget::for_mode(options.rvc);

  std::vector<ClassifiedSite> sites;
  Address claimed_until = image.base;
  for (const auto& site : analysis::scan_ecalls(listing)) {
    auto window = analysis::compute_window(listing, site, targets);
    // Neighbouring windows may share instructions between two ecalls; the
    // earlier site keeps whatever its region took.
    while (!window.pre.empty() && window.pre.back().address < claimed_until) window.pre.pop_back();
    if (!window.pre.empty()) window.start = window.pre.back().address;
    else window.start = site.address;

    auto fact = analysis::extract_syscall_number(listing, site, targets);
    auto cls = classify(window, fact, budget);
    if (const auto* kind = std::get_if<PatchKind>(&cls)) {
      if (*kind == PatchKind::SMALL) {
        claimed_until = site.address + 4;
      } else if (auto r = select_region(window, budget.of(*kind), options.rvc)) {
        claimed_until = r->start + r->length;
      } else {
        claimed_until = window.end;
      }
    }
    sites.push_back({std::move(window), std::move(fact), cls});
  }
  return assign_gateways(sites, image, options);
}

}  // namespace rvi::planner
