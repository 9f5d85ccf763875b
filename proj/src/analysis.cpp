#include "rvi/analysis.hpp"

#include "rvi/error.hpp"

namespace rvi::analysis {

Listing::Listing(const CodeImage& image) {
  Address pc = image.base;
  while (pc < image.end()) {
    isa::Instruction insn;
    try {
      insn = isa::decode(image.from(pc), pc);
    } catch (const TruncatedCode&) {
      insn = isa::decode_word(0);  // 2-byte UNKNOWN placeholder
      insn.raw = image.bytes[pc - image.base] | (image.bytes[pc - image.base + 1] << 8);
    }
    index_.emplace(pc, insns_.size());
    insns_.push_back({pc, insn});
    pc += insn.width;
  }
}

std::optional<std::size_t> Listing::index_of(Address addr) const {
  const auto it = index_.find(addr);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

AddressSet collect_branch_targets(const CodeImage& image, const Listing& listing) {
  AddressSet targets{image.base};
  for (const auto& l : listing.instructions()) {
    if (auto t = isa::direct_target(l.insn, l.address); t && image.contains(*t)) targets.insert(*t);
  }
  return targets;
}

AddressSet collect_branch_targets(const CodeImage& image) { return collect_branch_targets(image, Listing(image)); }

std::vector<EcallSite> scan_ecalls(const Listing& listing) {
  std::vector<EcallSite> sites;
  for (const auto& l : listing.instructions())
    if (l.insn.op == isa::Op::ECALL) sites.push_back({l.address, sites.size()});
  return sites;
}

std::vector<EcallSite> scan_ecalls(const CodeImage& image) { return scan_ecalls(Listing(image)); }

PatchWindow compute_window(const Listing& listing, const EcallSite& site, const AddressSet& targets) {
  const auto at = listing.index_of(site.address);
  if (!at || listing[*at].insn.op != isa::Op::ECALL)
    throw InternalError("compute_window: no ecall decoded at " + std::to_string(site.address));

  std::size_t lo = *at;
  std::size_t hi = *at;
  auto can_grow_pre = [&] {
    return lo > 0 && isa::is_relocatable(listing[lo - 1].insn) && !targets.contains(listing[lo].address);
  };
  auto can_grow_post = [&] {
    return hi + 1 < listing.size() && isa::is_relocatable(listing[hi + 1].insn) &&
           !targets.contains(listing[hi + 1].address);
  };

  PatchWindow w;
  w.site = site;
  bool pre_turn = true;
  for (;;) {
    const bool pre_ok = can_grow_pre();
    const bool post_ok = can_grow_post();
    if (!pre_ok && !post_ok) break;
    if ((pre_turn && pre_ok) || !post_ok) {
      --lo;
      w.pre.push_back(listing[lo]);
    } else {
      ++hi;
      w.post.push_back(listing[hi]);
    }
    pre_turn = !pre_turn;
  }
  w.start = listing[lo].address;
  w.end = listing[hi].end();
  return w;
}

PatchWindow compute_window(const CodeImage& image, const EcallSite& site, const AddressSet& targets) {
  return compute_window(Listing(image), site, targets);
}

SyscallNumberFact extract_syscall_number(const Listing& listing, const EcallSite& site, const AddressSet& targets) {
  SyscallNumberFact fact{site, std::nullopt, std::nullopt};
  const auto at = listing.index_of(site.address);
  if (!at) return fact;
  for (std::size_t j = *at; j-- > 0;) {
    if (targets.contains(listing[j + 1].address)) break;
    const auto& l = listing[j];
    if (isa::is_control_flow(l.insn) || l.insn.opclass == isa::OpClass::UNKNOWN) break;
    if (isa::written_register(l.insn) == Reg::a7) {
      fact.value = isa::extract_register_setter_immediate(l.insn, Reg::a7);
      if (fact.value) fact.setter_address = l.address;
      break;
    }
  }
  return fact;
}

SyscallNumberFact extract_syscall_number(const CodeImage& image, const EcallSite& site) {
  const Listing listing(image);
  return extract_syscall_number(listing, site, collect_branch_targets(image, listing));
}

}  // namespace rvi::analysis
