#pragma once

// Linear-sweep analysis of a code image: ecall discovery, relocatable patch
// windows and static syscall-number extraction.

#include <cstdint>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "rvi/image.hpp"
#include "rvi/isa.hpp"

namespace rvi::analysis {

struct Located {
  Address address;
  isa::Instruction insn;

  Address end() const { return address + insn.width; }
};

/// Linear-sweep decoding from the image base. A trailing half of a 4-byte
/// encoding is kept as a 2-byte UNKNOWN.
class Listing {
 public:
  explicit Listing(const CodeImage& image);

  const std::vector<Located>& instructions() const { return insns_; }
  std::optional<std::size_t> index_of(Address addr) const;
  const Located& operator[](std::size_t i) const { return insns_[i]; }
  std::size_t size() const { return insns_.size(); }

 private:
  std::vector<Located> insns_;
  std::unordered_map<Address, std::size_t> index_;
};

using AddressSet = std::set<Address>;

struct EcallSite {
  Address address = 0;
  std::size_t index = 0;

  bool operator==(const EcallSite&) const = default;
};

struct PatchWindow {
  EcallSite site;
  Address start = 0;
  Address end = 0;
  /// Nearest-first on both sides.
  std::vector<Located> pre;
  std::vector<Located> post;

  std::uint64_t usable_bytes() const { return end - start; }
};

struct SyscallNumberFact {
  EcallSite site;
  std::optional<std::uint64_t> value;
  std::optional<Address> setter_address;
};

AddressSet collect_branch_targets(const CodeImage& image);
AddressSet collect_branch_targets(const CodeImage& image, const Listing& listing);

std::vector<EcallSite> scan_ecalls(const CodeImage& image);
std::vector<EcallSite> scan_ecalls(const Listing& listing);

PatchWindow compute_window(const CodeImage& image, const EcallSite& site, const AddressSet& branch_targets);
PatchWindow compute_window(const Listing& listing, const EcallSite& site, const AddressSet& branch_targets);

SyscallNumberFact extract_syscall_number(const CodeImage& image, const EcallSite& site);
SyscallNumberFact extract_syscall_number(const Listing& listing, const EcallSite& site,
                                         const AddressSet& branch_targets);

}  // namespace rvi::analysis
