#pragma once

// Synthetic syscall-wrapper programs with ground truth: every ecall sits in a
// window of known size, clamped by non-relocatable instructions or branch
// targets, with a known (or deliberately unknowable) a7 value.

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "rvi/error.hpp"
#include "rvi/image.hpp"

namespace rvi::corpus {

enum class IntendedKind : std::uint8_t { GATEWAY, MIDDLE, SMALL, UNPATCHABLE };

std::string_view intended_name(IntendedKind k);

class InfeasibleSpec : public Error {
 public:
  using Error::Error;
};

/// 93 (exit) is reserved for the final site and is not part of the pool.
std::vector<std::uint64_t> default_syscall_pool();

struct CorpusSpec {
  std::size_t n_sites = 20;
  double gateway_fraction = 0.40;
  double middle_fraction = 0.15;
  double small_fraction = 0.45;
  bool rvc = true;
  std::uint64_t seed = 7;
  std::vector<std::uint64_t> syscall_numbers = default_syscall_pool();
  Address base = 0x10000;
  std::uint64_t max_window_bytes = 32;
  /// Includes one SMALL site whose window is a single c.li plus the ecall.
  bool six_byte_fixture = true;
};

struct SiteAnnotation {
  std::size_t index = 0;
  Address address = 0;
  IntendedKind kind = IntendedKind::GATEWAY;
  std::uint64_t window_bytes = 0;
  std::uint64_t syscall_number = 0;
  bool number_statically_known = true;
  bool six_byte_fixture = false;
};

struct Corpus {
  CodeImage image;
  Address entry = 0;
  std::vector<SiteAnnotation> sites;
};

/// Site counts for GATEWAY, MIDDLE, SMALL and UNPATCHABLE (largest remainder).
std::array<std::size_t, 4> site_counts(const CorpusSpec& spec);

Corpus generate(const CorpusSpec& spec);

}  // namespace rvi::corpus
