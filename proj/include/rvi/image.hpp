#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rvi/error.hpp"
#include "rvi/isa.hpp"

namespace rvi {

namespace codegen {
struct PatchArtifacts;
}

enum class ImageOrigin : std::uint8_t { ELF_TEXT, RAW };

class ImageError : public Error {
 public:
  enum class Kind : std::uint8_t {
    NOT_ELF,
    WRONG_CLASS,
    WRONG_ENDIANNESS,
    MALFORMED,
    NO_EXECUTABLE_SECTION,
    MISALIGNED_BASE,
    EMPTY,
    ODD_LENGTH,
    REGION_OUTSIDE_IMAGE,
    OVERLAPPING_REGIONS,
    IO,
  };
  ImageError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Executable code to be patched: a contiguous byte range at a virtual address.
struct CodeImage {
  Address base = 0;
  std::vector<std::uint8_t> bytes;
  ImageOrigin origin = ImageOrigin::RAW;
  std::string section_name;

  Address end() const { return base + bytes.size(); }
  std::size_t size() const { return bytes.size(); }
  bool contains(Address addr, std::size_t len = 1) const {
    return addr >= base && addr + len <= end() && addr + len >= addr;
  }
  std::span<const std::uint8_t> from(Address addr) const {
    return std::span<const std::uint8_t>(bytes).subspan(addr - base);
  }
};

/// Extracts ".text" (or the first SHF_EXECINSTR section) from an ELF64 LE file.
CodeImage load_elf_text(std::span<const std::uint8_t> file);

CodeImage load_raw(std::vector<std::uint8_t> bytes, Address base);

/// Raw bytes overwritten at `address`.
struct RegionWrite {
  Address address;
  std::span<const std::uint8_t> bytes;
};

/// Copies `original` with every region overwritten. Regions must lie inside
/// the image and be pairwise disjoint.
std::vector<std::uint8_t> apply_region_writes(const CodeImage& original, std::span<const RegionWrite> writes);

/// Patched text bytes: the original with every planned patch region replaced.
std::vector<std::uint8_t> write_patched_image(const CodeImage& original, const codegen::PatchArtifacts& artifacts);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace rvi
