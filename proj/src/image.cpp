#include "rvi/image.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rvi/codegen.hpp"

namespace rvi {

namespace {

constexpr std::uint32_t kShfExecinstr = 0x4;
constexpr std::uint32_t kShtNobits = 8;

struct Reader {
  std::span<const std::uint8_t> data;

  template <typename T>
  T get(std::size_t off) const {
    if (off + sizeof(T) > data.size() || off + sizeof(T) < off)
      throw ImageError(ImageError::Kind::MALFORMED, "ELF: read past end of file at offset " + std::to_string(off));
    T v{};
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(data[off + i]) << (8 * i));
    return v;
  }
};

struct SectionHeader {
  std::uint32_t name;
  std::uint32_t type;
  std::uint64_t flags;
  std::uint64_t addr;
  std::uint64_t offset;
  std::uint64_t size;
};

void check_shape(const CodeImage& img) {
  if (img.bytes.empty()) throw ImageError(ImageError::Kind::EMPTY, "code image is empty");
  if (img.base % 2 != 0)
    throw ImageError(ImageError::Kind::MISALIGNED_BASE, "code image base " + std::to_string(img.base) +
                                                            " is not 2-byte aligned");
  if (img.bytes.size() % 2 != 0)
    throw ImageError(ImageError::Kind::ODD_LENGTH, "code image length " + std::to_string(img.bytes.size()) +
                                                       " is odd");
}

}  // namespace

CodeImage load_elf_text(std::span<const std::uint8_t> file) {
  static constexpr std::uint8_t kMagic[4] = {0x7f, 'E', 'L', 'F'};
  if (file.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), file.begin()))
    throw ImageError(ImageError::Kind::NOT_ELF, "input is not an ELF file");
  if (file.size() < 0x40) throw ImageError(ImageError::Kind::MALFORMED, "ELF header truncated");
  if (file[4] != 2) throw ImageError(ImageError::Kind::WRONG_CLASS, "ELF class is not 64-bit");
  if (file[5] != 1) throw ImageError(ImageError::Kind::WRONG_ENDIANNESS, "ELF data encoding is not little-endian");

  const Reader r{file};
  const auto shoff = r.get<std::uint64_t>(0x28);
  const auto shentsize = r.get<std::uint16_t>(0x3a);
  const auto shnum = r.get<std::uint16_t>(0x3c);
  const auto shstrndx = r.get<std::uint16_t>(0x3e);
  if (shnum == 0 || shoff == 0)
    throw ImageError(ImageError::Kind::NO_EXECUTABLE_SECTION, "ELF has no section headers");
  if (shentsize < 0x40) throw ImageError(ImageError::Kind::MALFORMED, "ELF section header entry too small");

  auto header = [&](std::size_t i) {
    const std::size_t at = shoff + i * shentsize;
    return SectionHeader{r.get<std::uint32_t>(at), r.get<std::uint32_t>(at + 4), r.get<std::uint64_t>(at + 8),
                         r.get<std::uint64_t>(at + 0x10), r.get<std::uint64_t>(at + 0x18),
                         r.get<std::uint64_t>(at + 0x20)};
  };
  std::vector<SectionHeader> sections;
  sections.reserve(shnum);
  for (std::size_t i = 0; i < shnum; ++i) sections.push_back(header(i));

  auto name_of = [&](const SectionHeader& s) -> std::string {
    if (shstrndx >= sections.size()) return {};
    const auto& strtab = sections[shstrndx];
    std::string out;
    for (std::uint64_t p = strtab.offset + s.name; p < file.size() && p < strtab.offset + strtab.size; ++p) {
      if (file[p] == 0) break;
      out.push_back(static_cast<char>(file[p]));
    }
    return out;
  };

  const SectionHeader* chosen = nullptr;
  std::string chosen_name;
  for (const auto& s : sections) {
    if ((s.flags & kShfExecinstr) && s.type != kShtNobits && name_of(s) == ".text") {
      chosen = &s;
      chosen_name = ".text";
      break;
    }
  }
  if (!chosen) {
    for (const auto& s : sections) {
      if ((s.flags & kShfExecinstr) && s.type != kShtNobits && s.size > 0) {
        chosen = &s;
        chosen_name = name_of(s);
        break;
      }
    }
  }
  if (!chosen) throw ImageError(ImageError::Kind::NO_EXECUTABLE_SECTION, "ELF has no executable section");
  if (chosen->offset + chosen->size > file.size() || chosen->offset + chosen->size < chosen->offset)
    throw ImageError(ImageError::Kind::MALFORMED, "ELF section " + chosen_name + " extends past end of file");

  CodeImage img;
  img.base = chosen->addr;
  img.bytes.assign(file.begin() + static_cast<std::ptrdiff_t>(chosen->offset),
                   file.begin() + static_cast<std::ptrdiff_t>(chosen->offset + chosen->size));
  img.origin = ImageOrigin::ELF_TEXT;
  img.section_name = chosen_name;
  check_shape(img);
  return img;
}

CodeImage load_raw(std::vector<std::uint8_t> bytes, Address base) {
  CodeImage img;
  img.base = base;
  img.bytes = std::move(bytes);
  img.origin = ImageOrigin::RAW;
  check_shape(img);
  return img;
}

std::vector<std::uint8_t> apply_region_writes(const CodeImage& original, std::span<const RegionWrite> writes) {
  std::vector<RegionWrite> sorted(writes.begin(), writes.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.address < b.address; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& w = sorted[i];
    if (!original.contains(w.address, w.bytes.size()))
      throw ImageError(ImageError::Kind::REGION_OUTSIDE_IMAGE,
                       "patch region at " + std::to_string(w.address) + " lies outside the image");
    if (i > 0 && sorted[i - 1].address + sorted[i - 1].bytes.size() > w.address)
      throw ImageError(ImageError::Kind::OVERLAPPING_REGIONS,
                       "patch regions at " + std::to_string(sorted[i - 1].address) + " and " +
                           std::to_string(w.address) + " overlap");
  }
  std::vector<std::uint8_t> out = original.bytes;
  for (const auto& w : sorted) std::copy(w.bytes.begin(), w.bytes.end(), out.begin() + (w.address - original.base));
  return out;
}

std::vector<std::uint8_t> write_patched_image(const CodeImage& original, const codegen::PatchArtifacts& artifacts) {
  std::vector<RegionWrite> writes;
  writes.reserve(artifacts.patches.size());
  for (const auto& p : artifacts.patches) writes.push_back({p.region_start, artifacts.patch_bytes.at(p.id)});
  return apply_region_writes(original, writes);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError(ImageError::Kind::IO, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageError(ImageError::Kind::IO, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError(ImageError::Kind::IO, "short write to " + path.string());
}

}  // namespace rvi
