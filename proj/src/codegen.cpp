#include "rvi/codegen.hpp"

#include <algorithm>

#include "rvi/error.hpp"

namespace rvi::codegen {

using isa::Op;

namespace {

using Bytes = std::vector<std::uint8_t>;

void put(Bytes& out, Op op, Reg rd = Reg::zero, Reg rs1 = Reg::zero, Reg rs2 = Reg::zero, std::int64_t imm = 0) {
  isa::append(out, isa::make(op, rd, rs1, rs2, imm));
}

void put_word(Bytes& out, std::uint32_t w) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
}

Address align_up(Address v, Address a) { return (v + a - 1) / a * a; }

// Stack push/pop of one register around a 16-byte sp adjustment.
void push(Bytes& out, Reg r, bool rvc) {
  if (rvc) {
    put(out, Op::C_ADDI, Reg::sp, Reg::sp, Reg::zero, -16);
    put(out, Op::C_SDSP, Reg::zero, Reg::sp, r, 0);
  } else {
    put(out, Op::ADDI, Reg::sp, Reg::sp, Reg::zero, -16);
    put(out, Op::SD, Reg::zero, Reg::sp, r, 0);
  }
}

void pop(Bytes& out, Reg r, bool rvc) {
  if (rvc) {
    put(out, Op::C_LDSP, r, Reg::sp, Reg::zero, 0);
    put(out, Op::C_ADDI, Reg::sp, Reg::sp, Reg::zero, 16);
  } else {
    put(out, Op::LD, r, Reg::sp, Reg::zero, 0);
    put(out, Op::ADDI, Reg::sp, Reg::sp, Reg::zero, 16);
  }
}

void require_kind(const PlannedPatch& p, PatchKind k) {
  if (p.kind != k)
    throw InternalError("patch " + std::to_string(p.id) + " is " + std::string(planner::kind_name(p.kind)) +
                        ", expected " + std::string(planner::kind_name(k)));
}

std::uint32_t jal_or_internal(Reg link, Address from, Address to, const PlannedPatch& p) {
  if (from == to) throw InternalError("patch " + std::to_string(p.id) + ": jal to itself");
  if (!isa::jal_in_range(from, to))
    throw InternalError("patch " + std::to_string(p.id) + ": gateway out of jal reach");
  return isa::encode_jal(link, from, to);
}

// `auipc r, hi; addi r, r, lo` materializing `value` from `from_pc`.
void put_address(Bytes& out, Reg r, Address from_pc, Address value) {
  if (!isa::auipc_jalr_in_range(from_pc, value))
    throw PlacementError("relocated block at " + std::to_string(from_pc) + " cannot address " +
                         std::to_string(value));
  const auto [hi, lo] = isa::split_hi_lo(isa::delta(from_pc, value));
  put(out, Op::AUIPC, r, Reg::zero, Reg::zero, hi);
  put(out, Op::ADDI, r, r, Reg::zero, lo);
}

void put_jump(Bytes& out, Address from_pc, Address to, const char* what) {
  if (!isa::jal_in_range(from_pc, to))
    throw PlacementError(std::string(what) + " out of jal reach from " + std::to_string(from_pc));
  put_word(out, isa::encode_jal(Reg::zero, from_pc, to));
}

}  // namespace

std::vector<std::uint8_t> emit_gateway_patch(const PlannedPatch& p, Address entry_point_addr) {
  require_kind(p, PatchKind::GATEWAY);
  Bytes out;
  push(out, Reg::t0, p.rvc);
  const Address auipc_pc = p.region_start + out.size();
  if (!isa::auipc_jalr_in_range(auipc_pc, entry_point_addr))
    throw InternalError("patch " + std::to_string(p.id) + ": entry point out of auipc+jalr reach");
  const auto [up, jump] = isa::encode_auipc_jalr_pair(Reg::t0, auipc_pc, entry_point_addr);
  put_word(out, up);
  put_word(out, jump);
  pop(out, Reg::t0, p.rvc);
  return out;
}

std::vector<std::uint8_t> emit_middle_patch(const PlannedPatch& p, Address gateway_addr) {
  require_kind(p, PatchKind::MIDDLE);
  Bytes out;
  push(out, Reg::ra, p.rvc);
  put_word(out, jal_or_internal(Reg::ra, p.region_start + out.size(), gateway_addr, p));
  if (p.rvc) {
    pop(out, Reg::ra, true);
  } else {
    // sp is restored by the runtime; the relocated block re-stores ra just below it.
    put(out, Op::LD, Reg::ra, Reg::sp, Reg::zero, -16);
  }
  return out;
}

std::vector<std::uint8_t> emit_small_patch(const PlannedPatch& p, Address gateway_addr) {
  require_kind(p, PatchKind::SMALL);
  if (!p.syscall_number) throw InternalError("patch " + std::to_string(p.id) + ": SMALL without syscall number");
  Bytes out;
  put_word(out, jal_or_internal(Reg::a7, p.region_start, gateway_addr, p));
  return out;
}

std::vector<std::uint8_t> pad_to_region(std::vector<std::uint8_t> patch, const PlannedPatch& p) {
  if (patch.size() > p.region_length) throw InternalError("patch larger than its region");
  while (patch.size() < p.region_length) {
    const auto left = p.region_length - patch.size();
    if (p.rvc && left % 4 != 0) put(patch, Op::C_NOP);
    else if (!p.rvc && left % 4 != 0) throw InternalError("no-RVC region padding is not a multiple of 4");
    else put(patch, Op::ADDI);
  }
  return patch;
}

std::vector<std::uint8_t> emit_entry_point() {
  Bytes out;
  put(out, Op::ADDI, Reg::sp, Reg::sp, Reg::zero, -static_cast<std::int64_t>(kEntryFrameBytes));
  for (unsigned i = 1; i < 32; ++i) {
    if (i == idx(Reg::sp)) continue;
    put(out, Op::SD, Reg::zero, Reg::sp, reg(i), 8 * i);
  }
  put(out, Op::EBREAK);
  return out;
}

std::uint64_t entry_point_size() { return 4 + 30 * 4 + 4; }

std::uint64_t bitmap_length(std::uint64_t text_length, std::uint64_t alignment) {
  const std::uint64_t units = (text_length + alignment - 1) / alignment;
  return (units + 7) / 8;
}

bool bitmap_test(const PatchArtifacts& a, Address addr) {
  if (addr < a.text_base || addr >= a.text_base + a.text_length) return false;
  const std::uint64_t unit = (addr - a.text_base) / 2;
  if (unit / 8 >= a.bitmap.bytes.size()) return false;
  return (a.bitmap.bytes[unit / 8] >> (unit % 8)) & 1u;
}

std::pair<Address, Address> PatchArtifacts::runtime_span() const {
  return {entry_point.address, std::max({entry_point.end(), trampoline.end(), relocated_table.end(), bitmap.end()})};
}

PatchArtifacts build_runtime(const planner::Plan& plan, const CodeImage& image, std::optional<Address> placement) {
  const Address base = placement.value_or(plan.entry_point);
  if (base % 4 != 0) throw PlacementError("runtime placement must be 4-byte aligned");

  PatchArtifacts a;
  a.rvc = plan.rvc;
  a.text_base = image.base;
  a.text_length = image.size();

  a.entry_point = {base, emit_entry_point()};
  a.entry_gate = a.entry_point.end() - 4;

  a.trampoline.address = a.entry_point.end();
  if (plan.rvc) {
    put(a.trampoline.bytes, Op::C_JR, Reg::zero, Reg::t0);
    put(a.trampoline.bytes, Op::C_JR, Reg::zero, Reg::ra);
    a.trampoline_t0 = a.trampoline.address;
    a.trampoline_ra = a.trampoline.address + 2;
  } else {
    put(a.trampoline.bytes, Op::JALR, Reg::zero, Reg::t0);
    put(a.trampoline.bytes, Op::JALR, Reg::zero, Reg::ra);
    a.trampoline_t0 = a.trampoline.address;
    a.trampoline_ra = a.trampoline.address + 4;
  }

  const std::size_t n = plan.patches.size();
  a.relocated_table.address = align_up(a.trampoline.end(), 64);
  a.relocated_table.bytes.assign(n * kRelocatedBlockStride, 0);
  a.bitmap.address = align_up(a.relocated_table.end(), 64);
  a.bitmap.bytes.assign(bitmap_length(image.size()), 0);

  const auto [lo, hi] = a.runtime_span();
  if (lo < image.end() && image.base < hi) throw PlacementError("runtime blobs overlap the text");

  for (const auto& p : plan.patches) {
    if (p.id != a.patches.size()) throw InternalError("plan patch ids are not dense");
    PatchRecord r;
    r.id = p.id;
    r.kind = p.kind;
    r.site = p.site.address;
    r.region_start = p.region_start;
    r.region_length = p.region_length;
    r.patch_length = p.patch_length;
    r.key = p.key();
    r.gateway = p.gateway;
    r.syscall_number = p.syscall_number;
    r.link_register = p.link_register;
    r.block_address = a.relocated_table.address + p.id * kRelocatedBlockStride;
    r.relocated_pre_count = static_cast<std::uint32_t>(p.relocated_pre.size());
    r.relocated_post_count = static_cast<std::uint32_t>(p.relocated_post.size());

    Bytes code;
    switch (p.kind) {
      case PatchKind::GATEWAY:
        if (!isa::auipc_jalr_in_range(p.jump_pc(), base))
          throw PlacementError("gateway " + std::to_string(p.id) + " cannot reach the entry point");
        code = emit_gateway_patch(p, base);
        break;
      case PatchKind::MIDDLE:
      case PatchKind::SMALL: {
        if (!p.gateway) throw InternalError("patch " + std::to_string(p.id) + " has no gateway");
        const auto& gw = plan.patches.at(*p.gateway);
        r.gateway_key = gw.key();
        code = p.kind == PatchKind::MIDDLE ? emit_middle_patch(p, gw.region_start)
                                           : emit_small_patch(p, gw.region_start);
        break;
      }
    }
    if (code.size() != p.patch_length) throw InternalError("patch length mismatch");
    a.patch_bytes[p.id] = pad_to_region(std::move(code), p);

    // Relocated block: pre, syscall gate, post, return path.
    Bytes block;
    const auto pc = [&] { return r.block_address + block.size(); };
    for (const auto& l : p.relocated_pre) isa::append(block, l.insn);
    r.gate_address = pc();
    put(block, Op::EBREAK);
    for (const auto& l : p.relocated_post) isa::append(block, l.insn);
    switch (p.kind) {
      case PatchKind::GATEWAY:
        push(block, Reg::t0, p.rvc);
        put_address(block, Reg::t0, pc(), r.key);
        put_jump(block, pc(), a.trampoline_t0, "trampoline");
        break;
      case PatchKind::MIDDLE:
        if (p.rvc) push(block, Reg::ra, true);
        else put(block, Op::SD, Reg::zero, Reg::sp, Reg::ra, -16);
        put_address(block, Reg::ra, pc(), r.key);
        put_jump(block, pc(), a.trampoline_ra, "trampoline");
        break;
      case PatchKind::SMALL:
        put_jump(block, pc(), p.region_end(), "SMALL return");
        break;
    }
    if (block.size() > kRelocatedBlockStride) throw InternalError("relocated block exceeds its stride");
    std::copy(block.begin(), block.end(), a.relocated_table.bytes.begin() + static_cast<std::ptrdiff_t>(p.id * kRelocatedBlockStride));

    if (!a.dispatch_map.emplace(r.key, r.id).second) throw InternalError("duplicate dispatch key");
    for (Address u = p.region_start; u < p.region_end(); u += 2) {
      const std::uint64_t unit = (u - image.base) / 2;
      a.bitmap.bytes[unit / 8] |= static_cast<std::uint8_t>(1u << (unit % 8));
    }
    a.patches.push_back(r);
  }

  a.footprint = account_footprint(a, n);
  return a;
}

FootprintReport account_footprint(const PatchArtifacts& a, std::size_t n_patches) {
  FootprintReport f;
  f.n_patches = n_patches;
  f.relocated_bytes = n_patches * kRelocatedBlockStride;
  f.trampoline_bytes = a.trampoline.bytes.size();
  f.bitmap_bytes = a.bitmap.bytes.size();
  f.dispatch_bytes = n_patches * kDispatchEntryBytes;
  f.entry_point_bytes = a.entry_point.bytes.size();
  f.total_bytes = f.relocated_bytes + f.trampoline_bytes + f.bitmap_bytes + f.dispatch_bytes + f.entry_point_bytes;
  f.per_patch_marginal_bytes = kRelocatedBlockStride + kDispatchEntryBytes;
  return f;
}

}  // namespace rvi::codegen
