#include "rvi/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "rvi/planner.hpp"

namespace rvi::corpus {

using isa::Instruction;
using isa::Op;

std::string_view intended_name(IntendedKind k) {
  switch (k) {
    case IntendedKind::GATEWAY: return "GATEWAY";
    case IntendedKind::MIDDLE: return "MIDDLE";
    case IntendedKind::SMALL: return "SMALL";
    case IntendedKind::UNPATCHABLE: return "UNPATCHABLE";
  }
  return "?";
}

std::vector<std::uint64_t> default_syscall_pool() { return {63, 64, 172, 57, 56, 62, 29, 17, 220}; }

std::array<std::size_t, 4> site_counts(const CorpusSpec& spec) {
  const double f[3] = {spec.gateway_fraction, spec.middle_fraction, spec.small_fraction};
  for (double v : f)
    if (!(v >= 0.0)) throw InfeasibleSpec("kind fractions must be non-negative");
  const double sum = f[0] + f[1] + f[2];
  if (sum > 1.0 + 1e-9) throw InfeasibleSpec("kind fractions sum to more than 1");
  const double quota[4] = {f[0] * spec.n_sites, f[1] * spec.n_sites, f[2] * spec.n_sites,
                           std::max(0.0, 1.0 - sum) * spec.n_sites};
  std::array<std::size_t, 4> counts{};
  std::size_t assigned = 0;
  std::array<std::pair<double, std::size_t>, 4> rem;
  for (std::size_t k = 0; k < 4; ++k) {
    counts[k] = static_cast<std::size_t>(std::floor(quota[k] + 1e-9));
    assigned += counts[k];
    rem[k] = {quota[k] - static_cast<double>(counts[k]), k};
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first + 1e-12; });
  for (std::size_t i = 0; assigned < spec.n_sites; ++i, ++assigned) ++counts[rem[i % 4].second];
  return counts;
}

namespace {

using Bytes = std::vector<std::uint8_t>;

constexpr std::int64_t kFrameBytes = 128;
constexpr unsigned kNumberSlots = 8;  // stack slots 0..7 hold a7 values for runtime loads
constexpr std::uint64_t kExitNumber = 93;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : g_() % n; }
  std::int64_t range(std::int64_t lo, std::int64_t hi) { return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1))); }
  bool coin() { return (g_() & 1) != 0; }
  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

 private:
  std::mt19937_64 g_;
};

// Registers filler code may clobber: never zero, ra, sp, gp, tp or a7.
const std::vector<Reg> kScratch = {Reg::t0, Reg::t1, Reg::t2, Reg::s0, Reg::s1, Reg::a0, Reg::a1, Reg::a2,
                                   Reg::a3, Reg::a4, Reg::a5, Reg::a6, Reg::s2, Reg::s3, Reg::s4, Reg::s5,
                                   Reg::s6, Reg::s7, Reg::s8, Reg::s9, Reg::s10, Reg::s11, Reg::t3, Reg::t4,
                                   Reg::t5, Reg::t6};
const std::vector<Reg> kCompressedScratch = {Reg::s0, Reg::s1, Reg::a0, Reg::a1, Reg::a2, Reg::a3, Reg::a4, Reg::a5};

std::int64_t filler_slot(Rng& rng, unsigned size) {
  return static_cast<std::int64_t>(8 * (kNumberSlots + rng.below(16 - kNumberSlots)) + (size == 4 ? 4 * rng.below(2) : 0));
}

Instruction wide_filler(Rng& rng) {
  const Reg rd = rng.pick(kScratch);
  const Reg rs1 = rng.pick(kScratch);
  const Reg rs2 = rng.pick(kScratch);
  static const std::vector<Op> kAlu = {Op::ADD, Op::SUB, Op::XOR, Op::OR, Op::AND, Op::SLL, Op::SRL, Op::SRA,
                                       Op::SLT, Op::SLTU, Op::ADDW, Op::SUBW, Op::MUL, Op::MULH, Op::DIVU, Op::REM,
                                       Op::MULW, Op::REMUW};
  static const std::vector<Op> kImm = {Op::ADDI, Op::XORI, Op::ORI, Op::ANDI, Op::SLTI, Op::ADDIW};
  switch (rng.below(6)) {
    case 0:
    case 1: return isa::make(rng.pick(kAlu), rd, rs1, rs2);
    case 2: return isa::make(rng.pick(kImm), rd, rs1, Reg::zero, rng.range(-2048, 2047));
    case 3: return isa::make(rng.coin() ? Op::SLLI : Op::SRAI, rd, rs1, Reg::zero, rng.range(0, 63));
    case 4: return isa::make(Op::LUI, rd, Reg::zero, Reg::zero, rng.range(-524288, 524287) * 4096);
    default: {
      const bool dbl = rng.coin();
      const auto off = filler_slot(rng, dbl ? 8 : 4);
      if (rng.coin()) return isa::make(dbl ? Op::LD : Op::LW, rd, Reg::sp, Reg::zero, off);
      return isa::make(dbl ? Op::SD : Op::SW, Reg::zero, Reg::sp, rs2, off);
    }
  }
}

Instruction compressed_filler(Rng& rng) {
  const Reg rd = rng.pick(kScratch);
  const Reg rs = rng.pick(kScratch);
  const Reg cd = rng.pick(kCompressedScratch);
  const Reg cs = rng.pick(kCompressedScratch);
  auto nz6 = [&] {
    const auto v = rng.range(-32, 30);
    return v >= 0 ? v + 1 : v;
  };
  switch (rng.below(10)) {
    case 0: return isa::make(Op::C_ADDI, rd, rd, Reg::zero, nz6());
    case 1: return isa::make(Op::C_LI, rd, Reg::zero, Reg::zero, rng.range(-32, 31));
    case 2: return isa::make(Op::C_MV, rd, Reg::zero, rs);
    case 3: return isa::make(Op::C_ADD, rd, rd, rs);
    case 4: return isa::make(Op::C_SLLI, rd, rd, Reg::zero, rng.range(1, 63));
    case 5: {
      static const std::vector<Op> kOps = {Op::C_SUB, Op::C_XOR, Op::C_OR, Op::C_AND, Op::C_ADDW, Op::C_SUBW};
      return isa::make(rng.pick(kOps), cd, cd, cs);
    }
    case 6: return isa::make(rng.coin() ? Op::C_SRLI : Op::C_SRAI, cd, cd, Reg::zero, rng.range(1, 63));
    case 7: return isa::make(Op::C_LUI, rd, Reg::zero, Reg::zero, nz6() * 4096);
    case 8: return isa::make(Op::C_LDSP, rd, Reg::sp, Reg::zero, filler_slot(rng, 8));
    default: return isa::make(Op::C_SDSP, Reg::zero, Reg::sp, rs, filler_slot(rng, 8));
  }
}

std::vector<Instruction> fill(Rng& rng, std::uint64_t bytes, bool rvc) {
  std::vector<Instruction> out;
  while (bytes > 0) {
    const bool narrow = rvc && (bytes == 2 || rng.coin());
    out.push_back(narrow ? compressed_filler(rng) : wide_filler(rng));
    bytes -= out.back().width;
  }
  return out;
}

Instruction clamp(Rng& rng, bool rvc, bool pc_neutral_only) {
  const std::uint64_t choices = pc_neutral_only ? 2 : (rvc ? 5 : 4);
  switch (rng.below(choices)) {
    case 0: return isa::make(Op::FENCE, Reg::zero, Reg::zero, Reg::zero, 0x0ff);
    case 1: return isa::make(Op::AUIPC, Reg::t1);
    case 2: return isa::make(Op::JAL, Reg::zero, Reg::zero, Reg::zero, 4);
    case 3: return isa::make(Op::BNE, Reg::zero, Reg::zero, Reg::zero, 4);
    default: return isa::make(Op::C_J, Reg::zero, Reg::zero, Reg::zero, 2);
  }
}

Instruction setter(Rng& rng, std::uint64_t number, bool rvc) {
  const auto n = static_cast<std::int64_t>(number);
  if (rvc && n <= 31 && rng.coin()) return isa::make(Op::C_LI, Reg::a7, Reg::zero, Reg::zero, n);
  static const std::vector<Op> kForms = {Op::ADDI, Op::ADDI, Op::ORI, Op::XORI, Op::ADDIW};
  return isa::make(rng.pick(kForms), Reg::a7, Reg::zero, Reg::zero, n);
}

Instruction loader(Rng& rng, unsigned slot, bool rvc) {
  if (rvc && rng.coin()) return isa::make(Op::C_LDSP, Reg::a7, Reg::sp, Reg::zero, 8 * slot);
  return isa::make(Op::LD, Reg::a7, Reg::sp, Reg::zero, 8 * slot);
}

std::uint64_t pick_even(Rng& rng, std::uint64_t lo, std::uint64_t hi, std::uint64_t step) {
  lo = (lo + step - 1) / step * step;
  if (hi < lo) return lo;
  return lo + step * rng.below((hi - lo) / step + 1);
}

void emit(Bytes& out, const Instruction& in) { isa::append(out, in); }

}  // namespace

Corpus generate(const CorpusSpec& spec) {
  if (spec.base % 2 != 0) throw InfeasibleSpec("base must be 2-byte aligned");
  const auto counts = site_counts(spec);
  const auto budget = planner::PatchBudget::for_mode(spec.rvc);
  const std::uint64_t step = spec.rvc ? 2 : 4;
  std::vector<std::uint64_t> pool;
  for (auto n : spec.syscall_numbers)
    if (n != kExitNumber) pool.push_back(n);
  if (spec.n_sites > 0 && pool.empty() && spec.n_sites > 1) throw InfeasibleSpec("empty syscall pool");
  if (counts[0] > 0 && spec.max_window_bytes < budget.gateway)
    throw InfeasibleSpec("GATEWAY sites need " + std::to_string(budget.gateway) + "-byte windows, budget is " +
                         std::to_string(spec.max_window_bytes));
  if (counts[1] > 0 && spec.max_window_bytes < budget.middle)
    throw InfeasibleSpec("MIDDLE sites need " + std::to_string(budget.middle) + "-byte windows, budget is " +
                         std::to_string(spec.max_window_bytes));
  if ((counts[1] > 0 || counts[2] > 0) && counts[0] == 0)
    throw InfeasibleSpec("MIDDLE and SMALL sites need at least one GATEWAY");

  Rng rng(spec.seed);
  std::vector<IntendedKind> kinds;
  for (std::size_t k = 0; k < 4; ++k) kinds.insert(kinds.end(), counts[k], static_cast<IntendedKind>(k));
  for (std::size_t i = kinds.size(); i > 1; --i) std::swap(kinds[i - 1], kinds[rng.below(i)]);

  std::vector<std::uint64_t> numbers;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (i + 1 == kinds.size()) numbers.push_back(kExitNumber);
    else if (kinds[i] == IntendedKind::UNPATCHABLE)
      numbers.push_back(pool[rng.below(std::min<std::size_t>(pool.size(), kNumberSlots - 1))]);
    else numbers.push_back(rng.pick(pool));
  }

  // The six-byte fixture needs a c.li-encodable number on a non-final SMALL site.
  std::optional<std::size_t> fixture;
  if (spec.six_byte_fixture && spec.rvc) {
    std::vector<std::uint64_t> small_numbers;
    for (auto n : pool)
      if (n <= 31) small_numbers.push_back(n);
    for (std::size_t i = 0; i + 1 < kinds.size() && !small_numbers.empty(); ++i) {
      if (kinds[i] == IntendedKind::SMALL) {
        fixture = i;
        numbers[i] = rng.pick(small_numbers);
        break;
      }
    }
  }

  std::map<std::uint64_t, unsigned> slot_of;
  for (std::size_t i = 0; i < kinds.size(); ++i)
    if (kinds[i] == IntendedKind::UNPATCHABLE && !slot_of.contains(numbers[i]))
      slot_of.emplace(numbers[i], static_cast<unsigned>(slot_of.size()));

  Bytes code;
  emit(code, isa::make(Op::ADDI, Reg::sp, Reg::sp, Reg::zero, -kFrameBytes));
  for (const auto& [number, slot] : slot_of) {
    emit(code, isa::make(Op::ADDI, Reg::t1, Reg::zero, Reg::zero, static_cast<std::int64_t>(number)));
    emit(code, isa::make(Op::SD, Reg::zero, Reg::sp, Reg::t1, 8 * slot));
  }

  Corpus corpus;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    SiteAnnotation a;
    a.index = i;
    a.kind = kinds[i];
    a.syscall_number = numbers[i];
    a.number_statically_known = kinds[i] != IntendedKind::UNPATCHABLE;

    if (fixture && *fixture == i) {
      a.six_byte_fixture = true;
      emit(code, isa::make(Op::BNE, Reg::zero, Reg::zero, Reg::zero, 10));
      emit(code, isa::make(Op::C_LI, Reg::a7, Reg::zero, Reg::zero, static_cast<std::int64_t>(numbers[i])));
      a.address = spec.base + code.size();
      emit(code, isa::make(Op::ECALL));
      emit(code, isa::make(Op::C_MV, rng.pick(kScratch), Reg::zero, rng.pick(kScratch)));
      a.window_bytes = 6;
      corpus.sites.push_back(a);
      continue;
    }

    // Bytes around the ecall, excluding it.
    std::uint64_t around = 0;
    const std::uint64_t cap = spec.max_window_bytes - 4;
    switch (kinds[i]) {
      case IntendedKind::GATEWAY: around = pick_even(rng, budget.gateway - 4, cap, step); break;
      case IntendedKind::MIDDLE:
        around = pick_even(rng, budget.middle - 4, std::min(cap, budget.gateway - 4 - step), step);
        break;
      default: around = pick_even(rng, 0, std::min(cap, budget.middle - 4 - step), step); break;
    }

    std::optional<Instruction> a7_insn;
    if (kinds[i] == IntendedKind::UNPATCHABLE) a7_insn = loader(rng, slot_of.at(numbers[i]), spec.rvc);
    else a7_insn = setter(rng, numbers[i], spec.rvc);

    // GATEWAY and MIDDLE always carry the a7 instruction inside the window;
    // SMALL and UNPATCHABLE sometimes put it ahead of a pc-neutral clamp.
    const bool inside = a7_insn->width <= around &&
                        (kinds[i] == IntendedKind::GATEWAY || kinds[i] == IntendedKind::MIDDLE || rng.coin());
    std::vector<Instruction> pre;
    std::vector<Instruction> post;
    if (inside) {
      const std::uint64_t rest = around - a7_insn->width;
      const std::uint64_t pre_rest = pick_even(rng, 0, rest, step);
      const std::uint64_t before = pick_even(rng, 0, pre_rest, step);
      auto head = fill(rng, before, spec.rvc);
      auto tail = fill(rng, pre_rest - before, spec.rvc);
      pre = head;
      pre.push_back(*a7_insn);
      pre.insert(pre.end(), tail.begin(), tail.end());
      post = fill(rng, rest - pre_rest, spec.rvc);
      emit(code, clamp(rng, spec.rvc, false));
    } else {
      const std::uint64_t pre_bytes = pick_even(rng, 0, around, step);
      pre = fill(rng, pre_bytes, spec.rvc);
      post = fill(rng, around - pre_bytes, spec.rvc);
      emit(code, clamp(rng, spec.rvc, false));
      emit(code, *a7_insn);
      emit(code, clamp(rng, spec.rvc, true));
    }
    for (const auto& in : pre) emit(code, in);
    a.address = spec.base + code.size();
    emit(code, isa::make(Op::ECALL));
    for (const auto& in : post) emit(code, in);
    a.window_bytes = 4 + around;
    corpus.sites.push_back(a);
  }

  emit(code, clamp(rng, spec.rvc, false));
  emit(code, isa::make(Op::ADDI, Reg::sp, Reg::sp, Reg::zero, kFrameBytes));
  emit(code, isa::make(Op::JALR, Reg::zero, Reg::ra));

  corpus.image = load_raw(std::move(code), spec.base);
  corpus.entry = spec.base;
  return corpus;
}

}  // namespace rvi::corpus
