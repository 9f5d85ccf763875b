// rvpatch: analyze, patch, verify, bench and footprint front end.
//
// Exit codes: 0 ok, 2 input error, 3 unpatchable site under --strict,
// 4 verification failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rvi/codegen.hpp"
#include "rvi/corpus.hpp"
#include "rvi/image.hpp"
#include "rvi/planner.hpp"
#include "rvi/report.hpp"
#include "rvi/verify.hpp"

namespace fs = std::filesystem;
using namespace rvi;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitStrict = 3;
constexpr int kExitVerify = 4;

/// Distinguishes load failures (exit 2) from everything else.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string input;
  std::string kind = "elf";
  std::optional<Address> base;
  bool no_rvc = false;
  bool strict = false;
  std::string out;
  std::string format = "json";
  std::optional<std::uint64_t> seed;
  std::uint64_t cost_units = emu::kDefaultCostUnits;
  std::optional<Address> placement;
  std::optional<Address> entry;
  std::uint64_t iterations = 1000;
  std::string site_kind = "gateway";
  std::uint64_t syscall_number = 172;
  std::size_t n_patches = verify::kCalibrationPatchCount;
  std::uint64_t text_length = verify::kCalibrationTextLength;
  std::vector<std::uint64_t> bypass;
  std::uint64_t bypass_ret0 = 0;
  std::string trace;
};

struct LoadedInput {
  CodeImage image;
  Address entry = 0;
  bool rvc = true;
  std::optional<corpus::Corpus> corpus;
};

LoadedInput load_input(const RunConfig& c) {
  if (c.input.empty()) throw InputError("--input is required");
  LoadedInput in;
  in.rvc = !c.no_rvc;
  try {
    if (c.kind == "elf") {
      if (c.base) throw InputError("--base applies to raw input only");
      in.image = load_elf_text(read_file(c.input));
    } else if (c.kind == "raw") {
      if (!c.base) throw InputError("--base is required for raw input");
      in.image = load_raw(read_file(c.input), *c.base);
    } else if (c.kind == "corpus-spec") {
      const auto text = read_file(c.input);
      json j;
      try {
        j = json::parse(text.begin(), text.end());
      } catch (const json::exception& e) {
        throw InputError(std::string("corpus spec: ") + e.what());
      }
      auto spec = report::corpus_spec_from_json(j);
      if (c.seed) spec.seed = *c.seed;
      if (c.no_rvc) spec.rvc = false;
      in.rvc = spec.rvc;
      in.corpus = corpus::generate(spec);
      in.image = in.corpus->image;
      in.entry = in.corpus->entry;
    } else {
      throw InputError("unknown --kind '" + c.kind + "'");
    }
  } catch (const ImageError& e) {
    throw InputError(e.what());
  } catch (const corpus::InfeasibleSpec& e) {
    throw InputError(std::string("infeasible corpus spec: ") + e.what());
  }
  if (!in.corpus) in.entry = in.image.base;
  if (c.entry) in.entry = *c.entry;
  return in;
}

planner::PlannerOptions planner_options(const RunConfig& c, const LoadedInput& in) {
  return {.rvc = in.rvc, .placement = c.placement};
}

void emit(const RunConfig& c, const json& j, const std::string& text) {
  if (c.format == "text")
    std::cout << text;
  else
    std::cout << j.dump(2) << "\n";
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << v;
  return s.str();
}

std::string plan_text(const planner::Plan& plan) {
  std::ostringstream s;
  const auto& d = plan.distribution;
  s << "sites: " << d.total << "\n";
  for (const auto& p : plan.patches) {
    s << "  " << hex(p.site.address) << "  " << planner::kind_name(p.kind) << "  region " << hex(p.region_start) << "+"
      << p.region_length;
    if (p.gateway) s << "  gateway #" << *p.gateway;
    if (p.syscall_number) s << "  a7=" << *p.syscall_number;
    s << "\n";
  }
  for (const auto& u : plan.unpatchable)
    s << "  " << hex(u.site.address) << "  UNPATCHABLE (" << planner::reason_name(u.reason) << ")\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "distribution: GATEWAY %.1f%%  MIDDLE %.1f%%  SMALL %.1f%%  UNPATCHABLE %.1f%%\n",
                d.percent(d.gateway), d.percent(d.middle), d.percent(d.small), d.percent(d.unpatchable));
  s << buf;
  return s.str();
}

int cmd_analyze(const RunConfig& c) {
  const auto in = load_input(c);
  const auto plan = planner::plan(in.image, planner_options(c, in));
  json j = report::plan_json(plan);
  if (in.corpus) j["corpus"] = report::annotations_json(*in.corpus);
  emit(c, j, plan_text(plan));
  if (c.strict && !plan.unpatchable.empty()) return kExitStrict;
  return kExitOk;
}

int cmd_patch(const RunConfig& c) {
  if (c.out.empty()) throw InputError("--out is required for patch");
  const auto in = load_input(c);
  const auto prog = verify::patch_image(in.image, planner_options(c, in));
  if (c.strict && !prog.plan.unpatchable.empty()) {
    std::cerr << "rvpatch: " << prog.plan.unpatchable.size() << " unpatchable site(s) under --strict\n";
    emit(c, report::plan_json(prog.plan), plan_text(prog.plan));
    return kExitStrict;
  }
  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());
  const auto& a = prog.artifacts;
  write_file(dir / "patched_text.bin", prog.patched_text.bytes);
  write_file(dir / "entry_point.bin", a.entry_point.bytes);
  write_file(dir / "trampoline.bin", a.trampoline.bytes);
  write_file(dir / "relocated_table.bin", a.relocated_table.bytes);
  write_file(dir / "bitmap.bin", a.bitmap.bytes);
  json meta = report::metadata_json(a, prog.plan);
  meta["program_entry"] = in.entry;
  const std::string doc = meta.dump(2) + "\n";
  write_file(dir / "metadata.json", std::span(reinterpret_cast<const std::uint8_t*>(doc.data()), doc.size()));
  if (in.corpus) {
    const std::string ann = report::annotations_json(*in.corpus).dump(2) + "\n";
    write_file(dir / "annotations.json", std::span(reinterpret_cast<const std::uint8_t*>(ann.data()), ann.size()));
    write_file(dir / "original_text.bin", in.image.bytes);
  }
  json summary{{"out", dir.string()},
               {"patches", a.patches.size()},
               {"unpatchable", prog.plan.unpatchable.size()},
               {"footprint", report::footprint_json(a.footprint)}};
  std::ostringstream t;
  t << "wrote " << a.patches.size() << " patch(es) to " << dir.string() << ", " << prog.plan.unpatchable.size()
    << " unpatchable, runtime footprint " << a.footprint.total_bytes << " B\n";
  emit(c, summary, t.str());
  return kExitOk;
}

int cmd_verify(const RunConfig& c) {
  if (c.out.empty()) throw InputError("--out (the patch output directory) is required for verify");
  const auto in = load_input(c);
  const fs::path dir(c.out);
  codegen::PatchArtifacts artifacts;
  CodeImage patched;
  Address entry = in.entry;
  try {
    const auto text = read_file(dir / "metadata.json");
    json meta;
    try {
      meta = json::parse(text.begin(), text.end());
    } catch (const json::exception& e) {
      throw InputError(std::string("metadata.json: ") + e.what());
    }
    artifacts = report::artifacts_from_metadata(meta, dir);
    patched = load_raw(read_file(dir / meta.at("patched_text").at("file").get<std::string>()), artifacts.text_base);
    if (!c.entry && meta.contains("program_entry")) entry = meta.at("program_entry").get<Address>();
  } catch (const ImageError& e) {
    throw InputError(e.what());
  } catch (const json::exception& e) {
    throw InputError(std::string("metadata.json: ") + e.what());
  }
  if (patched.base != in.image.base || patched.size() != in.image.size())
    throw InputError("patched text does not match the input image extent");

  const auto kernel = emu::synthetic_kernel(c.cost_units);
  verify::DiffOptions opts;
  runtime::Hooks hooks = runtime::Hooks::passthrough();
  if (!c.bypass.empty()) {
    opts.mode = verify::Mode::BYPASS;
    hooks = runtime::Hooks::bypass({c.bypass.begin(), c.bypass.end()}, c.bypass_ret0);
  }
  const auto v = verify::differential_run(in.image, patched, artifacts, entry, kernel, hooks, opts);

  if (!c.trace.empty()) {
    emu::MachineState s = emu::initial_state(entry);
    verify::map_patched(s, patched, artifacts);
    runtime::InterceptorRuntime rt(artifacts, hooks, kernel);
    std::string lines;
    try {
      lines = report::trace_jsonl(emu::run(std::move(s), kernel, &rt).trace);
    } catch (const emu::EmulatorFault& f) {
      lines = json{{"event", "FAULT"}, {"detail", f.what()}}.dump() + "\n";
    }
    write_file(c.trace, std::span(reinterpret_cast<const std::uint8_t*>(lines.data()), lines.size()));
  }

  std::ostringstream t;
  t << (v.equivalent ? "EQUIVALENT" : "DIVERGENT") << ": " << v.original_syscalls << " original syscalls, "
    << v.intercepted << " intercepted, " << v.bypassed << " bypassed\n";
  for (const auto& d : v.details) t << "  " << d << "\n";
  emit(c, report::verdict_json(v), t.str());
  return v.equivalent ? kExitOk : kExitVerify;
}

planner::PatchKind parse_kind(const std::string& s) {
  if (s == "gateway") return planner::PatchKind::GATEWAY;
  if (s == "middle") return planner::PatchKind::MIDDLE;
  if (s == "small") return planner::PatchKind::SMALL;
  throw InputError("unknown --site-kind '" + s + "'");
}

int cmd_bench(const RunConfig& c) {
  verify::BenchConfig cfg;
  cfg.iterations = c.iterations;
  cfg.cost_units = c.cost_units;
  cfg.site_kind = parse_kind(c.site_kind);
  cfg.rvc = !c.no_rvc;
  cfg.syscall_number = c.syscall_number;
  const auto b = verify::bench(cfg);
  std::ostringstream t;
  for (const auto& r : b.reports) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-17s instret %10llu  kernel %10llu  total %10llu  overhead %+8.2f%%\n",
                  std::string(verify::scenario_name(r.scenario)).c_str(), static_cast<unsigned long long>(r.instret),
                  static_cast<unsigned long long>(r.kernel_cost), static_cast<unsigned long long>(r.total_cost),
                  r.overhead_vs_normal);
    t << buf;
  }
  t << "per-interception instret: " << b.per_interception_instret << "\n";
  emit(c, report::bench_json(b), t.str());
  return kExitOk;
}

int cmd_footprint(const RunConfig& c) {
  const auto calib = verify::footprint_compare(verify::kCalibrationPatchCount, verify::kCalibrationTextLength);
  const auto req = verify::footprint_compare(c.n_patches, c.text_length);
  json j{{"calibration", report::comparison_json(calib)}, {"requested", report::comparison_json(req)}};
  std::ostringstream t;
  auto row = [&](const char* label, const verify::FootprintComparison& f) {
    char buf[240];
    std::snprintf(buf, sizeof buf, "%-18s n=%-6zu riscv %10.2f KiB  x86 %8.3f MiB  ratio %6.2f%%  slope ratio %.2f\n",
                  label, f.n_patches, f.riscv.total_bytes / 1024.0, f.x86.total_bytes / (1024.0 * 1024.0),
                  100.0 * f.ratio, f.slope_ratio);
    t << buf;
  };
  row("calibration", calib);
  row("requested", req);
  if (!c.input.empty()) {
    const auto in = load_input(c);
    const auto prog = verify::patch_image(in.image, planner_options(c, in));
    j["input"] = report::footprint_json(prog.artifacts.footprint);
    t << "input artifacts: " << prog.artifacts.footprint.total_bytes << " B over " << prog.artifacts.patches.size()
      << " patch(es)\n";
  }
  emit(c, j, t.str());
  return kExitOk;
}

/// CLI11 parses numbers in hex when prefixed with 0x.
void add_common(CLI::App* sub, RunConfig& c) {
  sub->add_option("--input", c.input, "Input file");
  sub->add_option("--kind", c.kind, "Input kind")->check(CLI::IsMember({"elf", "raw", "corpus-spec"}));
  sub->add_option("--base", c.base, "Load address of raw input");
  sub->add_flag("--no-rvc", c.no_rvc, "Disable compressed encodings in patches");
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"json", "text"}));
  sub->add_option("--seed", c.seed, "Corpus seed override");
  sub->add_option("--placement", c.placement, "Runtime blob load address");
  sub->add_option("--entry", c.entry, "Program entry (defaults to the text base or the corpus entry)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RISC-V syscall interception patch toolkit"};
  app.require_subcommand(1);
  RunConfig c;

  auto* analyze = app.add_subcommand("analyze", "Report ecall sites, windows, kinds and the distribution");
  add_common(analyze, c);
  analyze->add_flag("--strict", c.strict, "Exit 3 when any site is unpatchable");

  auto* patch = app.add_subcommand("patch", "Write patched text, runtime blobs and metadata");
  add_common(patch, c);
  patch->add_flag("--strict", c.strict, "Exit 3 when any site is unpatchable");

  auto* verify_cmd = app.add_subcommand("verify", "Differential run of original vs patched output");
  add_common(verify_cmd, c);
  verify_cmd->add_option("--cost-units", c.cost_units, "Kernel cost per syscall");
  verify_cmd->add_option("--bypass", c.bypass, "Syscall numbers the hook bypasses")->delimiter(',');
  verify_cmd->add_option("--bypass-ret0", c.bypass_ret0, "a0 returned for bypassed calls");
  verify_cmd->add_option("--trace", c.trace, "Write the patched-run trace as JSON lines");

  auto* bench = app.add_subcommand("bench", "NORMAL / INTERCEPT_BYPASS / INTERCEPT_KERNEL cost scenarios");
  bench->add_option("--iterations", c.iterations, "Syscalls per run");
  bench->add_option("--cost-units", c.cost_units, "Kernel cost per syscall");
  bench->add_option("--site-kind", c.site_kind, "Patch kind of the measured site")
      ->check(CLI::IsMember({"gateway", "middle", "small"}));
  bench->add_option("--syscall", c.syscall_number, "Syscall number issued by the loop");
  bench->add_flag("--no-rvc", c.no_rvc, "Disable compressed encodings");
  bench->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"json", "text"}));
  bench->add_option("--seed", c.seed, "Accepted for symmetry; the bench program is fixed");

  auto* footprint = app.add_subcommand("footprint", "RISC-V vs x86 reference memory model");
  add_common(footprint, c);
  footprint->add_option("--patches", c.n_patches, "Patch count for the requested row");
  footprint->add_option("--text-length", c.text_length, "Text bytes for the requested row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*analyze) return cmd_analyze(c);
    if (*patch) return cmd_patch(c);
    if (*verify_cmd) return cmd_verify(c);
    if (*bench) return cmd_bench(c);
    if (*footprint) return cmd_footprint(c);
  } catch (const InputError& e) {
    std::cerr << "rvpatch: " << e.what() << "\n";
    return kExitInput;
  } catch (const ImageError& e) {
    std::cerr << "rvpatch: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "rvpatch: internal error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
