#include "rvi/report.hpp"

#include <map>

#include "rvi/error.hpp"
#include "rvi/image.hpp"

namespace rvi::report {

using planner::PatchKind;

namespace {

json window_json(const analysis::PatchWindow& w) {
  json pre = json::array();
  for (auto it = w.pre.rbegin(); it != w.pre.rend(); ++it) pre.push_back(isa::to_string(it->insn));
  json post = json::array();
  for (const auto& l : w.post) post.push_back(isa::to_string(l.insn));
  return {{"start", w.start}, {"end", w.end}, {"usable_bytes", w.usable_bytes()}, {"pre", pre}, {"post", post}};
}

json optional_u64(const std::optional<std::uint64_t>& v) { return v ? json(*v) : json(nullptr); }

PatchKind kind_from(const std::string& s) {
  if (s == "GATEWAY") return PatchKind::GATEWAY;
  if (s == "MIDDLE") return PatchKind::MIDDLE;
  if (s == "SMALL") return PatchKind::SMALL;
  throw ImageError(ImageError::Kind::MALFORMED, "unknown patch kind '" + s + "'");
}

Reg reg_from(const std::string& s) {
  for (unsigned i = 0; i < 32; ++i)
    if (reg_name(reg(i)) == s) return reg(i);
  throw ImageError(ImageError::Kind::MALFORMED, "unknown register '" + s + "'");
}

}  // namespace

json plan_json(const planner::Plan& plan) {
  json sites = json::array();
  std::map<Address, const planner::PlannedPatch*> by_site;
  for (const auto& p : plan.patches) by_site[p.site.address] = &p;
  std::map<Address, const planner::Unpatchable*> rejected;
  for (const auto& u : plan.unpatchable) rejected[u.site.address] = &u;

  for (const auto& w : plan.windows) {
    json s{{"index", w.site.index}, {"address", w.site.address}, {"window", window_json(w)}};
    if (auto it = by_site.find(w.site.address); it != by_site.end()) {
      const auto& p = *it->second;
      s["kind"] = planner::kind_name(p.kind);
      s["patch_id"] = p.id;
      s["region"] = {{"start", p.region_start}, {"length", p.region_length}, {"patch_length", p.patch_length}};
      s["gateway"] = p.gateway ? json(*p.gateway) : json(nullptr);
      s["syscall_number"] = optional_u64(p.syscall_number);
      s["link_register"] = reg_name(p.link_register);
      s["key"] = p.key();
    } else {
      const auto& u = *rejected.at(w.site.address);
      s["kind"] = "UNPATCHABLE";
      s["reason"] = planner::reason_name(u.reason);
      s["syscall_number"] = optional_u64(u.syscall_number);
    }
    sites.push_back(std::move(s));
  }
  const auto& d = plan.distribution;
  json dist{{"total", d.total},
            {"counts", {{"GATEWAY", d.gateway}, {"MIDDLE", d.middle}, {"SMALL", d.small}, {"UNPATCHABLE", d.unpatchable}}},
            {"percent",
             {{"GATEWAY", d.percent(d.gateway)},
              {"MIDDLE", d.percent(d.middle)},
              {"SMALL", d.percent(d.small)},
              {"UNPATCHABLE", d.percent(d.unpatchable)}}}};
  json unpatchable = json::array();
  for (const auto& u : plan.unpatchable)
    unpatchable.push_back({{"address", u.site.address}, {"reason", planner::reason_name(u.reason)}, {"usable_bytes", u.usable_bytes}});
  return {{"text_base", plan.text_base}, {"text_length", plan.text_length}, {"entry_point", plan.entry_point},
          {"rvc", plan.rvc},           {"sites", sites},                 {"unpatchable", unpatchable},
          {"distribution", dist}};
}

json footprint_json(const codegen::FootprintReport& f) {
  return {{"n_patches", f.n_patches},
          {"relocated_bytes", f.relocated_bytes},
          {"trampoline_bytes", f.trampoline_bytes},
          {"bitmap_bytes", f.bitmap_bytes},
          {"dispatch_bytes", f.dispatch_bytes},
          {"entry_point_bytes", f.entry_point_bytes},
          {"total_bytes", f.total_bytes},
          {"per_patch_marginal_bytes", f.per_patch_marginal_bytes}};
}

json metadata_json(const codegen::PatchArtifacts& a, const planner::Plan& plan) {
  auto blob = [](const codegen::Blob& b, const char* file) {
    return json{{"address", b.address}, {"length", b.bytes.size()}, {"file", file}};
  };
  json patches = json::array();
  for (const auto& p : a.patches) {
    patches.push_back({{"id", p.id},
                       {"kind", planner::kind_name(p.kind)},
                       {"site", p.site},
                       {"region_start", p.region_start},
                       {"region_length", p.region_length},
                       {"patch_length", p.patch_length},
                       {"key", p.key},
                       {"gateway", p.gateway ? json(*p.gateway) : json(nullptr)},
                       {"gateway_key", p.gateway_key},
                       {"syscall_number", optional_u64(p.syscall_number)},
                       {"link_register", reg_name(p.link_register)},
                       {"block_address", p.block_address},
                       {"gate_address", p.gate_address},
                       {"relocated_pre", p.relocated_pre_count},
                       {"relocated_post", p.relocated_post_count}});
  }
  json dispatch = json::array();
  for (const auto& [key, id] : a.dispatch_map) dispatch.push_back({{"key", key}, {"patch", id}});
  json unpatchable = json::array();
  for (const auto& u : plan.unpatchable)
    unpatchable.push_back({{"address", u.site.address}, {"reason", planner::reason_name(u.reason)}});
  return {{"format", kMetadataFormat},
          {"base", a.text_base},
          {"text_length", a.text_length},
          {"rvc", a.rvc},
          {"patched_text", {{"address", a.text_base}, {"length", a.text_length}, {"file", "patched_text.bin"}}},
          {"blobs",
           {{"entry_point", blob(a.entry_point, "entry_point.bin")},
            {"trampoline", blob(a.trampoline, "trampoline.bin")},
            {"relocated_table", blob(a.relocated_table, "relocated_table.bin")},
            {"bitmap", blob(a.bitmap, "bitmap.bin")}}},
          {"entry_gate", a.entry_gate},
          {"trampoline_t0", a.trampoline_t0},
          {"trampoline_ra", a.trampoline_ra},
          {"patches", patches},
          {"dispatch_map", dispatch},
          {"unpatchable", unpatchable},
          {"distribution", plan_json(plan)["distribution"]},
          {"footprint", footprint_json(a.footprint)}};
}

codegen::PatchArtifacts artifacts_from_metadata(const json& m, const std::filesystem::path& dir) {
  try {
    if (m.at("format").get<std::string>() != kMetadataFormat)
      throw ImageError(ImageError::Kind::MALFORMED, "unsupported metadata format");
    codegen::PatchArtifacts a;
    a.text_base = m.at("base").get<Address>();
    a.text_length = m.at("text_length").get<std::uint64_t>();
    a.rvc = m.at("rvc").get<bool>();
    auto load_blob = [&](const char* name) {
      const auto& b = m.at("blobs").at(name);
      codegen::Blob out;
      out.address = b.at("address").get<Address>();
      out.bytes = read_file(dir / b.at("file").get<std::string>());
      if (out.bytes.size() != b.at("length").get<std::uint64_t>())
        throw ImageError(ImageError::Kind::MALFORMED, std::string(name) + " blob length does not match metadata");
      return out;
    };
    a.entry_point = load_blob("entry_point");
    a.trampoline = load_blob("trampoline");
    a.relocated_table = load_blob("relocated_table");
    a.bitmap = load_blob("bitmap");
    a.entry_gate = m.at("entry_gate").get<Address>();
    a.trampoline_t0 = m.at("trampoline_t0").get<Address>();
    a.trampoline_ra = m.at("trampoline_ra").get<Address>();
    for (const auto& j : m.at("patches")) {
      codegen::PatchRecord p;
      p.id = j.at("id").get<std::size_t>();
      p.kind = kind_from(j.at("kind").get<std::string>());
      p.site = j.at("site").get<Address>();
      p.region_start = j.at("region_start").get<Address>();
      p.region_length = j.at("region_length").get<std::uint64_t>();
      p.patch_length = j.at("patch_length").get<std::uint64_t>();
      p.key = j.at("key").get<Address>();
      if (!j.at("gateway").is_null()) p.gateway = j.at("gateway").get<std::size_t>();
      p.gateway_key = j.at("gateway_key").get<Address>();
      if (!j.at("syscall_number").is_null()) p.syscall_number = j.at("syscall_number").get<std::uint64_t>();
      p.link_register = reg_from(j.at("link_register").get<std::string>());
      p.block_address = j.at("block_address").get<Address>();
      p.gate_address = j.at("gate_address").get<Address>();
      p.relocated_pre_count = j.at("relocated_pre").get<std::uint32_t>();
      p.relocated_post_count = j.at("relocated_post").get<std::uint32_t>();
      if (p.id != a.patches.size()) throw ImageError(ImageError::Kind::MALFORMED, "patch ids are not dense");
      a.patches.push_back(p);
    }
    // Patch bytes live in the patched text; slice them back out per region.
    const auto& pt = m.at("patched_text");
    const auto text = read_file(dir / pt.at("file").get<std::string>());
    if (text.size() != a.text_length || pt.at("address").get<Address>() != a.text_base)
      throw ImageError(ImageError::Kind::MALFORMED, "patched text does not match metadata");
    for (const auto& p : a.patches) {
      if (p.region_start < a.text_base || p.region_end() > a.text_base + a.text_length)
        throw ImageError(ImageError::Kind::MALFORMED, "patch region outside the text");
      const auto off = p.region_start - a.text_base;
      a.patch_bytes[p.id].assign(text.begin() + off, text.begin() + off + p.region_length);
    }
    for (const auto& j : m.at("dispatch_map")) a.dispatch_map[j.at("key").get<Address>()] = j.at("patch").get<std::size_t>();
    const auto& f = m.at("footprint");
    a.footprint.n_patches = f.at("n_patches").get<std::size_t>();
    a.footprint.relocated_bytes = f.at("relocated_bytes").get<std::uint64_t>();
    a.footprint.trampoline_bytes = f.at("trampoline_bytes").get<std::uint64_t>();
    a.footprint.bitmap_bytes = f.at("bitmap_bytes").get<std::uint64_t>();
    a.footprint.dispatch_bytes = f.at("dispatch_bytes").get<std::uint64_t>();
    a.footprint.entry_point_bytes = f.at("entry_point_bytes").get<std::uint64_t>();
    a.footprint.total_bytes = f.at("total_bytes").get<std::uint64_t>();
    a.footprint.per_patch_marginal_bytes = f.at("per_patch_marginal_bytes").get<std::uint64_t>();
    return a;
  } catch (const json::exception& e) {
    throw ImageError(ImageError::Kind::MALFORMED, std::string("metadata: ") + e.what());
  }
}

json event_json(const emu::Event& e) {
  using K = emu::Event::Kind;
  json j{{"event", emu::event_kind_name(e.kind)}, {"pc", e.pc}};
  switch (e.kind) {
    case K::SYSCALL:
      j["number"] = e.number;
      j["args"] = e.args;
      j["ret0"] = e.ret0;
      j["ret1"] = e.ret1;
      j["via"] = e.via == emu::Via::DIRECT ? "DIRECT" : "INTERCEPTED";
      break;
    case K::HOOK_PRE:
      j["number"] = e.number;
      j["decision"] = e.decision == emu::HookDecision::BYPASS ? "BYPASS" : "PASSTHROUGH";
      break;
    case K::HOOK_POST:
      j["number"] = e.number;
      j["ret0"] = e.ret0;
      j["ret1"] = e.ret1;
      break;
    case K::POST_CLONE:
      j["number"] = e.number;
      j["child"] = e.child;
      break;
    case K::BREAK: j["key"] = e.key; break;
  }
  return j;
}

std::string trace_jsonl(const emu::ExecutionTrace& t) {
  std::string out;
  for (const auto& e : t.events) out += event_json(e).dump() + "\n";
  out += json{{"event", "END"}, {"instret_total", t.instret_total}, {"kernel_cost_total", t.kernel_cost_total}}.dump() + "\n";
  return out;
}

json verdict_json(const verify::Verdict& v) {
  json div = nullptr;
  if (v.first_divergence)
    div = {{"kind", verify::divergence_name(v.first_divergence->kind)},
           {"index", v.first_divergence->index},
           {"detail", v.first_divergence->detail}};
  return {{"equivalent", v.equivalent},
          {"first_divergence", div},
          {"details", v.details},
          {"original_syscalls", v.original_syscalls},
          {"patched_syscalls", v.patched_syscalls},
          {"intercepted", v.intercepted},
          {"bypassed", v.bypassed},
          {"original_instret", v.original_instret},
          {"patched_instret", v.patched_instret}};
}

json comparison_json(const verify::FootprintComparison& c) {
  auto breakdown = [](const verify::ModelBreakdown& b) {
    return json{{"relocated_bytes", b.relocated_bytes},
                {"template_bytes", b.template_bytes},
                {"trampoline_bytes", b.trampoline_bytes},
                {"bitmap_bytes", b.bitmap_bytes},
                {"total_bytes", b.total_bytes},
                {"total_kib", static_cast<double>(b.total_bytes) / 1024.0},
                {"total_mib", static_cast<double>(b.total_bytes) / (1024.0 * 1024.0)}};
  };
  return {{"n_patches", c.n_patches},
          {"text_length", c.text_length},
          {"riscv", breakdown(c.riscv)},
          {"x86_reference", breakdown(c.x86)},
          {"ratio_percent", 100.0 * c.ratio},
          {"fit_points", c.fit_points},
          {"riscv_slope_bytes_per_patch", c.riscv_slope},
          {"x86_slope_bytes_per_patch", c.x86_slope},
          {"slope_ratio", c.slope_ratio}};
}

json bench_json(const verify::BenchResult& b) {
  json rows = json::array();
  for (const auto& r : b.reports)
    rows.push_back({{"scenario", verify::scenario_name(r.scenario)},
                    {"instret", r.instret},
                    {"kernel_cost", r.kernel_cost},
                    {"total_cost", r.total_cost},
                    {"overhead_vs_normal_percent", r.overhead_vs_normal},
                    {"syscalls", r.syscalls}});
  return {{"iterations", b.config.iterations},
          {"cost_units", b.config.cost_units},
          {"site_kind", planner::kind_name(b.config.site_kind)},
          {"rvc", b.config.rvc},
          {"syscall_number", b.config.syscall_number},
          {"scenarios", rows},
          {"per_interception_instret", b.per_interception_instret},
          // Published hardware medians, for context only; the emulated ratios above are not expected to match.
          {"published_hardware_medians_percent",
           {{"riscv", {{"INTERCEPT_BYPASS", -35}, {"INTERCEPT_KERNEL", 5}}},
            {"x86", {{"INTERCEPT_BYPASS", -70}, {"INTERCEPT_KERNEL", 2}}}}}};
}

json annotations_json(const corpus::Corpus& c) {
  json sites = json::array();
  for (const auto& s : c.sites)
    sites.push_back({{"index", s.index},
                     {"address", s.address},
                     {"intended_kind", corpus::intended_name(s.kind)},
                     {"window_bytes", s.window_bytes},
                     {"syscall_number", s.syscall_number},
                     {"number_statically_known", s.number_statically_known},
                     {"six_byte_fixture", s.six_byte_fixture}});
  return {{"base", c.image.base}, {"length", c.image.size()}, {"entry", c.entry}, {"sites", sites}};
}

corpus::CorpusSpec corpus_spec_from_json(const json& j) {
  corpus::CorpusSpec s;
  try {
    s.n_sites = j.value("n_sites", s.n_sites);
    if (j.contains("window_distribution")) {
      const auto& d = j.at("window_distribution");
      s.gateway_fraction = d.value("GATEWAY", 0.0);
      s.middle_fraction = d.value("MIDDLE", 0.0);
      s.small_fraction = d.value("SMALL", 0.0);
    }
    s.rvc = j.value("rvc_enabled", s.rvc);
    s.seed = j.value("seed", s.seed);
    if (j.contains("syscall_numbers")) s.syscall_numbers = j.at("syscall_numbers").get<std::vector<std::uint64_t>>();
    s.base = j.value("base", s.base);
    s.max_window_bytes = j.value("max_window_bytes", s.max_window_bytes);
    s.six_byte_fixture = j.value("six_byte_fixture", s.six_byte_fixture);
  } catch (const json::exception& e) {
    throw ImageError(ImageError::Kind::MALFORMED, std::string("corpus spec: ") + e.what());
  }
  return s;
}

}  // namespace rvi::report
