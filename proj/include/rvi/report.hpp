#pragma once

// JSON serialization for plans, patch metadata, traces, verdicts and the
// footprint/bench reports. Object keys are emitted in sorted order, so equal
// inputs produce byte-identical documents.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "rvi/codegen.hpp"
#include "rvi/corpus.hpp"
#include "rvi/emulator.hpp"
#include "rvi/planner.hpp"
#include "rvi/verify.hpp"

namespace rvi::report {

using nlohmann::json;

inline constexpr const char* kMetadataFormat = "rvpatch-metadata/1";

json plan_json(const planner::Plan& plan);
json footprint_json(const codegen::FootprintReport& f);

/// Sidecar metadata: placement of every blob (file names relative to the
/// output directory), full patch records and the dispatch map.
json metadata_json(const codegen::PatchArtifacts& artifacts, const planner::Plan& plan);

/// Rebuilds artifacts from metadata and the blob and text files in `dir`.
/// Throws ImageError(MALFORMED) on inconsistent input.
codegen::PatchArtifacts artifacts_from_metadata(const json& metadata, const std::filesystem::path& dir);

json event_json(const emu::Event& e);
/// One JSON object per line.
std::string trace_jsonl(const emu::ExecutionTrace& trace);

json verdict_json(const verify::Verdict& v);
json comparison_json(const verify::FootprintComparison& c);
json bench_json(const verify::BenchResult& b);
json annotations_json(const corpus::Corpus& c);

corpus::CorpusSpec corpus_spec_from_json(const json& j);

}  // namespace rvi::report
