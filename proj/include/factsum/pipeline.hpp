#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "factsum/config.hpp"
#include "factsum/core.hpp"
#include "factsum/fact_stage.hpp"
#include "factsum/gateway.hpp"
#include "factsum/memory_bank.hpp"
#include "factsum/scope.hpp"

namespace factsum {

/// Artifact file name -> JSON document.
using Artifacts = std::map<std::string, json>;

struct FactStageResult {
    std::vector<TranscriptChunk> chunks;
    MemoryBank bank;
    std::size_t extracted = 0;
    json verification = json::array();
};

/// Chunk, extract, optionally verify, then fold every chunk's facts into the bank in chunk order.
FactStageResult run_fact_stage(const std::vector<TranscriptTurn>& turns, const RunConfig& config, Gateway& gw);

struct PipelineResult {
    Artifacts artifacts;
    std::string summary;
    bool unresolved = false;
};

/// General summary. Throws OutlineEmpty when nothing can anchor an outline.
PipelineResult summarize_meeting(const std::vector<TranscriptTurn>& turns, const RunConfig& config, Gateway& gw);

/// Personalized summary. Without a profile one is inferred from the transcript. Scope mode adds
/// trace.json; an empty selection throws SelectionEmpty.
PipelineResult personalize_meeting(const std::vector<TranscriptTurn>& turns, const std::optional<ReaderProfile>& profile,
                                   PersonaMode mode, const RunConfig& config, Gateway& gw);

/// Seven-dimension report for one summary.
json evaluate_summary(const std::string& summary, const std::vector<TranscriptTurn>& turns,
                      const ReaderProfile& profile, const RunConfig& config, Gateway& gw);

struct RenderedPrompt {
    std::string stage;
    std::string system_prompt;
    std::string user_prompt;
};

/// Every prompt that can be rendered before any model response exists, in issue order.
/// No backend is constructed.
std::vector<RenderedPrompt> dry_run_prompts(const std::string& command, const std::vector<TranscriptTurn>& turns,
                                            const RunConfig& config, const std::optional<ReaderProfile>& profile,
                                            PersonaMode mode, const std::optional<std::string>& summary);

/// Usage records, per-stage sums and totals.
json usage_report(const Gateway& gw);

/// Writes each artifact as two-space-indented JSON plus a trailing newline.
void write_artifacts(const std::filesystem::path& dir, const Artifacts& artifacts);

/// Loads a transcript file. Throws InputError.
std::vector<TranscriptTurn> load_transcript(const std::filesystem::path& path);
/// Loads a provided profile. Throws InputError.
ReaderProfile load_profile(const std::filesystem::path& path);
/// Summary text from a summary.json artifact or a plain text file.
std::string load_summary_text(const std::filesystem::path& path);

} // namespace factsum
