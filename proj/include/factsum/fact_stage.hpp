#pragma once

#include <optional>
#include <string>
#include <vector>

#include "factsum/core.hpp"
#include "factsum/gateway.hpp"
#include "factsum/tokenizer.hpp"

namespace factsum {

/// Facts as the prompts see them: a JSON list of {"id", "fact", "context"}.
std::string render_fact_list(const std::vector<Fact>& facts);

/// Extracts facts from one chunk; ids come from `ids`, source_chunk is the chunk index.
std::vector<Fact> extract_facts(const TranscriptChunk& chunk, Gateway& gw, FactIdAllocator& ids,
                                int max_repairs = kDefaultMaxRepairs);

enum class ActionKind { RemoveUnsupported, AddMissedKeyInfo, RewriteContextForClarity, TrimContextMinimalism };

std::string_view to_wire(ActionKind kind) noexcept;
std::optional<ActionKind> parse_action_kind(std::string_view token) noexcept;

struct VerificationAction {
    ActionKind kind = ActionKind::RemoveUnsupported;
    /// Unset for AddMissedKeyInfo, which is chunk-scoped.
    std::optional<FactId> target;
    std::string detail;

    bool operator==(const VerificationAction&) const = default;
};

struct VerificationReport {
    int overall_score = 0;
    std::vector<std::string> feedback;
    std::string summary;
    std::vector<VerificationAction> actions;

    bool operator==(const VerificationReport&) const = default;
};

json to_json(const VerificationReport& report);

/// Checks the facts against their chunk. Action targets must name facts in `facts`
/// (violations are repaired). Throws InvalidValue if a fact belongs to another chunk.
VerificationReport verify_facts(const TranscriptChunk& chunk, const std::vector<Fact>& facts, Gateway& gw,
                                int max_repairs = kDefaultMaxRepairs);

struct VerificationOutcome {
    std::vector<Fact> facts;
    std::vector<FactId> removed;
    std::vector<FactId> rewritten;
    /// Rewrite targets whose regeneration failed; these are dropped.
    std::vector<FactId> dropped;
    std::vector<FactId> added;

    std::size_t modifications() const noexcept {
        return removed.size() + rewritten.size() + dropped.size() + added.size();
    }
};

/// Applies the report. Removals delete; rewrite/trim regenerate the fact under the same id; gaps
/// are filled by a targeted extraction whose facts are appended. Unnamed facts pass through untouched.
VerificationOutcome apply_verification(const TranscriptChunk& chunk, const std::vector<Fact>& facts,
                                       const VerificationReport& report, Gateway& gw, FactIdAllocator& ids,
                                       int max_repairs = kDefaultMaxRepairs);

} // namespace factsum
