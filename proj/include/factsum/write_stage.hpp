#pragma once

#include <optional>
#include <string>
#include <vector>

#include "factsum/core.hpp"
#include "factsum/gateway.hpp"
#include "factsum/memory_bank.hpp"
#include "factsum/note_stage.hpp"
#include "factsum/tokenizer.hpp"

namespace factsum {

/// Everything the writer may draw on. Only features with tier score >= policy.keep_min reach a prompt.
struct WriterContext {
    const Outline* outline = nullptr;
    const std::vector<ScoredFeature>* features = nullptr;
    const MemoryBank* bank = nullptr;
    RetentionPolicy policy;
    /// Switches enrichment to the persona template.
    const ReaderProfile* persona = nullptr;
    int max_repairs = kDefaultMaxRepairs;
};

struct SummaryDraft {
    std::string text;
    /// Fact ids supplied to the generation prompt, ascending.
    std::vector<FactId> supplied_facts;

    bool operator==(const SummaryDraft&) const = default;
};

/// Outline points with their matched facts. Points without facts carry "facts": [] and "skip": true.
json matched_facts(const WriterContext& ctx);
/// Retained features not referenced by any outline point.
json unmatched_features(const WriterContext& ctx);

/// Generates a draft constrained to the matched facts. `feedback` fills the previous-feedback slot.
SummaryDraft enrich(const WriterContext& ctx, Gateway& gw, const std::string& feedback = {});

ReviewReport review(const SummaryDraft& draft, const WriterContext& ctx, Gateway& gw);

/// True iff any category exceeds its budget or the total exceeds the overall budget.
bool needs_revision(const ReviewReport& report) noexcept;

struct RevisionOutcome {
    SummaryDraft draft;
    ReviewReport final_report;
    /// Reports produced by this call, one per cycle.
    std::vector<ReviewReport> reports;
    int cycles = 0;
    /// The last report still needs revision.
    bool unresolved = false;
};

/// Feedback handed back to the writer: the review feedback followed by its reasoning.
std::string revision_feedback(const ReviewReport& report);

/// Up to `max_cycles` regenerate-then-review rounds, stopping at the first clean review.
RevisionOutcome revise(const SummaryDraft& draft, const ReviewReport& report, const WriterContext& ctx, Gateway& gw,
                       int max_cycles = 1);

inline constexpr std::size_t kSummaryTokenLimit = 250;

struct RefineOutcome {
    std::string text;
    bool reprompted = false;
    bool truncated = false;
};

/// Polishes the summary. Output over `limit` estimated tokens is sent back once for shortening,
/// then cut at the last sentence boundary that fits.
RefineOutcome refine(const std::string& draft, Gateway& gw, const TokenEstimator& est,
                     std::size_t limit = kSummaryTokenLimit, int max_repairs = kDefaultMaxRepairs);

/// Longest sentence prefix within `limit`; falls back to a word prefix when even the first sentence is too long.
std::string truncate_to_sentences(const std::string& text, std::size_t limit, const TokenEstimator& est);

} // namespace factsum
