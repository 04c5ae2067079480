#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "factsum/core.hpp"
#include "factsum/gateway.hpp"
#include "factsum/memory_bank.hpp"

namespace factsum {

struct ScoredFeature {
    FactId fact_id;
    FunctionLabel label = FunctionLabel::Context;
    int relevance = kRelevanceMin;
    std::string reasoning;
    int certainty = kCertaintyMin;
    std::string feature;
    /// Persona path only.
    std::optional<int> alignment;
    std::string alignment_explanation;

    /// Score that tier and retention rules read: the rounded mean of relevance and alignment on
    /// the persona path, plain relevance otherwise.
    int tier_score() const noexcept;

    bool operator==(const ScoredFeature&) const = default;
};

/// std::lround((importance + alignment) / 2.0).
int combined_score(int importance, int alignment) noexcept;

json to_json(const ScoredFeature& feature);

enum class PolicyProfile { Default, Low, High };

std::string_view to_string(PolicyProfile profile) noexcept;
/// "default", "low", "high".
std::optional<PolicyProfile> parse_policy_profile(std::string_view token) noexcept;

struct RetentionPolicy {
    int keep_min = 6;
    int anchor_min = 8;
    PolicyProfile profile = PolicyProfile::Default;

    /// Default {6,8}, Low {3,6}, High {8,10}.
    static RetentionPolicy for_profile(PolicyProfile profile) noexcept;
    /// Throws InvalidValue unless 1 <= keep_min <= anchor_min <= 10.
    void validate() const;
    TierRule tier_rule() const noexcept { return TierRule{keep_min, anchor_min}; }
};

inline constexpr std::size_t kScoreBatchSize = 40;

/// One feature per input fact, returned in input order. Facts are sent in batches of at most
/// `batch_size`; a feature count or id set that does not match its batch is repaired.
std::vector<ScoredFeature> score_facts(const std::vector<Fact>& facts, Gateway& gw,
                                       int max_repairs = kDefaultMaxRepairs, std::size_t batch_size = kScoreBatchSize);

/// Builds the user prompt for one batch from its rendered fact list.
using ScorePromptFn = std::function<std::string(const std::string& fact_list)>;

/// Shared batching, validation and reordering behind `score_facts` and persona scoring.
/// `schema` is ScoredFeatures or PersonaFeatures. Throws InvalidValue on empty input.
std::vector<ScoredFeature> score_batched(const std::vector<Fact>& facts, Gateway& gw, const std::string& stage_tag,
                                         const ScorePromptFn& prompt, SchemaId schema, int max_repairs,
                                         std::size_t batch_size);

/// Features whose tier score is at least keep_min, input order preserved.
std::vector<ScoredFeature> retain(const std::vector<ScoredFeature>& features, const RetentionPolicy& policy);

/// retained / total; 0 when total is 0.
double retention_rate(std::size_t retained, std::size_t total) noexcept;

/// Writes label, relevance and certainty of each feature onto its bank fact.
void record_scores(MemoryBank& bank, const std::vector<ScoredFeature>& features);

struct ConsolidationGroup {
    FactId kept;
    std::vector<FactId> absorbed;
};

struct ConsolidationResult {
    std::vector<ScoredFeature> features;
    std::vector<ConsolidationGroup> groups;
};

/// Partitions features by (label, tier score) and folds overlapping facts inside each cell into
/// the earliest member. Overlap is claim similarity >= the bank threshold, or model-identified
/// when `use_llm` (which also synthesizes the context). The kept fact's bank entry receives the
/// consolidated context. `gw` may be null when `use_llm` is false.
ConsolidationResult group_and_consolidate(const std::vector<ScoredFeature>& features, MemoryBank& bank, Gateway* gw,
                                          bool use_llm, int max_repairs = kDefaultMaxRepairs);

} // namespace factsum
