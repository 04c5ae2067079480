#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "factsum/error.hpp"

namespace factsum {

using json = nlohmann::json;

/// Stable per-run fact identity. Stages reference facts by id instead of copying text.
struct FactId {
    std::uint32_t value = 0;
    auto operator<=>(const FactId&) const = default;
};

/// Monotone id source; one per run.
class FactIdAllocator {
public:
    FactId next() noexcept { return FactId{next_++}; }
    /// Ensures later ids are strictly greater than `seen` (used when replaying a bank snapshot).
    void observe(FactId seen) noexcept {
        if (seen.value >= next_) next_ = seen.value + 1;
    }

private:
    std::uint32_t next_ = 1;
};

enum class FunctionLabel { Decision, ActionItem, Insight, Context };

/// Wire tokens used by the scoring prompts: DECISION, ACTION, INSIGHT, CONTEXT.
std::string_view to_wire(FunctionLabel label) noexcept;
/// Accepts exactly the four wire tokens; everything else is rejected.
std::optional<FunctionLabel> parse_label(std::string_view token) noexcept;

inline constexpr int kRelevanceMin = 1;
inline constexpr int kRelevanceMax = 10;
inline constexpr int kCertaintyMin = 0;
inline constexpr int kCertaintyMax = 100;

/// Statement-context tuple: a self-contained claim plus the minimal context needed to read it.
///
/// Immutable after construction. Scoring fields start unassigned and are set through the
/// `with_*` copies, which re-check the ranges.
class Fact {
public:
    /// Trims both texts. Throws EmptyClaim / EmptyContext.
    static Fact create(FactId id, std::string_view claim, std::string_view context, std::size_t source_chunk);

    FactId id() const noexcept { return id_; }
    const std::string& claim() const noexcept { return claim_; }
    const std::string& context() const noexcept { return context_; }
    std::size_t source_chunk() const noexcept { return source_chunk_; }
    const std::optional<FunctionLabel>& label() const noexcept { return label_; }
    const std::optional<int>& relevance() const noexcept { return relevance_; }
    const std::optional<int>& certainty() const noexcept { return certainty_; }

    Fact with_text(std::string_view claim, std::string_view context) const;
    Fact with_context(std::string_view context) const;
    Fact with_label(std::optional<FunctionLabel> label) const;
    /// Throws InvalidValue outside [1,10].
    Fact with_relevance(std::optional<int> relevance) const;
    /// Throws InvalidValue outside [0,100].
    Fact with_certainty(std::optional<int> certainty) const;

    bool operator==(const Fact&) const = default;

private:
    Fact() = default;

    FactId id_{};
    std::string claim_;
    std::string context_;
    std::size_t source_chunk_ = 0;
    std::optional<FunctionLabel> label_;
    std::optional<int> relevance_;
    std::optional<int> certainty_;
};

/// Schema enforcement over a model-emitted fact record {"fact", "context"}; unknown keys are ignored.
/// Throws MissingField, EmptyClaim or EmptyContext; the message names the field.
Fact validate_fact(const json& raw, FactId id, std::size_t source_chunk);

/// Canonical record {"fact", "context"}.
json to_record(const Fact& fact);
/// Full form used by bank snapshots.
json to_json(const Fact& fact);
Fact fact_from_json(const json& j);

struct TranscriptTurn {
    std::string speaker;
    std::string utterance;
    std::size_t ordinal = 0;

    bool operator==(const TranscriptTurn&) const = default;
};

/// Throws InvalidValue if ordinals are not 0,1,2,... in order.
void check_contiguous(const std::vector<TranscriptTurn>& turns);

enum class ProfileOrigin { Provided, Inferred };

struct ReaderProfile {
    std::string role;
    std::string expertise;
    std::string goals;
    std::string interests;
    std::optional<std::string> constraints;
    ProfileOrigin origin = ProfileOrigin::Provided;

    bool operator==(const ReaderProfile&) const = default;
};

/// Parses {"role","expertise","goals","interests","constraints"?}. Role and goals must be non-empty;
/// inferred profiles additionally require expertise and interests.
ReaderProfile validate_profile(const json& raw, ProfileOrigin origin);
/// Record without origin; origin never reaches a prompt.
json to_record(const ReaderProfile& profile);

// ---------------------------------------------------------------------------
// Outline

/// Thresholds that decide which facts may anchor or support an outline point.
struct TierRule {
    int keep_min = 6;
    int anchor_min = 8;

    bool is_anchor(int score, std::optional<FunctionLabel> label) const noexcept {
        return score >= anchor_min || label == FunctionLabel::Decision;
    }
    bool is_support(int score) const noexcept { return score >= keep_min && score < anchor_min; }
};

struct TierInfo {
    int score = 0;
    std::optional<FunctionLabel> label;
};
using TierLookup = std::map<FactId, TierInfo>;

enum class SectionKind { Overview, KeyDecisions, MainDiscussion, NextSteps };
inline constexpr std::array<SectionKind, 4> kSectionOrder = {
    SectionKind::Overview, SectionKind::KeyDecisions, SectionKind::MainDiscussion, SectionKind::NextSteps};

std::string_view to_wire(SectionKind kind) noexcept;
std::optional<SectionKind> parse_section(std::string_view token) noexcept;

struct OutlinePoint {
    std::string text;
    std::vector<FactId> anchor_facts;
    std::vector<FactId> support_facts;

    bool operator==(const OutlinePoint&) const = default;
};

/// Returns one message per reference that breaks the tier rule or names an unknown fact.
std::vector<std::string> tier_problems(const OutlinePoint& point, const TierLookup& lookup, const TierRule& rule);

/// Throws TierViolation when `tier_problems` is non-empty.
OutlinePoint make_outline_point(std::string text, std::vector<FactId> anchors, std::vector<FactId> support,
                                const TierLookup& lookup, const TierRule& rule = {});

struct OutlineSection {
    SectionKind kind = SectionKind::Overview;
    std::vector<OutlinePoint> points;

    bool operator==(const OutlineSection&) const = default;
};

struct Outline {
    std::vector<OutlineSection> sections;

    /// Throws InvalidValue when a kind repeats or appears out of order.
    static Outline create(std::vector<OutlineSection> sections);

    std::size_t point_count() const noexcept;
    bool operator==(const Outline&) const = default;
};

json to_json(const Outline& outline);
/// Structural parse only; tier checks live in the outline stage.
Outline outline_from_json(const json& j);

// ---------------------------------------------------------------------------
// Quality review

inline constexpr int kOutlineAdherenceBudget = 4;
inline constexpr int kFactualAccuracyBudget = 3;
inline constexpr int kInformationCoverageBudget = 2;
inline constexpr int kFormattingBudget = 1;
inline constexpr int kTotalErrorBudget = 4;

struct ReviewReport {
    int outline_adherence = 0;
    int factual_accuracy = 0;
    int information_coverage = 0;
    int formatting = 0;
    std::string feedback;
    std::string reasoning_trace;
    /// Advisory only; the revision trigger uses the error points.
    std::optional<int> confidence_score;

    /// Throws InvalidValue on negative counts or confidence outside [0,100].
    static ReviewReport create(int outline_adherence, int factual_accuracy, int information_coverage, int formatting,
                               std::string feedback, std::string reasoning_trace,
                               std::optional<int> confidence_score = std::nullopt);

    int total() const noexcept { return outline_adherence + factual_accuracy + information_coverage + formatting; }
    bool operator==(const ReviewReport&) const = default;
};

json to_json(const ReviewReport& report);

// ---------------------------------------------------------------------------
// Personalization evaluation

enum class PMesaDimension {
    Factuality,
    Completeness,
    Relevance,
    GoalAlignment,
    PriorityStructuring,
    KnowledgeLevelFit,
    ContextualFraming,
};

inline constexpr std::array<PMesaDimension, 7> kAllDimensions = {
    PMesaDimension::Factuality,          PMesaDimension::Completeness,      PMesaDimension::Relevance,
    PMesaDimension::GoalAlignment,       PMesaDimension::PriorityStructuring, PMesaDimension::KnowledgeLevelFit,
    PMesaDimension::ContextualFraming,
};

/// snake_case names used in reports and label CSVs.
std::string_view to_wire(PMesaDimension dim) noexcept;
std::optional<PMesaDimension> parse_dimension(std::string_view token) noexcept;
std::string_view display_name(PMesaDimension dim) noexcept;

inline constexpr int kSeverityMin = 0;
inline constexpr int kSeverityMax = 5;

struct ErrorInstance {
    std::string description;
    int severity = 0;

    bool operator==(const ErrorInstance&) const = default;
};

struct DimensionScore {
    PMesaDimension dimension = PMesaDimension::Factuality;
    std::vector<ErrorInstance> instances;
    int impact = 0;

    /// impact = max instance severity, 0 when there are none. Throws InvalidValue on severities outside [0,5].
    static DimensionScore aggregate(PMesaDimension dimension, std::vector<ErrorInstance> instances);

    bool operator==(const DimensionScore&) const = default;
};

json to_json(const DimensionScore& score);

} // namespace factsum
