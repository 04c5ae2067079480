#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factsum/core.hpp"
#include "factsum/gateway.hpp"
#include "factsum/note_stage.hpp"

namespace factsum {

enum class TracePhase { Planning, InitialAssessment, Controlling, Evaluation };

std::string_view to_string(TracePhase phase) noexcept;

inline constexpr int kTraceQuestions = 9;

/// Q1-Q3 Planning, Q4-Q7 InitialAssessment, Q8 Controlling, Q9 Evaluation. Throws InvalidValue outside 1..9.
TracePhase phase_of(int question);

struct TraceAnswer {
    int question = 1;
    std::string answer;
    TracePhase phase = TracePhase::Planning;

    bool operator==(const TraceAnswer&) const = default;
};

struct ReasoningTrace {
    std::vector<TraceAnswer> answers;

    /// Throws InvalidValue unless there are exactly nine non-empty answers for Q1..Q9 in order with matching phases.
    static ReasoningTrace create(std::vector<TraceAnswer> answers);

    bool operator==(const ReasoningTrace&) const = default;
};

json to_json(const ReasoningTrace& trace);

/// Reads "(1)" .. "(9)" markers, each at the start of a line, from the reasoning part of a
/// response. Throws InvalidValue naming the first missing or empty answer.
ReasoningTrace parse_trace(std::string_view part1);

inline constexpr int kSelectionCertaintyMin = 40;

struct SelectedFact {
    FactId id;
    int certainty = 0;

    bool operator==(const SelectedFact&) const = default;
};

struct PersonaSelection {
    /// Certainty >= 40, descending by certainty; ties keep response order.
    std::vector<SelectedFact> kept;
    /// Entries dropped for certainty below 40, in response order.
    std::vector<SelectedFact> dropped;

    bool operator==(const PersonaSelection&) const = default;
};

/// Validates the selection list against `facts`: each entry must name an existing id and copy its
/// claim verbatim (UnknownFactReference otherwise). Certainties below 40 are dropped and logged;
/// repeated ids keep their first entry.
PersonaSelection parse_selection(const json& list, const std::vector<Fact>& facts);

struct ScopeResponse {
    ReasoningTrace trace;
    PersonaSelection selection;
};

/// Splits a two-part response into the trace and the fenced JSON selection.
ScopeResponse parse_scope_response(std::string_view text, const std::vector<Fact>& facts);

/// Runs the nine-question exploration and fact selection. Incomplete traces and unknown fact
/// references are repaired; the repair message lists the valid ids.
ScopeResponse explore_and_select(const ReaderProfile& profile, const std::vector<Fact>& facts, Gateway& gw,
                                 int max_repairs = kDefaultMaxRepairs);

/// Infers a reader profile from the transcript; origin is Inferred.
ReaderProfile infer_profile(const std::vector<TranscriptTurn>& turns, Gateway& gw,
                            int max_repairs = kDefaultMaxRepairs);

/// Persona-aware scoring: importance plus alignment per fact, input order.
std::vector<ScoredFeature> score_facts_persona(const std::vector<Fact>& facts, const ReaderProfile& profile,
                                               Gateway& gw, int max_repairs = kDefaultMaxRepairs,
                                               std::size_t batch_size = kScoreBatchSize);

enum class PersonaMode { General, TailorTo, Roleplay, Scope };

std::string_view to_string(PersonaMode mode) noexcept;
/// "general", "tailor_to", "roleplay", "scope".
std::optional<PersonaMode> parse_persona_mode(std::string_view token) noexcept;

/// Single-prompt persona summary from the full transcript (TailorTo or Roleplay).
std::string baseline_summary(PersonaMode mode, const ReaderProfile& profile, const std::vector<TranscriptTurn>& turns,
                             Gateway& gw, int max_repairs = kDefaultMaxRepairs);

/// The user prompt `baseline_summary` sends.
std::string baseline_prompt(PersonaMode mode, const ReaderProfile& profile, const std::vector<TranscriptTurn>& turns);

} // namespace factsum
