#include "factsum/core.hpp"

#include <algorithm>
#include <set>

#include "factsum/text.hpp"

namespace factsum {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::EmptyClaim: return "EmptyClaim";
    case ErrorKind::EmptyContext: return "EmptyContext";
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::InvalidValue: return "InvalidValue";
    case ErrorKind::TurnExceedsBudget: return "TurnExceedsBudget";
    case ErrorKind::TransportError: return "TransportError";
    case ErrorKind::MockExhausted: return "MockExhausted";
    case ErrorKind::MockScriptMismatch: return "MockScriptMismatch";
    case ErrorKind::RepairExhausted: return "RepairExhausted";
    case ErrorKind::UnknownFactReference: return "UnknownFactReference";
    case ErrorKind::CountMismatch: return "CountMismatch";
    case ErrorKind::OutlineEmpty: return "OutlineEmpty";
    case ErrorKind::TierViolation: return "TierViolation";
    case ErrorKind::SelectionEmpty: return "SelectionEmpty";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::Undefined: return "Undefined";
    case ErrorKind::InputError: return "InputError";
    }
    return "Unknown";
}

std::string_view to_wire(FunctionLabel label) noexcept {
    switch (label) {
    case FunctionLabel::Decision: return "DECISION";
    case FunctionLabel::ActionItem: return "ACTION";
    case FunctionLabel::Insight: return "INSIGHT";
    case FunctionLabel::Context: return "CONTEXT";
    }
    return "CONTEXT";
}

std::optional<FunctionLabel> parse_label(std::string_view token) noexcept {
    if (token == "DECISION") return FunctionLabel::Decision;
    if (token == "ACTION") return FunctionLabel::ActionItem;
    if (token == "INSIGHT") return FunctionLabel::Insight;
    if (token == "CONTEXT") return FunctionLabel::Context;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Fact

Fact Fact::create(FactId id, std::string_view claim, std::string_view context, std::size_t source_chunk) {
    Fact f;
    f.id_ = id;
    f.claim_ = text::trim(claim);
    f.context_ = text::trim(context);
    f.source_chunk_ = source_chunk;
    if (f.claim_.empty()) throw Error(ErrorKind::EmptyClaim, "field 'fact' is empty");
    if (f.context_.empty()) throw Error(ErrorKind::EmptyContext, "field 'context' is empty");
    return f;
}

Fact Fact::with_text(std::string_view claim, std::string_view context) const {
    Fact f = create(id_, claim, context, source_chunk_);
    f.label_ = label_;
    f.relevance_ = relevance_;
    f.certainty_ = certainty_;
    return f;
}

Fact Fact::with_context(std::string_view context) const { return with_text(claim_, context); }

Fact Fact::with_label(std::optional<FunctionLabel> label) const {
    Fact f = *this;
    f.label_ = label;
    return f;
}

Fact Fact::with_relevance(std::optional<int> relevance) const {
    if (relevance && (*relevance < kRelevanceMin || *relevance > kRelevanceMax))
        throw Error(ErrorKind::InvalidValue, "relevance " + std::to_string(*relevance) + " outside [1,10]");
    Fact f = *this;
    f.relevance_ = relevance;
    return f;
}

Fact Fact::with_certainty(std::optional<int> certainty) const {
    if (certainty && (*certainty < kCertaintyMin || *certainty > kCertaintyMax))
        throw Error(ErrorKind::InvalidValue, "certainty " + std::to_string(*certainty) + " outside [0,100]");
    Fact f = *this;
    f.certainty_ = certainty;
    return f;
}

namespace {

const std::string& require_string(const json& raw, const char* field) {
    if (!raw.is_object()) throw Error(ErrorKind::MissingField, "record is not an object; expected field '" + std::string(field) + "'");
    auto it = raw.find(field);
    if (it == raw.end()) throw Error(ErrorKind::MissingField, std::string("field '") + field + "' is missing");
    if (!it->is_string()) throw Error(ErrorKind::MissingField, std::string("field '") + field + "' is not a string");
    return it->get_ref<const std::string&>();
}

std::optional<std::string> optional_string(const json& raw, const char* field) {
    auto it = raw.find(field);
    if (it == raw.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw Error(ErrorKind::InvalidValue, std::string("field '") + field + "' is not a string");
    return it->get<std::string>();
}

} // namespace

Fact validate_fact(const json& raw, FactId id, std::size_t source_chunk) {
    const auto& claim = require_string(raw, "fact");
    const auto& context = require_string(raw, "context");
    return Fact::create(id, claim, context, source_chunk);
}

json to_record(const Fact& fact) { return json{{"fact", fact.claim()}, {"context", fact.context()}}; }

json to_json(const Fact& fact) {
    json j{{"id", fact.id().value},
           {"fact", fact.claim()},
           {"context", fact.context()},
           {"source_chunk", fact.source_chunk()},
           {"label", nullptr},
           {"relevance", nullptr},
           {"certainty", nullptr}};
    if (fact.label()) j["label"] = to_wire(*fact.label());
    if (fact.relevance()) j["relevance"] = *fact.relevance();
    if (fact.certainty()) j["certainty"] = *fact.certainty();
    return j;
}

Fact fact_from_json(const json& j) {
    if (!j.contains("id") || !j["id"].is_number_unsigned())
        throw Error(ErrorKind::MissingField, "field 'id' is missing or not an unsigned integer");
    if (!j.contains("source_chunk") || !j["source_chunk"].is_number_unsigned())
        throw Error(ErrorKind::MissingField, "field 'source_chunk' is missing or not an unsigned integer");
    Fact f = validate_fact(j, FactId{j["id"].get<std::uint32_t>()}, j["source_chunk"].get<std::size_t>());
    if (auto label = optional_string(j, "label")) {
        auto parsed = parse_label(*label);
        if (!parsed) throw Error(ErrorKind::InvalidValue, "unknown label '" + *label + "'");
        f = f.with_label(parsed);
    }
    if (j.contains("relevance") && !j["relevance"].is_null()) f = f.with_relevance(j["relevance"].get<int>());
    if (j.contains("certainty") && !j["certainty"].is_null()) f = f.with_certainty(j["certainty"].get<int>());
    return f;
}

void check_contiguous(const std::vector<TranscriptTurn>& turns) {
    for (std::size_t i = 0; i < turns.size(); ++i) {
        if (turns[i].ordinal != i)
            throw Error(ErrorKind::InvalidValue,
                        "turn ordinal " + std::to_string(turns[i].ordinal) + " at position " + std::to_string(i));
    }
}

// ---------------------------------------------------------------------------
// ReaderProfile

ReaderProfile validate_profile(const json& raw, ProfileOrigin origin) {
    if (!raw.is_object()) throw Error(ErrorKind::InvalidValue, "profile is not a JSON object");
    ReaderProfile p;
    p.origin = origin;
    auto field = [&](const char* name, bool required) {
        auto value = optional_string(raw, name);
        std::string v = value ? text::trim(*value) : std::string{};
        if (required && v.empty()) {
            if (!value) throw Error(ErrorKind::MissingField, std::string("profile field '") + name + "' is missing");
            throw Error(ErrorKind::InvalidValue, std::string("profile field '") + name + "' is empty");
        }
        return v;
    };
    const bool inferred = origin == ProfileOrigin::Inferred;
    p.role = field("role", true);
    p.expertise = field("expertise", inferred);
    p.goals = field("goals", true);
    p.interests = field("interests", inferred);
    if (auto c = optional_string(raw, "constraints")) {
        auto t = text::trim(*c);
        if (!t.empty()) p.constraints = std::move(t);
    }
    return p;
}

json to_record(const ReaderProfile& profile) {
    json j{{"role", profile.role},
           {"expertise", profile.expertise},
           {"goals", profile.goals},
           {"interests", profile.interests}};
    if (profile.constraints) j["constraints"] = *profile.constraints;
    return j;
}

// ---------------------------------------------------------------------------
// Outline

std::string_view to_wire(SectionKind kind) noexcept {
    switch (kind) {
    case SectionKind::Overview: return "overview";
    case SectionKind::KeyDecisions: return "key_decisions";
    case SectionKind::MainDiscussion: return "main_discussion";
    case SectionKind::NextSteps: return "next_steps";
    }
    return "overview";
}

std::optional<SectionKind> parse_section(std::string_view token) noexcept {
    for (auto kind : kSectionOrder)
        if (to_wire(kind) == token) return kind;
    return std::nullopt;
}

std::vector<std::string> tier_problems(const OutlinePoint& point, const TierLookup& lookup, const TierRule& rule) {
    std::vector<std::string> problems;
    auto name = [&](FactId id) { return "fact " + std::to_string(id.value); };
    for (FactId id : point.anchor_facts) {
        auto it = lookup.find(id);
        if (it == lookup.end()) {
            problems.push_back("anchor " + name(id) + " is not a known feature");
        } else if (!rule.is_anchor(it->second.score, it->second.label)) {
            problems.push_back("anchor " + name(id) + " has score " + std::to_string(it->second.score) +
                               " below " + std::to_string(rule.anchor_min) + " and is not a DECISION");
        }
    }
    for (FactId id : point.support_facts) {
        auto it = lookup.find(id);
        if (it == lookup.end()) {
            problems.push_back("support " + name(id) + " is not a known feature");
        } else if (!rule.is_support(it->second.score)) {
            problems.push_back("support " + name(id) + " has score " + std::to_string(it->second.score) +
                               " outside [" + std::to_string(rule.keep_min) + "," + std::to_string(rule.anchor_min) +
                               ")");
        }
    }
    return problems;
}

OutlinePoint make_outline_point(std::string text, std::vector<FactId> anchors, std::vector<FactId> support,
                                const TierLookup& lookup, const TierRule& rule) {
    OutlinePoint p{std::move(text), std::move(anchors), std::move(support)};
    auto problems = tier_problems(p, lookup, rule);
    if (!problems.empty()) throw Error(ErrorKind::TierViolation, text::join(problems, "; "));
    return p;
}

Outline Outline::create(std::vector<OutlineSection> sections) {
    int last = -1;
    for (const auto& s : sections) {
        const int rank = static_cast<int>(s.kind);
        if (rank <= last)
            throw Error(ErrorKind::InvalidValue,
                        "section '" + std::string(to_wire(s.kind)) + "' repeats or is out of order");
        last = rank;
    }
    return Outline{std::move(sections)};
}

std::size_t Outline::point_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sections) n += s.points.size();
    return n;
}

namespace {

json ids_to_json(const std::vector<FactId>& ids) {
    json arr = json::array();
    for (auto id : ids) arr.push_back(id.value);
    return arr;
}

std::vector<FactId> ids_from_json(const json& j, const std::string& where) {
    if (!j.is_array()) throw Error(ErrorKind::InvalidValue, where + " is not an array of fact ids");
    std::vector<FactId> ids;
    for (const auto& v : j) {
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw Error(ErrorKind::InvalidValue, where + " contains a non-id value " + v.dump());
        ids.push_back(FactId{v.get<std::uint32_t>()});
    }
    return ids;
}

} // namespace

json to_json(const Outline& outline) {
    json sections = json::array();
    for (const auto& s : outline.sections) {
        json points = json::array();
        for (const auto& p : s.points)
            points.push_back({{"text", p.text}, {"anchors", ids_to_json(p.anchor_facts)}, {"support", ids_to_json(p.support_facts)}});
        sections.push_back({{"kind", to_wire(s.kind)}, {"points", std::move(points)}});
    }
    return json{{"sections", std::move(sections)}};
}

Outline outline_from_json(const json& j) {
    if (!j.is_object() || !j.contains("sections") || !j["sections"].is_array())
        throw Error(ErrorKind::MissingField, "outline must be an object with a 'sections' array");
    std::vector<OutlineSection> sections;
    for (const auto& s : j["sections"]) {
        if (!s.is_object() || !s.contains("kind") || !s["kind"].is_string())
            throw Error(ErrorKind::MissingField, "section without a string 'kind'");
        auto kind = parse_section(s["kind"].get<std::string>());
        if (!kind) throw Error(ErrorKind::InvalidValue, "unknown section kind '" + s["kind"].get<std::string>() + "'");
        if (!s.contains("points") || !s["points"].is_array())
            throw Error(ErrorKind::MissingField, "section '" + std::string(to_wire(*kind)) + "' has no 'points' array");
        OutlineSection section{*kind, {}};
        for (const auto& p : s["points"]) {
            const std::string where = std::string(to_wire(*kind)) + " point " + std::to_string(section.points.size());
            if (!p.is_object() || !p.contains("text") || !p["text"].is_string())
                throw Error(ErrorKind::MissingField, where + " has no string 'text'");
            OutlinePoint point;
            point.text = text::trim(p["text"].get<std::string>());
            if (point.text.empty()) throw Error(ErrorKind::InvalidValue, where + " has empty 'text'");
            point.anchor_facts = ids_from_json(p.value("anchors", json::array()), where + " anchors");
            point.support_facts = ids_from_json(p.value("support", json::array()), where + " support");
            section.points.push_back(std::move(point));
        }
        sections.push_back(std::move(section));
    }
    return Outline::create(std::move(sections));
}

// ---------------------------------------------------------------------------
// ReviewReport

ReviewReport ReviewReport::create(int outline_adherence, int factual_accuracy, int information_coverage,
                                  int formatting, std::string feedback, std::string reasoning_trace,
                                  std::optional<int> confidence_score) {
    if (outline_adherence < 0 || factual_accuracy < 0 || information_coverage < 0 || formatting < 0)
        throw Error(ErrorKind::InvalidValue, "error points must be non-negative");
    if (confidence_score && (*confidence_score < 0 || *confidence_score > 100))
        throw Error(ErrorKind::InvalidValue, "confidence_score outside [0,100]");
    return ReviewReport{outline_adherence, factual_accuracy,        information_coverage, formatting,
                        std::move(feedback), std::move(reasoning_trace), confidence_score};
}

json to_json(const ReviewReport& r) {
    json j{{"outline_adherence", r.outline_adherence},
           {"factual_accuracy", r.factual_accuracy},
           {"information_coverage", r.information_coverage},
           {"formatting", r.formatting},
           {"total", r.total()},
           {"feedback", r.feedback},
           {"reasoning", r.reasoning_trace},
           {"confidence_score", nullptr}};
    if (r.confidence_score) j["confidence_score"] = *r.confidence_score;
    return j;
}

// ---------------------------------------------------------------------------
// P-MESA dimensions

std::string_view to_wire(PMesaDimension dim) noexcept {
    switch (dim) {
    case PMesaDimension::Factuality: return "factuality";
    case PMesaDimension::Completeness: return "completeness";
    case PMesaDimension::Relevance: return "relevance";
    case PMesaDimension::GoalAlignment: return "goal_alignment";
    case PMesaDimension::PriorityStructuring: return "priority_structuring";
    case PMesaDimension::KnowledgeLevelFit: return "knowledge_level_fit";
    case PMesaDimension::ContextualFraming: return "contextual_framing";
    }
    return "factuality";
}

std::optional<PMesaDimension> parse_dimension(std::string_view token) noexcept {
    for (auto d : kAllDimensions)
        if (to_wire(d) == token) return d;
    return std::nullopt;
}

std::string_view display_name(PMesaDimension dim) noexcept {
    switch (dim) {
    case PMesaDimension::Factuality: return "Factuality";
    case PMesaDimension::Completeness: return "Completeness";
    case PMesaDimension::Relevance: return "Relevance";
    case PMesaDimension::GoalAlignment: return "Goal Alignment";
    case PMesaDimension::PriorityStructuring: return "Priority Structuring";
    case PMesaDimension::KnowledgeLevelFit: return "Knowledge-Level Fit";
    case PMesaDimension::ContextualFraming: return "Contextual Framing";
    }
    return "Factuality";
}

DimensionScore DimensionScore::aggregate(PMesaDimension dimension, std::vector<ErrorInstance> instances) {
    int impact = 0;
    for (const auto& inst : instances) {
        if (inst.severity < kSeverityMin || inst.severity > kSeverityMax)
            throw Error(ErrorKind::InvalidValue, "severity " + std::to_string(inst.severity) + " outside [0,5]");
        impact = std::max(impact, inst.severity);
    }
    return DimensionScore{dimension, std::move(instances), impact};
}

json to_json(const DimensionScore& score) {
    json instances = json::array();
    for (const auto& i : score.instances) instances.push_back({{"description", i.description}, {"severity", i.severity}});
    return json{{"dimension", to_wire(score.dimension)}, {"impact", score.impact}, {"instances", std::move(instances)}};
}

} // namespace factsum
