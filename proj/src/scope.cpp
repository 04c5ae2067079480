#include "factsum/scope.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "factsum/fact_stage.hpp"
#include "factsum/outline_stage.hpp"
#include "factsum/prompts.hpp"
#include "factsum/text.hpp"

namespace factsum {

std::string_view to_string(TracePhase phase) noexcept {
    switch (phase) {
    case TracePhase::Planning: return "planning";
    case TracePhase::InitialAssessment: return "initial_assessment";
    case TracePhase::Controlling: return "controlling";
    case TracePhase::Evaluation: return "evaluation";
    }
    return "planning";
}

TracePhase phase_of(int q) {
    if (q < 1 || q > kTraceQuestions) throw Error(ErrorKind::InvalidValue, "trace question " + std::to_string(q) + " outside 1..9");
    if (q <= 3) return TracePhase::Planning;
    if (q <= 7) return TracePhase::InitialAssessment;
    if (q == 8) return TracePhase::Controlling;
    return TracePhase::Evaluation;
}

ReasoningTrace ReasoningTrace::create(std::vector<TraceAnswer> answers) {
    if (answers.size() != kTraceQuestions)
        throw Error(ErrorKind::InvalidValue,
                    "reasoning trace needs 9 answers, got " + std::to_string(answers.size()));
    for (int q = 1; q <= kTraceQuestions; ++q) {
        const auto& a = answers[static_cast<std::size_t>(q - 1)];
        if (a.question != q)
            throw Error(ErrorKind::InvalidValue, "answer " + std::to_string(q) + " is for question (" +
                                                     std::to_string(a.question) + ")");
        if (a.phase != phase_of(q))
            throw Error(ErrorKind::InvalidValue, "question (" + std::to_string(q) + ") has the wrong phase");
        if (text::trim(a.answer).empty())
            throw Error(ErrorKind::InvalidValue, "question (" + std::to_string(q) + ") has an empty answer");
    }
    return ReasoningTrace{std::move(answers)};
}

json to_json(const ReasoningTrace& trace) {
    json answers = json::array();
    for (const auto& a : trace.answers)
        answers.push_back(json{{"question_id", "Q" + std::to_string(a.question)},
                               {"phase", to_string(a.phase)},
                               {"answer", a.answer}});
    return json{{"answers", std::move(answers)}};
}

namespace {

// Question number of a "(n)" marker opening the line, after list or emphasis decoration.
std::optional<std::pair<int, std::size_t>> marker(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && (std::isspace(static_cast<unsigned char>(line[i])) || line[i] == '*' || line[i] == '#' ||
                               line[i] == '-' || line[i] == '>'))
        ++i;
    if (i + 2 >= line.size() || line[i] != '(') return std::nullopt;
    std::size_t j = i + 1;
    int n = 0;
    while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j])) && j - i <= 2) n = n * 10 + (line[j++] - '0');
    if (j == i + 1 || j >= line.size() || line[j] != ')') return std::nullopt;
    return std::make_pair(n, j + 1);
}

std::string clean_answer(std::string_view s) {
    std::string t = text::trim(s);
    std::size_t i = 0;
    while (i < t.size() && (t[i] == '*' || t[i] == ':')) ++i;
    return text::trim(std::string_view(t).substr(i));
}

} // namespace

ReasoningTrace parse_trace(std::string_view part1) {
    std::vector<TraceAnswer> answers;
    std::string current;
    int expected = 1;
    auto close = [&] {
        if (!answers.empty()) answers.back().answer = clean_answer(current);
        current.clear();
    };
    std::size_t pos = 0;
    while (pos <= part1.size()) {
        auto nl = part1.find('\n', pos);
        if (nl == std::string_view::npos) nl = part1.size();
        const auto line = part1.substr(pos, nl - pos);
        pos = nl + 1;
        auto m = marker(line);
        if (m && m->first >= expected && m->first <= kTraceQuestions) {
            if (m->first > expected)
                throw Error(ErrorKind::InvalidValue, "reasoning trace is missing question (" + std::to_string(expected) + ")");
            close();
            answers.push_back(TraceAnswer{expected, {}, phase_of(expected)});
            current = std::string(line.substr(m->second));
            ++expected;
            continue;
        }
        if (!answers.empty()) {
            current += '\n';
            current += line;
        }
    }
    close();
    if (expected <= kTraceQuestions)
        throw Error(ErrorKind::InvalidValue, "reasoning trace is missing question (" + std::to_string(expected) + ")");
    for (const auto& a : answers)
        if (a.answer.empty())
            throw Error(ErrorKind::InvalidValue, "question (" + std::to_string(a.question) + ") has an empty answer");
    return ReasoningTrace::create(std::move(answers));
}

PersonaSelection parse_selection(const json& list, const std::vector<Fact>& facts) {
    if (!list.is_array()) throw Error(ErrorKind::InvalidValue, "selection must be a JSON list");
    std::map<std::uint32_t, const Fact*> by_id;
    for (const auto& f : facts) by_id.emplace(f.id().value, &f);

    PersonaSelection out;
    std::set<std::uint32_t> seen;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& item = list[i];
        const std::string where = "selection item " + std::to_string(i);
        if (!item.is_object() || !item.contains("fact") || !item["fact"].is_object())
            throw Error(ErrorKind::MissingField, where + " needs a 'fact' object");
        const auto& fact = item["fact"];
        if (!fact.contains("id") || !fact["id"].is_number_integer() || fact["id"].get<long long>() < 0)
            throw Error(ErrorKind::MissingField, where + " needs an integer fact id");
        if (!fact.contains("fact") || !fact["fact"].is_string())
            throw Error(ErrorKind::MissingField, where + " needs the fact text");
        if (!item.contains("certainty_score") || !item["certainty_score"].is_number_integer())
            throw Error(ErrorKind::MissingField, where + " needs an integer certainty_score");
        const int certainty = item["certainty_score"].get<int>();
        if (certainty < kCertaintyMin || certainty > kCertaintyMax)
            throw Error(ErrorKind::InvalidValue, where + " has certainty_score " + std::to_string(certainty) + " outside [0,100]");

        const auto id = fact["id"].get<std::uint32_t>();
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw Error(ErrorKind::UnknownFactReference, where + " names fact " + std::to_string(id) + ", which does not exist");
        if (text::trim(fact["fact"].get<std::string>()) != it->second->claim())
            throw Error(ErrorKind::UnknownFactReference,
                        where + " does not copy the text of fact " + std::to_string(id) + " verbatim");
        if (!seen.insert(id).second) {
            spdlog::warn("[scope_select] fact #{} selected twice; keeping the first entry", id);
            continue;
        }
        if (certainty < kSelectionCertaintyMin) {
            spdlog::info("[scope_select] dropping fact #{} with certainty {} < {}", id, certainty, kSelectionCertaintyMin);
            out.dropped.push_back(SelectedFact{FactId{id}, certainty});
            continue;
        }
        out.kept.push_back(SelectedFact{FactId{id}, certainty});
    }
    std::stable_sort(out.kept.begin(), out.kept.end(),
                     [](const SelectedFact& a, const SelectedFact& b) { return a.certainty > b.certainty; });
    return out;
}

ScopeResponse parse_scope_response(std::string_view text, const std::vector<Fact>& facts) {
    auto fence = text.rfind("```json");
    if (fence == std::string_view::npos) {
        // Bare ``` fence: the opener of the last fenced block.
        const auto closing = text.rfind("```");
        if (closing != std::string_view::npos && closing > 0) fence = text.rfind("```", closing - 1);
    }
    if (fence == std::string_view::npos)
        throw Error(ErrorKind::InvalidValue, "Part 2 must be a ```json fenced list after the reasoning");
    auto payload = extract_json_payload(text.substr(fence));
    if (!payload) throw Error(ErrorKind::InvalidValue, "Part 2 is not valid JSON");
    ScopeResponse out{parse_trace(text.substr(0, fence)), parse_selection(*payload, facts)};
    return out;
}

ScopeResponse explore_and_select(const ReaderProfile& profile, const std::vector<Fact>& facts, Gateway& gw,
                                 int max_repairs) {
    if (facts.empty()) throw Error(ErrorKind::InvalidValue, "fact selection needs at least one fact");
    std::string valid_ids;
    for (const auto& f : facts) valid_ids += (valid_ids.empty() ? "" : ", ") + std::to_string(f.id().value);

    const auto prompt = prompts::render_asset(
        "scope_select", {{"character_profile", render_character_sheet(profile)}, {"atomic_facts", render_fact_list(facts)}});
    ScopeResponse accepted;
    auto check = [&](const std::string& text) -> std::optional<std::string> {
        try {
            accepted = parse_scope_response(text, facts);
        } catch (const Error& e) {
            std::string msg = std::string(to_string(e.kind())) + ": " + e.detail();
            if (e.kind() == ErrorKind::UnknownFactReference) msg += ". Valid fact ids: " + valid_ids;
            return msg;
        }
        return std::nullopt;
    };
    complete_validated(gw, gw.request("scope_select", prompt), max_repairs, check);
    return accepted;
}

ReaderProfile infer_profile(const std::vector<TranscriptTurn>& turns, Gateway& gw, int max_repairs) {
    const auto prompt = prompts::render_asset("infer_profile", {{"transcript", render_turns(turns)}});
    auto result = complete_json(gw, gw.request("infer_profile", prompt), SchemaId::ReaderProfile, max_repairs);
    return validate_profile(result.value, ProfileOrigin::Inferred);
}

std::vector<ScoredFeature> score_facts_persona(const std::vector<Fact>& facts, const ReaderProfile& profile,
                                               Gateway& gw, int max_repairs, std::size_t batch_size) {
    const std::string sheet = render_character_sheet(profile);
    auto prompt = [&](const std::string& list) {
        return prompts::render_asset("persona_score", {{"character_sheet", sheet}, {"atomic_facts", list}});
    };
    return score_batched(facts, gw, "persona_score", prompt, SchemaId::PersonaFeatures, max_repairs, batch_size);
}

std::string_view to_string(PersonaMode mode) noexcept {
    switch (mode) {
    case PersonaMode::General: return "general";
    case PersonaMode::TailorTo: return "tailor_to";
    case PersonaMode::Roleplay: return "roleplay";
    case PersonaMode::Scope: return "scope";
    }
    return "general";
}

std::optional<PersonaMode> parse_persona_mode(std::string_view token) noexcept {
    for (auto m : {PersonaMode::General, PersonaMode::TailorTo, PersonaMode::Roleplay, PersonaMode::Scope})
        if (to_string(m) == token) return m;
    return std::nullopt;
}

std::string baseline_prompt(PersonaMode mode, const ReaderProfile& profile, const std::vector<TranscriptTurn>& turns) {
    if (mode != PersonaMode::TailorTo && mode != PersonaMode::Roleplay)
        throw Error(ErrorKind::InvalidValue, "baseline summaries exist for tailor_to and roleplay only");
    return prompts::render_asset(mode == PersonaMode::TailorTo ? "tailor_to" : "roleplay",
                                 {{"character_sheet", render_character_sheet(profile)}, {"transcript", render_turns(turns)}});
}

std::string baseline_summary(PersonaMode mode, const ReaderProfile& profile, const std::vector<TranscriptTurn>& turns,
                             Gateway& gw, int max_repairs) {
    const auto prompt = baseline_prompt(mode, profile, turns);
    auto check = [](const std::string& t) -> std::optional<std::string> {
        if (text::trim(t).empty()) return std::string("response is empty; return the summary text");
        return std::nullopt;
    };
    auto result = complete_validated(gw, gw.request(std::string(to_string(mode)), prompt), max_repairs, check);
    return text::trim(result.text);
}

} // namespace factsum
