#include "factsum/fact_stage.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "factsum/prompts.hpp"

namespace factsum {

std::string render_fact_list(const std::vector<Fact>& facts) {
    json list = json::array();
    for (const auto& f : facts) list.push_back(json{{"id", f.id().value}, {"fact", f.claim()}, {"context", f.context()}});
    return list.dump(2);
}

namespace {

std::vector<Fact> accept_fact_list(const json& list, std::size_t chunk, FactIdAllocator& ids) {
    std::vector<Fact> out;
    out.reserve(list.size());
    for (const auto& item : list) out.push_back(validate_fact(item, ids.next(), chunk));
    return out;
}

std::string chunk_tag(std::string_view stage, std::size_t index) {
    return std::string(stage) + "[" + std::to_string(index) + "]";
}

} // namespace

std::vector<Fact> extract_facts(const TranscriptChunk& chunk, Gateway& gw, FactIdAllocator& ids, int max_repairs) {
    const auto prompt = prompts::render_asset(
        "extract_facts", {{"previous_chunk_context", chunk.previous_context}, {"chunk", render_turns(chunk.turns)}});
    auto result = complete_json(gw, gw.request(chunk_tag("extract", chunk.index), prompt), SchemaId::FactList, max_repairs);
    return accept_fact_list(result.value, chunk.index, ids);
}

std::string_view to_wire(ActionKind kind) noexcept {
    switch (kind) {
    case ActionKind::RemoveUnsupported: return "remove_unsupported";
    case ActionKind::AddMissedKeyInfo: return "add_missed_key_info";
    case ActionKind::RewriteContextForClarity: return "rewrite_context";
    case ActionKind::TrimContextMinimalism: return "trim_context";
    }
    return "remove_unsupported";
}

std::optional<ActionKind> parse_action_kind(std::string_view token) noexcept {
    for (auto k : {ActionKind::RemoveUnsupported, ActionKind::AddMissedKeyInfo, ActionKind::RewriteContextForClarity,
                   ActionKind::TrimContextMinimalism})
        if (to_wire(k) == token) return k;
    return std::nullopt;
}

json to_json(const VerificationReport& report) {
    json actions = json::array();
    for (const auto& a : report.actions) {
        actions.push_back(json{{"kind", to_wire(a.kind)},
                               {"target", a.target ? json(a.target->value) : json(nullptr)},
                               {"detail", a.detail}});
    }
    return json{{"overall_score", report.overall_score},
                {"feedback", report.feedback},
                {"summary", report.summary},
                {"actions", std::move(actions)}};
}

VerificationReport verify_facts(const TranscriptChunk& chunk, const std::vector<Fact>& facts, Gateway& gw,
                                int max_repairs) {
    std::set<std::uint32_t> known;
    for (const auto& f : facts) {
        if (f.source_chunk() != chunk.index)
            throw Error(ErrorKind::InvalidValue, "fact #" + std::to_string(f.id().value) + " comes from chunk " +
                                                     std::to_string(f.source_chunk()) + ", not " +
                                                     std::to_string(chunk.index));
        known.insert(f.id().value);
    }
    auto targets_known = [&](const json& v) -> std::optional<std::string> {
        if (!v.contains("actions")) return std::nullopt;
        for (const auto& a : v["actions"]) {
            if (!a.contains("target") || a["target"].is_null()) continue;
            const auto id = a["target"].get<std::uint32_t>();
            if (!known.count(id))
                return "UnknownFactReference: action '" + a["kind"].get<std::string>() + "' targets fact " +
                       std::to_string(id) + ", which is not in the list";
        }
        return std::nullopt;
    };
    const auto prompt = prompts::render_asset("verify_facts", {{"previous_chunk_context", chunk.previous_context},
                                                               {"chunk", render_turns(chunk.turns)},
                                                               {"atomic_facts", render_fact_list(facts)}});
    auto result = complete_json(gw, gw.request(chunk_tag("verify", chunk.index), prompt), SchemaId::VerificationReport,
                                max_repairs, targets_known);
    const json& v = result.value;
    VerificationReport report;
    report.overall_score = v["overall_score"].get<int>();
    report.feedback = v["feedback"].get<std::vector<std::string>>();
    report.summary = v["summary"].get<std::string>();
    if (v.contains("actions")) {
        for (const auto& a : v["actions"]) {
            VerificationAction action;
            action.kind = *parse_action_kind(a["kind"].get<std::string>());
            if (a.contains("target") && !a["target"].is_null()) action.target = FactId{a["target"].get<std::uint32_t>()};
            action.detail = a.value("detail", std::string());
            report.actions.push_back(std::move(action));
        }
    }
    return report;
}

namespace {

std::string default_instruction(ActionKind kind) {
    return kind == ActionKind::TrimContextMinimalism
               ? "Trim the context to only the details essential for grounding the fact."
               : "Rewrite the context so the fact is self-contained and every reference in it is resolvable.";
}

} // namespace

VerificationOutcome apply_verification(const TranscriptChunk& chunk, const std::vector<Fact>& facts,
                                       const VerificationReport& report, Gateway& gw, FactIdAllocator& ids,
                                       int max_repairs) {
    std::set<FactId> present;
    for (const auto& f : facts) present.insert(f.id());

    std::set<FactId> remove;
    std::map<FactId, std::vector<std::string>> rewrites;
    std::vector<std::string> gaps;
    for (const auto& a : report.actions) {
        if (a.kind == ActionKind::AddMissedKeyInfo) {
            gaps.push_back(a.detail.empty() ? "key information from the chunk" : a.detail);
            continue;
        }
        if (!a.target || !present.count(*a.target))
            throw Error(ErrorKind::UnknownFactReference,
                        std::string(to_wire(a.kind)) + " needs a target fact from this chunk");
        if (a.kind == ActionKind::RemoveUnsupported)
            remove.insert(*a.target);
        else
            rewrites[*a.target].push_back(a.detail.empty() ? default_instruction(a.kind) : a.detail);
    }

    VerificationOutcome out;
    const std::string chunk_text = render_turns(chunk.turns);
    for (const auto& f : facts) {
        if (remove.count(f.id())) {
            out.removed.push_back(f.id());
            continue;
        }
        auto it = rewrites.find(f.id());
        if (it == rewrites.end()) {
            out.facts.push_back(f);
            continue;
        }
        std::string instruction;
        for (const auto& line : it->second) instruction += (instruction.empty() ? "" : "\n") + line;
        const auto prompt = prompts::render_asset(
            "regenerate_fact", {{"instruction", instruction}, {"chunk", chunk_text}, {"fact", to_record(f).dump()}});
        try {
            auto result = complete_json(gw, gw.request(chunk_tag("regenerate", chunk.index), prompt),
                                        SchemaId::SingleFact, max_repairs);
            const Fact fresh = validate_fact(result.value, f.id(), f.source_chunk());
            out.facts.push_back(f.with_text(fresh.claim(), fresh.context()));
            out.rewritten.push_back(f.id());
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::RepairExhausted) throw;
            spdlog::warn("[regenerate] dropping fact #{}: {}", f.id().value, e.detail());
            out.dropped.push_back(f.id());
        }
    }

    for (const auto& gap : gaps) {
        const auto prompt = prompts::render_asset("add_missed_facts", {{"gap", gap},
                                                                       {"previous_chunk_context", chunk.previous_context},
                                                                       {"chunk", chunk_text},
                                                                       {"atomic_facts", render_fact_list(out.facts)}});
        auto result =
            complete_json(gw, gw.request(chunk_tag("add_missed", chunk.index), prompt), SchemaId::FactList, max_repairs);
        for (auto& f : accept_fact_list(result.value, chunk.index, ids)) {
            out.added.push_back(f.id());
            out.facts.push_back(std::move(f));
        }
    }
    return out;
}

} // namespace factsum
