#include "factsum/write_stage.hpp"

#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "factsum/outline_stage.hpp"
#include "factsum/prompts.hpp"
#include "factsum/text.hpp"

namespace factsum {

namespace {

void require(const WriterContext& ctx) {
    if (!ctx.outline || !ctx.features || !ctx.bank)
        throw Error(ErrorKind::InvalidValue, "writer context needs an outline, features and a bank");
}

json fact_entry(const ScoredFeature& f, const MemoryBank& bank) {
    const Fact& fact = bank.get(f.fact_id);
    json j{{"id", f.fact_id.value},
           {"fact", fact.claim()},
           {"context", fact.context()},
           {"importance_score", f.relevance},
           {"feature_type", to_wire(f.label)}};
    if (f.alignment) {
        j["persona_alignment_score"] = *f.alignment;
        j["combined_score"] = f.tier_score();
    }
    return j;
}

std::optional<std::string> non_empty(const std::string& text) {
    if (text::trim(text).empty()) return std::string("response is empty; return the summary text");
    return std::nullopt;
}

} // namespace

json matched_facts(const WriterContext& ctx) {
    require(ctx);
    std::map<FactId, const ScoredFeature*> usable;
    for (const auto& f : *ctx.features)
        if (f.tier_score() >= ctx.policy.keep_min) usable.emplace(f.fact_id, &f);

    json points = json::array();
    for (const auto& section : ctx.outline->sections) {
        for (const auto& p : section.points) {
            json facts = json::array();
            for (const auto* ids : {&p.anchor_facts, &p.support_facts}) {
                for (FactId id : *ids) {
                    auto it = usable.find(id);
                    if (it != usable.end()) facts.push_back(fact_entry(*it->second, *ctx.bank));
                }
            }
            json entry{{"section", to_wire(section.kind)}, {"point", p.text}, {"facts", facts}};
            if (facts.empty()) entry["skip"] = true;
            points.push_back(std::move(entry));
        }
    }
    return points;
}

json unmatched_features(const WriterContext& ctx) {
    require(ctx);
    std::set<FactId> referenced;
    for (const auto& section : ctx.outline->sections)
        for (const auto& p : section.points) {
            referenced.insert(p.anchor_facts.begin(), p.anchor_facts.end());
            referenced.insert(p.support_facts.begin(), p.support_facts.end());
        }
    json out = json::array();
    for (const auto& f : *ctx.features)
        if (f.tier_score() >= ctx.policy.keep_min && !referenced.count(f.fact_id))
            out.push_back(fact_entry(f, *ctx.bank));
    return out;
}

SummaryDraft enrich(const WriterContext& ctx, Gateway& gw, const std::string& feedback) {
    const json matched = matched_facts(ctx);
    SummaryDraft draft;
    std::set<FactId> supplied;
    for (const auto& p : matched)
        for (const auto& f : p["facts"]) supplied.insert(FactId{f["id"].get<std::uint32_t>()});
    draft.supplied_facts.assign(supplied.begin(), supplied.end());

    const std::string outline = to_json(*ctx.outline).dump(2);
    const std::string fb = feedback.empty() ? "None" : feedback;
    std::string prompt;
    std::string stage;
    if (ctx.persona) {
        prompt = prompts::render_asset("persona_enrich", {{"character_sheet", render_character_sheet(*ctx.persona)},
                                                          {"outline", outline},
                                                          {"matched_facts", matched.dump(2)},
                                                          {"unmatched_features", unmatched_features(ctx).dump(2)},
                                                          {"feedback_prompt", fb}});
        stage = "persona_enrich";
    } else {
        prompt = prompts::render_asset(
            "enrich", {{"outline", outline}, {"matched_facts", matched.dump(2)}, {"feedback_prompt", fb}});
        stage = "enrich";
    }
    if (!feedback.empty()) stage = "revise";
    auto result = complete_validated(gw, gw.request(stage, prompt), ctx.max_repairs, non_empty);
    draft.text = text::trim(result.text);
    return draft;
}

ReviewReport review(const SummaryDraft& draft, const WriterContext& ctx, Gateway& gw) {
    require(ctx);
    const auto prompt = prompts::render_asset("review", {{"outline", to_json(*ctx.outline).dump(2)},
                                                         {"matched_information", matched_facts(ctx).dump(2)},
                                                         {"unmatched_features", unmatched_features(ctx).dump(2)},
                                                         {"generated_summary", draft.text}});
    auto result = complete_json(gw, gw.request("review", prompt), SchemaId::ReviewReport, ctx.max_repairs);
    const json& v = result.value;
    std::optional<int> confidence;
    if (v.contains("confidence_score") && !v["confidence_score"].is_null()) confidence = v["confidence_score"].get<int>();
    return ReviewReport::create(v["outline_adherence"].get<int>(), v["factual_accuracy"].get<int>(),
                                v["information_coverage"].get<int>(), v["formatting"].get<int>(),
                                v["feedback"].get<std::string>(), v["reasoning"].get<std::string>(), confidence);
}

bool needs_revision(const ReviewReport& r) noexcept {
    return r.outline_adherence > kOutlineAdherenceBudget || r.factual_accuracy > kFactualAccuracyBudget ||
           r.information_coverage > kInformationCoverageBudget || r.formatting > kFormattingBudget ||
           r.total() > kTotalErrorBudget;
}

std::string revision_feedback(const ReviewReport& report) {
    return report.feedback + "\nReviewer reasoning: " + report.reasoning_trace;
}

RevisionOutcome revise(const SummaryDraft& draft, const ReviewReport& report, const WriterContext& ctx, Gateway& gw,
                       int max_cycles) {
    if (max_cycles < 0) throw Error(ErrorKind::InvalidValue, "max_cycles must be >= 0");
    RevisionOutcome out{draft, report, {}, 0, needs_revision(report)};
    while (out.unresolved && out.cycles < max_cycles) {
        out.draft = enrich(ctx, gw, revision_feedback(out.final_report));
        out.final_report = review(out.draft, ctx, gw);
        out.reports.push_back(out.final_report);
        ++out.cycles;
        out.unresolved = needs_revision(out.final_report);
    }
    if (out.unresolved)
        spdlog::warn("[revise] review still over budget after {} cycle(s); emitting the draft flagged unresolved",
                     out.cycles);
    return out;
}

std::string truncate_to_sentences(const std::string& text, std::size_t limit, const TokenEstimator& est) {
    std::string kept;
    for (const auto& s : text::split_sentences(text)) {
        std::string candidate = kept.empty() ? s : kept + " " + s;
        if (est.estimate(candidate) > limit) break;
        kept = std::move(candidate);
    }
    if (!kept.empty()) return kept;
    for (const auto& w : text::split_whitespace(text)) {
        std::string candidate = kept.empty() ? w : kept + " " + w;
        if (est.estimate(candidate) > limit) break;
        kept = std::move(candidate);
    }
    return kept;
}

RefineOutcome refine(const std::string& draft, Gateway& gw, const TokenEstimator& est, std::size_t limit,
                     int max_repairs) {
    RefineOutcome out;
    auto first = complete_validated(gw, gw.request("refine", prompts::render_asset("refine", {{"combined_summary", draft}})),
                                    max_repairs, non_empty);
    out.text = text::trim(first.text);
    std::size_t tokens = est.estimate(out.text);
    if (tokens <= limit) return out;

    out.reprompted = true;
    const auto prompt = prompts::render_asset("refine_shorten", {{"token_estimate", std::to_string(tokens)},
                                                                 {"token_limit", std::to_string(limit)},
                                                                 {"combined_summary", out.text}});
    auto second = complete_validated(gw, gw.request("refine", prompt), max_repairs, non_empty);
    out.text = text::trim(second.text);
    tokens = est.estimate(out.text);
    if (tokens <= limit) return out;

    out.truncated = true;
    out.text = truncate_to_sentences(out.text, limit, est);
    spdlog::warn("[refine] summary still {} tokens after shortening; truncated to {} tokens at a sentence boundary",
                 tokens, est.estimate(out.text));
    return out;
}

} // namespace factsum
