#include "factsum/pipeline.hpp"

#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "factsum/note_stage.hpp"
#include "factsum/outline_stage.hpp"
#include "factsum/pmesa.hpp"
#include "factsum/prompts.hpp"
#include "factsum/text.hpp"
#include "factsum/write_stage.hpp"

namespace factsum {

namespace {

json id_list(const std::vector<FactId>& ids) {
    json out = json::array();
    for (auto id : ids) out.push_back(id.value);
    return out;
}

json features_json(const std::vector<ScoredFeature>& features) {
    json out = json::array();
    for (const auto& f : features) out.push_back(to_json(f));
    return out;
}

json outline_stats(const Outline& outline) {
    std::size_t anchors = 0, supports = 0;
    for (const auto& s : outline.sections)
        for (const auto& p : s.points) {
            anchors += p.anchor_facts.size();
            supports += p.support_facts.size();
        }
    return json{{"sections", outline.sections.size()},
                {"points", outline.point_count()},
                {"anchors", anchors},
                {"supports", supports}};
}

json header(const std::string& mode, const RunConfig& config, Gateway& gw) {
    return json{{"mode", mode},
                {"prompt_version", prompts::version()},
                {"backend", gw.backend().describe()},
                {"config", to_json(config)}};
}

// Stages 2-4 over a populated bank. `persona` switches scoring, outline and enrichment templates.
struct WriteOutput {
    std::string summary;
    bool unresolved = false;
    json summary_doc;
    json outline_doc;
    json features_doc;
    json report;
};

WriteOutput note_outline_write(const std::vector<Fact>& facts, MemoryBank& bank, const ReaderProfile* persona,
                               const RunConfig& config, Gateway& gw) {
    if (facts.empty()) throw Error(ErrorKind::OutlineEmpty, "no facts survived extraction; nothing to summarize");
    const auto est = config.estimator();

    auto scored = persona ? score_facts_persona(facts, *persona, gw, config.max_repairs, config.score_batch_size)
                          : score_facts(facts, gw, config.max_repairs, config.score_batch_size);
    record_scores(bank, scored);
    const auto retained = retain(scored, config.policy);
    const auto consolidated = group_and_consolidate(retained, bank, &gw, config.llm_consolidation, config.max_repairs);
    spdlog::info("[score] {} scored, {} retained, {} consolidation groups", scored.size(), retained.size(),
                 consolidated.groups.size());
    const Outline outline = plan_outline(consolidated.features, bank, config.policy, gw, config.max_repairs, persona);

    WriterContext ctx{&outline, &consolidated.features, &bank, config.policy, persona, config.max_repairs};
    SummaryDraft draft = enrich(ctx, gw);
    ReviewReport report = review(draft, ctx, gw);
    std::vector<ReviewReport> history{report};
    RevisionOutcome revision{draft, report, {}, 0, needs_revision(report)};
    if (revision.unresolved) {
        revision = revise(draft, report, ctx, gw, config.max_revision_cycles);
        history.insert(history.end(), revision.reports.begin(), revision.reports.end());
    }

    RefineOutcome refined{revision.draft.text, false, false};
    if (config.refine) refined = refine(revision.draft.text, gw, est, config.summary_token_limit, config.max_repairs);

    WriteOutput out;
    out.summary = refined.text;
    out.unresolved = revision.unresolved;

    json reviews = json::array();
    for (const auto& r : history) {
        json entry = to_json(r);
        entry["needs_revision"] = needs_revision(r);
        reviews.push_back(std::move(entry));
    }
    out.summary_doc = json{{"summary", out.summary}, {"unresolved_flag", out.unresolved}, {"review_history", reviews}};
    out.outline_doc = to_json(outline);

    std::vector<FactId> retained_ids;
    for (const auto& f : retained) retained_ids.push_back(f.fact_id);
    json groups = json::array();
    for (const auto& g : consolidated.groups) groups.push_back(json{{"kept", g.kept.value}, {"absorbed", id_list(g.absorbed)}});
    out.features_doc = json{{"scored", features_json(scored)},
                            {"retained", id_list(retained_ids)},
                            {"consolidation_groups", groups},
                            {"outline_features", features_json(consolidated.features)}};
    out.report = json{
        {"scoring",
         {{"scored", scored.size()},
          {"retained", retained.size()},
          {"retention_rate", retention_rate(retained.size(), scored.size())},
          {"consolidated_groups", consolidated.groups.size()}}},
        {"outline", outline_stats(outline)},
        {"writing",
         {{"draft_words", text::word_count(revision.draft.text)},
          {"supplied_facts", id_list(revision.draft.supplied_facts)},
          {"revision_cycles", revision.cycles},
          {"unresolved", out.unresolved},
          {"refine", {{"applied", config.refine}, {"reprompted", refined.reprompted}, {"truncated", refined.truncated}}},
          {"final_tokens", est.estimate(out.summary)},
          {"final_words", text::word_count(out.summary)}}}};
    return out;
}

void finish(PipelineResult& result, json& summary_doc, json report, Gateway& gw) {
    summary_doc["usage_totals"] = to_json(gw.usage_totals());
    report["calls"] = gw.call_count();
    result.artifacts["summary.json"] = summary_doc;
    result.artifacts["usage.json"] = usage_report(gw);
    result.artifacts["run_report.json"] = std::move(report);
}

json fact_stage_report(const FactStageResult& s) {
    return json{{"chunks", s.chunks.size()},
                {"facts_extracted", s.extracted},
                {"verification", s.verification},
                {"bank", {{"size", s.bank.size()}, {"merges", s.bank.merge_log().size()}}}};
}

json profile_json(const ReaderProfile& p) {
    json j = to_record(p);
    j["origin"] = p.origin == ProfileOrigin::Provided ? "provided" : "inferred";
    return j;
}

} // namespace

FactStageResult run_fact_stage(const std::vector<TranscriptTurn>& turns, const RunConfig& config, Gateway& gw) {
    check_contiguous(turns);
    FactStageResult out{chunk_transcript(turns, config.chunk_budget, config.context_tail, config.estimator()),
                        MemoryBank(config.merge_threshold), 0, json::array()};
    FactIdAllocator ids;
    for (const auto& chunk : out.chunks) {
        auto facts = extract_facts(chunk, gw, ids, config.max_repairs);
        out.extracted += facts.size();
        if (config.verify) {
            const auto report = verify_facts(chunk, facts, gw, config.max_repairs);
            auto outcome = apply_verification(chunk, facts, report, gw, ids, config.max_repairs);
            out.verification.push_back(json{{"chunk", chunk.index},
                                            {"report", to_json(report)},
                                            {"removed", id_list(outcome.removed)},
                                            {"rewritten", id_list(outcome.rewritten)},
                                            {"dropped", id_list(outcome.dropped)},
                                            {"added", id_list(outcome.added)}});
            facts = std::move(outcome.facts);
        }
        for (const auto& f : facts) {
            if (auto r = out.bank.insert(f); r.merged)
                spdlog::info("[bank] fact #{} merged into #{}", f.id().value, r.merged->value);
        }
        spdlog::info("[extract] chunk {}: {} facts kept, bank holds {}", chunk.index, facts.size(), out.bank.size());
    }
    return out;
}

PipelineResult summarize_meeting(const std::vector<TranscriptTurn>& turns, const RunConfig& config, Gateway& gw) {
    auto stage1 = run_fact_stage(turns, config, gw);
    auto written = note_outline_write(stage1.bank.facts(), stage1.bank, nullptr, config, gw);

    PipelineResult result;
    result.summary = written.summary;
    result.unresolved = written.unresolved;
    result.artifacts["bank.json"] = stage1.bank.snapshot();
    result.artifacts["outline.json"] = written.outline_doc;
    result.artifacts["features.json"] = written.features_doc;
    json report = header("general", config, gw);
    report["facts"] = fact_stage_report(stage1);
    report.update(written.report);
    finish(result, written.summary_doc, std::move(report), gw);
    return result;
}

PipelineResult personalize_meeting(const std::vector<TranscriptTurn>& turns, const std::optional<ReaderProfile>& given,
                                   PersonaMode mode, const RunConfig& config, Gateway& gw) {
    if (mode == PersonaMode::General) return summarize_meeting(turns, config, gw);
    check_contiguous(turns);
    const ReaderProfile profile = given ? *given : infer_profile(turns, gw, config.max_repairs);
    PipelineResult result;
    json report = header(std::string(to_string(mode)), config, gw);
    report["profile"] = profile_json(profile);

    if (mode == PersonaMode::TailorTo || mode == PersonaMode::Roleplay) {
        result.summary = baseline_summary(mode, profile, turns, gw, config.max_repairs);
        json summary_doc{{"summary", result.summary}, {"unresolved_flag", false}, {"review_history", json::array()}};
        finish(result, summary_doc, std::move(report), gw);
        return result;
    }

    auto stage1 = run_fact_stage(turns, config, gw);
    const auto all_facts = stage1.bank.facts();
    if (all_facts.empty()) throw Error(ErrorKind::SelectionEmpty, "no facts survived extraction; nothing to select");
    const auto scope = explore_and_select(profile, all_facts, gw, config.max_repairs);
    if (scope.selection.kept.empty())
        throw Error(ErrorKind::SelectionEmpty, "the persona selected no fact with certainty >= 40");
    std::set<FactId> chosen;
    for (const auto& s : scope.selection.kept) chosen.insert(s.id);
    std::vector<Fact> selected;
    for (const auto& f : all_facts)
        if (chosen.count(f.id())) selected.push_back(f);

    auto written = note_outline_write(selected, stage1.bank, &profile, config, gw);
    result.summary = written.summary;
    result.unresolved = written.unresolved;

    json kept = json::array(), dropped = json::array();
    for (const auto& s : scope.selection.kept) kept.push_back(json{{"fact_id", s.id.value}, {"certainty", s.certainty}});
    for (const auto& s : scope.selection.dropped) dropped.push_back(json{{"fact_id", s.id.value}, {"certainty", s.certainty}});
    json trace = to_json(scope.trace);
    trace["selection"] = json{{"kept", kept}, {"dropped", dropped}};
    trace["profile"] = profile_json(profile);

    result.artifacts["bank.json"] = stage1.bank.snapshot();
    result.artifacts["outline.json"] = written.outline_doc;
    result.artifacts["features.json"] = written.features_doc;
    result.artifacts["trace.json"] = std::move(trace);
    report["facts"] = fact_stage_report(stage1);
    report["selection"] = json{{"offered", all_facts.size()}, {"kept", kept.size()}, {"dropped", dropped.size()}};
    report.update(written.report);
    finish(result, written.summary_doc, std::move(report), gw);
    return result;
}

json evaluate_summary(const std::string& summary, const std::vector<TranscriptTurn>& turns,
                      const ReaderProfile& profile, const RunConfig& config, Gateway& gw) {
    check_contiguous(turns);
    const auto scores = evaluate(summary, turns, profile, gw, config.max_repairs);
    json flags = json::object();
    const auto bins = binarize(scores);
    for (std::size_t i = 0; i < scores.size(); ++i) flags[std::string(to_wire(scores[i].dimension))] = bool(bins[i]);
    return json{{"prompt_version", prompts::version()},
                {"backend", gw.backend().describe()},
                {"profile", profile_json(profile)},
                {"dimensions", to_json(scores)},
                {"error_flags", flags},
                {"usage_totals", to_json(gw.usage_totals())}};
}

std::vector<RenderedPrompt> dry_run_prompts(const std::string& command, const std::vector<TranscriptTurn>& turns,
                                            const RunConfig& config, const std::optional<ReaderProfile>& profile,
                                            PersonaMode mode, const std::optional<std::string>& summary) {
    check_contiguous(turns);
    const std::string system = text::trim(prompts::asset("system"));
    std::vector<RenderedPrompt> out;
    auto add = [&](std::string stage, std::string user) { out.push_back({std::move(stage), system, std::move(user)}); };

    if (command == "evaluate") {
        if (!profile) throw Error(ErrorKind::InputError, "evaluate needs a reader profile");
        if (!summary) throw Error(ErrorKind::InputError, "evaluate needs a summary");
        for (auto dim : kAllDimensions)
            add("pmesa:" + std::string(to_wire(dim)), render_dimension_prompt(dim, *summary, turns, *profile));
        return out;
    }
    const bool persona = command == "personalize" && mode != PersonaMode::General;
    if (persona && !profile)
        add("infer_profile", prompts::render_asset("infer_profile", {{"transcript", render_turns(turns)}}));
    if (persona && profile && (mode == PersonaMode::TailorTo || mode == PersonaMode::Roleplay)) {
        add(std::string(to_string(mode)), baseline_prompt(mode, *profile, turns));
        return out;
    }
    if (persona && mode != PersonaMode::Scope) return out;
    for (const auto& chunk : chunk_transcript(turns, config.chunk_budget, config.context_tail, config.estimator()))
        add("extract[" + std::to_string(chunk.index) + "]",
            prompts::render_asset("extract_facts", {{"previous_chunk_context", chunk.previous_context},
                                                    {"chunk", render_turns(chunk.turns)}}));
    return out;
}

json usage_report(const Gateway& gw) {
    json records = json::array();
    std::map<std::string, UsageRecord> by_stage;
    std::map<std::string, std::size_t> calls;
    for (const auto& r : gw.usage()) {
        records.push_back(to_json(r));
        auto& agg = by_stage[r.stage_tag];
        agg.stage_tag = r.stage_tag;
        agg += r;
        ++calls[r.stage_tag];
    }
    json stages = json::object();
    for (const auto& [stage, agg] : by_stage) {
        json entry = to_json(agg);
        entry.erase("stage");
        entry["calls"] = calls[stage];
        stages[stage] = std::move(entry);
    }
    json totals = to_json(gw.usage_totals());
    totals.erase("stage");
    totals["calls"] = gw.call_count();
    return json{{"records", std::move(records)}, {"by_stage", std::move(stages)}, {"totals", std::move(totals)}};
}

void write_artifacts(const std::filesystem::path& dir, const Artifacts& artifacts) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::InputError, "cannot create output directory '" + dir.string() + "': " + ec.message());
    for (const auto& [name, doc] : artifacts) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::InputError, "cannot write '" + (dir / name).string() + "'");
        out << doc.dump(2) << '\n';
    }
}

std::vector<TranscriptTurn> load_transcript(const std::filesystem::path& path) {
    return transcript_from_json(read_json_file(path));
}

ReaderProfile load_profile(const std::filesystem::path& path) {
    try {
        return validate_profile(read_json_file(path), ProfileOrigin::Provided);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InputError) throw;
        throw Error(ErrorKind::InputError, "profile '" + path.string() + "': " + e.detail());
    }
}

std::string load_summary_text(const std::filesystem::path& path) {
    const std::string raw = read_file(path);
    if (path.extension() == ".json") {
        auto doc = json::parse(raw, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("summary") || !doc["summary"].is_string())
            throw Error(ErrorKind::InputError, "'" + path.string() + "' has no string 'summary'");
        return doc["summary"].get<std::string>();
    }
    const std::string trimmed = text::trim(raw);
    if (trimmed.empty()) throw Error(ErrorKind::InputError, "summary file '" + path.string() + "' is empty");
    return trimmed;
}

} // namespace factsum
