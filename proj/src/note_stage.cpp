#include "factsum/note_stage.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "factsum/fact_stage.hpp"
#include "factsum/prompts.hpp"

namespace factsum {

int combined_score(int importance, int alignment) noexcept {
    return static_cast<int>(std::lround((importance + alignment) / 2.0));
}

int ScoredFeature::tier_score() const noexcept { return alignment ? combined_score(relevance, *alignment) : relevance; }

json to_json(const ScoredFeature& f) {
    json j{{"fact_id", f.fact_id.value},         {"feature", f.feature},
           {"reasoning", f.reasoning},           {"importance_score", f.relevance},
           {"feature_type", to_wire(f.label)},   {"certainty_score", f.certainty}};
    if (f.alignment) {
        j["persona_alignment_score"] = *f.alignment;
        j["alignment_explanation"] = f.alignment_explanation;
        j["combined_score"] = f.tier_score();
    }
    return j;
}

std::string_view to_string(PolicyProfile profile) noexcept {
    switch (profile) {
    case PolicyProfile::Default: return "default";
    case PolicyProfile::Low: return "low";
    case PolicyProfile::High: return "high";
    }
    return "default";
}

std::optional<PolicyProfile> parse_policy_profile(std::string_view token) noexcept {
    for (auto p : {PolicyProfile::Default, PolicyProfile::Low, PolicyProfile::High})
        if (to_string(p) == token) return p;
    return std::nullopt;
}

RetentionPolicy RetentionPolicy::for_profile(PolicyProfile profile) noexcept {
    switch (profile) {
    case PolicyProfile::Low: return RetentionPolicy{3, 6, profile};
    case PolicyProfile::High: return RetentionPolicy{8, 10, profile};
    case PolicyProfile::Default: break;
    }
    return RetentionPolicy{6, 8, PolicyProfile::Default};
}

void RetentionPolicy::validate() const {
    if (!(kRelevanceMin <= keep_min && keep_min <= anchor_min && anchor_min <= kRelevanceMax))
        throw Error(ErrorKind::InvalidValue, "retention policy needs 1 <= keep_min <= anchor_min <= 10, got {" +
                                                 std::to_string(keep_min) + "," + std::to_string(anchor_min) + "}");
}

std::vector<ScoredFeature> score_batched(const std::vector<Fact>& facts, Gateway& gw, const std::string& stage_tag,
                                         const ScorePromptFn& prompt, SchemaId schema, int max_repairs,
                                         std::size_t batch_size) {
    if (facts.empty()) throw Error(ErrorKind::InvalidValue, "scoring needs at least one fact");
    if (batch_size == 0) throw Error(ErrorKind::InvalidValue, "batch size must be > 0");

    std::map<FactId, ScoredFeature> by_id;
    for (std::size_t start = 0; start < facts.size(); start += batch_size) {
        const std::vector<Fact> batch(facts.begin() + static_cast<std::ptrdiff_t>(start),
                                      facts.begin() + static_cast<std::ptrdiff_t>(std::min(facts.size(), start + batch_size)));
        std::set<std::uint32_t> expected;
        for (const auto& f : batch) expected.insert(f.id().value);

        auto ids_match = [&](const json& v) -> std::optional<std::string> {
            if (v.size() != batch.size())
                return "CountMismatch: expected " + std::to_string(batch.size()) + " features (one per fact), got " +
                       std::to_string(v.size());
            std::set<std::uint32_t> seen;
            for (const auto& item : v) {
                const auto id = item["fact_id"].get<std::uint32_t>();
                if (!expected.count(id)) return "UnknownFactReference: fact_id " + std::to_string(id) + " is not in the list";
                if (!seen.insert(id).second) return "CountMismatch: fact_id " + std::to_string(id) + " appears twice";
            }
            return std::nullopt;
        };
        auto result = complete_json(gw, gw.request(stage_tag, prompt(render_fact_list(batch))), schema, max_repairs, ids_match);
        for (const auto& item : result.value) {
            ScoredFeature f;
            f.fact_id = FactId{item["fact_id"].get<std::uint32_t>()};
            f.feature = item["feature"].get<std::string>();
            f.reasoning = item["reasoning"].get<std::string>();
            f.relevance = item["importance_score"].get<int>();
            f.label = *parse_label(item["feature_type"].get<std::string>());
            f.certainty = item["certainty_score"].get<int>();
            if (schema == SchemaId::PersonaFeatures) {
                f.alignment = item["persona_alignment_score"].get<int>();
                f.alignment_explanation = item["alignment_explanation"].get<std::string>();
            }
            by_id.emplace(f.fact_id, std::move(f));
        }
    }

    std::vector<ScoredFeature> out;
    out.reserve(facts.size());
    for (const auto& f : facts) out.push_back(by_id.at(f.id()));
    return out;
}

std::vector<ScoredFeature> score_facts(const std::vector<Fact>& facts, Gateway& gw, int max_repairs,
                                       std::size_t batch_size) {
    auto prompt = [](const std::string& list) { return prompts::render_asset("score_facts", {{"facts", list}}); };
    return score_batched(facts, gw, "score", prompt, SchemaId::ScoredFeatures, max_repairs, batch_size);
}

std::vector<ScoredFeature> retain(const std::vector<ScoredFeature>& features, const RetentionPolicy& policy) {
    std::vector<ScoredFeature> out;
    for (const auto& f : features)
        if (f.tier_score() >= policy.keep_min) out.push_back(f);
    return out;
}

double retention_rate(std::size_t retained, std::size_t total) noexcept {
    return total == 0 ? 0.0 : static_cast<double>(retained) / static_cast<double>(total);
}

void record_scores(MemoryBank& bank, const std::vector<ScoredFeature>& features) {
    for (const auto& f : features) {
        bank.replace(bank.get(f.fact_id).with_label(f.label).with_relevance(f.relevance).with_certainty(f.certainty));
    }
}

namespace {

using CellKey = std::tuple<FunctionLabel, int>;

// Partition of one cell: each group lists member positions (into the cell), earliest first.
std::vector<std::vector<std::size_t>> similarity_groups(const std::vector<const ScoredFeature*>& cell,
                                                        const MemoryBank& bank) {
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < cell.size(); ++i) {
        const auto& claim = bank.get(cell[i]->fact_id).claim();
        bool placed = false;
        for (auto& g : groups) {
            if (similarity(bank.get(cell[g.front()]->fact_id).claim(), claim) >= bank.threshold()) {
                g.push_back(i);
                placed = true;
                break;
            }
        }
        if (!placed) groups.push_back({i});
    }
    return groups;
}

struct LlmGroups {
    std::vector<std::vector<std::size_t>> members;
    std::vector<std::string> contexts;
};

LlmGroups model_groups(const std::vector<const ScoredFeature*>& cell, const MemoryBank& bank, Gateway& gw,
                       int max_repairs) {
    std::vector<Fact> facts;
    std::map<std::uint32_t, std::size_t> position;
    for (std::size_t i = 0; i < cell.size(); ++i) {
        facts.push_back(bank.get(cell[i]->fact_id));
        position.emplace(cell[i]->fact_id.value, i);
    }
    auto partition_check = [&](const json& v) -> std::optional<std::string> {
        std::set<std::uint32_t> seen;
        for (const auto& g : v) {
            for (const auto& m : g["members"]) {
                const auto id = m.get<std::uint32_t>();
                if (!position.count(id)) return "UnknownFactReference: fact " + std::to_string(id) + " is not in the list";
                if (!seen.insert(id).second) return "fact " + std::to_string(id) + " appears in more than one group";
            }
        }
        if (seen.size() != position.size()) return std::string("every fact id must appear in exactly one group");
        return std::nullopt;
    };
    const auto prompt = prompts::render_asset("consolidate_facts", {{"facts", render_fact_list(facts)}});
    auto result = complete_json(gw, gw.request("consolidate", prompt), SchemaId::ConsolidationGroups, max_repairs,
                                partition_check);
    LlmGroups out;
    for (const auto& g : result.value) {
        std::vector<std::size_t> members;
        for (const auto& m : g["members"]) members.push_back(position.at(m.get<std::uint32_t>()));
        std::sort(members.begin(), members.end());
        out.members.push_back(std::move(members));
        out.contexts.push_back(g["context"].get<std::string>());
    }
    return out;
}

} // namespace

ConsolidationResult group_and_consolidate(const std::vector<ScoredFeature>& features, MemoryBank& bank, Gateway* gw,
                                          bool use_llm, int max_repairs) {
    if (use_llm && !gw) throw Error(ErrorKind::InvalidValue, "model consolidation needs a gateway");

    std::map<CellKey, std::vector<const ScoredFeature*>> cells;
    std::vector<CellKey> cell_order;
    for (const auto& f : features) {
        const CellKey key{f.label, f.tier_score()};
        auto [it, fresh] = cells.try_emplace(key);
        if (fresh) cell_order.push_back(key);
        it->second.push_back(&f);
    }

    std::set<FactId> absorbed;
    std::map<FactId, ScoredFeature> replaced;
    ConsolidationResult result;
    for (const auto& key : cell_order) {
        const auto& cell = cells.at(key);
        if (cell.size() < 2) continue;
        std::vector<std::vector<std::size_t>> groups;
        std::vector<std::optional<std::string>> contexts;
        if (use_llm) {
            auto g = model_groups(cell, bank, *gw, max_repairs);
            groups = std::move(g.members);
            for (auto& c : g.contexts) contexts.emplace_back(std::move(c));
        } else {
            groups = similarity_groups(cell, bank);
            contexts.resize(groups.size());
        }
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            const auto& g = groups[gi];
            if (g.size() < 2) continue;
            const ScoredFeature& lead = *cell[g.front()];
            Fact kept = bank.get(lead.fact_id);
            ScoredFeature merged = lead;
            ConsolidationGroup record{lead.fact_id, {}};
            std::string context = kept.context();
            for (std::size_t k = 1; k < g.size(); ++k) {
                const ScoredFeature& other = *cell[g[k]];
                context = merge_contexts(context, bank.get(other.fact_id).context());
                merged.relevance = std::max(merged.relevance, other.relevance);
                absorbed.insert(other.fact_id);
                record.absorbed.push_back(other.fact_id);
            }
            bank.replace(kept.with_context(contexts[gi] ? *contexts[gi] : context).with_relevance(merged.relevance));
            replaced.insert_or_assign(lead.fact_id, merged);
            result.groups.push_back(std::move(record));
        }
    }

    for (const auto& f : features) {
        if (absorbed.count(f.fact_id)) continue;
        auto it = replaced.find(f.fact_id);
        result.features.push_back(it != replaced.end() ? it->second : f);
    }
    return result;
}

} // namespace factsum
