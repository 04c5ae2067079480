#include "factsum/outline_stage.hpp"

#include <map>

#include "factsum/prompts.hpp"
#include "factsum/text.hpp"

namespace factsum {

TierLookup tier_lookup(const std::vector<ScoredFeature>& features) {
    TierLookup lookup;
    for (const auto& f : features) lookup.insert_or_assign(f.fact_id, TierInfo{f.tier_score(), f.label});
    return lookup;
}

std::vector<TierViolation> audit_outline(const Outline& outline, const std::vector<ScoredFeature>& features,
                                         const RetentionPolicy& policy) {
    const auto lookup = tier_lookup(features);
    const auto rule = policy.tier_rule();
    std::vector<TierViolation> out;
    std::map<FactId, int> anchor_uses;

    auto where = [](SectionKind s, std::size_t i) { return std::string(to_wire(s)) + " point " + std::to_string(i); };
    for (const auto& section : outline.sections) {
        for (std::size_t i = 0; i < section.points.size(); ++i) {
            const auto& p = section.points[i];
            for (FactId id : p.anchor_facts) {
                auto it = lookup.find(id);
                if (it == lookup.end()) {
                    out.push_back({TierViolation::Kind::UnknownFact, section.kind, i, id,
                                   where(section.kind, i) + ": anchor fact " + std::to_string(id.value) + " is unknown"});
                    continue;
                }
                ++anchor_uses[id];
                if (!rule.is_anchor(it->second.score, it->second.label))
                    out.push_back({TierViolation::Kind::AnchorOutOfTier, section.kind, i, id,
                                   where(section.kind, i) + ": anchor fact " + std::to_string(id.value) + " has score " +
                                       std::to_string(it->second.score) + " < " + std::to_string(rule.anchor_min) +
                                       " and is not a DECISION"});
            }
            for (FactId id : p.support_facts) {
                auto it = lookup.find(id);
                if (it == lookup.end()) {
                    out.push_back({TierViolation::Kind::UnknownFact, section.kind, i, id,
                                   where(section.kind, i) + ": support fact " + std::to_string(id.value) + " is unknown"});
                    continue;
                }
                if (!rule.is_support(it->second.score))
                    out.push_back({TierViolation::Kind::SupportOutOfTier, section.kind, i, id,
                                   where(section.kind, i) + ": support fact " + std::to_string(id.value) +
                                       " has score " + std::to_string(it->second.score) + " outside [" +
                                       std::to_string(rule.keep_min) + "," + std::to_string(rule.anchor_min) + ")"});
            }
        }
    }
    for (const auto& f : features) {
        if (!rule.is_anchor(f.tier_score(), f.label)) continue;
        const int uses = anchor_uses.count(f.fact_id) ? anchor_uses.at(f.fact_id) : 0;
        if (uses == 0)
            out.push_back({TierViolation::Kind::AnchorMissing, SectionKind::Overview, std::nullopt, f.fact_id,
                           "anchor fact " + std::to_string(f.fact_id.value) + " is not attached to any point"});
        else if (uses > 1)
            out.push_back({TierViolation::Kind::AnchorRepeated, SectionKind::Overview, std::nullopt, f.fact_id,
                           "anchor fact " + std::to_string(f.fact_id.value) + " is attached to " +
                               std::to_string(uses) + " points"});
    }
    return out;
}

std::string render_outline_features(const std::vector<ScoredFeature>& features, const MemoryBank& bank,
                                    const RetentionPolicy& policy) {
    const auto rule = policy.tier_rule();
    json list = json::array();
    for (const auto& f : features) {
        const int score = f.tier_score();
        const char* tier = rule.is_anchor(score, f.label) ? "anchor" : rule.is_support(score) ? "support" : "context";
        const Fact& fact = bank.get(f.fact_id);
        json item{{"id", f.fact_id.value},
                  {"fact", fact.claim()},
                  {"context", fact.context()},
                  {"importance_score", f.relevance},
                  {"feature_type", to_wire(f.label)},
                  {"tier", tier}};
        if (f.alignment) {
            item["persona_alignment_score"] = *f.alignment;
            item["combined_score"] = score;
            item["alignment_explanation"] = f.alignment_explanation;
        }
        list.push_back(std::move(item));
    }
    return list.dump(2);
}

std::string render_character_sheet(const ReaderProfile& profile) { return to_record(profile).dump(2); }

Outline plan_outline(const std::vector<ScoredFeature>& features, const MemoryBank& bank, const RetentionPolicy& policy,
                     Gateway& gw, int max_repairs, const ReaderProfile* persona) {
    policy.validate();
    const auto rule = policy.tier_rule();
    bool any_anchor = false;
    for (const auto& f : features) any_anchor = any_anchor || rule.is_anchor(f.tier_score(), f.label);
    if (!any_anchor)
        throw Error(ErrorKind::OutlineEmpty, "no feature scores >= " + std::to_string(policy.anchor_min) +
                                                 " or is a DECISION; nothing can anchor the outline");

    const auto facts = render_outline_features(features, bank, policy);
    std::string prompt;
    std::string stage;
    if (persona) {
        prompt = prompts::render_asset("persona_outline",
                                       {{"important_features", facts}, {"character_sheet", render_character_sheet(*persona)}});
        stage = "persona_outline";
    } else {
        prompt = prompts::render_asset("outline", {{"anchor_min", std::to_string(policy.anchor_min)},
                                                   {"keep_min", std::to_string(policy.keep_min)},
                                                   {"support_max", std::to_string(policy.anchor_min - 1)},
                                                   {"important_facts", facts}});
        stage = "outline";
    }

    Outline accepted;
    auto certify = [&](const json& v) -> std::optional<std::string> {
        Outline outline = outline_from_json(v);
        auto violations = audit_outline(outline, features, policy);
        if (!violations.empty()) {
            std::vector<std::string> lines;
            for (const auto& t : violations) lines.push_back(t.message);
            return "TierViolation: " + text::join(lines, "; ");
        }
        accepted = std::move(outline);
        return std::nullopt;
    };
    complete_json(gw, gw.request(stage, prompt), SchemaId::Outline, max_repairs, certify);
    return accepted;
}

} // namespace factsum
