#include <set>

#include "factsum/gateway.hpp"
#include "factsum/text.hpp"

namespace factsum {

std::string_view to_string(SchemaId id) noexcept {
    switch (id) {
    case SchemaId::FactList: return "fact_list";
    case SchemaId::SingleFact: return "single_fact";
    case SchemaId::VerificationReport: return "verification_report";
    case SchemaId::ScoredFeatures: return "scored_features";
    case SchemaId::PersonaFeatures: return "persona_features";
    case SchemaId::ConsolidationGroups: return "consolidation_groups";
    case SchemaId::Outline: return "outline";
    case SchemaId::ReviewReport: return "review_report";
    case SchemaId::ReaderProfile: return "reader_profile";
    case SchemaId::DimensionInstances: return "dimension_instances";
    }
    return "unknown";
}

namespace {

using Problem = std::optional<std::string>;

Problem need_string(const json& obj, const char* key, const std::string& where, bool non_empty) {
    auto it = obj.find(key);
    if (it == obj.end()) return where + ": field '" + key + "' is missing";
    if (!it->is_string()) return where + ": field '" + key + "' is not a string";
    if (non_empty && text::trim(it->get_ref<const std::string&>()).empty())
        return where + ": field '" + key + "' is empty";
    return std::nullopt;
}

Problem need_int(const json& obj, const char* key, const std::string& where, long long lo, long long hi) {
    auto it = obj.find(key);
    if (it == obj.end()) return where + ": field '" + key + "' is missing";
    if (!it->is_number_integer()) return where + ": field '" + key + "' is not an integer";
    const auto v = it->get<long long>();
    if (v < lo || v > hi)
        return where + ": field '" + key + "' = " + std::to_string(v) + " outside [" + std::to_string(lo) + "," +
               std::to_string(hi) + "]";
    return std::nullopt;
}

Problem need_label(const json& obj, const std::string& where) {
    if (auto p = need_string(obj, "feature_type", where, true)) return p;
    const auto& token = obj["feature_type"].get_ref<const std::string&>();
    if (!parse_label(token))
        return where + ": feature_type '" + token + "' is not one of DECISION, ACTION, INSIGHT, CONTEXT";
    return std::nullopt;
}

constexpr long long kMaxId = 0xFFFFFFFFLL;

Problem check_fact_record(const json& item, const std::string& where) {
    if (!item.is_object()) return where + ": not an object";
    if (auto p = need_string(item, "fact", where, true)) return p;
    return need_string(item, "context", where, true);
}

Problem check_fact_list(const json& v) {
    if (!v.is_array()) return std::string("expected a JSON list of {fact, context} objects");
    for (std::size_t i = 0; i < v.size(); ++i)
        if (auto p = check_fact_record(v[i], "item " + std::to_string(i))) return p;
    return std::nullopt;
}

const std::set<std::string>& action_kinds() {
    static const std::set<std::string> kinds{"remove_unsupported", "add_missed_key_info", "rewrite_context",
                                             "trim_context"};
    return kinds;
}

Problem check_verification(const json& v) {
    if (!v.is_object()) return std::string("expected one JSON object");
    if (auto p = need_int(v, "overall_score", "report", 0, 100)) return p;
    if (!v.contains("feedback") || !v["feedback"].is_array()) return std::string("report: 'feedback' must be a list");
    for (const auto& f : v["feedback"])
        if (!f.is_string()) return std::string("report: feedback items must be strings");
    if (auto p = need_string(v, "summary", "report", false)) return p;
    if (!v.contains("actions")) return std::nullopt;
    if (!v["actions"].is_array()) return std::string("report: 'actions' must be a list");
    for (std::size_t i = 0; i < v["actions"].size(); ++i) {
        const auto& a = v["actions"][i];
        const std::string where = "action " + std::to_string(i);
        if (!a.is_object()) return where + ": not an object";
        if (auto p = need_string(a, "kind", where, true)) return p;
        const auto& kind = a["kind"].get_ref<const std::string&>();
        if (!action_kinds().count(kind)) return where + ": unknown kind '" + kind + "'";
        if (a.contains("detail") && !a["detail"].is_string()) return where + ": 'detail' must be a string";
        const bool targets_fact = kind != "add_missed_key_info";
        if (targets_fact) {
            if (auto p = need_int(a, "target", where, 0, kMaxId)) return p;
        } else if (a.contains("target") && !a["target"].is_null()) {
            return where + ": add_missed_key_info takes a null target";
        }
    }
    return std::nullopt;
}

Problem check_features(const json& v, bool persona) {
    if (!v.is_array()) return std::string("expected a JSON list of feature objects");
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& f = v[i];
        const std::string where = "feature " + std::to_string(i);
        if (!f.is_object()) return where + ": not an object";
        if (auto p = need_int(f, "fact_id", where, 0, kMaxId)) return p;
        if (auto p = need_string(f, "feature", where, false)) return p;
        if (auto p = need_string(f, "reasoning", where, false)) return p;
        if (auto p = need_int(f, "importance_score", where, kRelevanceMin, kRelevanceMax)) return p;
        if (auto p = need_label(f, where)) return p;
        if (auto p = need_int(f, "certainty_score", where, kCertaintyMin, kCertaintyMax)) return p;
        if (persona) {
            if (auto p = need_int(f, "persona_alignment_score", where, kRelevanceMin, kRelevanceMax)) return p;
            if (auto p = need_string(f, "alignment_explanation", where, false)) return p;
        }
    }
    return std::nullopt;
}

Problem check_groups(const json& v) {
    if (!v.is_array()) return std::string("expected a JSON list of {members, context} groups");
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& g = v[i];
        const std::string where = "group " + std::to_string(i);
        if (!g.is_object()) return where + ": not an object";
        if (!g.contains("members") || !g["members"].is_array() || g["members"].empty())
            return where + ": 'members' must be a non-empty list of fact ids";
        for (const auto& m : g["members"])
            if (!m.is_number_integer() || m.get<long long>() < 0) return where + ": member " + m.dump() + " is not a fact id";
        if (auto p = need_string(g, "context", where, true)) return p;
    }
    return std::nullopt;
}

Problem check_review(const json& v) {
    if (!v.is_object()) return std::string("expected one JSON object");
    for (const char* key : {"outline_adherence", "factual_accuracy", "information_coverage", "formatting"})
        if (auto p = need_int(v, key, "review", 0, 1000)) return p;
    if (auto p = need_string(v, "feedback", "review", false)) return p;
    if (auto p = need_string(v, "reasoning", "review", false)) return p;
    if (v.contains("confidence_score") && !v["confidence_score"].is_null())
        if (auto p = need_int(v, "confidence_score", "review", 0, 100)) return p;
    return std::nullopt;
}

Problem check_instances(const json& v) {
    if (!v.is_object() || !v.contains("instances") || !v["instances"].is_array())
        return std::string("expected {\"instances\": [...]}");
    for (std::size_t i = 0; i < v["instances"].size(); ++i) {
        const auto& inst = v["instances"][i];
        const std::string where = "instance " + std::to_string(i);
        if (!inst.is_object()) return where + ": not an object";
        if (auto p = need_string(inst, "description", where, false)) return p;
        if (auto p = need_int(inst, "severity", where, kSeverityMin, kSeverityMax)) return p;
    }
    return std::nullopt;
}

template <typename Fn>
Problem catching(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.detail();
    }
    return std::nullopt;
}

} // namespace

std::optional<std::string> check_schema(SchemaId id, const json& value) {
    switch (id) {
    case SchemaId::FactList: return check_fact_list(value);
    case SchemaId::SingleFact: return check_fact_record(value, "fact");
    case SchemaId::VerificationReport: return check_verification(value);
    case SchemaId::ScoredFeatures: return check_features(value, false);
    case SchemaId::PersonaFeatures: return check_features(value, true);
    case SchemaId::ConsolidationGroups: return check_groups(value);
    case SchemaId::Outline: return catching([&] { (void)outline_from_json(value); });
    case SchemaId::ReviewReport: return check_review(value);
    case SchemaId::ReaderProfile: return catching([&] { (void)validate_profile(value, ProfileOrigin::Inferred); });
    case SchemaId::DimensionInstances: return check_instances(value);
    }
    return std::string("unknown schema");
}

} // namespace factsum
