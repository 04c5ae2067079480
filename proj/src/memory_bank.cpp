#include "factsum/memory_bank.hpp"

#include <algorithm>
#include <set>

#include "factsum/text.hpp"

namespace factsum {

double lcs_ratio(std::string_view a, std::string_view b) {
    const auto x = text::decode_utf8(a);
    const auto y = text::decode_utf8(b);
    if (x.empty() && y.empty()) return 1.0;
    if (x.empty() || y.empty()) return 0.0;
    // Two-row DP over the shorter string.
    const auto& outer = x.size() >= y.size() ? x : y;
    const auto& inner = x.size() >= y.size() ? y : x;
    std::vector<std::size_t> prev(inner.size() + 1, 0), cur(inner.size() + 1, 0);
    for (char32_t c : outer) {
        for (std::size_t j = 1; j <= inner.size(); ++j)
            cur[j] = c == inner[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return 2.0 * static_cast<double>(prev[inner.size()]) / static_cast<double>(x.size() + y.size());
}

double token_jaccard(std::string_view a, std::string_view b) {
    const auto ta = text::split_whitespace(text::to_lower_ascii(a));
    const auto tb = text::split_whitespace(text::to_lower_ascii(b));
    const std::set<std::string> sa(ta.begin(), ta.end()), sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t shared = 0;
    for (const auto& t : sa) shared += sb.count(t);
    return static_cast<double>(shared) / static_cast<double>(sa.size() + sb.size() - shared);
}

double similarity(std::string_view a, std::string_view b) { return (lcs_ratio(a, b) + token_jaccard(a, b)) / 2.0; }

std::string merge_contexts(std::string_view first, std::string_view second) {
    std::vector<std::string> kept;
    std::set<std::string> seen;
    for (auto part : {first, second}) {
        for (auto& s : text::split_sentences(part))
            if (seen.insert(s).second) kept.push_back(std::move(s));
    }
    return text::join(kept, " ");
}

std::optional<int> max_relevance(std::optional<int> a, std::optional<int> b) noexcept {
    if (!a) return b;
    if (!b) return a;
    return std::max(*a, *b);
}

MemoryBank::MemoryBank(double threshold) : threshold_(threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw Error(ErrorKind::InvalidValue, "merge threshold must be in (0,1]");
}

InsertResult MemoryBank::insert(const Fact& fact) {
    if (facts_.count(fact.id()))
        throw Error(ErrorKind::InvalidValue, "fact #" + std::to_string(fact.id().value) + " is already in the bank");
    for (FactId id : order_) {
        const Fact& stored = facts_.at(id);
        const double sim = similarity(stored.claim(), fact.claim());
        if (sim < threshold_) continue;
        Fact merged = stored.with_context(merge_contexts(stored.context(), fact.context()))
                          .with_relevance(max_relevance(stored.relevance(), fact.relevance()));
        if (!merged.label()) merged = merged.with_label(fact.label());
        if (fact.certainty() && (!merged.certainty() || *fact.certainty() > *merged.certainty()))
            merged = merged.with_certainty(fact.certainty());
        facts_.insert_or_assign(id, std::move(merged));
        merge_log_.push_back(MergeRecord{id, fact.id(), sim});
        return InsertResult{id};
    }
    facts_.emplace(fact.id(), fact);
    order_.push_back(fact.id());
    return InsertResult{};
}

const Fact& MemoryBank::get(FactId id) const {
    auto it = facts_.find(id);
    if (it == facts_.end())
        throw Error(ErrorKind::UnknownFactReference, "fact #" + std::to_string(id.value) + " is not in the bank");
    return it->second;
}

std::vector<Fact> MemoryBank::facts() const {
    std::vector<Fact> out;
    out.reserve(order_.size());
    for (FactId id : order_) out.push_back(facts_.at(id));
    return out;
}

void MemoryBank::replace(const Fact& fact) {
    auto it = facts_.find(fact.id());
    if (it == facts_.end())
        throw Error(ErrorKind::UnknownFactReference, "fact #" + std::to_string(fact.id().value) + " is not in the bank");
    it->second = fact;
}

json MemoryBank::snapshot() const {
    json facts = json::array();
    for (FactId id : order_) facts.push_back(to_json(facts_.at(id)));
    json log = json::array();
    for (const auto& m : merge_log_)
        log.push_back(json{{"kept", m.kept.value}, {"absorbed", m.absorbed.value}, {"similarity", m.similarity}});
    return json{{"merge_threshold", threshold_}, {"facts", std::move(facts)}, {"merge_log", std::move(log)}};
}

MemoryBank MemoryBank::from_snapshot(const json& j) {
    try {
        MemoryBank bank(j.at("merge_threshold").get<double>());
        for (const auto& f : j.at("facts")) {
            Fact fact = fact_from_json(f);
            if (!bank.facts_.emplace(fact.id(), fact).second)
                throw Error(ErrorKind::InputError, "duplicate fact id in snapshot");
            bank.order_.push_back(fact.id());
        }
        for (const auto& m : j.at("merge_log"))
            bank.merge_log_.push_back(MergeRecord{FactId{m.at("kept").get<std::uint32_t>()},
                                                  FactId{m.at("absorbed").get<std::uint32_t>()},
                                                  m.at("similarity").get<double>()});
        return bank;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InputError, std::string("malformed bank snapshot: ") + e.what());
    }
}

} // namespace factsum
