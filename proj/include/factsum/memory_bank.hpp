#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factsum/core.hpp"

namespace factsum {

inline constexpr double kMergeThreshold = 0.70;

/// 2*LCS(a,b) / (|a|+|b|) over code points, case-sensitive; 1.0 when both are empty.
double lcs_ratio(std::string_view a, std::string_view b);

/// |A∩B| / |A∪B| over lowercase whitespace-token sets; 1.0 when both are empty.
double token_jaccard(std::string_view a, std::string_view b);

/// Mean of `lcs_ratio` and `token_jaccard`. Symmetric, in [0,1], 1.0 for equal strings.
double similarity(std::string_view a, std::string_view b);

/// Sentence-level union of two context texts, first-seen order, joined with a single space.
std::string merge_contexts(std::string_view first, std::string_view second);

/// max of two optional relevances, unassigned ranking lowest.
std::optional<int> max_relevance(std::optional<int> a, std::optional<int> b) noexcept;

struct MergeRecord {
    FactId kept;
    FactId absorbed;
    double similarity = 0.0;

    bool operator==(const MergeRecord&) const = default;
};

struct InsertResult {
    /// Id of the stored fact that absorbed the insert, if any.
    std::optional<FactId> merged;
};

/// Central fact store. Inserting a fact whose claim is at least `threshold` similar to a stored
/// claim folds it into the first such fact (insertion order) instead of storing it.
class MemoryBank {
public:
    explicit MemoryBank(double threshold = kMergeThreshold);

    InsertResult insert(const Fact& fact);

    std::size_t size() const noexcept { return order_.size(); }
    bool empty() const noexcept { return order_.empty(); }
    bool contains(FactId id) const noexcept { return facts_.count(id) != 0; }
    /// Throws UnknownFactReference.
    const Fact& get(FactId id) const;
    /// Facts in insertion order.
    std::vector<Fact> facts() const;
    const std::vector<MergeRecord>& merge_log() const noexcept { return merge_log_; }
    double threshold() const noexcept { return threshold_; }

    /// Replaces a stored fact with the same id (scores, consolidated context). Throws UnknownFactReference.
    void replace(const Fact& fact);

    json snapshot() const;
    /// Rebuilds a bank from `snapshot()` output without re-running merges. Throws InputError.
    static MemoryBank from_snapshot(const json& j);

private:
    double threshold_;
    std::map<FactId, Fact> facts_;
    std::vector<FactId> order_;
    std::vector<MergeRecord> merge_log_;
};

} // namespace factsum
