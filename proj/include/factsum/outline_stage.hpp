#pragma once

#include <optional>
#include <string>
#include <vector>

#include "factsum/core.hpp"
#include "factsum/gateway.hpp"
#include "factsum/memory_bank.hpp"
#include "factsum/note_stage.hpp"

namespace factsum {

/// Tier score and label per feature id.
TierLookup tier_lookup(const std::vector<ScoredFeature>& features);

struct TierViolation {
    enum class Kind { AnchorOutOfTier, SupportOutOfTier, UnknownFact, AnchorMissing, AnchorRepeated };

    Kind kind = Kind::AnchorOutOfTier;
    SectionKind section = SectionKind::Overview;
    /// Index of the point within its section; unset for AnchorMissing.
    std::optional<std::size_t> point;
    FactId fact;
    std::string message;
};

/// Every reference that breaks the tier rule under `policy`, every unknown id, and every anchor-eligible
/// feature that is not attached as an anchor exactly once. Empty means the outline is certified.
std::vector<TierViolation> audit_outline(const Outline& outline, const std::vector<ScoredFeature>& features,
                                         const RetentionPolicy& policy);

/// Facts offered to the outline prompt: id, text, scores, label and tier ("anchor" or "support").
std::string render_outline_features(const std::vector<ScoredFeature>& features, const MemoryBank& bank,
                                    const RetentionPolicy& policy);

/// Plans the four-section outline from retained features. A reader profile switches to the
/// persona template (tiers then read the combined score). Audit failures are repaired.
/// Throws OutlineEmpty when no feature is anchor-eligible.
Outline plan_outline(const std::vector<ScoredFeature>& features, const MemoryBank& bank, const RetentionPolicy& policy,
                     Gateway& gw, int max_repairs = kDefaultMaxRepairs, const ReaderProfile* persona = nullptr);

/// Profile record as the persona templates see it.
std::string render_character_sheet(const ReaderProfile& profile);

} // namespace factsum
