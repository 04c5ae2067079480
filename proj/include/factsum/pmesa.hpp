#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factsum/core.hpp"
#include "factsum/gateway.hpp"

namespace factsum {

struct DimensionSpec {
    PMesaDimension dimension;
    std::string_view definition;
    std::string_view indicators;
};

const DimensionSpec& dimension_spec(PMesaDimension dim) noexcept;

std::string render_dimension_prompt(PMesaDimension dim, const std::string& summary,
                                    const std::vector<TranscriptTurn>& turns, const ReaderProfile& profile);

/// One judge call per dimension (detection and severity fused); impact is aggregated locally.
/// Always returns the seven dimensions in enumeration order.
std::vector<DimensionScore> evaluate(const std::string& summary, const std::vector<TranscriptTurn>& turns,
                                     const ReaderProfile& profile, Gateway& gw, int max_repairs = kDefaultMaxRepairs);

/// Flag per score: impact >= 1.
std::vector<bool> binarize(const std::vector<DimensionScore>& scores);
inline bool has_error(int impact) noexcept { return impact >= 1; }

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
    bool operator==(const Confusion&) const = default;
};

/// Throws LengthMismatch when the vectors differ in length.
Confusion confusion(const std::vector<bool>& pred, const std::vector<bool>& truth);

/// (TP/(TP+FN) + TN/(TN+FP)) / 2. Throws Undefined when either truth class is absent.
double balanced_accuracy(const Confusion& c);
/// Throws Undefined on an empty matrix.
double accuracy(const Confusion& c);
/// FN/(FN+TP). Throws Undefined without positives.
double false_negative_rate(const Confusion& c);
/// FP/(FP+TN). Throws Undefined without negatives.
double false_positive_rate(const Confusion& c);
/// Cohen's kappa on the binary table. Throws Undefined when chance agreement is 1.
double cohen_kappa(const Confusion& c);

/// Fractional ranks (ties share the mean rank), 1-based.
std::vector<double> fractional_ranks(const std::vector<double>& v);
/// Pearson correlation of fractional ranks. Throws LengthMismatch; Undefined for n < 2 or a constant input.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);
/// Kendall tau-b. Throws LengthMismatch; Undefined for n < 2 or a constant input.
double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y);

/// One row of a score table: (sample_id, dimension, score).
struct LabelRow {
    std::string sample_id;
    PMesaDimension dimension;
    int score = 0;
};

/// Parses "sample_id,dimension,score" CSV with that header. Throws InputError.
std::vector<LabelRow> parse_label_csv(std::string_view csv);
std::string to_csv(const std::vector<LabelRow>& rows);

/// Per-dimension and pooled agreement between judge and human rows joined on (sample_id, dimension).
/// Statistics that are undefined on the data are emitted as null with the reason.
json agreement_report(const std::vector<LabelRow>& judge, const std::vector<LabelRow>& human);

json to_json(const std::vector<DimensionScore>& scores);

} // namespace factsum
