#include "factsum/pmesa.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "factsum/outline_stage.hpp"
#include "factsum/prompts.hpp"
#include "factsum/text.hpp"
#include "factsum/tokenizer.hpp"

namespace factsum {

namespace {

constexpr std::array<DimensionSpec, 7> kSpecs = {{
    {PMesaDimension::Factuality,
     "Statements in the summary are backed by the transcript and none contradict it.",
     "- A claim has no support in the transcript.\n- A claim conflicts with what was said."},
    {PMesaDimension::Completeness,
     "The summary carries the information this reader needs to decide or act.",
     "- A deadline, budget, constraint or figure the reader depends on is absent.\n"
     "- A salient point from the transcript that matters to the reader is left out."},
    {PMesaDimension::Relevance,
     "The summary stays on material that bears on the reader's role.",
     "- Content that serves no purpose for this reader.\n- Decisions or tasks in the reader's area are not in focus."},
    {PMesaDimension::GoalAlignment,
     "The summary speaks to the reader's main objectives and responsibilities.",
     "- A stated or implied goal of the reader goes unaddressed.\n- Content works against or ignores a known objective."},
    {PMesaDimension::PriorityStructuring,
     "Order and emphasis put the reader's most urgent items first.",
     "- Pressing items are buried behind minor ones.\n- Actionable points are hard to locate."},
    {PMesaDimension::KnowledgeLevelFit,
     "Technical depth and vocabulary suit the reader's expertise.",
     "- Terms the reader cannot be expected to know go unexplained.\n"
     "- Explanations talk down to an expert reader or overload a novice."},
    {PMesaDimension::ContextualFraming,
     "The summary gives the background the reader needs to understand the situation.",
     "- Earlier decisions or outside factors are referenced without explanation.\n"
     "- Dependencies on other people's work are left unclear."},
}};

} // namespace

const DimensionSpec& dimension_spec(PMesaDimension dim) noexcept { return kSpecs[static_cast<std::size_t>(dim)]; }

std::string render_dimension_prompt(PMesaDimension dim, const std::string& summary,
                                    const std::vector<TranscriptTurn>& turns, const ReaderProfile& profile) {
    const auto& spec = dimension_spec(dim);
    return prompts::render_asset("pmesa_dimension", {{"dimension", std::string(display_name(dim))},
                                                     {"definition", std::string(spec.definition)},
                                                     {"indicators", std::string(spec.indicators)},
                                                     {"reader_profile", render_character_sheet(profile)},
                                                     {"transcript", render_turns(turns)},
                                                     {"summary", summary}});
}

std::vector<DimensionScore> evaluate(const std::string& summary, const std::vector<TranscriptTurn>& turns,
                                     const ReaderProfile& profile, Gateway& gw, int max_repairs) {
    std::vector<DimensionScore> out;
    out.reserve(kAllDimensions.size());
    for (auto dim : kAllDimensions) {
        const auto prompt = render_dimension_prompt(dim, summary, turns, profile);
        auto result = complete_json(gw, gw.request("pmesa:" + std::string(to_wire(dim)), prompt),
                                    SchemaId::DimensionInstances, max_repairs);
        std::vector<ErrorInstance> instances;
        for (const auto& inst : result.value["instances"])
            instances.push_back(ErrorInstance{inst["description"].get<std::string>(), inst["severity"].get<int>()});
        out.push_back(DimensionScore::aggregate(dim, std::move(instances)));
    }
    return out;
}

std::vector<bool> binarize(const std::vector<DimensionScore>& scores) {
    std::vector<bool> out;
    out.reserve(scores.size());
    for (const auto& s : scores) out.push_back(has_error(s.impact));
    return out;
}

Confusion confusion(const std::vector<bool>& pred, const std::vector<bool>& truth) {
    if (pred.size() != truth.size())
        throw Error(ErrorKind::LengthMismatch, "prediction has " + std::to_string(pred.size()) + " labels, truth has " +
                                                   std::to_string(truth.size()));
    Confusion c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && truth[i]) ++c.tp;
        else if (pred[i]) ++c.fp;
        else if (truth[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

namespace {

double ratio(std::size_t num, std::size_t den, const char* what) {
    if (den == 0) throw Error(ErrorKind::Undefined, what);
    return static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

double balanced_accuracy(const Confusion& c) {
    const double sen = ratio(c.tp, c.tp + c.fn, "balanced accuracy needs at least one positive truth label");
    const double spe = ratio(c.tn, c.tn + c.fp, "balanced accuracy needs at least one negative truth label");
    return (sen + spe) / 2.0;
}

double accuracy(const Confusion& c) { return ratio(c.tp + c.tn, c.total(), "accuracy of an empty table"); }

double false_negative_rate(const Confusion& c) {
    return ratio(c.fn, c.fn + c.tp, "false negative rate needs at least one positive truth label");
}

double false_positive_rate(const Confusion& c) {
    return ratio(c.fp, c.fp + c.tn, "false positive rate needs at least one negative truth label");
}

double cohen_kappa(const Confusion& c) {
    const double n = static_cast<double>(c.total());
    if (n == 0) throw Error(ErrorKind::Undefined, "kappa of an empty table");
    const double po = static_cast<double>(c.tp + c.tn) / n;
    const double pe = (static_cast<double>(c.tp + c.fp) * static_cast<double>(c.tp + c.fn) +
                       static_cast<double>(c.fn + c.tn) * static_cast<double>(c.fp + c.tn)) /
                      (n * n);
    if (pe >= 1.0) throw Error(ErrorKind::Undefined, "kappa is undefined when chance agreement is 1");
    return (po - pe) / (1.0 - pe);
}

std::vector<double> fractional_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

namespace {

void check_pairs(const std::vector<double>& x, const std::vector<double>& y, const char* what) {
    if (x.size() != y.size())
        throw Error(ErrorKind::LengthMismatch, std::string(what) + ": " + std::to_string(x.size()) + " vs " +
                                                   std::to_string(y.size()) + " values");
    if (x.size() < 2) throw Error(ErrorKind::Undefined, std::string(what) + " needs at least two pairs");
}

} // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    check_pairs(x, y, "spearman");
    const auto rx = fractional_ranks(x);
    const auto ry = fractional_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) throw Error(ErrorKind::Undefined, "spearman is undefined for a constant input");
    return sxy / std::sqrt(sxx * syy);
}

double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    check_pairs(x, y, "kendall");
    long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0 && dy == 0) continue;
            if (dx == 0) ++ties_x;
            else if (dy == 0) ++ties_y;
            else if ((dx > 0) == (dy > 0)) ++concordant;
            else ++discordant;
        }
    }
    const double n1 = static_cast<double>(concordant + discordant + ties_x);
    const double n2 = static_cast<double>(concordant + discordant + ties_y);
    if (n1 == 0 || n2 == 0) throw Error(ErrorKind::Undefined, "kendall is undefined for a constant input");
    return static_cast<double>(concordant - discordant) / std::sqrt(n1 * n2);
}

std::vector<LabelRow> parse_label_csv(std::string_view csv) {
    std::vector<LabelRow> rows;
    std::istringstream in{std::string(csv)};
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(text::trim(cell));
        if (!header) {
            if (cells != std::vector<std::string>{"sample_id", "dimension", "score"})
                throw Error(ErrorKind::InputError, "label CSV header must be 'sample_id,dimension,score'");
            header = true;
            continue;
        }
        const std::string where = "label CSV line " + std::to_string(lineno);
        if (cells.size() != 3) throw Error(ErrorKind::InputError, where + ": expected 3 columns");
        auto dim = parse_dimension(cells[1]);
        if (!dim) throw Error(ErrorKind::InputError, where + ": unknown dimension '" + cells[1] + "'");
        int score = 0;
        try {
            std::size_t used = 0;
            score = std::stoi(cells[2], &used);
            if (used != cells[2].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw Error(ErrorKind::InputError, where + ": score '" + cells[2] + "' is not an integer");
        }
        if (score < kSeverityMin || score > kSeverityMax)
            throw Error(ErrorKind::InputError, where + ": score " + cells[2] + " outside [0,5]");
        if (cells[0].empty()) throw Error(ErrorKind::InputError, where + ": empty sample_id");
        rows.push_back(LabelRow{cells[0], *dim, score});
    }
    if (!header) throw Error(ErrorKind::InputError, "label CSV is empty");
    return rows;
}

std::string to_csv(const std::vector<LabelRow>& rows) {
    std::string out = "sample_id,dimension,score\n";
    for (const auto& r : rows)
        out += r.sample_id + "," + std::string(to_wire(r.dimension)) + "," + std::to_string(r.score) + "\n";
    return out;
}

namespace {

template <typename Fn>
json guarded(Fn&& fn) {
    try {
        return json(fn());
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Undefined) throw;
        return json{{"undefined", e.detail()}};
    }
}

json stats_block(const std::vector<int>& judge, const std::vector<int>& human) {
    std::vector<bool> pred, truth;
    std::vector<double> jx, hy;
    for (std::size_t i = 0; i < judge.size(); ++i) {
        pred.push_back(has_error(judge[i]));
        truth.push_back(has_error(human[i]));
        jx.push_back(judge[i]);
        hy.push_back(human[i]);
    }
    const auto c = confusion(pred, truth);
    return json{{"n", judge.size()},
                {"confusion", {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}},
                {"balanced_accuracy", guarded([&] { return balanced_accuracy(c); })},
                {"accuracy", guarded([&] { return accuracy(c); })},
                {"cohen_kappa", guarded([&] { return cohen_kappa(c); })},
                {"false_negative_rate", guarded([&] { return false_negative_rate(c); })},
                {"false_positive_rate", guarded([&] { return false_positive_rate(c); })},
                {"spearman_rho", guarded([&] { return spearman_rho(jx, hy); })},
                {"kendall_tau_b", guarded([&] { return kendall_tau_b(jx, hy); })}};
}

} // namespace

json agreement_report(const std::vector<LabelRow>& judge, const std::vector<LabelRow>& human) {
    std::map<std::pair<std::string, PMesaDimension>, int> human_by_key;
    for (const auto& r : human) {
        if (!human_by_key.emplace(std::make_pair(r.sample_id, r.dimension), r.score).second)
            throw Error(ErrorKind::InputError, "duplicate label for sample '" + r.sample_id + "', dimension " +
                                                   std::string(to_wire(r.dimension)));
    }
    std::map<PMesaDimension, std::pair<std::vector<int>, std::vector<int>>> per_dim;
    std::vector<int> all_j, all_h;
    std::size_t unmatched = 0;
    for (const auto& r : judge) {
        auto it = human_by_key.find({r.sample_id, r.dimension});
        if (it == human_by_key.end()) {
            ++unmatched;
            continue;
        }
        per_dim[r.dimension].first.push_back(r.score);
        per_dim[r.dimension].second.push_back(it->second);
        all_j.push_back(r.score);
        all_h.push_back(it->second);
    }
    json dims = json::array();
    for (auto dim : kAllDimensions) {
        json block = per_dim.count(dim) ? stats_block(per_dim[dim].first, per_dim[dim].second)
                                        : stats_block({}, {});
        block["dimension"] = to_wire(dim);
        dims.push_back(std::move(block));
    }
    return json{{"matched_pairs", all_j.size()},
                {"unmatched_judge_rows", unmatched},
                {"dimensions", std::move(dims)},
                {"pooled", stats_block(all_j, all_h)}};
}

json to_json(const std::vector<DimensionScore>& scores) {
    json out = json::array();
    for (const auto& s : scores) out.push_back(to_json(s));
    return out;
}

} // namespace factsum
