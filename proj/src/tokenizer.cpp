#include "factsum/tokenizer.hpp"

#include <cmath>

#include "factsum/text.hpp"

namespace factsum {

TokenEstimator::TokenEstimator(double chars_per_token) : chars_per_token_(chars_per_token) {
    if (!(chars_per_token > 0.0) || !std::isfinite(chars_per_token))
        throw Error(ErrorKind::InvalidValue, "chars_per_token must be positive");
}

TokenEstimator TokenEstimator::pluggable(CountFn counter) {
    if (!counter) throw Error(ErrorKind::InvalidValue, "pluggable estimator needs a counter");
    TokenEstimator est;
    est.mode_ = Mode::Pluggable;
    est.counter_ = std::move(counter);
    return est;
}

std::size_t TokenEstimator::estimate(std::string_view text) const {
    if (mode_ == Mode::Pluggable) return counter_(text);
    const auto chars = static_cast<double>(text::codepoint_count(text));
    return static_cast<std::size_t>(std::ceil(chars / chars_per_token_));
}

std::string render_turn(const TranscriptTurn& turn) { return turn.speaker + ": " + turn.utterance; }

std::string render_turns(const std::vector<TranscriptTurn>& turns) {
    std::string out;
    for (std::size_t i = 0; i < turns.size(); ++i) {
        if (i != 0) out += '\n';
        out += render_turn(turns[i]);
    }
    return out;
}

std::string render_chunk(const TranscriptChunk& chunk) { return render_turns(chunk.turns); }

std::string tail_within(std::string_view text, std::size_t max_tokens, const TokenEstimator& est) {
    if (max_tokens == 0 || text.empty()) return {};
    if (est.estimate(text) <= max_tokens) return std::string(text);
    // Suffix estimates are monotone in length, so binary search on the code-point count.
    std::size_t lo = 0;                              // fits
    std::size_t hi = text::codepoint_count(text);    // does not fit
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (est.estimate(text.substr(text::suffix_offset(text, mid))) <= max_tokens) lo = mid;
        else hi = mid;
    }
    return std::string(text.substr(text::suffix_offset(text, lo)));
}

std::vector<TranscriptChunk> chunk_transcript(const std::vector<TranscriptTurn>& turns, std::size_t budget,
                                              std::size_t context_tail, const TokenEstimator& est) {
    if (budget == 0) throw Error(ErrorKind::InvalidValue, "chunk budget must be positive");
    std::vector<TranscriptChunk> chunks;
    TranscriptChunk current;
    std::string rendered;

    auto close = [&] {
        current.index = chunks.size();
        current.token_estimate = est.estimate(rendered);
        chunks.push_back(std::move(current));
        current = TranscriptChunk{};
        current.previous_context = tail_within(rendered, context_tail, est);
        rendered.clear();
    };

    for (const auto& turn : turns) {
        const std::string line = render_turn(turn);
        if (est.estimate(line) > budget)
            throw Error(ErrorKind::TurnExceedsBudget, "turn " + std::to_string(turn.ordinal) + " needs " +
                                                          std::to_string(est.estimate(line)) + " tokens, budget is " +
                                                          std::to_string(budget));
        std::string candidate = rendered.empty() ? line : rendered + "\n" + line;
        if (!current.turns.empty() && est.estimate(candidate) > budget) {
            close();
            candidate = line;
        }
        rendered = std::move(candidate);
        current.turns.push_back(turn);
    }
    if (!current.turns.empty()) close();
    return chunks;
}

std::vector<TranscriptTurn> transcript_from_json(const json& j) {
    if (!j.is_array()) throw Error(ErrorKind::InputError, "transcript must be a JSON array of {speaker, text}");
    std::vector<TranscriptTurn> turns;
    turns.reserve(j.size());
    for (const auto& t : j) {
        const std::string where = "transcript turn " + std::to_string(turns.size());
        if (!t.is_object()) throw Error(ErrorKind::InputError, where + " is not an object");
        auto speaker = t.find("speaker");
        auto utterance = t.find("text");
        if (speaker == t.end() || !speaker->is_string())
            throw Error(ErrorKind::InputError, where + " has no string 'speaker'");
        if (utterance == t.end() || !utterance->is_string())
            throw Error(ErrorKind::InputError, where + " has no string 'text'");
        turns.push_back(TranscriptTurn{speaker->get<std::string>(), utterance->get<std::string>(), turns.size()});
    }
    return turns;
}

} // namespace factsum
