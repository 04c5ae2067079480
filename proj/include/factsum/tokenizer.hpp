#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "factsum/core.hpp"

namespace factsum {

/// Token counting strategy. Heuristic mode divides the code-point count by `chars_per_token`;
/// pluggable mode delegates to an exact tokenizer supplied by the caller.
class TokenEstimator {
public:
    enum class Mode { Heuristic, Pluggable };
    using CountFn = std::function<std::size_t(std::string_view)>;

    static constexpr double kDefaultCharsPerToken = 4.0;

    TokenEstimator() : TokenEstimator(kDefaultCharsPerToken) {}
    /// Throws InvalidValue unless chars_per_token > 0.
    explicit TokenEstimator(double chars_per_token);
    /// The counter must return >= 1 for non-empty text and be monotone under concatenation.
    static TokenEstimator pluggable(CountFn counter);

    Mode mode() const noexcept { return mode_; }
    double chars_per_token() const noexcept { return chars_per_token_; }

    std::size_t estimate(std::string_view text) const;

private:
    Mode mode_ = Mode::Heuristic;
    double chars_per_token_ = kDefaultCharsPerToken;
    CountFn counter_;
};

inline std::size_t estimate_tokens(std::string_view text, const TokenEstimator& est) { return est.estimate(text); }

struct TranscriptChunk {
    std::size_t index = 0;
    std::vector<TranscriptTurn> turns;
    /// Verbatim tail of the previous chunk's rendered text; empty for chunk 0.
    std::string previous_context;
    std::size_t token_estimate = 0;

    bool operator==(const TranscriptChunk&) const = default;
};

inline constexpr std::size_t kDefaultChunkBudget = 24000;
inline constexpr std::size_t kDefaultContextTail = 512;

/// "SPEAKER: utterance"
std::string render_turn(const TranscriptTurn& turn);
/// One rendered turn per line, joined with '\n'.
std::string render_turns(const std::vector<TranscriptTurn>& turns);
std::string render_chunk(const TranscriptChunk& chunk);

/// Longest suffix of `text` whose estimate does not exceed `max_tokens`.
std::string tail_within(std::string_view text, std::size_t max_tokens, const TokenEstimator& est);

/// Greedy fill-to-budget at turn boundaries. A turn is never split; a turn that alone exceeds the
/// budget raises TurnExceedsBudget naming its ordinal.
std::vector<TranscriptChunk> chunk_transcript(const std::vector<TranscriptTurn>& turns, std::size_t budget,
                                              std::size_t context_tail, const TokenEstimator& est);

/// Parses a JSON array of {"speaker", "text"}; ordinals are assigned 0..n-1. Throws InputError.
std::vector<TranscriptTurn> transcript_from_json(const json& j);

} // namespace factsum
