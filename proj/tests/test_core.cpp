#include <random>

#include <gtest/gtest.h>

#include "factsum/core.hpp"
#include "factsum/text.hpp"
#include "factsum/tokenizer.hpp"
#include "test_support.hpp"

using namespace factsum;
using namespace factsum::testing;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no factsum::Error thrown";
    return ErrorKind::InputError;
}

} // namespace

TEST(Fact, ValidRecordKeepsBothFields) {
    const json raw = {{"fact", "Team agreed to launch product in Q3"},
                      {"context", "Following previous delays and market analysis, Q3 was chosen for optimal impact"}};
    const Fact f = validate_fact(raw, FactId{1}, 0);
    EXPECT_EQ(f.claim(), "Team agreed to launch product in Q3");
    EXPECT_EQ(f.context(), "Following previous delays and market analysis, Q3 was chosen for optimal impact");
    EXPECT_FALSE(f.relevance().has_value());
    EXPECT_FALSE(f.label().has_value());
}

TEST(Fact, WhitespaceClaimIsEmpty) {
    EXPECT_EQ(kind_of([] { validate_fact({{"fact", "  "}, {"context", "x"}}, FactId{1}, 0); }), ErrorKind::EmptyClaim);
    EXPECT_EQ(kind_of([] { validate_fact({{"fact", "a"}, {"context", "\t\n"}}, FactId{1}, 0); }), ErrorKind::EmptyContext);
}

TEST(Fact, UnknownKeysIgnoredMissingKeysNamed) {
    const Fact f = validate_fact({{"fact", "a"}, {"context", "b"}, {"extra", "ignored"}}, FactId{2}, 3);
    EXPECT_EQ(f.claim(), "a");
    EXPECT_EQ(f.context(), "b");
    EXPECT_EQ(f.source_chunk(), 3u);
    try {
        validate_fact({{"fact", "a"}}, FactId{1}, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingField);
        EXPECT_NE(std::string(e.what()).find("context"), std::string::npos);
    }
}

TEST(Fact, ScoreRangesEnforced) {
    const Fact f = make_fact(1, "claim");
    EXPECT_EQ(f.with_relevance(1).relevance(), 1);
    EXPECT_EQ(f.with_relevance(10).relevance(), 10);
    EXPECT_EQ(kind_of([&] { (void)f.with_relevance(0); }), ErrorKind::InvalidValue);
    EXPECT_EQ(kind_of([&] { (void)f.with_relevance(11); }), ErrorKind::InvalidValue);
    EXPECT_EQ(kind_of([&] { (void)f.with_certainty(101); }), ErrorKind::InvalidValue);
    EXPECT_EQ(f.with_certainty(0).certainty(), 0);
}

TEST(Fact, JsonRoundTrip) {
    const Fact f = make_fact(7, "  Ship it  ", " ctx ", 2).with_relevance(9).with_label(FunctionLabel::Decision).with_certainty(55);
    EXPECT_EQ(f.claim(), "Ship it");
    EXPECT_EQ(fact_from_json(to_json(f)), f);
    EXPECT_EQ(to_record(f), (json{{"fact", "Ship it"}, {"context", "ctx"}}));
}

TEST(Label, OnlyWireTokensParse) {
    for (auto l : {FunctionLabel::Decision, FunctionLabel::ActionItem, FunctionLabel::Insight, FunctionLabel::Context})
        EXPECT_EQ(parse_label(to_wire(l)), l);
    EXPECT_FALSE(parse_label("decision"));
    EXPECT_FALSE(parse_label("Action Item"));
    EXPECT_FALSE(parse_label(""));
}

TEST(Transcript, OrdinalsMustBeContiguous) {
    auto turns = turns_of({{"A", "x"}, {"B", "y"}});
    EXPECT_NO_THROW(check_contiguous(turns));
    turns[1].ordinal = 5;
    EXPECT_EQ(kind_of([&] { check_contiguous(turns); }), ErrorKind::InvalidValue);
}

TEST(Transcript, JsonInputErrors) {
    EXPECT_EQ(transcript_from_json(json::parse(R"([{"speaker":"A","text":"hi"}])")).at(0).utterance, "hi");
    EXPECT_EQ(kind_of([] { transcript_from_json(json::object()); }), ErrorKind::InputError);
    EXPECT_EQ(kind_of([] { transcript_from_json(json::parse(R"([{"speaker":"A"}])")); }), ErrorKind::InputError);
}

TEST(Profile, ProvidedNeedsRoleAndGoals) {
    const json ok = {{"role", "PM"}, {"goals", "ship"}};
    const auto p = validate_profile(ok, ProfileOrigin::Provided);
    EXPECT_EQ(p.role, "PM");
    EXPECT_EQ(p.origin, ProfileOrigin::Provided);
    EXPECT_THROW(validate_profile(ok, ProfileOrigin::Inferred), Error);
    EXPECT_THROW(validate_profile({{"role", ""}, {"goals", "x"}}, ProfileOrigin::Provided), Error);
    EXPECT_FALSE(to_record(p).contains("origin"));
}

TEST(Outline, JsonRoundTripAndOrdering) {
    const json j = {{"sections",
                     {{{"kind", "overview"}, {"points", {{{"text", "p"}, {"anchors", {1}}, {"support", {2}}}}}},
                      {{"kind", "next_steps"}, {"points", json::array()}}}}};
    const Outline o = outline_from_json(j);
    EXPECT_EQ(o.point_count(), 1u);
    EXPECT_EQ(outline_from_json(to_json(o)), o);
    const json bad = {{"sections", {{{"kind", "next_steps"}, {"points", json::array()}},
                                    {{"kind", "overview"}, {"points", json::array()}}}}};
    EXPECT_THROW(outline_from_json(bad), Error);
}

TEST(Outline, MakePointEnforcesTiers) {
    const TierLookup lookup{{FactId{1}, {9, FunctionLabel::Insight}},
                            {FactId{2}, {6, FunctionLabel::Insight}},
                            {FactId{3}, {7, FunctionLabel::Decision}}};
    EXPECT_NO_THROW(make_outline_point("p", {FactId{1}, FactId{3}}, {FactId{2}}, lookup));
    EXPECT_EQ(kind_of([&] { make_outline_point("p", {FactId{2}}, {}, lookup); }), ErrorKind::TierViolation);
    EXPECT_EQ(kind_of([&] { make_outline_point("p", {}, {FactId{1}}, lookup); }), ErrorKind::TierViolation);
}

TEST(Review, CountsMustBeNonNegative) {
    EXPECT_EQ(ReviewReport::create(1, 2, 0, 1, "f", "r").total(), 4);
    EXPECT_THROW(ReviewReport::create(-1, 0, 0, 0, "f", "r"), Error);
    EXPECT_THROW(ReviewReport::create(0, 0, 0, 0, "f", "r", 101), Error);
}

TEST(DimensionScore, ImpactIsMaxSeverity) {
    EXPECT_EQ(DimensionScore::aggregate(PMesaDimension::Relevance, {}).impact, 0);
    const auto s = DimensionScore::aggregate(PMesaDimension::GoalAlignment, {{"a", 3}, {"b", 2}});
    EXPECT_EQ(s.impact, 3);
    EXPECT_THROW(DimensionScore::aggregate(PMesaDimension::Relevance, {{"a", 6}}), Error);
    for (auto d : kAllDimensions) EXPECT_EQ(parse_dimension(to_wire(d)), d);
}

TEST(Text, Utf8AndSentences) {
    EXPECT_EQ(text::codepoint_count("héllo"), 5u);
    EXPECT_EQ(text::decode_utf8("\xff").size(), 1u);
    EXPECT_EQ(text::split_sentences("One. Two!  Three? 3.5 stays"),
              (std::vector<std::string>{"One.", "Two!", "Three?", "3.5 stays"}));
    EXPECT_EQ(text::suffix_offset("aé", 1), 1u);
    EXPECT_EQ(text::trim("  x "), "x");
}

TEST(Estimator, Formula) {
    const TokenEstimator est;
    EXPECT_EQ(est.estimate(""), 0u);
    EXPECT_EQ(est.estimate(std::string(400, 'a')), 100u);
    EXPECT_EQ(est.estimate(std::string(401, 'a')), 101u);
    EXPECT_EQ(TokenEstimator(2.0).estimate("abcd"), 2u);
    EXPECT_THROW(TokenEstimator(0.0), Error);
    const auto words = TokenEstimator::pluggable([](std::string_view s) { return text::split_whitespace(s).size(); });
    EXPECT_EQ(words.estimate("a b c"), 3u);
}

TEST(Estimator, WithinTwentyPercentOfGpt2Count) {
    const std::string paragraph =
        "MAYA: Thanks for joining. The only agenda item is the Atlas mobile app launch, which we had pencilled in for March 1.\n"
        "RAVI: Engineering is not ready for March 1. The payment SDK integration still fails on Android 12 devices, roughly one checkout in five.\n"
        "LENA: If the date moves I need to know today, the press outreach is scheduled around it.";
    // GPT-2 BPE count for this paragraph, computed once offline.
    constexpr double kReference = 81.0;
    const double estimate = static_cast<double>(TokenEstimator().estimate(paragraph));
    EXPECT_NEAR(estimate, kReference, 0.2 * kReference);
}

TEST(Chunker, UnderBudgetIsOneChunk) {
    const auto turns = turns_of({{"A", "one"}, {"B", "two"}, {"C", "three"}});
    const auto chunks = chunk_transcript(turns, 10000, 64, TokenEstimator());
    ASSERT_EQ(chunks.size(), 1u);
    EXPECT_EQ(chunks[0].turns, turns);
    EXPECT_TRUE(chunks[0].previous_context.empty());
}

TEST(Chunker, SplitsBeforeOverflowingTurn) {
    // Each rendered turn is "A: " + 17 chars = 20 chars = 5 tokens; two turns plus newline = 11 tokens.
    const auto turns = turns_of({{"A", std::string(17, 'x')}, {"B", std::string(17, 'y')}, {"C", std::string(17, 'z')}});
    const auto chunks = chunk_transcript(turns, 10, 3, TokenEstimator());
    ASSERT_EQ(chunks.size(), 3u);
    EXPECT_EQ(chunks[1].turns.at(0).speaker, "B");
    EXPECT_EQ(chunks[1].previous_context, std::string(12, 'x'));
    EXPECT_EQ(chunks[2].index, 2u);
}

TEST(Chunker, OversizedTurnNamed) {
    const auto turns = turns_of({{"A", "short"}, {"B", std::string(200, 'q')}});
    try {
        chunk_transcript(turns, 20, 4, TokenEstimator());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::TurnExceedsBudget);
        EXPECT_NE(std::string(e.what()).find("turn 1"), std::string::npos);
    }
}

TEST(Chunker, RandomTranscriptsPartitionLosslessly) {
    std::mt19937 rng(7);
    const TokenEstimator est;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<TranscriptTurn> turns;
        const int n = std::uniform_int_distribution<int>(1, 30)(rng);
        for (int i = 0; i < n; ++i)
            turns.push_back({"S" + std::to_string(i % 3), std::string(std::uniform_int_distribution<int>(1, 60)(rng), 'w'),
                             static_cast<std::size_t>(i)});
        const std::size_t budget = std::uniform_int_distribution<std::size_t>(20, 120)(rng);
        const auto chunks = chunk_transcript(turns, budget, 8, est);
        std::vector<TranscriptTurn> joined;
        for (const auto& c : chunks) {
            EXPECT_LE(c.token_estimate, budget);
            EXPECT_EQ(c.token_estimate, est.estimate(render_chunk(c)));
            joined.insert(joined.end(), c.turns.begin(), c.turns.end());
        }
        EXPECT_EQ(joined, turns);
    }
}
