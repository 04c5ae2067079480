#include <random>

#include <gtest/gtest.h>

#include "factsum/pmesa.hpp"
#include "factsum/scope.hpp"
#include "test_support.hpp"

using namespace factsum;
using namespace factsum::testing;

namespace {

std::string trace_text(int skip = 0) {
    std::string out = "Thinking aloud as the reader.\n";
    for (int q = 1; q <= kTraceQuestions; ++q)
        if (q != skip) out += "(" + std::to_string(q) + ") answer to question " + std::to_string(q) + "\n";
    return out;
}

std::vector<Fact> three_facts() {
    return {make_fact(1, "Launch moves to April"), make_fact(2, "Budget is frozen"), make_fact(3, "Hire two testers")};
}

json pick(const Fact& f, int certainty) {
    return json{{"fact", {{"id", f.id().value}, {"fact", f.claim()}, {"context", f.context()}}},
                {"certainty_score", certainty}};
}

std::string scope_response(const json& list, int skip = 0) {
    return trace_text(skip) + "\n```json\n" + list.dump(2) + "\n```\n";
}

ReaderProfile grad_student() {
    return validate_profile({{"role", "Graduate student"},
                             {"expertise", "Second-year, new to the codebase"},
                             {"goals", "Finish the evaluation chapter"},
                             {"interests", "Benchmarks"}},
                            ProfileOrigin::Provided);
}

// Reference balanced accuracy straight from the label vectors.
double oracle_ba(const std::vector<bool>& pred, const std::vector<bool>& truth) {
    double pos = 0, neg = 0, hit_pos = 0, hit_neg = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (truth[i]) {
            ++pos;
            hit_pos += pred[i] ? 1 : 0;
        } else {
            ++neg;
            hit_neg += pred[i] ? 0 : 1;
        }
    }
    return (hit_pos / pos + hit_neg / neg) / 2.0;
}

std::vector<bool> labels(std::size_t n1, std::size_t n0, bool first) {
    std::vector<bool> v(n1, first);
    v.insert(v.end(), n0, !first);
    return v;
}

} // namespace

// ---------------------------------------------------------------- trace

TEST(Trace, NineMarkersParse) {
    const auto t = parse_trace(trace_text());
    ASSERT_EQ(t.answers.size(), 9u);
    EXPECT_EQ(t.answers[0].answer, "answer to question 1");
    EXPECT_EQ(t.answers[3].phase, TracePhase::InitialAssessment);
    EXPECT_EQ(t.answers[7].phase, TracePhase::Controlling);
    EXPECT_EQ(t.answers[8].phase, TracePhase::Evaluation);
    EXPECT_EQ(to_json(t)["answers"][8]["question_id"], "Q9");
}

TEST(Trace, DecoratedMarkersAndMultilineAnswers) {
    std::string text;
    for (int q = 1; q <= 9; ++q) text += "**(" + std::to_string(q) + ")** first line\ncontinued\n";
    const auto t = parse_trace(text);
    EXPECT_EQ(t.answers[4].answer, "first line\ncontinued");
}

TEST(Trace, AnyMissingQuestionFails) {
    for (int skip = 1; skip <= 9; ++skip) {
        try {
            parse_trace(trace_text(skip));
            ADD_FAILURE() << "accepted a trace without question " << skip;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::InvalidValue);
            EXPECT_NE(e.detail().find("(" + std::to_string(skip) + ")"), std::string::npos) << e.detail();
        }
    }
}

TEST(Trace, EmptyAnswerFails) {
    std::string text = trace_text();
    text.replace(text.find("(4) answer to question 4"), 24, "(4)   ");
    EXPECT_THROW(parse_trace(text), Error);
}

TEST(Trace, PhaseBoundaries) {
    EXPECT_EQ(phase_of(3), TracePhase::Planning);
    EXPECT_EQ(phase_of(4), TracePhase::InitialAssessment);
    EXPECT_EQ(phase_of(7), TracePhase::InitialAssessment);
    EXPECT_THROW(phase_of(0), Error);
    EXPECT_THROW(phase_of(10), Error);
}

// ---------------------------------------------------------------- selection

TEST(Selection, CertaintyFortyKeptThirtyNineDropped) {
    const auto facts = three_facts();
    const auto s = parse_selection(json::array({pick(facts[0], 40), pick(facts[1], 39)}), facts);
    ASSERT_EQ(s.kept.size(), 1u);
    EXPECT_EQ(s.kept[0], (SelectedFact{FactId{1}, 40}));
    ASSERT_EQ(s.dropped.size(), 1u);
    EXPECT_EQ(s.dropped[0], (SelectedFact{FactId{2}, 39}));
}

TEST(Selection, SortedDescendingStable) {
    const auto facts = three_facts();
    const auto s = parse_selection(json::array({pick(facts[2], 40), pick(facts[0], 70), pick(facts[1], 90)}), facts);
    ASSERT_EQ(s.kept.size(), 3u);
    EXPECT_EQ(s.kept[0].certainty, 90);
    EXPECT_EQ(s.kept[1].certainty, 70);
    EXPECT_EQ(s.kept[2].certainty, 40);

    const auto tie = parse_selection(json::array({pick(facts[2], 50), pick(facts[0], 50)}), facts);
    EXPECT_EQ(tie.kept[0].id, FactId{3});
    EXPECT_EQ(tie.kept[1].id, FactId{1});
}

TEST(Selection, DuplicatesKeepFirst) {
    const auto facts = three_facts();
    const auto s = parse_selection(json::array({pick(facts[0], 80), pick(facts[0], 20)}), facts);
    ASSERT_EQ(s.kept.size(), 1u);
    EXPECT_EQ(s.kept[0].certainty, 80);
    EXPECT_TRUE(s.dropped.empty());
}

TEST(Selection, ReferencesMustMatch) {
    const auto facts = three_facts();
    json edited = pick(facts[0], 80);
    edited["fact"]["fact"] = "Launch moves to May";
    json unknown = pick(facts[0], 80);
    unknown["fact"]["id"] = 42;
    for (const auto& item : {edited, unknown}) {
        try {
            parse_selection(json::array({item}), facts);
            ADD_FAILURE();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::UnknownFactReference);
        }
    }
    json out_of_range = pick(facts[0], 101);
    EXPECT_THROW(parse_selection(json::array({out_of_range}), facts), Error);
    EXPECT_THROW(parse_selection(json::object(), facts), Error);
}

TEST(ScopeResponse, SplitsTraceAndSelection) {
    const auto facts = three_facts();
    const auto r = parse_scope_response(scope_response(json::array({pick(facts[1], 60)})), facts);
    EXPECT_EQ(r.trace.answers.size(), 9u);
    EXPECT_EQ(r.selection.kept.at(0).id, FactId{2});
    EXPECT_THROW(parse_scope_response(trace_text(), facts), Error);
}

TEST(ExploreAndSelect, UnknownIdRepairListsValidIds) {
    const auto facts = three_facts();
    json bad = pick(facts[0], 80);
    bad["fact"]["id"] = 9;
    Rig rig(std::vector<std::string>{scope_response(json::array({bad})),
                                     scope_response(json::array({pick(facts[0], 80)}))});
    const auto r = explore_and_select(grad_student(), facts, rig.gw);
    EXPECT_EQ(r.selection.kept.size(), 1u);
    ASSERT_EQ(rig.requests().size(), 2u);
    const auto repair = rig.requests()[1].user_prompt;
    EXPECT_NE(repair.find("Valid fact ids: 1, 2, 3"), std::string::npos);
    EXPECT_EQ(rig.requests()[0].stage_tag, "scope_select");
}

TEST(ExploreAndSelect, IncompleteTraceRepaired) {
    const auto facts = three_facts();
    Rig rig(std::vector<std::string>{scope_response(json::array({pick(facts[0], 80)}), 5),
                                     scope_response(json::array({pick(facts[0], 80)}))});
    explore_and_select(grad_student(), facts, rig.gw);
    EXPECT_NE(rig.requests()[1].user_prompt.find("missing question (5)"), std::string::npos);
}

// ---------------------------------------------------------------- profiles

TEST(InferProfile, ReturnsInferredOrigin) {
    Rig rig(std::vector<std::string>{
        R"({"role": "Graduate student", "expertise": "New", "goals": "Finish chapter", "interests": "Benchmarks"})"});
    const auto p = infer_profile(turns_of({{"A", "hi"}}), rig.gw);
    EXPECT_EQ(p.role, "Graduate student");
    EXPECT_EQ(p.origin, ProfileOrigin::Inferred);
    EXPECT_EQ(rig.requests().at(0).stage_tag, "infer_profile");
}

TEST(InferProfile, EmptyRoleRepaired) {
    Rig rig(std::vector<std::string>{
        R"({"role": " ", "expertise": "New", "goals": "Finish", "interests": "Benchmarks"})",
        R"({"role": "Student", "expertise": "New", "goals": "Finish", "interests": "Benchmarks"})"});
    EXPECT_EQ(infer_profile(turns_of({{"A", "hi"}}), rig.gw).role, "Student");
    EXPECT_EQ(rig.gw.call_count(), 2u);
}

TEST(PersonaScore, ProvidedAndInferredProfilesPromptIdentically) {
    const auto facts = three_facts();
    const std::string reply =
        R"([{"fact_id":1,"feature":"f","reasoning":"r","importance_score":7,"persona_alignment_score":8,"alignment_explanation":"e","feature_type":"DECISION","certainty_score":70},)"
        R"({"fact_id":2,"feature":"f","reasoning":"r","importance_score":3,"persona_alignment_score":2,"alignment_explanation":"e","feature_type":"CONTEXT","certainty_score":70},)"
        R"({"fact_id":3,"feature":"f","reasoning":"r","importance_score":6,"persona_alignment_score":9,"alignment_explanation":"e","feature_type":"ACTION","certainty_score":70}])";
    auto provided = grad_student();
    auto inferred = provided;
    inferred.origin = ProfileOrigin::Inferred;
    Rig a(std::vector<std::string>{reply});
    Rig b(std::vector<std::string>{reply});
    const auto sa = score_facts_persona(facts, provided, a.gw);
    score_facts_persona(facts, inferred, b.gw);
    EXPECT_EQ(a.requests().at(0).user_prompt, b.requests().at(0).user_prompt);
    EXPECT_EQ(a.requests().at(0).system_prompt, b.requests().at(0).system_prompt);
    ASSERT_EQ(sa.size(), 3u);
    EXPECT_EQ(sa[0].alignment, 8);
}

TEST(PersonaMode, WireTokens) {
    for (auto m : {PersonaMode::General, PersonaMode::TailorTo, PersonaMode::Roleplay, PersonaMode::Scope})
        EXPECT_EQ(parse_persona_mode(to_string(m)), m);
    EXPECT_FALSE(parse_persona_mode("Scope"));
    EXPECT_THROW(baseline_prompt(PersonaMode::Scope, grad_student(), {}), Error);
}

// ---------------------------------------------------------------- p-mesa

TEST(Evaluate, SevenDimensionsInOrder) {
    std::map<std::string, std::vector<std::string>> queues;
    for (auto d : kAllDimensions) queues["pmesa:" + std::string(to_wire(d))] = {R"({"instances": []})"};
    queues["pmesa:goal_alignment"] = {
        R"({"instances": [{"description": "misses the chapter deadline", "severity": 3}, {"description": "vague", "severity": 2}]})"};
    Rig rig(queues);
    const auto scores = evaluate("Summary.", turns_of({{"A", "hi"}}), grad_student(), rig.gw);
    ASSERT_EQ(scores.size(), 7u);
    for (std::size_t i = 0; i < scores.size(); ++i) EXPECT_EQ(scores[i].dimension, kAllDimensions[i]);
    EXPECT_EQ(scores[3].dimension, PMesaDimension::GoalAlignment);
    EXPECT_EQ(scores[3].impact, 3);
    const auto flags = binarize(scores);
    EXPECT_EQ(std::count(flags.begin(), flags.end(), true), 1);
    EXPECT_EQ(rig.gw.call_count(), 7u);
}

TEST(Evaluate, AllCleanIsAllZero) {
    Rig rig(std::vector<std::string>(7, R"({"instances": []})"));
    for (const auto& s : evaluate("S", turns_of({{"A", "hi"}}), grad_student(), rig.gw)) EXPECT_EQ(s.impact, 0);
}

TEST(Evaluate, SeverityOutOfRangeRepaired) {
    std::vector<std::string> replies{R"({"instances": [{"description": "x", "severity": 6}]})"};
    replies.insert(replies.end(), 7, R"({"instances": []})");
    Rig rig(replies);
    evaluate("S", turns_of({{"A", "hi"}}), grad_student(), rig.gw);
    EXPECT_EQ(rig.gw.call_count(), 8u);
}

TEST(Evaluate, PromptNamesDimensionAndReader) {
    const auto p = render_dimension_prompt(PMesaDimension::KnowledgeLevelFit, "The summary.", turns_of({{"A", "hi"}}),
                                           grad_student());
    EXPECT_NE(p.find(dimension_spec(PMesaDimension::KnowledgeLevelFit).definition), std::string::npos);
    EXPECT_NE(p.find("Graduate student"), std::string::npos);
    EXPECT_NE(p.find("The summary."), std::string::npos);
}

TEST(Binarize, ThresholdAtOne) {
    EXPECT_FALSE(has_error(0));
    EXPECT_TRUE(has_error(1));
    EXPECT_TRUE(has_error(5));
    const auto flags = binarize({DimensionScore::aggregate(PMesaDimension::Factuality, {}),
                                 DimensionScore::aggregate(PMesaDimension::Relevance, {{"x", 1}})});
    EXPECT_EQ(flags, (std::vector<bool>{false, true}));
}

TEST(Confusion, MatchesEnumeration) {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 30)(rng);
        std::vector<bool> p(n), t(n);
        Confusion expect;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = rng() & 1;
            t[i] = rng() & 1;
            std::size_t* cell = p[i] ? (t[i] ? &expect.tp : &expect.fp) : (t[i] ? &expect.fn : &expect.tn);
            ++*cell;
        }
        EXPECT_EQ(confusion(p, t), expect);
    }
    EXPECT_THROW(confusion({true}, {}), Error);
}

TEST(BalancedAccuracy, WorkedExample) {
    const Confusion c{.tp = 9, .fp = 2, .tn = 8, .fn = 1};
    EXPECT_NEAR(balanced_accuracy(c), 0.85, 1e-12);
    EXPECT_NEAR(accuracy(c), 0.85, 1e-12);
    EXPECT_NEAR(false_negative_rate(c), 0.1, 1e-12);
    EXPECT_NEAR(false_positive_rate(c), 0.2, 1e-12);
    const auto pred = labels(9, 1, true);
    auto pred_all = pred;
    auto truth = labels(10, 0, true);
    const auto neg_pred = labels(2, 8, true);
    pred_all.insert(pred_all.end(), neg_pred.begin(), neg_pred.end());
    truth.insert(truth.end(), 10, false);
    EXPECT_EQ(confusion(pred_all, truth), c);
}

TEST(BalancedAccuracy, MatchesOracleOnRandomVectors) {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 40)(rng);
        std::vector<bool> p(n), t(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = rng() & 1;
            t[i] = rng() & 1;
        }
        t[0] = true;
        t[1] = false;
        EXPECT_NEAR(balanced_accuracy(confusion(p, t)), oracle_ba(p, t), 1e-12);
    }
}

TEST(BalancedAccuracy, UndefinedWithoutBothClasses) {
    try {
        balanced_accuracy(Confusion{.tp = 3, .fp = 0, .tn = 0, .fn = 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Undefined);
    }
    EXPECT_THROW(balanced_accuracy(Confusion{.tp = 0, .fp = 0, .tn = 4, .fn = 0}), Error);
    EXPECT_THROW(accuracy(Confusion{}), Error);
}

TEST(CohenKappa, KnownValues) {
    // po = 0.7, pe = 0.5 -> 0.4
    EXPECT_NEAR(cohen_kappa(Confusion{.tp = 20, .fp = 5, .tn = 15, .fn = 10}), 0.4, 1e-12);
    EXPECT_NEAR(cohen_kappa(Confusion{.tp = 5, .fp = 0, .tn = 5, .fn = 0}), 1.0, 1e-12);
    EXPECT_THROW(cohen_kappa(Confusion{.tp = 4, .fp = 0, .tn = 0, .fn = 0}), Error);
}

TEST(RankCorrelation, KnownValues) {
    EXPECT_EQ(fractional_ranks({10, 20, 20, 5}), (std::vector<double>{2, 3.5, 3.5, 1}));
    EXPECT_NEAR(spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0, 1e-12);
    EXPECT_NEAR(spearman_rho({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-12);
    // x = 1..5, y = 2,1,4,3,5: d^2 sum = 4 -> 1 - 6*4/120 = 0.8
    EXPECT_NEAR(spearman_rho({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}), 0.8, 1e-12);
    // 8 concordant, 2 discordant, no ties
    EXPECT_NEAR(kendall_tau_b({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}), 0.6, 1e-12);
    // tied x: C=2 D=0 tx=1 ty=0 over 3 pairs -> 2/sqrt(3*2)
    EXPECT_NEAR(kendall_tau_b({1, 1, 2}, {1, 2, 3}), 2.0 / std::sqrt(6.0), 1e-12);
    EXPECT_THROW(spearman_rho({1, 1, 1}, {1, 2, 3}), Error);
    EXPECT_THROW(kendall_tau_b({1}, {1}), Error);
    EXPECT_THROW(spearman_rho({1, 2}, {1}), Error);
}

// ---------------------------------------------------------------- labels and agreement

TEST(LabelCsv, ParseAndRoundTrip) {
    const auto rows = parse_label_csv("sample_id,dimension,score\r\ns1,factuality,2\n\ns1, relevance ,0\n");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1].dimension, PMesaDimension::Relevance);
    EXPECT_EQ(parse_label_csv(to_csv(rows)).size(), 2u);
    EXPECT_EQ(to_csv(rows), "sample_id,dimension,score\ns1,factuality,2\ns1,relevance,0\n");
}

TEST(LabelCsv, Rejections) {
    for (const char* bad : {"", "id,dim,score\n", "sample_id,dimension,score\ns1,nonsense,1\n",
                            "sample_id,dimension,score\ns1,factuality,6\n", "sample_id,dimension,score\ns1,factuality,x\n",
                            "sample_id,dimension,score\ns1,factuality\n"}) {
        try {
            parse_label_csv(bad);
            ADD_FAILURE() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::InputError);
        }
    }
}

TEST(Agreement, PooledAndUndefinedStats) {
    const auto judge = parse_label_csv("sample_id,dimension,score\n"
                                       "a,factuality,0\na,completeness,2\nb,factuality,1\nb,completeness,0\nc,relevance,3\n");
    const auto human = parse_label_csv("sample_id,dimension,score\n"
                                       "a,factuality,0\na,completeness,3\nb,factuality,0\nb,completeness,1\n");
    const auto r = agreement_report(judge, human);
    EXPECT_EQ(r["matched_pairs"], 4);
    EXPECT_EQ(r["unmatched_judge_rows"], 1);
    // pooled: pred {0,1,1,0} truth {0,1,0,1}
    const auto& pooled = r["pooled"];
    EXPECT_EQ(pooled["confusion"]["tp"], 1);
    EXPECT_EQ(pooled["confusion"]["fp"], 1);
    EXPECT_EQ(pooled["confusion"]["fn"], 1);
    EXPECT_EQ(pooled["confusion"]["tn"], 1);
    EXPECT_NEAR(pooled["balanced_accuracy"].get<double>(), 0.5, 1e-12);
    ASSERT_EQ(r["dimensions"].size(), 7u);
    // factuality: truth has no positives
    EXPECT_TRUE(r["dimensions"][0]["balanced_accuracy"].contains("undefined"));
    EXPECT_EQ(r["dimensions"][2]["n"], 0);
    EXPECT_THROW(agreement_report(judge, parse_label_csv("sample_id,dimension,score\na,factuality,0\na,factuality,1\n")),
                 Error);
}
