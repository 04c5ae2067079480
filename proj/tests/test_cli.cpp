#include <set>

#include <gtest/gtest.h>

#include "factsum/cli.hpp"
#include "factsum/config.hpp"
#include "factsum/pmesa.hpp"
#include "factsum/pipeline.hpp"
#include "test_support.hpp"

#ifndef FACTSUM_GOLDEN
#error "FACTSUM_GOLDEN must point at tests/golden"
#endif

using namespace factsum;
using namespace factsum::testing;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string fx(const std::string& name) { return fixture(name).string(); }

json load(const fs::path& p) { return json::parse(slurp(p)); }

std::set<std::string> listing(const fs::path& dir) {
    std::set<std::string> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) out.insert(e.path().filename().string());
    return out;
}

void expect_matches_golden(const fs::path& dir, const std::string& golden) {
    const fs::path gdir = fs::path(FACTSUM_GOLDEN) / golden;
    EXPECT_EQ(listing(dir), listing(gdir));
    for (const auto& name : listing(gdir)) EXPECT_EQ(slurp(dir / name), slurp(gdir / name)) << golden << "/" << name;
}

// Copies a mock script into `dir` with some stage queues replaced, plus a config pointing at it.
fs::path patched_config(const fs::path& dir, const std::string& mock, const json& queues) {
    json script = load(fixture(mock));
    for (const auto& [stage, q] : queues.items()) script["responses"][stage] = q;
    std::ofstream(dir / "mock.json") << script.dump(2);
    std::ofstream(dir / "config.json") << json{{"backend", {{"kind", "mock"}, {"script", "mock.json"}}}}.dump();
    return dir / "config.json";
}

} // namespace

// ---------------------------------------------------------------- config

TEST(Config, DefaultsAndOverrides) {
    const auto c = config_from_json(json::parse(R"({"backend": {"kind": "mock", "script": "m.json"},
                                                    "chunking": {"budget": 300},
                                                    "policy": "low", "verify": false})"),
                                    "/base");
    EXPECT_EQ(c.backend.script, fs::path("/base/m.json"));
    EXPECT_EQ(c.chunk_budget, 300u);
    EXPECT_EQ(c.context_tail, kDefaultContextTail);
    EXPECT_EQ(c.policy.keep_min, 3);
    EXPECT_EQ(c.policy.anchor_min, 6);
    EXPECT_FALSE(c.verify);
    EXPECT_TRUE(c.refine);
    EXPECT_DOUBLE_EQ(c.merge_threshold, 0.70);
}

TEST(Config, UnknownKeysRejected) {
    for (const char* bad : {R"({"backend": {"kind": "mock", "script": "m"}, "verfy": true})",
                            R"({"backend": {"kind": "mock", "script": "m"}, "chunking": {"budgett": 1}})",
                            R"({"backend": {"kind": "carrier-pigeon"}})", R"({"backend": {"kind": "mock", "script": "m"}, "policy": "medium"})"}) {
        try {
            config_from_json(json::parse(bad), ".");
            ADD_FAILURE() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::InputError) << bad;
        }
    }
}

TEST(Config, MissingFileIsInputError) {
    try {
        load_config(fixture("no_such_config.json"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InputError);
    }
}

// ---------------------------------------------------------------- exit codes

TEST(ExitCodes, Mapping) {
    EXPECT_EQ(exit_code_for(ErrorKind::InputError), 2);
    EXPECT_EQ(exit_code_for(ErrorKind::RepairExhausted), 3);
    EXPECT_EQ(exit_code_for(ErrorKind::TransportError), 5);
    EXPECT_EQ(exit_code_for(ErrorKind::OutlineEmpty), 6);
    EXPECT_EQ(exit_code_for(ErrorKind::SelectionEmpty), 6);
    EXPECT_EQ(exit_code_for(ErrorKind::TierViolation), 1);
}

TEST(Cli, ParseErrorsExitTwo) {
    EXPECT_EQ(cli({}).code, 2);
    EXPECT_EQ(cli({"summarize"}).code, 2);
    EXPECT_EQ(cli({"summarize", "--config", fx("standup_config.json"), "--transcript", fx("standup_transcript.json"),
                   "--policy", "medium"})
                  .code,
              2);
    EXPECT_EQ(cli({"--help"}).code, 0);
}

// ---------------------------------------------------------------- goldens

TEST(Golden, LaunchSummarize) {
    TempDir tmp("golden_sum");
    const auto r = cli({"summarize", "--config", fx("launch_config.json"), "--transcript", fx("launch_transcript.json"),
                        "--out", tmp.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    expect_matches_golden(tmp.path(), "launch_summarize");
}

TEST(Golden, LaunchScope) {
    TempDir tmp("golden_scope");
    const auto r = cli({"personalize", "--config", fx("launch_scope_config.json"), "--transcript",
                        fx("launch_transcript.json"), "--profile", fx("support_profile.json"), "--mode", "scope",
                        "--out", tmp.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    expect_matches_golden(tmp.path(), "launch_scope");
}

TEST(Golden, ScopeTraceAndSelection) {
    const json trace = load(fs::path(FACTSUM_GOLDEN) / "launch_scope" / "trace.json");
    ASSERT_EQ(trace["answers"].size(), 9u);
    for (int q = 0; q < 9; ++q) EXPECT_EQ(trace["answers"][q]["question_id"], "Q" + std::to_string(q + 1));
    for (const auto& d : trace["selection"]["dropped"]) EXPECT_LT(d["certainty"].get<int>(), kSelectionCertaintyMin);
    EXPECT_FALSE(trace["profile"].contains("origin") && trace["profile"]["origin"] != "provided");
}

TEST(Golden, UsageTotalsAreRecordSums) {
    for (const char* g : {"launch_summarize", "launch_scope"}) {
        const json u = load(fs::path(FACTSUM_GOLDEN) / g / "usage.json");
        long long in = 0, out = 0;
        for (const auto& r : u["records"]) {
            in += r["input_tokens"].get<long long>();
            out += r["output_tokens"].get<long long>();
        }
        EXPECT_EQ(u["totals"]["input_tokens"].get<long long>(), in) << g;
        EXPECT_EQ(u["totals"]["output_tokens"].get<long long>(), out) << g;
        EXPECT_EQ(u["totals"]["calls"].get<std::size_t>(), u["records"].size()) << g;
    }
}

// ---------------------------------------------------------------- input errors

TEST(Cli, MissingTranscriptWritesNothing) {
    TempDir tmp("missing");
    const auto out = tmp.path() / "out";
    const auto r = cli({"summarize", "--config", fx("standup_config.json"), "--transcript",
                        fx("no_such_transcript.json"), "--out", out.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(listing(out).empty());
    EXPECT_NE(r.err.find("no_such_transcript.json"), std::string::npos) << r.err;
}

TEST(Cli, MalformedProfileIsInputError) {
    TempDir tmp("badprofile");
    std::ofstream(tmp.path() / "p.json") << R"({"role": "PM"})";
    const auto r = cli({"personalize", "--config", fx("launch_scope_config.json"), "--transcript",
                        fx("launch_transcript.json"), "--profile", (tmp.path() / "p.json").string(), "--out",
                        (tmp.path() / "out").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(listing(tmp.path() / "out").empty());
}

// ---------------------------------------------------------------- persona modes

TEST(Cli, RoleplayWithoutProfileInfersOnce) {
    TempDir tmp("roleplay");
    const auto r = cli({"personalize", "--config", fx("standup_roleplay_config.json"), "--transcript",
                        fx("standup_transcript.json"), "--mode", "roleplay", "--out", tmp.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_FALSE(fs::exists(tmp.path() / "trace.json"));
    const json usage = load(tmp.path() / "usage.json");
    int infer = 0;
    for (const auto& rec : usage["records"]) infer += rec["stage"] == "infer_profile";
    EXPECT_EQ(infer, 1);
    EXPECT_EQ(usage["totals"]["calls"], 2);
    EXPECT_EQ(load(tmp.path() / "summary.json")["review_history"], json::array());
}

TEST(Cli, TailorToWithProvidedProfileSkipsInference) {
    TempDir tmp("tailor");
    const auto r = cli({"personalize", "--config", fx("standup_roleplay_config.json"), "--transcript",
                        fx("standup_transcript.json"), "--mode", "tailor_to", "--profile", fx("support_profile.json"),
                        "--out", tmp.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json usage = load(tmp.path() / "usage.json");
    ASSERT_EQ(usage["records"].size(), 1u);
    EXPECT_EQ(usage["records"][0]["stage"], "tailor_to");
}

// ---------------------------------------------------------------- evaluation

TEST(Cli, EvaluateWithLabelsMatchesOracle) {
    TempDir tmp("eval");
    const auto r = cli({"evaluate", "--config", fx("pmesa_config.json"), "--transcript", fx("launch_transcript.json"),
                        "--summary", fx("launch_support_summary.txt"), "--profile", fx("support_profile.json"),
                        "--labels", fx("pmesa_labels.csv"), "--sample-id", "launch_support", "--out",
                        tmp.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json report = load(tmp.path() / "pmesa_report.json");
    ASSERT_EQ(report["dimensions"].size(), 7u);
    EXPECT_EQ(report["sample_id"], "launch_support");

    const auto human = parse_label_csv(slurp(fixture("pmesa_labels.csv")));
    double tp = 0, fn = 0, tn = 0, fp = 0;
    for (const auto& row : human) {
        const bool truth = row.score >= 1;
        const bool pred = report["error_flags"][std::string(to_wire(row.dimension))].get<bool>();
        (truth ? (pred ? tp : fn) : (pred ? fp : tn)) += 1;
    }
    const double expected = (tp / (tp + fn) + tn / (tn + fp)) / 2.0;
    EXPECT_NEAR(report["agreement"]["pooled"]["balanced_accuracy"].get<double>(), expected, 1e-12);
    EXPECT_EQ(report["agreement"]["matched_pairs"], 7);
    EXPECT_EQ(load(tmp.path() / "usage.json")["totals"]["calls"], 7);
}

TEST(Cli, AgreementSubcommandReadsReports) {
    TempDir tmp("agree");
    ASSERT_EQ(cli({"evaluate", "--config", fx("pmesa_config.json"), "--transcript", fx("launch_transcript.json"),
                   "--summary", fx("launch_support_summary.txt"), "--profile", fx("support_profile.json"),
                   "--sample-id", "launch_support", "--out", tmp.path().string()})
                  .code,
              0);
    const auto out = tmp.path() / "agreement";
    const auto r = cli({"agreement", "--judge", (tmp.path() / "pmesa_report.json").string(), "--human",
                        fx("pmesa_labels.csv"), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load(out / "agreement.json")["matched_pairs"], 7);
}

// ---------------------------------------------------------------- dry run, batches, unresolved

TEST(Cli, DryRunRendersWithoutCalls) {
    TempDir tmp("dry");
    const auto r = cli({"summarize", "--config", fx("launch_config.json"), "--transcript", fx("launch_transcript.json"),
                        "--dry-run", "--out", tmp.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(listing(tmp.path()), (std::set<std::string>{"prompts"}));
    const json manifest = load(tmp.path() / "prompts" / "manifest.json");
    ASSERT_EQ(manifest.size(), 2u);
    EXPECT_EQ(manifest[0]["stage"], "extract[0]");
    EXPECT_TRUE(fs::exists(tmp.path() / "prompts" / manifest[1]["file"].get<std::string>()));
}

TEST(Cli, BatchWritesPerMeetingDirectories) {
    TempDir tmp("batch");
    const auto copy = tmp.path() / "standup_copy.json";
    fs::copy_file(fixture("standup_transcript.json"), copy);
    const auto out = tmp.path() / "out";
    const auto r = cli({"summarize", "--config", fx("standup_config.json"), "--transcript",
                        fx("standup_transcript.json"), "--transcript", copy.string(), "--jobs", "2", "--out",
                        out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(listing(out), (std::set<std::string>{"standup_copy", "standup_transcript"}));
    EXPECT_EQ(slurp(out / "standup_copy" / "summary.json"), slurp(out / "standup_transcript" / "summary.json"));

    const auto dup = cli({"summarize", "--config", fx("standup_config.json"), "--transcript",
                          fx("standup_transcript.json"), "--transcript", fx("standup_transcript.json"), "--out",
                          (tmp.path() / "dup").string()});
    EXPECT_EQ(dup.code, 2);
}

TEST(Cli, UnresolvedReviewExitsFourWithArtifacts) {
    TempDir tmp("unresolved");
    const json bad_review = json{{"outline_adherence", 3}, {"factual_accuracy", 3}, {"information_coverage", 3},
                                 {"formatting", 3},         {"feedback", "Wrong."},  {"reasoning", "Many errors."}}
                                .dump();
    const auto config = patched_config(tmp.path(), "standup_mock.json",
                                       {{"review", {bad_review, bad_review}}, {"revise", {"Revised draft."}}});
    const auto out = tmp.path() / "out";
    const auto r = cli({"summarize", "--config", config.string(), "--transcript", fx("standup_transcript.json"),
                        "--out", out.string()});
    EXPECT_EQ(r.code, 4) << r.err;
    ASSERT_TRUE(fs::exists(out / "summary.json"));
    EXPECT_TRUE(load(out / "run_report.json")["writing"]["unresolved"].get<bool>());
}

TEST(Cli, RepairExhaustedExitsThree) {
    TempDir tmp("exhausted");
    const auto config = patched_config(tmp.path(), "standup_mock.json", {{"score", {"no", "no", "no"}}});
    const auto r = cli({"summarize", "--config", config.string(), "--transcript", fx("standup_transcript.json"),
                        "--out", (tmp.path() / "out").string()});
    EXPECT_EQ(r.code, 3);
    EXPECT_FALSE(fs::exists(tmp.path() / "out" / "summary.json"));
}

TEST(Cli, OversizedTurnFailsBeforeAnyCall) {
    TempDir tmp("oversized");
    std::ofstream(tmp.path() / "t.json") << json::array({{{"speaker", "A"}, {"text", std::string(2000, 'a')}}}).dump();
    std::ofstream(tmp.path() / "mock.json") << R"({"mode": "sequence", "responses": []})";
    std::ofstream(tmp.path() / "config.json")
        << R"({"backend": {"kind": "mock", "script": "mock.json"}, "chunking": {"budget": 100, "context_tail": 10}})";
    const auto r = cli({"summarize", "--config", (tmp.path() / "config.json").string(), "--transcript",
                        (tmp.path() / "t.json").string(), "--out", (tmp.path() / "out").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("TurnExceedsBudget"), std::string::npos) << r.err;
}
