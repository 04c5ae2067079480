#include "factsum/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "factsum/config.hpp"
#include "factsum/pipeline.hpp"
#include "factsum/pmesa.hpp"

namespace fs = std::filesystem;

namespace factsum {

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InputError: return kExitInput;
    case ErrorKind::RepairExhausted: return kExitRepairExhausted;
    case ErrorKind::TransportError: return kExitTransport;
    case ErrorKind::OutlineEmpty:
    case ErrorKind::SelectionEmpty: return kExitEmpty;
    default: return kExitOther;
    }
}

namespace {

struct Options {
    fs::path config;
    std::vector<fs::path> transcripts;
    fs::path profile;
    std::string mode = "scope";
    std::string policy;
    bool no_verify = false;
    bool no_refine = false;
    bool dry_run = false;
    fs::path labels;
    fs::path summary;
    fs::path out = "out";
    std::string sample_id;
    unsigned jobs = 1;
    std::vector<fs::path> judge;
    fs::path human;
    std::string log_level = "warn";
};

RunConfig effective_config(const Options& o) {
    RunConfig c = load_config(o.config);
    if (!o.policy.empty()) {
        auto p = parse_policy_profile(o.policy);
        if (!p) throw Error(ErrorKind::InputError, "--policy must be default, low or high");
        c.policy = RetentionPolicy::for_profile(*p);
    }
    if (o.no_verify) c.verify = false;
    if (o.no_refine) c.refine = false;
    return c;
}

std::string file_safe(const std::string& stage) {
    std::string s;
    for (char ch : stage) s += std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' ? ch : '_';
    while (!s.empty() && s.back() == '_') s.pop_back();
    return s;
}

void write_prompts(const fs::path& dir, const std::vector<RenderedPrompt>& prompts) {
    const fs::path pdir = dir / "prompts";
    fs::create_directories(pdir);
    json manifest = json::array();
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const auto& p = prompts[i];
        std::ostringstream name;
        name << std::setw(3) << std::setfill('0') << i + 1 << '_' << file_safe(p.stage) << ".txt";
        std::ofstream f(pdir / name.str(), std::ios::binary | std::ios::trunc);
        if (!f) throw Error(ErrorKind::InputError, "cannot write '" + (pdir / name.str()).string() + "'");
        f << "=== system ===\n" << p.system_prompt << "\n=== user ===\n" << p.user_prompt << '\n';
        CompletionRequest req;
        req.stage_tag = p.stage;
        req.system_prompt = p.system_prompt;
        req.user_prompt = p.user_prompt;
        manifest.push_back(json{{"file", name.str()}, {"stage", p.stage}, {"hash", prompt_hash(req)}});
    }
    write_artifacts(pdir, {{"manifest.json", manifest}});
}

std::optional<ReaderProfile> optional_profile(const Options& o) {
    if (o.profile.empty()) return std::nullopt;
    return load_profile(o.profile);
}

PersonaMode mode_of(const Options& o) {
    auto m = parse_persona_mode(o.mode);
    if (!m) throw Error(ErrorKind::InputError, "--mode must be general, tailor_to, roleplay or scope");
    return *m;
}

// One meeting end to end. Inputs are all read before any model call; artifacts are written last.
int run_meeting(const std::string& command, const Options& o, const fs::path& transcript, const fs::path& out_dir) {
    const RunConfig config = effective_config(o);
    const auto turns = load_transcript(transcript);
    const auto profile = command == "personalize" ? optional_profile(o) : std::nullopt;
    const PersonaMode mode = command == "personalize" ? mode_of(o) : PersonaMode::General;
    if (o.dry_run) {
        write_prompts(out_dir, dry_run_prompts(command, turns, config, profile, mode, std::nullopt));
        return kExitOk;
    }
    auto backend = make_backend(config);
    Gateway gw(*backend, config.retry, config.sampling);
    PipelineResult result = command == "summarize" ? summarize_meeting(turns, config, gw)
                                                   : personalize_meeting(turns, profile, mode, config, gw);
    write_artifacts(out_dir, result.artifacts);
    if (result.unresolved) {
        spdlog::warn("[review] error budget still exceeded after revision; artifacts flagged unresolved");
        return kExitUnresolved;
    }
    return kExitOk;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const Error& e) {
        err << "factsum: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "factsum: " << e.what() << '\n';
        return kExitOther;
    }
}

int run_batch(const std::string& command, const Options& o, std::ostream& err) {
    if (o.transcripts.size() == 1) return guarded([&] { return run_meeting(command, o, o.transcripts[0], o.out); }, err);

    std::map<std::string, int> stems;
    for (const auto& t : o.transcripts)
        if (++stems[t.stem().string()] > 1)
            return err << "factsum: InputError: duplicate transcript name '" << t.stem().string() << "'\n", kExitInput;

    std::vector<int> codes(o.transcripts.size(), kExitOk);
    std::vector<std::ostringstream> errs(o.transcripts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < o.transcripts.size();) {
            const auto& t = o.transcripts[i];
            codes[i] = guarded([&] { return run_meeting(command, o, t, o.out / t.stem()); }, errs[i]);
        }
    };
    const unsigned n = std::clamp<unsigned>(o.jobs, 1, static_cast<unsigned>(o.transcripts.size()));
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    int code = kExitOk;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        err << errs[i].str();
        if (code == kExitOk) code = codes[i];
    }
    return code;
}

std::vector<LabelRow> judge_rows(const fs::path& path) {
    if (path.extension() != ".json") return parse_label_csv(read_file(path));
    const json doc = read_json_file(path);
    if (!doc.is_object() || !doc.contains("sample_id") || !doc.contains("dimensions"))
        throw Error(ErrorKind::InputError, "'" + path.string() + "' is not an evaluation report");
    std::vector<LabelRow> rows;
    for (const auto& d : doc["dimensions"]) {
        auto dim = parse_dimension(d.value("dimension", ""));
        if (!dim) throw Error(ErrorKind::InputError, "'" + path.string() + "' names an unknown dimension");
        rows.push_back({doc["sample_id"].get<std::string>(), *dim, d.value("impact", 0)});
    }
    return rows;
}

int run_evaluate(const Options& o, std::ostream& out) {
    const RunConfig config = effective_config(o);
    if (o.transcripts.size() != 1) throw Error(ErrorKind::InputError, "evaluate takes exactly one --transcript");
    const auto turns = load_transcript(o.transcripts[0]);
    const ReaderProfile profile = load_profile(o.profile);
    const std::string summary = load_summary_text(o.summary);
    const std::string sample_id = o.sample_id.empty() ? o.summary.stem().string() : o.sample_id;
    std::optional<std::vector<LabelRow>> human;
    if (!o.labels.empty()) human = parse_label_csv(read_file(o.labels));
    if (o.dry_run) {
        write_prompts(o.out, dry_run_prompts("evaluate", turns, config, profile, PersonaMode::General, summary));
        return kExitOk;
    }

    auto backend = make_backend(config);
    Gateway gw(*backend, config.retry, config.sampling);
    json report = evaluate_summary(summary, turns, profile, config, gw);
    report["sample_id"] = sample_id;
    if (human) {
        std::vector<LabelRow> judge;
        for (const auto& d : report["dimensions"])
            judge.push_back({sample_id, *parse_dimension(d["dimension"].get<std::string>()), d["impact"].get<int>()});
        report["agreement"] = agreement_report(judge, *human);
    }
    write_artifacts(o.out, {{"pmesa_report.json", report}, {"usage.json", usage_report(gw)}});
    out << report["error_flags"].dump() << '\n';
    return kExitOk;
}

int run_agreement(const Options& o, std::ostream& out) {
    std::vector<LabelRow> judge;
    for (const auto& p : o.judge) {
        auto rows = judge_rows(p);
        judge.insert(judge.end(), rows.begin(), rows.end());
    }
    const auto human = parse_label_csv(read_file(o.human));
    const json report = agreement_report(judge, human);
    write_artifacts(o.out, {{"agreement.json", report}});
    out << report.dump(2) << '\n';
    return kExitOk;
}

class ScopedLogger {
public:
    ScopedLogger(std::ostream& err, const std::string& level) : previous_(spdlog::default_logger()) {
        auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
        auto logger = std::make_shared<spdlog::logger>("factsum", sink);
        logger->set_pattern("%l %v");
        logger->set_level(spdlog::level::from_str(level));
        spdlog::set_default_logger(logger);
    }
    ~ScopedLogger() { spdlog::set_default_logger(previous_); }

private:
    std::shared_ptr<spdlog::logger> previous_;
};

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fact-grounded meeting summarization"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--log-level", o.log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Run config JSON")->required();
        sub->add_option("--policy", o.policy, "Retention profile override")
            ->check(CLI::IsMember({"default", "low", "high"}));
        sub->add_flag("--no-verify", o.no_verify, "Skip fact verification");
        sub->add_flag("--no-refine", o.no_refine, "Skip the final refinement pass");
        sub->add_flag("--dry-run", o.dry_run, "Render prompts to <out>/prompts without calling the model");
        sub->add_option("--out", o.out, "Artifact directory");
    };

    auto* summarize = app.add_subcommand("summarize", "General summary of one or more meetings");
    auto* personalize = app.add_subcommand("personalize", "Persona-specific summary");
    auto* evaluate = app.add_subcommand("evaluate", "Score a summary on the seven personalization dimensions");
    auto* agreement = app.add_subcommand("agreement", "Judge-versus-human agreement statistics");

    for (auto* sub : {summarize, personalize}) {
        common(sub);
        sub->add_option("--transcript", o.transcripts, "Transcript JSON (repeatable)")->required();
        sub->add_option("--jobs", o.jobs, "Meetings processed concurrently")->check(CLI::PositiveNumber);
    }
    personalize->add_option("--profile", o.profile, "Reader profile JSON; inferred when absent");
    personalize->add_option("--mode", o.mode, "general, tailor_to, roleplay or scope")
        ->check(CLI::IsMember({"general", "tailor_to", "roleplay", "scope"}));

    common(evaluate);
    evaluate->add_option("--transcript", o.transcripts, "Transcript JSON")->required();
    evaluate->add_option("--summary", o.summary, "summary.json artifact or plain text")->required();
    evaluate->add_option("--profile", o.profile, "Reader profile JSON")->required();
    evaluate->add_option("--labels", o.labels, "Human label CSV (sample_id,dimension,score)");
    evaluate->add_option("--sample-id", o.sample_id, "Sample id used to join labels");

    agreement->add_option("--judge", o.judge, "Judge CSV or pmesa_report.json (repeatable)")->required();
    agreement->add_option("--human", o.human, "Human label CSV")->required();
    agreement->add_option("--out", o.out, "Artifact directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "factsum: " << e.what() << '\n';
        return kExitInput;
    }

    ScopedLogger logging(err, o.log_level);
    if (*summarize) return run_batch("summarize", o, err);
    if (*personalize) return run_batch("personalize", o, err);
    if (*evaluate) return guarded([&] { return run_evaluate(o, out); }, err);
    return guarded([&] { return run_agreement(o, out); }, err);
}

} // namespace factsum
