#include "factsum/gateway.hpp"

#include <cstdio>
#include <thread>

#include <spdlog/spdlog.h>

#include "factsum/prompts.hpp"
#include "factsum/text.hpp"

namespace factsum {

void CompletionRequest::validate() const {
    if (temperature < 0.0) throw Error(ErrorKind::InvalidValue, "temperature must be >= 0");
    if (max_output_tokens <= 0) throw Error(ErrorKind::InvalidValue, "max_output_tokens must be > 0");
}

json to_json(const UsageRecord& usage) {
    return json{{"stage", usage.stage_tag},
                {"input_tokens", usage.input_tokens},
                {"output_tokens", usage.output_tokens},
                {"wall_time_ms", usage.wall_time_ms}};
}

std::string prompt_hash(const CompletionRequest& request) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    feed(request.system_prompt);
    feed("\x1f");
    feed(request.user_prompt);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// ScriptedMockBackend

ScriptedMockBackend::ScriptedMockBackend(std::vector<MockResponse> sequence, TokenEstimator est)
    : mode_(Mode::Sequence), sequence_(std::move(sequence)), estimator_(std::move(est)) {}

ScriptedMockBackend::ScriptedMockBackend(std::map<std::string, MockResponse> by_hash, TokenEstimator est)
    : mode_(Mode::PromptHash), by_hash_(std::move(by_hash)), estimator_(std::move(est)) {}

ScriptedMockBackend::ScriptedMockBackend(ByStage, std::map<std::string, std::vector<MockResponse>> queues,
                                         TokenEstimator est)
    : mode_(Mode::StageQueue), queues_(std::move(queues)), estimator_(std::move(est)) {}

namespace {

MockResponse response_from_json(const json& j, const std::string& where) {
    MockResponse r;
    if (j.is_string()) {
        r.text = j.get<std::string>();
        return r;
    }
    if (!j.is_object()) throw Error(ErrorKind::InputError, where + ": response must be a string or an object");
    if (j.contains("fail")) {
        if (j["fail"] != "transport") throw Error(ErrorKind::InputError, where + ": only \"fail\": \"transport\" is supported");
        r.transport_failure = true;
    } else if (!j.contains("text") || !j["text"].is_string()) {
        throw Error(ErrorKind::InputError, where + ": response object needs a string 'text'");
    }
    if (j.contains("text")) {
        // Scripts may embed structured payloads directly instead of a pre-serialized string.
        r.text = j["text"].is_string() ? j["text"].get<std::string>() : j["text"].dump();
    }
    if (j.contains("input_tokens")) r.input_tokens = j["input_tokens"].get<std::size_t>();
    if (j.contains("output_tokens")) r.output_tokens = j["output_tokens"].get<std::size_t>();
    if (j.contains("wall_time_ms")) r.wall_time_ms = j["wall_time_ms"].get<std::uint64_t>();
    if (j.contains("stage")) r.expect_stage = j["stage"].get<std::string>();
    return r;
}

} // namespace

std::unique_ptr<ScriptedMockBackend> ScriptedMockBackend::from_json(const json& script, TokenEstimator est) {
    if (!script.is_object() || !script.contains("responses"))
        throw Error(ErrorKind::InputError, "mock script must be an object with 'responses'");
    const std::string mode = script.value("mode", std::string("sequence"));
    const auto& responses = script["responses"];
    if (mode == "sequence") {
        if (!responses.is_array()) throw Error(ErrorKind::InputError, "sequence mock needs a 'responses' array");
        std::vector<MockResponse> seq;
        for (std::size_t i = 0; i < responses.size(); ++i)
            seq.push_back(response_from_json(responses[i], "response " + std::to_string(i)));
        return std::make_unique<ScriptedMockBackend>(std::move(seq), std::move(est));
    }
    if (mode == "hash") {
        if (!responses.is_object()) throw Error(ErrorKind::InputError, "hash mock needs a 'responses' object");
        std::map<std::string, MockResponse> table;
        for (const auto& [hash, value] : responses.items())
            table.emplace(hash, response_from_json(value, "response " + hash));
        return std::make_unique<ScriptedMockBackend>(std::move(table), std::move(est));
    }
    if (mode == "stage") {
        if (!responses.is_object()) throw Error(ErrorKind::InputError, "stage mock needs a 'responses' object");
        std::map<std::string, std::vector<MockResponse>> queues;
        for (const auto& [stage, list] : responses.items()) {
            if (!list.is_array()) throw Error(ErrorKind::InputError, "stage '" + stage + "' needs a response array");
            auto& q = queues[stage];
            for (std::size_t i = 0; i < list.size(); ++i)
                q.push_back(response_from_json(list[i], stage + " response " + std::to_string(i)));
        }
        return std::make_unique<ScriptedMockBackend>(ByStage{}, std::move(queues), std::move(est));
    }
    throw Error(ErrorKind::InputError, "unknown mock mode '" + mode + "'");
}

Completion ScriptedMockBackend::complete(const CompletionRequest& request) {
    std::lock_guard lock(mutex_);
    seen_.push_back(request);
    const MockResponse* r = nullptr;
    if (mode_ == Mode::Sequence) {
        if (cursor_ >= sequence_.size())
            throw Error(ErrorKind::MockExhausted, "script has " + std::to_string(sequence_.size()) +
                                                      " responses; request " + std::to_string(cursor_ + 1) +
                                                      " (stage '" + request.stage_tag + "') has none");
        r = &sequence_[cursor_++];
    } else if (mode_ == Mode::StageQueue) {
        auto it = queues_.find(request.stage_tag);
        if (it == queues_.end()) it = queues_.find(request.stage_tag.substr(0, request.stage_tag.find('[')));
        if (it == queues_.end())
            throw Error(ErrorKind::MockExhausted, "no scripted queue for stage '" + request.stage_tag + "'");
        auto& pos = queue_cursor_[it->first];
        if (pos >= it->second.size())
            throw Error(ErrorKind::MockExhausted, "queue '" + it->first + "' has " + std::to_string(it->second.size()) +
                                                      " responses; request from stage '" + request.stage_tag +
                                                      "' has none");
        r = &it->second[pos++];
    } else {
        const auto hash = prompt_hash(request);
        auto it = by_hash_.find(hash);
        if (it == by_hash_.end())
            throw Error(ErrorKind::MockExhausted,
                        "no scripted response for prompt hash " + hash + " (stage '" + request.stage_tag + "')");
        r = &it->second;
    }
    if (r->expect_stage && *r->expect_stage != request.stage_tag)
        throw Error(ErrorKind::MockScriptMismatch, "scripted response expects stage '" + *r->expect_stage +
                                                       "' but request came from '" + request.stage_tag + "'");
    if (r->transport_failure) throw Error(ErrorKind::TransportError, "scripted transport failure");

    Completion c;
    c.text = r->text;
    c.usage.stage_tag = request.stage_tag;
    c.usage.input_tokens =
        r->input_tokens.value_or(estimator_.estimate(request.system_prompt) + estimator_.estimate(request.user_prompt));
    c.usage.output_tokens = r->output_tokens.value_or(estimator_.estimate(r->text));
    c.usage.wall_time_ms = r->wall_time_ms;
    return c;
}

std::string ScriptedMockBackend::describe() const {
    switch (mode_) {
    case Mode::Sequence: return "scripted-mock(sequence)";
    case Mode::PromptHash: return "scripted-mock(hash)";
    case Mode::StageQueue: return "scripted-mock(stage)";
    }
    return "scripted-mock";
}

std::size_t ScriptedMockBackend::remaining() const {
    std::lock_guard lock(mutex_);
    switch (mode_) {
    case Mode::Sequence: return sequence_.size() - cursor_;
    case Mode::PromptHash: return by_hash_.size();
    case Mode::StageQueue: break;
    }
    std::size_t left = 0;
    for (const auto& [stage, q] : queues_) {
        auto it = queue_cursor_.find(stage);
        left += q.size() - (it == queue_cursor_.end() ? 0 : it->second);
    }
    return left;
}

std::vector<CompletionRequest> ScriptedMockBackend::requests() const {
    std::lock_guard lock(mutex_);
    return seen_;
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(Backend& backend, RetryPolicy retry, SamplingParams sampling)
    : backend_(backend), retry_(retry), sampling_(sampling) {
    if (retry_.max_attempts < 1) throw Error(ErrorKind::InvalidValue, "retry policy needs at least one attempt");
}

CompletionRequest Gateway::request(std::string stage_tag, std::string user_prompt) const {
    CompletionRequest r;
    r.stage_tag = std::move(stage_tag);
    r.system_prompt = text::trim(prompts::asset("system"));
    r.user_prompt = std::move(user_prompt);
    r.temperature = sampling_.temperature;
    r.top_p = sampling_.top_p;
    r.frequency_penalty = sampling_.frequency_penalty;
    r.presence_penalty = sampling_.presence_penalty;
    r.max_output_tokens = sampling_.max_output_tokens;
    return r;
}

Completion Gateway::complete(const CompletionRequest& request) {
    request.validate();
    for (int attempt = 1;; ++attempt) {
        try {
            Completion c = backend_.complete(request);
            std::lock_guard lock(mutex_);
            records_.push_back(c.usage);
            return c;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::TransportError) throw;
            if (attempt >= retry_.max_attempts)
                throw Error(ErrorKind::TransportError,
                            "[" + request.stage_tag + "] failed after " + std::to_string(attempt) + " attempts: " + e.detail());
            const auto delay = retry_.base_delay * (1 << (attempt - 1));
            spdlog::warn("[{}] transport failure (attempt {}/{}): {}; retrying in {} ms", request.stage_tag, attempt,
                         retry_.max_attempts, e.detail(), delay.count());
            std::this_thread::sleep_for(delay);
        }
    }
}

std::vector<UsageRecord> Gateway::usage() const {
    std::lock_guard lock(mutex_);
    return records_;
}

UsageRecord Gateway::usage_totals() const {
    std::lock_guard lock(mutex_);
    UsageRecord total;
    total.stage_tag = "total";
    for (const auto& r : records_) total += r;
    return total;
}

std::size_t Gateway::call_count() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

// ---------------------------------------------------------------------------
// Validated completions

ValidatedCompletion complete_validated(Gateway& gw, const CompletionRequest& request, int max_repairs,
                                       const TextCheck& check) {
    if (max_repairs < 0) throw Error(ErrorKind::InvalidValue, "max_repairs must be >= 0");
    ValidatedCompletion out;
    out.usage.stage_tag = request.stage_tag;
    std::string last_error;
    for (int attempt = 0; attempt <= max_repairs; ++attempt) {
        CompletionRequest req = request;
        if (attempt > 0) req.user_prompt += "\n\n" + prompts::render_asset("repair", {{"error", last_error}});
        Completion c = gw.complete(req);
        out.usage += c.usage;
        auto problem = check(c.text);
        if (!problem) {
            out.text = std::move(c.text);
            out.repairs = attempt;
            return out;
        }
        last_error = *problem;
        spdlog::warn("[{}] unusable model output (attempt {}/{}): {}", request.stage_tag, attempt + 1, max_repairs + 1,
                     last_error);
    }
    throw Error(ErrorKind::RepairExhausted,
                "[" + request.stage_tag + "] no usable output after " + std::to_string(max_repairs + 1) +
                    " attempts; last problem: " + last_error);
}

std::optional<json> extract_json_payload(std::string_view raw) {
    const std::string trimmed = text::trim(raw);
    auto parsed = json::parse(trimmed, nullptr, false);
    if (!parsed.is_discarded()) return parsed;

    const auto open = trimmed.find("```");
    if (open == std::string::npos) return std::nullopt;
    auto body_start = trimmed.find('\n', open);
    if (body_start == std::string::npos) return std::nullopt;
    ++body_start;
    const auto close = trimmed.find("```", body_start);
    if (close == std::string::npos) return std::nullopt;
    parsed = json::parse(trimmed.substr(body_start, close - body_start), nullptr, false);
    if (parsed.is_discarded()) return std::nullopt;
    return parsed;
}

JsonCompletion complete_json(Gateway& gw, const CompletionRequest& request, SchemaId schema, int max_repairs,
                             const JsonCheck& extra) {
    json accepted;
    auto check = [&](const std::string& text) -> std::optional<std::string> {
        auto payload = extract_json_payload(text);
        if (!payload) return "response is not valid JSON";
        if (auto problem = check_schema(schema, *payload))
            return std::string(to_string(schema)) + ": " + *problem;
        if (extra) {
            if (auto problem = extra(*payload)) return *problem;
        }
        accepted = std::move(*payload);
        return std::nullopt;
    };
    auto result = complete_validated(gw, request, max_repairs, check);
    return JsonCompletion{std::move(accepted), result.repairs, result.usage};
}

} // namespace factsum
