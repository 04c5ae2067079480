#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factsum/core.hpp"
#include "factsum/tokenizer.hpp"

namespace factsum {

struct CompletionRequest {
    /// Pipeline stage issuing the call; carried into the usage record.
    std::string stage_tag;
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.1;
    double top_p = 1.0;
    double frequency_penalty = 0.0;
    double presence_penalty = 0.0;
    int max_output_tokens = 4000;

    /// Throws InvalidValue when temperature < 0 or max_output_tokens <= 0.
    void validate() const;
};

struct UsageRecord {
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
    std::uint64_t wall_time_ms = 0;
    std::string stage_tag;

    UsageRecord& operator+=(const UsageRecord& other) noexcept {
        input_tokens += other.input_tokens;
        output_tokens += other.output_tokens;
        wall_time_ms += other.wall_time_ms;
        return *this;
    }
    bool operator==(const UsageRecord&) const = default;
};

json to_json(const UsageRecord& usage);

struct Completion {
    std::string text;
    UsageRecord usage;
};

/// A chat-completion backend. Transient failures are reported as Error(TransportError);
/// the gateway owns retrying.
class Backend {
public:
    virtual ~Backend() = default;
    virtual Completion complete(const CompletionRequest& request) = 0;
    virtual std::string describe() const = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock

struct MockResponse {
    std::string text;
    std::optional<std::size_t> input_tokens;
    std::optional<std::size_t> output_tokens;
    std::uint64_t wall_time_ms = 0;
    /// When set, the request's stage tag must match or the mock throws MockScriptMismatch.
    std::optional<std::string> expect_stage;
    /// Simulates a transient transport failure instead of answering.
    bool transport_failure = false;
};

/// FNV-1a 64 over system prompt, a unit separator, and user prompt; 16 lowercase hex digits.
std::string prompt_hash(const CompletionRequest& request);

/// Deterministic stand-in for a model. Sequence mode replays responses in request order;
/// hash mode looks responses up by `prompt_hash`; stage mode keeps one queue per stage tag, where a
/// tag such as "extract[2]" falls back to the "extract" queue. Consumption is serialized internally.
class ScriptedMockBackend final : public Backend {
public:
    enum class Mode { Sequence, PromptHash, StageQueue };
    struct ByStage {};

    explicit ScriptedMockBackend(std::vector<MockResponse> sequence, TokenEstimator est = {});
    explicit ScriptedMockBackend(std::map<std::string, MockResponse> by_hash, TokenEstimator est = {});
    ScriptedMockBackend(ByStage, std::map<std::string, std::vector<MockResponse>> queues, TokenEstimator est = {});

    /// {"mode": "sequence", "responses": [...]}, {"mode": "hash", "responses": {hash: response}} or
    /// {"mode": "stage", "responses": {stage: [...]}}.
    /// A response is a string or {"text", "input_tokens"?, "output_tokens"?, "wall_time_ms"?, "stage"?, "fail"?}.
    static std::unique_ptr<ScriptedMockBackend> from_json(const json& script, TokenEstimator est = {});

    Completion complete(const CompletionRequest& request) override;
    std::string describe() const override;

    Mode mode() const noexcept { return mode_; }
    std::size_t remaining() const;
    /// Every request seen so far, in arrival order.
    std::vector<CompletionRequest> requests() const;

private:
    Mode mode_;
    std::vector<MockResponse> sequence_;
    std::map<std::string, MockResponse> by_hash_;
    std::map<std::string, std::vector<MockResponse>> queues_;
    std::map<std::string, std::size_t> queue_cursor_;
    std::size_t cursor_ = 0;
    TokenEstimator estimator_;
    std::vector<CompletionRequest> seen_;
    mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP backend

struct HttpBackendConfig {
    /// e.g. "https://api.openai.com/v1"; requests go to <base_url>/chat/completions.
    std::string base_url;
    std::string model_name;
    int timeout_ms = 60000;
    std::string api_key;
};

class HttpChatBackend final : public Backend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);

    Completion complete(const CompletionRequest& request) override;
    std::string describe() const override;

    /// Request body in the chat-completion wire shape.
    json request_body(const CompletionRequest& request) const;

private:
    HttpBackendConfig config_;
    std::string origin_;
    std::string path_prefix_;
};

// ---------------------------------------------------------------------------
// Gateway

/// Sampling defaults applied to every pipeline request.
struct SamplingParams {
    double temperature = 0.1;
    double top_p = 1.0;
    double frequency_penalty = 0.0;
    double presence_penalty = 0.0;
    int max_output_tokens = 4000;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{500};
};

/// Uniform entry point for all model calls: transport retries plus per-call usage accounting.
/// Safe for concurrent use; callers must not rely on response ordering across threads.
class Gateway {
public:
    explicit Gateway(Backend& backend, RetryPolicy retry = {}, SamplingParams sampling = {});

    /// A request carrying the shared system prompt and this gateway's sampling parameters.
    CompletionRequest request(std::string stage_tag, std::string user_prompt) const;

    Completion complete(const CompletionRequest& request);

    std::vector<UsageRecord> usage() const;
    UsageRecord usage_totals() const;
    std::size_t call_count() const;
    Backend& backend() noexcept { return backend_; }

private:
    Backend& backend_;
    RetryPolicy retry_;
    SamplingParams sampling_;
    std::vector<UsageRecord> records_;
    mutable std::mutex mutex_;
};

inline constexpr int kDefaultMaxRepairs = 2;

/// Returns an error message for unusable output, or nullopt when the text is acceptable.
using TextCheck = std::function<std::optional<std::string>(const std::string& text)>;

struct ValidatedCompletion {
    std::string text;
    int repairs = 0;
    /// Sum over every attempt, including rejected ones.
    UsageRecord usage;
};

/// Issues the request and re-issues it with a corrective instruction (carrying the checker's
/// message) up to `max_repairs` times. Throws RepairExhausted with the last message.
ValidatedCompletion complete_validated(Gateway& gw, const CompletionRequest& request, int max_repairs,
                                       const TextCheck& check);

/// Structured outputs understood by the pipeline.
enum class SchemaId {
    FactList,
    SingleFact,
    VerificationReport,
    ScoredFeatures,
    PersonaFeatures,
    ConsolidationGroups,
    Outline,
    ReviewReport,
    ReaderProfile,
    DimensionInstances,
};

std::string_view to_string(SchemaId id) noexcept;

/// Structural and range validation of a parsed payload. Returns the first problem found.
std::optional<std::string> check_schema(SchemaId id, const json& value);

/// Parses a JSON payload from model text. Accepts a bare document or one wrapped in a
/// ``` / ```json fence; prose around a fenced block is ignored.
std::optional<json> extract_json_payload(std::string_view text);

using JsonCheck = std::function<std::optional<std::string>(const json& value)>;

struct JsonCompletion {
    json value;
    int repairs = 0;
    UsageRecord usage;
};

/// `complete_validated` with JSON extraction, schema validation and an optional semantic check.
JsonCompletion complete_json(Gateway& gw, const CompletionRequest& request, SchemaId schema,
                             int max_repairs = kDefaultMaxRepairs, const JsonCheck& extra = {});

} // namespace factsum
