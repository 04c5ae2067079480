#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "factsum/gateway.hpp"
#include "factsum/note_stage.hpp"
#include "factsum/tokenizer.hpp"

namespace factsum {

struct BackendConfig {
    /// "mock" or "http".
    std::string kind = "mock";
    /// Mock script path, resolved against the config file's directory.
    std::filesystem::path script;
    std::string base_url;
    std::string model_name;
    int timeout_ms = 60000;
    /// Environment variable holding the API key.
    std::string api_key_env = "FACTSUM_API_KEY";
};

struct RunConfig {
    BackendConfig backend;
    std::size_t chunk_budget = kDefaultChunkBudget;
    std::size_t context_tail = kDefaultContextTail;
    double chars_per_token = TokenEstimator::kDefaultCharsPerToken;
    RetentionPolicy policy;
    bool verify = true;
    bool refine = true;
    int max_repairs = kDefaultMaxRepairs;
    int max_revision_cycles = 1;
    bool llm_consolidation = false;
    std::size_t score_batch_size = kScoreBatchSize;
    double merge_threshold = 0.70;
    std::size_t summary_token_limit = 250;
    SamplingParams sampling;
    RetryPolicy retry;

    TokenEstimator estimator() const { return TokenEstimator(chars_per_token); }
};

/// Reads the declarative run config. Unknown keys are rejected so typos surface. Throws InputError.
RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

json to_json(const RunConfig& config);

/// Fresh backend per call; mock scripts are reloaded so each meeting replays from the start.
std::unique_ptr<Backend> make_backend(const RunConfig& config);

/// Reads a whole file. Throws InputError.
std::string read_file(const std::filesystem::path& path);
/// Parses a JSON file. Throws InputError naming the file.
json read_json_file(const std::filesystem::path& path);

} // namespace factsum
