#include "factsum/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace factsum {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::InputError, "cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json_file(const std::filesystem::path& path) {
    auto parsed = json::parse(read_file(path), nullptr, false);
    if (parsed.is_discarded()) throw Error(ErrorKind::InputError, "'" + path.string() + "' is not valid JSON");
    return parsed;
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw Error(ErrorKind::InputError, where + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj[key].get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::InputError, where + ": '" + key + "' has the wrong type");
    }
}

} // namespace

RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw Error(ErrorKind::InputError, "config must be a JSON object");
    reject_unknown(j, {"backend", "chunking", "policy", "verify", "refine", "max_repairs", "max_revision_cycles",
                       "llm_consolidation", "score_batch_size", "merge_threshold", "summary_token_limit", "sampling",
                       "retry"},
                   "config");
    RunConfig c;
    if (j.contains("backend")) {
        const auto& b = j["backend"];
        if (!b.is_object()) throw Error(ErrorKind::InputError, "config.backend must be an object");
        reject_unknown(b, {"kind", "script", "base_url", "model_name", "timeout_ms", "api_key_env"}, "config.backend");
        read(b, "kind", c.backend.kind, "config.backend");
        std::string script;
        read(b, "script", script, "config.backend");
        if (!script.empty()) {
            std::filesystem::path p(script);
            c.backend.script = p.is_absolute() ? p : base_dir / p;
        }
        read(b, "base_url", c.backend.base_url, "config.backend");
        read(b, "model_name", c.backend.model_name, "config.backend");
        read(b, "timeout_ms", c.backend.timeout_ms, "config.backend");
        read(b, "api_key_env", c.backend.api_key_env, "config.backend");
        if (c.backend.kind != "mock" && c.backend.kind != "http")
            throw Error(ErrorKind::InputError, "config.backend.kind must be 'mock' or 'http'");
    }
    if (j.contains("chunking")) {
        const auto& ch = j["chunking"];
        reject_unknown(ch, {"budget", "context_tail", "chars_per_token"}, "config.chunking");
        read(ch, "budget", c.chunk_budget, "config.chunking");
        read(ch, "context_tail", c.context_tail, "config.chunking");
        read(ch, "chars_per_token", c.chars_per_token, "config.chunking");
    }
    if (j.contains("policy")) {
        const auto& p = j["policy"];
        if (p.is_string()) {
            auto profile = parse_policy_profile(p.get<std::string>());
            if (!profile) throw Error(ErrorKind::InputError, "config.policy must be default, low or high");
            c.policy = RetentionPolicy::for_profile(*profile);
        } else if (p.is_object()) {
            reject_unknown(p, {"keep_min", "anchor_min"}, "config.policy");
            read(p, "keep_min", c.policy.keep_min, "config.policy");
            read(p, "anchor_min", c.policy.anchor_min, "config.policy");
        } else {
            throw Error(ErrorKind::InputError, "config.policy must be a profile name or {keep_min, anchor_min}");
        }
    }
    read(j, "verify", c.verify, "config");
    read(j, "refine", c.refine, "config");
    read(j, "max_repairs", c.max_repairs, "config");
    read(j, "max_revision_cycles", c.max_revision_cycles, "config");
    read(j, "llm_consolidation", c.llm_consolidation, "config");
    read(j, "score_batch_size", c.score_batch_size, "config");
    read(j, "merge_threshold", c.merge_threshold, "config");
    read(j, "summary_token_limit", c.summary_token_limit, "config");
    if (j.contains("sampling")) {
        const auto& s = j["sampling"];
        reject_unknown(s, {"temperature", "top_p", "frequency_penalty", "presence_penalty", "max_output_tokens"},
                       "config.sampling");
        read(s, "temperature", c.sampling.temperature, "config.sampling");
        read(s, "top_p", c.sampling.top_p, "config.sampling");
        read(s, "frequency_penalty", c.sampling.frequency_penalty, "config.sampling");
        read(s, "presence_penalty", c.sampling.presence_penalty, "config.sampling");
        read(s, "max_output_tokens", c.sampling.max_output_tokens, "config.sampling");
    }
    if (j.contains("retry")) {
        const auto& r = j["retry"];
        reject_unknown(r, {"max_attempts", "base_delay_ms"}, "config.retry");
        read(r, "max_attempts", c.retry.max_attempts, "config.retry");
        int delay = static_cast<int>(c.retry.base_delay.count());
        read(r, "base_delay_ms", delay, "config.retry");
        c.retry.base_delay = std::chrono::milliseconds(delay);
    }

    try {
        c.policy.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::InputError, e.detail());
    }
    if (c.chunk_budget == 0) throw Error(ErrorKind::InputError, "chunking.budget must be > 0");
    if (!(c.chars_per_token > 0)) throw Error(ErrorKind::InputError, "chunking.chars_per_token must be > 0");
    if (c.max_repairs < 0) throw Error(ErrorKind::InputError, "max_repairs must be >= 0");
    if (c.max_revision_cycles < 0) throw Error(ErrorKind::InputError, "max_revision_cycles must be >= 0");
    if (c.score_batch_size == 0) throw Error(ErrorKind::InputError, "score_batch_size must be > 0");
    if (!(c.merge_threshold > 0 && c.merge_threshold <= 1)) throw Error(ErrorKind::InputError, "merge_threshold must be in (0,1]");
    if (c.retry.max_attempts < 1) throw Error(ErrorKind::InputError, "retry.max_attempts must be >= 1");
    if (c.backend.kind == "mock" && c.backend.script.empty())
        throw Error(ErrorKind::InputError, "mock backend needs backend.script");
    if (c.backend.kind == "http" && (c.backend.base_url.empty() || c.backend.model_name.empty()))
        throw Error(ErrorKind::InputError, "http backend needs base_url and model_name");
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    return config_from_json(read_json_file(path), path.has_parent_path() ? path.parent_path() : ".");
}

json to_json(const RunConfig& c) {
    json backend{{"kind", c.backend.kind}};
    if (c.backend.kind == "mock") {
        backend["script"] = c.backend.script.filename().string();
    } else {
        backend["base_url"] = c.backend.base_url;
        backend["model_name"] = c.backend.model_name;
        backend["timeout_ms"] = c.backend.timeout_ms;
    }
    return json{{"backend", backend},
                {"chunking", {{"budget", c.chunk_budget}, {"context_tail", c.context_tail}, {"chars_per_token", c.chars_per_token}}},
                {"policy", {{"profile", to_string(c.policy.profile)}, {"keep_min", c.policy.keep_min}, {"anchor_min", c.policy.anchor_min}}},
                {"verify", c.verify},
                {"refine", c.refine},
                {"max_repairs", c.max_repairs},
                {"max_revision_cycles", c.max_revision_cycles},
                {"llm_consolidation", c.llm_consolidation},
                {"score_batch_size", c.score_batch_size},
                {"merge_threshold", c.merge_threshold},
                {"summary_token_limit", c.summary_token_limit},
                {"sampling",
                 {{"temperature", c.sampling.temperature},
                  {"top_p", c.sampling.top_p},
                  {"frequency_penalty", c.sampling.frequency_penalty},
                  {"presence_penalty", c.sampling.presence_penalty},
                  {"max_output_tokens", c.sampling.max_output_tokens}}}};
}

std::unique_ptr<Backend> make_backend(const RunConfig& c) {
    if (c.backend.kind == "mock") return ScriptedMockBackend::from_json(read_json_file(c.backend.script), c.estimator());
    HttpBackendConfig http{c.backend.base_url, c.backend.model_name, c.backend.timeout_ms, {}};
    if (!c.backend.api_key_env.empty()) {
        if (const char* key = std::getenv(c.backend.api_key_env.c_str())) http.api_key = key;
    }
    return std::make_unique<HttpChatBackend>(std::move(http));
}

} // namespace factsum
