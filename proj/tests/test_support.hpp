#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "factsum/core.hpp"
#include "factsum/gateway.hpp"
#include "factsum/note_stage.hpp"

#ifndef FACTSUM_FIXTURES
#error "FACTSUM_FIXTURES must point at tests/fixtures"
#endif

namespace factsum::testing {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(FACTSUM_FIXTURES) / name; }

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Fact make_fact(std::uint32_t id, const std::string& claim, const std::string& context = "Context.",
                      std::size_t chunk = 0) {
    return Fact::create(FactId{id}, claim, context, chunk);
}

inline ScoredFeature feature(std::uint32_t id, int relevance, FunctionLabel label = FunctionLabel::Insight,
                             std::optional<int> alignment = std::nullopt) {
    ScoredFeature f;
    f.fact_id = FactId{id};
    f.relevance = relevance;
    f.label = label;
    f.certainty = 80;
    f.feature = "feature " + std::to_string(id);
    f.reasoning = "r";
    f.alignment = alignment;
    return f;
}

// Reference similarity over ASCII text: full-table LCS plus set Jaccard.
inline double oracle_similarity(const std::string& a, const std::string& b) {
    std::vector<std::vector<int>> m(a.size() + 1, std::vector<int>(b.size() + 1, 0));
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            m[i][j] = a[i - 1] == b[j - 1] ? m[i - 1][j - 1] + 1 : std::max(m[i - 1][j], m[i][j - 1]);
    const double ratio = a.empty() && b.empty() ? 1.0 : 2.0 * m[a.size()][b.size()] / double(a.size() + b.size());
    auto tokens = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        std::istringstream in(s);
        std::set<std::string> out;
        for (std::string t; in >> t;) out.insert(t);
        return out;
    };
    const auto ta = tokens(a), tb = tokens(b);
    std::set<std::string> uni = ta;
    uni.insert(tb.begin(), tb.end());
    std::size_t inter = 0;
    for (const auto& t : ta) inter += tb.count(t);
    const double jac = uni.empty() ? 1.0 : double(inter) / double(uni.size());
    return (ratio + jac) / 2.0;
}

inline std::vector<TranscriptTurn> turns_of(const std::vector<std::pair<std::string, std::string>>& lines) {
    std::vector<TranscriptTurn> out;
    for (const auto& [s, u] : lines) out.push_back({s, u, out.size()});
    return out;
}

/// Mock plus gateway; responses are replayed in request order.
struct Rig {
    std::unique_ptr<ScriptedMockBackend> backend;
    Gateway gw;

    explicit Rig(std::vector<std::string> texts)
        : backend(std::make_unique<ScriptedMockBackend>(responses(texts))), gw(*backend, fast_retry()) {}
    explicit Rig(std::map<std::string, std::vector<std::string>> queues)
        : backend(std::make_unique<ScriptedMockBackend>(ScriptedMockBackend::ByStage{}, staged(queues))),
          gw(*backend, fast_retry()) {}

    std::vector<CompletionRequest> requests() const { return backend->requests(); }

    static RetryPolicy fast_retry() {
        RetryPolicy r;
        r.base_delay = std::chrono::milliseconds(1);
        return r;
    }
    static std::vector<MockResponse> responses(const std::vector<std::string>& texts) {
        std::vector<MockResponse> out;
        for (const auto& t : texts) out.push_back(MockResponse{t, std::nullopt, std::nullopt, 0, std::nullopt, false});
        return out;
    }
    static std::map<std::string, std::vector<MockResponse>> staged(const std::map<std::string, std::vector<std::string>>& q) {
        std::map<std::string, std::vector<MockResponse>> out;
        for (const auto& [k, v] : q) out[k] = responses(v);
        return out;
    }
};

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("factsum_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace factsum::testing
