#include "factsum/prompts.hpp"

#include "factsum/error.hpp"
#include "prompt_assets.hpp"

namespace factsum::prompts {

std::string_view version() noexcept { return detail::kPromptVersion; }

std::string_view asset(std::string_view name) {
    for (const auto& a : detail::kPromptAssets)
        if (a.name == name) return a.text;
    throw Error(ErrorKind::InvalidValue, "unknown prompt asset '" + std::string(name) + "'");
}

std::vector<std::string> asset_names() {
    std::vector<std::string> names;
    for (const auto& a : detail::kPromptAssets) names.emplace_back(a.name);
    return names;
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::map<std::string, bool> used;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                const std::string key(tmpl.substr(i + 1, close - i - 1));
                auto it = values.find(key);
                if (it != values.end()) {
                    // Substituted text is never rescanned, so values may contain braces.
                    out += it->second;
                    used[key] = true;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    for (const auto& [key, value] : values) {
        if (!used.count(key))
            throw Error(ErrorKind::InvalidValue, "template has no placeholder {" + key + "}");
    }
    return out;
}

} // namespace factsum::prompts
