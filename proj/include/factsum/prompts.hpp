#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace factsum::prompts {

/// Version tag of the embedded template set; recorded in run reports.
std::string_view version() noexcept;

/// Raw template text by asset name (file stem under prompts/<version>/). Throws InvalidValue for unknown names.
std::string_view asset(std::string_view name);

std::vector<std::string> asset_names();

/// Replaces each `{key}` with its value. Every key must occur in the template at least once;
/// braces that are not keys (JSON examples, transcript markers) are left untouched.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values);

inline std::string render_asset(std::string_view name, const std::map<std::string, std::string>& values) {
    return render(asset(name), values);
}

} // namespace factsum::prompts
