#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sea {

enum class PromptKind { qa_generation, rephrase, error_pattern, testee };

/// Version tag of the bundled template set; recorded in run manifests.
inline constexpr std::string_view kPromptVersion = "v1";

std::string_view prompt_template(PromptKind kind);

/// Substitutes each "{name}" placeholder listed in `values`. Other braces
/// (the JSON reply examples) are left alone.
std::string render_prompt(std::string_view tmpl,
                          const std::vector<std::pair<std::string_view, std::string>>& values);

}  // namespace sea
