#include "sea/prompts.hpp"

namespace sea {

namespace prompt_data {
extern const char* const qa_generation;
extern const char* const rephrase;
extern const char* const error_pattern;
extern const char* const testee;
}  // namespace prompt_data

std::string_view prompt_template(PromptKind kind) {
  switch (kind) {
    case PromptKind::qa_generation: return prompt_data::qa_generation;
    case PromptKind::rephrase: return prompt_data::rephrase;
    case PromptKind::error_pattern: return prompt_data::error_pattern;
    case PromptKind::testee: return prompt_data::testee;
  }
  return {};
}

std::string render_prompt(std::string_view tmpl,
                          const std::vector<std::pair<std::string_view, std::string>>& values) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      bool replaced = false;
      for (const auto& [name, value] : values) {
        if (tmpl.compare(i + 1, name.size(), name) == 0 && i + 1 + name.size() < tmpl.size() &&
            tmpl[i + 1 + name.size()] == '}') {
          out += value;
          i += name.size() + 2;
          replaced = true;
          break;
        }
      }
      if (replaced) continue;
    }
    out += tmpl[i++];
  }
  return out;
}

}  // namespace sea
