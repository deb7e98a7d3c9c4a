// SPDX-License-Identifier: Apache-2.0
//
// Plain-text prompt templates with {caption} / {question} placeholders.

#ifndef CAPGRPO_PROMPTS_HPP_
#define CAPGRPO_PROMPTS_HPP_

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "capgrpo/structured_output.hpp"

namespace capgrpo {

// Clause telling the judge to discard reasoning or answers smuggled into the
// caption. Present in the default judge template.
extern const std::string_view kJudgeFilterClause;

std::string default_policy_prompt(FormatMode mode);
std::string default_judge_prompt();

// Replaces every "{name}" with its value. Unknown placeholders are left as is.
std::string render_template(
    std::string_view tmpl,
    const std::vector<std::pair<std::string, std::string>>& values);

bool has_placeholder(std::string_view tmpl, std::string_view name);

// Throws std::runtime_error when the file cannot be read.
std::string load_template_file(const std::string& path);

}  // namespace capgrpo

#endif  // CAPGRPO_PROMPTS_HPP_
