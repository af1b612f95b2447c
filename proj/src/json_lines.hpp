#pragma once

#include <map>
#include <string>

namespace rlap {

/// Maps JSON-pointer paths ("/tasks/3/effort") to the 1-based line on which
/// each value starts. Assumes `text` is well-formed JSON.
std::map<std::string, int> index_json_lines(const std::string& text);

/// 1-based line containing byte `offset` (clamped to the text).
int line_at_offset(const std::string& text, std::size_t offset);

}  // namespace rlap
