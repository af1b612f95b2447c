#include "json_lines.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

namespace rlap {

namespace {

struct Frame {
  bool object = false;
  bool expect_key = false;
  std::string key;
  std::size_t index = 0;
};

std::string path_of(const std::vector<Frame>& stack) {
  std::string out;
  for (const auto& f : stack) out += "/" + (f.object ? f.key : std::to_string(f.index));
  return out;
}

}  // namespace

std::map<std::string, int> index_json_lines(const std::string& text) {
  std::map<std::string, int> lines;
  std::vector<Frame> stack;
  int line = 1;
  auto record = [&] { lines.emplace(path_of(stack), line); };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    switch (c) {
      case '\n':
        ++line;
        break;
      case ' ':
      case '\t':
      case '\r':
        break;
      case '{':
      case '[':
        record();
        stack.push_back({c == '{', c == '{', {}, 0});
        break;
      case '}':
      case ']':
        if (!stack.empty()) stack.pop_back();
        break;
      case ',':
        if (!stack.empty()) {
          if (stack.back().object)
            stack.back().expect_key = true;
          else
            ++stack.back().index;
        }
        break;
      case ':':
        if (!stack.empty()) stack.back().expect_key = false;
        break;
      case '"': {
        std::string s;
        for (++i; i < text.size() && text[i] != '"'; ++i) {
          if (text[i] == '\\' && i + 1 < text.size()) ++i;
          s += text[i];
        }
        if (!stack.empty() && stack.back().object && stack.back().expect_key)
          stack.back().key = s;
        else
          record();
        break;
      }
      default:
        record();
        while (i + 1 < text.size() && !std::isspace(static_cast<unsigned char>(text[i + 1])) &&
               text[i + 1] != ',' && text[i + 1] != ']' && text[i + 1] != '}')
          ++i;
        break;
    }
  }
  return lines;
}

int line_at_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace rlap
