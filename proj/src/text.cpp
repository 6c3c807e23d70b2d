#include "delichain/text.hpp"

#include <cctype>

namespace delichain {
namespace {

bool is_space(unsigned char c) { return c < 0x80 && std::isspace(c); }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

std::vector<std::string> segment(std::string_view text, bool lower) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      flush();
      ++i;
    } else if (is_punct(c)) {
      flush();
      if (text.substr(i, kMarkOpen.size()) == kMarkOpen) {
        out.emplace_back(kMarkOpen);
        i += kMarkOpen.size();
      } else if (text.substr(i, kMarkClose.size()) == kMarkClose) {
        out.emplace_back(kMarkClose);
        i += kMarkClose.size();
      } else {
        out.emplace_back(1, static_cast<char>(c));
        ++i;
      }
    } else {
      cur.push_back(lower && c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
      ++i;
    }
  }
  flush();
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) { return segment(text, true); }

std::vector<std::string> split_tokens(std::string_view text) { return segment(text, false); }

std::string join_tokens(const std::vector<std::string>& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

}  // namespace delichain
