#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace delichain {

inline constexpr std::string_view kMarkOpen = "<m>";
inline constexpr std::string_view kMarkClose = "</m>";

// Lowercases ASCII, splits on whitespace, and emits every ASCII punctuation
// character as its own token. The mention markers <m> and </m> are kept whole.
// Bytes >= 0x80 are treated as word characters so UTF-8 survives intact.
std::vector<std::string> tokenize(std::string_view text);

// Same segmentation without lowercasing; entity extraction needs case.
std::vector<std::string> split_tokens(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens, std::string_view sep = " ");

}  // namespace delichain
