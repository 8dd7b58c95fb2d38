#include "crowdguard/readability.hpp"

#include <cctype>
#include <vector>

namespace crowdguard {

namespace {

bool is_vowel(char c) {
  switch (c) {
    case 'a': case 'e': case 'i': case 'o': case 'u': case 'y': return true;
    default: return false;
  }
}

bool has_word_char(std::string_view token) {
  for (unsigned char c : token) {
    if (std::isalnum(c)) return true;
  }
  return false;
}

std::vector<std::string_view> split_ws(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

std::size_t count_syllables(std::string_view word) {
  std::string w;
  for (unsigned char c : word) {
    if (std::isalpha(c)) w += static_cast<char>(std::tolower(c));
  }
  if (w.empty()) return 1;
  std::size_t groups = 0;
  bool in_group = false;
  for (char c : w) {
    const bool v = is_vowel(c);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  const std::size_t n = w.size();
  if (n >= 2 && w[n - 1] == 'e') {
    const bool consonant_le = n >= 3 && w[n - 2] == 'l' && !is_vowel(w[n - 3]);
    if (!consonant_le && groups > 0) --groups;
  }
  return groups == 0 ? 1 : groups;
}

double TextStats::grade() const {
  if (words == 0 || sentences == 0) return 0.0;
  const double w = static_cast<double>(words);
  return 0.39 * w / static_cast<double>(sentences) +
         11.8 * static_cast<double>(syllables) / w - 15.59;
}

TextStats text_stats(std::string_view text) {
  TextStats s;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    const bool end = i == text.size() || text[i] == '.' || text[i] == '!' || text[i] == '?';
    if (!end) continue;
    bool any = false;
    for (auto token : split_ws(text.substr(start, i - start))) {
      if (!has_word_char(token)) continue;
      any = true;
      ++s.words;
      s.syllables += count_syllables(token);
    }
    if (any) ++s.sentences;
    start = i + 1;
  }
  return s;
}

}  // namespace crowdguard
