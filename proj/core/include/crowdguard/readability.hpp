#pragma once

// Flesch-Kincaid grade level with a small, fully specified tokenizer so that
// client and server agree on every count.

#include <cstddef>
#include <string>
#include <string_view>

namespace crowdguard {

// Vowel groups over a,e,i,o,u,y; a trailing silent 'e' is dropped unless the
// word ends in consonant + "le". At least 1.
std::size_t count_syllables(std::string_view word);

struct TextStats {
  std::size_t words = 0;
  std::size_t sentences = 0;
  std::size_t syllables = 0;

  // 0.39 * words/sentences + 11.8 * syllables/words - 15.59; 0 for no words.
  double grade() const;
};

// Words are whitespace-separated tokens containing a letter or digit.
// Sentences are the non-empty pieces between runs of '.', '!' and '?'.
TextStats text_stats(std::string_view text);

inline constexpr std::size_t kMinExplanationWords = 8;
inline constexpr double kMinExplanationGrade = 5.0;

}  // namespace crowdguard
