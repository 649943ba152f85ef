#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ragqa::text {

inline constexpr char32_t kReplacementChar = 0xFFFD;

struct CodePoint {
  char32_t value;
  std::size_t byte_offset;
  std::size_t byte_length;
};

// Decodes UTF-8; every malformed or truncated sequence yields one U+FFFD
// covering the bytes consumed.
std::vector<CodePoint> decode_utf8(std::string_view text);
std::string encode_utf8(char32_t cp);

enum class CharClass { ArabicLetter, LatinLetter, OtherLetter, Digit, Space, Control, Other };

CharClass classify(char32_t cp);
bool is_control(char32_t cp);  // C0 (except TAB and LF) or C1

struct ScriptCounts {
  std::size_t arabic = 0;
  std::size_t latin = 0;
  std::size_t other = 0;

  std::size_t letters() const { return arabic + latin + other; }
  double arabic_ratio() const;
  double latin_ratio() const;
};

ScriptCounts count_scripts(std::string_view text);

std::string ascii_lower(std::string_view s);
bool is_ascii_space(char c);

struct TokenSpan {
  std::size_t begin;
  std::size_t end;  // byte offsets, half-open
};

std::vector<TokenSpan> whitespace_spans(std::string_view text);

// Tokenizers only need to yield spans; counting and head truncation are
// derived from them.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::string id() const = 0;
  virtual std::vector<TokenSpan> spans(std::string_view text) const = 0;

  std::size_t count(std::string_view text) const { return spans(text).size(); }
  std::vector<std::string_view> tokens(std::string_view text) const;
  // Keeps the last `keep` tokens, dropping everything before them.
  std::string keep_tail(std::string_view text, std::size_t keep) const;
};

class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::string id() const override { return "whitespace"; }
  std::vector<TokenSpan> spans(std::string_view text) const override { return whitespace_spans(text); }
};

const Tokenizer& default_tokenizer();

// Lowercased tokens with leading/trailing ASCII punctuation stripped; empty
// results are dropped. Used for keyword matching and overlap scoring.
std::vector<std::string> normalized_words(std::string_view text);

}  // namespace ragqa::text
