#include "ragqa/text.hpp"

#include <algorithm>

namespace ragqa::text {

std::vector<CodePoint> decode_utf8(std::string_view text) {
  std::vector<CodePoint> out;
  out.reserve(text.size());
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const unsigned char b0 = s[i];
    if (b0 < 0x80) {
      out.push_back({b0, i, 1});
      ++i;
      continue;
    }
    std::size_t len = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if ((b0 & 0xE0) == 0xC0) {
      len = 2, cp = b0 & 0x1F, min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3, cp = b0 & 0x0F, min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4, cp = b0 & 0x07, min = 0x10000;
    }
    if (len == 0) {
      out.push_back({kReplacementChar, i, 1});
      ++i;
      continue;
    }
    std::size_t k = 1;
    for (; k < len && i + k < n; ++k) {
      if ((s[i + k] & 0xC0) != 0x80) break;
      cp = (cp << 6) | (s[i + k] & 0x3F);
    }
    if (k < len || cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      const std::size_t consumed = std::max<std::size_t>(k, 1);
      out.push_back({kReplacementChar, i, consumed});
      i += consumed;
      continue;
    }
    out.push_back({cp, i, len});
    i += len;
  }
  return out;
}

std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

namespace {

bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

bool is_arabic_letter(char32_t cp) {
  if (in(cp, 0x0620, 0x064A) || in(cp, 0x066E, 0x066F) || in(cp, 0x0671, 0x06D3) || cp == 0x06D5 ||
      in(cp, 0x06EE, 0x06EF) || in(cp, 0x06FA, 0x06FC) || cp == 0x06FF) {
    return true;
  }
  return in(cp, 0x0750, 0x077F) || in(cp, 0x08A0, 0x08C9) || in(cp, 0xFB50, 0xFDFB) || in(cp, 0xFE70, 0xFEFC);
}

bool is_latin_letter(char32_t cp) {
  if (in(cp, 'A', 'Z') || in(cp, 'a', 'z')) return true;
  if (cp == 0xAA || cp == 0xBA) return true;
  if (in(cp, 0x00C0, 0x024F)) return cp != 0xD7 && cp != 0xF7;
  return in(cp, 0x1E00, 0x1EFF) || in(cp, 0xFF21, 0xFF3A) || in(cp, 0xFF41, 0xFF5A);
}

// Letters of other common scripts; they count toward the denominator of the
// script ratios without favouring either supported language.
bool is_other_letter(char32_t cp) {
  return in(cp, 0x0370, 0x03FF) || in(cp, 0x0400, 0x052F) || in(cp, 0x0531, 0x0587) ||
         in(cp, 0x05D0, 0x05EA) || in(cp, 0x0900, 0x0DFF) || in(cp, 0x0E01, 0x0E30) ||
         in(cp, 0x10A0, 0x10FF) || in(cp, 0x3041, 0x30FF) || in(cp, 0x3400, 0x4DBF) ||
         in(cp, 0x4E00, 0x9FFF) || in(cp, 0xAC00, 0xD7AF);
}

}  // namespace

bool is_control(char32_t cp) {
  if (cp == '\t' || cp == '\n') return false;
  return cp < 0x20 || in(cp, 0x80, 0x9F);
}

CharClass classify(char32_t cp) {
  if (is_latin_letter(cp)) return CharClass::LatinLetter;
  if (is_arabic_letter(cp)) return CharClass::ArabicLetter;
  if (in(cp, '0', '9') || in(cp, 0x0660, 0x0669) || in(cp, 0x06F0, 0x06F9)) return CharClass::Digit;
  if (cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f' || cp == 0xA0 ||
      in(cp, 0x2000, 0x200A) || cp == 0x3000) {
    return CharClass::Space;
  }
  if (is_control(cp)) return CharClass::Control;
  if (is_other_letter(cp)) return CharClass::OtherLetter;
  return CharClass::Other;
}

double ScriptCounts::arabic_ratio() const {
  const auto total = letters();
  return total == 0 ? 0.0 : static_cast<double>(arabic) / static_cast<double>(total);
}

double ScriptCounts::latin_ratio() const {
  const auto total = letters();
  return total == 0 ? 0.0 : static_cast<double>(latin) / static_cast<double>(total);
}

ScriptCounts count_scripts(std::string_view text) {
  ScriptCounts counts;
  for (const auto& cp : decode_utf8(text)) {
    switch (classify(cp.value)) {
      case CharClass::ArabicLetter: ++counts.arabic; break;
      case CharClass::LatinLetter: ++counts.latin; break;
      case CharClass::OtherLetter: ++counts.other; break;
      default: break;
    }
  }
  return counts;
}

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<TokenSpan> whitespace_spans(std::string_view text) {
  std::vector<TokenSpan> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    if (i >= text.size()) break;
    const std::size_t begin = i;
    while (i < text.size() && !is_ascii_space(text[i])) ++i;
    spans.push_back({begin, i});
  }
  return spans;
}

std::vector<std::string_view> Tokenizer::tokens(std::string_view text) const {
  std::vector<std::string_view> out;
  for (const auto& s : spans(text)) out.push_back(text.substr(s.begin, s.end - s.begin));
  return out;
}

std::string Tokenizer::keep_tail(std::string_view text, std::size_t keep) const {
  const auto sp = spans(text);
  if (keep >= sp.size()) return std::string(text);
  if (keep == 0) return {};
  const auto& first = sp[sp.size() - keep];
  return std::string(text.substr(first.begin, sp.back().end - first.begin));
}

const Tokenizer& default_tokenizer() {
  static const WhitespaceTokenizer instance;
  return instance;
}

namespace {
bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 0x21 && u <= 0x2F) || (u >= 0x3A && u <= 0x40) || (u >= 0x5B && u <= 0x60) || (u >= 0x7B && u <= 0x7E);
}
}  // namespace

std::vector<std::string> normalized_words(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& span : whitespace_spans(text)) {
    std::size_t b = span.begin;
    std::size_t e = span.end;
    while (b < e && is_ascii_punct(text[b])) ++b;
    while (e > b && is_ascii_punct(text[e - 1])) --e;
    if (b < e) out.push_back(ascii_lower(text.substr(b, e - b)));
  }
  return out;
}

}  // namespace ragqa::text
