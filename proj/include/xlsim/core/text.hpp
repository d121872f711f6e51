#pragma once

// UTF-8 text helpers. Every offset in this library counts Unicode scalar
// values, never bytes.

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "xlsim/core/error.hpp"

namespace xlsim {

/// Half-open character interval [start, end).
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end > start ? end - start : 0; }
  bool empty() const noexcept { return end <= start; }
  bool overlaps(const CharSpan& o) const noexcept { return start < o.end && o.start < end; }
  bool contains(const CharSpan& o) const noexcept { return start <= o.start && o.end <= end; }

  friend auto operator<=>(const CharSpan&, const CharSpan&) = default;
};

namespace text {

inline std::u32string to_u32(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  const auto n = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < n) {
    UChar32 c;
    U8_NEXT(p, i, n, c);
    if (c < 0) throw DataError("invalid UTF-8 at byte " + std::to_string(i));
    out.push_back(static_cast<char32_t>(c));
  }
  return out;
}

inline std::string to_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) {
    uint8_t buf[U8_MAX_LENGTH];
    int32_t len = 0;
    UBool err = false;
    U8_APPEND(buf, len, U8_MAX_LENGTH, static_cast<UChar32>(c), err);
    if (err) throw DataError("code point not encodable as UTF-8");
    out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(len));
  }
  return out;
}

inline std::size_t char_length(std::string_view s) { return to_u32(s).size(); }

inline std::string char_substr(std::string_view s, CharSpan span) {
  const auto u = to_u32(s);
  if (span.end > u.size() || span.start > span.end)
    throw DataError("character span out of range");
  return to_utf8(std::u32string_view(u).substr(span.start, span.length()));
}

inline bool is_valid_utf8(std::string_view s) {
  try {
    to_u32(s);
    return true;
  } catch (const DataError&) {
    return false;
  }
}

inline std::string nfc(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw DataError("ICU NFC normalizer unavailable");
  icu::UnicodeString in = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  icu::UnicodeString out = norm->normalize(in, status);
  if (U_FAILURE(status)) throw DataError("NFC normalization failed");
  std::string result;
  out.toUTF8String(result);
  return result;
}

inline std::string lowercase(std::string_view s) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  u.toLower(icu::Locale::getRoot());
  std::string out;
  u.toUTF8String(out);
  return out;
}

inline bool is_mark(char32_t c) {
  const auto t = u_charType(static_cast<UChar32>(c));
  return t == U_NON_SPACING_MARK || t == U_COMBINING_SPACING_MARK || t == U_ENCLOSING_MARK;
}

inline bool is_word_char(char32_t c) {
  return u_isalnum(static_cast<UChar32>(c)) || is_mark(c);
}

inline bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }

/// Case-folded, diacritic-stripped form of a text, with a map from each
/// folded position back to the originating character index.
struct FoldedText {
  std::u32string folded;
  std::vector<std::size_t> origin;  // origin[i] = index in the source text

  /// Source span covered by folded positions [begin, end).
  CharSpan source_span(std::size_t begin, std::size_t end) const {
    return {origin[begin], origin[end - 1] + 1};
  }
};

/// Folding used for matching only: NFD, drop combining marks, simple case fold.
inline FoldedText fold_for_match(std::u32string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfd = icu::Normalizer2::getNFDInstance(status);
  if (U_FAILURE(status)) throw DataError("ICU NFD normalizer unavailable");
  FoldedText out;
  out.folded.reserve(s.size());
  out.origin.reserve(s.size());
  icu::UnicodeString decomposed;
  for (std::size_t i = 0; i < s.size(); ++i) {
    decomposed.remove();
    if (!nfd->getDecomposition(static_cast<UChar32>(s[i]), decomposed)) {
      decomposed.setTo(static_cast<UChar32>(s[i]));
    }
    for (int32_t k = 0; k < decomposed.length();) {
      const UChar32 c = decomposed.char32At(k);
      k += U16_LENGTH(c);
      if (is_mark(static_cast<char32_t>(c))) continue;
      out.folded.push_back(static_cast<char32_t>(u_foldCase(c, U_FOLD_CASE_DEFAULT)));
      out.origin.push_back(i);
    }
  }
  return out;
}

inline std::u32string fold(std::string_view s) { return fold_for_match(to_u32(s)).folded; }

/// Maximal runs of word characters (letters, digits, marks).
inline std::vector<CharSpan> word_tokens(std::u32string_view s) {
  std::vector<CharSpan> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_word_char(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_word_char(s[j])) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

/// Maximal runs of non-whitespace characters.
inline std::vector<CharSpan> whitespace_tokens(std::u32string_view s) {
  std::vector<CharSpan> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (is_space(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t b = 0;
  while (true) {
    const auto e = s.find(sep, b);
    out.emplace_back(s.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
    if (e == std::string_view::npos) break;
    b = e + 1;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace text
}  // namespace xlsim
