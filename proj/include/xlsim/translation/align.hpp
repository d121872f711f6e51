#pragma once

// Locating the translated target words inside a translated context.
//
// Ladder per word, first success wins:
//   1. exact   - folded (case + diacritics) search of the isolated-word
//                translation, on token boundaries
//   2. fuzzy   - longest common folded prefix >= 4 chars, or >= 60% of the
//                shorter string; the span is the whole matching token
//   3. marker  - re-translate the source with the word wrapped in sentinels
//                and lift the span the sentinels survive around
// Each strategy runs for every unresolved word before the next one starts,
// so a fuzzy guess for one word cannot take an exact match of the other.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xlsim/core/text.hpp"
#include "xlsim/dataset.hpp"
#include "xlsim/translation/types.hpp"

namespace xlsim {

struct Sentinels {
  std::string open = "⟦";
  std::string close = "⟧";
};

/// Fallback for the marker strategy: translate a source text that carries
/// sentinel-wrapped words. Absent result = unavailable.
class MarkerStrategy {
 public:
  using Fn = std::function<std::optional<std::string>(const std::string& marked_source)>;

  MarkerStrategy(Sentinels sentinels, Fn fn) : sentinels_(std::move(sentinels)), fn_(std::move(fn)) {}

  const Sentinels& sentinels() const noexcept { return sentinels_; }
  std::optional<std::string> translate(const std::string& marked_source) const { return fn_(marked_source); }

 private:
  Sentinels sentinels_;
  Fn fn_;
};

inline constexpr std::size_t kMaxPhraseTokens = 3;
inline constexpr std::size_t kFuzzyMinPrefix = 4;
inline constexpr double kFuzzyMinShareOfShorter = 0.6;

namespace detail {

struct Candidate {
  std::vector<std::u32string> phrase;  // folded tokens; used when 2..3 tokens
  std::u32string single;               // folded longest token
};

inline Candidate make_candidate(const std::string& word_translation) {
  Candidate c;
  const auto u = text::to_u32(word_translation);
  const auto toks = text::word_tokens(u);
  std::size_t best_len = 0;
  for (const auto& t : toks) {
    auto f = text::fold_for_match(std::u32string_view(u).substr(t.start, t.length())).folded;
    if (toks.size() >= 2 && toks.size() <= kMaxPhraseTokens) c.phrase.push_back(f);
    if (f.size() > best_len) {
      best_len = f.size();
      c.single = std::move(f);
    }
  }
  return c;
}

struct TargetText {
  std::u32string chars;
  std::vector<CharSpan> tokens;
  std::vector<std::u32string> folded_tokens;

  explicit TargetText(std::string_view s) : chars(text::to_u32(s)), tokens(text::word_tokens(chars)) {
    folded_tokens.reserve(tokens.size());
    for (const auto& t : tokens)
      folded_tokens.push_back(text::fold_for_match(std::u32string_view(chars).substr(t.start, t.length())).folded);
  }

  double relpos(const CharSpan& s) const {
    return chars.empty() ? 0.0 : (static_cast<double>(s.start + s.end) / 2.0) / static_cast<double>(chars.size());
  }
};

/// Exact token-aligned occurrences: the phrase (if any) first, then the single token.
inline std::vector<CharSpan> exact_occurrences(const TargetText& t, const Candidate& c) {
  std::vector<CharSpan> out;
  const auto& ft = t.folded_tokens;
  if (!c.phrase.empty()) {
    const auto n = c.phrase.size();
    for (std::size_t i = 0; i + n <= ft.size(); ++i) {
      bool match = true;
      for (std::size_t k = 0; k < n && match; ++k) match = ft[i + k] == c.phrase[k];
      if (match) out.push_back({t.tokens[i].start, t.tokens[i + n - 1].end});
    }
    if (!out.empty()) return out;
  }
  if (c.single.empty()) return out;
  for (std::size_t i = 0; i < ft.size(); ++i) {
    if (ft[i] == c.single) out.push_back(t.tokens[i]);
  }
  return out;
}

inline std::size_t common_prefix_len(const std::u32string& a, const std::u32string& b) {
  std::size_t n = 0;
  while (n < a.size() && n < b.size() && a[n] == b[n]) ++n;
  return n;
}

inline bool fuzzy_accepts(std::size_t lcp, std::size_t len_a, std::size_t len_b) {
  if (lcp == 0) return false;
  const auto shorter = static_cast<double>(std::min(len_a, len_b));
  return lcp >= kFuzzyMinPrefix || static_cast<double>(lcp) >= kFuzzyMinShareOfShorter * shorter;
}

inline bool free_of(const CharSpan& s, const std::optional<CharSpan>& taken) {
  return !taken || !s.overlaps(*taken);
}

inline std::optional<CharSpan> closest(const std::vector<CharSpan>& spans, const TargetText& t, double want,
                                       const std::optional<CharSpan>& taken) {
  std::optional<CharSpan> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& s : spans) {
    if (!free_of(s, taken)) continue;
    const double d = std::abs(t.relpos(s) - want);
    if (d < best_d) {
      best_d = d;
      best = s;
    }
  }
  return best;
}

inline std::optional<CharSpan> fuzzy_match(const TargetText& t, const Candidate& c, double want,
                                           const std::optional<CharSpan>& taken) {
  if (c.single.empty()) return std::nullopt;
  std::optional<CharSpan> best;
  std::size_t best_lcp = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.tokens.size(); ++i) {
    if (!free_of(t.tokens[i], taken)) continue;
    const auto& tok = t.folded_tokens[i];
    const auto lcp = common_prefix_len(tok, c.single);
    if (!fuzzy_accepts(lcp, tok.size(), c.single.size())) continue;
    const double d = std::abs(t.relpos(t.tokens[i]) - want);
    if (lcp > best_lcp || (lcp == best_lcp && d < best_d)) {
      best_lcp = lcp;
      best_d = d;
      best = t.tokens[i];
    }
  }
  return best;
}

inline std::u32string trim_non_word(std::u32string_view s, std::size_t& offset) {
  std::size_t b = 0, e = s.size();
  while (b < e && !text::is_word_char(s[b])) ++b;
  while (e > b && !text::is_word_char(s[e - 1])) --e;
  offset = b;
  return std::u32string(s.substr(b, e - b));
}

inline std::optional<CharSpan> marker_match(const MarkedContext& src, int k, const TargetText& t,
                                            const MarkerStrategy& strategy, double want,
                                            const std::optional<CharSpan>& taken) {
  const auto src_u = text::to_u32(src.text);
  const auto span = k == 1 ? src.span1 : src.span2;
  const auto open = text::to_u32(strategy.sentinels().open);
  const auto close = text::to_u32(strategy.sentinels().close);
  std::u32string marked = src_u.substr(0, span.start);
  marked += open;
  marked += src_u.substr(span.start, span.length());
  marked += close;
  marked += src_u.substr(span.end);

  const auto result = strategy.translate(text::to_utf8(marked));
  if (!result) return std::nullopt;
  const auto r = text::to_u32(*result);
  const auto o = r.find(open);
  if (o == std::u32string::npos) return std::nullopt;
  const auto c = r.find(close, o + open.size());
  if (c == std::u32string::npos) return std::nullopt;

  std::size_t inner_off = 0;
  const auto inner = trim_non_word(std::u32string_view(r).substr(o + open.size(), c - o - open.size()), inner_off);
  if (inner.empty()) return std::nullopt;

  // Same sentence once the sentinels are gone: positions carry over directly.
  std::u32string stripped = r.substr(0, o) + r.substr(o + open.size(), c - o - open.size()) + r.substr(c + close.size());
  if (text::nfc(text::to_utf8(stripped)) == text::nfc(text::to_utf8(t.chars))) {
    const auto start = o + inner_off;
    const CharSpan s{start, start + inner.size()};
    if (s.end <= t.chars.size() && free_of(s, taken)) return s;
  }

  // Otherwise search the lifted words in the plain translation.
  Candidate lifted;
  const auto toks = text::word_tokens(inner);
  std::size_t best_len = 0;
  for (const auto& tk : toks) {
    auto f = text::fold_for_match(std::u32string_view(inner).substr(tk.start, tk.length())).folded;
    if (toks.size() >= 2 && toks.size() <= kMaxPhraseTokens) lifted.phrase.push_back(f);
    if (f.size() > best_len) {
      best_len = f.size();
      lifted.single = std::move(f);
    }
  }
  return closest(exact_occurrences(t, lifted), t, want, taken);
}

}  // namespace detail

/// Aligns both target words of `src` inside `translated_text`. Failure is
/// recorded per word as method=failed with no span; nothing is thrown for it.
inline AlignedContext align_pair(const MarkedContext& src, const std::string& translated_text,
                                 const std::pair<std::string, std::string>& word_translations,
                                 const MarkerStrategy* fallback = nullptr) {
  if (translated_text.empty()) throw DataError("align_pair: empty translated text");
  const detail::TargetText target(translated_text);
  const double src_len = static_cast<double>(std::max<std::size_t>(text::char_length(src.text), 1));
  auto src_relpos = [&](const CharSpan& s) { return (static_cast<double>(s.start + s.end) / 2.0) / src_len; };

  const detail::Candidate cand[2] = {detail::make_candidate(word_translations.first),
                                     detail::make_candidate(word_translations.second)};
  const double want[2] = {src_relpos(src.span1), src_relpos(src.span2)};
  // Words in source order.
  const int order[2] = {src.span1.start <= src.span2.start ? 0 : 1, src.span1.start <= src.span2.start ? 1 : 0};

  std::optional<CharSpan> found[2];
  AlignMethod method[2] = {AlignMethod::failed, AlignMethod::failed};

  // Exact. One candidate for both words: occurrences go out in source order.
  const auto occ0 = detail::exact_occurrences(target, cand[0]);
  const auto occ1 = detail::exact_occurrences(target, cand[1]);
  const bool same_candidate = cand[0].phrase == cand[1].phrase && cand[0].single == cand[1].single;
  if (same_candidate && !occ0.empty()) {
    found[order[0]] = occ0[0];
    method[order[0]] = AlignMethod::exact;
    if (occ0.size() >= 2) {
      found[order[1]] = occ0[1];
      method[order[1]] = AlignMethod::exact;
    }
  } else {
    const std::vector<CharSpan>* occ[2] = {&occ0, &occ1};
    for (int w : order) {
      if (auto s = detail::closest(*occ[w], target, want[w], found[1 - w])) {
        found[w] = s;
        method[w] = AlignMethod::exact;
      }
    }
  }

  for (int w : order) {
    if (found[w]) continue;
    if (auto s = detail::fuzzy_match(target, cand[w], want[w], found[1 - w])) {
      found[w] = s;
      method[w] = AlignMethod::fuzzy;
    }
  }

  if (fallback) {
    for (int w : order) {
      if (found[w]) continue;
      if (auto s = detail::marker_match(src, w + 1, target, *fallback, want[w], found[1 - w])) {
        found[w] = s;
        method[w] = AlignMethod::marker;
      }
    }
  }

  AlignedContext out;
  out.text = translated_text;
  auto surface = [&](const CharSpan& s) {
    return text::to_utf8(std::u32string_view(target.chars).substr(s.start, s.length()));
  };
  out.span1 = found[0];
  out.span2 = found[1];
  if (found[0]) out.surface1 = surface(*found[0]);
  if (found[1]) out.surface2 = surface(*found[1]);
  out.method1 = method[0];
  out.method2 = method[1];
  return out;
}

/// The source context itself, both words located exactly.
inline AlignedContext identity_alignment(const MarkedContext& src) {
  return {src.text, src.span1, src.span2, src.surface1, src.surface2, AlignMethod::exact, AlignMethod::exact};
}

/// Soundness check: every present span reproduces its surface, failed words
/// carry no span, and the two spans do not overlap.
inline bool alignment_sound(const AlignedContext& c) {
  const auto u = text::to_u32(c.text);
  for (int k = 1; k <= 2; ++k) {
    const auto& s = c.span(k);
    const auto m = k == 1 ? c.method1 : c.method2;
    if (s.has_value() == (m == AlignMethod::failed)) return false;
    if (!s) continue;
    if (s->empty() || s->end > u.size()) return false;
    const auto sub = text::to_utf8(std::u32string_view(u).substr(s->start, s->length()));
    if (!c.surface(k) || *c.surface(k) != sub) return false;
  }
  if (c.span1 && c.span2 && c.span1->overlaps(*c.span2)) return false;
  return true;
}

}  // namespace xlsim
