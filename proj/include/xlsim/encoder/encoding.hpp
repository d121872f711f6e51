#pragma once

// Contextual token encodings and the contextual similarity channel.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xlsim/core/error.hpp"
#include "xlsim/core/numeric.hpp"
#include "xlsim/core/text.hpp"

namespace xlsim {

struct Token {
  CharSpan span;
  std::vector<float> vector;

  friend bool operator==(const Token&, const Token&) = default;
};

/// Per-token vectors for one sentence. Offsets are characters of `text`.
struct TokenEncoding {
  std::string lang;
  std::string text;
  std::vector<Token> tokens;
  std::size_t dim = 0;
  std::string backend_id;

  friend bool operator==(const TokenEncoding&, const TokenEncoding&) = default;
};

/// Every broken invariant, as human-readable diagnostics. Empty = valid.
inline std::vector<std::string> validate_encoding(const TokenEncoding& enc) {
  std::vector<std::string> out;
  if (enc.dim == 0) out.push_back("dim must be positive");
  std::size_t len = 0;
  try {
    len = text::char_length(enc.text);
  } catch (const DataError&) {
    out.push_back("text is not valid UTF-8");
  }
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < enc.tokens.size(); ++i) {
    const auto& t = enc.tokens[i];
    const auto where = "token " + std::to_string(i) + ": ";
    if (t.span.start >= t.span.end) out.push_back(where + "start must be < end");
    if (t.span.end > len)
      out.push_back(where + "end " + std::to_string(t.span.end) + " beyond text length " + std::to_string(len));
    if (t.span.start < prev_end) out.push_back(where + "overlaps or precedes the previous token");
    prev_end = std::max(prev_end, t.span.end);
    if (t.vector.size() != enc.dim)
      out.push_back(where + "vector length " + std::to_string(t.vector.size()) + " != dim " + std::to_string(enc.dim));
    for (float x : t.vector) {
      if (!std::isfinite(x)) {
        out.push_back(where + "non-finite vector component");
        break;
      }
    }
  }
  return out;
}

/// Throws ProtocolViolation listing every broken invariant.
inline const TokenEncoding& require_valid(const TokenEncoding& enc) {
  const auto v = validate_encoding(enc);
  if (!v.empty()) throw ProtocolViolation(text::join(v, "; "));
  return enc;
}

/// Mean of the vectors of every token whose span intersects `span`.
inline std::optional<std::vector<double>> word_vector(const TokenEncoding& enc, CharSpan span) {
  std::vector<double> acc(enc.dim, 0.0);
  std::size_t n = 0;
  for (const auto& t : enc.tokens) {
    if (!t.span.overlaps(span)) continue;
    for (std::size_t k = 0; k < enc.dim; ++k) acc[k] += static_cast<double>(t.vector[k]);
    ++n;
  }
  if (n == 0) return std::nullopt;
  for (auto& x : acc) x /= static_cast<double>(n);
  return acc;
}

/// Cosine between the two word vectors of one sentence.
inline std::optional<double> bert_similarity(const TokenEncoding& enc, CharSpan span1, CharSpan span2) {
  const auto a = word_vector(enc, span1);
  const auto b = word_vector(enc, span2);
  if (!a || !b) return std::nullopt;
  return numeric::cosine(std::span<const double>(*a), std::span<const double>(*b));
}

// Wire form of an encoding: {"dim":D,"tokens":[{"start":s,"end":e,"vec":[...]}...]}

inline nlohmann::json encoding_to_json(const TokenEncoding& enc) {
  nlohmann::json toks = nlohmann::json::array();
  for (const auto& t : enc.tokens) toks.push_back({{"start", t.span.start}, {"end", t.span.end}, {"vec", t.vector}});
  return {{"dim", enc.dim}, {"tokens", std::move(toks)}};
}

/// Parses a response body; structural problems are protocol violations.
/// Invariant checks are left to require_valid().
inline TokenEncoding encoding_from_json(const nlohmann::json& j, std::string lang, std::string text,
                                        std::string backend_id) {
  try {
    TokenEncoding enc;
    enc.lang = std::move(lang);
    enc.text = std::move(text);
    enc.backend_id = std::move(backend_id);
    const auto& d = j.at("dim");
    if (!d.is_number_integer() || d.get<long long>() <= 0) throw ProtocolViolation("dim must be a positive integer");
    enc.dim = d.get<std::size_t>();
    for (const auto& t : j.at("tokens")) {
      const auto& s = t.at("start");
      const auto& e = t.at("end");
      if (!s.is_number_integer() || !e.is_number_integer() || s.get<long long>() < 0 || e.get<long long>() < 0)
        throw ProtocolViolation("token offsets must be non-negative integers");
      Token tok;
      tok.span = {s.get<std::size_t>(), e.get<std::size_t>()};
      tok.vector = t.at("vec").get<std::vector<float>>();
      enc.tokens.push_back(std::move(tok));
    }
    return enc;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolViolation(std::string("malformed encoding: ") + e.what());
  }
}

}  // namespace xlsim
