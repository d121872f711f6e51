#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "xlsim/core/error.hpp"
#include "xlsim/core/hash.hpp"
#include "xlsim/encoder/encoding.hpp"

namespace xlsim {

class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;
  /// Encodes `text`; the result always satisfies the TokenEncoding invariants.
  virtual TokenEncoding encode(const std::string& lang, const std::string& text) = 0;
  virtual std::string id() const = 0;
};

/// Whitespace tokens with unit vectors drawn from a seeded hash of
/// (seed, lang, dim, token, position). Pure and offline.
class SyntheticHashBackend final : public EncoderBackend {
 public:
  SyntheticHashBackend(std::size_t dim, uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim_ == 0) throw UsageError("synthetic-hash dim must be positive");
  }

  TokenEncoding encode(const std::string& lang, const std::string& text) override {
    if (text.empty()) throw DataError("encode: empty text");
    const auto u = text::to_u32(text);
    TokenEncoding enc{lang, text, {}, dim_, id()};
    const auto spans = text::whitespace_tokens(u);
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const auto piece = text::to_utf8(std::u32string_view(u).substr(spans[i].start, spans[i].length()));
      enc.tokens.push_back({spans[i], unit_vector(lang, piece, i)});
    }
    return enc;
  }

  std::string id() const override {
    return "synthetic-hash:dim=" + std::to_string(dim_) + ":seed=" + std::to_string(seed_);
  }

 private:
  std::vector<float> unit_vector(const std::string& lang, const std::string& piece, std::size_t pos) const {
    const std::string material = std::to_string(seed_) + '\x1f' + lang + '\x1f' + std::to_string(dim_) + '\x1f' +
                                 piece + '\x1f' + std::to_string(pos);
    std::mt19937_64 rng(hash::sha256_u64(material));
    std::vector<double> v(dim_);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& x : v) {
        x = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
        norm += x * x;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    std::vector<float> out(dim_);
    for (std::size_t k = 0; k < dim_; ++k) out[k] = static_cast<float>(v[k] / norm);
    return out;
  }

  std::size_t dim_;
  uint64_t seed_;
};

inline std::string fixture_key(const std::string& lang, const std::string& text) {
  return lang + ":" + hash::sha256_hex(text::nfc(text));
}

/// Frozen encodings keyed by (lang, sha256 of NFC text). One protocol
/// response per line, plus "lang" and "sha256" fields.
class FixtureFileBackend final : public EncoderBackend {
 public:
  FixtureFileBackend() = default;

  explicit FixtureFileBackend(const std::string& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open encoder fixture '" + path + "'");
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      if (text::trim(line).empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        const auto key = j.at("lang").get<std::string>() + ":" + j.at("sha256").get<std::string>();
        entries_[key] = j;
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(row, std::string("encoder fixture: ") + e.what());
      }
    }
  }

  void add(const TokenEncoding& enc) {
    auto j = encoding_to_json(enc);
    j["lang"] = enc.lang;
    j["sha256"] = hash::sha256_hex(text::nfc(enc.text));
    entries_[fixture_key(enc.lang, enc.text)] = std::move(j);
  }

  TokenEncoding encode(const std::string& lang, const std::string& text) override {
    const auto key = fixture_key(lang, text);
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw FixtureMiss("encoder fixture" + (path_.empty() ? "" : " " + path_), key);
    auto enc = encoding_from_json(it->second, lang, text, id());
    return require_valid(enc);
  }

  std::string id() const override { return "fixture-file"; }
  std::size_t size() const { return entries_.size(); }

  /// One fixture line for `enc`.
  static std::string fixture_line(const TokenEncoding& enc) {
    nlohmann::ordered_json j;
    j["lang"] = enc.lang;
    j["sha256"] = hash::sha256_hex(text::nfc(enc.text));
    j["text"] = enc.text;
    j["dim"] = enc.dim;
    nlohmann::ordered_json toks = nlohmann::ordered_json::array();
    for (const auto& t : enc.tokens) {
      nlohmann::ordered_json tj;
      tj["start"] = t.span.start;
      tj["end"] = t.span.end;
      tj["vec"] = t.vector;
      toks.push_back(std::move(tj));
    }
    j["tokens"] = std::move(toks);
    return j.dump();
  }

 private:
  std::string path_;
  std::map<std::string, nlohmann::json> entries_;
};

/// Remembers encodings per (lang, text); safe for concurrent callers.
class MemoizingBackend final : public EncoderBackend {
 public:
  explicit MemoizingBackend(std::shared_ptr<EncoderBackend> inner) : inner_(std::move(inner)) {}

  TokenEncoding encode(const std::string& lang, const std::string& text) override {
    const auto key = std::make_pair(lang, text);
    {
      std::shared_lock lock(mu_);
      if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    }
    auto enc = inner_->encode(lang, text);
    std::unique_lock lock(mu_);
    return memo_.try_emplace(key, std::move(enc)).first->second;
  }

  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<EncoderBackend> inner_;
  std::shared_mutex mu_;
  std::map<std::pair<std::string, std::string>, TokenEncoding> memo_;
};

}  // namespace xlsim
