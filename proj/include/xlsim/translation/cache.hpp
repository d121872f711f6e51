#pragma once

// Append-only translation cache. One JSON record per line; the key is
// (engine, src, tgt, sha256 of the NFC-normalized source text).

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xlsim/core/error.hpp"
#include "xlsim/core/hash.hpp"
#include "xlsim/core/text.hpp"
#include "xlsim/translation/types.hpp"

namespace xlsim {

struct CacheKey {
  std::string engine;
  std::string src;
  std::string tgt;
  std::string content_hash;

  friend auto operator<=>(const CacheKey&, const CacheKey&) = default;

  std::string describe() const { return "engine=" + engine + " " + src + "->" + tgt + " sha256=" + content_hash; }
};

inline std::string content_hash(std::string_view text) { return hash::sha256_hex(text::nfc(text)); }

inline CacheKey make_cache_key(const EngineId& engine, const std::string& src, const std::string& tgt,
                               std::string_view text) {
  return {engine.str(), src, tgt, content_hash(text)};
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class TranslationCache {
 public:
  /// In-memory cache with no backing file.
  TranslationCache() = default;

  /// Opens (or starts) the cache file at `path`; existing records are loaded.
  explicit TranslationCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      if (text::trim(line).empty()) continue;
      try {
        insert_locked(record_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(row, std::string("translation cache: ") + e.what());
      } catch (const DataError& e) {
        throw ParseError(row, std::string("translation cache: ") + e.what());
      }
    }
  }

  TranslationCache(const TranslationCache&) = delete;
  TranslationCache& operator=(const TranslationCache&) = delete;

  std::optional<TranslationRecord> lookup(const CacheKey& key) const {
    std::shared_lock lock(mu_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    return std::nullopt;
  }

  /// Stores a record. Identical content for an existing key is a no-op;
  /// different content for an existing key is an integrity error.
  void store(const TranslationRecord& rec) {
    std::unique_lock lock(mu_);
    if (!insert_locked(rec)) return;
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out << record_to_json(rec).dump() << '\n';
    out.flush();
    if (!out) throw DataError("I/O failure appending to translation cache '" + path_ + "'");
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
  }

  /// All records in key order.
  std::vector<TranslationRecord> records() const {
    std::shared_lock lock(mu_);
    std::vector<TranslationRecord> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.push_back(v);
    return out;
  }

  const std::string& path() const noexcept { return path_; }

  /// Rewrites a cache file with one line per key, in key order.
  static std::size_t compact(const std::string& path) {
    TranslationCache cache(path);
    const auto recs = cache.records();
    const std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      for (const auto& r : recs) out << record_to_json(r).dump() << '\n';
      if (!out) throw DataError("I/O failure compacting '" + path + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw DataError("cannot replace '" + path + "'");
    return recs.size();
  }

  static nlohmann::ordered_json record_to_json(const TranslationRecord& r) {
    nlohmann::ordered_json j;
    j["engine"] = r.engine.str();
    j["src"] = r.src_lang;
    j["tgt"] = r.tgt_lang;
    j["sha256"] = content_hash(r.source_text);
    j["source_text"] = r.source_text;
    j["translated_text"] = r.translated_text;
    j["timestamp"] = r.fetched_at;
    return j;
  }

  static TranslationRecord record_from_json(const nlohmann::json& j) {
    TranslationRecord r{EngineId(j.at("engine").get<std::string>()),
                        j.at("src").get<std::string>(),
                        j.at("tgt").get<std::string>(),
                        j.at("source_text").get<std::string>(),
                        j.at("translated_text").get<std::string>(),
                        j.value("timestamp", std::string{})};
    if (j.contains("sha256") && j["sha256"].get<std::string>() != content_hash(r.source_text))
      throw DataError("sha256 does not match source_text");
    return r;
  }

 private:
  bool insert_locked(const TranslationRecord& rec) {
    if (rec.src_lang == rec.tgt_lang) throw DataError("cache record has src == tgt");
    if (rec.translated_text.empty()) throw DataError("cache record has empty translation");
    const auto key = make_cache_key(rec.engine, rec.src_lang, rec.tgt_lang, rec.source_text);
    auto [it, inserted] = entries_.try_emplace(key, rec);
    if (inserted) return true;
    if (it->second.translated_text != rec.translated_text)
      throw DataError("translation cache integrity error: conflicting content for " + key.describe());
    return false;
  }

  std::string path_;
  mutable std::shared_mutex mu_;
  std::map<CacheKey, TranslationRecord> entries_;
};

/// Cache-first translation. A miss goes to the client unless it is offline,
/// in which case the miss is reported as a FixtureMiss naming the key.
inline TranslationRecord translate(const EngineId& engine, const std::string& src_lang, const std::string& tgt_lang,
                                   const std::string& text, TranslationCache& cache, TranslationClient& client) {
  check_lang(src_lang);
  check_lang(tgt_lang);
  if (src_lang == tgt_lang) throw UsageError("translate: source and target language are both '" + src_lang + "'");
  if (text.empty()) throw DataError("translate: empty text");
  const auto key = make_cache_key(engine, src_lang, tgt_lang, text);
  if (auto hit = cache.lookup(key)) return *hit;
  if (client.offline()) throw FixtureMiss("translation cache", key.describe());
  TranslationRecord rec{engine, src_lang, tgt_lang, text, client.translate(src_lang, tgt_lang, text), utc_timestamp()};
  if (rec.translated_text.empty())
    throw ExternalError("engine " + engine.str() + " returned an empty translation for " + key.describe());
  cache.store(rec);
  return rec;
}

/// Isolated-word translation; same cache and failure contract as translate().
inline TranslationRecord translate_word(const EngineId& engine, const std::string& src_lang,
                                        const std::string& tgt_lang, const std::string& word,
                                        TranslationCache& cache, TranslationClient& client) {
  const auto w = text::trim(word);
  if (w.empty()) throw DataError("translate_word: empty word");
  return translate(engine, src_lang, tgt_lang, w, cache, client);
}

}  // namespace xlsim
