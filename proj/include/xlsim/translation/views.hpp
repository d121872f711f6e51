#pragma once

// Fan-out of instances into per-language aligned views.

#include <algorithm>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "xlsim/core/error.hpp"
#include "xlsim/core/parallel.hpp"
#include "xlsim/dataset.hpp"
#include "xlsim/translation/align.hpp"
#include "xlsim/translation/cache.hpp"
#include "xlsim/translation/types.hpp"

namespace xlsim {

/// One engine bound to its cache and client.
struct Translator {
  EngineId engine;
  TranslationCache* cache = nullptr;
  TranslationClient* client = nullptr;
  std::optional<Sentinels> marker_sentinels;  // absent disables the marker strategy
};

struct ViewFailure {
  std::string instance_id;
  std::string lang;
  ErrorKind kind;
  std::string message;
};

struct ViewBuild {
  std::vector<TranslatedView> views;  // ordered by (instance id, language)
  std::vector<ViewFailure> ledger;    // same order
};

inline TranslatedView identity_view(const Instance& inst, const EngineId& engine) {
  return {inst.id, inst.source_lang, engine, identity_alignment(inst.context1), identity_alignment(inst.context2)};
}

/// Translates both contexts and both words of one instance into `lang`
/// and aligns. Throws on translation failure.
inline TranslatedView build_view(const Instance& inst, const std::string& lang, const Translator& tr) {
  if (lang == inst.source_lang) return identity_view(inst, tr.engine);
  auto& cache = *tr.cache;
  auto& client = *tr.client;
  const auto& src = inst.source_lang;
  const auto t1 = translate(tr.engine, src, lang, inst.context1.text, cache, client);
  const auto t2 = translate(tr.engine, src, lang, inst.context2.text, cache, client);
  const auto w1 = translate_word(tr.engine, src, lang, inst.word1, cache, client);
  const auto w2 = translate_word(tr.engine, src, lang, inst.word2, cache, client);
  const std::pair words{w1.translated_text, w2.translated_text};

  std::optional<MarkerStrategy> marker;
  if (tr.marker_sentinels) {
    marker.emplace(*tr.marker_sentinels, [&](const std::string& marked) -> std::optional<std::string> {
      try {
        return translate(tr.engine, src, lang, marked, cache, client).translated_text;
      } catch (const Error&) {
        return std::nullopt;
      }
    });
  }
  const MarkerStrategy* fallback = marker ? &*marker : nullptr;
  return {inst.id, lang, tr.engine, align_pair(inst.context1, t1.translated_text, words, fallback),
          align_pair(inst.context2, t2.translated_text, words, fallback)};
}

/// One view per (instance, language); the source language yields an
/// identity view. Failures go to the ledger and the rest still come back.
inline ViewBuild build_views(const std::vector<Instance>& instances, const std::vector<std::string>& languages,
                             const Translator& tr, std::size_t jobs = 1) {
  struct Item {
    const Instance* inst;
    std::string lang;
  };
  std::vector<Item> items;
  for (const auto& inst : instances) {
    std::vector<std::string> seen;
    for (const auto& lang : languages) {
      if (std::find(seen.begin(), seen.end(), lang) != seen.end()) continue;
      seen.push_back(lang);
      items.push_back({&inst, lang});
    }
  }
  std::vector<std::optional<TranslatedView>> views(items.size());
  std::vector<std::optional<ViewFailure>> failures(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    try {
      views[i] = build_view(*items[i].inst, items[i].lang, tr);
    } catch (const Error& e) {
      failures[i] = ViewFailure{items[i].inst->id, items[i].lang, e.kind(), e.what()};
    }
  });

  ViewBuild out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (views[i]) out.views.push_back(std::move(*views[i]));
    if (failures[i]) out.ledger.push_back(std::move(*failures[i]));
  }
  std::stable_sort(out.views.begin(), out.views.end(), [](const auto& a, const auto& b) {
    return std::tie(a.instance_id, a.tgt_lang) < std::tie(b.instance_id, b.tgt_lang);
  });
  std::stable_sort(out.ledger.begin(), out.ledger.end(), [](const auto& a, const auto& b) {
    return std::tie(a.instance_id, a.lang) < std::tie(b.instance_id, b.lang);
  });
  return out;
}

inline void write_views(const std::vector<TranslatedView>& views, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const auto& v : views) out << to_json(v).dump() << '\n';
  if (!out) throw DataError("I/O failure writing '" + path + "'");
}

inline std::vector<TranslatedView> read_views(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open views file '" + path + "'");
  std::vector<TranslatedView> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(view_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(row, e.what());
    }
    if (!alignment_sound(out.back().ctx1) || !alignment_sound(out.back().ctx2))
      throw ParseError(row, "view fails the alignment soundness check");
  }
  return out;
}

}  // namespace xlsim
