#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "xlsim/core/error.hpp"
#include "xlsim/core/text.hpp"

namespace xlsim {

/// Name of a translation engine ("engine-a", "engine-b", "fixture", ...).
class EngineId {
 public:
  EngineId() = default;
  explicit EngineId(std::string name) : name_(std::move(name)) {
    if (name_.empty()) throw UsageError("engine id must be nonempty");
    for (char c : name_) {
      if (c >= 'A' && c <= 'Z') throw UsageError("engine id '" + name_ + "' must be lowercase");
    }
  }
  const std::string& str() const noexcept { return name_; }
  friend auto operator<=>(const EngineId&, const EngineId&) = default;

 private:
  std::string name_;
};

inline void check_lang(std::string_view lang) {
  if (lang.empty()) throw UsageError("language code must be nonempty");
  for (char c : lang) {
    if (!((c >= 'a' && c <= 'z') || c == '-'))
      throw UsageError("language code '" + std::string(lang) + "' must be lowercase");
  }
}

struct TranslationRecord {
  EngineId engine;
  std::string src_lang;
  std::string tgt_lang;
  std::string source_text;
  std::string translated_text;
  std::string fetched_at;  // ISO-8601 UTC

  friend bool operator==(const TranslationRecord&, const TranslationRecord&) = default;
};

/// Something that can turn text in one language into another. Live clients
/// talk to a vendor API; offline clients never produce text.
class TranslationClient {
 public:
  virtual ~TranslationClient() = default;
  virtual std::string translate(const std::string& src_lang, const std::string& tgt_lang,
                                const std::string& text) = 0;
  virtual bool offline() const { return false; }
};

/// The fixture engine: every answer must already be in the cache.
class FixtureClient final : public TranslationClient {
 public:
  std::string translate(const std::string&, const std::string&, const std::string&) override {
    throw ExternalError("fixture engine cannot translate uncached text");
  }
  bool offline() const override { return true; }
};

enum class AlignMethod { exact, fuzzy, marker, failed };

inline std::string_view to_string(AlignMethod m) {
  switch (m) {
    case AlignMethod::exact: return "exact";
    case AlignMethod::fuzzy: return "fuzzy";
    case AlignMethod::marker: return "marker";
    case AlignMethod::failed: return "failed";
  }
  return "failed";
}

inline AlignMethod parse_align_method(std::string_view s) {
  if (s == "exact") return AlignMethod::exact;
  if (s == "fuzzy") return AlignMethod::fuzzy;
  if (s == "marker") return AlignMethod::marker;
  if (s == "failed") return AlignMethod::failed;
  throw DataError("unknown alignment method '" + std::string(s) + "'");
}

/// A (possibly translated) context with the target words located, or an
/// explicit failure per word.
struct AlignedContext {
  std::string text;
  std::optional<CharSpan> span1;
  std::optional<CharSpan> span2;
  std::optional<std::string> surface1;
  std::optional<std::string> surface2;
  AlignMethod method1 = AlignMethod::failed;
  AlignMethod method2 = AlignMethod::failed;

  const std::optional<CharSpan>& span(int k) const { return k == 1 ? span1 : span2; }
  const std::optional<std::string>& surface(int k) const { return k == 1 ? surface1 : surface2; }

  friend bool operator==(const AlignedContext&, const AlignedContext&) = default;
};

struct TranslatedView {
  std::string instance_id;
  std::string tgt_lang;
  EngineId engine;
  AlignedContext ctx1;
  AlignedContext ctx2;

  const AlignedContext& context(int m) const { return m == 1 ? ctx1 : ctx2; }

  friend bool operator==(const TranslatedView&, const TranslatedView&) = default;
};

inline nlohmann::ordered_json to_json(const AlignedContext& c) {
  auto span = [](const std::optional<CharSpan>& s) {
    return s ? nlohmann::ordered_json::array({s->start, s->end}) : nlohmann::ordered_json(nullptr);
  };
  auto str = [](const std::optional<std::string>& s) {
    return s ? nlohmann::ordered_json(*s) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["text"] = c.text;
  j["span1"] = span(c.span1);
  j["span2"] = span(c.span2);
  j["surface1"] = str(c.surface1);
  j["surface2"] = str(c.surface2);
  j["method1"] = std::string(to_string(c.method1));
  j["method2"] = std::string(to_string(c.method2));
  return j;
}

inline nlohmann::ordered_json to_json(const TranslatedView& v) {
  nlohmann::ordered_json j;
  j["instance_id"] = v.instance_id;
  j["tgt_lang"] = v.tgt_lang;
  j["engine"] = v.engine.str();
  j["ctx1"] = to_json(v.ctx1);
  j["ctx2"] = to_json(v.ctx2);
  return j;
}

inline AlignedContext aligned_context_from_json(const nlohmann::json& j) {
  AlignedContext c;
  c.text = j.at("text").get<std::string>();
  auto span = [](const nlohmann::json& s) -> std::optional<CharSpan> {
    if (s.is_null()) return std::nullopt;
    return CharSpan{s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()};
  };
  auto str = [](const nlohmann::json& s) -> std::optional<std::string> {
    if (s.is_null()) return std::nullopt;
    return s.get<std::string>();
  };
  c.span1 = span(j.at("span1"));
  c.span2 = span(j.at("span2"));
  c.surface1 = str(j.at("surface1"));
  c.surface2 = str(j.at("surface2"));
  c.method1 = parse_align_method(j.at("method1").get<std::string>());
  c.method2 = parse_align_method(j.at("method2").get<std::string>());
  return c;
}

inline TranslatedView view_from_json(const nlohmann::json& j) {
  return {j.at("instance_id").get<std::string>(), j.at("tgt_lang").get<std::string>(),
          EngineId(j.at("engine").get<std::string>()), aligned_context_from_json(j.at("ctx1")),
          aligned_context_from_json(j.at("ctx2"))};
}

}  // namespace xlsim
