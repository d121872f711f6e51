#pragma once

// Task-file import and the canonical newline-delimited instance format.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xlsim/core/error.hpp"
#include "xlsim/core/numeric.hpp"
#include "xlsim/core/text.hpp"

namespace xlsim {

/// A context passage with the two target-word occurrences located by
/// character spans. surface_i is always text[span_i].
struct MarkedContext {
  std::string text;
  CharSpan span1;
  CharSpan span2;
  std::string surface1;
  std::string surface2;

  friend bool operator==(const MarkedContext&, const MarkedContext&) = default;
};

struct GoldScores {
  double sim1_mean = 0.0;
  double sim2_mean = 0.0;

  friend bool operator==(const GoldScores&, const GoldScores&) = default;
};

struct Instance {
  std::string id;
  std::string source_lang;
  std::string word1;
  std::string word2;
  MarkedContext context1;
  MarkedContext context2;
  std::optional<GoldScores> gold;

  const MarkedContext& context(int m) const { return m == 1 ? context1 : context2; }

  friend bool operator==(const Instance&, const Instance&) = default;
};

/// Builds a context from text and spans, deriving the surfaces. Throws
/// DataError when a span is out of range, empty, or the two overlap.
inline MarkedContext make_context(std::string text, CharSpan span1, CharSpan span2) {
  const auto u = text::to_u32(text);
  for (const auto& s : {span1, span2}) {
    if (s.empty() || s.end > u.size())
      throw DataError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                      ") invalid for text of length " + std::to_string(u.size()));
  }
  if (span1.overlaps(span2)) throw DataError("target spans overlap");
  MarkedContext c;
  c.surface1 = text::to_utf8(std::u32string_view(u).substr(span1.start, span1.length()));
  c.surface2 = text::to_utf8(std::u32string_view(u).substr(span2.start, span2.length()));
  c.text = std::move(text);
  c.span1 = span1;
  c.span2 = span2;
  return c;
}

inline void validate(const MarkedContext& c) {
  const auto rebuilt = make_context(c.text, c.span1, c.span2);
  if (rebuilt.surface1 != c.surface1 || rebuilt.surface2 != c.surface2)
    throw DataError("recorded surface does not match text at span");
}

inline void validate(const Instance& inst) {
  if (inst.id.empty()) throw DataError("instance id is empty");
  validate(inst.context1);
  validate(inst.context2);
  if (inst.gold && (!std::isfinite(inst.gold->sim1_mean) || !std::isfinite(inst.gold->sim2_mean)))
    throw DataError("instance " + inst.id + ": gold scores must be finite");
}

enum class DatasetFormat { task_tsv, canonical };

inline DatasetFormat parse_dataset_format(std::string_view s) {
  if (s == "task-tsv" || s == "tsv") return DatasetFormat::task_tsv;
  if (s == "canonical" || s == "jsonl") return DatasetFormat::canonical;
  throw UsageError("unknown dataset format '" + std::string(s) + "' (expected task-tsv or canonical)");
}

struct ParseOptions {
  bool strict = true;
  std::string lang = "en";  // source language for task-tsv rows
  std::string open_marker = "<strong>";
  std::string close_marker = "</strong>";
};

struct RowIssue {
  std::size_t row;
  std::string message;
};

struct ParsedDataset {
  std::vector<Instance> instances;
  std::vector<RowIssue> skipped;  // lenient mode only
};

namespace detail {

struct Mark {
  CharSpan span;
  std::string surface;
};

/// Strips inline markers, returning plain text and the marked spans in text order.
inline std::pair<std::string, std::vector<Mark>> extract_marks(std::string_view raw, std::string_view open,
                                                               std::string_view close) {
  std::string plain;
  std::vector<Mark> marks;
  std::size_t chars = 0;
  std::optional<std::size_t> open_at;
  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw.compare(i, open.size(), open) == 0) {
      if (open_at) throw DataError("nested marker");
      open_at = chars;
      i += open.size();
      continue;
    }
    if (raw.compare(i, close.size(), close) == 0) {
      if (!open_at) throw DataError("closing marker without opening marker");
      if (*open_at == chars) throw DataError("empty marked span");
      marks.push_back({{*open_at, chars}, {}});
      open_at.reset();
      i += close.size();
      continue;
    }
    // Copy one UTF-8 sequence.
    const auto lead = static_cast<unsigned char>(raw[i]);
    std::size_t len = lead < 0x80 ? 1 : lead < 0xE0 ? 2 : lead < 0xF0 ? 3 : 4;
    len = std::min(len, raw.size() - i);
    plain.append(raw.substr(i, len));
    i += len;
    ++chars;
  }
  if (open_at) throw DataError("unclosed marker");
  const auto u = text::to_u32(plain);
  if (u.size() != chars) throw DataError("invalid UTF-8 in context");
  for (auto& m : marks) m.surface = text::to_utf8(std::u32string_view(u).substr(m.span.start, m.span.length()));
  return {std::move(plain), std::move(marks)};
}

inline std::size_t common_prefix(const std::u32string& a, const std::u32string& b) {
  std::size_t n = 0;
  while (n < a.size() && n < b.size() && a[n] == b[n]) ++n;
  return n;
}

/// Decides which of two marks is word1. Explicit surface hints win; otherwise
/// folded common-prefix affinity to the lemmas; ties keep text order.
inline bool marks_swapped(const std::vector<Mark>& marks, const std::string& word1, const std::string& word2,
                          const std::optional<std::string>& hint1, const std::optional<std::string>& hint2) {
  const auto a = text::fold(marks[0].surface);
  const auto b = text::fold(marks[1].surface);
  if (hint1 && hint2) {
    const auto h1 = text::fold(*hint1), h2 = text::fold(*hint2);
    if (a == h1 && b == h2) return false;
    if (a == h2 && b == h1) return true;
    throw DataError("marked words do not match the surface-form columns");
  }
  const auto w1 = text::fold(word1), w2 = text::fold(word2);
  const auto straight = common_prefix(a, w1) + common_prefix(b, w2);
  const auto crossed = common_prefix(a, w2) + common_prefix(b, w1);
  return crossed > straight;
}

inline MarkedContext context_from_markup(std::string_view raw, const ParseOptions& opt, const std::string& word1,
                                         const std::string& word2, const std::optional<std::string>& hint1,
                                         const std::optional<std::string>& hint2) {
  auto [plain, marks] = extract_marks(raw, opt.open_marker, opt.close_marker);
  if (marks.size() != 2)
    throw DataError("expected exactly 2 marked words, found " + std::to_string(marks.size()));
  if (marks_swapped(marks, word1, word2, hint1, hint2)) std::swap(marks[0], marks[1]);
  return make_context(std::move(plain), marks[0].span, marks[1].span);
}

inline std::string lower_ascii(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::optional<double> parse_gold_cell(const std::string& cell) {
  const auto t = text::trim(cell);
  if (t.empty()) return std::nullopt;
  auto v = numeric::parse_double(t);
  if (!v || !std::isfinite(*v)) throw DataError("gold score '" + t + "' is not a finite number");
  return v;
}

template <class RowFn>
ParsedDataset parse_lines(std::istream& in, const ParseOptions& opt, RowFn&& row_fn) {
  ParsedDataset out;
  std::set<std::string> ids;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    try {
      auto inst = row_fn(row, line);
      if (!inst) continue;
      if (!ids.insert(inst->id).second) throw DataError("duplicate id '" + inst->id + "'");
      out.instances.push_back(std::move(*inst));
    } catch (const ParseError&) {
      throw;  // structural (header) failures abort in every mode
    } catch (const DataError& e) {
      if (opt.strict) throw ParseError(row, e.what());
      out.skipped.push_back({row, e.what()});
    } catch (const nlohmann::json::exception& e) {
      if (opt.strict) throw ParseError(row, e.what());
      out.skipped.push_back({row, e.what()});
    }
  }
  return out;
}

inline ParsedDataset parse_task_tsv(std::istream& in, const ParseOptions& opt) {
  std::map<std::string, std::size_t> columns;
  std::size_t width = 0;
  std::size_t ordinal = 0;
  auto col = [&](const std::vector<std::string>& cells, std::initializer_list<const char*> names)
      -> std::optional<std::string> {
    for (const char* n : names) {
      if (auto it = columns.find(n); it != columns.end()) return cells[it->second];
    }
    return std::nullopt;
  };
  return parse_lines(in, opt, [&](std::size_t row, const std::string& line) -> std::optional<Instance> {
    if (text::trim(line).empty()) return std::nullopt;
    auto cells = text::split(line, '\t');
    if (columns.empty()) {
      for (std::size_t i = 0; i < cells.size(); ++i) columns[lower_ascii(text::trim(cells[i]))] = i;
      width = cells.size();
      for (const char* req : {"word1", "word2", "context1", "context2"}) {
        if (!columns.count(req)) throw ParseError(row, std::string("header lacks required column '") + req + "'");
      }
      return std::nullopt;
    }
    if (cells.size() != width)
      throw DataError("expected " + std::to_string(width) + " columns, found " + std::to_string(cells.size()));
    ++ordinal;
    Instance inst;
    inst.id = col(cells, {"id"}).value_or(std::to_string(ordinal));
    inst.id = text::trim(inst.id);
    inst.source_lang = opt.lang;
    inst.word1 = text::trim(*col(cells, {"word1"}));
    inst.word2 = text::trim(*col(cells, {"word2"}));
    inst.context1 = context_from_markup(*col(cells, {"context1"}), opt, inst.word1, inst.word2,
                                        col(cells, {"word1_context1"}), col(cells, {"word2_context1"}));
    inst.context2 = context_from_markup(*col(cells, {"context2"}), opt, inst.word1, inst.word2,
                                        col(cells, {"word1_context2"}), col(cells, {"word2_context2"}));
    auto g1 = col(cells, {"sim_context1", "sim1", "gold_sim1"});
    auto g2 = col(cells, {"sim_context2", "sim2", "gold_sim2"});
    auto s1 = g1 ? parse_gold_cell(*g1) : std::nullopt;
    auto s2 = g2 ? parse_gold_cell(*g2) : std::nullopt;
    if (s1.has_value() != s2.has_value()) throw DataError("gold scores must be given for both contexts or neither");
    if (s1) inst.gold = GoldScores{*s1, *s2};
    validate(inst);
    return inst;
  });
}

inline CharSpan span_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned())
    throw DataError("span must be a [start,end) pair of non-negative integers");
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

inline ParsedDataset parse_canonical(std::istream& in, const ParseOptions& opt) {
  return parse_lines(in, opt, [&](std::size_t, const std::string& line) -> std::optional<Instance> {
    if (text::trim(line).empty()) return std::nullopt;
    const auto j = nlohmann::json::parse(line);
    if (!j.is_object()) throw DataError("record is not an object");
    Instance inst;
    inst.id = j.at("id").get<std::string>();
    inst.source_lang = j.at("lang").get<std::string>();
    inst.word1 = j.at("word1").get<std::string>();
    inst.word2 = j.at("word2").get<std::string>();
    inst.context1 = make_context(j.at("ctx1_text").get<std::string>(), span_from_json(j.at("ctx1_span1")),
                                 span_from_json(j.at("ctx1_span2")));
    inst.context2 = make_context(j.at("ctx2_text").get<std::string>(), span_from_json(j.at("ctx2_span1")),
                                 span_from_json(j.at("ctx2_span2")));
    const auto& g1 = j.at("gold_sim1");
    const auto& g2 = j.at("gold_sim2");
    if (g1.is_null() != g2.is_null()) throw DataError("gold_sim1/gold_sim2 must both be null or both numbers");
    if (!g1.is_null()) inst.gold = GoldScores{g1.get<double>(), g2.get<double>()};
    validate(inst);
    return inst;
  });
}

}  // namespace detail

inline ParsedDataset parse_dataset(std::istream& in, DatasetFormat format, const ParseOptions& opt = {}) {
  return format == DatasetFormat::task_tsv ? detail::parse_task_tsv(in, opt) : detail::parse_canonical(in, opt);
}

inline ParsedDataset parse_dataset(const std::string& path, DatasetFormat format, const ParseOptions& opt = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  return parse_dataset(in, format, opt);
}

inline nlohmann::ordered_json to_json(const Instance& inst) {
  auto span = [](CharSpan s) { return nlohmann::ordered_json::array({s.start, s.end}); };
  nlohmann::ordered_json j;
  j["id"] = inst.id;
  j["lang"] = inst.source_lang;
  j["word1"] = inst.word1;
  j["word2"] = inst.word2;
  j["ctx1_text"] = inst.context1.text;
  j["ctx1_span1"] = span(inst.context1.span1);
  j["ctx1_span2"] = span(inst.context1.span2);
  j["ctx2_text"] = inst.context2.text;
  j["ctx2_span1"] = span(inst.context2.span1);
  j["ctx2_span2"] = span(inst.context2.span2);
  j["gold_sim1"] = inst.gold ? nlohmann::ordered_json(inst.gold->sim1_mean) : nlohmann::ordered_json(nullptr);
  j["gold_sim2"] = inst.gold ? nlohmann::ordered_json(inst.gold->sim2_mean) : nlohmann::ordered_json(nullptr);
  return j;
}

inline void write_canonical(const std::vector<Instance>& instances, std::ostream& out) {
  for (const auto& inst : instances) {
    validate(inst);
    out << to_json(inst).dump() << '\n';
  }
}

inline void write_canonical(const std::vector<Instance>& instances, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_canonical(instances, out);
  out.flush();
  if (!out) throw DataError("I/O failure writing '" + path + "'");
}

}  // namespace xlsim
