#pragma once

// Per-language channel scores, the weighted multilingual average, and the
// two subtask projections.
//
// For one context S_m and effective language set L:
//
//   SIM(S_m) = (1/|L'|) * sum_{l in L'} ( alpha * bert_l + beta * we_l )
//
// where L' keeps the languages with at least one usable channel. A language
// with only one channel contributes that channel alone (its weight
// renormalized to 1); a channel whose weight is zero cannot stand alone.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xlsim/core/error.hpp"
#include "xlsim/core/hash.hpp"
#include "xlsim/core/numeric.hpp"
#include "xlsim/core/parallel.hpp"
#include "xlsim/dataset.hpp"
#include "xlsim/embedstore.hpp"
#include "xlsim/encoder/backends.hpp"
#include "xlsim/translation/types.hpp"
#include "xlsim/translation/views.hpp"

namespace xlsim {

struct ExperimentConfig {
  double alpha = 0.7;  // contextual channel weight
  double beta = 0.3;   // static embedding channel weight
  std::vector<std::string> languages;  // extra languages; the source is always implied
  EngineId engine{"fixture"};
  std::string backend = "fixture-file";

  void validate() const {
    if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0 || beta < 0)
      throw UsageError("alpha and beta must be finite and non-negative");
    if (!(alpha + beta > 0)) throw UsageError("alpha + beta must be positive");
    for (const auto& l : languages) check_lang(l);
  }

  /// {source} followed by the extras, duplicates removed.
  std::vector<std::string> effective_languages(const std::string& source) const {
    std::vector<std::string> out{source};
    for (const auto& l : languages) {
      if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
    }
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["languages"] = languages;
    j["engine"] = engine.str();
    j["backend"] = backend;
    return j;
  }

  std::string fingerprint() const { return hash::sha256_hex(to_json().dump()).substr(0, 16); }
};

struct ChannelScores {
  std::string instance_id;
  std::string lang;
  int context_index = 1;
  std::optional<double> sim_we;
  std::optional<double> sim_bert;
  std::pair<AlignMethod, AlignMethod> alignment_methods{AlignMethod::failed, AlignMethod::failed};
  std::string note;  // why a channel is missing, when one is
};

struct Combined {
  double value = 0.0;
  std::vector<std::string> languages;  // contributing, in input order
};

/// Every language lacked a usable channel for some context.
class NoSignalError : public DataError {
 public:
  NoSignalError(const std::string& what, std::vector<std::string> reasons)
      : DataError("no signal: " + what + (reasons.empty() ? "" : " [" + text::join(reasons, "; ") + "]")),
        reasons_(std::move(reasons)) {}
  const std::vector<std::string>& reasons() const noexcept { return reasons_; }

 private:
  std::vector<std::string> reasons_;
};

/// Per-language value under the renormalization rule; absent = excluded.
inline std::optional<double> language_value(const ChannelScores& c, double alpha, double beta) {
  const bool bert = c.sim_bert.has_value() && alpha > 0;
  const bool we = c.sim_we.has_value() && beta > 0;
  if (c.sim_bert && c.sim_we) return alpha * *c.sim_bert + beta * *c.sim_we;
  if (bert) return *c.sim_bert;
  if (we) return *c.sim_we;
  return std::nullopt;
}

/// Weighted multilingual average over the languages of one (instance, context).
/// Contributions are summed in sorted order so the result does not depend on
/// the order of `channels`.
inline Combined combine(const std::vector<ChannelScores>& channels, double alpha, double beta) {
  if (channels.empty()) throw NoSignalError("no languages to combine", {});
  std::vector<double> values;
  Combined out;
  std::vector<std::string> reasons;
  for (const auto& c : channels) {
    if (auto v = language_value(c, alpha, beta)) {
      values.push_back(*v);
      out.languages.push_back(c.lang);
    } else {
      std::string why = c.note.empty() ? "no usable channel" : c.note;
      if (c.sim_bert && alpha == 0) why = "only the contextual channel is available and alpha = 0";
      if (c.sim_we && beta == 0) why = "only the embedding channel is available and beta = 0";
      reasons.push_back(c.lang + ": " + why);
    }
  }
  if (values.empty()) {
    const auto& first = channels.front();
    throw NoSignalError("instance " + first.instance_id + " context " + std::to_string(first.context_index),
                        std::move(reasons));
  }
  std::sort(values.begin(), values.end());
  out.value = numeric::sum(values) / static_cast<double>(values.size());
  return out;
}

struct ScoreSheet {
  std::string instance_id;
  double sim1 = 0.0;
  double sim2 = 0.0;
  double delta = 0.0;  // sim2 - sim1
  std::array<std::vector<std::string>, 2> contributing_languages;
  std::string config_fingerprint;
  std::vector<ChannelScores> channels;  // trace
};

using StoreSet = std::map<std::string, std::shared_ptr<const VectorStore>>;

/// Views keyed by (engine, instance id, language).
class ViewIndex {
 public:
  ViewIndex() = default;
  explicit ViewIndex(const std::vector<TranslatedView>& views) {
    for (const auto& v : views) add(v);
  }

  void add(const TranslatedView& v) { views_[{v.engine.str(), v.instance_id, v.tgt_lang}] = v; }

  const TranslatedView* find(const EngineId& engine, const std::string& id, const std::string& lang) const {
    const auto it = views_.find({engine.str(), id, lang});
    return it == views_.end() ? nullptr : &it->second;
  }

  std::size_t size() const noexcept { return views_.size(); }

 private:
  std::map<std::tuple<std::string, std::string, std::string>, TranslatedView> views_;
};

/// Both channels of one aligned context.
inline ChannelScores context_channels(const std::string& instance_id, const std::string& lang, int m,
                                      const AlignedContext& ctx, const VectorStore* store, EncoderBackend& backend) {
  ChannelScores c;
  c.instance_id = instance_id;
  c.lang = lang;
  c.context_index = m;
  c.alignment_methods = {ctx.method1, ctx.method2};
  std::vector<std::string> notes;
  if (ctx.surface1 && ctx.surface2) {
    if (!store) {
      notes.push_back("no vector store");
    } else {
      c.sim_we = we_similarity(*store, *ctx.surface1, *ctx.surface2);
      if (!c.sim_we) notes.push_back("embedding OOV or zero vector");
    }
  }
  if (ctx.span1 && ctx.span2) {
    const auto enc = backend.encode(lang, ctx.text);
    c.sim_bert = bert_similarity(enc, *ctx.span1, *ctx.span2);
    if (!c.sim_bert) notes.push_back("no token covers a target word");
  } else {
    notes.push_back("alignment failed");
  }
  c.note = text::join(notes, ", ");
  return c;
}

/// Channel scores for both contexts of `inst` in `lang`. A missing view
/// yields empty channels with a note.
inline std::array<ChannelScores, 2> language_channels(const Instance& inst, const std::string& lang,
                                                      const TranslatedView* view, const StoreSet& stores,
                                                      EncoderBackend& backend) {
  std::array<ChannelScores, 2> out;
  const auto it = stores.find(lang);
  const VectorStore* store = it == stores.end() ? nullptr : it->second.get();
  std::optional<TranslatedView> identity;
  if (!view && lang == inst.source_lang) {
    identity = identity_view(inst, EngineId("identity"));
    view = &*identity;
  }
  for (int m = 1; m <= 2; ++m) {
    if (!view) {
      out[m - 1] = ChannelScores{inst.id, lang, m, std::nullopt, std::nullopt, {}, "no translated view"};
      continue;
    }
    out[m - 1] = context_channels(inst.id, lang, m, view->context(m), store, backend);
  }
  return out;
}

inline ScoreSheet sheet_from_channels(const Instance& inst, std::vector<ChannelScores> channels,
                                      const ExperimentConfig& cfg) {
  std::vector<ChannelScores> per_ctx[2];
  for (const auto& c : channels) per_ctx[c.context_index - 1].push_back(c);
  const auto c1 = combine(per_ctx[0], cfg.alpha, cfg.beta);
  const auto c2 = combine(per_ctx[1], cfg.alpha, cfg.beta);
  ScoreSheet s;
  s.instance_id = inst.id;
  s.sim1 = c1.value;
  s.sim2 = c2.value;
  s.delta = s.sim2 - s.sim1;
  s.contributing_languages = {c1.languages, c2.languages};
  s.config_fingerprint = cfg.fingerprint();
  s.channels = std::move(channels);
  return s;
}

/// Scores one instance across {source} + config.languages.
inline ScoreSheet score_instance(const Instance& inst, const ViewIndex& views, const StoreSet& stores,
                                 EncoderBackend& backend, const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<ChannelScores> channels;
  for (const auto& lang : cfg.effective_languages(inst.source_lang)) {
    const auto ch = language_channels(inst, lang, views.find(cfg.engine, inst.id, lang), stores, backend);
    channels.insert(channels.end(), ch.begin(), ch.end());
  }
  return sheet_from_channels(inst, std::move(channels), cfg);
}

inline std::map<std::string, double> predict_subtask1(const std::vector<ScoreSheet>& sheets) {
  if (sheets.empty()) throw DataError("no score sheets to project");
  std::map<std::string, double> out;
  for (const auto& s : sheets) out[s.instance_id] = s.delta;
  return out;
}

inline std::map<std::string, std::pair<double, double>> predict_subtask2(const std::vector<ScoreSheet>& sheets) {
  if (sheets.empty()) throw DataError("no score sheets to project");
  std::map<std::string, std::pair<double, double>> out;
  for (const auto& s : sheets) out[s.instance_id] = {s.sim1, s.sim2};
  return out;
}

struct InstanceFailure {
  std::string instance_id;
  std::string message;
};

struct ScoreRun {
  std::vector<ScoreSheet> sheets;        // ordered by instance id
  std::vector<InstanceFailure> failures;  // instances that produced no sheet
};

/// Immutable scoring resources plus a channel memo, so that sweeps over
/// weights and language sets reuse channel scores.
class Pipeline {
 public:
  Pipeline(std::vector<Instance> dataset, ViewIndex views, StoreSet stores, std::shared_ptr<EncoderBackend> backend,
           std::size_t jobs = 1)
      : dataset_(std::move(dataset)),
        views_(std::move(views)),
        stores_(std::move(stores)),
        backend_(std::move(backend)),
        jobs_(std::max<std::size_t>(jobs, 1)) {
    std::sort(dataset_.begin(), dataset_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  }

  const std::vector<Instance>& dataset() const noexcept { return dataset_; }
  const ViewIndex& views() const noexcept { return views_; }
  std::size_t jobs() const noexcept { return jobs_; }

  /// Scores every instance; no-signal instances land in `failures`.
  ScoreRun score(const ExperimentConfig& cfg) const {
    cfg.validate();
    std::vector<std::optional<ScoreSheet>> sheets(dataset_.size());
    std::vector<std::optional<InstanceFailure>> failures(dataset_.size());
    parallel_for(dataset_.size(), jobs_, [&](std::size_t i) {
      const auto& inst = dataset_[i];
      std::vector<ChannelScores> channels;
      for (const auto& lang : cfg.effective_languages(inst.source_lang)) {
        const auto ch = channels_for(inst, lang, cfg.engine);
        channels.insert(channels.end(), ch.begin(), ch.end());
      }
      try {
        sheets[i] = sheet_from_channels(inst, std::move(channels), cfg);
      } catch (const NoSignalError& e) {
        failures[i] = InstanceFailure{inst.id, e.what()};
      }
    });
    ScoreRun run;
    for (std::size_t i = 0; i < dataset_.size(); ++i) {
      if (sheets[i]) run.sheets.push_back(std::move(*sheets[i]));
      if (failures[i]) run.failures.push_back(std::move(*failures[i]));
    }
    return run;
  }

 private:
  std::array<ChannelScores, 2> channels_for(const Instance& inst, const std::string& lang,
                                            const EngineId& engine) const {
    const auto key = std::make_tuple(engine.str(), inst.id, lang);
    {
      std::shared_lock lock(memo_mu_);
      if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    }
    auto ch = language_channels(inst, lang, views_.find(engine, inst.id, lang), stores_, *backend_);
    std::unique_lock lock(memo_mu_);
    return memo_.try_emplace(key, std::move(ch)).first->second;
  }

  std::vector<Instance> dataset_;
  ViewIndex views_;
  StoreSet stores_;
  std::shared_ptr<EncoderBackend> backend_;
  std::size_t jobs_;
  mutable std::shared_mutex memo_mu_;
  mutable std::map<std::tuple<std::string, std::string, std::string>, std::array<ChannelScores, 2>> memo_;
};

// Prediction files: tab-separated with a header row, rows in id order.
//   subtask 1: id  change
//   subtask 2: id  sim_context1  sim_context2

inline void write_predictions(const std::map<std::string, double>& change, std::ostream& out) {
  out << "id\tchange\n";
  for (const auto& [id, d] : change) out << id << '\t' << numeric::format_double(d) << '\n';
}

inline void write_predictions(const std::map<std::string, std::pair<double, double>>& sims, std::ostream& out) {
  out << "id\tsim_context1\tsim_context2\n";
  for (const auto& [id, s] : sims)
    out << id << '\t' << numeric::format_double(s.first) << '\t' << numeric::format_double(s.second) << '\n';
}

template <class Map>
void write_predictions_file(const Map& preds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_predictions(preds, out);
  if (!out) throw DataError("I/O failure writing '" + path + "'");
}

struct Predictions {
  int subtask = 1;
  std::map<std::string, double> change;                      // subtask 1
  std::map<std::string, std::pair<double, double>> sims;     // subtask 2
};

inline Predictions read_predictions(std::istream& in) {
  Predictions p;
  std::string line;
  std::size_t row = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(line, '\t');
    if (width == 0) {
      width = cells.size();
      if (width == 2 && text::trim(cells[1]) == "change") {
        p.subtask = 1;
      } else if (width == 3 && text::trim(cells[1]) == "sim_context1" && text::trim(cells[2]) == "sim_context2") {
        p.subtask = 2;
      } else {
        throw ParseError(row, "prediction header must be 'id<TAB>change' or 'id<TAB>sim_context1<TAB>sim_context2'");
      }
      continue;
    }
    if (cells.size() != width) throw ParseError(row, "expected " + std::to_string(width) + " columns");
    std::vector<double> vals;
    for (std::size_t k = 1; k < cells.size(); ++k) {
      const auto v = numeric::parse_double(text::trim(cells[k]));
      if (!v || !std::isfinite(*v)) throw ParseError(row, "value '" + cells[k] + "' is not a finite number");
      vals.push_back(*v);
    }
    const auto id = text::trim(cells[0]);
    const bool fresh = p.subtask == 1 ? p.change.emplace(id, vals[0]).second
                                      : p.sims.emplace(id, std::pair{vals[0], vals[1]}).second;
    if (!fresh) throw ParseError(row, "duplicate id '" + id + "'");
  }
  if (width == 0) throw DataError("prediction file is empty");
  return p;
}

inline Predictions read_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open predictions '" + path + "'");
  return read_predictions(in);
}

}  // namespace xlsim
