#pragma once

// Ablation harnesses: weight sweeps, greedy language addition, engine
// comparison, and the named official configurations.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "xlsim/core/error.hpp"
#include "xlsim/core/numeric.hpp"
#include "xlsim/metrics.hpp"
#include "xlsim/scoring.hpp"

namespace xlsim {

/// Minimum gain for a greedy step to count as an improvement.
inline constexpr double kGreedyMinGain = 1e-12;

struct ResultRow {
  std::string config_fingerprint;
  std::vector<std::string> languages;  // extras, in config order
  double alpha = 0.0;
  double beta = 0.0;
  std::string engine;
  int subtask = 1;
  std::string metric;
  std::optional<double> value;  // absent when the run failed
  std::size_t n = 0;
  std::vector<std::string> flags;

  bool failed() const noexcept { return !value.has_value(); }
};

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string languages_label(const std::vector<std::string>& langs) {
  return langs.empty() ? "none" : text::join(langs, "+");
}

}  // namespace detail

inline void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "config_fingerprint,languages,alpha,beta,engine,subtask,metric,value,n,flags\n";
  for (const auto& r : rows) {
    out << r.config_fingerprint << ',' << detail::csv_field(detail::languages_label(r.languages)) << ','
        << numeric::format_double(r.alpha) << ',' << numeric::format_double(r.beta) << ','
        << detail::csv_field(r.engine) << ',' << r.subtask << ',' << detail::csv_field(r.metric) << ','
        << (r.value ? numeric::format_double(*r.value) : "") << ',' << r.n << ','
        << detail::csv_field(text::join(r.flags, ";")) << '\n';
  }
}

inline std::string results_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  write_results_csv(rows, out);
  return out.str();
}

/// Scores `cfg` once and evaluates every requested subtask. Failures of the
/// whole run become failed rows rather than exceptions.
inline std::vector<ResultRow> evaluate_config(const Pipeline& pipeline, const ExperimentConfig& cfg,
                                              const std::vector<int>& subtasks, Pooling pooling = Pooling::pooled) {
  std::vector<ResultRow> rows;
  auto blank = [&](int subtask) {
    ResultRow r;
    r.config_fingerprint = cfg.fingerprint();
    r.languages = cfg.languages;
    r.alpha = cfg.alpha;
    r.beta = cfg.beta;
    r.engine = cfg.engine.str();
    r.subtask = subtask;
    r.metric = subtask == 1 ? "uncentered_pearson" : "harmonic_mean";
    return r;
  };
  std::optional<ScoreRun> run;
  std::string run_error;
  try {
    run = pipeline.score(cfg);
  } catch (const Error& e) {
    run_error = e.what();
  }
  for (int subtask : subtasks) {
    auto r = blank(subtask);
    if (!run) {
      r.flags.push_back("failed: " + run_error);
      rows.push_back(std::move(r));
      continue;
    }
    if (!run->failures.empty()) r.flags.push_back("instance-failures=" + std::to_string(run->failures.size()));
    try {
      const auto rep = evaluate_sheets(run->sheets, pipeline.dataset(), subtask, pooling);
      r.value = rep.value;
      r.n = rep.n;
      r.flags.insert(r.flags.end(), rep.flags.begin(), rep.flags.end());
    } catch (const Error& e) {
      r.flags.push_back(std::string("failed: ") + e.what());
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

/// (alpha, 1 - alpha) for alpha in 0.0, 0.1, ..., 1.0, then the official
/// weight pairs not already present.
inline std::vector<std::pair<double, double>> default_grid() {
  std::vector<std::pair<double, double>> grid;
  for (int i = 0; i <= 10; ++i) grid.emplace_back(i / 10.0, (10 - i) / 10.0);
  for (const auto& p : std::vector<std::pair<double, double>>{{0.7, 0.3}, {0.8, 0.2}, {0.6, 0.4}, {1.0, 0.0}}) {
    if (std::find(grid.begin(), grid.end(), p) == grid.end()) grid.push_back(p);
  }
  return grid;
}

inline std::vector<ResultRow> sweep_alpha_beta(const Pipeline& pipeline, const ExperimentConfig& base,
                                               const std::vector<std::pair<double, double>>& grid,
                                               const std::vector<int>& subtasks, Pooling pooling = Pooling::pooled) {
  if (grid.empty()) throw UsageError("sweep grid is empty");
  std::vector<ResultRow> rows;
  for (const auto& [a, b] : grid) {
    auto cfg = base;
    cfg.alpha = a;
    cfg.beta = b;
    std::vector<ResultRow> part;
    try {
      cfg.validate();
      part = evaluate_config(pipeline, cfg, subtasks, pooling);
    } catch (const UsageError& e) {
      for (int st : subtasks) {
        ResultRow r;
        r.languages = cfg.languages;
        r.alpha = a;
        r.beta = b;
        r.engine = cfg.engine.str();
        r.subtask = st;
        r.metric = st == 1 ? "uncentered_pearson" : "harmonic_mean";
        r.flags.push_back(std::string("failed: ") + e.what());
        part.push_back(std::move(r));
      }
    }
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

struct GreedyStep {
  int iteration = 0;
  std::vector<std::string> languages;  // extras evaluated
  std::string added;                   // candidate tried; empty for the base
  std::optional<double> value;
  bool kept = false;
  std::string error;
};

struct GreedyTrace {
  std::vector<GreedyStep> steps;        // every evaluation, in order
  std::vector<std::string> selected;    // extras kept, in selection order
  double base_value = 0.0;
  double final_value = 0.0;

  /// Scores along the kept path: the base, then each kept step.
  std::vector<double> kept_path() const {
    std::vector<double> out;
    for (const auto& s : steps) {
      if (s.kept && s.value) out.push_back(*s.value);
    }
    return out;
  }
};

/// Starting from the source language alone, repeatedly adds the remaining
/// candidate with the highest score; stops when no candidate beats the
/// current score by more than kGreedyMinGain. Ties go to the earlier
/// candidate.
inline GreedyTrace greedy_language_addition(const Pipeline& pipeline, const ExperimentConfig& base,
                                            const std::vector<std::string>& candidates, int subtask,
                                            Pooling pooling = Pooling::pooled) {
  if (!base.languages.empty()) throw UsageError("greedy base configuration must use the source language only");
  auto score = [&](const std::vector<std::string>& langs) {
    auto cfg = base;
    cfg.languages = langs;
    const auto run = pipeline.score(cfg);
    return evaluate_sheets(run.sheets, pipeline.dataset(), subtask, pooling).value;
  };

  GreedyTrace trace;
  trace.base_value = score({});
  trace.steps.push_back({0, {}, "", trace.base_value, true, ""});
  double current = trace.base_value;

  std::vector<std::string> remaining;
  for (const auto& c : candidates) {
    if (std::find(remaining.begin(), remaining.end(), c) == remaining.end()) remaining.push_back(c);
  }
  for (int iteration = 1; !remaining.empty(); ++iteration) {
    std::optional<std::size_t> best;
    double best_value = 0.0;
    const std::size_t first_step = trace.steps.size();
    for (std::size_t k = 0; k < remaining.size(); ++k) {
      auto langs = trace.selected;
      langs.push_back(remaining[k]);
      GreedyStep step{iteration, langs, remaining[k], std::nullopt, false, ""};
      try {
        step.value = score(langs);
        if (!best || *step.value > best_value) {
          best = k;
          best_value = *step.value;
        }
      } catch (const Error& e) {
        step.error = e.what();
      }
      trace.steps.push_back(std::move(step));
    }
    if (!best || !(best_value > current + kGreedyMinGain)) break;
    trace.steps[first_step + *best].kept = true;
    trace.selected.push_back(remaining[*best]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(*best));
    current = best_value;
  }
  trace.final_value = current;
  return trace;
}

inline void write_greedy_csv(const GreedyTrace& trace, std::ostream& out) {
  out << "iteration,languages,added,value,kept,error\n";
  for (const auto& s : trace.steps) {
    out << s.iteration << ',' << detail::csv_field(detail::languages_label(s.languages)) << ','
        << detail::csv_field(s.added) << ',' << (s.value ? numeric::format_double(*s.value) : "") << ','
        << (s.kept ? "1" : "0") << ',' << detail::csv_field(s.error) << '\n';
  }
}

/// Same configuration under each engine. One engine's failure does not
/// affect the others.
inline std::vector<ResultRow> compare_engines(const Pipeline& pipeline, const ExperimentConfig& cfg,
                                              const std::vector<EngineId>& engines, const std::vector<int>& subtasks,
                                              Pooling pooling = Pooling::pooled) {
  if (engines.empty()) throw UsageError("no engines to compare");
  std::vector<ResultRow> rows;
  for (const auto& e : engines) {
    auto c = cfg;
    c.engine = e;
    const auto part = evaluate_config(pipeline, c, subtasks, pooling);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

inline const std::vector<std::string>& all_languages() {
  static const std::vector<std::string> langs{"en", "es", "it", "bs", "de", "el", "pl", "pt", "ru", "sr", "tr"};
  return langs;
}

struct OfficialRow {
  std::string name;
  std::vector<std::string> languages;  // extras; the source is removed at run time
  double alpha;
  double beta;
};

inline const std::vector<OfficialRow>& official_rows() {
  static const std::vector<OfficialRow> rows{
      {"none", {}, 0.7, 0.3},
      {"pt-el-tr-ru", {"pt", "el", "tr", "ru"}, 0.8, 0.2},
      {"es-it-pt-de", {"es", "it", "pt", "de"}, 0.6, 0.4},
      {"all-11", all_languages(), 0.7, 0.3},
      {"all-11-bert", all_languages(), 1.0, 0.0},
  };
  return rows;
}

inline const OfficialRow& official_row(const std::string& name) {
  for (const auto& r : official_rows()) {
    if (r.name == name) return r;
  }
  std::vector<std::string> names;
  for (const auto& r : official_rows()) names.push_back(r.name);
  throw UsageError("unknown official row '" + name + "' (expected one of: " + text::join(names, ", ") + ")");
}

/// The configuration of `row` for datasets in `source` language.
inline ExperimentConfig official_config(const OfficialRow& row, const ExperimentConfig& base,
                                        const std::string& source) {
  auto cfg = base;
  cfg.alpha = row.alpha;
  cfg.beta = row.beta;
  cfg.languages.clear();
  for (const auto& l : row.languages) {
    if (l != source) cfg.languages.push_back(l);
  }
  return cfg;
}

/// (instance, language) pairs of `cfg` that have no translated view.
inline std::vector<std::pair<std::string, std::string>> missing_views(const Pipeline& pipeline,
                                                                      const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& inst : pipeline.dataset()) {
    for (const auto& lang : cfg.effective_languages(inst.source_lang)) {
      if (lang != inst.source_lang && !pipeline.views().find(cfg.engine, inst.id, lang)) out.emplace_back(inst.id, lang);
    }
  }
  return out;
}

struct OfficialRun {
  ExperimentConfig config;
  ScoreRun run;
  EvalReport report;
};

/// Runs a named configuration end to end. Every view the configuration
/// needs must exist; otherwise the error lists what to translate.
inline OfficialRun run_official(const Pipeline& pipeline, const OfficialRow& row, const ExperimentConfig& base,
                                int subtask, Pooling pooling = Pooling::pooled) {
  if (pipeline.dataset().empty()) throw DataError("dataset is empty");
  const auto cfg = official_config(row, base, pipeline.dataset().front().source_lang);
  if (const auto missing = missing_views(pipeline, cfg); !missing.empty()) {
    std::set<std::string> langs;
    for (const auto& m : missing) langs.insert(m.second);
    throw ExternalError("official row '" + row.name + "' is missing " + std::to_string(missing.size()) +
                        " translated views (languages: " + text::join({langs.begin(), langs.end()}, ",") +
                        ", engine " + cfg.engine.str() + "); run `xlsim translate --languages " +
                        text::join({langs.begin(), langs.end()}, ",") +
                        "` with live credentials or a primed cache first");
  }
  OfficialRun out{cfg, pipeline.score(cfg), {}};
  if (out.run.sheets.empty()) throw DataError("no instance produced a score");
  out.report = evaluate_sheets(out.run.sheets, pipeline.dataset(), subtask, pooling);
  if (!out.run.failures.empty())
    out.report.flags.push_back("instance-failures=" + std::to_string(out.run.failures.size()));
  return out;
}

// Plot series: one CSV per figure, x then y.

inline void write_sweep_series(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "alpha,beta,subtask,value\n";
  for (const auto& r : rows) {
    if (r.value)
      out << numeric::format_double(r.alpha) << ',' << numeric::format_double(r.beta) << ',' << r.subtask << ','
          << numeric::format_double(*r.value) << '\n';
  }
}

inline void write_greedy_series(const GreedyTrace& trace, std::ostream& out) {
  out << "n_languages,languages,value\n";
  for (const auto& s : trace.steps) {
    if (s.kept && s.value)
      out << s.languages.size() + 1 << ',' << detail::csv_field(detail::languages_label(s.languages)) << ','
          << numeric::format_double(*s.value) << '\n';
  }
}

inline void write_engine_series(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "engine,subtask,value\n";
  for (const auto& r : rows) {
    if (r.value) out << detail::csv_field(r.engine) << ',' << r.subtask << ',' << numeric::format_double(*r.value) << '\n';
  }
}

}  // namespace xlsim
