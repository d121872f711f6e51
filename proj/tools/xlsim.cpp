// xlsim command-line entry point.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xlsim/xlsim.hpp"

namespace fs = std::filesystem;
using namespace xlsim;

namespace {

struct Globals {
  std::string config;
  std::optional<uint64_t> seed;
  bool strict = false;
  bool lenient = false;
  std::optional<std::size_t> jobs;
  std::string out;
};

struct Overrides {
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<std::vector<std::string>> languages;
  std::string engine;
};

void log(const std::string& msg) { std::cerr << "xlsim: " << msg << '\n'; }

RunConfig resolve_config(const Globals& g) {
  RunConfig cfg;
  if (!g.config.empty()) {
    cfg = load_config(g.config);
  } else {
    cfg.engines = default_engines();
  }
  if (g.seed) cfg.encoder.seed = *g.seed;
  if (g.strict && g.lenient) throw UsageError("--strict and --lenient are mutually exclusive");
  if (g.lenient) cfg.parse.strict = false;
  if (g.strict) cfg.parse.strict = true;
  if (g.jobs) cfg.jobs = std::max<std::size_t>(*g.jobs, 1);
  if (!g.out.empty()) cfg.out = g.out;
  return cfg;
}

void apply(RunConfig& cfg, const Overrides& o) {
  if (o.alpha) cfg.experiment.alpha = *o.alpha;
  if (o.beta) cfg.experiment.beta = *o.beta;
  if (o.languages) cfg.experiment.languages = *o.languages;
  if (!o.engine.empty()) cfg.experiment.engine = EngineId(o.engine);
  cfg.experiment.validate();
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out);
  return (fs::path(cfg.out) / name).string();
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << body;
  if (!out) throw DataError("I/O failure writing '" + path + "'");
}

std::vector<Instance> dataset_or_throw(const RunConfig& cfg) {
  auto parsed = load_dataset(cfg);
  for (const auto& issue : parsed.skipped) log("skipped row " + std::to_string(issue.row) + ": " + issue.message);
  if (parsed.instances.empty()) throw DataError("dataset '" + cfg.dataset + "' has no instances");
  return std::move(parsed.instances);
}

std::string failures_tsv(const std::vector<ViewFailure>& ledger) {
  std::string out = "id\tlang\tkind\tmessage\n";
  for (const auto& f : ledger)
    out += f.instance_id + '\t' + f.lang + '\t' + std::to_string(exit_code(f.kind)) + '\t' + f.message + '\n';
  return out;
}

/// Views for every engine and language the run needs, either from the
/// configured views file or built from the translation cache.
ViewIndex collect_views(const RunConfig& cfg, const std::vector<Instance>& data, const std::vector<EngineId>& engines,
                        const std::vector<std::string>& languages) {
  if (!cfg.views.empty()) return ViewIndex(read_views(cfg.views));
  ViewIndex index;
  std::unique_ptr<TranslationCache> cache =
      cfg.cache.empty() ? std::make_unique<TranslationCache>() : std::make_unique<TranslationCache>(cfg.cache);
  std::vector<ViewFailure> ledger;
  for (const auto& engine : engines) {
    auto client = make_client(cfg, engine);
    Translator tr{engine, cache.get(), client.get(), std::nullopt};
    if (cfg.marker_fallback) tr.marker_sentinels = Sentinels{};
    const auto built = build_views(data, languages, tr, cfg.jobs);
    for (const auto& v : built.views) index.add(v);
    ledger.insert(ledger.end(), built.ledger.begin(), built.ledger.end());
  }
  if (!ledger.empty()) {
    log(std::to_string(ledger.size()) + " translated views unavailable; see view_failures.tsv");
    write_text(out_path(cfg, "view_failures.tsv"), failures_tsv(ledger));
  }
  return index;
}

Pipeline make_pipeline(const RunConfig& cfg, const std::vector<EngineId>& engines,
                       const std::vector<std::string>& extra_languages) {
  auto data = dataset_or_throw(cfg);
  std::vector<std::string> langs{data.front().source_lang};
  for (const auto& l : extra_languages) {
    if (std::find(langs.begin(), langs.end(), l) == langs.end()) langs.push_back(l);
  }
  auto views = collect_views(cfg, data, engines, langs);
  return Pipeline(std::move(data), std::move(views), load_stores(cfg), make_backend(cfg.encoder), cfg.jobs);
}

std::string score_failures_tsv(const std::vector<InstanceFailure>& failures) {
  std::string out = "id\tmessage\n";
  for (const auto& f : failures) out += f.instance_id + '\t' + f.message + '\n';
  return out;
}

std::string trace_jsonl(const std::vector<ScoreSheet>& sheets) {
  std::string out;
  for (const auto& s : sheets) {
    for (const auto& c : s.channels) {
      nlohmann::ordered_json j;
      j["id"] = c.instance_id;
      j["lang"] = c.lang;
      j["context"] = c.context_index;
      j["sim_we"] = c.sim_we ? nlohmann::ordered_json(*c.sim_we) : nlohmann::ordered_json(nullptr);
      j["sim_bert"] = c.sim_bert ? nlohmann::ordered_json(*c.sim_bert) : nlohmann::ordered_json(nullptr);
      j["align"] = {to_string(c.alignment_methods.first), to_string(c.alignment_methods.second)};
      if (!c.note.empty()) j["note"] = c.note;
      out += j.dump() + '\n';
    }
  }
  return out;
}

/// Prediction files, channel trace and failure list for one scored run.
void write_run_outputs(const RunConfig& cfg, const ScoreRun& run, const std::string& prefix) {
  if (run.sheets.empty()) throw DataError("no instance produced a score");
  write_predictions_file(predict_subtask1(run.sheets), out_path(cfg, prefix + "subtask1.tsv"));
  write_predictions_file(predict_subtask2(run.sheets), out_path(cfg, prefix + "subtask2.tsv"));
  write_text(out_path(cfg, prefix + "trace.jsonl"), trace_jsonl(run.sheets));
  if (!run.failures.empty()) {
    log(std::to_string(run.failures.size()) + " instances produced no score");
    write_text(out_path(cfg, prefix + "failures.tsv"), score_failures_tsv(run.failures));
  }
}

void finish(const RunConfig& cfg, Manifest m) { m.write(out_path(cfg, "manifest.txt")); }

std::string print_value(double v) {
  auto s = numeric::format_double(v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::vector<int> parse_subtasks(const std::vector<int>& in) {
  for (int s : in) {
    if (s != 1 && s != 2) throw UsageError("subtask must be 1 or 2");
  }
  return in;
}

std::vector<std::pair<double, double>> parse_grid(const std::string& spec) {
  if (spec.empty()) return default_grid();
  std::vector<std::pair<double, double>> grid;
  for (const auto& item : text::split(spec, ',')) {
    const auto parts = text::split(text::trim(item), ':');
    const auto a = parts.size() == 2 ? numeric::parse_double(parts[0]) : std::nullopt;
    const auto b = parts.size() == 2 ? numeric::parse_double(parts[1]) : std::nullopt;
    if (!a || !b) throw UsageError("grid point '" + item + "' must look like alpha:beta");
    grid.emplace_back(*a, *b);
  }
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilingual contextual word similarity: translation fan-out, channel scoring, evaluation"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--seed", g.seed, "Seed for the synthetic-hash encoder");
  app.add_flag("--strict", g.strict, "Abort on the first malformed dataset row (default)");
  app.add_flag("--lenient", g.lenient, "Skip malformed dataset rows");
  app.add_option("--jobs", g.jobs, "Parallel workers")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");

  Overrides ov;
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--alpha", ov.alpha, "Contextual channel weight");
    sub->add_option("--beta", ov.beta, "Embedding channel weight");
    sub->add_option("--languages", ov.languages, "Extra languages")->delimiter(',');
    sub->add_option("--engine", ov.engine, "Translation engine id");
  };

  auto* ingest = app.add_subcommand("ingest", "Import a dataset into the canonical format");
  std::string ingest_input, ingest_format, ingest_lang;
  ingest->add_option("--input", ingest_input, "Dataset file (defaults to the configured dataset)");
  ingest->add_option("--format", ingest_format, "task-tsv or canonical");
  ingest->add_option("--lang", ingest_lang, "Source language");

  auto* translate_cmd = app.add_subcommand("translate", "Fill the translation cache and write aligned views");
  add_overrides(translate_cmd);

  auto* embed = app.add_subcommand("embed", "Compile vector stores to the binary format");
  std::string embed_lang, embed_input, embed_output;
  embed->add_option("--lang", embed_lang, "Only this language");
  embed->add_option("--input", embed_input, "Text vectors (with --lang)");
  embed->add_option("--output", embed_output, "Binary output path (with --input)");

  auto* score = app.add_subcommand("score", "Score the dataset and write prediction files");
  add_overrides(score);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score predictions against gold");
  int eval_subtask = 0;
  std::string eval_pred, eval_gold, eval_pooling, eval_format = "value";
  evaluate_cmd->add_option("--subtask", eval_subtask, "1 or 2 (defaults to the prediction file's shape)");
  evaluate_cmd->add_option("--pred", eval_pred, "Prediction TSV")->required();
  evaluate_cmd->add_option("--gold", eval_gold, "Gold dataset (canonical .jsonl or task TSV)");
  evaluate_cmd->add_option("--pooling", eval_pooling, "Subtask 2 pooling: pooled or per-context");
  evaluate_cmd->add_option("--format", eval_format, "value, table or jsonl")
      ->check(CLI::IsMember({"value", "table", "jsonl"}));

  auto* sweep = app.add_subcommand("sweep", "Evaluate a grid of channel weights");
  std::string sweep_grid;
  std::vector<int> sweep_subtasks{1, 2};
  add_overrides(sweep);
  sweep->add_option("--grid", sweep_grid, "alpha:beta pairs, comma separated (default: 0.0..1.0 plus official pairs)");
  sweep->add_option("--subtasks", sweep_subtasks, "Subtasks to evaluate")->delimiter(',');

  auto* greedy = app.add_subcommand("greedy-langs", "Greedy forward selection of extra languages");
  std::vector<std::string> greedy_candidates;
  int greedy_subtask = 1;
  add_overrides(greedy);
  greedy->add_option("--candidates", greedy_candidates, "Candidate languages (default: the 11-language set)")
      ->delimiter(',');
  greedy->add_option("--subtask", greedy_subtask, "Subtask whose metric drives selection");

  auto* compare = app.add_subcommand("compare-engines", "Evaluate one configuration under several engines");
  std::vector<std::string> compare_engine_names;
  std::vector<int> compare_subtasks{1, 2};
  add_overrides(compare);
  compare->add_option("--engines", compare_engine_names, "Engine ids")->delimiter(',')->required();
  compare->add_option("--subtasks", compare_subtasks, "Subtasks to evaluate")->delimiter(',');

  auto* official = app.add_subcommand("official", "Run a named official configuration");
  std::string official_name;
  std::vector<int> official_subtasks{1, 2};
  official->add_option("row", official_name, "none, pt-el-tr-ru, es-it-pt-de, all-11 or all-11-bert")->required();
  official->add_option("--subtasks", official_subtasks, "Subtasks to evaluate")->delimiter(',');
  official->add_option("--engine", ov.engine, "Translation engine id");

  auto* compact = app.add_subcommand("compact-cache", "Rewrite the translation cache without duplicates");
  std::string compact_path;
  compact->add_option("--cache", compact_path, "Cache file (defaults to the configured cache)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorKind::usage);
  }

  try {
    auto cfg = resolve_config(g);
    const std::string cmd = app.get_subcommands().front()->get_name();

    if (*ingest) {
      if (!ingest_input.empty()) cfg.dataset = ingest_input;
      if (!ingest_format.empty()) cfg.dataset_format = parse_dataset_format(ingest_format);
      if (!ingest_lang.empty()) cfg.parse.lang = ingest_lang;
      const auto parsed = load_dataset(cfg);
      for (const auto& issue : parsed.skipped) log("skipped row " + std::to_string(issue.row) + ": " + issue.message);
      write_canonical(parsed.instances, out_path(cfg, "dataset.jsonl"));
      log("wrote " + std::to_string(parsed.instances.size()) + " instances");
      finish(cfg, base_manifest(cfg, cmd));
      return 0;
    }

    if (*translate_cmd) {
      apply(cfg, ov);
      const auto data = dataset_or_throw(cfg);
      if (cfg.cache.empty()) throw UsageError("translate needs a cache path in the config");
      TranslationCache cache(cfg.cache);
      auto client = make_client(cfg, cfg.experiment.engine);
      Translator tr{cfg.experiment.engine, &cache, client.get(), std::nullopt};
      if (cfg.marker_fallback) tr.marker_sentinels = Sentinels{};
      const auto built = build_views(data, cfg.experiment.effective_languages(data.front().source_lang), tr, cfg.jobs);
      write_views(built.views, out_path(cfg, "views.jsonl"));
      write_text(out_path(cfg, "view_failures.tsv"), failures_tsv(built.ledger));
      auto m = base_manifest(cfg, cmd);
      m.set("views", std::to_string(built.views.size()));
      m.set("failures", std::to_string(built.ledger.size()));
      finish(cfg, m);
      if (built.ledger.empty()) return 0;
      int rc = 0;
      for (const auto& f : built.ledger) {
        log(f.instance_id + " [" + f.lang + "]: " + f.message);
        rc = std::max(rc, exit_code(f.kind));
      }
      return rc;
    }

    if (*embed) {
      auto m = base_manifest(cfg, cmd);
      if (!embed_input.empty()) {
        if (embed_lang.empty() || embed_output.empty()) throw UsageError("--input needs --lang and --output");
        const auto load = load_text_vectors(embed_input, embed_lang, cfg.vector_limit, cfg.vector_casing);
        compile_binary(load.store, embed_output);
        log("compiled " + std::to_string(load.store.size()) + " vectors (" + std::to_string(load.malformed) +
            " malformed, " + std::to_string(load.duplicates) + " duplicates skipped)");
        return 0;
      }
      if (cfg.vectors.empty()) throw UsageError("no vector stores configured");
      for (const auto& [lang, path] : cfg.vectors) {
        if (!embed_lang.empty() && lang != embed_lang) continue;
        const auto store = open_vectors(path, lang, cfg.vector_limit, cfg.vector_casing);
        fs::create_directories(fs::path(cfg.out) / "vectors");
        const auto dst = (fs::path(cfg.out) / "vectors" / (lang + ".bin")).string();
        compile_binary(store, dst);
        m.set("output.vectors." + lang, file_digest(dst));
        log(lang + ": " + std::to_string(store.size()) + " vectors -> " + dst);
      }
      finish(cfg, m);
      return 0;
    }

    if (*score) {
      apply(cfg, ov);
      const auto pipeline = make_pipeline(cfg, {cfg.experiment.engine}, cfg.experiment.languages);
      const auto run = pipeline.score(cfg.experiment);
      write_run_outputs(cfg, run, "predictions_");
      auto m = base_manifest(cfg, cmd);
      m.set("scored", std::to_string(run.sheets.size()));
      m.set("failed", std::to_string(run.failures.size()));
      m.set("output.subtask1", file_digest(out_path(cfg, "predictions_subtask1.tsv")));
      m.set("output.subtask2", file_digest(out_path(cfg, "predictions_subtask2.tsv")));
      finish(cfg, m);
      return 0;
    }

    if (*evaluate_cmd) {
      const auto preds = read_predictions(eval_pred);
      if (eval_subtask != 0 && eval_subtask != preds.subtask)
        throw UsageError("--subtask " + std::to_string(eval_subtask) + " does not match the prediction file");
      const auto gold = load_gold(cfg, eval_gold);
      const auto pooling = eval_pooling.empty() ? cfg.pooling : parse_pooling(eval_pooling);
      const auto report = evaluate(preds, gold, pooling);
      if (eval_format == "value") std::cout << print_value(report.value) << '\n';
      if (eval_format == "table") std::cout << report.table();
      if (eval_format == "jsonl") std::cout << report.jsonl() << '\n';
      for (const auto& f : report.flags) log("flag: " + f);
      if (!g.out.empty()) {
        write_text(out_path(cfg, "eval_subtask" + std::to_string(report.subtask) + ".jsonl"), report.jsonl() + '\n');
        auto m = base_manifest(cfg, cmd);
        m.set("input.predictions", file_digest(eval_pred));
        m.set("input.gold", file_digest(eval_gold.empty() ? (cfg.gold.empty() ? cfg.dataset : cfg.gold) : eval_gold));
        finish(cfg, m);
      }
      return 0;
    }

    if (*sweep) {
      apply(cfg, ov);
      const auto grid = parse_grid(sweep_grid);
      const auto pipeline = make_pipeline(cfg, {cfg.experiment.engine}, cfg.experiment.languages);
      const auto rows = sweep_alpha_beta(pipeline, cfg.experiment, grid, parse_subtasks(sweep_subtasks), cfg.pooling);
      write_text(out_path(cfg, "sweep.csv"), results_csv(rows));
      std::ostringstream series;
      write_sweep_series(rows, series);
      write_text(out_path(cfg, "sweep_series.csv"), series.str());
      std::cout << results_csv(rows);
      finish(cfg, base_manifest(cfg, cmd));
      return 0;
    }

    if (*greedy) {
      apply(cfg, ov);
      if (greedy_candidates.empty()) greedy_candidates = all_languages();
      auto base = cfg.experiment;
      base.languages.clear();
      const auto pipeline = make_pipeline(cfg, {base.engine}, greedy_candidates);
      const auto source = pipeline.dataset().front().source_lang;
      std::vector<std::string> candidates;
      for (const auto& c : greedy_candidates) {
        if (c != source) candidates.push_back(c);
      }
      if (greedy_subtask != 1 && greedy_subtask != 2) throw UsageError("subtask must be 1 or 2");
      const auto trace = greedy_language_addition(pipeline, base, candidates, greedy_subtask, cfg.pooling);
      std::ostringstream csv, series;
      write_greedy_csv(trace, csv);
      write_greedy_series(trace, series);
      write_text(out_path(cfg, "greedy_trace.csv"), csv.str());
      write_text(out_path(cfg, "greedy_series.csv"), series.str());
      std::cout << csv.str();
      auto m = base_manifest(cfg, cmd);
      m.set("selected", trace.selected.empty() ? "none" : text::join(trace.selected, "+"));
      finish(cfg, m);
      return 0;
    }

    if (*compare) {
      apply(cfg, ov);
      std::vector<EngineId> engines;
      for (const auto& e : compare_engine_names) engines.emplace_back(e);
      const auto pipeline = make_pipeline(cfg, engines, cfg.experiment.languages);
      const auto rows = compare_engines(pipeline, cfg.experiment, engines, parse_subtasks(compare_subtasks), cfg.pooling);
      write_text(out_path(cfg, "engines.csv"), results_csv(rows));
      std::ostringstream series;
      write_engine_series(rows, series);
      write_text(out_path(cfg, "engines_series.csv"), series.str());
      std::cout << results_csv(rows);
      finish(cfg, base_manifest(cfg, cmd));
      return 0;
    }

    if (*official) {
      if (!ov.engine.empty()) cfg.experiment.engine = EngineId(ov.engine);
      const auto& row = official_row(official_name);
      const auto pipeline = make_pipeline(cfg, {cfg.experiment.engine}, row.languages);
      const auto subtasks = parse_subtasks(official_subtasks);
      auto m = base_manifest(cfg, cmd);
      m.set("row", row.name);
      std::optional<OfficialRun> last;
      for (int st : subtasks) {
        auto res = run_official(pipeline, row, cfg.experiment, st, cfg.pooling);
        const auto name = "official_" + row.name + "_subtask" + std::to_string(st) + ".jsonl";
        write_text(out_path(cfg, name), res.report.jsonl() + '\n');
        std::cout << res.report.table();
        m.set("value.subtask" + std::to_string(st), numeric::format_double(res.report.value));
        last = std::move(res);
      }
      if (last) {
        write_run_outputs(cfg, last->run, "official_" + row.name + "_");
        m.set("experiment_fingerprint", last->config.fingerprint());
      }
      finish(cfg, m);
      return 0;
    }

    if (*compact) {
      const auto path = compact_path.empty() ? cfg.cache : compact_path;
      if (path.empty()) throw UsageError("no cache path given");
      const auto n = TranslationCache::compact(path);
      log("compacted cache to " + std::to_string(n) + " records");
      return 0;
    }
  } catch (const Error& e) {
    log(e.what());
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    log(e.what());
    return exit_code(ErrorKind::data);
  } catch (const std::exception& e) {
    log(std::string("unexpected failure: ") + e.what());
    return exit_code(ErrorKind::data);
  }
  return 0;
}
