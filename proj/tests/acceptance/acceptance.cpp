// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>

#include "support.hpp"

using namespace xlsim;
using namespace xlsim::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// 1
Outcome metrics_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240101);
  std::uniform_int_distribution<std::size_t> len(2, 200);
  double worst = 0;
  for (int t = 0; t < 500; ++t) {
    const auto s = random_series(rng, len(rng));
    worst = std::max({worst, std::abs(pearson(s) - ref_pearson(s.predicted, s.gold)),
                      std::abs(spearman(s) - ref_spearman(s.predicted, s.gold)),
                      std::abs(uncentered_pearson(s) - ref_uncentered(s.predicted, s.gold))});
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 5.0, "500 series, max |diff| " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// 2
Outcome metric_invariances() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> scale(0.1, 10.0), shift(-5.0, 5.0);
  std::size_t n_fail = 0;
  for (int t = 0; t < 100; ++t) {
    const auto s = random_series(rng, 5 + t);
    const double p = pearson(s), sp = spearman(s), u = uncentered_pearson(s);
    const double a = scale(rng), b = shift(rng);
    auto affine = s, mono = s, scaled = s, shifted = s;
    for (auto& x : affine.predicted) x = a * x + b;
    for (auto& x : mono.predicted) x = x * x * x + 2 * x;
    for (auto& x : scaled.predicted) x *= a;
    for (auto& x : shifted.predicted) x += 1.0 + std::abs(b);
    if (std::abs(pearson(affine) - p) > 1e-10) ++n_fail;
    if (std::abs(spearman(mono) - sp) > 1e-10) ++n_fail;
    if (std::abs(uncentered_pearson(scaled) - u) > 1e-10) ++n_fail;
    if (!(std::abs(uncentered_pearson(shifted) - u) > 1e-10)) ++n_fail;
  }
  return {n_fail == 0, "100 series x 4 properties, " + std::to_string(n_fail) + " violations"};
}

// 3
Outcome weighted_average_equivalence() {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> u(-1, 1), w(0, 1);
  std::uniform_int_distribution<int> nl(1, 11);
  const auto& langs = all_languages();
  double worst = 0, worst_dup = 0;
  std::size_t perm_mismatch = 0;
  for (int t = 0; t < 1000; ++t) {
    double alpha = w(rng), beta = w(rng);
    if (alpha + beta == 0) alpha = 0.5;
    std::vector<ChannelScores> cs;
    const int k = nl(rng);
    for (int i = 0; i < k; ++i) {
      ChannelScores c;
      c.instance_id = "t";
      c.lang = langs[static_cast<std::size_t>(i)];
      c.sim_bert = u(rng);
      c.sim_we = u(rng);
      cs.push_back(c);
    }
    long double brute = 0;
    for (const auto& c : cs) brute += static_cast<long double>(alpha) * *c.sim_bert + static_cast<long double>(beta) * *c.sim_we;
    brute /= k;
    const double got = combine(cs, alpha, beta).value;
    worst = std::max(worst, std::abs(got - static_cast<double>(brute)));

    auto doubled = cs;
    doubled.insert(doubled.end(), cs.begin(), cs.end());
    worst_dup = std::max(worst_dup, std::abs(combine(doubled, alpha, beta).value - got));

    auto shuffled = cs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    if (combine(shuffled, alpha, beta).value != got) ++perm_mismatch;
  }
  return {worst <= 1e-12 && worst_dup <= 1e-12 && perm_mismatch == 0,
          "1000 inputs, max |diff| " + fmt(worst) + ", duplication " + fmt(worst_dup) + ", permutation mismatches " +
              std::to_string(perm_mismatch)};
}

// 4
Outcome degenerate_configs() {
  const auto data = fixture_instances();
  const auto p = fixture_pipeline(data);
  FixtureFileBackend enc(fixture("encoder.jsonl"));
  const auto en = load_text_vectors(fixture("vectors/en.txt"), "en").store;

  ExperimentConfig bert_only;
  bert_only.alpha = 1;
  bert_only.beta = 0;
  ExperimentConfig we_only;
  we_only.alpha = 0;
  we_only.beta = 1;
  const auto rb = p.score(bert_only), rw = p.score(we_only);
  if (rb.sheets.size() != 5 || rw.sheets.size() != 5) return {false, "not every fixture instance was scored"};
  double worst = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    for (int m = 1; m <= 2; ++m) {
      const auto& c = data[i].context(m);
      const double b = *bert_similarity(enc.encode("en", c.text), c.span1, c.span2);
      const double v = *we_similarity(en, c.surface1, c.surface2);
      worst = std::max(worst, std::abs((m == 1 ? rb.sheets[i].sim1 : rb.sheets[i].sim2) - b));
      worst = std::max(worst, std::abs((m == 1 ? rw.sheets[i].sim1 : rw.sheets[i].sim2) - v));
    }
  }
  return {worst <= 1e-12, "source-only bert and embedding channels, max |diff| " + fmt(worst)};
}

// 5
Outcome delta_antisymmetry() {
  auto data = fixture_instances();
  auto swapped = data;
  for (auto& inst : swapped) {
    std::swap(inst.context1, inst.context2);
    std::swap(inst.gold->sim1_mean, inst.gold->sim2_mean);
  }
  ExperimentConfig cfg;
  cfg.languages = {"it", "pt"};
  const auto a = predict_subtask1(fixture_pipeline(data).score(cfg).sheets);
  const auto b = predict_subtask1(fixture_pipeline(swapped).score(cfg).sheets);
  std::size_t bad = 0;
  for (const auto& [id, d] : a) bad += b.at(id) != -d;
  return {bad == 0 && a.size() == 5, std::to_string(a.size()) + " instances, " + std::to_string(bad) + " not negated"};
}

int run_cli(const std::string& args) {
  const auto cmd = std::string(XLSIM_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 6
Outcome end_to_end_determinism() {
  std::vector<std::filesystem::path> dirs;
  for (int k = 0; k < 3; ++k) {
    dirs.push_back(scratch_dir("accept-score"));
    const int code = run_cli("--config " + fixture("config.json") + " --jobs " + std::to_string(k + 1) + " --out " +
                             dirs.back().string() + " score");
    if (code != 0) return {false, "score exited with " + std::to_string(code)};
  }
  const std::vector<std::string> files{"predictions_subtask1.tsv", "predictions_subtask2.tsv"};
  for (const auto& f : files) {
    const auto first = slurp(dirs[0] / f);
    if (first.empty()) return {false, f + " is empty"};
    for (int k = 1; k < 3; ++k) {
      if (slurp(dirs[k] / f) != first) return {false, f + " differs between runs"};
    }
  }
  double worst = 0;
  const auto mine1 = read_predictions((dirs[0] / files[0]).string());
  const auto gold1 = read_predictions(fixture("golden/predictions_subtask1.tsv"));
  const auto mine2 = read_predictions((dirs[0] / files[1]).string());
  const auto gold2 = read_predictions(fixture("golden/predictions_subtask2.tsv"));
  if (mine1.change.size() != gold1.change.size() || mine2.sims.size() != gold2.sims.size())
    return {false, "instance sets differ from the golden files"};
  for (const auto& [id, v] : gold1.change) worst = std::max(worst, std::abs(mine1.change.at(id) - v));
  for (const auto& [id, v] : gold2.sims) {
    worst = std::max(worst, std::abs(mine2.sims.at(id).first - v.first));
    worst = std::max(worst, std::abs(mine2.sims.at(id).second - v.second));
  }
  return {worst <= 1e-12, "3 runs byte-identical; golden max |diff| " + fmt(worst)};
}

// 7
Outcome alignment_corpus() {
  std::ifstream in(fixture("alignment_corpus.jsonl"));
  std::string line;
  int cases = 0, recovered = 0, violations = 0;
  std::vector<std::string> missed;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    ++cases;
    std::istringstream tsv("word1\tword2\tcontext1\tcontext2\n" + j["word1"].get<std::string>() + "\t" +
                           j["word2"].get<std::string>() + "\t" + j["source"].get<std::string>() + "\t" +
                           j["source"].get<std::string>() + "\n");
    const auto src = parse_dataset(tsv, DatasetFormat::task_tsv).instances.at(0).context1;
    const auto marked = j["marked"];
    const Sentinels sentinels;
    MarkerStrategy marker(sentinels, [&](const std::string& m) -> std::optional<std::string> {
      // Which word carries the sentinels: compare the open position with the span starts.
      const auto pos = text::to_u32(m).find(text::to_u32(sentinels.open));
      const std::string k = pos == src.span1.start ? "1" : "2";
      if (!marked.contains(k)) return std::nullopt;
      return marked[k].get<std::string>();
    });
    const auto translated = j["translated"].get<std::string>();
    const auto words = j["words"];
    const auto got = align_pair(src, translated, {words[0].get<std::string>(), words[1].get<std::string>()}, &marker);
    if (!alignment_sound(got)) ++violations;

    const auto u = text::to_u32(translated);
    bool ok = true;
    for (int k = 1; k <= 2; ++k) {
      const auto& e = j["expect"][k - 1];
      if (e.is_null()) {
        ok = ok && !got.span(k);
        continue;
      }
      const auto needle = text::to_u32(e[0].get<std::string>());
      std::size_t p = std::u32string::npos, from = 0;
      for (int n = 0; n < e[1].get<int>(); ++n) {
        p = u.find(needle, from);
        if (p == std::u32string::npos) break;
        from = p + 1;
      }
      ok = ok && p != std::u32string::npos && got.span(k) == CharSpan{p, p + needle.size()};
    }
    if (ok) {
      ++recovered;
    } else {
      missed.push_back(j["name"].get<std::string>());
    }
  }
  return {cases == 30 && recovered >= 28 && violations == 0,
          std::to_string(recovered) + "/" + std::to_string(cases) + " recovered, " + std::to_string(violations) +
              " violations" + (missed.empty() ? "" : "; missed: " + text::join(missed, ", "))};
}

/// Greedy forward selection recomputed from the drawn cosines with the
/// reference correlation functions.
std::vector<std::string> oracle_greedy(const SyntheticWorld& w, const std::vector<std::string>& candidates) {
  auto score = [&](const std::vector<std::string>& extras) {
    std::vector<std::string> langs{w.langs.front()};
    langs.insert(langs.end(), extras.begin(), extras.end());
    std::vector<double> pred, gold;
    for (int m = 1; m <= 2; ++m) {
      for (std::size_t i = 0; i < w.data.size(); ++i) {
        pred.push_back(*world_sim(w, i, m, langs));
        gold.push_back(m == 1 ? w.data[i].gold->sim1_mean : w.data[i].gold->sim2_mean);
      }
    }
    const double p = ref_pearson(pred, gold), s = ref_spearman(pred, gold);
    return 2 * p * s / (p + s);
  };
  std::vector<std::string> selected, remaining = candidates;
  double current = score({});
  while (!remaining.empty()) {
    std::size_t best = 0;
    double best_v = -2;
    for (std::size_t k = 0; k < remaining.size(); ++k) {
      auto e = selected;
      e.push_back(remaining[k]);
      const double v = score(e);
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    if (!(best_v > current + 1e-12)) break;
    selected.push_back(remaining[best]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    current = best_v;
  }
  return selected;
}

// 8
Outcome greedy_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(4242);
  const std::vector<std::string> candidates{"es", "it", "pt", "de", "el"};
  const auto w = make_world(rng, 60, {"en", "es", "it", "pt", "de", "el"}, {"de"}, "pt");
  ExperimentConfig base;
  base.alpha = 0;
  base.beta = 1;
  const auto trace = greedy_language_addition(w.pipeline(), base, candidates, 2);
  const auto path = trace.kept_path();
  bool monotone = true;
  for (std::size_t i = 1; i < path.size(); ++i) monotone = monotone && path[i] >= path[i - 1];
  const bool first_is_gold = !trace.selected.empty() && trace.selected.front() == "pt";
  const auto oracle = oracle_greedy(w, candidates);
  const double secs = seconds_since(t0);
  return {first_is_gold && monotone && oracle == trace.selected && secs < 10.0,
          "selected [" + text::join(trace.selected, ",") + "], oracle [" + text::join(oracle, ",") + "], " +
              std::to_string(path.size()) + " kept steps, " + fmt(secs) + " s"};
}

// 9
Outcome perfect_prediction() {
  const auto data = fixture_instances();
  std::map<std::string, double> change;
  std::map<std::string, std::pair<double, double>> sims;
  for (const auto& i : data) {
    change[i.id] = i.gold->sim2_mean - i.gold->sim1_mean;
    sims[i.id] = {i.gold->sim1_mean, i.gold->sim2_mean};
  }
  const auto dir = scratch_dir("accept-perfect");
  write_predictions_file(change, (dir / "p1.tsv").string());
  write_predictions_file(sims, (dir / "p2.tsv").string());
  const double v1 = evaluate(read_predictions((dir / "p1.tsv").string()), data).value;
  const double v2 = evaluate(read_predictions((dir / "p2.tsv").string()), data).value;
  return {std::abs(v1 - 1.0) <= 1e-12 && std::abs(v2 - 1.0) <= 1e-12,
          "subtask 1 = " + numeric::format_double(v1) + ", subtask 2 = " + numeric::format_double(v2)};
}

// 10
Outcome embedding_round_trip() {
  std::mt19937_64 rng(1000);
  std::normal_distribution<double> g;
  const std::size_t dim = 50;
  std::map<std::string, std::vector<double>> truth;
  std::string body = "1000 50\n";
  for (int i = 0; i < 1000; ++i) {
    const std::string word = (i % 3 == 0 ? "ž" : i % 3 == 1 ? "wörd" : "w") + std::to_string(i);
    auto& v = truth[word];
    body += word;
    for (std::size_t k = 0; k < dim; ++k) {
      v.push_back(g(rng));
      char buf[32];
      std::snprintf(buf, sizeof buf, " %.7g", v.back());
      body += buf;
    }
    body += '\n';
  }
  const auto dir = scratch_dir("accept-vec");
  spit(dir / "v.txt", body);
  const auto text_store = load_text_vectors((dir / "v.txt").string(), "xx").store;
  compile_binary(text_store, (dir / "v.bin").string());
  const auto bin = open_binary((dir / "v.bin").string());
  if (bin.size() != 1000) return {false, "binary store holds " + std::to_string(bin.size()) + " words"};
  double worst = 0;
  for (const auto& [word, v] : truth) {
    const auto got = bin.find(word);
    if (!got) return {false, "lost word " + word};
    for (std::size_t k = 0; k < dim; ++k) worst = std::max(worst, std::abs(static_cast<double>((*got)[k]) - v[k]));
  }
  return {worst <= 1e-6, "1000 words x 50 dims, max |diff| " + fmt(worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metrics-oracle-equivalence", metrics_oracle},
      {"metric-invariances", metric_invariances},
      {"weighted-average-equivalence", weighted_average_equivalence},
      {"degenerate-configs", degenerate_configs},
      {"delta-antisymmetry", delta_antisymmetry},
      {"end-to-end-determinism", end_to_end_determinism},
      {"alignment-corpus", alignment_corpus},
      {"greedy-procedure-oracle", greedy_oracle},
      {"perfect-prediction-sanity", perfect_prediction},
      {"embedding-round-trip", embedding_round_trip},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << "  " << o.detail << '\n';
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
