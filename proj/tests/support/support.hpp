#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "xlsim/xlsim.hpp"

namespace xlsim::testing {

inline std::filesystem::path fixtures() { return XLSIM_FIXTURES_DIR; }
inline std::string fixture(const std::string& name) { return (fixtures() / name).string(); }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto p = std::filesystem::temp_directory_path() / ("xlsim-" + tag + "-" + std::to_string(rng()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << body;
}

inline std::vector<Instance> fixture_instances() {
  return parse_dataset(fixture("en_5.tsv"), DatasetFormat::task_tsv).instances;
}

/// The 5-instance pipeline over the committed fixtures.
inline Pipeline fixture_pipeline(std::vector<Instance> data, std::vector<std::string> langs = {"it", "pt"}) {
  auto cfg = load_config(fixture("config.json"));
  TranslationCache cache(cfg.cache);
  FixtureClient client;
  Translator tr{EngineId("fixture"), &cache, &client, Sentinels{}};
  langs.insert(langs.begin(), "en");
  auto views = build_views(data, langs, tr).views;
  return Pipeline(std::move(data), ViewIndex(views), load_stores(cfg), make_backend(cfg.encoder));
}

// Naive textbook references, written independently of metrics.hpp.

inline double ref_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  long double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const long double mx = sx / n, my = sy / n;
  long double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    dx += (x[i] - mx) * (x[i] - mx);
    dy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(num / std::sqrt(dx * dy));
}

/// Rank of each element = 1 + (#smaller) + (#equal - 1) / 2; quadratic on purpose.
inline std::vector<double> ref_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      less += v < x[i];
      equal += v == x[i];
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

inline double ref_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return ref_pearson(ref_ranks(x), ref_ranks(y));
}

inline double ref_uncentered(const std::vector<double>& x, const std::vector<double>& y) {
  long double xy = 0, xx = 0, yy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += static_cast<long double>(x[i]) * y[i];
    xx += static_cast<long double>(x[i]) * x[i];
    yy += static_cast<long double>(y[i]) * y[i];
  }
  return static_cast<double>(xy / std::sqrt(xx * yy));
}

/// Random paired series of length n; roughly a third of the values are
/// drawn from a small pool so that ties occur.
inline PairedSeries random_series(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> pool(0, 4);
  std::bernoulli_distribution tie(0.33);
  PairedSeries s;
  for (std::size_t i = 0; i < n; ++i) {
    const double gold = tie(rng) ? pool(rng) * 0.5 : g(rng);
    const double pred = tie(rng) ? pool(rng) * 0.5 : 0.6 * gold + 0.8 * g(rng);
    s.gold.push_back(gold);
    s.predicted.push_back(pred);
  }
  // Guarantee nonzero variance in both.
  s.gold[0] = -3.0;
  s.gold[1] = 3.0;
  s.predicted[0] = -2.5;
  s.predicted[1] = 2.5;
  return s;
}

/// A dataset whose per-language embedding cosines are chosen directly. Each
/// context holds two marked tokens with their own keys in every language's
/// store, so sim_we for (instance, lang, context) is whatever was drawn.
/// Languages listed in `sparse` lose roughly a quarter of their entries (OOV).
/// In `gold_lang`, the cosine is a fixed increasing function of the gold score.
struct SyntheticWorld {
  std::vector<Instance> data;
  std::vector<std::string> langs;  // source first
  // cos[lang][i][m-1]; absent = OOV in that language
  std::map<std::string, std::vector<std::array<std::optional<double>, 2>>> cos;
  std::vector<TranslatedView> views;
  StoreSet stores;

  Pipeline pipeline(std::size_t jobs = 1) const {
    return Pipeline(data, ViewIndex(views), stores, std::make_shared<SyntheticHashBackend>(8, 1), jobs);
  }
};

inline SyntheticWorld make_world(std::mt19937_64& rng, std::size_t n, const std::vector<std::string>& langs,
                                 const std::vector<std::string>& sparse = {}, const std::string& gold_lang = {}) {
  SyntheticWorld w;
  w.langs = langs;
  std::uniform_real_distribution<double> u(-1.0, 1.0), gold(0.0, 4.0);
  std::bernoulli_distribution drop(0.25);
  std::map<std::string, VectorStore> stores;
  for (const auto& l : langs) stores.emplace(l, VectorStore(l, 2));
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst;
    inst.id = "s" + std::string(i < 10 ? "00" : i < 100 ? "0" : "") + std::to_string(i);
    inst.source_lang = langs.front();
    inst.word1 = "alpha";
    inst.word2 = "beta";
    for (int m = 1; m <= 2; ++m) {
      const auto a = "a" + std::to_string(i) + "x" + std::to_string(m);
      const auto b = "b" + std::to_string(i) + "x" + std::to_string(m);
      const auto t = a + " near " + b;
      const auto la = a.size();
      (m == 1 ? inst.context1 : inst.context2) = make_context(t, {0, la}, {la + 6, la + 6 + b.size()});
    }
    inst.gold = GoldScores{gold(rng), gold(rng)};
    for (const auto& l : langs) {
      std::array<std::optional<double>, 2> row;
      for (int m = 1; m <= 2; ++m) {
        const bool oov = l != langs.front() && std::find(sparse.begin(), sparse.end(), l) != sparse.end() && drop(rng);
        double c = u(rng);
        if (l == gold_lang) c = (m == 1 ? inst.gold->sim1_mean : inst.gold->sim2_mean) / 2.0 - 1.0;
        if (oov) continue;
        const std::vector<float> va{1.0f, 0.0f};
        const std::vector<float> vb{static_cast<float>(c), static_cast<float>(std::sqrt(1.0 - c * c))};
        const auto& ctx = inst.context(m);
        stores.at(l).add(ctx.surface1, va);
        stores.at(l).add(ctx.surface2, vb);
        const double dot = static_cast<double>(vb[0]);
        const double nb = std::sqrt(static_cast<double>(vb[0]) * vb[0] + static_cast<double>(vb[1]) * vb[1]);
        row[m - 1] = dot / nb;
      }
      w.cos[l].push_back(row);
      if (l != inst.source_lang) {
        w.views.push_back({inst.id, l, EngineId("fixture"), identity_alignment(inst.context1),
                           identity_alignment(inst.context2)});
      }
    }
    w.data.push_back(std::move(inst));
  }
  for (auto& [l, s] : stores) w.stores[l] = std::make_shared<const VectorStore>(std::move(s));
  return w;
}

/// Embedding-only (alpha = 0, beta = 1) similarity of instance i, context m,
/// recomputed from the drawn cosines.
inline std::optional<double> world_sim(const SyntheticWorld& w, std::size_t i, int m,
                                       const std::vector<std::string>& langs) {
  long double acc = 0;
  int k = 0;
  for (const auto& l : langs) {
    if (const auto& v = w.cos.at(l)[i][m - 1]) {
      acc += *v;
      ++k;
    }
  }
  if (k == 0) return std::nullopt;
  return static_cast<double>(acc / k);
}

}  // namespace xlsim::testing
