#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace xlsim;
using namespace xlsim::testing;

namespace {

ChannelScores ch(const std::string& lang, std::optional<double> bert, std::optional<double> we) {
  ChannelScores c;
  c.instance_id = "x";
  c.lang = lang;
  c.sim_bert = bert;
  c.sim_we = we;
  return c;
}

std::vector<double> column(const std::string& path, std::size_t col) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) out.push_back(std::stod(text::split(line, '\t').at(col)));
  return out;
}

}  // namespace

TEST_CASE("combine: weighted average of one language") {
  const auto c = combine({ch("en", 0.8, 0.6)}, 0.7, 0.3);
  CHECK(c.value == Catch::Approx(0.74).margin(1e-15));
  CHECK(c.languages == std::vector<std::string>{"en"});
}

TEST_CASE("combine: a missing channel renormalizes to the remaining one") {
  CHECK(combine({ch("en", 0.4, std::nullopt)}, 0.7, 0.3).value == 0.4);
  CHECK(combine({ch("en", std::nullopt, 0.9)}, 0.7, 0.3).value == 0.9);
}

TEST_CASE("combine: mean over contributing languages") {
  const auto c = combine({ch("en", 0.8, 0.6), ch("it", std::nullopt, std::nullopt), ch("pt", 0.66, std::nullopt)},
                         0.5, 0.5);
  CHECK(c.value == Catch::Approx((0.7 + 0.66) / 2).margin(1e-15));
  CHECK(c.languages == std::vector<std::string>{"en", "pt"});
}

TEST_CASE("combine: a zero weight excludes a language left with only that channel") {
  CHECK_THROWS_AS(combine({ch("en", 0.8, std::nullopt)}, 0.0, 1.0), NoSignalError);
  CHECK_THROWS_AS(combine({ch("en", std::nullopt, 0.8)}, 1.0, 0.0), NoSignalError);
  CHECK(combine({ch("en", 0.8, 0.2)}, 1.0, 0.0).value == 0.8);
  try {
    combine({ch("en", std::nullopt, std::nullopt), ch("it", 0.2, std::nullopt)}, 0.0, 1.0);
    FAIL("expected no signal");
  } catch (const NoSignalError& e) {
    REQUIRE(e.reasons().size() == 2);
    CHECK_THAT(e.reasons()[1], Catch::Matchers::ContainsSubstring("alpha = 0"));
    CHECK(e.kind() == ErrorKind::data);
  }
}

TEST_CASE("combine: result ignores input order and grows with alpha when bert leads") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<ChannelScores> cs;
    for (int k = 0; k < 6; ++k) cs.push_back(ch("l" + std::to_string(k), u(rng), u(rng)));
    auto shuffled = cs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(combine(cs, 0.3, 0.7).value == combine(shuffled, 0.3, 0.7).value);
  }
  const std::vector<ChannelScores> lead{ch("en", 0.9, 0.1), ch("it", 0.5, 0.2)};
  double prev = -2;
  for (int i = 0; i <= 10; ++i) {
    const double v = combine(lead, i / 10.0, 1 - i / 10.0).value;
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("config: validation and fingerprints") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha = -0.1;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.alpha = 0;
  c.beta = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.alpha = std::nan("");
  CHECK_THROWS_AS(c.validate(), UsageError);

  ExperimentConfig a, b;
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint().size() == 16);
  b.languages = {"it"};
  CHECK(a.fingerprint() != b.fingerprint());
  CHECK(b.effective_languages("en") == std::vector<std::string>{"en", "it"});
  b.languages = {"en", "it", "it"};
  CHECK(b.effective_languages("en") == std::vector<std::string>{"en", "it"});
}

TEST_CASE("pipeline: fixture predictions match the independent hand trace") {
  const auto p = fixture_pipeline(fixture_instances());
  ExperimentConfig cfg;
  cfg.languages = {"it", "pt"};
  const auto run = p.score(cfg);
  REQUIRE(run.failures.empty());
  REQUIRE(run.sheets.size() == 5);
  const auto golden1 = column(fixture("golden/predictions_subtask1.tsv"), 1);
  const auto g1 = column(fixture("golden/predictions_subtask2.tsv"), 1);
  const auto g2 = column(fixture("golden/predictions_subtask2.tsv"), 2);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(run.sheets[i].delta == Catch::Approx(golden1[i]).margin(1e-12));
    CHECK(run.sheets[i].sim1 == Catch::Approx(g1[i]).margin(1e-12));
    CHECK(run.sheets[i].sim2 == Catch::Approx(g2[i]).margin(1e-12));
    CHECK(run.sheets[i].delta == run.sheets[i].sim2 - run.sheets[i].sim1);
    CHECK(run.sheets[i].config_fingerprint == cfg.fingerprint());
  }
}

TEST_CASE("pipeline: the trace records alignment methods and missing channels") {
  const auto p = fixture_pipeline(fixture_instances());
  ExperimentConfig cfg;
  cfg.languages = {"it", "pt"};
  const auto run = p.score(cfg);
  const auto& s3 = run.sheets[2];
  bool saw_oov = false;
  for (const auto& c : s3.channels) {
    if (c.lang == "it" && c.context_index == 2) {
      CHECK(c.alignment_methods.first == AlignMethod::marker);
      CHECK_FALSE(c.sim_we);
      CHECK(c.sim_bert);
      saw_oov = c.note.find("OOV") != std::string::npos;
    }
  }
  CHECK(saw_oov);
}

TEST_CASE("pipeline: a language with no views leaves the source alone contributing") {
  const auto p = fixture_pipeline(fixture_instances(), {});
  ExperimentConfig with, without;
  with.languages = {"de"};
  const auto a = p.score(with), b = p.score(without);
  REQUIRE(a.sheets.size() == b.sheets.size());
  for (std::size_t i = 0; i < a.sheets.size(); ++i) {
    CHECK(a.sheets[i].sim1 == b.sheets[i].sim1);
    CHECK(a.sheets[i].contributing_languages[0] == std::vector<std::string>{"en"});
  }
}

TEST_CASE("pipeline: no-signal instances become failures, not sheets") {
  std::mt19937_64 rng(1);
  auto w = make_world(rng, 6, {"en"});
  // Empty stores: alpha = 0 leaves nothing.
  w.stores.clear();
  ExperimentConfig cfg;
  cfg.alpha = 0;
  cfg.beta = 1;
  const auto run = w.pipeline().score(cfg);
  CHECK(run.sheets.empty());
  CHECK(run.failures.size() == 6);
  CHECK_THROWS_AS(predict_subtask1(run.sheets), DataError);
}

TEST_CASE("pipeline: parallel scoring equals sequential scoring") {
  std::mt19937_64 rng(2);
  const auto w = make_world(rng, 40, {"en", "it", "pt"}, {"pt"});
  ExperimentConfig cfg;
  cfg.languages = {"it", "pt"};
  const auto a = w.pipeline(1).score(cfg), b = w.pipeline(4).score(cfg);
  REQUIRE(a.sheets.size() == b.sheets.size());
  for (std::size_t i = 0; i < a.sheets.size(); ++i) {
    CHECK(a.sheets[i].sim1 == b.sheets[i].sim1);
    CHECK(a.sheets[i].sim2 == b.sheets[i].sim2);
  }
}

TEST_CASE("pipeline: the embedding-only world reproduces the drawn cosines") {
  std::mt19937_64 rng(4);
  const auto w = make_world(rng, 25, {"en", "es", "el"}, {"el"});
  ExperimentConfig cfg;
  cfg.alpha = 0;
  cfg.beta = 1;
  cfg.languages = {"es", "el"};
  const auto run = w.pipeline().score(cfg);
  REQUIRE(run.sheets.size() == 25);
  for (std::size_t i = 0; i < 25; ++i) {
    CHECK(run.sheets[i].sim1 == Catch::Approx(*world_sim(w, i, 1, w.langs)).margin(1e-12));
    CHECK(run.sheets[i].sim2 == Catch::Approx(*world_sim(w, i, 2, w.langs)).margin(1e-12));
  }
}

TEST_CASE("predictions: write, read, and reject malformed files") {
  std::map<std::string, double> change{{"a", 0.1}, {"b", -0.25}};
  std::ostringstream out;
  write_predictions(change, out);
  CHECK(out.str() == "id\tchange\na\t0.1\nb\t-0.25\n");
  std::istringstream in(out.str());
  const auto p = read_predictions(in);
  CHECK(p.subtask == 1);
  CHECK(p.change == change);

  std::map<std::string, std::pair<double, double>> sims{{"a", {0.5, 1.0 / 3}}};
  std::ostringstream out2;
  write_predictions(sims, out2);
  std::istringstream in2(out2.str());
  const auto p2 = read_predictions(in2);
  CHECK(p2.subtask == 2);
  CHECK(p2.sims == sims);

  std::istringstream dup("id\tchange\na\t1\na\t2\n");
  CHECK_THROWS_AS(read_predictions(dup), DataError);
  std::istringstream bad("id\tchange\na\tone\n");
  CHECK_THROWS_AS(read_predictions(bad), DataError);
}
