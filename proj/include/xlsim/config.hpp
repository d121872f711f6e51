#pragma once

// Declarative run configuration (one JSON document) and the resources it
// names. Relative paths resolve against the config file's directory.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xlsim/core/error.hpp"
#include "xlsim/core/hash.hpp"
#include "xlsim/dataset.hpp"
#include "xlsim/embedstore.hpp"
#include "xlsim/encoder/backends.hpp"
#include "xlsim/encoder/protocol.hpp"
#include "xlsim/metrics.hpp"
#include "xlsim/scoring.hpp"
#include "xlsim/translation/cache.hpp"
#include "xlsim/translation/http_engines.hpp"
#include "xlsim/translation/types.hpp"

#ifndef XLSIM_VERSION
#define XLSIM_VERSION "0.0.0"
#endif

namespace xlsim {

inline constexpr const char* kToolVersion = XLSIM_VERSION;

struct EngineSpec {
  std::string kind = "fixture";  // fixture | google-v2 | microsoft-v3
  HttpEngineConfig http;
};

struct EncoderSpec {
  std::string kind = "fixture-file";  // fixture-file | synthetic-hash | stdio | tcp
  std::string path;
  std::size_t dim = 64;
  uint64_t seed = 0;
  std::vector<std::string> command;
  std::string host = "127.0.0.1";
  int port = 0;
  std::size_t in_flight = 4;
  int timeout_ms = 60000;
};

struct RunConfig {
  std::string dataset;
  DatasetFormat dataset_format = DatasetFormat::task_tsv;
  ParseOptions parse;
  std::string gold;  // defaults to the dataset
  ExperimentConfig experiment;
  std::map<std::string, EngineSpec> engines;
  std::string cache;
  std::string views;
  bool marker_fallback = true;
  std::map<std::string, std::string> vectors;  // lang -> path
  Casing vector_casing = Casing::lower;
  std::optional<std::size_t> vector_limit;
  EncoderSpec encoder;
  Pooling pooling = Pooling::pooled;
  std::size_t jobs = 1;
  std::string out = "out";

  /// The resolved configuration as canonical JSON.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["dataset"] = dataset;
    j["dataset_format"] = dataset_format == DatasetFormat::task_tsv ? "task-tsv" : "canonical";
    j["source_lang"] = parse.lang;
    j["markers"] = {parse.open_marker, parse.close_marker};
    j["gold"] = gold;
    j["experiment"] = experiment.to_json();
    nlohmann::ordered_json eng = nlohmann::ordered_json::object();
    for (const auto& [name, e] : engines) {
      eng[name] = {{"kind", e.kind}, {"endpoint", e.http.endpoint}, {"key_env", e.http.key_env},
                   {"region_env", e.http.region_env}};
    }
    j["engines"] = eng;
    j["cache"] = cache;
    j["views"] = views;
    j["marker_fallback"] = marker_fallback;
    j["vectors"] = vectors;
    j["vector_casing"] = vector_casing == Casing::lower ? "lower" : "preserve";
    j["vector_limit"] = vector_limit ? nlohmann::ordered_json(*vector_limit) : nlohmann::ordered_json(nullptr);
    j["encoder"] = {{"kind", encoder.kind},   {"path", encoder.path},         {"dim", encoder.dim},
                    {"seed", encoder.seed},   {"command", encoder.command},   {"host", encoder.host},
                    {"port", encoder.port},   {"in_flight", encoder.in_flight}};
    j["pooling"] = to_string(pooling);
    return j;
  }

  std::string fingerprint() const { return hash::sha256_hex(to_json().dump()).substr(0, 16); }
};

namespace detail {

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

inline HttpApi parse_api(const std::string& kind) {
  if (kind == "google-v2") return HttpApi::google_v2;
  if (kind == "microsoft-v3") return HttpApi::microsoft_v3;
  throw UsageError("unknown engine kind '" + kind + "' (expected fixture, google-v2 or microsoft-v3)");
}

}  // namespace detail

/// The built-in engine registry: the fixture engine plus two vendor slots
/// whose credentials come from the environment.
inline std::map<std::string, EngineSpec> default_engines() {
  std::map<std::string, EngineSpec> out;
  out["fixture"] = EngineSpec{};
  EngineSpec a;
  a.kind = "google-v2";
  a.http.api = HttpApi::google_v2;
  a.http.key_env = "XLSIM_ENGINE_A_KEY";
  out["engine-a"] = a;
  EngineSpec b;
  b.kind = "microsoft-v3";
  b.http.api = HttpApi::microsoft_v3;
  b.http.key_env = "XLSIM_ENGINE_B_KEY";
  b.http.region_env = "XLSIM_ENGINE_B_REGION";
  out["engine-b"] = b;
  return out;
}

inline RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  RunConfig c;
  c.engines = default_engines();
  try {
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      if (d.is_string()) {
        c.dataset = d.get<std::string>();
      } else {
        detail::read_opt(d, "path", c.dataset);
        if (d.contains("format")) c.dataset_format = parse_dataset_format(d["format"].get<std::string>());
        detail::read_opt(d, "lang", c.parse.lang);
        if (d.contains("markers")) {
          const auto m = d["markers"].get<std::vector<std::string>>();
          if (m.size() != 2) throw UsageError("dataset.markers must hold two strings");
          c.parse.open_marker = m[0];
          c.parse.close_marker = m[1];
        }
      }
    }
    detail::read_opt(j, "gold", c.gold);
    detail::read_opt(j, "alpha", c.experiment.alpha);
    detail::read_opt(j, "beta", c.experiment.beta);
    detail::read_opt(j, "languages", c.experiment.languages);
    if (j.contains("engine")) c.experiment.engine = EngineId(j["engine"].get<std::string>());
    if (j.contains("engines")) {
      for (const auto& [name, e] : j["engines"].items()) {
        EngineSpec s;
        detail::read_opt(e, "kind", s.kind);
        if (s.kind != "fixture") {
          s.http.api = detail::parse_api(s.kind);
          detail::read_opt(e, "endpoint", s.http.endpoint);
          detail::read_opt(e, "key_env", s.http.key_env);
          detail::read_opt(e, "region_env", s.http.region_env);
          detail::read_opt(e, "rate_per_sec", s.http.rate_per_sec);
          detail::read_opt(e, "max_retries", s.http.max_retries);
          detail::read_opt(e, "backoff_ms", s.http.backoff_ms);
          detail::read_opt(e, "timeout_ms", s.http.timeout_ms);
        }
        EngineId(std::string(name));
        c.engines[name] = s;
      }
    }
    detail::read_opt(j, "cache", c.cache);
    detail::read_opt(j, "views", c.views);
    detail::read_opt(j, "marker_fallback", c.marker_fallback);
    detail::read_opt(j, "vectors", c.vectors);
    if (j.contains("vector_casing")) c.vector_casing = parse_casing(j["vector_casing"].get<std::string>());
    if (j.contains("vector_limit") && !j["vector_limit"].is_null())
      c.vector_limit = j["vector_limit"].get<std::size_t>();
    if (j.contains("encoder")) {
      const auto& e = j["encoder"];
      detail::read_opt(e, "kind", c.encoder.kind);
      detail::read_opt(e, "path", c.encoder.path);
      detail::read_opt(e, "dim", c.encoder.dim);
      detail::read_opt(e, "seed", c.encoder.seed);
      detail::read_opt(e, "command", c.encoder.command);
      detail::read_opt(e, "host", c.encoder.host);
      detail::read_opt(e, "port", c.encoder.port);
      detail::read_opt(e, "in_flight", c.encoder.in_flight);
      detail::read_opt(e, "timeout_ms", c.encoder.timeout_ms);
    }
    if (j.contains("pooling")) c.pooling = parse_pooling(j["pooling"].get<std::string>());
    detail::read_opt(j, "jobs", c.jobs);
    detail::read_opt(j, "out", c.out);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  c.dataset = detail::resolve(base, c.dataset);
  c.gold = detail::resolve(base, c.gold);
  c.cache = detail::resolve(base, c.cache);
  c.views = detail::resolve(base, c.views);
  c.encoder.path = detail::resolve(base, c.encoder.path);
  for (auto& [lang, p] : c.vectors) {
    check_lang(lang);
    p = detail::resolve(base, p);
  }
  c.out = detail::resolve(base, c.out);
  c.experiment.backend = c.encoder.kind;
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, std::filesystem::absolute(path).parent_path());
}

inline std::unique_ptr<TranslationClient> make_client(const RunConfig& cfg, const EngineId& engine) {
  const auto it = cfg.engines.find(engine.str());
  if (it == cfg.engines.end()) throw UsageError("engine '" + engine.str() + "' is not configured");
  if (it->second.kind == "fixture") return std::make_unique<FixtureClient>();
  return std::make_unique<HttpTranslationClient>(it->second.http);
}

inline std::shared_ptr<EncoderBackend> make_backend(const EncoderSpec& e) {
  std::shared_ptr<EncoderBackend> inner;
  if (e.kind == "fixture-file") {
    if (e.path.empty()) throw UsageError("encoder.path is required for the fixture-file encoder");
    inner = std::make_shared<FixtureFileBackend>(e.path);
  } else if (e.kind == "synthetic-hash") {
    inner = std::make_shared<SyntheticHashBackend>(e.dim, e.seed);
  } else if (e.kind == "stdio") {
    const auto cmd = e.command;
    const int timeout = e.timeout_ms;
    inner = std::make_shared<ProtocolClientBackend>(
        [cmd, timeout] { return std::make_unique<StdioChannel>(cmd, timeout); }, e.in_flight);
  } else if (e.kind == "tcp") {
    const auto host = e.host;
    const int port = e.port;
    const int timeout = e.timeout_ms;
    inner = std::make_shared<ProtocolClientBackend>(
        [host, port, timeout] { return std::make_unique<TcpChannel>(host, port, timeout); }, e.in_flight);
  } else {
    throw UsageError("unknown encoder kind '" + e.kind + "'");
  }
  return std::make_shared<MemoizingBackend>(inner);
}

inline StoreSet load_stores(const RunConfig& cfg) {
  StoreSet out;
  for (const auto& [lang, path] : cfg.vectors)
    out[lang] = std::make_shared<const VectorStore>(open_vectors(path, lang, cfg.vector_limit, cfg.vector_casing));
  return out;
}

inline ParsedDataset load_dataset(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw UsageError("no dataset configured");
  return parse_dataset(cfg.dataset, cfg.dataset_format, cfg.parse);
}

/// Gold instances: the `gold` file when set, the dataset otherwise.
inline std::vector<Instance> load_gold(const RunConfig& cfg, const std::string& override_path = {}) {
  const auto path = !override_path.empty() ? override_path : !cfg.gold.empty() ? cfg.gold : cfg.dataset;
  if (path.empty()) throw UsageError("no gold file configured");
  const bool canonical = path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0;
  auto opt = cfg.parse;
  opt.strict = true;
  return parse_dataset(path, canonical ? DatasetFormat::canonical : cfg.dataset_format, opt).instances;
}

/// sha256 of a file's bytes, or "absent".
inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "absent";
  std::ostringstream ss;
  ss << in.rdbuf();
  return hash::sha256_hex(ss.str());
}

/// Flat key=value record written next to every run's outputs.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }

  void add_input(const std::string& name, const std::string& path) {
    if (!path.empty()) set("input." + name, file_digest(path));
  }

  std::string str() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write manifest '" + path + "'");
    out << str();
  }

  static std::map<std::string, std::string> read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read manifest '" + path + "'");
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
  }

 private:
  std::map<std::string, std::string> entries_;
};

/// Manifest entries shared by every subcommand.
inline Manifest base_manifest(const RunConfig& cfg, const std::string& command) {
  Manifest m;
  m.set("tool_version", kToolVersion);
  m.set("command", command);
  m.set("config_fingerprint", cfg.fingerprint());
  m.set("experiment_fingerprint", cfg.experiment.fingerprint());
  m.add_input("dataset", cfg.dataset);
  m.add_input("cache", cfg.cache);
  m.add_input("views", cfg.views);
  m.add_input("encoder", cfg.encoder.path);
  for (const auto& [lang, p] : cfg.vectors) m.add_input("vectors." + lang, p);
  return m;
}

}  // namespace xlsim
