#pragma once

// A scripted encoder sidecar: answers hello/encode with synthetic-hash
// vectors, or breaks the contract on purpose.

#include <string>

#include <nlohmann/json.hpp>

#include "xlsim/encoder/backends.hpp"

namespace xlsim::testing {

struct MockOptions {
  std::size_t dim = 8;
  std::string violate;  // "", "dim", "offsets", "json", "error", "nan"
};

inline std::string mock_reply(const std::string& line, const MockOptions& opt) {
  const auto req = nlohmann::json::parse(line, nullptr, false);
  if (req.is_discarded() || !req.is_object()) return R"({"error":"bad-request","msg":"not json"})";
  const auto op = req.value("op", std::string{});
  if (op == "hello") return nlohmann::json{{"name", "mock"}, {"dim", opt.dim}, {"layers", "sum-last-4"}}.dump();
  if (op != "encode") return R"({"error":"bad-op","msg":"unknown op"})";
  if (opt.violate == "error") return R"({"error":"oom","msg":"out of memory"})";
  if (opt.violate == "json") return "{not json";
  SyntheticHashBackend backend(opt.dim, 7);
  auto enc = backend.encode(req.at("lang").get<std::string>(), req.at("text").get<std::string>());
  auto j = encoding_to_json(enc);
  if (opt.violate == "dim") j["dim"] = opt.dim + 1;
  if (opt.violate == "offsets" && !j["tokens"].empty()) j["tokens"][0]["end"] = 100000;
  if (opt.violate == "nan" && !j["tokens"].empty()) {
    // NaN cannot be spelled in JSON; a string stands in for the bad component.
    j["tokens"][0]["vec"][0] = "NaN";
  }
  return j.dump();
}

}  // namespace xlsim::testing
