#pragma once

// Live translation clients over HTTPS. Credentials come from environment
// variables named in the engine config and are never persisted.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "xlsim/core/error.hpp"
#include "xlsim/translation/types.hpp"

namespace xlsim {

/// Serializes callers to at most `rate` acquisitions per second.
class TokenBucket {
 public:
  using clock = std::chrono::steady_clock;

  explicit TokenBucket(double rate_per_sec, double burst = 1.0)
      : rate_(rate_per_sec), capacity_(std::max(1.0, burst)), tokens_(capacity_), last_(clock::now()) {
    if (!(rate_per_sec > 0)) throw UsageError("token bucket rate must be positive");
  }

  void acquire() {
    std::unique_lock lock(mu_);
    while (true) {
      refill();
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
      lock.unlock();
      std::this_thread::sleep_for(wait);
      lock.lock();
    }
  }

 private:
  void refill() {
    const auto now = clock::now();
    tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
    last_ = now;
  }

  double rate_;
  double capacity_;
  double tokens_;
  clock::time_point last_;
  std::mutex mu_;
};

enum class HttpApi { google_v2, microsoft_v3 };

struct HttpEngineConfig {
  HttpApi api = HttpApi::google_v2;
  std::string endpoint;    // scheme://host[:port]; empty = vendor default
  std::string key_env;     // env var holding the API key
  std::string region_env;  // optional, microsoft only
  double rate_per_sec = 5.0;
  int max_retries = 3;
  int backoff_ms = 500;
  int timeout_ms = 15000;
};

class HttpTranslationClient final : public TranslationClient {
 public:
  explicit HttpTranslationClient(HttpEngineConfig cfg) : cfg_(std::move(cfg)), bucket_(cfg_.rate_per_sec) {
    if (cfg_.endpoint.empty()) {
      cfg_.endpoint = cfg_.api == HttpApi::google_v2 ? "https://translation.googleapis.com"
                                                      : "https://api.cognitive.microsofttranslator.com";
    }
  }

  std::string translate(const std::string& src, const std::string& tgt, const std::string& text) override {
    const std::string key = env_or_throw(cfg_.key_env);
    std::string last_error;
    long retry_after_ms = 0;
    bool rate_limited = false;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        const long backoff = static_cast<long>(cfg_.backoff_ms) << (attempt - 1);
        std::this_thread::sleep_for(std::chrono::milliseconds(std::max(backoff, retry_after_ms)));
      }
      bucket_.acquire();
      httplib::Client cli(cfg_.endpoint);
      cli.set_connection_timeout(std::chrono::milliseconds(cfg_.timeout_ms));
      cli.set_read_timeout(std::chrono::milliseconds(cfg_.timeout_ms));
      auto res = send(cli, key, src, tgt, text);
      if (!res) {
        last_error = "engine unreachable at " + cfg_.endpoint + ": " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 200) return parse(res->body);
      retry_after_ms = 0;
      if (res->has_header("Retry-After")) {
        retry_after_ms = std::atol(res->get_header_value("Retry-After").c_str()) * 1000;
      }
      last_error = "HTTP " + std::to_string(res->status) + " from " + cfg_.endpoint;
      rate_limited = res->status == 429 || res->status == 403;
      if (res->status != 429 && res->status < 500) {
        if (rate_limited) throw RateLimited(last_error + " (quota)", retry_after_ms, attempt + 1);
        throw ExternalError(last_error + ": " + res->body.substr(0, 200));
      }
    }
    if (rate_limited) throw RateLimited(last_error, retry_after_ms, cfg_.max_retries + 1);
    throw ExternalError(last_error);
  }

 private:
  static std::string env_or_throw(const std::string& name) {
    if (name.empty()) throw UsageError("engine config names no credential environment variable");
    const char* v = std::getenv(name.c_str());
    if (!v || !*v) throw ExternalError("credential environment variable " + name + " is not set");
    return v;
  }

  httplib::Result send(httplib::Client& cli, const std::string& key, const std::string& src, const std::string& tgt,
                       const std::string& text) {
    if (cfg_.api == HttpApi::google_v2) {
      const nlohmann::json body = {{"q", text}, {"source", src}, {"target", tgt}, {"format", "text"}};
      return cli.Post("/language/translate/v2?key=" + key, body.dump(), "application/json");
    }
    httplib::Headers headers = {{"Ocp-Apim-Subscription-Key", key}};
    if (!cfg_.region_env.empty()) {
      if (const char* r = std::getenv(cfg_.region_env.c_str()); r && *r)
        headers.emplace("Ocp-Apim-Subscription-Region", r);
    }
    const nlohmann::json body = nlohmann::json::array({{{"Text", text}}});
    return cli.Post("/translate?api-version=3.0&from=" + src + "&to=" + tgt, headers, body.dump(),
                    "application/json");
  }

  std::string parse(const std::string& body) const {
    try {
      const auto j = nlohmann::json::parse(body);
      if (cfg_.api == HttpApi::google_v2) return j.at("data").at("translations").at(0).at("translatedText");
      return j.at(0).at("translations").at(0).at("text");
    } catch (const nlohmann::json::exception& e) {
      throw ExternalError(std::string("unexpected translation response: ") + e.what());
    }
  }

  HttpEngineConfig cfg_;
  TokenBucket bucket_;
};

}  // namespace xlsim
