#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "garag/error.hpp"
#include "garag/log.hpp"
#include "garag/scoring.hpp"

namespace garag::scoring {
namespace {

using nlohmann::json;

json post_json(const RemoteConfig& config, const std::string& path, const json& body) {
  httplib::Client client(config.base_url);
  client.set_connection_timeout(0, config.timeout_ms * 1000);
  client.set_read_timeout(config.timeout_ms / 1000, (config.timeout_ms % 1000) * 1000);

  httplib::Headers headers;
  if (!config.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config.api_key);
  }

  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= config.retries; ++attempt) {
    if (attempt > 0) {
      const int delay_ms = std::min(100 << (attempt - 1), 2000);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    }
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      log::warn("POST " + config.base_url + path + " attempt " + std::to_string(attempt + 1) +
                ": " + last_error);
      continue;
    }
    log::debug("POST " + config.base_url + path + " -> " + std::to_string(res->status) + " (" +
               std::to_string(payload.size()) + "B out, " + std::to_string(res->body.size()) +
               "B in)");
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      log::warn("POST " + config.base_url + path + " attempt " + std::to_string(attempt + 1) +
                ": " + last_error);
      continue;
    }
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      throw ScorerError("malformed response from " + path + ": " + e.what());
    }
  }
  throw ScorerError("request to " + config.base_url + path + " failed after " +
                    std::to_string(config.retries + 1) + " attempts: " + last_error);
}

}  // namespace

double RemoteRelevance::score(std::string_view document, std::string_view query) {
  const json response = post_json(config_, "/relevance",
                                  json{{"context", document}, {"question", query}});
  if (!response.contains("score") || !response["score"].is_number()) {
    throw ScorerError("/relevance response missing numeric \"score\"");
  }
  return response["score"].get<double>();
}

double RemoteGeneration::answer_logprob(std::string_view document, std::string_view query,
                                        std::string_view answer) {
  const json response = post_json(config_, "/answer_logprob",
                                  json{{"context", document},
                                       {"question", query},
                                       {"answer", answer},
                                       {"prompt", render_prompt(document, query)}});
  if (!response.contains("token_logprobs") || !response["token_logprobs"].is_array()) {
    throw ScorerError("/answer_logprob response missing \"token_logprobs\" array");
  }
  double sum = 0.0;
  for (const json& value : response["token_logprobs"]) {
    if (!value.is_number()) {
      throw ScorerError("/answer_logprob token_logprobs contains a non-number");
    }
    sum += value.get<double>();
  }
  return sum;
}

std::string RemoteGeneration::generate(std::string_view document, std::string_view query) {
  const json response = post_json(config_, "/generate",
                                  json{{"context", document},
                                       {"question", query},
                                       {"prompt", render_prompt(document, query)}});
  if (!response.contains("text") || !response["text"].is_string()) {
    throw ScorerError("/generate response missing string \"text\"");
  }
  return response["text"].get<std::string>();
}

void probe_remote(const RemoteConfig& config) {
  try {
    RemoteConfig probe = config;
    probe.retries = 0;
    post_json(probe, "/relevance", nlohmann::json{{"context", "ping"}, {"question", "ping"}});
  } catch (const Error& e) {
    throw ConfigError("remote scorer unreachable at " + config.base_url + ": " + e.what());
  }
}

}  // namespace garag::scoring
