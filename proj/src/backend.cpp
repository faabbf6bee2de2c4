#include "mdraft/backend.hpp"

#include <cmath>
#include <cstdlib>

#include <httplib.h>

#include "mdraft/log.hpp"

namespace mdraft {
namespace {

constexpr const char* kSystemInstruction =
    "Solve the arithmetic chain in the user message. Reply with one line per "
    "reasoning step, each formatted exactly as 'step: <text>' where <text> is "
    "at most 5 words. End with a single line '#### <final integer>'. No other "
    "text.";

// Splits "http://host:port/path" into client base and request path.
struct EndpointParts {
  std::string base;
  std::string path;
};

EndpointParts split_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw BackendUnavailable("endpoint must include a scheme: " + endpoint);
  }
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

nlohmann::json build_backend_request(const BackendSettings& cfg, const Query& query,
                                     std::span<const Draft> history, const StrategyHint& hint,
                                     double temperature) {
  std::string user = "Task: " + query.prompt + "\n";
  if (!history.empty()) {
    user += "Your earlier drafts for this task:\n";
    for (const auto& d : history) user += render_draft(d);
    user += "Produce a draft that differs from them.\n";
  }
  user += "Strategy hint: " + hint.description;

  nlohmann::json body;
  body["model"] = cfg.model;
  body["messages"] = nlohmann::json::array({
      nlohmann::json{{"role", "system"}, {"content", kSystemInstruction}},
      nlohmann::json{{"role", "user"}, {"content", user}},
  });
  if (cfg.pass_temperature) body["temperature"] = temperature;
  return body;
}

std::string extract_backend_content(const nlohmann::json& response) {
  if (!response.contains("choices") || !response["choices"].is_array() ||
      response["choices"].empty()) {
    throw FormatRejected("backend response has no choices", response.dump());
  }
  const auto& first = response["choices"][0];
  if (!first.contains("message") || !first["message"].contains("content") ||
      !first["message"]["content"].is_string()) {
    throw FormatRejected("backend response has no message content", response.dump());
  }
  return first["message"]["content"].get<std::string>();
}

Draft llm_generate(const BackendSettings& cfg, int agent_id, const Query& query,
                   std::span<const Draft> history, const StrategyHint& hint, double temperature) {
  const EndpointParts parts = split_endpoint(cfg.endpoint);
  httplib::Client client(parts.base);
  const auto whole = static_cast<time_t>(cfg.timeout_sec);
  const auto frac = static_cast<time_t>((cfg.timeout_sec - static_cast<double>(whole)) * 1e6);
  client.set_connection_timeout(whole, frac);
  client.set_read_timeout(whole, frac);
  client.set_write_timeout(whole, frac);

  httplib::Headers headers;
  if (const char* key = std::getenv(kApiKeyEnv); key != nullptr && key[0] != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const std::string request_body =
      build_backend_request(cfg, query, history, hint, temperature).dump();

  std::string transport_error;
  std::string format_error;
  std::string offending;
  const int attempts = cfg.max_retries + 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    auto res = client.Post(parts.path, headers, request_body, "application/json");
    if (!res) {
      transport_error = "no response from " + cfg.endpoint + " (" +
                        httplib::to_string(res.error()) + ")";
      MDRAFT_WARN("backend attempt ", attempt + 1, "/", attempts, " failed: ", transport_error);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      transport_error = "status " + std::to_string(res->status) + " from " + cfg.endpoint;
      MDRAFT_WARN("backend attempt ", attempt + 1, "/", attempts, " failed: ", transport_error);
      continue;
    }

    std::string content;
    try {
      content = extract_backend_content(nlohmann::json::parse(res->body, nullptr, true));
    } catch (const nlohmann::json::exception& e) {
      format_error = std::string("unparsable response body: ") + e.what();
      offending = res->body;
      continue;
    } catch (const FormatRejected& e) {
      format_error = e.what();
      offending = e.offending_text;
      continue;
    }

    try {
      ParsedDraft parsed = parse_draft(content);
      Draft draft;
      draft.agent_id = agent_id;
      draft.draft_index = hint.strategy_id;
      draft.steps = std::move(parsed.steps);
      draft.answer = std::move(parsed.answer);
      draft.meta.temperature = temperature;
      draft.meta.strategy_id = hint.strategy_id;
      draft.meta.history_len = static_cast<int>(history.size());
      draft.meta.seed = 0;
      ValidationReport report = validate_draft(draft);
      if (!report.valid) {
        const auto& v = report.violations.front();
        format_error = "draft violates constraints (" +
                       std::string(violation_name(v.code)) + " at step " +
                       std::to_string(v.step_index) + ")";
        offending = content;
        continue;
      }
      return draft;
    } catch (const ParseError& e) {
      format_error = std::string("draft does not parse: ") + e.what();
      offending = content;
      continue;
    }
  }

  // Format failures take precedence: the backend answered but never produced
  // a usable draft.
  if (!format_error.empty()) {
    throw FormatRejected("backend response rejected after " + std::to_string(attempts) +
                             " attempts: " + format_error,
                         offending);
  }
  throw BackendUnavailable("backend unavailable after " + std::to_string(attempts) +
                           " attempts: " + transport_error);
}

}  // namespace mdraft
