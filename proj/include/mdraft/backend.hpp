#ifndef MDRAFT_BACKEND_HPP
#define MDRAFT_BACKEND_HPP

#include <span>
#include <string>

#include <json.hpp>

#include "mdraft/config.hpp"
#include "mdraft/draft.hpp"
#include "mdraft/error.hpp"
#include "mdraft/policy.hpp"
#include "mdraft/task.hpp"

namespace mdraft {

// Credentials are read from this environment variable only; they never
// appear in config files or logs.
inline constexpr const char* kApiKeyEnv = "MDRAFT_API_KEY";

struct BackendUnavailable : Error {
  explicit BackendUnavailable(const std::string& what) : Error(what) {}
};

struct FormatRejected : Error {
  FormatRejected(const std::string& what, std::string offending)
      : Error(what), offending_text(std::move(offending)) {}
  std::string offending_text;
};

// Chat-completion style request body: system message stating the step-word
// cap and wire format, user message carrying prompt, prior drafts, and the
// strategy hint.
nlohmann::json build_backend_request(const BackendSettings& cfg, const Query& query,
                                     std::span<const Draft> history, const StrategyHint& hint,
                                     double temperature);

// Pulls choices[0].message.content out of a response body; throws
// FormatRejected when the shape is wrong.
std::string extract_backend_content(const nlohmann::json& response);

// POSTs to cfg.endpoint, parses and validates the returned draft, retrying
// invalid responses and transport failures up to cfg.max_retries extra
// attempts. Throws BackendUnavailable (transport/status) or FormatRejected
// (response never yields a valid draft) once attempts are exhausted. No
// draft is returned without passing validate_draft.
Draft llm_generate(const BackendSettings& cfg, int agent_id, const Query& query,
                   std::span<const Draft> history, const StrategyHint& hint, double temperature);

}  // namespace mdraft

#endif  // MDRAFT_BACKEND_HPP
