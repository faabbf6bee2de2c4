#ifndef MDRAFT_DRAFT_HPP
#define MDRAFT_DRAFT_HPP

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdraft/error.hpp"

namespace mdraft {

// A step may carry at most this many whitespace-delimited words.
inline constexpr int kMaxStepWords = 5;

struct ReasoningStep {
  std::string text;    // single line, no newline characters
  int word_count = 0;  // whitespace-delimited token count of text
};

// Builds a step with its word count filled in.
ReasoningStep make_step(std::string text);

struct GenerationMeta {
  double temperature = 0.5;  // in [0.2, 0.8]
  int strategy_id = 0;       // equals draft_index for policy-generated drafts
  int history_len = 0;       // number of earlier same-agent drafts conditioned on
  std::uint64_t seed = 0;
};

struct Draft {
  int agent_id = 0;
  int draft_index = 0;
  std::vector<ReasoningStep> steps;  // non-empty for a valid draft
  std::string answer;                // non-empty for a valid draft
  GenerationMeta meta;
};

// Identifies a draft within one training iteration.
struct DraftRef {
  std::int64_t query_id = 0;
  int agent_id = 0;
  int draft_index = 0;
  auto operator<=>(const DraftRef&) const = default;
};

inline DraftRef ref_of(std::int64_t query_id, const Draft& d) {
  return DraftRef{query_id, d.agent_id, d.draft_index};
}

// Steps + answer as parsed from wire text; carries no meta.
struct ParsedDraft {
  std::vector<ReasoningStep> steps;
  std::string answer;
};

enum class Violation { too_many_words, empty_step, empty_answer };
const char* violation_name(Violation v);

// step_index is -1 when the violation concerns the answer line.
struct DraftViolation {
  int step_index = 0;
  Violation code = Violation::too_many_words;
};

struct ValidationReport {
  bool valid = true;
  std::vector<DraftViolation> violations;
};

// True iff 1 <= word_count <= kMaxStepWords. The answer line is exempt from
// the word limit; it only has to be non-empty.
bool validate_step(const ReasoningStep& step);

ValidationReport validate_draft(std::span<const ReasoningStep> steps, std::string_view answer);
ValidationReport validate_draft(const ParsedDraft& d);
ValidationReport validate_draft(const Draft& d);

struct ParseError : Error {
  enum class Kind { missing_answer_line, empty_draft, malformed_line };
  Kind kind;
  int line;  // 1-based; 0 when no single line is at fault
  ParseError(Kind k, int line_no);
};

// Wire format: one "step: <words>" line per step, then a final "#### <answer>"
// line. Lines are trimmed before interpretation; blank lines are ignored.
ParsedDraft parse_draft(std::string_view text);

std::string render_draft(std::span<const ReasoningStep> steps, std::string_view answer);
std::string render_draft(const Draft& d);
std::string render_draft(const ParsedDraft& d);

// All step texts plus the answer, space-joined; the token source for
// diversity and other corpus metrics.
std::string draft_text(const Draft& d);

// Mean pairwise (1 - Jaccard over lowercased whitespace tokens of the full
// draft text); 0.0 for a single draft. Throws EmptyInput on an empty list.
double diversity(std::span<const Draft> drafts);

}  // namespace mdraft

#endif  // MDRAFT_DRAFT_HPP
