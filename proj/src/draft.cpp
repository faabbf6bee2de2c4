#include "mdraft/draft.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "mdraft/text.hpp"

namespace mdraft {

namespace {

std::string parse_error_message(ParseError::Kind kind, int line) {
  std::ostringstream os;
  switch (kind) {
    case ParseError::Kind::missing_answer_line:
      os << "draft has no \"#### <answer>\" line";
      break;
    case ParseError::Kind::empty_draft:
      os << "draft has no step lines";
      break;
    case ParseError::Kind::malformed_line:
      os << "line " << line << " is neither a step line nor the answer line";
      break;
  }
  return os.str();
}

}  // namespace

ReasoningStep make_step(std::string text) {
  ReasoningStep s;
  s.word_count = word_count(text);
  s.text = std::move(text);
  return s;
}

const char* violation_name(Violation v) {
  switch (v) {
    case Violation::too_many_words: return "TooManyWords";
    case Violation::empty_step: return "EmptyStep";
    default: return "EmptyAnswer";
  }
}

bool validate_step(const ReasoningStep& step) {
  return step.word_count >= 1 && step.word_count <= kMaxStepWords;
}

ValidationReport validate_draft(std::span<const ReasoningStep> steps, std::string_view answer) {
  ValidationReport report;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (validate_step(steps[i])) continue;
    const Violation code =
        steps[i].word_count == 0 ? Violation::empty_step : Violation::too_many_words;
    report.violations.push_back({static_cast<int>(i), code});
  }
  if (steps.empty()) report.violations.push_back({-1, Violation::empty_step});
  if (word_count(answer) == 0) report.violations.push_back({-1, Violation::empty_answer});
  report.valid = report.violations.empty();
  return report;
}

ValidationReport validate_draft(const ParsedDraft& d) { return validate_draft(d.steps, d.answer); }

ValidationReport validate_draft(const Draft& d) { return validate_draft(d.steps, d.answer); }

ParseError::ParseError(Kind k, int line_no)
    : Error(parse_error_message(k, line_no)), kind(k), line(line_no) {}

ParsedDraft parse_draft(std::string_view text) {
  ParsedDraft out;
  bool saw_answer = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view raw =
        nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (saw_answer) throw ParseError(ParseError::Kind::malformed_line, line_no);
    if (line.rfind("step:", 0) == 0) {
      out.steps.push_back(make_step(std::string(trim(line.substr(5)))));
    } else if (line.rfind("####", 0) == 0) {
      out.answer = std::string(trim(line.substr(4)));
      saw_answer = true;
    } else {
      throw ParseError(ParseError::Kind::malformed_line, line_no);
    }
  }
  if (!saw_answer) {
    if (out.steps.empty()) throw ParseError(ParseError::Kind::empty_draft, 0);
    throw ParseError(ParseError::Kind::missing_answer_line, 0);
  }
  if (out.steps.empty()) throw ParseError(ParseError::Kind::empty_draft, 0);
  return out;
}

std::string render_draft(std::span<const ReasoningStep> steps, std::string_view answer) {
  std::string out;
  for (const ReasoningStep& s : steps) {
    out += "step: ";
    out += s.text;
    out += '\n';
  }
  out += "#### ";
  out += answer;
  out += '\n';
  return out;
}

std::string render_draft(const Draft& d) { return render_draft(d.steps, d.answer); }

std::string render_draft(const ParsedDraft& d) { return render_draft(d.steps, d.answer); }

std::string draft_text(const Draft& d) {
  std::string out;
  for (const ReasoningStep& s : d.steps) {
    out += s.text;
    out += ' ';
  }
  out += d.answer;
  return out;
}

double diversity(std::span<const Draft> drafts) {
  if (drafts.empty()) throw EmptyInput("diversity: empty draft list");
  if (drafts.size() == 1) return 0.0;
  std::vector<std::set<std::string>> tokens(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    for (std::string& t : lower_tokens(draft_text(drafts[i]))) tokens[i].insert(std::move(t));
  }
  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    for (std::size_t j = i + 1; j < drafts.size(); ++j) {
      std::size_t common = 0;
      const auto& a = tokens[i];
      const auto& b = tokens[j];
      for (const std::string& t : a) common += b.count(t);
      const std::size_t unions = a.size() + b.size() - common;
      // Two empty token sets are identical, so their distance is 0.
      const double jaccard =
          unions == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(unions);
      total += 1.0 - jaccard;
      ++pairs;
    }
  }
  return total / pairs;
}

}  // namespace mdraft
