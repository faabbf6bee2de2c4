#ifndef MDRAFT_TASK_HPP
#define MDRAFT_TASK_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdraft/draft.hpp"
#include "mdraft/error.hpp"

namespace mdraft {

enum class Op { add, sub, mul };

const char* op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);
std::int64_t apply_op(Op op, std::int64_t value, std::int64_t operand);

struct ChainOp {
  Op op = Op::add;
  std::int64_t operand = 1;  // in [1, 9]
};

struct ChainSpec {
  std::int64_t start = 0;
  std::vector<ChainOp> ops;  // length is the chain depth, 1..8
  int depth() const { return static_cast<int>(ops.size()); }
};

inline constexpr int kMinDepth = 1;
inline constexpr int kMaxDepth = 8;
inline constexpr std::int64_t kOperandLo = 1;
inline constexpr std::int64_t kOperandHi = 9;

struct Query {
  std::int64_t id = 0;
  std::string prompt;  // deterministic rendering of payload
  ChainSpec payload;
  std::int64_t truth = 0;  // result of applying payload's ops to start
};

struct BadDepth : Error {
  explicit BadDepth(const std::string& what) : Error(what) {}
};

struct SuiteError : Error {
  explicit SuiteError(const std::string& what) : Error(what) {}
};

// Value after each operation; size equals depth. The final entry is the
// ground-truth answer.
std::vector<std::int64_t> chain_values(const ChainSpec& spec);

// Canonical prompt, e.g. "start 3; add 4; mul 2; ?". Injective over ChainSpec.
std::string render_prompt(const ChainSpec& spec);

// Deterministic in (seed, depth, operand range). Start and operands are drawn
// uniformly from the range; operators uniformly from {add, sub, mul}.
Query generate_task(std::uint64_t seed, int depth, std::int64_t operand_lo = kOperandLo,
                    std::int64_t operand_hi = kOperandHi);

struct TaskRewardWeights {
  double answer = 0.7;
  double intermediate = 0.3;
};

struct TaskReward {
  double value = 0.0;  // answer_weight * correct + intermediate_weight * fraction
  bool answer_correct = false;
  double intermediate_fraction = 0.0;  // matched positions / true chain length
};

// Declared values are matched position-wise against the true chain up to the
// shorter length; the fraction is over the true chain length so extra steps
// neither help nor hurt. A non-integer answer counts as incorrect.
TaskReward task_reward(const Draft& draft, const Query& query,
                       const TaskRewardWeights& weights = {});

// Last integer literal in the step's text; the step's declared intermediate.
std::optional<std::int64_t> declared_value(const ReasoningStep& step);

struct StepOpRef {
  Op op;
  std::int64_t operand;
};

// First operator word in the step plus the integer token right after it.
std::optional<StepOpRef> referenced_op(const ReasoningStep& step);

// Suite = ordered task list; JSONL rows {id, prompt, payload:{start, ops}, truth}.
std::vector<Query> make_suite(std::uint64_t seed, int count, int depth);
void save_suite(const std::vector<Query>& suite, const std::string& path);
std::vector<Query> load_suite(const std::string& path);

}  // namespace mdraft

#endif  // MDRAFT_TASK_HPP
