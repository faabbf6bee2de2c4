#include "mdraft/task.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mdraft/rng.hpp"
#include "mdraft/text.hpp"

namespace mdraft {

namespace {

using nlohmann::json;

void check_depth(int depth) {
  if (depth < kMinDepth || depth > kMaxDepth) {
    std::ostringstream os;
    os << "depth " << depth << " outside [" << kMinDepth << ", " << kMaxDepth << "]";
    throw BadDepth(os.str());
  }
}

json suite_row(const Query& q) {
  json ops = json::array();
  for (const ChainOp& op : q.payload.ops) ops.push_back({op_name(op.op), op.operand});
  return json{{"id", q.id},
              {"prompt", q.prompt},
              {"payload", {{"start", q.payload.start}, {"ops", ops}}},
              {"truth", q.truth}};
}

Query query_from_row(const json& row, int line_no) {
  const auto fail = [line_no](const std::string& why) {
    std::ostringstream os;
    os << "suite line " << line_no << ": " << why;
    throw SuiteError(os.str());
  };
  Query q;
  try {
    q.id = row.at("id").get<std::int64_t>();
    q.prompt = row.at("prompt").get<std::string>();
    q.truth = row.at("truth").get<std::int64_t>();
    const json& payload = row.at("payload");
    q.payload.start = payload.at("start").get<std::int64_t>();
    for (const json& op : payload.at("ops")) {
      const auto name = op.at(0).get<std::string>();
      const auto parsed = op_from_name(name);
      if (!parsed) fail("unknown operator \"" + name + "\"");
      q.payload.ops.push_back({*parsed, op.at(1).get<std::int64_t>()});
    }
  } catch (const json::exception& e) {
    fail(e.what());
  }
  if (q.payload.depth() < kMinDepth || q.payload.depth() > kMaxDepth) fail("bad depth");
  for (const ChainOp& op : q.payload.ops) {
    if (op.operand < kOperandLo || op.operand > kOperandHi) fail("operand outside [1, 9]");
  }
  if (q.prompt != render_prompt(q.payload)) fail("prompt does not match payload");
  if (q.truth != chain_values(q.payload).back()) fail("truth does not match payload");
  return q;
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::add: return "add";
    case Op::sub: return "sub";
    default: return "mul";
  }
}

std::optional<Op> op_from_name(std::string_view name) {
  if (name == "add") return Op::add;
  if (name == "sub") return Op::sub;
  if (name == "mul") return Op::mul;
  return std::nullopt;
}

std::int64_t apply_op(Op op, std::int64_t value, std::int64_t operand) {
  switch (op) {
    case Op::add: return value + operand;
    case Op::sub: return value - operand;
    default: return value * operand;
  }
}

std::vector<std::int64_t> chain_values(const ChainSpec& spec) {
  std::vector<std::int64_t> values;
  values.reserve(spec.ops.size());
  std::int64_t v = spec.start;
  for (const ChainOp& op : spec.ops) {
    v = apply_op(op.op, v, op.operand);
    values.push_back(v);
  }
  return values;
}

std::string render_prompt(const ChainSpec& spec) {
  std::ostringstream os;
  os << "start " << spec.start << "; ";
  for (const ChainOp& op : spec.ops) os << op_name(op.op) << ' ' << op.operand << "; ";
  os << '?';
  return os.str();
}

Query generate_task(std::uint64_t seed, int depth, std::int64_t operand_lo,
                    std::int64_t operand_hi) {
  check_depth(depth);
  if (operand_lo < kOperandLo || operand_hi > kOperandHi || operand_lo > operand_hi) {
    throw Error("operand range must lie within [1, 9]");
  }
  Rng rng(mix64(seed));
  Query q;
  q.id = static_cast<std::int64_t>(seed);
  q.payload.start = rng.uniform_int(operand_lo, operand_hi);
  for (int i = 0; i < depth; ++i) {
    const Op op = static_cast<Op>(rng.uniform_int(0, 2));
    q.payload.ops.push_back({op, rng.uniform_int(operand_lo, operand_hi)});
  }
  q.prompt = render_prompt(q.payload);
  q.truth = chain_values(q.payload).back();
  return q;
}

TaskReward task_reward(const Draft& draft, const Query& query, const TaskRewardWeights& weights) {
  TaskReward r;
  const std::vector<std::int64_t> chain = chain_values(query.payload);
  const auto answer = parse_int(draft.answer);
  r.answer_correct = answer.has_value() && *answer == query.truth;
  const std::size_t compared = std::min(draft.steps.size(), chain.size());
  int matched = 0;
  for (std::size_t i = 0; i < compared; ++i) {
    const auto v = declared_value(draft.steps[i]);
    if (v.has_value() && *v == chain[i]) ++matched;
  }
  r.intermediate_fraction = chain.empty() ? 0.0 : static_cast<double>(matched) / chain.size();
  r.value = weights.answer * (r.answer_correct ? 1.0 : 0.0) +
            weights.intermediate * r.intermediate_fraction;
  return r;
}

std::optional<std::int64_t> declared_value(const ReasoningStep& step) {
  return last_int_token(step.text);
}

std::optional<StepOpRef> referenced_op(const ReasoningStep& step) {
  const std::vector<std::string> tokens = lower_tokens(step.text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto op = op_from_name(tokens[i]);
    if (!op) continue;
    if (i + 1 >= tokens.size()) return std::nullopt;
    const auto operand = parse_int(tokens[i + 1]);
    if (!operand) return std::nullopt;
    return StepOpRef{*op, *operand};
  }
  return std::nullopt;
}

std::vector<Query> make_suite(std::uint64_t seed, int count, int depth) {
  check_depth(depth);
  if (count < 1) throw Error("suite count must be positive");
  std::vector<Query> suite;
  suite.reserve(count);
  for (int i = 0; i < count; ++i) {
    Query q = generate_task(derive_seed(seed, StreamTag::task, {static_cast<std::uint64_t>(i)}),
                            depth);
    q.id = i;
    suite.push_back(std::move(q));
  }
  return suite;
}

void save_suite(const std::vector<Query>& suite, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const Query& q : suite) out << suite_row(q).dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::vector<Query> load_suite(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SuiteError("cannot open suite " + path);
  std::vector<Query> suite;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json row = json::parse(line, nullptr, false);
    if (row.is_discarded()) {
      std::ostringstream os;
      os << "suite line " << line_no << ": not valid JSON";
      throw SuiteError(os.str());
    }
    suite.push_back(query_from_row(row, line_no));
  }
  if (suite.empty()) throw SuiteError("suite " + path + " contains no tasks");
  return suite;
}

}  // namespace mdraft
