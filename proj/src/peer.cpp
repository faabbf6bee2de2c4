#include "mdraft/peer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mdraft/rng.hpp"
#include "mdraft/text.hpp"

namespace mdraft {

namespace {

std::array<double, kCriteria> raw_criteria(const Draft& draft, const Query& query) {
  std::array<double, kCriteria> c{};
  const std::vector<std::int64_t> chain = chain_values(query.payload);
  const std::size_t depth = chain.size();
  const std::size_t m = draft.steps.size();
  if (m > 0) {
    int chained = 0;
    int valid = 0;
    int relevant = 0;
    std::int64_t prev = query.payload.start;
    bool prev_known = true;
    for (std::size_t t = 0; t < m; ++t) {
      const ReasoningStep& step = draft.steps[t];
      const auto declared = declared_value(step);
      if (t < depth && prev_known && declared.has_value()) {
        const ChainOp& op = query.payload.ops[t];
        if (*declared == apply_op(op.op, prev, op.operand)) ++chained;
      }
      prev_known = declared.has_value();
      if (declared) prev = *declared;
      if (validate_step(step)) ++valid;
      if (t < depth) {
        const auto ref = referenced_op(step);
        if (ref && ref->op == query.payload.ops[t].op &&
            ref->operand == query.payload.ops[t].operand) {
          ++relevant;
        }
      }
    }
    c[0] = static_cast<double>(chained) / m;
    c[1] = static_cast<double>(valid) / m;
    c[2] = static_cast<double>(relevant) / m;
    c[3] = std::min(1.0, static_cast<double>(m) / depth);
  }
  const auto answer = parse_int(draft.answer);
  c[4] = (answer.has_value() && *answer == chain.back()) ? 1.0 : 0.0;
  return c;
}

}  // namespace

const char* criterion_name(Criterion c) {
  switch (c) {
    case Criterion::coherence: return "coherence";
    case Criterion::step_validity: return "step_validity";
    case Criterion::relevance: return "relevance";
    case Criterion::completeness: return "completeness";
    default: return "answer_correctness";
  }
}

PeerEvaluation evaluate(const EvaluatorProfile& profile, const Draft& draft, const Query& query) {
  if (profile.agent_id == draft.agent_id) {
    std::ostringstream os;
    os << "agent " << profile.agent_id << " cannot evaluate its own draft";
    throw SelfEvaluation(os.str());
  }
  if (profile.noise_sigma < 0.0 || profile.noise_sigma > kMaxNoiseSigma) {
    throw Error("noise_sigma outside [0, 0.5]");
  }

  PeerEvaluation ev;
  ev.evaluator_id = profile.agent_id;
  ev.draft_ref = ref_of(query.id, draft);
  ev.criteria = raw_criteria(draft, query);

  if (profile.noise_sigma > 0.0) {
    Rng rng(derive_seed(profile.seed, StreamTag::evaluation,
                        {static_cast<std::uint64_t>(query.id),
                         static_cast<std::uint64_t>(draft.agent_id),
                         static_cast<std::uint64_t>(draft.draft_index)}));
    for (double& c : ev.criteria) c += rng.gaussian(0.0, profile.noise_sigma);
  }
  for (double& c : ev.criteria) c = std::clamp(c, 0.0, 1.0);

  double sum = 0.0;
  int weakest = 0;
  for (int i = 0; i < kCriteria; ++i) {
    sum += ev.criteria[i];
    if (ev.criteria[i] < ev.criteria[weakest]) weakest = i;
  }
  ev.scalar = sum / kCriteria;

  std::ostringstream os;
  os << "weakest: " << criterion_name(static_cast<Criterion>(weakest)) << " ("
     << format_double(ev.criteria[weakest]) << ")";
  ev.feedback = os.str();
  return ev;
}

AggregatedEval aggregate(std::span<const PeerEvaluation> evals) {
  if (evals.empty()) throw EmptyInput("aggregate: empty evaluation list");
  AggregatedEval agg;
  agg.draft_ref = evals.front().draft_ref;
  for (const PeerEvaluation& ev : evals) {
    if (!(ev.draft_ref == agg.draft_ref)) {
      throw MixedDrafts("aggregate: evaluations reference different drafts");
    }
    for (int i = 0; i < kCriteria; ++i) agg.criteria_mean[i] += ev.criteria[i];
    agg.scalar_mean += ev.scalar;
  }
  agg.count = static_cast<int>(evals.size());
  for (double& c : agg.criteria_mean) c /= agg.count;
  agg.scalar_mean /= agg.count;
  return agg;
}

}  // namespace mdraft
