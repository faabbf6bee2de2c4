#ifndef MDRAFT_PEER_HPP
#define MDRAFT_PEER_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "mdraft/draft.hpp"
#include "mdraft/error.hpp"
#include "mdraft/task.hpp"

namespace mdraft {

inline constexpr int kCriteria = 5;
inline constexpr double kMaxNoiseSigma = 0.5;

enum class Criterion { coherence, step_validity, relevance, completeness, answer_correctness };
const char* criterion_name(Criterion c);

struct SelfEvaluation : Error {
  explicit SelfEvaluation(const std::string& what) : Error(what) {}
};
struct MixedDrafts : Error {
  explicit MixedDrafts(const std::string& what) : Error(what) {}
};

struct EvaluatorProfile {
  int agent_id = 0;
  double noise_sigma = 0.0;  // in [0, kMaxNoiseSigma]; 0 = oracle evaluator
  std::uint64_t seed = 0;
};

struct PeerEvaluation {
  int evaluator_id = 0;
  DraftRef draft_ref;
  std::array<double, kCriteria> criteria{};  // each in [0, 1]
  double scalar = 0.0;                       // mean of criteria
  std::string feedback;                      // names the weakest criterion
};

// Scores one draft on the five criteria:
//   coherence          fraction of steps whose declared value follows from the
//                      previous declared value (the chain start for step 0)
//                      under that position's operator
//   step_validity      fraction of steps passing validate_step
//   relevance          fraction of steps referencing the operator and operand
//                      of their query position
//   completeness       min(1, draft steps / query depth)
//   answer_correctness evaluator recomputes the chain and compares the answer
// Gaussian noise with profile.noise_sigma is added per criterion
// (deterministic in profile.seed and the draft's identity), then clipped to
// [0, 1]. Throws SelfEvaluation when the evaluator scores its own draft.
PeerEvaluation evaluate(const EvaluatorProfile& profile, const Draft& draft, const Query& query);

struct AggregatedEval {
  DraftRef draft_ref;
  std::array<double, kCriteria> criteria_mean{};
  double scalar_mean = 0.0;
  int count = 0;
};

// Arithmetic mean per criterion and of the scalar. Throws EmptyInput on an
// empty list and MixedDrafts when the evaluations reference different drafts.
AggregatedEval aggregate(std::span<const PeerEvaluation> evals);

}  // namespace mdraft

#endif  // MDRAFT_PEER_HPP
