#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "mdraft/peer.hpp"
#include "mdraft/task.hpp"

using namespace mdraft;

namespace {

// Query: start 3; add 4; mul 2 -> chain [7, 14].
Query fixture_query() {
  Query q;
  q.id = 17;
  q.payload.start = 3;
  q.payload.ops = {{Op::add, 4}, {Op::mul, 2}};
  q.prompt = render_prompt(q.payload);
  q.truth = 14;
  return q;
}

Draft draft_of(int agent, int index, std::vector<std::string> steps, std::string answer) {
  Draft d;
  d.agent_id = agent;
  d.draft_index = index;
  for (auto& s : steps) d.steps.push_back(make_step(std::move(s)));
  d.answer = std::move(answer);
  return d;
}

EvaluatorProfile oracle(int agent) { return EvaluatorProfile{agent, 0.0, 0}; }

}  // namespace

TEST_CASE("criterion names") {
  CHECK(std::string(criterion_name(Criterion::coherence)) == "coherence");
  CHECK(std::string(criterion_name(Criterion::step_validity)) == "step_validity");
  CHECK(std::string(criterion_name(Criterion::relevance)) == "relevance");
  CHECK(std::string(criterion_name(Criterion::completeness)) == "completeness");
  CHECK(std::string(criterion_name(Criterion::answer_correctness)) == "answer_correctness");
}

TEST_CASE("a perfect draft scores one everywhere") {
  const Query q = fixture_query();
  const Draft d = draft_of(0, 0, {"apply add 4 get 7", "apply mul 2 get 14"}, "14");
  const PeerEvaluation ev = evaluate(oracle(1), d, q);

  CHECK(ev.evaluator_id == 1);
  CHECK(ev.draft_ref.query_id == 17);
  CHECK(ev.draft_ref.agent_id == 0);
  for (double c : ev.criteria) CHECK(c == 1.0);
  CHECK(ev.scalar == 1.0);
  CHECK(ev.feedback == "weakest: coherence (1)");  // tie resolved to the first criterion
}

TEST_CASE("a wrong intermediate keeps coherent continuations") {
  const Query q = fixture_query();
  // 3 + 4 declared as 8 (wrong), then 8 * 2 = 16 follows from the declared path.
  const Draft d = draft_of(0, 1, {"apply add 4 get 8", "apply mul 2 get 16"}, "16");
  const PeerEvaluation ev = evaluate(oracle(2), d, q);

  CHECK(ev.criteria[0] == doctest::Approx(0.5));  // coherence
  CHECK(ev.criteria[1] == 1.0);                   // step validity
  CHECK(ev.criteria[2] == 1.0);                   // relevance
  CHECK(ev.criteria[3] == 1.0);                   // completeness
  CHECK(ev.criteria[4] == 0.0);                   // answer
  CHECK(ev.scalar == doctest::Approx(0.7));
  CHECK(ev.feedback == "weakest: answer_correctness (0)");
}

TEST_CASE("a short draft loses completeness only") {
  const Query q = fixture_query();
  const Draft d = draft_of(0, 2, {"apply add 4 get 7"}, "14");
  const PeerEvaluation ev = evaluate(oracle(1), d, q);

  CHECK(ev.criteria[0] == 1.0);
  CHECK(ev.criteria[1] == 1.0);
  CHECK(ev.criteria[2] == 1.0);
  CHECK(ev.criteria[3] == doctest::Approx(0.5));
  CHECK(ev.criteria[4] == 1.0);
  CHECK(ev.scalar == doctest::Approx(0.9));
  CHECK(ev.feedback == "weakest: completeness (0.5)");
}

TEST_CASE("a wordy valueless step breaks chaining for its successor") {
  const Query q = fixture_query();
  // Step 0 declares nothing, so step 1 gets no coherence credit even though
  // its arithmetic would be right from the true intermediate.
  const Draft d =
      draft_of(0, 3, {"this step is far too wordy indeed", "apply mul 2 get 14"}, "14");
  const PeerEvaluation ev = evaluate(oracle(1), d, q);

  CHECK(ev.criteria[0] == 0.0);
  CHECK(ev.criteria[1] == doctest::Approx(0.5));
  CHECK(ev.criteria[2] == doctest::Approx(0.5));
  CHECK(ev.criteria[3] == 1.0);
  CHECK(ev.criteria[4] == 1.0);
  CHECK(ev.feedback == "weakest: coherence (0)");
}

TEST_CASE("steps past the query depth dilute per-step criteria") {
  const Query q = fixture_query();
  const Draft d = draft_of(0, 0, {"apply add 4 get 7", "apply mul 2 get 14", "apply add 1 get 15"},
                           "14");
  const PeerEvaluation ev = evaluate(oracle(1), d, q);
  CHECK(ev.criteria[0] == doctest::Approx(2.0 / 3.0));
  CHECK(ev.criteria[1] == 1.0);
  CHECK(ev.criteria[2] == doctest::Approx(2.0 / 3.0));
  CHECK(ev.criteria[3] == 1.0);
  CHECK(ev.criteria[4] == 1.0);
}

TEST_CASE("a stepless draft is scored on the answer alone") {
  const Query q = fixture_query();
  const Draft d = draft_of(0, 0, {}, "14");
  const PeerEvaluation ev = evaluate(oracle(1), d, q);
  CHECK(ev.criteria[0] == 0.0);
  CHECK(ev.criteria[1] == 0.0);
  CHECK(ev.criteria[2] == 0.0);
  CHECK(ev.criteria[3] == 0.0);
  CHECK(ev.criteria[4] == 1.0);
  CHECK(ev.scalar == doctest::Approx(0.2));

  const Draft junk = draft_of(0, 0, {}, "banana");
  CHECK(evaluate(oracle(1), junk, q).criteria[4] == 0.0);
}

TEST_CASE("evaluators refuse their own drafts") {
  const Query q = fixture_query();
  const Draft d = draft_of(2, 0, {"apply add 4 get 7"}, "7");
  CHECK_THROWS_AS(evaluate(oracle(2), d, q), SelfEvaluation);
  CHECK_NOTHROW(evaluate(oracle(1), d, q));
}

TEST_CASE("noise sigma is range checked") {
  const Query q = fixture_query();
  const Draft d = draft_of(0, 0, {"apply add 4 get 7"}, "7");
  CHECK_THROWS_AS(evaluate(EvaluatorProfile{1, -0.1, 0}, d, q), Error);
  CHECK_THROWS_AS(evaluate(EvaluatorProfile{1, 0.6, 0}, d, q), Error);
  CHECK_NOTHROW(evaluate(EvaluatorProfile{1, kMaxNoiseSigma, 0}, d, q));
}

TEST_CASE("noisy evaluations are deterministic in the profile seed") {
  const Query q = fixture_query();
  const Draft d = draft_of(0, 1, {"apply add 4 get 8", "apply mul 2 get 16"}, "16");

  const PeerEvaluation a = evaluate(EvaluatorProfile{1, 0.3, 101}, d, q);
  const PeerEvaluation b = evaluate(EvaluatorProfile{1, 0.3, 101}, d, q);
  CHECK(a.criteria == b.criteria);
  CHECK(a.scalar == b.scalar);
  CHECK(a.feedback == b.feedback);

  const PeerEvaluation c = evaluate(EvaluatorProfile{1, 0.3, 102}, d, q);
  CHECK(a.criteria != c.criteria);

  // Noise actually perturbs the oracle scores.
  const PeerEvaluation raw = evaluate(oracle(1), d, q);
  CHECK(a.criteria != raw.criteria);
}

TEST_CASE("noise differs across draft identities under one seed") {
  const Query q = fixture_query();
  const Draft d0 = draft_of(0, 0, {"apply add 4 get 8", "apply mul 2 get 16"}, "16");
  Draft d1 = d0;
  d1.draft_index = 1;
  const PeerEvaluation e0 = evaluate(EvaluatorProfile{1, 0.3, 55}, d0, q);
  const PeerEvaluation e1 = evaluate(EvaluatorProfile{1, 0.3, 55}, d1, q);
  CHECK(e0.criteria != e1.criteria);
}

TEST_CASE("noisy scores stay inside the unit interval") {
  const Query q = fixture_query();
  const Draft d = draft_of(0, 0, {"apply add 4 get 7", "apply mul 2 get 14"}, "14");
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const PeerEvaluation ev = evaluate(EvaluatorProfile{1, 0.5, seed}, d, q);
    for (double c : ev.criteria) {
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
    }
    CHECK(ev.scalar >= 0.0);
    CHECK(ev.scalar <= 1.0);
  }
}

TEST_CASE("the scalar is the criteria mean") {
  const Query q = fixture_query();
  const Draft d = draft_of(0, 1, {"apply add 4 get 8"}, "16");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PeerEvaluation ev = evaluate(EvaluatorProfile{1, 0.4, seed}, d, q);
    double mean = 0.0;
    for (double c : ev.criteria) mean += c;
    mean /= kCriteria;
    CHECK(ev.scalar == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("aggregate averages per criterion") {
  const Query q = fixture_query();
  const Draft d = draft_of(0, 1, {"apply add 4 get 8", "apply mul 2 get 16"}, "16");
  const PeerEvaluation e1 = evaluate(EvaluatorProfile{1, 0.3, 7}, d, q);
  const PeerEvaluation e2 = evaluate(EvaluatorProfile{2, 0.3, 8}, d, q);

  const std::vector<PeerEvaluation> evals = {e1, e2};
  const AggregatedEval agg = aggregate(evals);
  CHECK(agg.count == 2);
  CHECK(agg.draft_ref == ref_of(q.id, d));
  for (int i = 0; i < kCriteria; ++i) {
    CHECK(agg.criteria_mean[i] == doctest::Approx((e1.criteria[i] + e2.criteria[i]) / 2));
  }
  CHECK(agg.scalar_mean == doctest::Approx((e1.scalar + e2.scalar) / 2));

  const std::vector<PeerEvaluation> one = {e1};
  const AggregatedEval single = aggregate(one);
  CHECK(single.count == 1);
  CHECK(single.scalar_mean == e1.scalar);
}

TEST_CASE("aggregate rejects empty and mixed inputs") {
  CHECK_THROWS_AS(aggregate({}), EmptyInput);

  const Query q = fixture_query();
  const Draft d0 = draft_of(0, 0, {"apply add 4 get 7"}, "14");
  Draft d1 = d0;
  d1.draft_index = 1;
  const std::vector<PeerEvaluation> mixed = {evaluate(oracle(1), d0, q),
                                             evaluate(oracle(1), d1, q)};
  CHECK_THROWS_AS(aggregate(mixed), MixedDrafts);
}
