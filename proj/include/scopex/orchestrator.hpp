#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scopex/extension.hpp"
#include "scopex/gateway.hpp"
#include "scopex/method_store.hpp"

namespace scopex {

// The four pipeline stages, in the only order they may appear.
enum class Stage { Intuition, MethodReuse, ScopeExtension, Borrowing };
std::string stage_label(Stage stage);

// How the question was finally answered (or not).
enum class Outcome { Intuition, MethodReuse, ScopeExtended, Borrowed, Unresolved };
std::string outcome_label(Outcome outcome);

struct StageRecord {
    Stage stage = Stage::Intuition;
    std::vector<std::string> prompts_issued;
    std::vector<std::string> responses;  // one per prompt
    std::string decision;
    double confidence = 0.0;
};

struct ReasoningTrace {
    std::string question;
    std::vector<StageRecord> stages;
    std::string final_answer;
    Outcome outcome = Outcome::Unresolved;
};

// Trace as JSON (two-space indent): {question, stages:[{stage,
// prompts_issued, responses, decision, confidence}], final_answer, outcome}.
std::string trace_to_json(const ReasoningTrace& trace);

// Thrown when a gateway failure aborts the pipeline mid-flight; carries
// everything recorded up to the failure.
class PipelineError : public Error {
public:
    PipelineError(const Error& cause, ReasoningTrace partial)
        : Error(cause.kind(), cause.message()), trace_(std::move(partial)) {}

    const ReasoningTrace& partial_trace() const noexcept { return trace_; }

private:
    ReasoningTrace trace_;
};

struct PipelineConfig {
    double intuition_threshold = 0.75;  // accept a direct or re-queried answer
    double reuse_threshold = 0.25;      // max embedding distance for method reuse
    std::size_t borrow_k = 3;           // methods borrowed in the last stage
    int max_stages = 4;                 // cut the pipeline short (1..4)
    // Stage-3 extension kinds in application order; any subset/permutation
    // of vertical, horizontal, temporal, spatial.
    std::vector<std::string> extension_order = {"vertical", "horizontal", "temporal", "spatial"};
    std::size_t horizontal_n = 2;  // neighbor cap for horizontal extensions
    // Temporal and spatial extensions need caller-known context; when left
    // empty those kinds are skipped without comment.
    std::vector<std::string> history;  // oldest first
    std::vector<std::string> future;   // nearest first
    std::string wider_context;
};

struct AnswerResult {
    std::string answer;
    ReasoningTrace trace;
};

// Runs the layered pipeline: direct intuition, then method reuse within
// the distance threshold, then scope extension with a re-query, then
// borrowing the nearest methods regardless of distance. Stops at the first
// accepted stage; records every attempted stage; updates method
// applicability on reuse and borrowing successes. Exhaustion yields
// outcome "unresolved" with the best-effort answer (the highest-confidence
// response seen, earliest on ties).
AnswerResult answer(const std::string& question, MethodStore& store, ModelGateway& gateway,
                    const PromptTemplates& templates, const PipelineConfig& config = {});

struct ActiveStepResult {
    std::vector<std::string> changes;
    std::string action;
};

// Difference-based prompting: exactly two gateway calls, always in this
// order — first identify the key changes between the states, then request
// an action conditioned on the goal and every identified change. A blank
// second reply means nothing needs doing ("maintain").
ActiveStepResult active_step(const std::string& goal, const std::string& previous_state,
                             const std::string& current_state, ModelGateway& gateway);

enum class StepChangeStrategy { Minimal, Partial, Complete };
std::string strategy_label(StepChangeStrategy strategy);
StepChangeStrategy strategy_from_label(const std::string& label);

enum class EvaluatorKind { Empirical, Predictive };
std::string evaluator_label(EvaluatorKind evaluator);

struct ImprovementCandidate {
    std::string base_method;
    StepChangeStrategy strategy = StepChangeStrategy::Minimal;
    std::vector<std::size_t> changed_steps;  // sorted, unique
    std::vector<std::string> new_steps;      // full step list after rewrite
    double score = 0.0;
    EvaluatorKind evaluator = EvaluatorKind::Predictive;
};

// Scores a candidate's revised steps empirically (e.g. a test harness
// pass-rate); must return a value in [0,1].
using EmpiricalEvaluator =
    std::function<double(const Method& method, const std::vector<std::string>& new_steps)>;

// Generates `trials` step-change candidates for the method. Strategy picks
// how many steps change per candidate: minimal exactly one, partial a
// seeded subset of size 1..count−1, complete all of them. Changed steps
// are rewritten through the gateway;
// scoring is predictive (gateway critique score) or empirical (callback).
// Results sorted by descending score, ties by ascending changed-step sets.
std::vector<ImprovementCandidate> improve_method(MethodStore& store, const std::string& method_id,
                                                 StepChangeStrategy strategy,
                                                 EvaluatorKind evaluator, std::size_t trials,
                                                 std::uint64_t seed, ModelGateway& gateway,
                                                 EmpiricalEvaluator empirical = nullptr);

// Whole-method critique from a fixed prompt listing every step in order.
// An empty reply is signaled as no-feedback (extension-empty).
std::string critique_method(const MethodStore& store, const std::string& method_id,
                            ModelGateway& gateway);

}  // namespace scopex
