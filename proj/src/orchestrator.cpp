#include "scopex/orchestrator.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <random>

#include <json.hpp>

#include "scopex/text.hpp"

namespace scopex {
namespace {

// Captures every prompt/response pair that passes through, so stage
// records can show exactly what was asked.
class TapGateway : public ModelGateway {
public:
    TapGateway(ModelGateway& inner, std::vector<std::string>& prompts,
               std::vector<std::string>& responses)
        : inner_(inner), prompts_(prompts), responses_(responses) {}

    GenerationResult generate(const GenerationRequest& request) override {
        prompts_.push_back(request.prompt);
        try {
            const GenerationResult result = inner_.generate(request);
            responses_.push_back(result.text);
            return result;
        } catch (...) {
            // Keep prompts and responses the same length even when the
            // call fails; the aborting stage record stays well-formed.
            responses_.push_back("");
            throw;
        }
    }

    std::vector<double> embed(const std::string& text) override { return inner_.embed(text); }

    Distribution candidate_distribution(const std::string& prompt,
                                        const std::vector<std::string>& candidates) override {
        return inner_.candidate_distribution(prompt, candidates);
    }

private:
    ModelGateway& inner_;
    std::vector<std::string>& prompts_;
    std::vector<std::string>& responses_;
};

std::string numbered_steps(const std::vector<std::string>& steps) {
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        out += "  " + std::to_string(i + 1) + ". " + steps[i] + "\n";
    }
    return out;
}

std::string reuse_prompt(const Method& method, const std::string& question) {
    return "Reuse the following method to answer the question.\nMethod question: " +
           method.question + "\nMethod steps:\n" + numbered_steps(method.steps) +
           "Question: " + question + "\nAnswer:";
}

std::string borrow_prompt(const std::vector<Method>& methods,
                          const std::vector<RetrievalHit>& hits, const std::string& question) {
    std::string out = "Answer the question using the borrowed methods below as guidance.\n";
    for (std::size_t i = 0; i < methods.size(); ++i) {
        out += "Borrowed method (distance " + fmt_double(hits[i].distance) + "):\n";
        out += "  Question: " + methods[i].question + "\n";
        out += "  Steps:\n";
        for (const auto& step : methods[i].steps) out += "    - " + step + "\n";
    }
    out += "Question: " + question + "\nAnswer:";
    return out;
}

// Gateway failures abort the pipeline; whatever the current stage already
// captured is preserved in the partial trace.
[[noreturn]] void abort_pipeline(const Error& cause, ReasoningTrace trace, StageRecord current) {
    current.decision = "aborted: " + std::string(cause.what());
    trace.stages.push_back(std::move(current));
    trace.outcome = Outcome::Unresolved;
    throw PipelineError(cause, std::move(trace));
}

// Uniform integer in [0, n) from raw engine output, bit-stable across
// platforms (std::uniform_int_distribution is not).
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    while (true) {
        const std::uint64_t x = rng();
        if (x < limit) return x % n;
    }
}

std::vector<std::size_t> draw_changed_steps(StepChangeStrategy strategy, std::size_t step_count,
                                            std::mt19937_64& rng) {
    std::vector<std::size_t> indices;
    switch (strategy) {
        case StepChangeStrategy::Minimal:
            indices.push_back(static_cast<std::size_t>(bounded(rng, step_count)));
            break;
        case StepChangeStrategy::Partial: {
            const std::size_t size = 1 + static_cast<std::size_t>(bounded(rng, step_count - 1));
            std::vector<std::size_t> all(step_count);
            for (std::size_t i = 0; i < step_count; ++i) all[i] = i;
            for (std::size_t i = 0; i < size; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(bounded(rng, step_count - i));
                std::swap(all[i], all[j]);
            }
            indices.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(size));
            break;
        }
        case StepChangeStrategy::Complete:
            for (std::size_t i = 0; i < step_count; ++i) indices.push_back(i);
            break;
    }
    std::sort(indices.begin(), indices.end());
    return indices;
}

// First float token in the reply, for predictive scores.
std::optional<double> parse_leading_float(const std::string& text) {
    const char* p = text.c_str();
    const char* end = p + text.size();
    while (p < end) {
        if (std::isdigit(static_cast<unsigned char>(*p)) ||
            (*p == '.' && p + 1 < end && std::isdigit(static_cast<unsigned char>(p[1])))) {
            try {
                return std::stod(std::string(p, end));
            } catch (const std::exception&) {
                return std::nullopt;
            }
        }
        ++p;
    }
    return std::nullopt;
}

}  // namespace

std::string stage_label(Stage stage) {
    switch (stage) {
        case Stage::Intuition: return "intuition";
        case Stage::MethodReuse: return "method-reuse";
        case Stage::ScopeExtension: return "scope-extension";
        case Stage::Borrowing: return "borrowing";
    }
    return "intuition";
}

std::string outcome_label(Outcome outcome) {
    switch (outcome) {
        case Outcome::Intuition: return "intuition";
        case Outcome::MethodReuse: return "method-reuse";
        case Outcome::ScopeExtended: return "scope-extended";
        case Outcome::Borrowed: return "borrowed";
        case Outcome::Unresolved: return "unresolved";
    }
    return "unresolved";
}

std::string trace_to_json(const ReasoningTrace& trace) {
    nlohmann::json doc;
    doc["question"] = trace.question;
    doc["final_answer"] = trace.final_answer;
    doc["outcome"] = outcome_label(trace.outcome);
    doc["stages"] = nlohmann::json::array();
    for (const auto& record : trace.stages) {
        doc["stages"].push_back({{"stage", stage_label(record.stage)},
                                 {"prompts_issued", record.prompts_issued},
                                 {"responses", record.responses},
                                 {"decision", record.decision},
                                 {"confidence", record.confidence}});
    }
    return doc.dump(2);
}

AnswerResult answer(const std::string& question, MethodStore& store, ModelGateway& gateway,
                    const PromptTemplates& templates, const PipelineConfig& config) {
    if (normalize(question).empty()) {
        throw Error(ErrorKind::InvalidInput, "question must be non-empty");
    }
    if (config.max_stages < 1 || config.max_stages > 4) {
        throw Error(ErrorKind::ConfigError, "max_stages must lie in 1..4");
    }
    for (const auto& kind : config.extension_order) {
        if (kind != "vertical" && kind != "horizontal" && kind != "temporal" &&
            kind != "spatial") {
            throw Error(ErrorKind::ConfigError,
                        "unsupported stage-3 extension kind \"" + kind + "\"");
        }
    }

    ReasoningTrace trace;
    trace.question = question;
    const std::string question_id = text_key(question);

    // Best-effort fallback: the strongest actual answer seen anywhere.
    double best_confidence = -1.0;
    std::string best_answer;
    auto consider = [&](const GenerationResult& result) {
        if (result.confidence > best_confidence) {
            best_confidence = result.confidence;
            best_answer = result.text;
        }
    };
    auto finish = [&](Outcome outcome, std::string final_answer) {
        trace.outcome = outcome;
        trace.final_answer = std::move(final_answer);
        return AnswerResult{trace.final_answer, trace};
    };

    // Stage 1 — intuition: the question goes to the model verbatim.
    {
        StageRecord record;
        record.stage = Stage::Intuition;
        TapGateway tap(gateway, record.prompts_issued, record.responses);
        GenerationResult direct;
        try {
            direct = tap.generate(GenerationRequest{question});
        } catch (const Error& e) {
            abort_pipeline(e, std::move(trace), std::move(record));
        }
        consider(direct);
        record.confidence = direct.confidence;
        const bool accepted = direct.confidence >= config.intuition_threshold;
        record.decision = "confidence " + fmt_double(direct.confidence) +
                          (accepted ? " >= " : " < ") + "threshold " +
                          fmt_double(config.intuition_threshold);
        trace.stages.push_back(std::move(record));
        if (accepted) return finish(Outcome::Intuition, direct.text);
    }
    if (config.max_stages < 2) return finish(Outcome::Unresolved, best_answer);

    // Stage 2 — method reuse: accept before querying, purely by distance.
    {
        StageRecord record;
        record.stage = Stage::MethodReuse;
        TapGateway tap(gateway, record.prompts_issued, record.responses);
        std::vector<RetrievalHit> hits;
        try {
            hits = store.retrieve_nearest(question, 1, gateway);
        } catch (const Error& e) {
            abort_pipeline(e, std::move(trace), std::move(record));
        }
        if (hits.empty()) {
            record.decision = "no stored methods";
            trace.stages.push_back(std::move(record));
        } else if (hits.front().distance > config.reuse_threshold) {
            record.decision = "best method " + hits.front().method_id + " at distance " +
                              fmt_double(hits.front().distance) + " > threshold " +
                              fmt_double(config.reuse_threshold);
            trace.stages.push_back(std::move(record));
        } else {
            const Method method = *store.find(hits.front().method_id);
            GenerationResult applied;
            try {
                applied = tap.generate(GenerationRequest{reuse_prompt(method, question)});
            } catch (const Error& e) {
                abort_pipeline(e, std::move(trace), std::move(record));
            }
            consider(applied);
            record.confidence = applied.confidence;
            record.decision = "reused method " + method.id + " at distance " +
                              fmt_double(hits.front().distance) + " <= threshold " +
                              fmt_double(config.reuse_threshold);
            trace.stages.push_back(std::move(record));
            store.record_applicability(method.id, question_id);
            return finish(Outcome::MethodReuse, applied.text);
        }
    }
    if (config.max_stages < 3) return finish(Outcome::Unresolved, best_answer);

    // Stage 3 — scope extension: widen the question, then ask again with
    // the composed text exactly as the prompt.
    ExtendedQuestion extended;
    bool has_extensions = false;
    {
        StageRecord record;
        record.stage = Stage::ScopeExtension;
        TapGateway tap(gateway, record.prompts_issued, record.responses);
        std::vector<Extension> extensions;
        std::vector<std::string> notes;
        for (const auto& kind : config.extension_order) {
            try {
                if (kind == "vertical") {
                    extensions.push_back(extend_vertical(question, tap, templates));
                } else if (kind == "horizontal") {
                    extensions.push_back(
                        extend_horizontal(question, tap, templates, config.horizontal_n));
                } else if (kind == "temporal") {
                    if (config.history.empty() && config.future.empty()) continue;
                    extensions.push_back(extend_temporal(question, config.history, config.future));
                } else if (kind == "spatial") {
                    if (trim(config.wider_context).empty()) continue;
                    extensions.push_back(extend_spatial(question, config.wider_context));
                }
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::ExtensionEmpty) {
                    notes.push_back(kind + " extension empty");
                    continue;
                }
                abort_pipeline(e, std::move(trace), std::move(record));
            }
        }
        std::string note_text;
        for (const auto& note : notes) note_text += "; " + note;
        if (extensions.empty()) {
            record.decision = "no extensions produced" + note_text;
            trace.stages.push_back(std::move(record));
        } else {
            extended = compose(question, extensions);
            has_extensions = true;
            std::string kinds;
            for (std::size_t i = 0; i < extensions.size(); ++i) {
                kinds += (i ? ", " : "") + extensions[i].kind.label();
            }
            GenerationResult requery;
            try {
                requery = tap.generate(GenerationRequest{extended.composed});
            } catch (const Error& e) {
                abort_pipeline(e, std::move(trace), std::move(record));
            }
            consider(requery);
            record.confidence = requery.confidence;
            const bool accepted = requery.confidence >= config.intuition_threshold;
            record.decision = "applied " + std::to_string(extensions.size()) + " extensions (" +
                              kinds + ")" + note_text + "; re-query confidence " +
                              fmt_double(requery.confidence) + (accepted ? " >= " : " < ") +
                              "threshold " + fmt_double(config.intuition_threshold);
            trace.stages.push_back(std::move(record));
            if (accepted) return finish(Outcome::ScopeExtended, requery.text);
        }
    }
    if (config.max_stages < 4) return finish(Outcome::Unresolved, best_answer);

    // Stage 4 — borrowing: nearest methods regardless of the reuse
    // threshold, measured on the extended representation when one exists.
    {
        StageRecord record;
        record.stage = Stage::Borrowing;
        TapGateway tap(gateway, record.prompts_issued, record.responses);
        const std::string& target = has_extensions ? extended.composed : question;
        const std::string embedding_note =
            has_extensions ? "embedding: extended" : "embedding: original";
        std::vector<RetrievalHit> hits;
        try {
            hits = store.retrieve_nearest(target, config.borrow_k, gateway, std::nullopt,
                                          has_extensions
                                              ? RetrievalHit::MatchedOn::ExtendedQuestion
                                              : RetrievalHit::MatchedOn::OriginalQuestion);
        } catch (const Error& e) {
            abort_pipeline(e, std::move(trace), std::move(record));
        }
        if (hits.empty()) {
            record.decision = "no methods to borrow; " + embedding_note;
            trace.stages.push_back(std::move(record));
        } else {
            std::vector<Method> methods;
            methods.reserve(hits.size());
            std::string ids;
            for (const auto& hit : hits) {
                methods.push_back(*store.find(hit.method_id));
                ids += (ids.empty() ? "" : ", ") + hit.method_id;
            }
            GenerationResult borrowed;
            try {
                borrowed = tap.generate(GenerationRequest{borrow_prompt(methods, hits, target)});
            } catch (const Error& e) {
                abort_pipeline(e, std::move(trace), std::move(record));
            }
            consider(borrowed);
            record.confidence = borrowed.confidence;
            const bool accepted = borrowed.confidence >= config.intuition_threshold;
            record.decision = "borrowed " + std::to_string(hits.size()) + " methods (" + ids +
                              "); " + embedding_note + "; confidence " +
                              fmt_double(borrowed.confidence) + (accepted ? " >= " : " < ") +
                              "threshold " + fmt_double(config.intuition_threshold);
            trace.stages.push_back(std::move(record));
            if (accepted) {
                for (const auto& hit : hits) {
                    store.record_applicability(hit.method_id, question_id);
                }
                return finish(Outcome::Borrowed, borrowed.text);
            }
        }
    }

    return finish(Outcome::Unresolved, best_answer);
}

ActiveStepResult active_step(const std::string& goal, const std::string& previous_state,
                             const std::string& current_state, ModelGateway& gateway) {
    if (normalize(goal).empty()) {
        throw Error(ErrorKind::InvalidInput, "goal must be non-empty");
    }
    const std::string change_prompt =
        "Identify the key temporal or spatial changes between the states.\nGoal: " + goal +
        "\nPrevious state: " + previous_state + "\nCurrent state: " + current_state +
        "\nList one change per line.";
    GenerationResult change_reply;
    try {
        change_reply = gateway.generate(GenerationRequest{change_prompt});
    } catch (const Error& e) {
        throw Error(ErrorKind::GatewayError,
                    "change-identification call failed: " + std::string(e.what()));
    }
    ActiveStepResult result;
    result.changes = split_lines(change_reply.text);

    std::string solution_prompt = "Decide the next action toward the goal, focusing on the key changes.\nGoal: " +
                                  goal + "\nKey changes:\n";
    for (const auto& change : result.changes) solution_prompt += change + "\n";
    solution_prompt += "Action:";
    GenerationResult action_reply;
    try {
        action_reply = gateway.generate(GenerationRequest{solution_prompt});
    } catch (const Error& e) {
        throw Error(ErrorKind::GatewayError, "solution call failed: " + std::string(e.what()));
    }
    result.action = trim(action_reply.text);
    if (result.action.empty()) result.action = "maintain";
    return result;
}

std::string strategy_label(StepChangeStrategy strategy) {
    switch (strategy) {
        case StepChangeStrategy::Minimal: return "minimal";
        case StepChangeStrategy::Partial: return "partial";
        case StepChangeStrategy::Complete: return "complete";
    }
    return "minimal";
}

StepChangeStrategy strategy_from_label(const std::string& label) {
    if (label == "minimal") return StepChangeStrategy::Minimal;
    if (label == "partial") return StepChangeStrategy::Partial;
    if (label == "complete") return StepChangeStrategy::Complete;
    throw Error(ErrorKind::InvalidStrategy, "unknown step-change strategy: " + label);
}

std::string evaluator_label(EvaluatorKind evaluator) {
    return evaluator == EvaluatorKind::Empirical ? "empirical" : "predictive";
}

std::vector<ImprovementCandidate> improve_method(MethodStore& store, const std::string& method_id,
                                                 StepChangeStrategy strategy,
                                                 EvaluatorKind evaluator, std::size_t trials,
                                                 std::uint64_t seed, ModelGateway& gateway,
                                                 EmpiricalEvaluator empirical) {
    const std::optional<Method> method = store.find(method_id);
    if (!method) {
        throw Error(ErrorKind::NotFound, "no method with id " + method_id);
    }
    const std::size_t step_count = method->steps.size();
    if (strategy == StepChangeStrategy::Partial && step_count < 2) {
        throw Error(ErrorKind::InvalidStrategy,
                    "partial step change needs a method with at least 2 steps");
    }
    if (trials == 0) {
        throw Error(ErrorKind::InvalidInput, "improvement needs at least one trial");
    }
    if (evaluator == EvaluatorKind::Empirical && !empirical) {
        throw Error(ErrorKind::InvalidInput, "empirical evaluation needs a callback");
    }

    std::mt19937_64 rng(seed);
    std::vector<ImprovementCandidate> candidates;
    candidates.reserve(trials);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        ImprovementCandidate candidate;
        candidate.base_method = method->id;
        candidate.strategy = strategy;
        candidate.evaluator = evaluator;
        candidate.changed_steps = draw_changed_steps(strategy, step_count, rng);
        candidate.new_steps = method->steps;
        for (const std::size_t index : candidate.changed_steps) {
            const std::string prompt = "Rewrite step " + std::to_string(index + 1) +
                                       " of the method to improve it.\nMethod question: " +
                                       method->question + "\nStep: " + method->steps[index] +
                                       "\nRewritten step:";
            const GenerationResult rewritten = gateway.generate(GenerationRequest{prompt});
            const std::string text = trim(rewritten.text);
            if (text.empty()) {
                throw Error(ErrorKind::GatewayError,
                            "step rewrite returned empty text for step " +
                                std::to_string(index + 1));
            }
            candidate.new_steps[index] = text;
        }
        if (evaluator == EvaluatorKind::Predictive) {
            const std::string prompt =
                "Score from 0 to 1 how much the revised steps improve the method.\n"
                "Method question: " + method->question + "\nOriginal steps:\n" +
                numbered_steps(method->steps) + "Revised steps:\n" +
                numbered_steps(candidate.new_steps) + "Score:";
            const GenerationResult reply = gateway.generate(GenerationRequest{prompt});
            const std::optional<double> score = parse_leading_float(reply.text);
            if (!score) {
                throw Error(ErrorKind::GatewayError,
                            "improvement score is not a number: " + trim(reply.text));
            }
            candidate.score = std::clamp(*score, 0.0, 1.0);
        } else {
            candidate.score = std::clamp(empirical(*method, candidate.new_steps), 0.0, 1.0);
        }
        candidates.push_back(std::move(candidate));
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const ImprovementCandidate& a, const ImprovementCandidate& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.changed_steps < b.changed_steps;
              });
    return candidates;
}

std::string critique_method(const MethodStore& store, const std::string& method_id,
                            ModelGateway& gateway) {
    const std::optional<Method> method = store.find(method_id);
    if (!method) {
        throw Error(ErrorKind::NotFound, "no method with id " + method_id);
    }
    const std::string prompt = "Critique this method as a whole.\nQuestion: " + method->question +
                               "\nSteps:\n" + numbered_steps(method->steps) + "Critique:";
    const GenerationResult reply = gateway.generate(GenerationRequest{prompt});
    const std::string critique = trim(reply.text);
    if (critique.empty()) {
        throw Error(ErrorKind::ExtensionEmpty, "no-feedback: the critique came back empty");
    }
    return critique;
}

}  // namespace scopex
