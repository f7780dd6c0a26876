#pragma once

#include <map>
#include <string>
#include <vector>

#include "scopex/entropy.hpp"
#include "scopex/gateway.hpp"
#include "scopex/method_store.hpp"

namespace scopex {

// Kind of scope widening applied to a question. The six built-in kinds are
// closed; additional kinds are open-ended and carried by name.
struct ExtensionKind {
    enum class Tag { Vertical, Horizontal, Generalization, Temporal, Spatial, Scatter, Dynamic };
    Tag tag = Tag::Vertical;
    std::string name;  // set only for Tag::Dynamic

    std::string label() const;  // "vertical", ..., "dynamic:<name>"
    static ExtensionKind vertical();
    static ExtensionKind horizontal();
    static ExtensionKind generalization();
    static ExtensionKind temporal();
    static ExtensionKind spatial();
    static ExtensionKind scatter();
    static ExtensionKind dynamic(std::string name);
    static ExtensionKind from_label(std::string_view label);  // parse-error on unknown

    bool operator==(const ExtensionKind&) const = default;
};

// One applied scope extension: added context fragments anchored to the
// question they widen. `weight` is a contribution placeholder (1.0 at
// creation); the entropy metrics reassign it from coverage.
struct Extension {
    ExtensionKind kind;
    std::string anchor;  // question id the extension widens
    std::vector<std::string> payload;
    double weight = 1.0;
    enum class Source { ModelGenerated, UserSupplied };
    Source source = Source::ModelGenerated;

    // Deterministic content hash over kind, anchor, and payload.
    std::string id() const;
};

std::string source_label(Extension::Source source);

// A question together with the extensions applied to it. `composed` embeds
// every payload after the original text, and the original is always a
// strict prefix once any extension is applied.
struct ExtendedQuestion {
    std::string original;
    std::vector<Extension> fragments;
    std::string composed;
};

// Prompt templates for the generating operators, loaded from a JSON map
// {"vertical": ..., "horizontal": ..., "generalize": ..., "scatter": ...,
//  "predict_future": ...}. Placeholders use {name} syntax.
class PromptTemplates {
public:
    PromptTemplates() = default;
    explicit PromptTemplates(std::map<std::string, std::string> templates);
    static PromptTemplates from_file(const std::string& path);

    // Renders the template under `key`; config-error when absent.
    std::string render(const std::string& key,
                       const std::map<std::string, std::string>& vars) const;

private:
    std::map<std::string, std::string> templates_;
};

// --- extension operators -------------------------------------------------

// Asks the gateway for underlying causes of the question; one payload
// fragment per non-empty response line.
Extension extend_vertical(const std::string& question, ModelGateway& gateway,
                          const PromptTemplates& templates);

// Wraps caller-provided causes without touching the gateway.
Extension vertical_from_user(const std::string& question, std::vector<std::string> causes);

// Asks for parallel/neighboring questions, keeping at most `n`.
Extension extend_horizontal(const std::string& question, ModelGateway& gateway,
                            const PromptTemplates& templates, std::size_t n);

struct GeneralizationResult {
    std::string generalized_question;
    // Methods that were applicable to the original question; each has been
    // registered applicable to the generalized question as well, so the
    // original's method set is contained in the generalized one's.
    std::vector<std::string> containment_report;
};

// Produces a broader form of the question and pushes the original's method
// applicability up to it. no-generalization when the gateway returns the
// question unchanged (after normalization).
GeneralizationResult generalize(const std::string& question, ModelGateway& gateway,
                                const PromptTemplates& templates, MethodStore& store);

Extension generalization_to_extension(const std::string& question,
                                      const std::string& generalized_question);

// Widens the input along time. `history` is oldest-first, `future` is
// nearest-first; fragments carry past[k]/future[k] labels where k counts
// steps away from the present.
Extension extend_temporal(const std::string& input, const std::vector<std::string>& history,
                          const std::vector<std::string>& future);

// Explicitly asks the gateway for predicted future states (nearest first).
// The temporal operator itself never invents a future.
std::vector<std::string> predict_future(const std::string& input, ModelGateway& gateway,
                                        const PromptTemplates& templates);

// Widens the input along space: the composed question strictly contains
// the original plus the wider context.
Extension extend_spatial(const std::string& input, const std::string& wider_context);

enum class ScatterVerdictKind { Applicable, NotApplicable };
std::string verdict_label(ScatterVerdictKind verdict);

struct ScatterVerdict {
    std::string stage;
    ScatterVerdictKind verdict = ScatterVerdictKind::NotApplicable;
    std::string rationale;
};

// Predictively evaluates whether an optimization that held at source_stage
// transfers to each other stage. Stages are deduplicated, the source stage
// is skipped, and verdicts come back in input order. The per-stage gateway
// calls run concurrently.
std::vector<ScatterVerdict> scatter(const std::string& optimization,
                                    const std::string& source_stage,
                                    const std::vector<std::string>& stages, ModelGateway& gateway,
                                    const PromptTemplates& templates);

// Wraps the applicable stages of a scatter evaluation as an extension.
Extension scatter_to_extension(const std::string& optimization,
                               const std::vector<ScatterVerdict>& verdicts);

// --- composition ---------------------------------------------------------

// composed = original, then for each extension "\n---\n[[kind]] " followed
// by its payload fragments joined with newlines. Associative; the empty
// extension list is the identity.
ExtendedQuestion compose(const std::string& original, const std::vector<Extension>& extensions);

// Inverse of compose over its output format; parse-error on malformed text.
ExtendedQuestion parse_composed(const std::string& composed);

// Weights an extension list by novel coverage of their ids (see entropy).
Distribution extension_weights(const std::vector<Extension>& extensions,
                               const CoverageMap& coverage);

// --- common/dynamic kind registry ----------------------------------------

// Tracks which extension kinds are routinely applied ("common") versus
// situational ("dynamic"). A dynamic kind used promotion_threshold times
// moves to the common list atomically.
class ExtensionRegistry {
public:
    // Starts with the six built-in kinds common and no dynamic kinds.
    ExtensionRegistry();
    ExtensionRegistry(std::vector<std::string> common, std::map<std::string, int> dynamic,
                      int promotion_threshold);

    static ExtensionRegistry load(const std::string& path);
    void save(const std::string& path) const;

    // Adds a situational kind; already-common when the name is in the
    // common list, no-op when already registered dynamic.
    void register_dynamic(const std::string& kind_name);

    // Counts one use of a dynamic kind, promoting it to common at the
    // threshold. No-op for common kinds; not-found for unregistered names.
    void note_usage(const std::string& kind_name);

    bool is_common(const std::string& kind_name) const;
    const std::vector<std::string>& common() const { return common_; }
    const std::map<std::string, int>& dynamic_counts() const { return dynamic_; }
    int promotion_threshold() const { return threshold_; }

private:
    std::vector<std::string> common_;
    std::map<std::string, int> dynamic_;
    int threshold_;
};

}  // namespace scopex
