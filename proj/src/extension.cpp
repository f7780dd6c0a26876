#include "scopex/extension.hpp"

#include <algorithm>
#include <fstream>
#include <future>

#include <json.hpp>

#include "scopex/text.hpp"

namespace scopex {
namespace {

constexpr const char* kSeparator = "\n---\n";

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(sep);
        out += parts[i];
    }
    return out;
}

void require_question(const std::string& question) {
    if (normalize(question).empty()) {
        throw Error(ErrorKind::InvalidInput, "question must be non-empty");
    }
}

std::vector<std::string> generated_lines(const std::string& prompt, ModelGateway& gateway) {
    const GenerationResult result = gateway.generate(GenerationRequest{prompt});
    return split_lines(result.text);
}

}  // namespace

std::string ExtensionKind::label() const {
    switch (tag) {
        case Tag::Vertical: return "vertical";
        case Tag::Horizontal: return "horizontal";
        case Tag::Generalization: return "generalization";
        case Tag::Temporal: return "temporal";
        case Tag::Spatial: return "spatial";
        case Tag::Scatter: return "scatter";
        case Tag::Dynamic: return "dynamic:" + name;
    }
    return "vertical";
}

ExtensionKind ExtensionKind::vertical() { return {Tag::Vertical, {}}; }
ExtensionKind ExtensionKind::horizontal() { return {Tag::Horizontal, {}}; }
ExtensionKind ExtensionKind::generalization() { return {Tag::Generalization, {}}; }
ExtensionKind ExtensionKind::temporal() { return {Tag::Temporal, {}}; }
ExtensionKind ExtensionKind::spatial() { return {Tag::Spatial, {}}; }
ExtensionKind ExtensionKind::scatter() { return {Tag::Scatter, {}}; }

ExtensionKind ExtensionKind::dynamic(std::string name) {
    if (trim(name).empty()) {
        throw Error(ErrorKind::InvalidInput, "dynamic extension kind needs a name");
    }
    return {Tag::Dynamic, std::move(name)};
}

ExtensionKind ExtensionKind::from_label(std::string_view label) {
    if (label == "vertical") return vertical();
    if (label == "horizontal") return horizontal();
    if (label == "generalization") return generalization();
    if (label == "temporal") return temporal();
    if (label == "spatial") return spatial();
    if (label == "scatter") return scatter();
    if (label.rfind("dynamic:", 0) == 0) {
        return dynamic(std::string(label.substr(8)));
    }
    throw Error(ErrorKind::ParseError, "unknown extension kind: " + std::string(label));
}

std::string Extension::id() const {
    std::string blob = kind.label();
    blob.push_back('\x1f');
    blob += anchor;
    for (const auto& fragment : payload) {
        blob.push_back('\x1e');
        blob += fragment;
    }
    return hex64(fnv1a64(blob));
}

std::string source_label(Extension::Source source) {
    return source == Extension::Source::ModelGenerated ? "model-generated" : "user-supplied";
}

PromptTemplates::PromptTemplates(std::map<std::string, std::string> templates)
    : templates_(std::move(templates)) {}

PromptTemplates PromptTemplates::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open prompt templates: " + path);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, "prompt templates are not valid JSON: " + std::string(e.what()));
    }
    if (!doc.is_object()) {
        throw Error(ErrorKind::ConfigError, "prompt templates must be a JSON object");
    }
    std::map<std::string, std::string> templates;
    for (const auto& [key, value] : doc.items()) {
        if (!value.is_string()) {
            throw Error(ErrorKind::ConfigError, "prompt template \"" + key + "\" must be a string");
        }
        templates[key] = value.get<std::string>();
    }
    return PromptTemplates(std::move(templates));
}

std::string PromptTemplates::render(const std::string& key,
                                    const std::map<std::string, std::string>& vars) const {
    auto it = templates_.find(key);
    if (it == templates_.end()) {
        throw Error(ErrorKind::ConfigError, "no prompt template named \"" + key + "\"");
    }
    return render_placeholders(it->second, vars);
}

Extension extend_vertical(const std::string& question, ModelGateway& gateway,
                          const PromptTemplates& templates) {
    require_question(question);
    const std::string prompt = templates.render("vertical", {{"question", question}});
    std::vector<std::string> causes = generated_lines(prompt, gateway);
    if (causes.empty()) {
        throw Error(ErrorKind::ExtensionEmpty, "gateway produced no causes for the question");
    }
    return Extension{ExtensionKind::vertical(), text_key(question), std::move(causes), 1.0,
                     Extension::Source::ModelGenerated};
}

Extension vertical_from_user(const std::string& question, std::vector<std::string> causes) {
    require_question(question);
    if (causes.empty()) {
        throw Error(ErrorKind::ExtensionEmpty, "no causes supplied");
    }
    return Extension{ExtensionKind::vertical(), text_key(question), std::move(causes), 1.0,
                     Extension::Source::UserSupplied};
}

Extension extend_horizontal(const std::string& question, ModelGateway& gateway,
                            const PromptTemplates& templates, std::size_t n) {
    require_question(question);
    if (n == 0) {
        throw Error(ErrorKind::InvalidInput, "horizontal extension needs n >= 1");
    }
    const std::string prompt =
        templates.render("horizontal", {{"question", question}, {"n", std::to_string(n)}});
    std::vector<std::string> neighbors = generated_lines(prompt, gateway);
    if (neighbors.empty()) {
        throw Error(ErrorKind::ExtensionEmpty, "gateway produced no neighboring questions");
    }
    if (neighbors.size() > n) neighbors.resize(n);
    return Extension{ExtensionKind::horizontal(), text_key(question), std::move(neighbors), 1.0,
                     Extension::Source::ModelGenerated};
}

GeneralizationResult generalize(const std::string& question, ModelGateway& gateway,
                                const PromptTemplates& templates, MethodStore& store) {
    require_question(question);
    const std::string prompt = templates.render("generalize", {{"question", question}});
    const GenerationResult result = gateway.generate(GenerationRequest{prompt});
    const std::string generalized = trim(result.text);
    if (generalized.empty()) {
        throw Error(ErrorKind::ExtensionEmpty, "gateway produced no generalized question");
    }
    if (normalize(generalized) == normalize(question)) {
        throw Error(ErrorKind::NoGeneralization, "generalization left the question unchanged");
    }
    GeneralizationResult out;
    out.generalized_question = generalized;
    // Everything known to solve the original must also be recorded against
    // the broader question; this is what makes the containment hold.
    out.containment_report = store.methods_applicable_to(text_key(question));
    const std::string generalized_id = text_key(generalized);
    for (const auto& method_id : out.containment_report) {
        store.record_applicability(method_id, generalized_id);
    }
    return out;
}

Extension generalization_to_extension(const std::string& question,
                                      const std::string& generalized_question) {
    require_question(question);
    if (trim(generalized_question).empty()) {
        throw Error(ErrorKind::ExtensionEmpty, "generalized question is empty");
    }
    return Extension{ExtensionKind::generalization(), text_key(question),
                     {trim(generalized_question)}, 1.0, Extension::Source::ModelGenerated};
}

Extension extend_temporal(const std::string& input, const std::vector<std::string>& history,
                          const std::vector<std::string>& future) {
    require_question(input);
    if (history.empty() && future.empty()) {
        throw Error(ErrorKind::ExtensionEmpty, "temporal extension needs history or future states");
    }
    std::vector<std::string> payload;
    payload.reserve(history.size() + future.size());
    // history[0] is the oldest state, so it sits furthest from the present.
    for (std::size_t i = 0; i < history.size(); ++i) {
        payload.push_back("past[" + std::to_string(history.size() - i) + "]: " + history[i]);
    }
    for (std::size_t i = 0; i < future.size(); ++i) {
        payload.push_back("future[" + std::to_string(i + 1) + "]: " + future[i]);
    }
    return Extension{ExtensionKind::temporal(), text_key(input), std::move(payload), 1.0,
                     Extension::Source::UserSupplied};
}

std::vector<std::string> predict_future(const std::string& input, ModelGateway& gateway,
                                        const PromptTemplates& templates) {
    require_question(input);
    const std::string prompt = templates.render("predict_future", {{"input", input}});
    std::vector<std::string> states = generated_lines(prompt, gateway);
    if (states.empty()) {
        throw Error(ErrorKind::ExtensionEmpty, "gateway predicted no future states");
    }
    return states;
}

Extension extend_spatial(const std::string& input, const std::string& wider_context) {
    require_question(input);
    if (trim(wider_context).empty()) {
        throw Error(ErrorKind::ExtensionEmpty, "spatial extension needs a wider context");
    }
    return Extension{ExtensionKind::spatial(), text_key(input), {trim(wider_context)}, 1.0,
                     Extension::Source::UserSupplied};
}

std::string verdict_label(ScatterVerdictKind verdict) {
    return verdict == ScatterVerdictKind::Applicable ? "applicable" : "not-applicable";
}

std::vector<ScatterVerdict> scatter(const std::string& optimization,
                                    const std::string& source_stage,
                                    const std::vector<std::string>& stages, ModelGateway& gateway,
                                    const PromptTemplates& templates) {
    if (trim(optimization).empty()) {
        throw Error(ErrorKind::InvalidInput, "scatter needs a non-empty optimization");
    }
    if (stages.empty()) {
        throw Error(ErrorKind::InvalidInput, "scatter needs at least one target stage");
    }
    // Deduplicate by normalized name, keep first spellings, drop the source.
    std::vector<std::string> targets;
    {
        std::vector<std::string> seen;
        const std::string source_norm = normalize(source_stage);
        for (const auto& stage : stages) {
            const std::string norm = normalize(stage);
            if (norm == source_norm) continue;
            if (std::find(seen.begin(), seen.end(), norm) != seen.end()) continue;
            seen.push_back(norm);
            targets.push_back(stage);
        }
    }
    std::vector<std::future<GenerationResult>> calls;
    calls.reserve(targets.size());
    for (const auto& stage : targets) {
        const std::string prompt = templates.render("scatter", {{"optimization", optimization},
                                                                {"source_stage", source_stage},
                                                                {"stage", stage}});
        calls.push_back(std::async(std::launch::async, [prompt, &gateway] {
            return gateway.generate(GenerationRequest{prompt});
        }));
    }
    std::vector<ScatterVerdict> verdicts;
    verdicts.reserve(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        GenerationResult result;
        try {
            result = calls[i].get();
        } catch (const Error& e) {
            throw Error(ErrorKind::GatewayError,
                        "scatter evaluation failed at stage \"" + targets[i] + "\": " + e.what());
        }
        const std::string reply = normalize(result.text);
        ScatterVerdict verdict;
        verdict.stage = targets[i];
        verdict.rationale = trim(result.text);
        if (reply.rfind("not-applicable", 0) == 0) {
            verdict.verdict = ScatterVerdictKind::NotApplicable;
        } else if (reply.rfind("applicable", 0) == 0) {
            verdict.verdict = ScatterVerdictKind::Applicable;
        } else {
            throw Error(ErrorKind::GatewayError, "unparseable scatter verdict for stage \"" +
                                                     targets[i] + "\": " + trim(result.text));
        }
        verdicts.push_back(std::move(verdict));
    }
    return verdicts;
}

Extension scatter_to_extension(const std::string& optimization,
                               const std::vector<ScatterVerdict>& verdicts) {
    std::vector<std::string> applicable;
    for (const auto& verdict : verdicts) {
        if (verdict.verdict == ScatterVerdictKind::Applicable) {
            applicable.push_back(verdict.stage);
        }
    }
    if (applicable.empty()) {
        throw Error(ErrorKind::ExtensionEmpty, "optimization transferred to no stage");
    }
    return Extension{ExtensionKind::scatter(), text_key(optimization), std::move(applicable), 1.0,
                     Extension::Source::ModelGenerated};
}

ExtendedQuestion compose(const std::string& original, const std::vector<Extension>& extensions) {
    ExtendedQuestion out;
    out.original = original;
    out.fragments = extensions;
    out.composed = original;
    for (const auto& extension : extensions) {
        if (extension.payload.empty()) {
            throw Error(ErrorKind::InvalidInput, "cannot compose an extension with empty payload");
        }
        out.composed += kSeparator;
        out.composed += "[[" + extension.kind.label() + "]] ";
        out.composed += join(extension.payload, '\n');
    }
    return out;
}

ExtendedQuestion parse_composed(const std::string& composed) {
    ExtendedQuestion out;
    const std::string separator = kSeparator;
    std::vector<std::string> sections;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = composed.find(separator, start);
        if (pos == std::string::npos) {
            sections.push_back(composed.substr(start));
            break;
        }
        sections.push_back(composed.substr(start, pos - start));
        start = pos + separator.size();
    }
    out.original = sections.front();
    out.composed = composed;
    const std::string anchor = text_key(out.original);
    for (std::size_t i = 1; i < sections.size(); ++i) {
        const std::string& section = sections[i];
        if (section.rfind("[[", 0) != 0) {
            throw Error(ErrorKind::ParseError, "extension fragment lacks a [[kind]] marker");
        }
        const std::size_t close = section.find("]] ");
        if (close == std::string::npos) {
            throw Error(ErrorKind::ParseError, "extension fragment kind marker is unterminated");
        }
        Extension extension;
        extension.kind = ExtensionKind::from_label(section.substr(2, close - 2));
        extension.anchor = anchor;
        const std::string body = section.substr(close + 3);
        std::size_t line_start = 0;
        while (true) {
            const std::size_t nl = body.find('\n', line_start);
            if (nl == std::string::npos) {
                extension.payload.push_back(body.substr(line_start));
                break;
            }
            extension.payload.push_back(body.substr(line_start, nl - line_start));
            line_start = nl + 1;
        }
        if (extension.payload.empty() || (extension.payload.size() == 1 && extension.payload[0].empty())) {
            throw Error(ErrorKind::ParseError, "extension fragment has no payload");
        }
        out.fragments.push_back(std::move(extension));
    }
    return out;
}

Distribution extension_weights(const std::vector<Extension>& extensions,
                               const CoverageMap& coverage) {
    std::vector<std::string> ids;
    ids.reserve(extensions.size());
    for (const auto& extension : extensions) ids.push_back(extension.id());
    return extension_weights(ids, coverage);
}

namespace {

const std::vector<std::string> kBuiltinKinds = {"vertical", "horizontal", "generalization",
                                                "temporal", "spatial",    "scatter"};

}  // namespace

ExtensionRegistry::ExtensionRegistry() : common_(kBuiltinKinds), threshold_(3) {}

ExtensionRegistry::ExtensionRegistry(std::vector<std::string> common,
                                     std::map<std::string, int> dynamic, int promotion_threshold)
    : common_(std::move(common)), dynamic_(std::move(dynamic)), threshold_(promotion_threshold) {
    if (threshold_ < 1) {
        throw Error(ErrorKind::InvalidInput, "promotion threshold must be positive");
    }
    for (const auto& [name, count] : dynamic_) {
        if (count < 0) {
            throw Error(ErrorKind::InvalidInput, "usage counts cannot be negative");
        }
        if (is_common(name)) {
            throw Error(ErrorKind::InvalidInput,
                        "kind \"" + name + "\" cannot be both common and dynamic");
        }
    }
}

ExtensionRegistry ExtensionRegistry::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open extension registry: " + path);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, "extension registry is not valid JSON: " + std::string(e.what()));
    }
    return ExtensionRegistry(doc.value("common", kBuiltinKinds),
                             doc.value("dynamic", std::map<std::string, int>{}),
                             doc.value("threshold", 3));
}

void ExtensionRegistry::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write extension registry: " + path);
    }
    nlohmann::json doc;
    doc["common"] = common_;
    doc["dynamic"] = dynamic_;
    doc["threshold"] = threshold_;
    out << doc.dump(2) << '\n';
}

void ExtensionRegistry::register_dynamic(const std::string& kind_name) {
    if (trim(kind_name).empty()) {
        throw Error(ErrorKind::InvalidInput, "extension kind name must be non-empty");
    }
    if (is_common(kind_name)) {
        throw Error(ErrorKind::AlreadyCommon,
                    "kind \"" + kind_name + "\" is already in the common list");
    }
    dynamic_.try_emplace(kind_name, 0);
}

void ExtensionRegistry::note_usage(const std::string& kind_name) {
    if (is_common(kind_name)) return;
    auto it = dynamic_.find(kind_name);
    if (it == dynamic_.end()) {
        throw Error(ErrorKind::NotFound, "kind \"" + kind_name + "\" is not registered");
    }
    ++it->second;
    if (it->second >= threshold_) {
        common_.push_back(kind_name);
        dynamic_.erase(it);
    }
}

bool ExtensionRegistry::is_common(const std::string& kind_name) const {
    return std::find(common_.begin(), common_.end(), kind_name) != common_.end();
}

}  // namespace scopex
