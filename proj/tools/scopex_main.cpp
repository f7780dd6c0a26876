// Command-line front end: ingestion, layered answering, scope extension,
// knowledge-network building, entropy reporting, and method improvement.
// Machine-readable JSON goes to stdout, human summaries to stderr.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scopex/entropy.hpp"
#include "scopex/extension.hpp"
#include "scopex/http_backend.hpp"
#include "scopex/knowledge.hpp"
#include "scopex/method_store.hpp"
#include "scopex/orchestrator.hpp"
#include "scopex/scripted_backend.hpp"
#include "scopex/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Settings {
    std::string store;
    std::string backend_kind = "scripted";
    std::string backend_path;
    std::string templates;
    std::string registry;
    double intuition = 0.75;
    double reuse = 0.25;
    std::size_t borrow_k = 3;
};

std::string resolve_against(const fs::path& base_dir, const std::string& value) {
    fs::path path(value);
    if (path.is_absolute() || base_dir.empty()) return path.string();
    return (base_dir / path).string();
}

// Precedence: config file < flags < environment.
Settings load_settings(const std::string& config_path, const Settings& flags,
                       const std::vector<bool>& flag_present) {
    Settings settings;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            throw scopex::Error(scopex::ErrorKind::ConfigError,
                                "cannot open config file: " + config_path);
        }
        json doc;
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw scopex::Error(scopex::ErrorKind::ConfigError,
                                "config file is not valid JSON: " + std::string(e.what()));
        }
        const fs::path dir = fs::path(config_path).parent_path();
        if (doc.contains("store")) {
            settings.store = resolve_against(dir, doc["store"].get<std::string>());
        }
        if (doc.contains("backend")) {
            const json& backend = doc["backend"];
            settings.backend_kind = backend.value("kind", "scripted");
            if (backend.contains("path")) {
                settings.backend_path = resolve_against(dir, backend["path"].get<std::string>());
            }
        }
        if (doc.contains("templates")) {
            settings.templates = resolve_against(dir, doc["templates"].get<std::string>());
        }
        if (doc.contains("registry")) {
            settings.registry = resolve_against(dir, doc["registry"].get<std::string>());
        }
        if (doc.contains("thresholds")) {
            const json& thresholds = doc["thresholds"];
            settings.intuition = thresholds.value("intuition", settings.intuition);
            settings.reuse = thresholds.value("reuse", settings.reuse);
            settings.borrow_k = thresholds.value("borrow_k", settings.borrow_k);
        }
    }

    enum FlagIndex { kStore, kBackend, kTemplates, kRegistry, kIntuition, kReuse, kBorrowK };
    if (flag_present[kStore]) settings.store = flags.store;
    if (flag_present[kBackend]) {
        const std::string& value = flags.backend_kind;
        if (value == "http") {
            settings.backend_kind = "http";
            settings.backend_path.clear();
        } else if (value.rfind("scripted:", 0) == 0) {
            settings.backend_kind = "scripted";
            settings.backend_path = value.substr(9);
        } else {
            throw scopex::Error(scopex::ErrorKind::ConfigError,
                                "--backend must be \"http\" or \"scripted:<path>\"");
        }
    }
    if (flag_present[kTemplates]) settings.templates = flags.templates;
    if (flag_present[kRegistry]) settings.registry = flags.registry;
    if (flag_present[kIntuition]) settings.intuition = flags.intuition;
    if (flag_present[kReuse]) settings.reuse = flags.reuse;
    if (flag_present[kBorrowK]) settings.borrow_k = flags.borrow_k;

    // Environment wins over everything.
    if (const char* base = std::getenv("SCOPEX_API_BASE"); base && *base) {
        settings.backend_kind = "http";
    }

    if (settings.intuition < 0.0 || settings.intuition > 1.0) {
        throw scopex::Error(scopex::ErrorKind::ConfigError,
                            "intuition threshold must lie in [0,1]");
    }
    if (settings.reuse < 0.0 || settings.reuse > 2.0) {
        throw scopex::Error(scopex::ErrorKind::ConfigError,
                            "reuse threshold must lie in [0,2]");
    }
    if (settings.borrow_k < 1) {
        throw scopex::Error(scopex::ErrorKind::ConfigError, "borrow_k must be at least 1");
    }
    return settings;
}

std::unique_ptr<scopex::ModelGateway> make_gateway(const Settings& settings) {
    if (settings.backend_kind == "http") {
        return std::make_unique<scopex::HttpBackend>(scopex::HttpBackend::from_env());
    }
    if (settings.backend_kind == "scripted") {
        if (settings.backend_path.empty()) {
            throw scopex::Error(scopex::ErrorKind::ConfigError,
                                "scripted backend needs a config path");
        }
        return std::make_unique<scopex::ScriptedBackend>(
            scopex::ScriptedBackend::from_file(settings.backend_path));
    }
    throw scopex::Error(scopex::ErrorKind::ConfigError,
                        "unknown backend kind: " + settings.backend_kind);
}

scopex::MethodStore open_store(const Settings& settings, scopex::ModelGateway& gateway,
                               const std::string& probe_text) {
    if (settings.store.empty()) {
        throw scopex::Error(scopex::ErrorKind::ConfigError, "no store path configured");
    }
    if (fs::exists(settings.store)) {
        return scopex::MethodStore::load(settings.store);
    }
    return scopex::MethodStore(gateway.embed(probe_text).size());
}

scopex::PromptTemplates open_templates(const Settings& settings) {
    if (settings.templates.empty()) {
        throw scopex::Error(scopex::ErrorKind::ConfigError, "no prompt templates configured");
    }
    return scopex::PromptTemplates::from_file(settings.templates);
}

std::vector<std::string> read_lines_file(const std::string& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) {
        throw scopex::Error(scopex::ErrorKind::IoError, "cannot open " + what + ": " + path);
    }
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return scopex::split_lines(content);
}

void emit(const std::string& text, const std::string& out_path) {
    std::cout << text;
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) {
            throw scopex::Error(scopex::ErrorKind::IoError, "cannot write output: " + out_path);
        }
        out << text;
    }
}

int report_error(const scopex::Error& error) {
    json doc;
    doc["error"] = {{"kind", scopex::kind_label(error.kind())}, {"message", error.message()}};
    std::cout << doc.dump(2) << "\n";
    std::cerr << error.what() << "\n";
    return 1;
}

json extension_to_json(const scopex::Extension& extension) {
    return {{"kind", extension.kind.label()},
            {"anchor", extension.anchor},
            {"payload", extension.payload},
            {"weight", extension.weight},
            {"source", scopex::source_label(extension.source)}};
}

// --- subcommand bodies -----------------------------------------------------

int run_ingest(const Settings& settings, const std::string& question, const std::string& solution,
               const std::string& steps_path) {
    auto gateway = make_gateway(settings);
    scopex::MethodStore store = open_store(settings, *gateway, question);
    std::vector<std::string> steps;
    if (!steps_path.empty()) steps = read_lines_file(steps_path, "steps file");
    const std::string id = scopex::method_id_for(question, solution);
    const bool existing = store.find(id).has_value();
    store.add_method(question, solution, std::move(steps), *gateway);
    store.save(settings.store);
    json doc;
    doc["id"] = id;
    doc["existing"] = existing;
    std::cout << doc.dump(2) << "\n";
    std::cerr << (existing ? "method already present: " : "ingested method: ") << id << "\n";
    return 0;
}

int run_ask(const Settings& settings, const std::string& question, const std::string& trace_out,
            int max_stages) {
    auto gateway = make_gateway(settings);
    scopex::MethodStore store = open_store(settings, *gateway, question);
    const scopex::PromptTemplates templates = open_templates(settings);
    scopex::PipelineConfig config;
    config.intuition_threshold = settings.intuition;
    config.reuse_threshold = settings.reuse;
    config.borrow_k = settings.borrow_k;
    config.max_stages = max_stages;
    const scopex::AnswerResult result = scopex::answer(question, store, *gateway, templates, config);
    store.save(settings.store);
    emit(scopex::trace_to_json(result.trace) + "\n", trace_out);
    std::cerr << "outcome: " << scopex::outcome_label(result.trace.outcome) << "\n";
    return result.trace.outcome == scopex::Outcome::Unresolved ? 1 : 0;
}

int run_extend(const Settings& settings, const std::string& question, const std::string& kinds_csv,
               const std::string& history_path, const std::string& future_path,
               const std::string& wider, std::size_t neighbors) {
    auto gateway = make_gateway(settings);
    const scopex::PromptTemplates templates = open_templates(settings);

    std::vector<std::string> kinds;
    for (const auto& token : scopex::split_lines([&] {
             std::string lines = kinds_csv;
             for (auto& c : lines) {
                 if (c == ',') c = '\n';
             }
             return lines;
         }())) {
        kinds.push_back(token);
    }
    if (kinds.empty()) {
        throw scopex::Error(scopex::ErrorKind::InvalidInput, "--kinds must name at least one kind");
    }

    std::vector<scopex::Extension> extensions;
    for (const auto& kind : kinds) {
        if (kind == "v" || kind == "vertical") {
            extensions.push_back(scopex::extend_vertical(question, *gateway, templates));
        } else if (kind == "h" || kind == "horizontal") {
            extensions.push_back(scopex::extend_horizontal(question, *gateway, templates, neighbors));
        } else if (kind == "t" || kind == "temporal") {
            std::vector<std::string> history, future;
            if (!history_path.empty()) history = read_lines_file(history_path, "history file");
            if (!future_path.empty()) future = read_lines_file(future_path, "future file");
            extensions.push_back(scopex::extend_temporal(question, history, future));
        } else if (kind == "s" || kind == "spatial") {
            extensions.push_back(scopex::extend_spatial(question, wider));
        } else {
            throw scopex::Error(scopex::ErrorKind::InvalidInput,
                                "unknown extension kind \"" + kind + "\" (use v,h,t,s)");
        }
    }
    const scopex::ExtendedQuestion extended = scopex::compose(question, extensions);

    // Count usage against the registry when one is configured; built-in
    // kinds sit in the common list, so this is a no-op until dynamic kinds
    // appear, but it keeps the promotion path exercised end to end.
    if (!settings.registry.empty() && fs::exists(settings.registry)) {
        scopex::ExtensionRegistry registry = scopex::ExtensionRegistry::load(settings.registry);
        for (const auto& extension : extended.fragments) {
            registry.note_usage(extension.kind.label());
        }
        registry.save(settings.registry);
    }

    json doc;
    doc["original"] = extended.original;
    doc["composed"] = extended.composed;
    doc["extensions"] = json::array();
    for (const auto& extension : extended.fragments) {
        doc["extensions"].push_back(extension_to_json(extension));
    }
    std::cout << doc.dump(2) << "\n";
    std::cerr << "applied " << extended.fragments.size() << " extensions\n";
    return 0;
}

int run_network_build(const std::string& traces_dir, const std::string& out_path,
                      const std::string& format) {
    if (!fs::is_directory(traces_dir)) {
        throw scopex::Error(scopex::ErrorKind::IoError,
                            "traces directory does not exist: " + traces_dir);
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(traces_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

    scopex::KnowledgeNetwork network;
    std::size_t tree_count = 0;
    for (const auto& file : files) {
        std::ifstream in(file);
        json doc;
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw scopex::Error(scopex::ErrorKind::ParseError,
                                "trace " + file.filename().string() + " is not valid JSON: " +
                                    std::string(e.what()));
        }
        const std::string question = doc.value("question", "");
        if (question.empty()) continue;
        // The scope-extension stage re-queries with the composed question
        // as the whole prompt; that text round-trips back into extensions.
        std::string composed;
        for (const auto& stage : doc.value("stages", json::array())) {
            if (stage.value("stage", "") != "scope-extension") continue;
            for (const auto& prompt : stage.value("prompts_issued", json::array())) {
                const std::string text = prompt.get<std::string>();
                if (text.rfind(question + "\n---\n", 0) == 0) composed = text;
            }
        }
        if (composed.empty()) continue;
        const scopex::ExtendedQuestion extended = scopex::parse_composed(composed);
        for (const auto& extension : extended.fragments) {
            network = scopex::merge(network, scopex::tree_from_extension(question, extension));
            ++tree_count;
        }
    }

    const std::string as_json = scopex::network_to_json(network) + "\n";
    std::cout << as_json;
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) {
            throw scopex::Error(scopex::ErrorKind::IoError, "cannot write output: " + out_path);
        }
        out << (format == "dot" ? scopex::network_to_dot(network) : as_json);
    }
    std::cerr << "network: " << network.nodes.size() << " nodes, " << network.edges.size()
              << " edges from " << tree_count << " trees\n";
    return 0;
}

int run_entropy(const std::string& coverage_path, const std::string& out_path) {
    std::ifstream in(coverage_path);
    if (!in) {
        throw scopex::Error(scopex::ErrorKind::IoError,
                            "cannot open coverage file: " + coverage_path);
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw scopex::Error(scopex::ErrorKind::ParseError,
                            "coverage file is not valid JSON: " + std::string(e.what()));
    }
    const std::vector<std::string> ids = doc.value("extensions", std::vector<std::string>{});
    const json coverage_doc = doc.value("coverage", json::object());
    scopex::CoverageMap coverage;
    for (const auto& [id, questions] : coverage_doc.items()) {
        coverage[id] = questions.get<std::vector<std::string>>();
    }
    const scopex::EntropyReport report = scopex::build_entropy_report(ids, coverage);
    emit(scopex::entropy_report_to_json(report) + "\n", out_path);
    std::cerr << "entropy: " << scopex::fmt_double(report.entropy_bits) << " bits over "
              << ids.size() << " extensions\n";
    return 0;
}

int run_improve(const Settings& settings, const std::string& method_id,
                const std::string& strategy, std::size_t trials, std::uint64_t seed) {
    auto gateway = make_gateway(settings);
    if (settings.store.empty() || !fs::exists(settings.store)) {
        throw scopex::Error(scopex::ErrorKind::ConfigError,
                            "improve needs an existing method store");
    }
    scopex::MethodStore store = scopex::MethodStore::load(settings.store);
    const std::vector<scopex::ImprovementCandidate> candidates =
        scopex::improve_method(store, method_id, scopex::strategy_from_label(strategy),
                               scopex::EvaluatorKind::Predictive, trials, seed, *gateway);
    json doc;
    doc["candidates"] = json::array();
    for (const auto& candidate : candidates) {
        doc["candidates"].push_back({{"base_method", candidate.base_method},
                                     {"strategy", scopex::strategy_label(candidate.strategy)},
                                     {"changed_steps", candidate.changed_steps},
                                     {"new_steps", candidate.new_steps},
                                     {"score", candidate.score},
                                     {"evaluator", scopex::evaluator_label(candidate.evaluator)}});
    }
    std::cout << doc.dump(2) << "\n";
    std::cerr << candidates.size() << " candidates; best score "
              << scopex::fmt_double(candidates.empty() ? 0.0 : candidates.front().score) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Layered reasoning over a reusable method library"};
    app.require_subcommand(1);

    std::string config_path;
    Settings flags;
    app.add_option("--config", config_path, "JSON config file");
    auto* store_opt = app.add_option("--store", flags.store, "method store path");
    auto* backend_opt =
        app.add_option("--backend", flags.backend_kind, "\"http\" or \"scripted:<path>\"");
    auto* templates_opt = app.add_option("--templates", flags.templates, "prompt templates path");
    auto* registry_opt = app.add_option("--registry", flags.registry, "extension registry path");
    auto* intuition_opt =
        app.add_option("--intuition", flags.intuition, "confidence acceptance threshold");
    auto* reuse_opt = app.add_option("--reuse", flags.reuse, "max reuse distance");
    auto* borrow_opt = app.add_option("--borrow-k", flags.borrow_k, "methods borrowed in stage 4");

    auto* ingest_cmd = app.add_subcommand("ingest", "add a question-solution method to the store");
    std::string ingest_question, ingest_solution, ingest_steps;
    ingest_cmd->add_option("--question", ingest_question, "method question")->required();
    ingest_cmd->add_option("--solution", ingest_solution, "method solution")->required();
    ingest_cmd->add_option("--steps", ingest_steps, "file with one step per line");
    ingest_cmd->fallthrough();

    auto* ask_cmd = app.add_subcommand("ask", "answer a question through the layered pipeline");
    std::string ask_question, ask_trace_out;
    int ask_max_stages = 4;
    ask_cmd->add_option("--question", ask_question, "question to answer")->required();
    ask_cmd->add_option("--trace-out", ask_trace_out, "also write the trace JSON here");
    ask_cmd->add_option("--max-stages", ask_max_stages, "run at most this many stages")
        ->check(CLI::Range(1, 4));
    ask_cmd->fallthrough();

    auto* extend_cmd = app.add_subcommand("extend", "apply scope extensions to a question");
    std::string extend_question, extend_kinds = "v,h", extend_history, extend_future, extend_wider;
    std::size_t extend_neighbors = 2;
    extend_cmd->add_option("--question", extend_question, "question to extend")->required();
    extend_cmd->add_option("--kinds", extend_kinds, "comma list of v,h,t,s");
    extend_cmd->add_option("--history", extend_history, "file with past states, oldest first");
    extend_cmd->add_option("--future", extend_future, "file with future states, nearest first");
    extend_cmd->add_option("--wider", extend_wider, "wider spatial context text");
    extend_cmd->add_option("--neighbors", extend_neighbors, "horizontal neighbor cap");
    extend_cmd->fallthrough();

    auto* network_cmd = app.add_subcommand("network", "knowledge network operations");
    network_cmd->require_subcommand(1);
    auto* build_cmd = network_cmd->add_subcommand("build", "build a network from trace files");
    std::string build_traces, build_out, build_format = "json";
    build_cmd->add_option("--traces", build_traces, "directory of trace JSON files")->required();
    build_cmd->add_option("--out", build_out, "output file");
    build_cmd->add_option("--format", build_format, "json or dot")
        ->check(CLI::IsMember({"json", "dot"}));
    build_cmd->fallthrough();

    auto* entropy_cmd = app.add_subcommand("entropy", "entropy report over extension coverage");
    std::string entropy_coverage, entropy_out;
    entropy_cmd->add_option("--coverage", entropy_coverage, "coverage JSON file")->required();
    entropy_cmd->add_option("--out", entropy_out, "output file");
    entropy_cmd->fallthrough();

    auto* improve_cmd = app.add_subcommand("improve", "step-change improvement candidates");
    std::string improve_method_id, improve_strategy;
    std::size_t improve_trials = 8;
    std::uint64_t improve_seed = 0;
    improve_cmd->add_option("--method", improve_method_id, "method id")->required();
    improve_cmd->add_option("--strategy", improve_strategy, "minimal, partial, or complete")
        ->required()
        ->check(CLI::IsMember({"minimal", "partial", "complete"}));
    improve_cmd->add_option("--trials", improve_trials, "candidates to generate");
    improve_cmd->add_option("--seed", improve_seed, "random seed");
    improve_cmd->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const std::vector<bool> flag_present = {
            store_opt->count() > 0,     backend_opt->count() > 0, templates_opt->count() > 0,
            registry_opt->count() > 0,  intuition_opt->count() > 0, reuse_opt->count() > 0,
            borrow_opt->count() > 0};
        const Settings settings = load_settings(config_path, flags, flag_present);

        if (*ingest_cmd) {
            return run_ingest(settings, ingest_question, ingest_solution, ingest_steps);
        }
        if (*ask_cmd) {
            return run_ask(settings, ask_question, ask_trace_out, ask_max_stages);
        }
        if (*extend_cmd) {
            return run_extend(settings, extend_question, extend_kinds, extend_history,
                              extend_future, extend_wider, extend_neighbors);
        }
        if (*network_cmd && *build_cmd) {
            return run_network_build(build_traces, build_out, build_format);
        }
        if (*entropy_cmd) {
            return run_entropy(entropy_coverage, entropy_out);
        }
        if (*improve_cmd) {
            return run_improve(settings, improve_method_id, improve_strategy, improve_trials,
                               improve_seed);
        }
    } catch (const scopex::Error& e) {
        return report_error(e);
    }
    return 2;
}
