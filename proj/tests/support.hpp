#pragma once

// Shared test helpers: a programmable in-memory gateway, a recording
// decorator, temp-dir management, and a subprocess runner for CLI tests.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "scopex/gateway.hpp"

namespace testutil {

namespace fs = std::filesystem;

// Self-deleting temporary directory.
class TempDir {
public:
    TempDir() {
        const fs::path base = fs::temp_directory_path();
        std::mt19937_64 rng(std::random_device{}());
        for (int attempt = 0; attempt < 64; ++attempt) {
            fs::path candidate = base / ("scopex-test-" + std::to_string(rng()));
            std::error_code ec;
            if (fs::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("could not create temp directory");
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Gateway programmed per test: substring-matched canned generations, an
// explicit embedding table, and substring-matched candidate weights.
class FakeGateway : public scopex::ModelGateway {
public:
    // First rule whose needle is a substring of the prompt wins.
    void on_prompt(std::string needle, std::string response, double confidence = 0.9) {
        generation_rules_.push_back({std::move(needle), std::move(response), confidence});
    }
    void set_embedding(std::string text, std::vector<double> embedding) {
        embeddings_[std::move(text)] = std::move(embedding);
    }
    void set_default_embedding(std::vector<double> embedding) {
        default_embedding_ = std::move(embedding);
    }
    void on_candidates(std::string needle, std::vector<double> weights) {
        candidate_rules_.push_back({std::move(needle), std::move(weights)});
    }

    scopex::GenerationResult generate(const scopex::GenerationRequest& request) override {
        scopex::check_generation_request(request);
        for (const auto& rule : generation_rules_) {
            if (request.prompt.find(rule.needle) != std::string::npos) {
                return {rule.response, rule.confidence, false};
            }
        }
        throw scopex::Error(scopex::ErrorKind::NoRule,
                            "no fake generation rule matches: " + request.prompt);
    }

    std::vector<double> embed(const std::string& text) override {
        if (auto it = embeddings_.find(text); it != embeddings_.end()) return it->second;
        if (!default_embedding_.empty()) return default_embedding_;
        throw scopex::Error(scopex::ErrorKind::NoRule, "no fake embedding for: " + text);
    }

    scopex::Distribution candidate_distribution(
        const std::string& prompt, const std::vector<std::string>& candidates) override {
        scopex::check_candidate_request(prompt, candidates);
        for (const auto& rule : candidate_rules_) {
            if (prompt.find(rule.needle) != std::string::npos) {
                scopex::Distribution dist{candidates, rule.weights};
                dist.validate();
                scopex::Distribution out{candidates, dist.normalized()};
                return out;
            }
        }
        throw scopex::Error(scopex::ErrorKind::NoRule,
                            "no fake candidate rule matches: " + prompt);
    }

private:
    struct GenerationRule {
        std::string needle;
        std::string response;
        double confidence;
    };
    struct CandidateRule {
        std::string needle;
        std::vector<double> weights;
    };
    std::vector<GenerationRule> generation_rules_;
    std::map<std::string, std::vector<double>> embeddings_;
    std::vector<double> default_embedding_;
    std::vector<CandidateRule> candidate_rules_;
};

// Decorator that records every call made through it, for asserting call
// counts and exact prompt order.
class RecordingGateway : public scopex::ModelGateway {
public:
    explicit RecordingGateway(scopex::ModelGateway& inner) : inner_(inner) {}

    scopex::GenerationResult generate(const scopex::GenerationRequest& request) override {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            generate_prompts.push_back(request.prompt);
        }
        return inner_.generate(request);
    }
    std::vector<double> embed(const std::string& text) override {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            embed_texts.push_back(text);
        }
        return inner_.embed(text);
    }
    scopex::Distribution candidate_distribution(
        const std::string& prompt, const std::vector<std::string>& candidates) override {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            candidate_prompts.push_back(prompt);
        }
        return inner_.candidate_distribution(prompt, candidates);
    }

    std::vector<std::string> generate_prompts;
    std::vector<std::string> embed_texts;
    std::vector<std::string> candidate_prompts;

private:
    scopex::ModelGateway& inner_;
    std::mutex mutex_;
};

// --- CLI subprocess runner -------------------------------------------------

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string shell_quote(const std::string& value) {
    std::string quoted = "'";
    for (char c : value) {
        if (c == '\'') {
            quoted += "'\\''";
        } else {
            quoted += c;
        }
    }
    quoted += "'";
    return quoted;
}

// Runs the CLI binary with the given arguments. The SCOPEX_* environment is
// scrubbed so host configuration cannot leak in; `env` entries are applied
// after the scrub.
inline CliResult run_cli(const std::vector<std::string>& args,
                         const std::vector<std::pair<std::string, std::string>>& env = {}) {
#ifndef SCOPEX_CLI_PATH
#error "SCOPEX_CLI_PATH must be defined by the build"
#endif
    TempDir capture;
    const std::string out_path = capture.file("out");
    const std::string err_path = capture.file("err");

    std::string command =
        "env -u SCOPEX_API_BASE -u SCOPEX_API_KEY -u SCOPEX_MODEL -u SCOPEX_EMBED_MODEL";
    for (const auto& [key, value] : env) {
        command += " " + shell_quote(key + "=" + value);
    }
    command += " " + shell_quote(SCOPEX_CLI_PATH);
    for (const auto& arg : args) {
        command += " " + shell_quote(arg);
    }
    command += " > " + shell_quote(out_path) + " 2> " + shell_quote(err_path);

    const int raw = std::system(command.c_str());
    CliResult result;
    result.exit_code = (raw == -1) ? -1 : WEXITSTATUS(raw);
    result.out = read_file(out_path);
    result.err = read_file(err_path);
    return result;
}

inline std::string fixture_path(const std::string& name) {
#ifndef SCOPEX_FIXTURE_DIR
#error "SCOPEX_FIXTURE_DIR must be defined by the build"
#endif
    return std::string(SCOPEX_FIXTURE_DIR) + "/" + name;
}

}  // namespace testutil
