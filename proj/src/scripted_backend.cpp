#include "scopex/scripted_backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>

#include <json.hpp>

#include "scopex/text.hpp"

namespace scopex {
namespace {

bool rule_matches(const std::string& pattern, bool is_regex, const std::string& prompt) {
    if (is_regex) {
        try {
            return std::regex_search(prompt, std::regex(pattern));
        } catch (const std::regex_error&) {
            throw Error(ErrorKind::InvalidInput, "bad scripted regex: " + pattern);
        }
    }
    return prompt.find(pattern) != std::string::npos;
}

}  // namespace

ScriptedBackend::ScriptedBackend(std::size_t embedding_dim, std::uint64_t seed)
    : embedding_dim_(embedding_dim), seed_(seed) {
    if (embedding_dim_ == 0) {
        throw Error(ErrorKind::InvalidInput, "embedding dimension must be positive");
    }
}

ScriptedBackend ScriptedBackend::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open scripted backend config: " + path);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, "scripted backend config is not valid JSON: " + std::string(e.what()));
    }
    ScriptedBackend backend(doc.value("embedding_dim", std::size_t{16}),
                            doc.value("seed", std::uint64_t{0}));
    for (const auto& entry : doc.value("rules", nlohmann::json::array())) {
        ScriptedRule rule;
        rule.pattern = entry.at("pattern").get<std::string>();
        rule.is_regex = entry.value("is_regex", false);
        rule.response = entry.at("response").get<std::string>();
        rule.confidence = entry.value("confidence", 0.9);
        backend.add_rule(std::move(rule));
    }
    for (const auto& entry : doc.value("distributions", nlohmann::json::array())) {
        ScriptedDistribution dist;
        dist.pattern = entry.at("pattern").get<std::string>();
        dist.is_regex = entry.value("is_regex", false);
        dist.weights = entry.at("weights").get<std::vector<double>>();
        backend.add_distribution(std::move(dist));
    }
    return backend;
}

void ScriptedBackend::add_rule(ScriptedRule rule) {
    if (rule.confidence < 0.0 || rule.confidence > 1.0) {
        throw Error(ErrorKind::InvalidInput, "rule confidence must lie in [0,1]");
    }
    rules_.push_back(std::move(rule));
}

void ScriptedBackend::add_distribution(ScriptedDistribution dist) {
    for (double w : dist.weights) {
        if (w < 0.0) {
            throw Error(ErrorKind::InvalidInput, "distribution weights must be non-negative");
        }
    }
    distributions_.push_back(std::move(dist));
}

GenerationResult ScriptedBackend::generate(const GenerationRequest& request) {
    check_generation_request(request);
    for (const auto& rule : rules_) {
        if (rule_matches(rule.pattern, rule.is_regex, request.prompt)) {
            return GenerationResult{rule.response, rule.confidence, false};
        }
    }
    throw Error(ErrorKind::NoRule, "no scripted rule matches prompt: " + trim(request.prompt).substr(0, 80));
}

std::vector<double> ScriptedBackend::embed(const std::string& text) {
    const std::string normalized = normalize(text);
    if (normalized.empty()) {
        throw Error(ErrorKind::InvalidInput, "cannot embed empty text");
    }
    // Mix the seed into the content hash, then draw components with
    // splitmix64. Everything below is pure integer math plus one sqrt, so
    // the vector is reproducible bit-for-bit.
    std::uint64_t state = fnv1a64(normalized) ^ (seed_ * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
    std::vector<double> vec(embedding_dim_);
    for (auto& component : vec) {
        const std::uint64_t bits = splitmix64(state);
        // 53 high bits -> [0,1) -> [-1,1)
        component = static_cast<double>(bits >> 11) * (2.0 / 9007199254740992.0) - 1.0;
    }
    double norm_sq = 0.0;
    for (double component : vec) norm_sq += component * component;
    if (norm_sq == 0.0) {
        throw Error(ErrorKind::DegenerateEmbedding, "derived embedding has zero norm");
    }
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    for (auto& component : vec) component *= inv_norm;
    return vec;
}

Distribution ScriptedBackend::candidate_distribution(const std::string& prompt,
                                                     const std::vector<std::string>& candidates) {
    check_candidate_request(prompt, candidates);
    for (const auto& dist : distributions_) {
        if (!rule_matches(dist.pattern, dist.is_regex, prompt)) continue;
        if (dist.weights.size() != candidates.size()) {
            throw Error(ErrorKind::InvalidInput,
                        "scripted weights count does not match candidate count");
        }
        // Bind weights to the sorted candidate order, then emit in the
        // caller's order so permuted calls agree on each candidate's mass.
        std::vector<std::size_t> order(candidates.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return candidates[a] < candidates[b];
        });
        Distribution result;
        result.outcomes = candidates;
        result.weights.assign(candidates.size(), 0.0);
        const double total = std::accumulate(dist.weights.begin(), dist.weights.end(), 0.0);
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            result.weights[order[rank]] =
                total > 0.0 ? dist.weights[rank] : 1.0 / static_cast<double>(candidates.size());
        }
        result.weights = result.normalized();
        return result;
    }
    throw Error(ErrorKind::NoRule, "no scripted distribution matches prompt: " + trim(prompt).substr(0, 80));
}

}  // namespace scopex
