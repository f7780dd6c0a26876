#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scopex/gateway.hpp"

namespace scopex {

// One canned response. Rules are checked in insertion order and the first
// match wins. `pattern` is a plain substring unless `is_regex` is set.
struct ScriptedRule {
    std::string pattern;
    bool is_regex = false;
    std::string response;
    double confidence = 0.9;
};

// Weights for candidate scoring. The weight list is bound to the candidate
// set sorted lexicographically, so callers get the same distribution no
// matter what order they pass candidates in.
struct ScriptedDistribution {
    std::string pattern;
    bool is_regex = false;
    std::vector<double> weights;
};

// Fully deterministic gateway for tests and offline runs. Generation is
// table-driven; embeddings are derived from a seeded integer hash of the
// normalized text, so they are bit-identical across platforms.
class ScriptedBackend : public ModelGateway {
public:
    explicit ScriptedBackend(std::size_t embedding_dim = 16, std::uint64_t seed = 0);

    // Loads {"embedding_dim": N, "seed": S, "rules": [...], "distributions": [...]}.
    static ScriptedBackend from_file(const std::string& path);

    void add_rule(ScriptedRule rule);
    void add_distribution(ScriptedDistribution dist);

    GenerationResult generate(const GenerationRequest& request) override;
    std::vector<double> embed(const std::string& text) override;
    Distribution candidate_distribution(const std::string& prompt,
                                        const std::vector<std::string>& candidates) override;

    std::size_t embedding_dim() const { return embedding_dim_; }

private:
    std::size_t embedding_dim_;
    std::uint64_t seed_;
    std::vector<ScriptedRule> rules_;
    std::vector<ScriptedDistribution> distributions_;
};

}  // namespace scopex
