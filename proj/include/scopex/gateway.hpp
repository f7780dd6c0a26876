#pragma once

#include <string>
#include <vector>

#include "scopex/distribution.hpp"
#include "scopex/error.hpp"

namespace scopex {

struct GenerationRequest {
    std::string prompt;
    int max_tokens = 512;
    double temperature = 0.0;
};

struct GenerationResult {
    std::string text;
    double confidence = 0.0;  // in [0,1]
    // True when the backend could not parse a self-reported confidence and
    // fell back to 0.5; surfaced in reasoning traces.
    bool confidence_defaulted = false;
};

// Uniform contract for text generation, embeddings, and candidate scoring.
// Implementations must be callable from multiple threads concurrently.
class ModelGateway {
public:
    virtual ~ModelGateway() = default;

    virtual GenerationResult generate(const GenerationRequest& request) = 0;

    virtual std::vector<double> embed(const std::string& text) = 0;

    // Probability distribution over the given candidate answers, conditioned
    // on the prompt. Requires at least two candidates.
    virtual Distribution candidate_distribution(const std::string& prompt,
                                                const std::vector<std::string>& candidates) = 0;
};

// Shared precondition checks; both backends call these before doing work.
void check_generation_request(const GenerationRequest& request);
void check_candidate_request(const std::string& prompt, const std::vector<std::string>& candidates);

}  // namespace scopex
