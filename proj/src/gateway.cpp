#include "scopex/gateway.hpp"

#include "scopex/text.hpp"

namespace scopex {

void check_generation_request(const GenerationRequest& request) {
    if (trim(request.prompt).empty()) {
        throw Error(ErrorKind::InvalidInput, "generation prompt must be non-empty");
    }
    if (request.max_tokens <= 0) {
        throw Error(ErrorKind::InvalidInput, "max_tokens must be positive");
    }
    if (request.temperature < 0.0) {
        throw Error(ErrorKind::InvalidInput, "temperature must be non-negative");
    }
}

void check_candidate_request(const std::string& prompt, const std::vector<std::string>& candidates) {
    if (trim(prompt).empty()) {
        throw Error(ErrorKind::InvalidInput, "candidate prompt must be non-empty");
    }
    if (candidates.size() < 2) {
        throw Error(ErrorKind::InvalidInput, "candidate scoring needs at least two candidates");
    }
    for (const auto& candidate : candidates) {
        if (trim(candidate).empty()) {
            throw Error(ErrorKind::InvalidInput, "candidate answers must be non-empty");
        }
    }
}

}  // namespace scopex
