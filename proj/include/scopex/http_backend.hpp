#pragma once

#include <string>

#include "scopex/gateway.hpp"

namespace scopex {

struct HttpBackendConfig {
    std::string base;  // scheme://host[:port], no trailing slash needed
    std::string api_key;  // sent as a Bearer token when non-empty
    std::string model = "default";
    std::string embed_model = "default";
    int timeout_seconds = 30;
    int max_retries = 2;   // retried on 5xx and transport failures only
    int backoff_ms = 250;  // first retry delay; doubles per attempt
};

// OpenAI-compatible gateway: POST {base}/v1/chat/completions for text and
// {base}/v1/embeddings for vectors. Generation confidence is self-reported:
// the backend appends an instruction asking for a final confidence line,
// strips it from the reply, and falls back to 0.5 (flagged) when the model
// ignores the instruction.
class HttpBackend : public ModelGateway {
public:
    explicit HttpBackend(HttpBackendConfig config);

    // Reads SCOPEX_API_BASE (required), SCOPEX_API_KEY, SCOPEX_MODEL, and
    // SCOPEX_EMBED_MODEL.
    static HttpBackend from_env();

    GenerationResult generate(const GenerationRequest& request) override;
    std::vector<double> embed(const std::string& text) override;
    Distribution candidate_distribution(const std::string& prompt,
                                        const std::vector<std::string>& candidates) override;

    const HttpBackendConfig& config() const { return config_; }

private:
    std::string post_json(const std::string& path, const std::string& body);

    HttpBackendConfig config_;
};

}  // namespace scopex
