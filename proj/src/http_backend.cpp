#include "scopex/http_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <optional>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "scopex/text.hpp"

namespace scopex {
namespace {

constexpr const char* kConfidenceInstruction =
    "\n\nAnswer, then give a confidence between 0 and 1 on the last line.";

std::optional<double> first_float_in(const std::string& text) {
    static const std::regex pattern(R"(\d+\.?\d*|\.\d+)");
    std::smatch match;
    if (std::regex_search(text, match, pattern)) {
        try {
            return std::stod(match.str());
        } catch (const std::exception&) {
        }
    }
    return std::nullopt;
}

// Splits the reply into (answer, confidence) if the last non-empty line
// carries a value in [0,1]; otherwise the whole reply is the answer.
GenerationResult split_self_report(const std::string& content) {
    const std::size_t end = content.find_last_not_of(" \t\r\n");
    if (end == std::string::npos) return {content, 0.5, true};
    const std::size_t line_start = content.rfind('\n', end);
    const std::string last_line =
        content.substr(line_start == std::string::npos ? 0 : line_start + 1,
                       end - (line_start == std::string::npos ? 0 : line_start + 1) + 1);
    const std::optional<double> value = first_float_in(last_line);
    if (value && *value >= 0.0 && *value <= 1.0) {
        std::string answer =
            line_start == std::string::npos ? std::string() : content.substr(0, line_start);
        return {trim(answer), *value, false};
    }
    return {trim(content), 0.5, true};
}

nlohmann::json parse_reply(const std::string& body, const std::string& endpoint) {
    try {
        return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::ParseError,
                    endpoint + " reply is not JSON: " + body.substr(0, 200));
    }
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (trim(config_.base).empty()) {
        throw Error(ErrorKind::ConfigError, "http backend needs a base URL");
    }
    if (config_.timeout_seconds <= 0 || config_.max_retries < 0 || config_.backoff_ms < 0) {
        throw Error(ErrorKind::ConfigError, "http backend timing settings are out of range");
    }
}

HttpBackend HttpBackend::from_env() {
    HttpBackendConfig config;
    const char* base = std::getenv("SCOPEX_API_BASE");
    if (!base || trim(base).empty()) {
        throw Error(ErrorKind::ConfigError, "SCOPEX_API_BASE is not set");
    }
    config.base = base;
    if (const char* key = std::getenv("SCOPEX_API_KEY")) config.api_key = key;
    if (const char* model = std::getenv("SCOPEX_MODEL")) config.model = model;
    if (const char* embed = std::getenv("SCOPEX_EMBED_MODEL")) config.embed_model = embed;
    return HttpBackend(std::move(config));
}

std::string HttpBackend::post_json(const std::string& path, const std::string& body) {
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    int delay_ms = config_.backoff_ms;
    for (int attempt = 0;; ++attempt) {
        httplib::Client client(config_.base);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        client.set_write_timeout(config_.timeout_seconds, 0);
        httplib::Result result = client.Post(path, headers, body, "application/json");

        const bool transport_failure = !result;
        const bool server_failure = result && result->status >= 500;
        if (!transport_failure && !server_failure) {
            if (result->status >= 400) {
                throw Error(ErrorKind::GatewayError, "POST " + path + " failed with status " +
                                                         std::to_string(result->status) + ": " +
                                                         result->body.substr(0, 200));
            }
            return result->body;
        }
        if (attempt >= config_.max_retries) {
            const std::string reason =
                transport_failure ? "transport error (" + httplib::to_string(result.error()) + ")"
                                  : "status " + std::to_string(result->status);
            throw Error(ErrorKind::GatewayError,
                        "POST " + path + " failed after " + std::to_string(attempt + 1) +
                            " attempts: " + reason);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
        delay_ms *= 2;
    }
}

GenerationResult HttpBackend::generate(const GenerationRequest& request) {
    check_generation_request(request);
    nlohmann::json body;
    body["model"] = config_.model;
    body["messages"] = nlohmann::json::array(
        {{{"role", "user"}, {"content", request.prompt + kConfidenceInstruction}}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    const nlohmann::json reply =
        parse_reply(post_json("/v1/chat/completions", body.dump()), "chat completion");
    if (!reply.contains("choices") || reply["choices"].empty() ||
        !reply["choices"][0].contains("message") ||
        !reply["choices"][0]["message"].contains("content")) {
        throw Error(ErrorKind::ParseError,
                    "chat completion reply lacks choices[0].message.content: " +
                        reply.dump().substr(0, 200));
    }
    return split_self_report(reply["choices"][0]["message"]["content"].get<std::string>());
}

std::vector<double> HttpBackend::embed(const std::string& text) {
    if (trim(text).empty()) {
        throw Error(ErrorKind::InvalidInput, "cannot embed empty text");
    }
    nlohmann::json body;
    body["model"] = config_.embed_model;
    body["input"] = text;
    const nlohmann::json reply = parse_reply(post_json("/v1/embeddings", body.dump()), "embedding");
    if (!reply.contains("data") || reply["data"].empty() ||
        !reply["data"][0].contains("embedding")) {
        throw Error(ErrorKind::ParseError,
                    "embedding reply lacks data[0].embedding: " + reply.dump().substr(0, 200));
    }
    return reply["data"][0]["embedding"].get<std::vector<double>>();
}

Distribution HttpBackend::candidate_distribution(const std::string& prompt,
                                                 const std::vector<std::string>& candidates) {
    check_candidate_request(prompt, candidates);
    std::string scoring = "Score each candidate answer from 0 to 100 for how likely it is.\n"
                          "Reply with one line per candidate, in the form \"index: score\", "
                          "and no other text.\nPrompt: " + prompt + "\nCandidates:\n";
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        scoring += std::to_string(i + 1) + ". " + candidates[i] + "\n";
    }
    nlohmann::json body;
    body["model"] = config_.model;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", scoring}}});
    body["temperature"] = 0.0;
    body["max_tokens"] = 256;
    const nlohmann::json reply =
        parse_reply(post_json("/v1/chat/completions", body.dump()), "candidate scoring");
    if (!reply.contains("choices") || reply["choices"].empty() ||
        !reply["choices"][0].contains("message") ||
        !reply["choices"][0]["message"].contains("content")) {
        throw Error(ErrorKind::ParseError, "candidate scoring reply lacks content");
    }
    const std::string content = reply["choices"][0]["message"]["content"].get<std::string>();

    std::vector<double> weights(candidates.size(), -1.0);
    static const std::regex line_pattern(R"(^\s*(\d+)\s*[:.)-]\s*(\d+\.?\d*)\s*$)");
    for (const auto& line : split_lines(content)) {
        std::smatch match;
        if (!std::regex_match(line, match, line_pattern)) continue;
        const std::size_t index = std::stoul(match[1].str());
        if (index < 1 || index > candidates.size()) continue;
        weights[index - 1] = std::stod(match[2].str());
    }
    for (double weight : weights) {
        if (weight < 0.0) {
            throw Error(ErrorKind::ParseError,
                        "candidate scoring reply did not score every candidate: " +
                            content.substr(0, 200));
        }
    }
    Distribution dist{candidates, std::move(weights)};
    double total = 0.0;
    for (double w : dist.weights) total += w;
    if (total == 0.0) {
        return Distribution::uniform(candidates);
    }
    dist.weights = dist.normalized();
    return dist;
}

}  // namespace scopex
