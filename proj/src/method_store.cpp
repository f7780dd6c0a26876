#include "scopex/method_store.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <mutex>

#include <json.hpp>

#include "scopex/text.hpp"

namespace scopex {
namespace {

// Steps must be a decomposition of the solution: concatenating them with
// all whitespace stripped reproduces the whitespace-stripped solution.
std::string strip_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    }
    return out;
}

void check_steps(const std::vector<std::string>& steps, const std::string& solution) {
    std::string joined;
    for (const auto& step : steps) joined += strip_whitespace(step);
    if (joined != strip_whitespace(solution)) {
        throw Error(ErrorKind::InvalidInput, "steps do not reconstruct the solution");
    }
}

void sort_unique(std::vector<std::string>& values) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
}

std::vector<double> unit_normalized(std::vector<double> vec) {
    double norm_sq = 0.0;
    for (double component : vec) norm_sq += component * component;
    if (norm_sq == 0.0) {
        throw Error(ErrorKind::DegenerateEmbedding, "zero-norm embedding cannot be normalized");
    }
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    for (auto& component : vec) component *= inv_norm;
    return vec;
}

nlohmann::json method_to_json(const Method& method) {
    nlohmann::json record;
    record["id"] = method.id;
    record["question"] = method.question;
    record["solution"] = method.solution;
    record["steps"] = method.steps;
    record["embedding"] = method.embedding;
    record["tags"] = method.tags;
    record["applicability"] = method.applicability;
    record["origin"] = {{"kind", method.origin.label()},
                        {"parent", method.origin.parent}};
    return record;
}

MethodOrigin origin_from_json(const nlohmann::json& value) {
    const std::string kind = value.value("kind", "authored");
    const std::string parent = value.value("parent", "");
    if (kind == "authored") return MethodOrigin::authored();
    if (kind == "generalized-from") return MethodOrigin::generalized_from(parent);
    if (kind == "improved-from") return MethodOrigin::improved_from(parent);
    throw Error(ErrorKind::ParseError, "unknown method origin kind: " + kind);
}

Method method_from_json(const nlohmann::json& record) {
    Method method;
    method.id = record.at("id").get<std::string>();
    method.question = record.at("question").get<std::string>();
    method.solution = record.at("solution").get<std::string>();
    method.steps = record.value("steps", std::vector<std::string>{});
    method.embedding = record.at("embedding").get<std::vector<double>>();
    method.tags = record.value("tags", std::vector<std::string>{});
    method.applicability = record.value("applicability", std::vector<std::string>{});
    if (record.contains("origin")) method.origin = origin_from_json(record["origin"]);
    return method;
}

}  // namespace

std::string MethodOrigin::label() const {
    switch (kind) {
        case Kind::Authored: return "authored";
        case Kind::GeneralizedFrom: return "generalized-from";
        case Kind::ImprovedFrom: return "improved-from";
    }
    return "authored";
}

MethodOrigin MethodOrigin::authored() { return {}; }

MethodOrigin MethodOrigin::generalized_from(std::string parent_id) {
    return {Kind::GeneralizedFrom, std::move(parent_id)};
}

MethodOrigin MethodOrigin::improved_from(std::string parent_id) {
    return {Kind::ImprovedFrom, std::move(parent_id)};
}

std::string matched_on_label(RetrievalHit::MatchedOn matched_on) {
    return matched_on == RetrievalHit::MatchedOn::OriginalQuestion ? "original-question"
                                                                   : "extended-question";
}

double similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::DimensionMismatch, "embedding dimensions differ: " +
                                                      std::to_string(a.size()) + " vs " +
                                                      std::to_string(b.size()));
    }
    if (a.empty()) {
        throw Error(ErrorKind::DimensionMismatch, "embeddings must be non-empty");
    }
    double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if (norm_a == 0.0 || norm_b == 0.0) {
        throw Error(ErrorKind::DegenerateEmbedding, "cosine of a zero-norm embedding is undefined");
    }
    const double sim = dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
    return std::clamp(sim, -1.0, 1.0);
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
    return 1.0 - similarity(a, b);
}

std::string method_id_for(const std::string& question, const std::string& solution) {
    return hex64(fnv1a64(normalize(question) + '\x1f' + normalize(solution)));
}

MethodStore::MethodStore(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) {
        throw Error(ErrorKind::InvalidInput, "store embedding dimension must be positive");
    }
}

MethodStore MethodStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open method store: " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorKind::ParseError, "method store is missing its header line");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::ParseError, "method store header is not valid JSON");
    }
    if (!header.contains("dim")) {
        throw Error(ErrorKind::ParseError, "method store header lacks \"dim\"");
    }
    MethodStore store(header["dim"].get<std::size_t>());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorKind::ParseError,
                        "method store line " + std::to_string(line_no) + " is not valid JSON");
        }
        store.add_prepared(method_from_json(record));
    }
    return store;
}

void MethodStore::save(const std::string& path) const {
    std::shared_lock lock(mutex_);
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write method store: " + path);
    }
    out << nlohmann::json{{"dim", dim_}}.dump() << '\n';
    std::vector<const Method*> ordered;
    ordered.reserve(methods_.size());
    for (const auto& [_, method] : methods_) ordered.push_back(&method);
    std::sort(ordered.begin(), ordered.end(),
              [](const Method* a, const Method* b) { return a->id < b->id; });
    for (const Method* method : ordered) {
        out << method_to_json(*method).dump() << '\n';
    }
}

std::string MethodStore::add_method(const std::string& question, const std::string& solution,
                                    std::vector<std::string> steps, ModelGateway& gateway,
                                    std::vector<std::string> tags, MethodOrigin origin) {
    if (normalize(question).empty()) {
        throw Error(ErrorKind::InvalidInput, "method question must be non-empty");
    }
    if (normalize(solution).empty()) {
        throw Error(ErrorKind::InvalidInput, "method solution must be non-empty");
    }
    Method method;
    method.id = method_id_for(question, solution);
    {
        // Re-adding identical content must return the existing id without
        // touching the gateway.
        std::shared_lock lock(mutex_);
        if (methods_.count(method.id)) return method.id;
    }
    method.question = question;
    method.solution = solution;
    if (steps.empty()) {
        method.steps = {solution};
    } else {
        check_steps(steps, solution);
        method.steps = std::move(steps);
    }
    method.embedding = gateway.embed(question);
    method.tags = std::move(tags);
    sort_unique(method.tags);
    method.origin = std::move(origin);
    return add_prepared(std::move(method));
}

std::string MethodStore::add_prepared(Method method) {
    if (method.id.empty()) {
        method.id = method_id_for(method.question, method.solution);
    }
    if (method.embedding.size() != dim_) {
        throw Error(ErrorKind::DimensionMismatch,
                    "method embedding has dimension " + std::to_string(method.embedding.size()) +
                        ", store expects " + std::to_string(dim_));
    }
    method.embedding = unit_normalized(std::move(method.embedding));
    if (method.steps.empty()) method.steps = {method.solution};
    sort_unique(method.tags);
    sort_unique(method.applicability);
    std::string id = method.id;
    std::unique_lock lock(mutex_);
    insert_locked(std::move(method));
    return id;
}

void MethodStore::insert_locked(Method method) {
    auto [it, inserted] = methods_.try_emplace(method.id, method);
    if (inserted) return;
    // Merge: the applicability set is append-only, so reloading records in
    // any order converges to the same union.
    Method& existing = it->second;
    existing.applicability.insert(existing.applicability.end(), method.applicability.begin(),
                                  method.applicability.end());
    sort_unique(existing.applicability);
    existing.tags.insert(existing.tags.end(), method.tags.begin(), method.tags.end());
    sort_unique(existing.tags);
}

std::optional<Method> MethodStore::find(const std::string& method_id) const {
    std::shared_lock lock(mutex_);
    if (auto it = methods_.find(method_id); it != methods_.end()) return it->second;
    return std::nullopt;
}

std::vector<RetrievalHit> MethodStore::retrieve_nearest(const std::vector<double>& query,
                                                        std::size_t k,
                                                        std::optional<double> max_distance,
                                                        RetrievalHit::MatchedOn matched_on) const {
    if (k == 0) {
        throw Error(ErrorKind::InvalidInput, "retrieval requires k >= 1");
    }
    std::shared_lock lock(mutex_);
    std::vector<RetrievalHit> hits;
    hits.reserve(methods_.size());
    for (const auto& [id, method] : methods_) {
        const double dist = distance(query, method.embedding);
        if (max_distance && dist > *max_distance) continue;
        hits.push_back(RetrievalHit{id, dist, matched_on});
    }
    std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.method_id < b.method_id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

std::vector<RetrievalHit> MethodStore::retrieve_nearest(const std::string& query_text,
                                                        std::size_t k, ModelGateway& gateway,
                                                        std::optional<double> max_distance,
                                                        RetrievalHit::MatchedOn matched_on) const {
    return retrieve_nearest(gateway.embed(query_text), k, max_distance, matched_on);
}

Method MethodStore::record_applicability(const std::string& method_id,
                                         const std::string& question_id) {
    std::unique_lock lock(mutex_);
    auto it = methods_.find(method_id);
    if (it == methods_.end()) {
        throw Error(ErrorKind::NotFound, "no method with id " + method_id);
    }
    auto& applicability = it->second.applicability;
    auto pos = std::lower_bound(applicability.begin(), applicability.end(), question_id);
    if (pos == applicability.end() || *pos != question_id) {
        applicability.insert(pos, question_id);
    }
    return it->second;
}

std::vector<std::string> MethodStore::methods_applicable_to(const std::string& question_id) const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, method] : methods_) {
        if (std::binary_search(method.applicability.begin(), method.applicability.end(),
                               question_id)) {
            out.push_back(id);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t MethodStore::size() const {
    std::shared_lock lock(mutex_);
    return methods_.size();
}

std::vector<std::string> MethodStore::ids() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    out.reserve(methods_.size());
    for (const auto& [id, _] : methods_) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace scopex
