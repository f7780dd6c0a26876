#pragma once

#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "scopex/gateway.hpp"

namespace scopex {

// Where a method came from. Generalized and improved methods keep a link to
// the method they were derived from.
struct MethodOrigin {
    enum class Kind { Authored, GeneralizedFrom, ImprovedFrom };
    Kind kind = Kind::Authored;
    std::string parent;  // originating method id; empty for authored

    std::string label() const;
    static MethodOrigin authored();
    static MethodOrigin generalized_from(std::string parent_id);
    static MethodOrigin improved_from(std::string parent_id);
};

// A reusable question–solution pair, decoupled from any one asking of the
// question. `applicability` records every question id this method is known
// to solve and only ever grows.
struct Method {
    std::string id;
    std::string question;
    std::string solution;
    std::vector<std::string> steps;
    std::vector<double> embedding;  // unit norm, dimension fixed store-wide
    std::vector<std::string> tags;
    std::vector<std::string> applicability;  // sorted, unique question ids
    MethodOrigin origin;
};

struct RetrievalHit {
    enum class MatchedOn { OriginalQuestion, ExtendedQuestion };
    std::string method_id;
    double distance = 0.0;  // 1 − cosine similarity, in [0,2]
    MatchedOn matched_on = MatchedOn::OriginalQuestion;
};

std::string matched_on_label(RetrievalHit::MatchedOn matched_on);

// Cosine similarity, clamped to [−1,1] against rounding; both vectors must
// share dimension and have nonzero norm.
double similarity(const std::vector<double>& a, const std::vector<double>& b);
double distance(const std::vector<double>& a, const std::vector<double>& b);

// In-memory store of methods with optional line-delimited JSON persistence.
// Retrieval is an exhaustive scan — intended scale is a personal library,
// not a vector database. Many readers may retrieve concurrently; writes
// take the exclusive lock.
class MethodStore {
public:
    // `dim` fixes the embedding dimension for every method in the store.
    explicit MethodStore(std::size_t dim);

    // Movable so load() can return by value; the mutex is not moved, and a
    // store must not be moved while other threads are using it.
    MethodStore(MethodStore&& other) noexcept
        : dim_(other.dim_), methods_(std::move(other.methods_)) {}
    MethodStore& operator=(MethodStore&& other) noexcept {
        dim_ = other.dim_;
        methods_ = std::move(other.methods_);
        return *this;
    }
    MethodStore(const MethodStore&) = delete;
    MethodStore& operator=(const MethodStore&) = delete;

    // Loads a store from `path` (header line {"dim":D}, then one method
    // record per line). Later records for an id merge into earlier ones:
    // applicability and tags are unioned, so reload order never matters.
    static MethodStore load(const std::string& path);

    // Appends records for every method to `path`, header first.
    void save(const std::string& path) const;

    // Inserts a method, embedding the question via `gateway`. The id is a
    // content hash of the normalized question and solution, so re-adding
    // identical content is a no-op returning the same id. When `steps` is
    // empty the solution becomes the single step.
    std::string add_method(const std::string& question, const std::string& solution,
                           std::vector<std::string> steps, ModelGateway& gateway,
                           std::vector<std::string> tags = {},
                           MethodOrigin origin = MethodOrigin::authored());

    // Inserts a fully formed method (embedding already computed). Used by
    // load() and by generalization, which must copy an existing embedding.
    std::string add_prepared(Method method);

    std::optional<Method> find(const std::string& method_id) const;

    // Nearest methods to the query embedding: at most k hits, filtered by
    // max_distance when given, sorted ascending by distance with ties
    // broken by ascending method id.
    std::vector<RetrievalHit> retrieve_nearest(
        const std::vector<double>& query, std::size_t k,
        std::optional<double> max_distance = std::nullopt,
        RetrievalHit::MatchedOn matched_on = RetrievalHit::MatchedOn::OriginalQuestion) const;

    // Convenience overload: embeds `query_text` through `gateway` first.
    std::vector<RetrievalHit> retrieve_nearest(
        const std::string& query_text, std::size_t k, ModelGateway& gateway,
        std::optional<double> max_distance = std::nullopt,
        RetrievalHit::MatchedOn matched_on = RetrievalHit::MatchedOn::OriginalQuestion) const;

    // Adds `question_id` to the method's applicability set; idempotent.
    Method record_applicability(const std::string& method_id, const std::string& question_id);

    // Every method whose applicability set contains `question_id`, sorted
    // by method id. This is M(q) for a question's id.
    std::vector<std::string> methods_applicable_to(const std::string& question_id) const;

    std::size_t size() const;
    std::size_t dim() const { return dim_; }
    std::vector<std::string> ids() const;  // sorted

private:
    void insert_locked(Method method);

    std::size_t dim_;
    std::unordered_map<std::string, Method> methods_;
    mutable std::shared_mutex mutex_;
};

// Deterministic method identity: content hash over the normalized question
// and solution, separated so ("ab","c") and ("a","bc") cannot collide.
std::string method_id_for(const std::string& question, const std::string& solution);

}  // namespace scopex
