#include "scopex/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

#include "scopex/error.hpp"
#include "scopex/text.hpp"

namespace scopex {
namespace {

constexpr double kCoverageEpsilon = 1e-6;
constexpr double kSmoothingAlpha = 1e-9;
constexpr double kBoundSlack = 1e-9;

double plogp_sum(const std::vector<double>& probabilities) {
    double h = 0.0;
    for (double p : probabilities) {
        if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
}

}  // namespace

double entropy_bits(const Distribution& dist) {
    return plogp_sum(dist.normalized());
}

Distribution extension_weights(const std::vector<std::string>& extension_ids,
                               const CoverageMap& coverage) {
    if (extension_ids.empty()) {
        throw Error(ErrorKind::DegenerateDistribution, "no extensions to weight");
    }
    // The map may cover extensions beyond this listing (one global map
    // serves many per-tree subsets), but every listed id must be covered.
    for (const auto& id : extension_ids) {
        if (!coverage.count(id)) {
            throw Error(ErrorKind::InvalidInput, "extension has no coverage entry: " + id);
        }
    }
    Distribution dist;
    dist.outcomes = extension_ids;
    dist.weights.reserve(extension_ids.size());
    std::unordered_set<std::string> covered;
    for (const auto& id : extension_ids) {
        std::size_t novel = 0;
        for (const auto& question : coverage.at(id)) {
            if (covered.insert(question).second) ++novel;
        }
        dist.weights.push_back(static_cast<double>(novel) + kCoverageEpsilon);
    }
    dist.weights = dist.normalized();
    return dist;
}

double coverage_entropy_bits(std::size_t covered_questions) {
    if (covered_questions == 0) {
        throw Error(ErrorKind::DegenerateDistribution, "method covers no questions");
    }
    return std::log2(static_cast<double>(covered_questions));
}

double entropy_gain_bits(const std::vector<std::string>& base,
                         const std::vector<std::string>& added) {
    if (base.empty()) {
        throw Error(ErrorKind::DegenerateDistribution, "base applicability set is empty");
    }
    std::unordered_set<std::string> all(base.begin(), base.end());
    const double base_bits = std::log2(static_cast<double>(all.size()));
    all.insert(added.begin(), added.end());
    return std::log2(static_cast<double>(all.size())) - base_bits;
}

double joint_entropy_bits(const JointTable& table) {
    table.validate();
    const double total = table.total_mass();
    double h = 0.0;
    for (const auto& row : table.cells) {
        for (double cell : row) {
            const double p = cell / total;
            if (p > 0.0) h -= p * std::log2(p);
        }
    }
    return h;
}

bool independent_by_additivity(const JointTable& table, double tolerance) {
    const double joint = joint_entropy_bits(table);
    const double rows = plogp_sum(Distribution{table.rows, table.row_marginal()}.normalized());
    const double cols = plogp_sum(Distribution{table.cols, table.col_marginal()}.normalized());
    return std::abs(joint - rows - cols) <= tolerance;
}

double mutual_information_bits(const JointTable& table) {
    const double joint = joint_entropy_bits(table);
    const double rows = plogp_sum(Distribution{table.rows, table.row_marginal()}.normalized());
    const double cols = plogp_sum(Distribution{table.cols, table.col_marginal()}.normalized());
    const double mi = rows + cols - joint;
    // Exact value is non-negative; rounding in the three sums can leave a
    // hair below zero.
    return mi < 0.0 ? 0.0 : mi;
}

NetworkEntropy network_entropy_bits(const std::vector<std::vector<std::string>>& extension_sets,
                                    const CoverageMap& coverage) {
    std::vector<std::string> all_ids;
    std::unordered_set<std::string> seen;
    for (const auto& set : extension_sets) {
        for (const auto& id : set) {
            if (seen.insert(id).second) all_ids.push_back(id);
        }
    }
    if (all_ids.empty()) {
        throw Error(ErrorKind::DegenerateDistribution, "union of extension sets is empty");
    }
    NetworkEntropy result;
    result.combined_bits = entropy_bits(extension_weights(all_ids, coverage));
    result.per_tree_bits.reserve(extension_sets.size());
    double max_tree = 0.0;
    for (const auto& set : extension_sets) {
        const double bits = entropy_bits(extension_weights(set, coverage));
        result.per_tree_bits.push_back(bits);
        max_tree = std::max(max_tree, bits);
    }
    if (result.combined_bits < max_tree - kBoundSlack) {
        throw Error(ErrorKind::EntropyBoundViolated,
                    "combined entropy " + fmt_double(result.combined_bits) +
                        " fell below the largest per-tree entropy " + fmt_double(max_tree));
    }
    return result;
}

double kl_divergence_bits(const Distribution& p, const Distribution& q) {
    p.validate();
    q.validate();
    if (p.outcomes != q.outcomes) {
        throw Error(ErrorKind::OutcomeMismatch, "distributions are over different outcome lists");
    }
    const std::vector<double> pn = p.normalized();
    std::vector<double> qn = q.normalized();
    bool smoothed = false;
    for (auto& cell : qn) {
        if (cell == 0.0) {
            cell = kSmoothingAlpha;
            smoothed = true;
        }
    }
    if (smoothed) {
        double total = 0.0;
        for (double cell : qn) total += cell;
        for (auto& cell : qn) cell /= total;
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < pn.size(); ++i) {
        if (pn[i] > 0.0) kl += pn[i] * std::log2(pn[i] / qn[i]);
    }
    return kl < 0.0 && kl > -1e-12 ? 0.0 : kl;
}

double information_gain_bits(const std::string& original_prompt,
                             const std::string& extended_prompt,
                             const std::vector<std::string>& candidates,
                             ModelGateway& gateway) {
    check_candidate_request(original_prompt, candidates);
    check_candidate_request(extended_prompt, candidates);
    const Distribution original = gateway.candidate_distribution(original_prompt, candidates);
    const Distribution extended = gateway.candidate_distribution(extended_prompt, candidates);
    return kl_divergence_bits(extended, original);
}

EntropyReport build_entropy_report(const std::vector<std::string>& extension_ids,
                                   const CoverageMap& coverage) {
    EntropyReport report;
    const Distribution dist = extension_weights(extension_ids, coverage);
    for (std::size_t i = 0; i < dist.outcomes.size(); ++i) {
        report.per_extension[dist.outcomes[i]] = dist.weights[i];
    }
    report.entropy_bits = entropy_bits(dist);

    // Gain of each extension beyond the first: how much the union coverage
    // grows, in uniform bits, when its questions join the running pool.
    // An empty pool carries 0 bits so the first covered question registers
    // as pure gain.
    std::unordered_set<std::string> pool;
    auto absorb = [&](const std::string& id) {
        if (auto it = coverage.find(id); it != coverage.end()) {
            pool.insert(it->second.begin(), it->second.end());
        }
    };
    auto pool_bits = [&] {
        return pool.empty() ? 0.0 : std::log2(static_cast<double>(pool.size()));
    };
    absorb(extension_ids.front());
    double before = pool_bits();
    for (std::size_t i = 1; i < extension_ids.size(); ++i) {
        absorb(extension_ids[i]);
        const double after = pool_bits();
        report.gains.emplace_back(extension_ids[i], after - before);
        before = after;
    }
    return report;
}

std::string entropy_report_to_json(const EntropyReport& report) {
    nlohmann::json doc;
    doc["probabilities"] = nlohmann::json::object();
    for (const auto& [id, p] : report.per_extension) doc["probabilities"][id] = p;
    doc["entropy_bits"] = report.entropy_bits;
    doc["gains"] = nlohmann::json::array();
    for (const auto& [id, delta] : report.gains) {
        doc["gains"].push_back({{"id", id}, {"delta", delta}});
    }
    return doc.dump(2);
}

}  // namespace scopex
