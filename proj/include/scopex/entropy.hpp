#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "scopex/distribution.hpp"
#include "scopex/gateway.hpp"

namespace scopex {

// Coverage: which question ids each extension made answerable.
using CoverageMap = std::map<std::string, std::vector<std::string>>;

// Shannon entropy in bits of the normalized weights; 0·log0 := 0.
double entropy_bits(const Distribution& dist);

// Probability over extensions by novel coverage: an extension's weight is
// the number of questions it covers that no earlier-listed extension
// already covered, plus epsilon = 1e-6, then normalized. A coupled
// extension (coverage contained in its predecessors') lands on the epsilon
// floor and contributes almost nothing to the entropy.
Distribution extension_weights(const std::vector<std::string>& extension_ids,
                               const CoverageMap& coverage);

// Entropy of a method's applicability set under uniform weighting:
// log2(count). Count must be positive.
double coverage_entropy_bits(std::size_t covered_questions);

// Uniform-entropy increase from widening an applicability set:
// log2|base ∪ added| − log2|base|. Always ≥ 0; 0 exactly when added ⊆ base.
double entropy_gain_bits(const std::vector<std::string>& base,
                         const std::vector<std::string>& added);

// Joint Shannon entropy in bits of a two-variable table.
double joint_entropy_bits(const JointTable& table);

// True when joint entropy matches the sum of the marginal entropies within
// `tolerance` — the additivity criterion for independence.
bool independent_by_additivity(const JointTable& table, double tolerance = 1e-6);

// I = H(row) + H(col) − H(joint), clamped to 0 at negative rounding noise.
double mutual_information_bits(const JointTable& table);

struct NetworkEntropy {
    double combined_bits = 0.0;
    std::vector<double> per_tree_bits;
};

// Entropy of each extension set and of their union (order-preserving,
// deduplicated). Checks the lower bound combined ≥ max(per_tree) − 1e-9 and
// throws entropy-bound-violated if a weighting ever breaks it.
NetworkEntropy network_entropy_bits(const std::vector<std::vector<std::string>>& extension_sets,
                                    const CoverageMap& coverage);

// KL(p ‖ q) in bits. Outcome lists must match exactly; q's zero cells are
// smoothed with alpha = 1e-9 and q renormalized before the sum.
double kl_divergence_bits(const Distribution& p, const Distribution& q);

// KL between the gateway's candidate distributions for the extended prompt
// and the original prompt: how much the extension shifted the answer.
double information_gain_bits(const std::string& original_prompt,
                             const std::string& extended_prompt,
                             const std::vector<std::string>& candidates,
                             ModelGateway& gateway);

struct EntropyReport {
    std::map<std::string, double> per_extension;          // id → probability
    double entropy_bits = 0.0;
    std::vector<std::pair<std::string, double>> gains;    // (added id, ΔH)
};

// Builds the report for an ordered extension list: probabilities and
// entropy from novel coverage, plus the cumulative coverage-entropy gain
// contributed by each extension after the first.
EntropyReport build_entropy_report(const std::vector<std::string>& extension_ids,
                                   const CoverageMap& coverage);

// Serialized as {"probabilities":{id:p}, "entropy_bits":x, "gains":[{id,delta}]}
// with two-space indentation.
std::string entropy_report_to_json(const EntropyReport& report);

}  // namespace scopex
