#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "scopex/entropy.hpp"
#include "scopex/scripted_backend.hpp"
#include "support.hpp"

using namespace scopex;

namespace {

bool throws_kind(ErrorKind kind, const std::function<void()>& body) {
    try {
        body();
    } catch (const Error& e) {
        return e.kind() == kind;
    }
    return false;
}

// Straightforward reference implementation to check against.
double entropy_oracle(const std::vector<double>& probs) {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
}

}  // namespace

TEST_CASE("entropy of frozen small distributions") {
    CHECK(entropy_bits(Distribution{{"a", "b", "c"}, {0.5, 0.25, 0.25}}) ==
          doctest::Approx(1.5).epsilon(1e-12));
    CHECK(entropy_bits(Distribution{{"a", "b"}, {0.5, 0.5}}) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(entropy_bits(Distribution{{"a"}, {1.0}}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(entropy_bits(Distribution{{"a", "b"}, {1.0, 0.0}}) ==
          doctest::Approx(0.0).epsilon(1e-12));
    // Weights need not be normalized going in.
    CHECK(entropy_bits(Distribution{{"a", "b", "c"}, {2.0, 1.0, 1.0}}) ==
          doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("entropy law: 0 <= H <= log2 n with equality at uniform") {
    std::mt19937_64 rng(20240817);
    std::uniform_int_distribution<std::size_t> size_dist(1, 64);
    std::uniform_real_distribution<double> weight_dist(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = size_dist(rng);
        Distribution dist;
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            dist.outcomes.push_back("o" + std::to_string(i));
            const double w = weight_dist(rng);
            dist.weights.push_back(w);
            any = any || w > 0.0;
        }
        if (!any) dist.weights[0] = 1.0;
        const double h = entropy_bits(dist);
        CHECK(h >= -1e-12);
        CHECK(h <= std::log2(static_cast<double>(n)) + 1e-9);
        CHECK(h == doctest::Approx(entropy_oracle(dist.normalized())).epsilon(1e-9));
    }
    for (std::size_t n : {1u, 2u, 3u, 17u, 64u}) {
        std::vector<std::string> outcomes;
        for (std::size_t i = 0; i < n; ++i) outcomes.push_back("u" + std::to_string(i));
        const double h = entropy_bits(Distribution::uniform(outcomes));
        CHECK(std::abs(h - std::log2(static_cast<double>(n))) <= 1e-9);
    }
}

TEST_CASE("extension weights count novel coverage with an epsilon floor") {
    const CoverageMap coverage = {
        {"e1", {"q1", "q2"}},
        {"e2", {"q2", "q3"}},
        {"e3", {"q1", "q2"}},
    };
    const Distribution dist = extension_weights({"e1", "e2", "e3"}, coverage);
    REQUIRE(dist.outcomes == std::vector<std::string>{"e1", "e2", "e3"});
    // Novel counts: e1 -> 2, e2 -> 1 (q3 only), e3 -> 0 (fully coupled).
    const double eps = 1e-6;
    const double total = 3.0 + 3.0 * eps;
    CHECK(dist.weights[0] == doctest::Approx((2.0 + eps) / total).epsilon(1e-12));
    CHECK(dist.weights[1] == doctest::Approx((1.0 + eps) / total).epsilon(1e-12));
    CHECK(dist.weights[2] == doctest::Approx(eps / total).epsilon(1e-12));

    // A coupled extension contributes almost nothing to the entropy.
    const double with_coupled = entropy_bits(dist);
    const double without = entropy_bits(extension_weights({"e1", "e2"}, coverage));
    CHECK(std::abs(with_coupled - without) < 1e-4);
}

TEST_CASE("extension weights reject unknown ids and empty lists") {
    const CoverageMap coverage = {{"e1", {"q1"}}};
    CHECK(throws_kind(ErrorKind::InvalidInput, [&] { extension_weights({"ghost"}, coverage); }));
    CHECK(throws_kind(ErrorKind::DegenerateDistribution,
                      [&] { extension_weights({}, coverage); }));
}

TEST_CASE("coverage entropy is log2 of the covered-question count") {
    CHECK(coverage_entropy_bits(1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(coverage_entropy_bits(2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(coverage_entropy_bits(3) == doctest::Approx(1.584962500721156).epsilon(1e-12));
    CHECK(coverage_entropy_bits(8) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(throws_kind(ErrorKind::DegenerateDistribution, [] { coverage_entropy_bits(0); }));
}

TEST_CASE("entropy gain: zero for subsets, one bit for equal disjoint additions") {
    const std::vector<std::string> base = {"q1", "q2"};
    CHECK(entropy_gain_bits(base, {"q1"}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(entropy_gain_bits(base, {"q1", "q2"}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(entropy_gain_bits(base, {}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(entropy_gain_bits(base, {"q3", "q4"}) == doctest::Approx(1.0).epsilon(1e-12));
    // Overlapping addition: union {q1,q2,q3} -> log2 3 - 1.
    CHECK(entropy_gain_bits(base, {"q2", "q3"}) ==
          doctest::Approx(std::log2(3.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("entropy gain matches the enumeration oracle on random sets") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> label(0, 19);
    std::uniform_int_distribution<std::size_t> count(1, 10);
    for (int trial = 0; trial < 200; ++trial) {
        std::set<std::string> base_set, added_set;
        for (std::size_t i = 0, n = count(rng); i < n; ++i) {
            base_set.insert("q" + std::to_string(label(rng)));
        }
        for (std::size_t i = 0, n = count(rng); i < n; ++i) {
            added_set.insert("q" + std::to_string(label(rng)));
        }
        std::set<std::string> union_set = base_set;
        union_set.insert(added_set.begin(), added_set.end());
        const double expected = std::log2(static_cast<double>(union_set.size())) -
                                std::log2(static_cast<double>(base_set.size()));
        const std::vector<std::string> base(base_set.begin(), base_set.end());
        const std::vector<std::string> added(added_set.begin(), added_set.end());
        CHECK(entropy_gain_bits(base, added) == doctest::Approx(expected).epsilon(1e-9));
        CHECK(entropy_gain_bits(base, added) >= -1e-12);
    }
}

TEST_CASE("joint entropy of the frozen correlated table") {
    const JointTable table{{"r0", "r1"}, {"c0", "c1"}, {{0.4, 0.1}, {0.1, 0.4}}};
    CHECK(joint_entropy_bits(table) == doctest::Approx(1.721928094887362).epsilon(1e-12));
    CHECK(mutual_information_bits(table) ==
          doctest::Approx(0.2780719051126379).epsilon(1e-9));
    CHECK_FALSE(independent_by_additivity(table));
}

TEST_CASE("independence additivity holds exactly on product tables") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.05, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> row = {unit(rng), unit(rng), unit(rng)};
        std::vector<double> col = {unit(rng), unit(rng)};
        double row_total = row[0] + row[1] + row[2];
        double col_total = col[0] + col[1];
        JointTable table;
        table.rows = {"r0", "r1", "r2"};
        table.cols = {"c0", "c1"};
        table.cells.resize(3, std::vector<double>(2));
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 2; ++c) {
                table.cells[r][c] = (row[r] / row_total) * (col[c] / col_total);
            }
        }
        CHECK(independent_by_additivity(table, 1e-6));
        const double h_joint = joint_entropy_bits(table);
        const double h_row = entropy_oracle(Distribution{table.rows, table.row_marginal()}.normalized());
        const double h_col = entropy_oracle(Distribution{table.cols, table.col_marginal()}.normalized());
        CHECK(std::abs(h_joint - h_row - h_col) <= 1e-6);
        CHECK(mutual_information_bits(table) == doctest::Approx(0.0).epsilon(1e-6));
    }
}

TEST_CASE("subadditivity: joint entropy never exceeds the marginal sum") {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> dim(1, 5);
    for (int trial = 0; trial < 100; ++trial) {
        JointTable table;
        const std::size_t nr = dim(rng), nc = dim(rng);
        for (std::size_t r = 0; r < nr; ++r) table.rows.push_back("r" + std::to_string(r));
        for (std::size_t c = 0; c < nc; ++c) table.cols.push_back("c" + std::to_string(c));
        table.cells.assign(nr, std::vector<double>(nc, 0.0));
        bool any = false;
        for (auto& row : table.cells) {
            for (double& cell : row) {
                cell = unit(rng);
                any = any || cell > 0.0;
            }
        }
        if (!any) table.cells[0][0] = 1.0;
        const double h_joint = joint_entropy_bits(table);
        const double h_row = entropy_oracle(Distribution{table.rows, table.row_marginal()}.normalized());
        const double h_col = entropy_oracle(Distribution{table.cols, table.col_marginal()}.normalized());
        CHECK(h_joint <= h_row + h_col + 1e-9);
        CHECK(mutual_information_bits(table) >= 0.0);
    }
}

TEST_CASE("network entropy: per-tree values, combined union, and the lower bound") {
    // Two trees with disjoint coverage, each uniform over two extensions.
    const CoverageMap coverage = {
        {"a1", {"q1"}}, {"a2", {"q2"}}, {"b1", {"q3"}}, {"b2", {"q4"}}};
    const NetworkEntropy result = network_entropy_bits({{"a1", "a2"}, {"b1", "b2"}}, coverage);
    REQUIRE(result.per_tree_bits.size() == 2);
    CHECK(result.per_tree_bits[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(result.per_tree_bits[1] == doctest::Approx(1.0).epsilon(1e-9));
    // Equality with the sum on the disjoint uniform fixture.
    CHECK(result.combined_bits ==
          doctest::Approx(result.per_tree_bits[0] + result.per_tree_bits[1]).epsilon(1e-6));
    CHECK(result.combined_bits >= result.per_tree_bits[0] - 1e-9);

    // Shared extensions are deduplicated before the union entropy.
    const NetworkEntropy shared = network_entropy_bits({{"a1", "a2"}, {"a1", "a2"}}, coverage);
    CHECK(shared.combined_bits == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("network entropy bound violations are reported, not silently returned") {
    // One tree is uniform over two single-question extensions (1 bit); a
    // second tree's extension dwarfs them with 98 novel questions, which
    // skews the union far below the first tree's entropy.
    CoverageMap coverage = {{"a1", {"q1"}}, {"a2", {"q2"}}};
    std::vector<std::string> big;
    for (int i = 0; i < 98; ++i) big.push_back("big" + std::to_string(i));
    coverage["b1"] = big;
    CHECK(throws_kind(ErrorKind::EntropyBoundViolated, [&] {
        network_entropy_bits({{"a1", "a2"}, {"b1"}}, coverage);
    }));
}

TEST_CASE("KL divergence matches frozen oracles") {
    const Distribution p{{"a", "b"}, {0.9, 0.1}};
    const Distribution q{{"a", "b"}, {0.5, 0.5}};
    CHECK(kl_divergence_bits(p, q) == doctest::Approx(0.5310044064107189).epsilon(1e-9));
    CHECK(kl_divergence_bits(q, p) == doctest::Approx(0.7369655941662061).epsilon(1e-9));

    const Distribution point{{"a", "b"}, {1.0, 0.0}};
    CHECK(kl_divergence_bits(point, q) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("KL divergence is asymmetric in general and zero at p = q") {
    const Distribution uniform4 = Distribution::uniform({"a", "b", "c", "d"});
    CHECK(std::abs(kl_divergence_bits(uniform4, uniform4)) <= 1e-9);

    const Distribution skew{{"a", "b"}, {0.9, 0.1}};
    CHECK(std::abs(kl_divergence_bits(skew, skew)) <= 1e-9);
}

TEST_CASE("KL divergence is non-negative over random pairs") {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> size_dist(2, 16);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = size_dist(rng);
        Distribution p, q;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string name = "o" + std::to_string(i);
            p.outcomes.push_back(name);
            q.outcomes.push_back(name);
            p.weights.push_back(unit(rng));
            q.weights.push_back(unit(rng));
        }
        p.weights[trial % n] += 0.5;  // guarantee positive mass
        q.weights[(trial + 1) % n] += 0.5;
        CHECK(kl_divergence_bits(p, q) >= 0.0);
    }
}

TEST_CASE("KL divergence smooths zero cells in q instead of dividing by zero") {
    const Distribution p{{"a", "b"}, {0.5, 0.5}};
    const Distribution q{{"a", "b"}, {1.0, 0.0}};
    const double kl = kl_divergence_bits(p, q);
    CHECK(std::isfinite(kl));
    CHECK(kl > 10.0);  // half the mass sits on a smoothed ~1e-9 cell
}

TEST_CASE("KL divergence requires matching outcome lists") {
    const Distribution p{{"a", "b"}, {0.5, 0.5}};
    const Distribution q{{"a", "c"}, {0.5, 0.5}};
    const Distribution shorter{{"a"}, {1.0}};
    CHECK(throws_kind(ErrorKind::OutcomeMismatch, [&] { kl_divergence_bits(p, q); }));
    CHECK(throws_kind(ErrorKind::OutcomeMismatch, [&] { kl_divergence_bits(p, shorter); }));
}

TEST_CASE("information gain is zero when the extension changes nothing") {
    ScriptedBackend backend(8, 0);
    backend.add_distribution({"", false, {1.0, 1.0}});  // matches every prompt
    const double gain = information_gain_bits("original question", "original question\nwith more",
                                              {"yes", "no"}, backend);
    CHECK(std::abs(gain) <= 1e-9);
}

TEST_CASE("information gain measures the shift toward the extended distribution") {
    ScriptedBackend backend(8, 0);
    // Sorted candidates ("no", "yes"): original is uniform, extended is 4:1
    // toward yes.
    backend.add_distribution({"with context", false, {1.0, 4.0}});
    backend.add_distribution({"", false, {1.0, 1.0}});
    const double gain =
        information_gain_bits("plain question", "plain question with context", {"yes", "no"}, backend);
    // KL((0.2,0.8) || (0.5,0.5)) with outcomes sorted -> 0.2 lg 0.4 + 0.8 lg 1.6
    const double expected = 0.2 * std::log2(0.4) + 0.8 * std::log2(1.6);
    CHECK(gain == doctest::Approx(expected).epsilon(1e-9));
    CHECK(gain > 0.0);
}

TEST_CASE("entropy report: probabilities, entropy, and per-extension gains") {
    const CoverageMap coverage = {
        {"e1", {"q1", "q2"}},
        {"e2", {"q2", "q3"}},
        {"e3", {"q4"}},
    };
    const EntropyReport report = build_entropy_report({"e1", "e2", "e3"}, coverage);
    CHECK(report.entropy_bits == doctest::Approx(1.5).epsilon(1e-4));
    REQUIRE(report.gains.size() == 2);
    CHECK(report.gains[0].first == "e2");
    CHECK(report.gains[0].second == doctest::Approx(std::log2(3.0) - 1.0).epsilon(1e-12));
    CHECK(report.gains[1].first == "e3");
    CHECK(report.gains[1].second == doctest::Approx(2.0 - std::log2(3.0)).epsilon(1e-12));

    const std::string json_text = entropy_report_to_json(report);
    const nlohmann::json doc = nlohmann::json::parse(json_text);
    CHECK(doc.contains("probabilities"));
    CHECK(doc.contains("entropy_bits"));
    CHECK(doc.contains("gains"));
    CHECK(doc["gains"].size() == 2);
    CHECK(doc["gains"][0]["id"] == "e2");
    CHECK(doc["probabilities"].size() == 3);
}

TEST_CASE("entropy report with a single extension has no gains") {
    const CoverageMap coverage = {{"e1", {"q1"}}};
    const EntropyReport report = build_entropy_report({"e1"}, coverage);
    CHECK(report.gains.empty());
    CHECK(report.entropy_bits == doctest::Approx(0.0).epsilon(1e-9));
}
