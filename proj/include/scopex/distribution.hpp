#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "scopex/error.hpp"

namespace scopex {

// Finite nonnegative weight list over named outcomes. Weights are kept as
// given; normalized() produces the probability view.
struct Distribution {
    std::vector<std::string> outcomes;
    std::vector<double> weights;

    // Throws InvalidInput on shape mismatch or negative weight,
    // DegenerateDistribution when no weight is positive.
    void validate() const;

    // Probabilities summing to 1 (within 1e-9 of it by construction).
    std::vector<double> normalized() const;

    static Distribution uniform(std::vector<std::string> outcomes);
};

// Nonnegative joint mass over (row outcome, col outcome) pairs.
struct JointTable {
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<std::vector<double>> cells;  // cells[r][c]

    void validate() const;
    double total_mass() const;
    std::vector<double> row_marginal() const;
    std::vector<double> col_marginal() const;
};

}  // namespace scopex
