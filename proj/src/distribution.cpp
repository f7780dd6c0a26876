#include "scopex/distribution.hpp"

namespace scopex {

void Distribution::validate() const {
    if (outcomes.size() != weights.size()) {
        throw Error(ErrorKind::InvalidInput, "distribution outcome/weight length mismatch");
    }
    if (outcomes.empty()) {
        throw Error(ErrorKind::DegenerateDistribution, "distribution has no outcomes");
    }
    bool any_positive = false;
    for (double w : weights) {
        if (w < 0.0) throw Error(ErrorKind::InvalidInput, "negative weight in distribution");
        if (w > 0.0) any_positive = true;
    }
    if (!any_positive) {
        throw Error(ErrorKind::DegenerateDistribution, "all weights are zero");
    }
}

std::vector<double> Distribution::normalized() const {
    validate();
    double total = 0.0;
    for (double w : weights) total += w;
    std::vector<double> probs(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) probs[i] = weights[i] / total;
    return probs;
}

Distribution Distribution::uniform(std::vector<std::string> outcomes) {
    Distribution d;
    d.weights.assign(outcomes.size(), 1.0);
    d.outcomes = std::move(outcomes);
    return d;
}

void JointTable::validate() const {
    if (rows.empty() || cols.empty()) {
        throw Error(ErrorKind::DegenerateDistribution, "joint table has an empty axis");
    }
    if (cells.size() != rows.size()) {
        throw Error(ErrorKind::InvalidInput, "joint table row count mismatch");
    }
    for (const auto& row : cells) {
        if (row.size() != cols.size()) {
            throw Error(ErrorKind::InvalidInput, "joint table column count mismatch");
        }
        for (double v : row) {
            if (v < 0.0) throw Error(ErrorKind::InvalidInput, "negative cell in joint table");
        }
    }
    if (total_mass() <= 0.0) {
        throw Error(ErrorKind::DegenerateDistribution, "joint table has zero total mass");
    }
}

double JointTable::total_mass() const {
    double total = 0.0;
    for (const auto& row : cells) {
        for (double v : row) total += v;
    }
    return total;
}

std::vector<double> JointTable::row_marginal() const {
    std::vector<double> out(rows.size(), 0.0);
    for (std::size_t r = 0; r < cells.size(); ++r) {
        for (double v : cells[r]) out[r] += v;
    }
    return out;
}

std::vector<double> JointTable::col_marginal() const {
    std::vector<double> out(cols.size(), 0.0);
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c];
    }
    return out;
}

}  // namespace scopex
