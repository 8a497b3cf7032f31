#pragma once

#include <vector>

#include "quesco/types.hpp"

namespace quesco {
namespace loss {

// Per-rank temperatures tau_0..tau_{L+1}, positive and non-decreasing.
struct Temperatures {
    std::vector<double> tau;

    // Paper configuration for L = 3: {0.1, 0.1, 0.225, 0.35, 0.6}.
    static Temperatures paper_default() { return {{0.1, 0.1, 0.225, 0.35, 0.6}}; }

    int levels() const { return static_cast<int>(tau.size()) - 2; }
    void validate() const;
};

struct LossReport {
    double total = 0.0;
    std::vector<double> per_rank;     // l_0..l_L; 0 for skipped ranks
    std::vector<int> skipped_ranks;   // ranks in 0..L with empty question sets
};

// sims[u] holds h(q, p) for every p in Q^u, u in 0..L+1. Ranks 0..L with a
// non-empty set contribute l_i; Q^{L+1} appears only in denominators.
// If `grad` is non-null it receives dTotal/dsims with matching shape.
LossReport rince(const std::vector<std::vector<double>>& sims, const Temperatures& tau,
                 std::vector<std::vector<double>>* grad = nullptr);

double info_nce(const std::vector<double>& positives, const std::vector<double>& negatives,
                double tau, std::vector<double>* grad_positives = nullptr,
                std::vector<double>* grad_negatives = nullptr);

}  // namespace loss
}  // namespace quesco
