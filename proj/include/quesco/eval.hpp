#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quesco/rng.hpp"
#include "quesco/types.hpp"

namespace quesco {
namespace eval {

// --- metric primitives ---
double pearson(const std::vector<double>& x, const std::vector<double>& y);
double spearman(const std::vector<double>& x, const std::vector<double>& y);  // average ranks on ties
double accuracy(const std::vector<int>& truth, const std::vector<int>& pred);
double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred, int num_classes);
double mae(const std::vector<double>& truth, const std::vector<double>& pred);
double rmse(const std::vector<double>& truth, const std::vector<double>& pred);
// Degree of agreement over ordered pairs (truth_i > truth_j); prediction ties
// count 0.5. Throws when no ordered pair exists.
double doa(const std::vector<double>& truth, const std::vector<double>& pred);

using RepMap = std::map<std::string, Eigen::VectorXd>;

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct ProbeResult {
    std::string task;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::map<std::string, double> metrics;
    std::vector<std::string> notes;
};

// Cosine of raw (pre-projector) representations vs gold scores; no training.
ProbeResult zero_shot_similarity(const RepMap& reps, const std::vector<SimilarityLabel>& labels);

// Linear softmax classifier trained by gradient descent on frozen reps.
struct ProbeOptions {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    int epochs = 400;
    double lr = 0.5;
    double l2 = 1e-4;
};
ProbeResult concept_probe(const RepMap& reps, const std::map<std::string, std::string>& concept_of,
                          const ProbeOptions& opts = {});

// Least-squares linear regression (ridge fallback when rank-deficient).
ProbeResult difficulty_probe(const RepMap& reps, const std::map<std::string, double>& difficulty_of,
                             const ProbeOptions& opts = {});

struct RankSimRow {
    int rank = 0;
    std::size_t pairs = 0;
    double mean = 0.0;
    double stddev = 0.0;
};

// Mean/std cosine of representations grouped by khd rank over sampled pairs.
// Rank-0 cosines (anchor vs its augmented view) are supplied by the caller,
// which owns the encoder. Empty ranks are omitted.
std::vector<RankSimRow> rank_similarity_report(const RepMap& reps, const std::vector<Question>& questions,
                                               int levels, std::size_t pairs_per_rank, Rng& rng,
                                               const std::vector<double>* rank0_cosines = nullptr);

}  // namespace eval
}  // namespace quesco
