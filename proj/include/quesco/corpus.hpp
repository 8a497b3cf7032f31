#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "quesco/types.hpp"

namespace quesco {

KnowledgeHierarchy load_hierarchy(const std::string& path);
void save_hierarchy(const KnowledgeHierarchy& kh, const std::string& path);

std::vector<Question> load_corpus(const std::string& path, const KnowledgeHierarchy& kh);
void save_corpus(const std::vector<Question>& questions, const std::string& path);

std::vector<SimilarityLabel> load_labels(const std::string& path);
void save_labels(const std::vector<SimilarityLabel>& labels, const std::string& path);

struct GeneratorSpec {
    int levels = 3;
    std::vector<int> branching = {4, 3, 3};  // size == levels
    int questions_per_leaf = 20;
    int templates_per_leaf = 4;
    int label_pairs = 2000;
    double noise = 0.05;  // uniform noise amplitude for difficulty/similarity labels
};

struct SyntheticCorpus {
    KnowledgeHierarchy hierarchy;
    std::vector<Question> questions;
    std::vector<SimilarityLabel> labels;
};

// Deterministic given (spec, seed).
SyntheticCorpus generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed);

}  // namespace quesco
