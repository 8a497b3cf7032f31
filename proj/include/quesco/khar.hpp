#pragma once

#include <string>
#include <vector>

#include "quesco/types.hpp"

namespace quesco {
namespace khar {

// KH-distance: L - u + 1 where u is the deepest level at which the paths
// agree; L + 1 when they share nothing. Range 1..L+1 for distinct paths.
int khd(const ConceptPath& a, const ConceptPath& b, int levels);

struct CandidateRef {
    std::string id;
    std::size_t index;  // caller-side index (e.g. position in a bank snapshot)
};

struct RankPartition {
    std::string anchor;
    // sets[0] holds only the augmented view; sets[u] for u in 1..L+1 hold
    // candidates at KH-distance u from the anchor.
    std::vector<std::vector<CandidateRef>> sets;
};

struct Candidate {
    std::string id;
    ConceptPath path;
};

// Candidates whose id equals the anchor's (stale copies of the anchor in a
// memory bank) are dropped from every rank set. `has_augmented` places a
// single rank-0 entry with index SIZE_MAX.
RankPartition partition(const std::string& anchor_id, const ConceptPath& anchor_path,
                        bool has_augmented, const std::vector<Candidate>& candidates,
                        int levels);

}  // namespace khar
}  // namespace quesco
