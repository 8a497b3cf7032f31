#include "quesco/khar.hpp"

#include <limits>

namespace quesco {
namespace khar {

int khd(const ConceptPath& a, const ConceptPath& b, int levels) {
    if (static_cast<int>(a.size()) != levels || static_cast<int>(b.size()) != levels)
        throw ValidationError("concept path length does not match hierarchy depth");
    int deepest_shared = 0;
    for (int i = 0; i < levels; ++i) {
        if (a[static_cast<std::size_t>(i)] != b[static_cast<std::size_t>(i)]) break;
        deepest_shared = i + 1;
    }
    if (deepest_shared == 0) return levels + 1;
    return levels - deepest_shared + 1;
}

RankPartition partition(const std::string& anchor_id, const ConceptPath& anchor_path,
                        bool has_augmented, const std::vector<Candidate>& candidates,
                        int levels) {
    RankPartition p;
    p.anchor = anchor_id;
    p.sets.resize(static_cast<std::size_t>(levels) + 2);
    if (has_augmented)
        p.sets[0].push_back({anchor_id, std::numeric_limits<std::size_t>::max()});
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Candidate& c = candidates[i];
        if (c.id == anchor_id) continue;  // stale self-copies never rank
        int d = khd(anchor_path, c.path, levels);
        p.sets[static_cast<std::size_t>(d)].push_back({c.id, i});
    }
    return p;
}

}  // namespace khar
}  // namespace quesco
