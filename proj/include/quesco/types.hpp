#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace quesco {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Concept {
    std::string id;
    int level = 1;                    // 1..L
    std::optional<std::string> parent;  // absent only at level 1
};

/// Rooted forest of concepts; leaves all live at level L.
struct KnowledgeHierarchy {
    int levels = 1;
    std::map<std::string, Concept> concepts;
    std::map<std::string, std::vector<std::string>> children;

    bool contains(const std::string& id) const { return concepts.count(id) != 0; }
    const Concept& at(const std::string& id) const {
        auto it = concepts.find(id);
        if (it == concepts.end()) throw ValidationError("unknown concept id: " + id);
        return it->second;
    }
    std::vector<std::string> concepts_at_level(int level) const {
        std::vector<std::string> out;
        for (const auto& [id, c] : concepts)
            if (c.level == level) out.push_back(id);
        return out;
    }
};

/// Chain k^1..k^L, each entry the parent of the next.
using ConceptPath = std::vector<std::string>;

void validate_path(const ConceptPath& path, const KnowledgeHierarchy& kh);

struct Segment {
    enum Kind { Text, Formula } kind;
    std::string value;  // token text, or raw formula source without $ delimiters

    bool operator==(const Segment&) const = default;
};

struct Question {
    std::string id;
    std::vector<Segment> content;
    ConceptPath concepts;
    std::optional<double> difficulty;  // in [0,1] when present

    std::string content_string() const;  // re-joins segments, formulas as $...$
};

struct SimilarityLabel {
    std::string a;
    std::string b;
    double score = 0.0;  // in [0,1]
};

// Splits a raw content string on $...$ delimiters and whitespace into segments.
std::vector<Segment> split_content(const std::string& raw);

}  // namespace quesco
