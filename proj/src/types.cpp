#include "quesco/types.hpp"

#include <cctype>
#include <sstream>

namespace quesco {

void validate_path(const ConceptPath& path, const KnowledgeHierarchy& kh) {
    if (static_cast<int>(path.size()) != kh.levels) {
        std::ostringstream os;
        os << "concept path length " << path.size() << " != hierarchy depth " << kh.levels;
        throw ValidationError(os.str());
    }
    for (std::size_t i = 0; i < path.size(); ++i) {
        const Concept& c = kh.at(path[i]);
        if (c.level != static_cast<int>(i) + 1)
            throw ValidationError("concept " + path[i] + " is not at level " + std::to_string(i + 1));
        if (i > 0 && (!c.parent || *c.parent != path[i - 1]))
            throw ValidationError("concept " + path[i] + " is not a child of " + path[i - 1]);
    }
}

std::string Question::content_string() const {
    std::string out;
    for (const auto& seg : content) {
        if (!out.empty()) out += " ";
        if (seg.kind == Segment::Formula)
            out += "$" + seg.value + "$";
        else
            out += seg.value;
    }
    return out;
}

std::vector<Segment> split_content(const std::string& raw) {
    std::vector<Segment> out;
    std::size_t i = 0;
    const std::size_t n = raw.size();
    std::string word;
    auto flush_word = [&] {
        if (!word.empty()) {
            out.push_back({Segment::Text, word});
            word.clear();
        }
    };
    while (i < n) {
        char c = raw[i];
        if (c == '$') {
            flush_word();
            std::size_t close = raw.find('$', i + 1);
            if (close == std::string::npos)
                throw ParseError("unterminated $ delimiter at offset " + std::to_string(i));
            out.push_back({Segment::Formula, raw.substr(i + 1, close - i - 1)});
            i = close + 1;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            flush_word();
            ++i;
        } else {
            word += c;
            ++i;
        }
    }
    flush_word();
    return out;
}

}  // namespace quesco
