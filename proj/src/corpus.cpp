#include "quesco/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "quesco/formula.hpp"
#include "quesco/rng.hpp"

using nlohmann::json;

namespace quesco {

namespace {

void validate_hierarchy(const KnowledgeHierarchy& kh) {
    for (const auto& [id, c] : kh.concepts) {
        if (c.level < 1 || c.level > kh.levels)
            throw ValidationError("concept " + id + " has level " + std::to_string(c.level) + " outside 1.." + std::to_string(kh.levels));
        if (c.level == 1) {
            if (c.parent) throw ValidationError("level-1 concept " + id + " must not have a parent");
        } else {
            if (!c.parent) throw ValidationError("orphan concept " + id + " at level " + std::to_string(c.level));
            auto pit = kh.concepts.find(*c.parent);
            if (pit == kh.concepts.end()) throw ValidationError("concept " + id + " references unknown parent " + *c.parent);
            if (pit->second.level != c.level - 1)
                throw ValidationError("concept " + id + " at level " + std::to_string(c.level) + " has parent " + *c.parent + " at level " + std::to_string(pit->second.level));
        }
    }
    // cycle check via parent chains (bounded by levels, so any longer chain is a cycle)
    for (const auto& [id, c] : kh.concepts) {
        const Concept* cur = &c;
        int hops = 0;
        while (cur->parent) {
            if (++hops > kh.levels) throw ValidationError("cycle detected through concept " + id);
            cur = &kh.concepts.at(*cur->parent);
        }
    }
    // leaves must be at level L
    std::set<std::string> has_child;
    for (const auto& [id, c] : kh.concepts)
        if (c.parent) has_child.insert(*c.parent);
    for (const auto& [id, c] : kh.concepts)
        if (!has_child.count(id) && c.level != kh.levels)
            throw ValidationError("leaf concept " + id + " is at level " + std::to_string(c.level) + ", expected " + std::to_string(kh.levels));
}

}  // namespace

KnowledgeHierarchy load_hierarchy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open hierarchy file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("hierarchy parse error in " + path + ": " + e.what());
    }
    KnowledgeHierarchy kh;
    kh.levels = j.at("levels").get<int>();
    if (kh.levels < 1) throw ValidationError("levels must be >= 1");
    for (const auto& cj : j.at("concepts")) {
        Concept c;
        c.id = cj.at("id").get<std::string>();
        c.level = cj.at("level").get<int>();
        if (cj.contains("parent") && !cj["parent"].is_null()) c.parent = cj["parent"].get<std::string>();
        if (kh.concepts.count(c.id)) throw ValidationError("duplicate concept id " + c.id);
        kh.concepts[c.id] = c;
    }
    validate_hierarchy(kh);
    for (const auto& [id, c] : kh.concepts)
        if (c.parent) kh.children[*c.parent].push_back(id);
    for (auto& [id, kids] : kh.children) std::sort(kids.begin(), kids.end());
    return kh;
}

void save_hierarchy(const KnowledgeHierarchy& kh, const std::string& path) {
    json concepts = json::array();
    for (const auto& [id, c] : kh.concepts) {
        json cj{{"id", c.id}, {"level", c.level}};
        if (c.parent) cj["parent"] = *c.parent;
        concepts.push_back(cj);
    }
    json j{{"levels", kh.levels}, {"concepts", concepts}};
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write hierarchy file: " + path);
    out << j.dump(2) << "\n";
}

std::vector<Question> load_corpus(const std::string& path, const KnowledgeHierarchy& kh) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open corpus file: " + path);
    std::vector<Question> out;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("corpus line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            Question q;
            q.id = j.at("id").get<std::string>();
            if (seen.count(q.id)) throw ValidationError("duplicate question id " + q.id);
            seen.insert(q.id);
            q.content = split_content(j.at("content").get<std::string>());
            if (q.content.empty()) throw ValidationError("empty content");
            q.concepts = j.at("concepts").get<std::vector<std::string>>();
            validate_path(q.concepts, kh);
            if (j.contains("difficulty") && !j["difficulty"].is_null()) {
                double d = j["difficulty"].get<double>();
                if (d < 0.0 || d > 1.0) throw ValidationError("difficulty out of [0,1]");
                q.difficulty = d;
            }
            out.push_back(std::move(q));
        } catch (const json::exception& e) {
            throw ParseError("corpus line " + std::to_string(lineno) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("corpus line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_corpus(const std::vector<Question>& questions, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write corpus file: " + path);
    for (const auto& q : questions) {
        json j{{"id", q.id}, {"content", q.content_string()}, {"concepts", q.concepts}};
        if (q.difficulty) j["difficulty"] = *q.difficulty;
        out << j.dump() << "\n";
    }
}

std::vector<SimilarityLabel> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open labels file: " + path);
    std::vector<SimilarityLabel> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            SimilarityLabel l;
            l.a = j.at("a").get<std::string>();
            l.b = j.at("b").get<std::string>();
            l.score = j.at("score").get<double>();
            if (l.a == l.b) throw ValidationError("self-pair label");
            if (l.score < 0.0 || l.score > 1.0) throw ValidationError("score out of [0,1]");
            out.push_back(l);
        } catch (const json::exception& e) {
            throw ParseError("labels line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_labels(const std::vector<SimilarityLabel>& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write labels file: " + path);
    for (const auto& l : labels) {
        json j{{"a", l.a}, {"b", l.b}, {"score", l.score}};
        out << j.dump() << "\n";
    }
}

namespace {

const std::vector<std::vector<std::string>> kOpFamilies = {
    {"\\sin", "\\cos", "\\tan"},
    {"\\log", "\\ln"},
    {"\\exp", "\\sqrt"},
    {"\\cos", "\\tan", "\\sin"},
};

const std::vector<std::string> kTopicWords = {
    "trigonometric", "logarithmic", "radical", "polynomial", "rational", "periodic",
};
const std::vector<std::string> kSubtopicWords = {
    "bounded", "monotone", "symmetric", "inverse", "composite", "shifted",
    "scaled", "piecewise", "continuous", "positive", "decreasing", "increasing",
};
const std::vector<std::string> kSkillWords = {
    "range", "domain", "zeros", "extrema", "period", "intercepts",
    "asymptotes", "image", "maximum", "minimum", "roots", "turning",
    "slope", "value", "bound", "limit", "growth", "amplitude",
};

std::string int_lit(int v) { return std::to_string(v); }

std::string decimal_lit(Rng& rng) {
    int whole = 1 + static_cast<int>(rng.next_below(4));
    int frac = 1 + static_cast<int>(rng.next_below(9));
    return std::to_string(whole) + "." + std::to_string(frac);
}

// One formula in the supported grammar, shaped by the leaf's operator family.
std::string make_formula(const std::vector<std::string>& family, int variant, Rng& rng) {
    const std::string& op = family[static_cast<std::size_t>(variant) % family.size()];
    int a = 2 + static_cast<int>(rng.next_below(4));
    int b = 1 + static_cast<int>(rng.next_below(5));
    std::string c = decimal_lit(rng);
    switch (rng.next_below(4)) {
        case 0:
            return "f(x)=" + op + "{(\\frac{\\pi}{" + int_lit(a) + "}+" + int_lit(b) + "x)}+" + c;
        case 1:
            return "g(x)=" + int_lit(a) + op + "{(x)}-" + c;
        case 2:
            return "y=" + op + "{(x^2+" + int_lit(b) + ")}";
        default:
            return "h(x)=\\frac{" + op + "{(x)}}{" + int_lit(a) + "}+" + int_lit(b);
    }
}

int formula_node_count(const formula::Node& n) {
    int c = 1;
    for (const auto& ch : n.children) c += formula_node_count(*ch);
    return c;
}

}  // namespace

SyntheticCorpus generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed) {
    if (spec.levels < 1) throw ValidationError("levels must be >= 1");
    if (static_cast<int>(spec.branching.size()) != spec.levels)
        throw ValidationError("branching must list one factor per level");
    for (int b : spec.branching)
        if (b < 1) throw ValidationError("branching factor < 1");
    if (spec.questions_per_leaf < 1) throw ValidationError("questions-per-leaf < 1");

    SyntheticCorpus out;
    out.hierarchy.levels = spec.levels;

    // breadth-first concept construction: ids encode the path indices
    std::vector<std::vector<std::string>> by_level(static_cast<std::size_t>(spec.levels));
    for (int lvl = 1; lvl <= spec.levels; ++lvl) {
        if (lvl == 1) {
            for (int i = 0; i < spec.branching[0]; ++i) {
                Concept c{"k1_" + std::to_string(i), 1, std::nullopt};
                out.hierarchy.concepts[c.id] = c;
                by_level[0].push_back(c.id);
            }
        } else {
            int idx = 0;
            for (const auto& parent : by_level[static_cast<std::size_t>(lvl - 2)]) {
                for (int i = 0; i < spec.branching[static_cast<std::size_t>(lvl - 1)]; ++i) {
                    Concept c{"k" + std::to_string(lvl) + "_" + std::to_string(idx++), lvl, parent};
                    out.hierarchy.concepts[c.id] = c;
                    out.hierarchy.children[parent].push_back(c.id);
                    by_level[static_cast<std::size_t>(lvl - 1)].push_back(c.id);
                }
            }
        }
    }
    // same normalization as load_hierarchy so round-trips compare equal
    for (auto& [id, kids] : out.hierarchy.children) std::sort(kids.begin(), kids.end());

    Rng root_rng(seed);

    // leaf -> full path
    auto path_of = [&](const std::string& leaf) {
        ConceptPath p;
        std::string cur = leaf;
        while (true) {
            p.push_back(cur);
            const auto& c = out.hierarchy.concepts.at(cur);
            if (!c.parent) break;
            cur = *c.parent;
        }
        std::reverse(p.begin(), p.end());
        return p;
    };

    const auto& leaves = by_level.back();
    int qid = 0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        ConceptPath path = path_of(leaves[li]);
        // stable indices of the path within each level, for word/family selection
        std::vector<int> lvl_idx;
        for (int lvl = 0; lvl < spec.levels; ++lvl) {
            const auto& level_ids = by_level[static_cast<std::size_t>(lvl)];
            lvl_idx.push_back(static_cast<int>(std::find(level_ids.begin(), level_ids.end(), path[static_cast<std::size_t>(lvl)]) - level_ids.begin()));
        }
        int l1 = lvl_idx[0];
        int l2 = spec.levels >= 2 ? lvl_idx[1] : 0;
        int l3 = spec.levels >= 3 ? lvl_idx.back() : 0;
        const auto& family = kOpFamilies[static_cast<std::size_t>(l1) % kOpFamilies.size()];
        const std::string& topic = kTopicWords[static_cast<std::size_t>(l1) % kTopicWords.size()];
        const std::string& subtopic = kSubtopicWords[static_cast<std::size_t>(l1 * 7 + l2) % kSubtopicWords.size()];
        const std::string& skill = kSkillWords[static_cast<std::size_t>(l2 * 5 + l3) % kSkillWords.size()];

        for (int qi = 0; qi < spec.questions_per_leaf; ++qi) {
            Rng rng = root_rng.split(leaves[li]).split(static_cast<std::uint64_t>(qi));
            Question q;
            q.id = "q" + std::to_string(qid++);
            int variant = qi % std::max(1, spec.templates_per_leaf);
            int extra_clauses = static_cast<int>(rng.next_below(3));  // 0..2 extra conditions

            std::string content = "Given the " + topic + " function $" + make_formula(family, variant, rng) + "$ ,";
            for (int e = 0; e < extra_clauses; ++e)
                content += " with the " + subtopic + " condition $" + make_formula(family, variant + e + 1, rng) + "$ ,";
            content += " find the " + skill + " of the " + subtopic + " expression .";
            q.content = split_content(content);
            q.concepts = path;

            int nodes = 0;
            int clauses = 2 + extra_clauses;
            for (const auto& seg : q.content)
                if (seg.kind == Segment::Formula) {
                    auto ast = formula::parse_formula(seg.value);
                    nodes += formula_node_count(*ast.root);
                }
            double difficulty = (static_cast<double>(nodes + 3 * clauses) - 15.0) / 70.0 + rng.uniform(-spec.noise, spec.noise);
            q.difficulty = std::clamp(difficulty, 0.0, 1.0);
            out.questions.push_back(std::move(q));
        }
    }

    // similarity labels: stratified across khd values so every rank is observed
    Rng lrng = root_rng.split("labels");
    auto khd_of = [&](const ConceptPath& a, const ConceptPath& b) {
        int u = 0;
        for (int i = 0; i < spec.levels && a[static_cast<std::size_t>(i)] == b[static_cast<std::size_t>(i)]; ++i) u = i + 1;
        return u == 0 ? spec.levels + 1 : spec.levels - u + 1;
    };
    int per_bucket = std::max(1, spec.label_pairs / (spec.levels + 1));
    for (int d = 1; d <= spec.levels + 1; ++d) {
        int made = 0, attempts = 0;
        while (made < per_bucket && attempts < per_bucket * 200) {
            ++attempts;
            const Question& a = out.questions[lrng.next_below(out.questions.size())];
            const Question& b = out.questions[lrng.next_below(out.questions.size())];
            if (a.id == b.id) continue;
            if (khd_of(a.concepts, b.concepts) != d) continue;
            double score = static_cast<double>(spec.levels + 1 - d) / static_cast<double>(spec.levels + 1) + lrng.uniform(-spec.noise, spec.noise);
            out.labels.push_back({a.id, b.id, std::clamp(score, 0.0, 1.0)});
            ++made;
        }
    }
    return out;
}

}  // namespace quesco
