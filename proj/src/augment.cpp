#include "quesco/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace quesco {
namespace augment {

using formula::FormulaAst;
using formula::Node;
using formula::NodeKind;
using formula::NodePath;

std::vector<std::string> strategy_names() {
    return {"text_swap", "text_delete", "var_rename", "var_scale",
            "op_synonym", "num_replace", "clause_shuffle", "clause_insert"};
}

std::map<std::string, std::vector<std::string>> AugmentConfig::default_synonyms() {
    return {
        {"sin", {"cos", "tan"}}, {"cos", {"sin", "tan"}}, {"tan", {"sin", "cos"}},
        {"log", {"ln"}},         {"ln", {"log"}},
    };
}

void AugmentConfig::validate() const {
    if (p < 0.0 || p > 1.0) throw ValidationError("augment probability p must be in [0,1]");
    if (identifier_pool.empty()) throw ValidationError("identifier pool must not be empty");
    for (const auto& [op, syns] : synonym_table)
        for (const auto& s : syns) {
            auto it = synonym_table.find(s);
            if (it == synonym_table.end() ||
                std::find(it->second.begin(), it->second.end(), op) == it->second.end())
                throw ValidationError("synonym table not symmetric: " + op + " -> " + s);
        }
}

namespace {

bool is_punct_token(const std::string& s) {
    static const std::set<std::string> punct = {",", ".", ";", "?", "。", "，", "；"};
    return punct.count(s) != 0;
}

bool ends_clause(const Segment& seg) {
    if (seg.kind != Segment::Text || seg.value.empty()) return false;
    char c = seg.value.back();
    if (c == ',' || c == '.' || c == ';') return true;
    // utf-8 fullwidth 。，；
    static const std::vector<std::string> wide = {"\xe3\x80\x82", "\xef\xbc\x8c", "\xef\xbc\x9b"};
    for (const auto& w : wide)
        if (seg.value.size() >= w.size() && seg.value.compare(seg.value.size() - w.size(), w.size(), w) == 0)
            return true;
    return false;
}

bool has_ask_marker(const std::vector<Segment>& segs) {
    for (const auto& s : segs) {
        if (s.kind != Segment::Text) continue;
        if (s.value == "find" || s.value == "Find" || s.value == "\xe6\xb1\x82") return true;
        if (s.value.find('?') != std::string::npos) return true;
    }
    return false;
}

}  // namespace

std::vector<std::size_t> text_positions(const std::vector<Segment>& content) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < content.size(); ++i)
        if (content[i].kind == Segment::Text && !is_punct_token(content[i].value) && !ends_clause(content[i]))
            out.push_back(i);
    return out;
}

void text_swap(std::vector<Segment>& content, std::size_t i, std::size_t j) {
    std::swap(content[i], content[j]);
}

void text_delete(std::vector<Segment>& content, std::size_t i) {
    content.erase(content.begin() + static_cast<std::ptrdiff_t>(i));
}

std::vector<Clause> split_clauses(const std::vector<Segment>& content) {
    std::vector<Clause> out;
    Clause cur;
    for (const auto& seg : content) {
        cur.segments.push_back(seg);
        if (ends_clause(seg)) {
            out.push_back(std::move(cur));
            cur = {};
        }
    }
    if (!cur.segments.empty()) out.push_back(std::move(cur));
    // last clause with an interrogative marker is the ask clause
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
        if (has_ask_marker(it->segments)) {
            it->is_ask = true;
            break;
        }
    }
    return out;
}

std::vector<Segment> join_clauses(const std::vector<Clause>& clauses) {
    std::vector<Segment> out;
    for (const auto& c : clauses)
        out.insert(out.end(), c.segments.begin(), c.segments.end());
    return out;
}

bool clause_shuffle(std::vector<Clause>& clauses, Rng& rng) {
    std::vector<std::size_t> cond;
    for (std::size_t i = 0; i < clauses.size(); ++i)
        if (!clauses[i].is_ask) cond.push_back(i);
    if (cond.size() < 2) return false;
    std::vector<std::size_t> perm = cond;
    for (std::size_t i = perm.size() - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.next_below(i + 1)]);
    if (perm == cond) std::swap(perm[0], perm[1]);
    std::vector<Clause> next = clauses;
    for (std::size_t i = 0; i < cond.size(); ++i) next[cond[i]] = clauses[perm[i]];
    clauses = std::move(next);
    return true;
}

bool clause_insert(std::vector<Clause>& clauses, Rng& rng) {
    std::vector<std::size_t> cond;
    for (std::size_t i = 0; i < clauses.size(); ++i)
        if (!clauses[i].is_ask) cond.push_back(i);
    if (clauses.size() < 2 || cond.empty()) return false;
    Clause dup = clauses[cond[rng.next_below(cond.size())]];
    // insertion boundaries keep the ask clause last
    std::size_t last_cond = cond.back();
    std::size_t pos = rng.next_below(last_cond + 2);  // 0..last_cond+1
    clauses.insert(clauses.begin() + static_cast<std::ptrdiff_t>(pos), std::move(dup));
    return true;
}

namespace {

void collect_names(const Node& n, bool as_head, std::set<std::string>& vars, std::set<std::string>& heads) {
    if (n.kind == NodeKind::Variable) {
        (as_head ? heads : vars).insert(n.name);
    }
    for (std::size_t i = 0; i < n.children.size(); ++i)
        collect_names(*n.children[i], n.kind == NodeKind::FunctionApp && i == 0, vars, heads);
}

void rename_in(Node& n, const std::string& from, const std::string& to) {
    if (n.kind == NodeKind::Variable && n.name == from) n.name = to;
    for (auto& c : n.children) rename_in(*c, from, to);
}

struct Rational {
    long long num = 1, den = 1;
    void reduce() {
        long long g = std::gcd(std::llabs(num), std::llabs(den));
        if (g > 1) {
            num /= g;
            den /= g;
        }
        if (den < 0) {
            num = -num;
            den = -den;
        }
    }
};

formula::NodePtr rational_node(Rational r) {
    r.reduce();
    if (r.den == 1) {
        auto n = std::make_unique<Node>(NodeKind::Number, std::to_string(r.num));
        n->value = static_cast<double>(r.num);
        return n;
    }
    auto f = std::make_unique<Node>(NodeKind::Fraction, "frac");
    auto num = std::make_unique<Node>(NodeKind::Number, std::to_string(r.num));
    num->value = static_cast<double>(r.num);
    auto den = std::make_unique<Node>(NodeKind::Number, std::to_string(r.den));
    den->value = static_cast<double>(r.den);
    f->children.push_back(std::move(num));
    f->children.push_back(std::move(den));
    return f;
}

// Reads an integer-or-fraction coefficient node; returns false otherwise.
bool read_rational(const Node& n, Rational& out) {
    if (n.kind == NodeKind::Number) {
        double iv;
        if (std::modf(n.value, &iv) != 0.0) return false;
        out = {static_cast<long long>(n.value), 1};
        return true;
    }
    if (n.kind == NodeKind::Fraction && n.children[0]->kind == NodeKind::Number &&
        n.children[1]->kind == NodeKind::Number) {
        double i0, i1;
        if (std::modf(n.children[0]->value, &i0) != 0.0) return false;
        if (std::modf(n.children[1]->value, &i1) != 0.0) return false;
        out = {static_cast<long long>(n.children[0]->value), static_cast<long long>(n.children[1]->value)};
        return true;
    }
    return false;
}

// Scales occurrences of `name` inside `n`. Declaration positions (bare
// variable as a FunctionApp argument) are left alone, matching f(x)=...
// staying f(x) under scaling.
void scale_in(Node& n, const std::string& name, Rational factor) {
    if (n.kind == NodeKind::Operator && n.name == "*" && n.children.size() == 2) {
        Rational coeff;
        Node& rhs = *n.children[1];
        if (rhs.kind == NodeKind::Variable && rhs.name == name && read_rational(*n.children[0], coeff)) {
            Rational next{coeff.num * factor.num, coeff.den * factor.den};
            next.reduce();
            n.children[0] = rational_node(next);
            return;
        }
    }
    for (std::size_t i = 0; i < n.children.size(); ++i) {
        Node& c = *n.children[i];
        bool declaration = n.kind == NodeKind::FunctionApp && i == 1 && c.kind == NodeKind::Variable;
        if (c.kind == NodeKind::Variable && c.name == name && !declaration) {
            auto mul = std::make_unique<Node>(NodeKind::Operator, "*");
            mul->children.push_back(rational_node(factor));
            mul->children.push_back(std::make_unique<Node>(NodeKind::Variable, name));
            auto group = std::make_unique<Node>(NodeKind::Group, "()");
            group->children.push_back(std::move(mul));
            bool bare_context = n.kind == NodeKind::Group || n.kind == NodeKind::Relation ||
                                n.kind == NodeKind::Fraction ||
                                (n.kind == NodeKind::FunctionApp && i == 1) ||
                                (n.kind == NodeKind::Operator && (n.name == "+" || n.name == "-" || (n.children.size() == 1 && n.name != "neg")));
            if (bare_context)
                n.children[i] = std::move(group->children[0]);
            else
                n.children[i] = std::move(group);
        } else {
            scale_in(c, name, factor);
        }
    }
}

}  // namespace

std::set<std::string> question_variables(const std::vector<FormulaAst>& asts) {
    std::set<std::string> vars, heads;
    for (const auto& a : asts)
        if (a.root) collect_names(*a.root, false, vars, heads);
    return vars;
}

std::set<std::string> reserved_names(const std::vector<FormulaAst>& asts) {
    std::set<std::string> vars, heads;
    for (const auto& a : asts)
        if (a.root) collect_names(*a.root, false, vars, heads);
    vars.insert(heads.begin(), heads.end());
    vars.insert("e");
    return vars;
}

void rename_variable(std::vector<FormulaAst>& asts, const std::string& from, const std::string& to) {
    auto used = reserved_names(asts);
    if (used.count(to)) throw ValidationError("rename target " + to + " already in use");
    for (auto& a : asts) {
        if (!a.root) continue;
        rename_in(*a.root, from, to);
        // function heads share the identifier namespace, rename there too
        // (heads were excluded from `used` only via reserved_names above)
    }
}

void scale_variable(std::vector<FormulaAst>& asts, const std::string& name, int num, int den) {
    if (num == 0 || den == 0) throw ValidationError("scale factor must be nonzero");
    if (num == den) return;  // identity factor
    Rational f{num, den};
    f.reduce();
    for (auto& a : asts)
        if (a.root) scale_in(*a.root, name, f);
}

bool replace_operator(FormulaAst& ast, const NodePath& path, const std::string& new_name) {
    Node* n = formula::resolve(ast, path);
    if (n->kind != NodeKind::Operator && n->kind != NodeKind::Relation) return false;
    n->name = new_name;
    return true;
}

namespace {

int decimal_places(const std::string& lit) {
    auto dot = lit.find('.');
    return dot == std::string::npos ? 0 : static_cast<int>(lit.size() - dot - 1);
}

std::string format_places(double v, int places) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(places);
    os << v;
    return os.str();
}

}  // namespace

std::string replace_number(FormulaAst& ast, const NodePath& path, double jitter, Rng& rng) {
    Node* n = formula::resolve(ast, path);
    if (n->kind != NodeKind::Number) return {};
    const double old = n->value;
    const int places = decimal_places(n->name);
    for (int attempt = 0; attempt < 16; ++attempt) {
        double candidate = old * (1.0 + rng.uniform(-jitter, jitter));
        std::string lit;
        if (places == 0) {
            long long iv = std::llround(candidate);
            if (iv < 1) iv = 1;  // literals are unsigned; sign lives in a neg node
            lit = std::to_string(iv);
        } else {
            if (candidate < std::pow(10.0, -places)) candidate = std::pow(10.0, -places);
            lit = format_places(candidate, places);
        }
        if (lit != n->name) {
            n->name = lit;
            n->value = std::strtod(lit.c_str(), nullptr);
            return lit;
        }
    }
    // deterministic fallback: bump by one unit in the last place
    double bumped = old + std::pow(10.0, -places);
    std::string lit = places == 0 ? std::to_string(std::llround(bumped)) : format_places(bumped, places);
    n->name = lit;
    n->value = std::strtod(lit.c_str(), nullptr);
    return lit;
}

AugmentedQuestion augment(const Question& q, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    AugmentedQuestion out;
    out.question = q;
    Question& nq = out.question;

    auto fires = [&](const std::string& name) {
        if (!cfg.is_enabled(name)) return false;
        return rng.bernoulli(cfg.p);
    };

    // --- text level ---
    if (fires("text_swap")) {
        auto pos = text_positions(nq.content);
        if (pos.size() >= 2) {
            std::size_t i = pos[rng.next_below(pos.size())];
            std::size_t j = i;
            while (j == i) j = pos[rng.next_below(pos.size())];
            text_swap(nq.content, i, j);
            out.applied.emplace_back("text_swap", nq.content[i].value + "<->" + nq.content[j].value);
        }
    }
    if (fires("text_delete")) {
        auto pos = text_positions(nq.content);
        if (pos.size() >= 2) {
            std::size_t i = pos[rng.next_below(pos.size())];
            out.applied.emplace_back("text_delete", nq.content[i].value);
            text_delete(nq.content, i);
        }
    }

    // --- formula level: parse all segments once, write back at the end ---
    std::vector<std::size_t> fseg;
    std::vector<FormulaAst> asts;
    for (std::size_t i = 0; i < nq.content.size(); ++i)
        if (nq.content[i].kind == Segment::Formula) {
            fseg.push_back(i);
            asts.push_back(formula::parse_formula(nq.content[i].value));
        }

    if (!asts.empty()) {
        if (fires("var_rename")) {
            auto vars = question_variables(asts);
            if (!vars.empty()) {
                std::vector<std::string> names(vars.begin(), vars.end());
                const std::string& from = names[rng.next_below(names.size())];
                auto used = reserved_names(asts);
                std::vector<std::string> fresh;
                for (const auto& cand : cfg.identifier_pool)
                    if (!used.count(cand)) fresh.push_back(cand);
                if (!fresh.empty()) {
                    const std::string& to = fresh[rng.next_below(fresh.size())];
                    rename_variable(asts, from, to);
                    out.applied.emplace_back("var_rename", from + "->" + to);
                }
            }
        }
        if (fires("var_scale")) {
            auto vars = question_variables(asts);
            if (!vars.empty() && !cfg.scale_factors.empty()) {
                std::vector<std::string> names(vars.begin(), vars.end());
                const std::string& name = names[rng.next_below(names.size())];
                auto [num, den] = cfg.scale_factors[rng.next_below(cfg.scale_factors.size())];
                scale_variable(asts, name, num, den);
                out.applied.emplace_back("var_scale", name + "*" + std::to_string(num) + "/" + std::to_string(den));
            }
        }
        if (fires("op_synonym")) {
            std::vector<std::pair<std::size_t, NodePath>> sites;
            std::vector<std::string> site_names;
            for (std::size_t ai = 0; ai < asts.size(); ++ai) {
                auto idx = formula::index_sites(asts[ai]);
                for (const auto& [name, path] : idx.operators) {
                    auto it = cfg.synonym_table.find(name);
                    if (it != cfg.synonym_table.end() && !it->second.empty()) {
                        sites.emplace_back(ai, path);
                        site_names.push_back(name);
                    }
                }
            }
            if (!sites.empty()) {
                std::size_t pick = rng.next_below(sites.size());
                const auto& syns = cfg.synonym_table.at(site_names[pick]);
                const std::string& to = syns[rng.next_below(syns.size())];
                replace_operator(asts[sites[pick].first], sites[pick].second, to);
                out.applied.emplace_back("op_synonym", site_names[pick] + "->" + to);
            }
        }
        if (fires("num_replace")) {
            std::vector<std::pair<std::size_t, NodePath>> sites;
            for (std::size_t ai = 0; ai < asts.size(); ++ai) {
                auto idx = formula::index_sites(asts[ai]);
                for (const auto& [lit, path] : idx.numbers) sites.emplace_back(ai, path);
            }
            if (!sites.empty()) {
                std::size_t pick = rng.next_below(sites.size());
                const Node* before = formula::resolve(asts[sites[pick].first], sites[pick].second);
                std::string old_lit = before->name;
                std::string new_lit = replace_number(asts[sites[pick].first], sites[pick].second, cfg.number_jitter, rng);
                if (!new_lit.empty()) out.applied.emplace_back("num_replace", old_lit + "->" + new_lit);
            }
        }
        for (std::size_t i = 0; i < fseg.size(); ++i)
            nq.content[fseg[i]].value = formula::render_formula(asts[i]);
    }

    // --- structure level ---
    if (fires("clause_shuffle")) {
        auto clauses = split_clauses(nq.content);
        Rng sub = rng.split("shuffle");
        if (clause_shuffle(clauses, sub)) {
            nq.content = join_clauses(clauses);
            out.applied.emplace_back("clause_shuffle", std::to_string(clauses.size()) + " clauses");
        }
    }
    if (fires("clause_insert")) {
        auto clauses = split_clauses(nq.content);
        Rng sub = rng.split("insert");
        if (clause_insert(clauses, sub)) {
            nq.content = join_clauses(clauses);
            out.applied.emplace_back("clause_insert", std::to_string(clauses.size()) + " clauses");
        }
    }

    return out;
}

}  // namespace augment
}  // namespace quesco
