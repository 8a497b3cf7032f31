#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "quesco/formula.hpp"
#include "quesco/rng.hpp"
#include "quesco/types.hpp"

namespace quesco {
namespace augment {

// Strategy names, in the fixed application order:
//   text_swap, text_delete | var_rename, var_scale, op_synonym, num_replace
//   | clause_shuffle, clause_insert
std::vector<std::string> strategy_names();

struct AugmentConfig {
    double p = 0.3;                       // per-strategy application probability
    std::set<std::string> enabled;        // empty set means "all strategies"
    std::vector<std::pair<int, int>> scale_factors = {{2, 1}, {3, 1}, {1, 2}};
    std::map<std::string, std::vector<std::string>> synonym_table = default_synonyms();
    std::vector<std::string> identifier_pool = {"u", "v", "w", "t", "s", "r", "m", "n"};
    double number_jitter = 1.0;           // relative range for number replacement

    static std::map<std::string, std::vector<std::string>> default_synonyms();
    bool is_enabled(const std::string& name) const {
        return enabled.empty() || enabled.count(name) != 0;
    }
    void validate() const;
};

struct AugmentedQuestion {
    Question question;
    std::vector<std::pair<std::string, std::string>> applied;  // (strategy, site)
};

AugmentedQuestion augment(const Question& q, const AugmentConfig& cfg, Rng& rng);

// --- individual strategies, exposed for direct testing ---

// Positions of swappable/deletable text tokens (pure punctuation excluded so
// clause boundaries survive).
std::vector<std::size_t> text_positions(const std::vector<Segment>& content);
void text_swap(std::vector<Segment>& content, std::size_t i, std::size_t j);
void text_delete(std::vector<Segment>& content, std::size_t i);

// Applies to all formula segments of a question at once.
void rename_variable(std::vector<formula::FormulaAst>& asts, const std::string& from, const std::string& to);
// Scales every non-declaration occurrence of `name` by num/den.
void scale_variable(std::vector<formula::FormulaAst>& asts, const std::string& name, int num, int den);
bool replace_operator(formula::FormulaAst& ast, const formula::NodePath& path, const std::string& new_name);
// Returns the new literal, or empty when no replacement happened.
std::string replace_number(formula::FormulaAst& ast, const formula::NodePath& path, double jitter, Rng& rng);

// Clause machinery. A clause is a run of segments ending at a text token that
// ends with sentence punctuation. The last clause containing an interrogative
// marker is the ask clause and never moves.
struct Clause {
    std::vector<Segment> segments;
    bool is_ask = false;
};
std::vector<Clause> split_clauses(const std::vector<Segment>& content);
std::vector<Segment> join_clauses(const std::vector<Clause>& clauses);
bool clause_shuffle(std::vector<Clause>& clauses, Rng& rng);
bool clause_insert(std::vector<Clause>& clauses, Rng& rng);

// All variable names appearing in any formula segment (function heads and
// constants excluded).
std::set<std::string> question_variables(const std::vector<formula::FormulaAst>& asts);
// Names that must not be chosen as a rename target: variables, function
// heads, and the constant `e`.
std::set<std::string> reserved_names(const std::vector<formula::FormulaAst>& asts);

}  // namespace augment
}  // namespace quesco
