#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "quesco/types.hpp"

namespace quesco {
namespace formula {

enum class NodeKind {
    Variable,   // named identifier, possibly subscripted (x, x_1)
    Number,     // decimal literal
    Constant,   // \pi, e — never renamed or replaced
    Operator,   // + - * / neg and named functions (sin, cos, ...)
    Group,      // explicit parentheses
    Relation,   // = < > <= >= !=
    FunctionApp,// f(x): single-letter head applied to an argument
    Fraction,   // \frac{a}{b}
    Power,      // a^b
};

struct Node;
using NodePtr = std::unique_ptr<Node>;

struct Node {
    NodeKind kind;
    std::string name;       // variable/constant name, operator name, relation symbol, number literal
    double value = 0.0;     // parsed value for Number
    std::vector<NodePtr> children;

    Node(NodeKind k, std::string n) : kind(k), name(std::move(n)) {}

    NodePtr clone() const;
};

struct FormulaAst {
    NodePtr root;

    FormulaAst() = default;
    explicit FormulaAst(NodePtr r) : root(std::move(r)) {}
    FormulaAst(const FormulaAst& o) : root(o.root ? o.root->clone() : nullptr) {}
    FormulaAst& operator=(const FormulaAst& o) {
        root = o.root ? o.root->clone() : nullptr;
        return *this;
    }
    FormulaAst(FormulaAst&&) = default;
    FormulaAst& operator=(FormulaAst&&) = default;
};

bool equal(const Node& a, const Node& b);
inline bool equal(const FormulaAst& a, const FormulaAst& b) {
    if (!a.root || !b.root) return !a.root && !b.root;
    return equal(*a.root, *b.root);
}

// Path of child indices from the root.
using NodePath = std::vector<int>;

Node* resolve(FormulaAst& ast, const NodePath& path);
const Node* resolve(const FormulaAst& ast, const NodePath& path);

struct SiteIndex {
    // variable name -> occurrence paths, left-to-right
    std::map<std::string, std::vector<NodePath>> variables;
    std::vector<std::pair<std::string, NodePath>> operators;  // (op name, path)
    std::vector<std::pair<std::string, NodePath>> numbers;    // (literal, path)
};

struct ParseOptions {
    // When true, a single-letter head applied to a parenthesized argument
    // (f in f(x)) is a FunctionApp head, excluded from renameable variables.
    bool function_heads = true;
};

FormulaAst parse_formula(const std::string& src, const ParseOptions& opts = {});
std::string render_formula(const FormulaAst& ast);
std::string render_node(const Node& node);

// Exhaustive left-to-right enumeration of augmentation sites. Function heads
// and constants are excluded from `variables`; constants are excluded from
// `numbers`.
SiteIndex index_sites(const FormulaAst& ast);

// Lexer token stream; also used for symbol-level tokenization of formulas.
std::vector<std::string> lex_formula(const std::string& src);

// Numeric evaluation with an assignment for variables (constants built in).
double evaluate(const Node& node, const std::map<std::string, double>& env);

}  // namespace formula
}  // namespace quesco
