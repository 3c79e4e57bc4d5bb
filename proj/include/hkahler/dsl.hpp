#pragma once

// The potential expression language.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' exponent)?
//   exponent:= INT | '-' INT | '(' ['-'] INT ['/' INT] ')'
//   primary := NUMBER | IDENT | ('exp' | 'ln' | 'conj') '(' expr ')' | '(' expr ')'
//
// z1, z2, zb1, zb2 are the formal variables, `i` is the imaginary unit, and
// any other identifier is a real parameter.

#include "hkahler/chart.hpp"
#include "hkahler/jet.hpp"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hkahler {

enum class NodeKind { literal, param, variable, neg, add, sub, mul, div, pow, exp, ln, conj };

class PotentialExpr {
public:
    static PotentialExpr literal(cplx value);
    static PotentialExpr param(std::string name);
    static PotentialExpr variable(int var);
    static PotentialExpr unary(NodeKind kind, PotentialExpr operand);
    static PotentialExpr binary(NodeKind kind, PotentialExpr lhs, PotentialExpr rhs);
    static PotentialExpr power(PotentialExpr base, Rational exponent);

    static PotentialExpr z1() { return variable(Z1); }
    static PotentialExpr z2() { return variable(Z2); }
    static PotentialExpr zb1() { return variable(ZB1); }
    static PotentialExpr zb2() { return variable(ZB2); }

    NodeKind kind() const;
    cplx literal_value() const;
    const std::string& name() const;
    int var() const;
    Rational exponent() const;
    /// Child i (0 for unary nodes and pow, 0/1 for binary nodes).
    const PotentialExpr& child(int i) const;
    int arity() const;

    /// Structural equality; literal values compare exactly.
    friend bool operator==(const PotentialExpr& a, const PotentialExpr& b);

    friend PotentialExpr operator+(PotentialExpr a, PotentialExpr b) {
        return binary(NodeKind::add, std::move(a), std::move(b));
    }
    friend PotentialExpr operator-(PotentialExpr a, PotentialExpr b) {
        return binary(NodeKind::sub, std::move(a), std::move(b));
    }
    friend PotentialExpr operator*(PotentialExpr a, PotentialExpr b) {
        return binary(NodeKind::mul, std::move(a), std::move(b));
    }
    friend PotentialExpr operator/(PotentialExpr a, PotentialExpr b) {
        return binary(NodeKind::div, std::move(a), std::move(b));
    }
    friend PotentialExpr operator-(PotentialExpr a) { return unary(NodeKind::neg, std::move(a)); }

private:
    struct Node;
    explicit PotentialExpr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

PotentialExpr exp(PotentialExpr e);
PotentialExpr ln(PotentialExpr e);
PotentialExpr conj(PotentialExpr e);

/// Named real constants referenced by an expression.
class ParameterTable {
public:
    ParameterTable() = default;
    ParameterTable(std::initializer_list<std::pair<const std::string, double>> init);

    /// Throws std::invalid_argument for a non-identifier name, a reserved name or a non-finite value.
    void set(const std::string& name, double value);
    bool contains(const std::string& name) const { return values_.count(name) > 0; }
    /// Throws BindError when absent.
    double get(const std::string& name) const;
    const std::map<std::string, double>& values() const { return values_; }

    friend bool operator==(const ParameterTable&, const ParameterTable&) = default;

private:
    std::map<std::string, double> values_;
};

/// True for z1, z2, zb1, zb2, exp, ln, conj and i.
bool is_reserved_name(std::string_view name);

/// Parses an expression. `line` and `column` give the position of the first
/// character inside a larger document, for diagnostics.
PotentialExpr parse(std::string_view source, int line = 1, int column = 1);

/// Canonical fully-parenthesized form; parse(print(e)) == e for parsed e.
std::string print(const PotentialExpr& expr);

/// Names of all parameter references.
std::set<std::string> parameters_of(const PotentialExpr& expr);

/// Throws BindError naming the first parameter missing from `params`.
void check_bound(const PotentialExpr& expr, const ParameterTable& params);

bool references_variable(const PotentialExpr& expr, int var);

/// Formal conjugate with conj nodes distributed away: swaps zk <-> zbk and conjugates literals.
PotentialExpr conjugate(const PotentialExpr& expr);

/// Replaces every reference to parameter `name` with `replacement`.
PotentialExpr substitute(const PotentialExpr& expr, const std::string& name,
                         const PotentialExpr& replacement);

/// Jet of the expression with the formal variables seeded at the given values.
/// The barred slots need not be conjugates of the unbarred ones.
ComplexJet evaluate_formal(const PotentialExpr& expr, const ParameterTable& params,
                           const std::array<cplx, kNumVars>& formal, int order);

/// Jet at (z1, z2, conj z1, conj z2) with zb-variables as independent formals.
ComplexJet evaluate(const PotentialExpr& expr, const ParameterTable& params, const ChartPoint& point,
                    int order = kDefaultJetOrder);

/// Max |Im phi| over the sample. Throws std::invalid_argument for an empty sample.
double check_reality(const PotentialExpr& expr, const ParameterTable& params,
                     std::span<const ChartPoint> sample);

/// Contents of a potential file.
struct PotentialFile {
    std::string source;                  // verbatim text
    ParameterTable params;
    std::optional<PotentialExpr> phi;    // explicit `phi = ...`
    std::optional<std::string> family;   // `family = <kind>`
    std::map<std::string, std::string> family_exprs;  // `W = ...`, `F = ...` sources
};

/// Parses the line-oriented potential file format. Throws ParseError with file positions.
PotentialFile parse_potential_file(std::string_view text);

}  // namespace hkahler
