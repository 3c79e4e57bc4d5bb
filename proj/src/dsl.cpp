#include "hkahler/dsl.hpp"

#include "hkahler/errors.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>

namespace hkahler {

struct PotentialExpr::Node {
    NodeKind kind;
    cplx value{};
    std::string name;
    int var = -1;
    Rational exponent{};
    std::vector<PotentialExpr> children;
};

namespace {

bool is_unary_call(NodeKind k) { return k == NodeKind::exp || k == NodeKind::ln || k == NodeKind::conj; }

bool is_binary(NodeKind k) {
    return k == NodeKind::add || k == NodeKind::sub || k == NodeKind::mul || k == NodeKind::div;
}

const char* var_name(int var) {
    static constexpr const char* names[] = {"z1", "z2", "zb1", "zb2"};
    return names[var];
}

std::optional<int> var_from_name(std::string_view s) {
    if (s == "z1") return Z1;
    if (s == "z2") return Z2;
    if (s == "zb1") return ZB1;
    if (s == "zb2") return ZB2;
    return std::nullopt;
}

bool is_identifier(std::string_view s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    }
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// PotentialExpr

PotentialExpr PotentialExpr::literal(cplx value) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::literal;
    n->value = value;
    return PotentialExpr(std::move(n));
}

PotentialExpr PotentialExpr::param(std::string name) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::param;
    n->name = std::move(name);
    return PotentialExpr(std::move(n));
}

PotentialExpr PotentialExpr::variable(int var) {
    if (var < 0 || var >= kNumVars) throw std::out_of_range("variable index outside 0..3");
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::variable;
    n->var = var;
    return PotentialExpr(std::move(n));
}

PotentialExpr PotentialExpr::unary(NodeKind kind, PotentialExpr operand) {
    if (kind != NodeKind::neg && !is_unary_call(kind)) throw std::invalid_argument("not a unary node kind");
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->children.push_back(std::move(operand));
    return PotentialExpr(std::move(n));
}

PotentialExpr PotentialExpr::binary(NodeKind kind, PotentialExpr lhs, PotentialExpr rhs) {
    if (!is_binary(kind)) throw std::invalid_argument("not a binary node kind");
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->children.push_back(std::move(lhs));
    n->children.push_back(std::move(rhs));
    return PotentialExpr(std::move(n));
}

PotentialExpr PotentialExpr::power(PotentialExpr base, Rational exponent) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::pow;
    n->exponent = Rational::make(exponent.num, exponent.den);
    n->children.push_back(std::move(base));
    return PotentialExpr(std::move(n));
}

NodeKind PotentialExpr::kind() const { return node_->kind; }
cplx PotentialExpr::literal_value() const { return node_->value; }
const std::string& PotentialExpr::name() const { return node_->name; }
int PotentialExpr::var() const { return node_->var; }
Rational PotentialExpr::exponent() const { return node_->exponent; }
const PotentialExpr& PotentialExpr::child(int i) const { return node_->children.at(static_cast<std::size_t>(i)); }
int PotentialExpr::arity() const { return static_cast<int>(node_->children.size()); }

bool operator==(const PotentialExpr& a, const PotentialExpr& b) {
    if (a.node_ == b.node_) return true;
    const auto& x = *a.node_;
    const auto& y = *b.node_;
    if (x.kind != y.kind) return false;
    switch (x.kind) {
        case NodeKind::literal: return x.value == y.value;
        case NodeKind::param: return x.name == y.name;
        case NodeKind::variable: return x.var == y.var;
        case NodeKind::pow:
            if (!(x.exponent == y.exponent)) return false;
            break;
        default: break;
    }
    if (x.children.size() != y.children.size()) return false;
    for (std::size_t i = 0; i < x.children.size(); ++i) {
        if (!(x.children[i] == y.children[i])) return false;
    }
    return true;
}

PotentialExpr exp(PotentialExpr e) { return PotentialExpr::unary(NodeKind::exp, std::move(e)); }
PotentialExpr ln(PotentialExpr e) { return PotentialExpr::unary(NodeKind::ln, std::move(e)); }
PotentialExpr conj(PotentialExpr e) { return PotentialExpr::unary(NodeKind::conj, std::move(e)); }

// ---------------------------------------------------------------------------
// ParameterTable

bool is_reserved_name(std::string_view name) {
    return var_from_name(name).has_value() || name == "exp" || name == "ln" || name == "conj" || name == "i";
}

ParameterTable::ParameterTable(std::initializer_list<std::pair<const std::string, double>> init) {
    for (const auto& [k, v] : init) set(k, v);
}

void ParameterTable::set(const std::string& name, double value) {
    if (!is_identifier(name)) throw std::invalid_argument("invalid parameter name '" + name + "'");
    if (is_reserved_name(name)) throw std::invalid_argument("parameter name '" + name + "' is reserved");
    if (!std::isfinite(value)) throw std::invalid_argument("parameter '" + name + "' is not finite");
    values_[name] = value;
}

double ParameterTable::get(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw BindError("unbound parameter '" + name + "'");
    return it->second;
}

// ---------------------------------------------------------------------------
// Lexer / parser

namespace {

enum class Tok { number, ident, plus, minus, star, slash, caret, lparen, rparen, end };

struct Token {
    Tok type;
    std::string text;
    double number = 0.0;
    int line;
    int column;
};

class Lexer {
public:
    Lexer(std::string_view src, int line, int column) : src_(src), line_(line), col_(column) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            if (pos_ >= src_.size()) {
                out.push_back({Tok::end, "", 0.0, line_, col_});
                return out;
            }
            const char c = src_[pos_];
            const int line = line_;
            const int col = col_;
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                out.push_back(lex_number(line, col));
            } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t start = pos_;
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                    advance();
                }
                out.push_back({Tok::ident, std::string(src_.substr(start, pos_ - start)), 0.0, line, col});
            } else {
                Tok t;
                switch (c) {
                    case '+': t = Tok::plus; break;
                    case '-': t = Tok::minus; break;
                    case '*': t = Tok::star; break;
                    case '/': t = Tok::slash; break;
                    case '^': t = Tok::caret; break;
                    case '(': t = Tok::lparen; break;
                    case ')': t = Tok::rparen; break;
                    default:
                        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
                }
                advance();
                out.push_back({t, std::string(1, c), 0.0, line, col});
            }
        }
    }

private:
    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
    }

    Token lex_number(int line, int col) {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                advance();
                ++n;
            }
            return n;
        };
        std::size_t n = digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            advance();
            n += digits();
        }
        if (n == 0) throw ParseError("malformed number", line, col);
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            advance();
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
            if (digits() == 0) throw ParseError("malformed exponent in number", line, col);
        }
        const std::string text(src_.substr(start, pos_ - start));
        double value = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
        if (res.ec != std::errc() || !std::isfinite(value)) {
            throw ParseError("number '" + text + "' is not a finite double", line, col);
        }
        return {Tok::number, text, value, line, col};
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_;
    int col_;
};

bool is_real_literal(const PotentialExpr& e) {
    return e.kind() == NodeKind::literal && e.literal_value().imag() == 0.0;
}

bool is_imag_literal(const PotentialExpr& e) {
    return e.kind() == NodeKind::literal && e.literal_value().real() == 0.0 && e.literal_value().imag() != 0.0;
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    PotentialExpr run() {
        PotentialExpr e = expr();
        if (peek().type == Tok::rparen) fail("unbalanced parentheses: unexpected ')'", peek());
        if (peek().type != Tok::end) fail("unexpected token '" + peek().text + "'", peek());
        return e;
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    const Token& next() { return toks_[pos_++]; }
    bool accept(Tok t) {
        if (peek().type == t) {
            ++pos_;
            return true;
        }
        return false;
    }
    [[noreturn]] static void fail(const std::string& msg, const Token& at) {
        throw ParseError(msg, at.line, at.column);
    }
    void expect_rparen(const Token& open) {
        if (peek().type == Tok::end) fail("unbalanced parentheses: '(' is never closed", open);
        if (!accept(Tok::rparen)) fail("expected ')' but found '" + peek().text + "'", peek());
    }

    PotentialExpr expr() {
        PotentialExpr lhs = term();
        while (peek().type == Tok::plus || peek().type == Tok::minus) {
            const bool plus = next().type == Tok::plus;
            PotentialExpr rhs = term();
            // `a + b*i` denotes a single complex literal.
            if (is_real_literal(lhs) && is_imag_literal(rhs)) {
                const cplx v = rhs.literal_value();
                lhs = PotentialExpr::literal({lhs.literal_value().real(), plus ? v.imag() : -v.imag()});
            } else {
                lhs = PotentialExpr::binary(plus ? NodeKind::add : NodeKind::sub, lhs, rhs);
            }
        }
        return lhs;
    }

    PotentialExpr term() {
        PotentialExpr lhs = unary();
        while (peek().type == Tok::star || peek().type == Tok::slash) {
            const bool mul = next().type == Tok::star;
            PotentialExpr rhs = unary();
            if (mul && is_real_literal(lhs) && rhs.kind() == NodeKind::literal &&
                rhs.literal_value() == cplx(0.0, 1.0)) {
                lhs = PotentialExpr::literal({0.0, lhs.literal_value().real()});
            } else {
                lhs = PotentialExpr::binary(mul ? NodeKind::mul : NodeKind::div, lhs, rhs);
            }
        }
        return lhs;
    }

    PotentialExpr unary() {
        if (accept(Tok::minus)) {
            PotentialExpr operand = unary();
            if (operand.kind() == NodeKind::literal) return PotentialExpr::literal(-operand.literal_value());
            return -operand;
        }
        return power();
    }

    PotentialExpr power() {
        PotentialExpr base = primary();
        if (peek().type == Tok::caret) {
            next();
            base = PotentialExpr::power(base, exponent());
            if (peek().type == Tok::caret) fail("chained '^' is not supported; parenthesize the base", peek());
        }
        return base;
    }

    long integer_literal() {
        const Token& t = peek();
        if (t.type != Tok::number) fail("non-rational exponent: expected an integer", t);
        for (char c : t.text) {
            if (!std::isdigit(static_cast<unsigned char>(c))) {
                fail("non-rational exponent '" + t.text + "': use an integer or (p/q)", t);
            }
        }
        long v = 0;
        const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (res.ec != std::errc()) fail("exponent '" + t.text + "' out of range", t);
        next();
        return v;
    }

    Rational exponent() {
        const Token& start = peek();
        if (accept(Tok::minus)) return Rational::make(-integer_literal(), 1);
        if (start.type == Tok::number) return Rational::make(integer_literal(), 1);
        if (!accept(Tok::lparen)) fail("non-rational exponent: expected an integer or (p/q)", start);
        const bool negative = accept(Tok::minus);
        long num = integer_literal();
        long den = 1;
        if (accept(Tok::slash)) {
            const Token& d = peek();
            den = integer_literal();
            if (den == 0) fail("exponent denominator is zero", d);
        }
        if (peek().type != Tok::rparen) fail("non-rational exponent: expected ')' after p/q", peek());
        expect_rparen(start);
        return Rational::make(negative ? -num : num, den);
    }

    PotentialExpr primary() {
        const Token& t = peek();
        switch (t.type) {
            case Tok::number:
                next();
                return PotentialExpr::literal(t.number);
            case Tok::ident: {
                next();
                if (auto v = var_from_name(t.text)) return PotentialExpr::variable(*v);
                if (t.text == "i") return PotentialExpr::literal({0.0, 1.0});
                if (t.text == "exp" || t.text == "ln" || t.text == "conj") {
                    const Token& open = peek();
                    if (!accept(Tok::lparen)) fail("expected '(' after " + t.text, open);
                    PotentialExpr arg = expr();
                    expect_rparen(open);
                    const NodeKind k = t.text == "exp" ? NodeKind::exp
                                       : t.text == "ln" ? NodeKind::ln
                                                        : NodeKind::conj;
                    return PotentialExpr::unary(k, arg);
                }
                if (peek().type == Tok::lparen) fail("unknown function '" + t.text + "'", t);
                return PotentialExpr::param(t.text);
            }
            case Tok::lparen: {
                next();
                PotentialExpr inner = expr();
                expect_rparen(t);
                return inner;
            }
            case Tok::rparen: fail("unbalanced parentheses: unexpected ')'", t);
            case Tok::end: fail("unexpected end of input", t);
            default: fail("unexpected token '" + t.text + "'", t);
        }
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s(buf);
    if (v < 0 || (v == 0.0 && std::signbit(v))) return "(" + s + ")";
    return s;
}

void print_into(const PotentialExpr& e, std::string& out) {
    switch (e.kind()) {
        case NodeKind::literal: {
            const cplx v = e.literal_value();
            if (v.imag() == 0.0) {
                out += format_real(v.real());
            } else if (v.real() == 0.0) {
                out += "(" + format_real(v.imag()) + "*i)";
            } else {
                out += "(" + format_real(v.real()) + " + " + format_real(v.imag()) + "*i)";
            }
            return;
        }
        case NodeKind::param: out += e.name(); return;
        case NodeKind::variable: out += var_name(e.var()); return;
        case NodeKind::neg:
            out += "(-";
            print_into(e.child(0), out);
            out += ")";
            return;
        case NodeKind::add:
        case NodeKind::sub:
        case NodeKind::mul:
        case NodeKind::div: {
            const char* op = e.kind() == NodeKind::add   ? " + "
                             : e.kind() == NodeKind::sub ? " - "
                             : e.kind() == NodeKind::mul ? " * "
                                                         : " / ";
            out += "(";
            print_into(e.child(0), out);
            out += op;
            print_into(e.child(1), out);
            out += ")";
            return;
        }
        case NodeKind::pow: {
            out += "(";
            print_into(e.child(0), out);
            const Rational r = e.exponent();
            out += ")^(";
            out += std::to_string(r.num);
            if (!r.is_integer()) out += "/" + std::to_string(r.den);
            out += ")";
            return;
        }
        case NodeKind::exp:
        case NodeKind::ln:
        case NodeKind::conj:
            out += e.kind() == NodeKind::exp ? "exp(" : e.kind() == NodeKind::ln ? "ln(" : "conj(";
            print_into(e.child(0), out);
            out += ")";
            return;
    }
}

PotentialExpr rebuild(const PotentialExpr& e, const std::function<PotentialExpr(const PotentialExpr&)>& f) {
    switch (e.kind()) {
        case NodeKind::literal:
        case NodeKind::param:
        case NodeKind::variable: return e;
        case NodeKind::pow: return PotentialExpr::power(f(e.child(0)), e.exponent());
        case NodeKind::neg:
        case NodeKind::exp:
        case NodeKind::ln:
        case NodeKind::conj: return PotentialExpr::unary(e.kind(), f(e.child(0)));
        default: return PotentialExpr::binary(e.kind(), f(e.child(0)), f(e.child(1)));
    }
}

void visit(const PotentialExpr& e, const std::function<void(const PotentialExpr&)>& f) {
    f(e);
    for (int i = 0; i < e.arity(); ++i) visit(e.child(i), f);
}

int swap_bar(int var) { return (var + 2) % 4; }

struct Evaluator {
    const ParameterTable& params;
    const std::array<cplx, kNumVars>& formal;
    int order;

    ComplexJet run(const PotentialExpr& e, bool conjugated) const {
        try {
            return eval_node(e, conjugated);
        } catch (const DomainError& err) {
            const std::string msg = err.what();
            if (msg.find("[in subexpression") != std::string::npos) throw;
            throw DomainError(msg + " [in subexpression " + print(conjugated ? conjugate(e) : e) + "]");
        }
    }

    ComplexJet eval_node(const PotentialExpr& e, bool conjugated) const {
        switch (e.kind()) {
            case NodeKind::literal: {
                const cplx v = e.literal_value();
                return ComplexJet::constant(conjugated ? std::conj(v) : v, order);
            }
            case NodeKind::param: return ComplexJet::constant(params.get(e.name()), order);
            case NodeKind::variable: {
                const int v = conjugated ? swap_bar(e.var()) : e.var();
                return ComplexJet::seed(formal, v, order);
            }
            case NodeKind::neg: return -run(e.child(0), conjugated);
            case NodeKind::add: return run(e.child(0), conjugated) + run(e.child(1), conjugated);
            case NodeKind::sub: return run(e.child(0), conjugated) - run(e.child(1), conjugated);
            case NodeKind::mul: return run(e.child(0), conjugated) * run(e.child(1), conjugated);
            case NodeKind::div: return run(e.child(0), conjugated) / run(e.child(1), conjugated);
            case NodeKind::pow: return pow(run(e.child(0), conjugated), e.exponent());
            case NodeKind::exp: return exp(run(e.child(0), conjugated));
            case NodeKind::ln: return log(run(e.child(0), conjugated));
            case NodeKind::conj: return run(e.child(0), !conjugated);
        }
        throw std::logic_error("unhandled node kind");
    }
};

}  // namespace

PotentialExpr parse(std::string_view source, int line, int column) {
    Lexer lexer(source, line, column);
    Parser parser(lexer.run());
    return parser.run();
}

std::string print(const PotentialExpr& expr) {
    std::string out;
    print_into(expr, out);
    return out;
}

std::set<std::string> parameters_of(const PotentialExpr& expr) {
    std::set<std::string> names;
    visit(expr, [&](const PotentialExpr& e) {
        if (e.kind() == NodeKind::param) names.insert(e.name());
    });
    return names;
}

void check_bound(const PotentialExpr& expr, const ParameterTable& params) {
    for (const auto& name : parameters_of(expr)) {
        if (!params.contains(name)) throw BindError("unbound parameter '" + name + "'");
    }
}

bool references_variable(const PotentialExpr& expr, int var) {
    bool found = false;
    // conj flips which slot a variable occupies.
    std::function<void(const PotentialExpr&, bool)> walk = [&](const PotentialExpr& e, bool flipped) {
        if (e.kind() == NodeKind::variable && (flipped ? swap_bar(e.var()) : e.var()) == var) found = true;
        for (int i = 0; i < e.arity(); ++i) walk(e.child(i), flipped != (e.kind() == NodeKind::conj));
    };
    walk(expr, false);
    return found;
}

PotentialExpr conjugate(const PotentialExpr& expr) {
    switch (expr.kind()) {
        case NodeKind::literal: return PotentialExpr::literal(std::conj(expr.literal_value()));
        case NodeKind::param: return expr;
        case NodeKind::variable: return PotentialExpr::variable(swap_bar(expr.var()));
        case NodeKind::conj: {
            // conj(conj(e)) == e; strip nested conj nodes in e as well.
            const PotentialExpr& inner = expr.child(0);
            return conjugate(conjugate(inner));
        }
        default: return rebuild(expr, [](const PotentialExpr& c) { return conjugate(c); });
    }
}

PotentialExpr substitute(const PotentialExpr& expr, const std::string& name, const PotentialExpr& replacement) {
    if (expr.kind() == NodeKind::param) return expr.name() == name ? replacement : expr;
    return rebuild(expr, [&](const PotentialExpr& c) { return substitute(c, name, replacement); });
}

ComplexJet evaluate_formal(const PotentialExpr& expr, const ParameterTable& params,
                           const std::array<cplx, kNumVars>& formal, int order) {
    check_bound(expr, params);
    Evaluator ev{params, formal, order};
    return ev.run(expr, false);
}

ComplexJet evaluate(const PotentialExpr& expr, const ParameterTable& params, const ChartPoint& point, int order) {
    if (!point.finite()) throw std::invalid_argument("chart point is not finite");
    return evaluate_formal(expr, params, point.formal(), order);
}

double check_reality(const PotentialExpr& expr, const ParameterTable& params, std::span<const ChartPoint> sample) {
    if (sample.empty()) throw std::invalid_argument("check_reality needs a nonempty sample");
    double worst = 0.0;
    for (const auto& p : sample) {
        worst = std::max(worst, std::abs(evaluate(expr, params, p, 0).value().imag()));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Potential files

PotentialFile parse_potential_file(std::string_view text) {
    PotentialFile file;
    file.source = std::string(text);
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, eol - pos);
        ++line_no;
        const std::size_t next = eol + 1;

        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string_view::npos || line[first] == '#') {
            pos = next;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError("expected 'param <name> = <real>', 'phi = <expr>' or 'family = <kind>'", line_no,
                             static_cast<int>(first) + 1);
        }
        auto trim = [](std::string_view s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string_view::npos) return std::string_view{};
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        const std::string_view lhs = trim(line.substr(0, eq));
        const std::string_view rhs_raw = line.substr(eq + 1);
        const std::string_view rhs = trim(rhs_raw);
        const int rhs_col = static_cast<int>(eq + 1 + rhs_raw.find_first_not_of(" \t\r")) + 1;
        const int lhs_col = static_cast<int>(first) + 1;

        if (lhs.substr(0, 6) == "param " || lhs.substr(0, 6) == "param\t") {
            const std::string name(trim(lhs.substr(6)));
            if (!is_identifier(name)) throw ParseError("invalid parameter name '" + name + "'", line_no, lhs_col);
            if (is_reserved_name(name)) {
                throw ParseError("parameter name '" + name + "' is reserved", line_no, lhs_col);
            }
            if (file.params.contains(name)) {
                throw ParseError("parameter '" + name + "' defined twice", line_no, lhs_col);
            }
            // Parameter values are real literals, optionally signed.
            double value = 0.0;
            std::string_view num = rhs;
            bool neg = false;
            if (!num.empty() && (num[0] == '-' || num[0] == '+')) {
                neg = num[0] == '-';
                num.remove_prefix(1);
            }
            const auto res = std::from_chars(num.data(), num.data() + num.size(), value);
            if (num.empty() || res.ec != std::errc() || res.ptr != num.data() + num.size() || !std::isfinite(value)) {
                throw ParseError("parameter value must be a finite real number", line_no, rhs_col);
            }
            file.params.set(name, neg ? -value : value);
        } else if (lhs == "phi") {
            if (file.phi) throw ParseError("more than one 'phi =' line", line_no, lhs_col);
            if (rhs.empty()) throw ParseError("empty expression", line_no, rhs_col);
            file.phi = parse(rhs, line_no, rhs_col);
        } else if (lhs == "family") {
            if (file.family) throw ParseError("more than one 'family =' line", line_no, lhs_col);
            if (rhs.empty()) throw ParseError("missing family kind", line_no, rhs_col);
            file.family = std::string(rhs);
        } else if (lhs == "W" || lhs == "F") {
            parse(rhs, line_no, rhs_col);  // validate early for positioned diagnostics
            file.family_exprs[std::string(lhs)] = std::string(rhs);
        } else {
            throw ParseError("unknown directive '" + std::string(lhs) + "'", line_no, lhs_col);
        }
        pos = next;
    }
    if (!file.phi && !file.family) throw ParseError("file defines neither 'phi =' nor 'family ='", line_no, 1);
    return file;
}

}  // namespace hkahler
