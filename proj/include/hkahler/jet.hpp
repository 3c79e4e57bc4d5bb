#pragma once

// Truncated Taylor jets in the four formal variables (z1, z2, zb1, zb2).
//
// A jet of order N stores the Taylor-normalized coefficients
// (d^m f)(p) / m! for every multi-index m with |m| <= N, densely, in
// graded-lexicographic order. Arithmetic is truncated at N. The barred
// variables are independent formal symbols (Wirtinger convention), so
// d/dz and d/dzb are ordinary partials of the jet.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hkahler {

using cplx = std::complex<double>;

inline constexpr int kNumVars = 4;
inline constexpr int kMaxJetOrder = 8;
inline constexpr int kDefaultJetOrder = 4;

/// Sentinel for jet_seed: produces a constant jet.
inline constexpr int kNoVar = -1;

/// Positions of the formal variables inside a multi-index.
enum Var : int { Z1 = 0, Z2 = 1, ZB1 = 2, ZB2 = 3 };

/// Holomorphic index alpha in {0,1} -> formal variable of z^alpha.
constexpr int holo(int alpha) { return alpha; }
/// Holomorphic index alpha in {0,1} -> formal variable of conj(z^alpha).
constexpr int antiholo(int alpha) { return alpha + 2; }

struct MultiIndex {
    std::array<int, kNumVars> k{};

    constexpr int degree() const { return k[0] + k[1] + k[2] + k[3]; }
    /// m! = k1! k2! k3! k4!
    double factorial() const;
    MultiIndex plus(int var, int count = 1) const {
        MultiIndex out = *this;
        out.k[static_cast<std::size_t>(var)] += count;
        return out;
    }
    friend constexpr bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

/// Exponent p/q of the DSL `^` operator, kept in lowest terms with q > 0.
struct Rational {
    long num = 1;
    long den = 1;

    static Rational make(long num, long den);
    bool is_integer() const { return den == 1; }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;
    friend constexpr bool operator==(const Rational&, const Rational&) = default;
};

namespace detail {

struct ProductTerm {
    std::uint32_t lhs;
    std::uint32_t rhs;
    std::uint32_t out;
};

// Index tables for one truncation order. Built once per order and shared.
struct JetLayout {
    int order = 0;
    std::vector<MultiIndex> indices;            // graded-lex
    std::vector<std::size_t> degree_offset;     // block [offset[d], offset[d+1]) has degree d
    std::vector<std::uint32_t> lookup;          // dense (order+1)^4 table, UINT32_MAX = absent
    // products[da][db]: all (i, j, i+j) with deg i = da, deg j = db, da + db <= order.
    std::vector<std::vector<std::vector<ProductTerm>>> products;

    std::size_t size() const { return indices.size(); }
    std::size_t index_of(const MultiIndex& m) const;
};

const JetLayout& layout(int order);

}  // namespace detail

/// Number of multi-indices of total degree <= order in four variables, C(order+4, 4).
std::size_t jet_size(int order);

class ComplexJet {
public:
    ComplexJet();

    static ComplexJet constant(cplx value, int order = kDefaultJetOrder);

    /// Jet of the coordinate function `var` expanded at `point`; var == kNoVar gives the zero jet.
    static ComplexJet seed(const std::array<cplx, kNumVars>& point, int var,
                           int order = kDefaultJetOrder);

    int order() const { return layout_->order; }
    std::size_t size() const { return coeffs_.size(); }

    cplx value() const { return coeffs_[0]; }

    /// Taylor-normalized coefficient f^(m)(p) / m!.
    cplx coeff(const MultiIndex& m) const;
    void set_coeff(const MultiIndex& m, cplx v);

    std::span<const cplx> coeffs() const { return coeffs_; }
    std::span<cplx> coeffs() { return coeffs_; }

    const MultiIndex& index_at(std::size_t i) const { return layout_->indices[i]; }

    /// Raw partial derivative d^m f at the expansion point.
    cplx partial(const MultiIndex& m) const;

    ComplexJet& operator+=(const ComplexJet& rhs);
    ComplexJet& operator-=(const ComplexJet& rhs);
    ComplexJet& operator*=(const ComplexJet& rhs);
    ComplexJet& operator/=(const ComplexJet& rhs);
    ComplexJet& operator+=(cplx s);
    ComplexJet& operator*=(cplx s);

    friend ComplexJet operator+(ComplexJet a, const ComplexJet& b) { return a += b; }
    friend ComplexJet operator-(ComplexJet a, const ComplexJet& b) { return a -= b; }
    friend ComplexJet operator*(const ComplexJet& a, const ComplexJet& b);
    friend ComplexJet operator/(const ComplexJet& a, const ComplexJet& b);
    friend ComplexJet operator-(ComplexJet a);

    friend ComplexJet operator+(ComplexJet a, cplx s) { return a += s; }
    friend ComplexJet operator+(cplx s, ComplexJet a) { return a += s; }
    friend ComplexJet operator-(ComplexJet a, cplx s) { return a += -s; }
    friend ComplexJet operator-(cplx s, ComplexJet a) { return -a + s; }
    friend ComplexJet operator*(ComplexJet a, cplx s) { return a *= s; }
    friend ComplexJet operator*(cplx s, ComplexJet a) { return a *= s; }
    friend ComplexJet operator*(ComplexJet a, double s) { return a *= cplx(s); }
    friend ComplexJet operator*(double s, ComplexJet a) { return a *= cplx(s); }

    /// Coefficient-wise equality (same order, identical coefficients).
    friend bool operator==(const ComplexJet& a, const ComplexJet& b);

private:
    explicit ComplexJet(const detail::JetLayout& layout);

    const detail::JetLayout* layout_;
    std::vector<cplx> coeffs_;

    friend ComplexJet truncate(const ComplexJet&, int);
    friend ComplexJet derivative(const ComplexJet&, int);
    friend ComplexJet exp(const ComplexJet&);
    friend ComplexJet log(const ComplexJet&);
    friend ComplexJet reciprocal(const ComplexJet&);
};

ComplexJet exp(const ComplexJet& u);

/// Principal-branch logarithm. Throws DomainError for zero value or a value on the
/// negative real axis.
ComplexJet log(const ComplexJet& u);

ComplexJet reciprocal(const ComplexJet& u);

/// u^r. Integer exponents use repeated products (no branch restriction except
/// a zero base with negative exponent); other exponents use exp(r * log u).
ComplexJet pow(const ComplexJet& u, Rational r);

/// Logarithm with the constant phase of the value divided out first. Derivatives
/// of the result match those of any branch of log u; only the value differs.
/// Used where only derivatives of a logarithm are consumed (log-det formulas).
ComplexJet log_up_to_constant(const ComplexJet& u);

/// Jet of the partial derivative d f / d var, one order lower.
ComplexJet derivative(const ComplexJet& f, int var);

/// Same expansion, fewer coefficients. `order` must not exceed f.order().
ComplexJet truncate(const ComplexJet& f, int order);

/// The jet_combine operation set.
enum class JetOp { add, sub, mul, div, neg, pow_rational, exp, ln };

/// Dispatches one elementary operation. `rhs` is ignored for unary ops and
/// `exponent` for everything except pow_rational.
ComplexJet jet_combine(JetOp op, const ComplexJet& lhs, const ComplexJet* rhs = nullptr,
                       Rational exponent = {});

/// coeffs[m] * m!; throws std::out_of_range when |m| exceeds the order.
cplx extract_partial(const ComplexJet& jet, const MultiIndex& m);

}  // namespace hkahler
