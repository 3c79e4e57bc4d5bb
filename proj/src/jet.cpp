#include "hkahler/jet.hpp"

#include "hkahler/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hkahler {

namespace {

constexpr std::uint32_t kAbsent = std::numeric_limits<std::uint32_t>::max();

std::size_t encode(const MultiIndex& m, int order) {
    const auto base = static_cast<std::size_t>(order + 1);
    std::size_t code = 0;
    for (int v = 0; v < kNumVars; ++v) {
        code = code * base + static_cast<std::size_t>(m.k[static_cast<std::size_t>(v)]);
    }
    return code;
}

detail::JetLayout build_layout(int order) {
    detail::JetLayout L;
    L.order = order;
    L.degree_offset.push_back(0);
    for (int d = 0; d <= order; ++d) {
        // Lexicographic with the first variable's exponent descending.
        for (int a = d; a >= 0; --a) {
            for (int b = d - a; b >= 0; --b) {
                for (int c = d - a - b; c >= 0; --c) {
                    L.indices.push_back(MultiIndex{{a, b, c, d - a - b - c}});
                }
            }
        }
        L.degree_offset.push_back(L.indices.size());
    }

    const auto base = static_cast<std::size_t>(order + 1);
    L.lookup.assign(base * base * base * base, kAbsent);
    for (std::size_t i = 0; i < L.indices.size(); ++i) {
        L.lookup[encode(L.indices[i], order)] = static_cast<std::uint32_t>(i);
    }

    const auto n = static_cast<std::size_t>(order + 1);
    L.products.assign(n, std::vector<std::vector<detail::ProductTerm>>(n));
    for (int da = 0; da <= order; ++da) {
        for (int db = 0; da + db <= order; ++db) {
            auto& terms = L.products[static_cast<std::size_t>(da)][static_cast<std::size_t>(db)];
            for (std::size_t i = L.degree_offset[static_cast<std::size_t>(da)];
                 i < L.degree_offset[static_cast<std::size_t>(da) + 1]; ++i) {
                for (std::size_t j = L.degree_offset[static_cast<std::size_t>(db)];
                     j < L.degree_offset[static_cast<std::size_t>(db) + 1]; ++j) {
                    MultiIndex sum;
                    for (std::size_t v = 0; v < kNumVars; ++v) {
                        sum.k[v] = L.indices[i].k[v] + L.indices[j].k[v];
                    }
                    terms.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                     L.lookup[encode(sum, order)]});
                }
            }
        }
    }
    return L;
}

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// Accumulates sum_{terms in products[da][db]} scale * a[lhs] * b[rhs] into out[term.out].
void accumulate_block(const detail::JetLayout& L, int da, int db, cplx scale,
                      std::span<const cplx> a, std::span<const cplx> b, std::span<cplx> out) {
    for (const auto& t : L.products[static_cast<std::size_t>(da)][static_cast<std::size_t>(db)]) {
        out[t.out] += scale * a[t.lhs] * b[t.rhs];
    }
}

bool on_branch_cut(cplx v) {
    return v.real() < 0.0 && std::abs(v.imag()) <= 1e-15 * std::abs(v);
}

}  // namespace

double MultiIndex::factorial() const {
    double f = 1.0;
    for (int x : k) f *= hkahler::factorial(x);
    return f;
}

Rational Rational::make(long num, long den) {
    if (den == 0) throw std::invalid_argument("rational exponent with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const long g = std::gcd(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    return Rational{num, den};
}

std::string Rational::str() const {
    return std::to_string(num) + "/" + std::to_string(den);
}

namespace detail {

std::size_t JetLayout::index_of(const MultiIndex& m) const {
    for (int x : m.k) {
        if (x < 0) throw std::out_of_range("negative multi-index entry");
    }
    if (m.degree() > order) {
        throw std::out_of_range("multi-index of degree " + std::to_string(m.degree()) +
                                " exceeds jet order " + std::to_string(order));
    }
    return lookup[encode(m, order)];
}

const JetLayout& layout(int order) {
    if (order < 0 || order > kMaxJetOrder) {
        throw std::out_of_range("jet order " + std::to_string(order) + " outside [0, " +
                                std::to_string(kMaxJetOrder) + "]");
    }
    static const std::array<JetLayout, kMaxJetOrder + 1> layouts = [] {
        std::array<JetLayout, kMaxJetOrder + 1> out;
        for (int n = 0; n <= kMaxJetOrder; ++n) out[static_cast<std::size_t>(n)] = build_layout(n);
        return out;
    }();
    return layouts[static_cast<std::size_t>(order)];
}

}  // namespace detail

std::size_t jet_size(int order) { return detail::layout(order).size(); }

ComplexJet::ComplexJet() : ComplexJet(detail::layout(0)) {}

ComplexJet::ComplexJet(const detail::JetLayout& layout)
    : layout_(&layout), coeffs_(layout.size(), cplx{}) {}

ComplexJet ComplexJet::constant(cplx value, int order) {
    ComplexJet j(detail::layout(order));
    j.coeffs_[0] = value;
    return j;
}

ComplexJet ComplexJet::seed(const std::array<cplx, kNumVars>& point, int var, int order) {
    if (var == kNoVar) return constant(cplx{}, order);
    if (var < 0 || var >= kNumVars) {
        throw std::out_of_range("seed variable index " + std::to_string(var) + " outside 0..3");
    }
    ComplexJet j(detail::layout(order));
    j.coeffs_[0] = point[static_cast<std::size_t>(var)];
    if (order >= 1) j.set_coeff(MultiIndex{}.plus(var), 1.0);
    return j;
}

cplx ComplexJet::coeff(const MultiIndex& m) const { return coeffs_[layout_->index_of(m)]; }

void ComplexJet::set_coeff(const MultiIndex& m, cplx v) { coeffs_[layout_->index_of(m)] = v; }

cplx ComplexJet::partial(const MultiIndex& m) const { return coeff(m) * m.factorial(); }

ComplexJet& ComplexJet::operator+=(const ComplexJet& rhs) {
    if (rhs.order() < order()) *this = truncate(*this, rhs.order());
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += rhs.coeffs_[i];
    return *this;
}

ComplexJet& ComplexJet::operator-=(const ComplexJet& rhs) {
    if (rhs.order() < order()) *this = truncate(*this, rhs.order());
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= rhs.coeffs_[i];
    return *this;
}

ComplexJet& ComplexJet::operator*=(const ComplexJet& rhs) { return *this = *this * rhs; }

ComplexJet& ComplexJet::operator/=(const ComplexJet& rhs) { return *this = *this / rhs; }

ComplexJet& ComplexJet::operator+=(cplx s) {
    coeffs_[0] += s;
    return *this;
}

ComplexJet& ComplexJet::operator*=(cplx s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
}

ComplexJet operator-(ComplexJet a) {
    for (auto& c : a.coeffs_) c = -c;
    return a;
}

ComplexJet operator*(const ComplexJet& a, const ComplexJet& b) {
    const int n = std::min(a.order(), b.order());
    const auto& L = detail::layout(n);
    ComplexJet out(L);
    for (int da = 0; da <= n; ++da) {
        for (int db = 0; da + db <= n; ++db) {
            accumulate_block(L, da, db, 1.0, a.coeffs_, b.coeffs_, out.coeffs_);
        }
    }
    return out;
}

ComplexJet reciprocal(const ComplexJet& u) {
    const cplx u0 = u.value();
    if (u0 == cplx{}) throw DomainError("division by a jet whose value is zero");
    const auto& L = *u.layout_;
    ComplexJet q(L);
    q.coeffs_[0] = 1.0 / u0;
    // u * q = 1  =>  q_[d] = -(sum_{j=1}^{d} u_[j] q_[d-j]) / u0
    for (int d = 1; d <= L.order; ++d) {
        for (int j = 1; j <= d; ++j) accumulate_block(L, j, d - j, -1.0, u.coeffs_, q.coeffs_, q.coeffs_);
        for (std::size_t i = L.degree_offset[static_cast<std::size_t>(d)];
             i < L.degree_offset[static_cast<std::size_t>(d) + 1]; ++i) {
            q.coeffs_[i] /= u0;
        }
    }
    return q;
}

ComplexJet operator/(const ComplexJet& a, const ComplexJet& b) {
    const int n = std::min(a.order(), b.order());
    const ComplexJet num = truncate(a, n);
    const ComplexJet den = truncate(b, n);
    const cplx b0 = den.value();
    if (b0 == cplx{}) throw DomainError("division by a jet whose value is zero");
    const auto& L = detail::layout(n);
    ComplexJet q(L);
    // a = q * b  =>  q_[d] = (a_[d] - sum_{j=0}^{d-1} q_[j] b_[d-j]) / b0
    for (int d = 0; d <= n; ++d) {
        const auto lo = L.degree_offset[static_cast<std::size_t>(d)];
        const auto hi = L.degree_offset[static_cast<std::size_t>(d) + 1];
        for (auto i = lo; i < hi; ++i) q.coeffs_[i] = num.coeffs_[i];
        for (int j = 0; j < d; ++j) accumulate_block(L, j, d - j, -1.0, q.coeffs_, den.coeffs_, q.coeffs_);
        for (auto i = lo; i < hi; ++i) q.coeffs_[i] /= b0;
    }
    return q;
}

bool operator==(const ComplexJet& a, const ComplexJet& b) {
    return a.order() == b.order() && a.coeffs_ == b.coeffs_;
}

ComplexJet exp(const ComplexJet& u) {
    const auto& L = *u.layout_;
    ComplexJet e(L);
    e.coeffs_[0] = std::exp(u.value());
    // Euler-operator form of e' = u' e on homogeneous blocks:
    // d e_[d] = sum_{j=1}^{d} j u_[j] e_[d-j]
    for (int d = 1; d <= L.order; ++d) {
        for (int j = 1; j <= d; ++j) {
            accumulate_block(L, j, d - j, static_cast<double>(j) / d, u.coeffs_, e.coeffs_, e.coeffs_);
        }
    }
    return e;
}

ComplexJet log(const ComplexJet& u) {
    const cplx u0 = u.value();
    if (u0 == cplx{}) throw DomainError("ln of a jet whose value is zero");
    if (on_branch_cut(u0)) {
        throw DomainError("ln argument " + std::to_string(u0.real()) +
                          " lies on the principal branch cut (negative real axis)");
    }
    const auto& L = *u.layout_;
    ComplexJet l(L);
    l.coeffs_[0] = std::log(u0);
    // d u0 l_[d] = d u_[d] - sum_{j=1}^{d-1} j l_[j] u_[d-j]
    for (int d = 1; d <= L.order; ++d) {
        const auto lo = L.degree_offset[static_cast<std::size_t>(d)];
        const auto hi = L.degree_offset[static_cast<std::size_t>(d) + 1];
        for (auto i = lo; i < hi; ++i) l.coeffs_[i] = u.coeffs_[i];
        for (int j = 1; j < d; ++j) {
            accumulate_block(L, j, d - j, -static_cast<double>(j) / d, l.coeffs_, u.coeffs_, l.coeffs_);
        }
        for (auto i = lo; i < hi; ++i) l.coeffs_[i] /= u0;
    }
    return l;
}

ComplexJet log_up_to_constant(const ComplexJet& u) {
    const cplx u0 = u.value();
    if (u0 == cplx{}) throw DomainError("ln of a jet whose value is zero");
    return log(u * (std::abs(u0) / u0));
}

ComplexJet pow(const ComplexJet& u, Rational r) {
    if (r.is_integer()) {
        long n = r.num;
        if (n == 0) return ComplexJet::constant(1.0, u.order());
        ComplexJet base = n < 0 ? reciprocal(u) : u;
        n = n < 0 ? -n : n;
        ComplexJet result = ComplexJet::constant(1.0, u.order());
        while (n > 0) {
            if (n & 1) result = result * base;
            n >>= 1;
            if (n > 0) base = base * base;
        }
        return result;
    }
    if (u.value() == cplx{}) {
        throw DomainError("non-integer power " + r.str() + " of a jet whose value is zero");
    }
    if (on_branch_cut(u.value())) {
        throw DomainError("non-integer power " + r.str() + " of " + std::to_string(u.value().real()) +
                          ", which lies on the principal branch cut");
    }
    return exp(log(u) * r.value());
}

ComplexJet derivative(const ComplexJet& f, int var) {
    if (var < 0 || var >= kNumVars) throw std::out_of_range("derivative variable outside 0..3");
    if (f.order() == 0) throw std::out_of_range("cannot differentiate an order-0 jet");
    const auto& L = detail::layout(f.order() - 1);
    ComplexJet out(L);
    for (std::size_t i = 0; i < L.size(); ++i) {
        const MultiIndex& m = L.indices[i];
        const auto src = f.layout_->index_of(m.plus(var));
        out.coeffs_[i] = f.coeffs_[src] * static_cast<double>(m.k[static_cast<std::size_t>(var)] + 1);
    }
    return out;
}

ComplexJet truncate(const ComplexJet& f, int order) {
    if (order > f.order()) {
        throw std::out_of_range("cannot raise jet order from " + std::to_string(f.order()) + " to " +
                                std::to_string(order));
    }
    if (order == f.order()) return f;
    ComplexJet out(detail::layout(order));
    // Graded storage: the lower-order layout is a prefix.
    std::copy_n(f.coeffs_.begin(), out.coeffs_.size(), out.coeffs_.begin());
    return out;
}

ComplexJet jet_combine(JetOp op, const ComplexJet& lhs, const ComplexJet* rhs, Rational exponent) {
    auto need_rhs = [&]() -> const ComplexJet& {
        if (rhs == nullptr) throw std::invalid_argument("binary jet operation without a second operand");
        return *rhs;
    };
    switch (op) {
        case JetOp::add: return lhs + need_rhs();
        case JetOp::sub: return lhs - need_rhs();
        case JetOp::mul: return lhs * need_rhs();
        case JetOp::div: return lhs / need_rhs();
        case JetOp::neg: return -lhs;
        case JetOp::pow_rational: return pow(lhs, exponent);
        case JetOp::exp: return exp(lhs);
        case JetOp::ln: return log(lhs);
    }
    throw std::invalid_argument("unknown jet operation");
}

cplx extract_partial(const ComplexJet& jet, const MultiIndex& m) { return jet.partial(m); }

}  // namespace hkahler
