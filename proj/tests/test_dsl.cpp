#include "hkahler/dsl.hpp"
#include "hkahler/errors.hpp"
#include "oracle.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hkahler;

namespace {

int parse_error_column(const std::string& src) {
    try {
        parse(src);
    } catch (const ParseError& e) {
        return e.column();
    }
    return -1;
}

double jet_dist(const ComplexJet& a, const ComplexJet& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.coeffs()[i] - b.coeffs()[i]));
    return d;
}

const ChartPoint kQ{cplx(0.4, -0.3), cplx(0.2, 0.5)};

}  // namespace

TEST(Parse, PrintsFullyParenthesized) {
    EXPECT_EQ(print(parse("z1*zb1 + z2*zb2")), "((z1 * zb1) + (z2 * zb2))");
    EXPECT_EQ(print(parse("a - b - c")), "((a - b) - c)");
    EXPECT_EQ(print(parse("a / b * c")), "((a / b) * c)");
    EXPECT_EQ(print(parse("exp(z1 + zb1)")), "exp((z1 + zb1))");
    EXPECT_EQ(print(parse("ln(1 + z2*zb2)")), "ln((1 + (z2 * zb2)))");
    EXPECT_EQ(print(parse("conj(z1)")), "conj(z1)");
}

TEST(Parse, PowerBindsTighterThanNegation) {
    const PotentialExpr e = parse("-z1^2");
    ASSERT_EQ(e.kind(), NodeKind::neg);
    EXPECT_EQ(e.child(0).kind(), NodeKind::pow);
    EXPECT_EQ(print(e), "(-(z1)^(2))");
}

TEST(Parse, NegationBindsTighterThanProduct) {
    EXPECT_EQ(print(parse("-a*b")), "((-a) * b)");
    EXPECT_EQ(print(parse("a*-b")), "(a * (-b))");
}

TEST(Parse, RationalExponents) {
    const PotentialExpr e = parse("(z1 + zb1)^(3/2)");
    ASSERT_EQ(e.kind(), NodeKind::pow);
    EXPECT_EQ(e.exponent(), Rational::make(3, 2));
    EXPECT_EQ(print(e), "((z1 + zb1))^(3/2)");
    EXPECT_EQ(parse("x^(-1/2)").exponent(), Rational::make(-1, 2));
    EXPECT_EQ(parse("x^(4/2)").exponent(), Rational::make(2, 1));
    EXPECT_EQ(parse("x^-3").exponent(), Rational::make(-3, 1));
}

TEST(Parse, LiteralFolding) {
    EXPECT_EQ(parse("-2"), PotentialExpr::literal(-2.0));
    EXPECT_EQ(print(parse("-2")), "(-2)");
    EXPECT_EQ(parse("3*i"), PotentialExpr::literal(cplx(0.0, 3.0)));
    EXPECT_EQ(print(parse("3*i")), "(3*i)");
    EXPECT_EQ(parse("1 + 2*i"), PotentialExpr::literal(cplx(1.0, 2.0)));
    EXPECT_EQ(parse("1 - 2*i"), PotentialExpr::literal(cplx(1.0, -2.0)));
    EXPECT_EQ(print(parse("1 + 2*i")), "(1 + 2*i)");
    EXPECT_EQ(parse("i"), PotentialExpr::literal(cplx(0.0, 1.0)));
}

TEST(Parse, NumbersRoundTripExactly) {
    for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, 1e-300, 2.5}) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        EXPECT_EQ(parse(buf).literal_value().real(), v);
        EXPECT_EQ(parse(print(PotentialExpr::literal(v))), PotentialExpr::literal(v));
    }
}

TEST(Parse, Errors) {
    EXPECT_THROW(parse("z1*("), ParseError);
    EXPECT_EQ(parse_error_column("z1*("), 5);
    EXPECT_EQ(parse_error_column("z1 + z2)"), 8);
    EXPECT_EQ(parse_error_column("(z1 + z2"), 1);
    EXPECT_EQ(parse_error_column("z1^x"), 4);
    EXPECT_EQ(parse_error_column("z1^1.5"), 4);
    EXPECT_EQ(parse_error_column("z1^2^3"), 5);
    EXPECT_EQ(parse_error_column("foo(z1)"), 1);
    EXPECT_EQ(parse_error_column("z1 $ z2"), 4);
    EXPECT_EQ(parse_error_column("z1^(1/0)"), 7);
    EXPECT_EQ(parse_error_column(""), 1);
    EXPECT_EQ(parse_error_column("exp z1"), 5);
}

TEST(Parse, ErrorMessageCarriesPosition) {
    try {
        parse("z1 + (", 3, 7);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
        EXPECT_EQ(e.column(), 13);
        EXPECT_NE(std::string(e.what()).find("line 3, column 13"), std::string::npos);
    }
}

TEST(Parse, ParsedExpressionsRoundTrip) {
    for (const char* src : {"A*(z1+zb1+gamma*z2*zb2)^(3/2)", "ln(1 + exp(z1 + zb1 + ln(1 + eps*z2*zb2)))",
                            "-(z1 - 2.5e-3)*conj(z2)/(1 + 2*i)", "exp(-z1^2) - (-1)*i", "z1^(-2/3)*zb1^(1/3)"}) {
        const PotentialExpr e = parse(src);
        EXPECT_EQ(parse(print(e)), e) << src;
    }
}

TEST(Params, Validation) {
    ParameterTable t;
    EXPECT_NO_THROW(t.set("A", 1.0));
    EXPECT_NO_THROW(t.set("rho_shift", -0.5));
    EXPECT_THROW(t.set("2a", 1.0), std::invalid_argument);
    EXPECT_THROW(t.set("z1", 1.0), std::invalid_argument);
    EXPECT_THROW(t.set("exp", 1.0), std::invalid_argument);
    EXPECT_THROW(t.set("i", 1.0), std::invalid_argument);
    EXPECT_THROW(t.set("B", std::nan("")), std::invalid_argument);
    EXPECT_THROW(t.get("missing"), BindError);
    EXPECT_EQ(t.get("A"), 1.0);
}

TEST(Params, ReservedNames) {
    for (const char* n : {"z1", "z2", "zb1", "zb2", "exp", "ln", "conj", "i"}) EXPECT_TRUE(is_reserved_name(n));
    EXPECT_FALSE(is_reserved_name("x"));
    EXPECT_FALSE(is_reserved_name("gamma"));
}

TEST(Params, CollectAndBind) {
    const PotentialExpr e = parse("A*(z1 + zb1 + gamma*z2*zb2)^(3/2) + A");
    EXPECT_EQ(parameters_of(e), (std::set<std::string>{"A", "gamma"}));
    EXPECT_THROW(check_bound(e, ParameterTable{{"A", 1.0}}), BindError);
    EXPECT_NO_THROW(check_bound(e, ParameterTable{{"A", 1.0}, {"gamma", 2.0}}));
    EXPECT_THROW(evaluate(e, ParameterTable{{"A", 1.0}}, kQ), BindError);
}

TEST(Transform, ReferencesVariableSeesThroughConj) {
    const PotentialExpr e = parse("conj(z1) * z2");
    EXPECT_TRUE(references_variable(e, ZB1));
    EXPECT_FALSE(references_variable(e, Z1));
    EXPECT_TRUE(references_variable(e, Z2));
    EXPECT_FALSE(references_variable(e, ZB2));
    EXPECT_TRUE(references_variable(parse("conj(conj(z1))"), Z1));
}

TEST(Transform, ConjugateDistributes) {
    EXPECT_EQ(conjugate(parse("z1*zb2 + (1 + 2*i)")), parse("zb1*z2 + (1 - 2*i)"));
    EXPECT_EQ(conjugate(parse("conj(z1)")), parse("z1"));
}

TEST(Transform, Substitute) {
    const PotentialExpr W = parse("exp(x)");
    EXPECT_EQ(substitute(W, "x", parse("z1 + zb1")), parse("exp(z1 + zb1)"));
    EXPECT_EQ(substitute(W, "y", parse("z1")), W);
}

TEST(Evaluate, MatchesClosedFormValues) {
    const ComplexJet j = evaluate(parse("z1*zb1*exp(z2)"), {}, kQ, 2);
    EXPECT_NEAR(std::abs(j.value() - std::norm(kQ.z1) * std::exp(kQ.z2)), 0.0, 1e-15);
    // d_1 d_1bar = exp(z2)
    EXPECT_NEAR(std::abs(j.partial({{1, 0, 1, 0}}) - std::exp(kQ.z2)), 0.0, 1e-15);
    // d_2 d_1bar = z1 exp(z2)
    EXPECT_NEAR(std::abs(j.partial({{0, 1, 1, 0}}) - kQ.z1 * std::exp(kQ.z2)), 0.0, 1e-15);
}

TEST(Evaluate, ConjSwapsVariables) {
    const ComplexJet a = evaluate(parse("conj(z1*exp(i*z2))"), {}, kQ, 3);
    const ComplexJet b = evaluate(parse("zb1*exp(-i*zb2)"), {}, kQ, 3);
    EXPECT_LT(jet_dist(a, b), 1e-15);
}

TEST(Evaluate, AgainstFiniteDifferenceOracle) {
    const PotentialExpr e = parse("ln(2 + z1*zb1) * (1 + z2*zb2)^(3/2) + exp(z1 - zb2)/(3 + z2)");
    const oracle::Fn f = [](const oracle::Formal& x) {
        return std::log(2.0 + x[0] * x[2]) * std::pow(1.0 + x[1] * x[3], 1.5) + std::exp(x[0] - x[3]) / (3.0 + x[1]);
    };
    const ComplexJet j = evaluate(e, {}, kQ, 4);
    const oracle::Formal p = oracle::formal(kQ.z1, kQ.z2);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const MultiIndex& m = j.index_at(i);
        const cplx fd = oracle::fd_auto(f, p, m.k);
        EXPECT_LT(std::abs(j.partial(m) - fd), 1e-7 * std::max(1.0, std::abs(fd)));
    }
}

TEST(Evaluate, DomainErrorNamesSubexpression) {
    try {
        evaluate(parse("1 + ln(z1 - z1)"), {}, kQ);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("[in subexpression ln((z1 - z1))]"), std::string::npos) << e.what();
    }
    EXPECT_THROW(evaluate(parse("(z1 - z1 - 1)^(1/2)"), {}, ChartPoint{}), DomainError);
}

TEST(Evaluate, NonFinitePointRejected) {
    EXPECT_THROW(evaluate(parse("z1"), {}, ChartPoint{cplx(INFINITY, 0.0), 0.0}), std::invalid_argument);
}

TEST(Reality, RealAndComplexPotentials) {
    const std::vector<ChartPoint> pts{kQ, ChartPoint{cplx(-0.2, 0.1), cplx(0.3, 0.0)}};
    EXPECT_LT(check_reality(parse("z1*zb1 + exp(z2 + zb2)"), {}, pts), 1e-15);
    EXPECT_LT(check_reality(parse("z1 + conj(z1)"), {}, pts), 1e-15);
    EXPECT_GT(check_reality(parse("z1"), {}, pts), 0.2);
    EXPECT_THROW(check_reality(parse("z1"), {}, {}), std::invalid_argument);
}

TEST(PotentialFileFormat, ParsesDirectives) {
    const std::string text =
        "# Ricci-flat normal form\n"
        "param A = 2\n"
        "param gamma = -0.5\n"
        "\n"
        "phi = A*(z1+zb1+gamma*z2*zb2)^(3/2)\n";
    const PotentialFile f = parse_potential_file(text);
    EXPECT_EQ(f.source, text);
    EXPECT_EQ(f.params.get("A"), 2.0);
    EXPECT_EQ(f.params.get("gamma"), -0.5);
    ASSERT_TRUE(f.phi);
    EXPECT_EQ(*f.phi, parse("A*(z1+zb1+gamma*z2*zb2)^(3/2)"));
    EXPECT_FALSE(f.family);
}

TEST(PotentialFileFormat, FamilyLines) {
    const PotentialFile f = parse_potential_file("family = generalized-equidistant\nW = exp(x)\nF = z2*zb2\n");
    EXPECT_EQ(f.family, "generalized-equidistant");
    EXPECT_EQ(f.family_exprs.at("W"), "exp(x)");
    EXPECT_EQ(f.family_exprs.at("F"), "z2*zb2");
    EXPECT_FALSE(f.phi);
}

TEST(PotentialFileFormat, ErrorsCarryFilePositions) {
    auto where = [](const std::string& text) {
        try {
            parse_potential_file(text);
        } catch (const ParseError& e) {
            return std::make_pair(e.line(), e.column());
        }
        return std::make_pair(-1, -1);
    };
    EXPECT_EQ(where("phi = z1*("), std::make_pair(1, 11));
    EXPECT_EQ(where("param A = 1\n\nphi =  z1 + )"), std::make_pair(3, 13));
    EXPECT_EQ(where("param A = one\nphi = A"), std::make_pair(1, 11));
    EXPECT_EQ(where("param z1 = 1\nphi = z1"), std::make_pair(1, 1));
    EXPECT_EQ(where("param A = 1\nparam A = 2\nphi = A"), std::make_pair(2, 1));
    EXPECT_EQ(where("phi = z1\nphi = z2"), std::make_pair(2, 1));
    EXPECT_EQ(where("psi = z1"), std::make_pair(1, 1));
    EXPECT_EQ(where("just words"), std::make_pair(1, 1));
    EXPECT_EQ(where("# nothing\n").first, 2);
    EXPECT_EQ(where("family = flat\nW = exp(\n"), std::make_pair(2, 9));
}

// Random expressions: printing is canonical after one parse, and the reparsed
// tree evaluates to the same jet.
TEST(DslProperty, PrintParseIdempotent) {
    oracle::ExprGen gen(21);
    const ParameterTable params{{"c", 0.7}};
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const oracle::Generated g = gen.gen(4);
        const PotentialExpr once = parse(print(g.expr));
        EXPECT_EQ(parse(print(once)), once) << print(g.expr);
        EXPECT_EQ(print(parse(print(once))), print(once));
        try {
            const ComplexJet a = evaluate(g.expr, params, kQ, 3);
            const ComplexJet b = evaluate(once, params, kQ, 3);
            double scale = 1.0;
            for (auto c : a.coeffs()) scale = std::max(scale, std::abs(c));
            EXPECT_LT(jet_dist(a, b), 1e-12 * scale) << print(g.expr);
            ++checked;
        } catch (const DomainError&) {
        }
    }
    EXPECT_GT(checked, 100);
}

// Evaluation is compositional: the jet of a op b is the jet operation applied to the parts.
TEST(DslProperty, Compositional) {
    oracle::ExprGen gen(22);
    const ParameterTable params{{"c", 0.7}};
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const oracle::Generated a = gen.gen(3);
        const oracle::Generated b = gen.gen(3);
        try {
            const ComplexJet ja = evaluate(a.expr, params, kQ, 3);
            const ComplexJet jb = evaluate(b.expr, params, kQ, 3);
            EXPECT_EQ(evaluate(a.expr + b.expr, params, kQ, 3), ja + jb);
            EXPECT_EQ(evaluate(a.expr * b.expr, params, kQ, 3), ja * jb);
            EXPECT_EQ(evaluate(exp(a.expr), params, kQ, 3), exp(ja));
            EXPECT_EQ(evaluate(-a.expr, params, kQ, 3), -ja);
            ++checked;
        } catch (const DomainError&) {
        }
    }
    EXPECT_GT(checked, 50);
}

// Random expressions against the scalar oracle through every partial of order <= 3.
TEST(DslProperty, RandomExpressionsMatchOracle) {
    oracle::ExprGen gen(23);
    const ParameterTable params{{"c", 0.7}};
    int checked = 0;
    for (int trial = 0; trial < 400 && checked < 30; ++trial) {
        const oracle::Generated g = gen.gen(3);
        const oracle::Formal p = oracle::formal(kQ.z1, kQ.z2);
        try {
            const ComplexJet j = evaluate(g.expr, params, kQ, 3);
            bool ok = true;
            for (std::size_t i = 0; i < j.size() && ok; ++i) {
                const MultiIndex& m = j.index_at(i);
                const cplx fd = oracle::fd_auto(g.fn, p, m.k);
                ok = std::abs(j.partial(m) - fd) < 1e-6 * std::max(1.0, std::abs(fd));
                EXPECT_TRUE(ok) << print(g.expr) << " at multi-index " << m.k[0] << m.k[1] << m.k[2] << m.k[3];
            }
            ++checked;
        } catch (const DomainError&) {
        } catch (const oracle::GuardTripped&) {
        }
    }
    EXPECT_GE(checked, 30);
}
