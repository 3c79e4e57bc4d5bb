#include "hkahler/errors.hpp"
#include "hkahler/families.hpp"
#include "hkahler/hproj.hpp"
#include "oracle.hpp"

#include <gtest/gtest.h>

using namespace hkahler;

namespace {

const char* kEquidistant = "exp(z1 + zb1 + z2*zb2)";

FamilyInstance make(FamilyKind kind, ParameterTable params = {}, std::optional<std::string> w = {},
                    std::optional<std::string> f = {}) {
    return instantiate(FamilySpec{kind, std::move(params), std::move(w), std::move(f)});
}

std::vector<FamilyInstance> all_families() {
    return {make(FamilyKind::equidistant),
            make(FamilyKind::generalized_equidistant, {}, "x^3 + exp(x)", "z2*zb2 + 0.3*(z2 + zb2)"),
            make(FamilyKind::ricci_flat, {{"A", 1.0}, {"gamma", 1.0}}),
            make(FamilyKind::ricci_flat, {{"A", 2.0}, {"gamma", 0.5}, {"B", 0.3}, {"tau", 0.2}}),
            make(FamilyKind::constant_hsc, {{"eps", 1.0}}),
            make(FamilyKind::constant_hsc, {{"eps", -1.0}})};
}

ComplexJet seed_at(const ChartPoint& p, int var, int order) { return ComplexJet::seed(p.formal(), var, order); }

}  // namespace

TEST(Sinyukov, EquidistantOriginValues) {
    for (double rho : {1.0, 2.0, 0.5, -3.0}) {
        const ATensor a = a_tensor_at(parse(kEquidistant), {}, rho, ChartPoint{});
        EXPECT_NEAR(std::abs(a.a[0][0] - (1.0 + rho)), 0.0, 1e-14);
        EXPECT_NEAR(std::abs(a.a[1][1] - rho), 0.0, 1e-14);
        EXPECT_NEAR(std::abs(a.a[0][1]) + std::abs(a.a[1][0]), 0.0, 1e-15);
        EXPECT_NEAR(a.lambda_val, 1.0 + 2.0 * rho, 1e-14);
        EXPECT_NEAR(std::abs(a.lambda_lower[0] - 1.0), 0.0, 1e-14);
        EXPECT_NEAR(std::abs(a.lambda_lower[1]), 0.0, 1e-15);
        EXPECT_LT(a.trace_residual, 1e-14);
        const cplx det = a.a[0][0] * a.a[1][1] - a.a[0][1] * a.a[1][0];
        EXPECT_NEAR(std::abs(det - (1.0 + rho) * rho), 0.0, 1e-14);
    }
}

TEST(Sinyukov, ATensorMatchesFiniteDifferences) {
    // a_{x ybar} = d_x Phi d_1 d_ybar Phi + rho d_x d_ybar Phi
    const PotentialExpr phi = parse("(z1 + zb1 + 2*z2*zb2 + 0.5*(z2 + zb2))^3 + exp(z1 + zb1 + 2*z2*zb2 + 0.5*(z2 + zb2))");
    const oracle::Fn f = [](const oracle::Formal& x) {
        const cplx u = x[0] + x[2] + 2.0 * x[1] * x[3] + 0.5 * (x[1] + x[3]);
        return u * u * u + std::exp(u);
    };
    const double rho = 0.7;
    const ChartPoint p{cplx(0.3, 0.2), cplx(-0.1, 0.4)};
    const oracle::Formal fp = oracle::formal(p.z1, p.z2);
    auto d = [&](int a, int b, int c, int e) { return oracle::fd_auto(f, fp, {a, b, c, e}); };
    const cplx d1 = d(1, 0, 0, 0), d2 = d(0, 1, 0, 0);
    const Mat2 g{{{d(1, 0, 1, 0), d(1, 0, 0, 1)}, {d(0, 1, 1, 0), d(0, 1, 0, 1)}}};
    const ATensor a = a_tensor_at(phi, {}, rho, p);
    const cplx dx[2] = {d1, d2};
    for (int x = 0; x < 2; ++x) {
        for (int y = 0; y < 2; ++y) {
            const cplx expected = dx[x] * g[0][y] + rho * g[x][y];
            EXPECT_NEAR(std::abs(a.a[x][y] - expected), 0.0, 1e-7 * std::abs(expected) + 1e-8);
        }
    }
    EXPECT_LT(a.hermiticity_residual, 1e-12);
}

TEST(Sinyukov, ResidualsVanishOnFamilies) {
    for (const FamilyInstance& inst : all_families()) {
        for (const ChartPoint& p : sample_admissible(inst, 8, 3)) {
            for (double rho : {1.0, 2.0}) {
                const LocalGeometry geo = LocalGeometry::build(inst.phi, inst.params, p, 4);
                EXPECT_NO_THROW(require_family_shape(geo));
                const JetMat2 a = sinyukov_tensor_jets(geo, rho);
                const HpaResult h = hpa_residual(geo, a);
                EXPECT_LT(relative_residual(h.total(), h.scale), 1e-12) << family_name(inst.kind);
                const LambdaGradientResult lg = lambda_gradient_check(geo, a);
                EXPECT_LT(lg.total(), 1e-11 * metric_derivative_scale(geo) + 1e-12) << family_name(inst.kind);
                const ATensor at = a_tensor_from(geo, a, rho);
                EXPECT_LT(at.hermiticity_residual, 1e-10 * max_abs(at.a));
                EXPECT_LT(at.lambda_imag, 1e-12 * std::max(1.0, std::abs(at.lambda_val)));
                PairJets pair;
                try {
                    pair = sinyukov_gprime(geo, a);
                } catch (const Error&) {
                    continue;  // det g / det a may be negative for small rho
                }
                const PairResidual r = pair_residual(pair, geo);
                EXPECT_LT(relative_residual(r.total(), r.scale), 1e-11) << family_name(inst.kind);
                const BTensorResult b = b_tensor_checks(geo, geo.curvature(), a);
                EXPECT_LT(std::abs(b.b[0][0]) + std::abs(b.b[0][1]) + std::abs(b.b[1][0]) + std::abs(b.b[1][1]),
                          1e-10 * max_abs(at.a));
                EXPECT_LT(b.zvez, 1e-10 * max_abs(at.a) * std::max(1.0, max_abs(geo.curvature().ricci_mixed)));
            }
        }
    }
}

TEST(Sinyukov, PerturbedTensorFailsHpa) {
    const ChartPoint p{cplx(0.4, 0.1), cplx(0.2, -0.3)};
    const LocalGeometry geo = LocalGeometry::build(parse(kEquidistant), {}, p, 4);
    JetMat2 a = sinyukov_tensor_jets(geo, 1.0);
    a[0][0] = a[0][0] * (1.0 + 0.1 * truncate(seed_at(p, Z1, 4), a[0][0].order()));
    const HpaResult h = hpa_residual(geo, a);
    EXPECT_GT(relative_residual(h.total(), h.scale), 1e-3);
}

TEST(Sinyukov, ConstantShiftByMetricStillSatisfiesHpa) {
    const ChartPoint p{cplx(0.4, 0.1), cplx(0.2, -0.3)};
    const LocalGeometry geo = LocalGeometry::build(parse(kEquidistant), {}, p, 4);
    const JetMat2 a1 = sinyukov_tensor_jets(geo, 1.0);
    const JetMat2 a3 = sinyukov_tensor_jets(geo, 3.0);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            EXPECT_NEAR(std::abs(values(a3)[x][y] - values(a1)[x][y] - 2.0 * values(geo.g)[x][y]), 0.0, 1e-13);
    const HpaResult h = hpa_residual(geo, a3);
    EXPECT_LT(relative_residual(h.total(), h.scale), 1e-12);
}

TEST(Sinyukov, PerturbedPartnerFailsPairResidual) {
    const ChartPoint p{cplx(0.4, 0.1), cplx(0.2, -0.3)};
    const LocalGeometry geo = LocalGeometry::build(parse(kEquidistant), {}, p, 4);
    const PairJets pair = sinyukov_gprime(geo, sinyukov_tensor_jets(geo, 1.0));
    {
        PairJets bad = pair;
        const int n = bad.gprime[0][0].order();
        bad.gprime[0][0] = bad.gprime[0][0] * (1.0 + 0.1 * truncate(seed_at(p, Z2, 4), n));
        const PairResidual r = pair_residual(bad, geo);
        EXPECT_GT(relative_residual(r.total(), r.scale), 1e-3);
    }
    {
        PairJets bad = pair;
        bad.psi = bad.psi + 0.2 * truncate(seed_at(p, Z1, 4), bad.psi.order());
        const PairResidual r = pair_residual(bad, geo);
        EXPECT_GT(relative_residual(r.total(), r.scale), 1e-3);
    }
}

TEST(Sinyukov, PsiGradientMatchesDifferences) {
    const PotentialExpr phi = parse(kEquidistant);
    const ChartPoint p{cplx(0.3, 0.1), cplx(0.2, -0.3)};
    auto psi_at = [&](const ChartPoint& q) {
        const LocalGeometry geo = LocalGeometry::build(phi, {}, q, 4);
        return sinyukov_gprime(geo, sinyukov_tensor_jets(geo, 1.0)).psi.value().real();
    };
    const LocalGeometry geo = LocalGeometry::build(phi, {}, p, 4);
    const PairJets pair = sinyukov_gprime(geo, sinyukov_tensor_jets(geo, 1.0));
    const Vec2 grad = pair.psi_grad();
    const double h = 1e-5;
    for (int v = 0; v < 2; ++v) {
        ChartPoint xp = p, xm = p, yp = p, ym = p;
        (v == 0 ? xp.z1 : xp.z2) += h;
        (v == 0 ? xm.z1 : xm.z2) -= h;
        (v == 0 ? yp.z1 : yp.z2) += cplx(0, h);
        (v == 0 ? ym.z1 : ym.z2) -= cplx(0, h);
        // d/dz = (d/dx - i d/dy) / 2
        const cplx fd = 0.5 * ((psi_at(xp) - psi_at(xm)) / (2 * h) - cplx(0, 1) * (psi_at(yp) - psi_at(ym)) / (2 * h));
        EXPECT_NEAR(std::abs(grad[v] - fd), 0.0, 1e-8);
    }
    // e^{2 psi} = det g / det a
    const ATensor a = a_tensor_from(geo, sinyukov_tensor_jets(geo, 1.0), 1.0);
    const cplx det_a = a.a[0][0] * a.a[1][1] - a.a[0][1] * a.a[1][0];
    EXPECT_NEAR(std::exp(2 * pair.psi.value().real()), (geo.metric().det / det_a).real(), 1e-12);
}

TEST(Sinyukov, PartnerIsHermitianPositive) {
    const FamilyInstance inst = make(FamilyKind::ricci_flat, {{"A", 1.0}, {"gamma", 1.0}});
    for (const ChartPoint& p : sample_admissible(inst, 10, 4)) {
        const LocalGeometry geo = LocalGeometry::build(inst.phi, inst.params, p, 4);
        const HProjectivePair pv = pair_values(geo, sinyukov_gprime(geo, sinyukov_tensor_jets(geo, 2.0)));
        EXPECT_LT(pv.gprime.hermiticity_residual, 1e-12 * max_abs(pv.gprime.g));
        EXPECT_GT(pv.gprime.g[0][0].real(), 0.0);
        EXPECT_GT(pv.gprime.det.real(), 0.0);
        EXPECT_FALSE(pv.affine);
    }
}

TEST(Sinyukov, DegenerateRho) {
    // det a = (1 + rho) rho at the origin
    for (double rho : {0.0, -1.0}) {
        const LocalGeometry geo = LocalGeometry::build(parse(kEquidistant), {}, ChartPoint{}, 4);
        EXPECT_THROW(sinyukov_gprime(geo, sinyukov_tensor_jets(geo, rho)), DegeneracyError);
    }
}

TEST(Sinyukov, NegativeRatioRejected) {
    // rho = -1 away from the origin: det g / det a < 0
    const LocalGeometry geo = LocalGeometry::build(parse(kEquidistant), {}, ChartPoint{cplx(0.3, 0.0), 0.2}, 4);
    try {
        sinyukov_gprime(geo, sinyukov_tensor_jets(geo, -1.0));
        FAIL();
    } catch (const DegeneracyError&) {
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("not positive real"), std::string::npos);
    }
}

TEST(Sinyukov, PairPointMismatch) {
    const PotentialExpr phi = parse(kEquidistant);
    const LocalGeometry g1 = LocalGeometry::build(phi, {}, ChartPoint{0.1, 0.2}, 4);
    const LocalGeometry g2 = LocalGeometry::build(phi, {}, ChartPoint{0.2, 0.2}, 4);
    const PairJets pair = sinyukov_gprime(g1, sinyukov_tensor_jets(g1, 1.0));
    EXPECT_THROW(pair_residual(pair, g2), std::invalid_argument);
}

TEST(Sinyukov, OutsideFamilyRejected) {
    const ChartPoint p{cplx(0.3, 0.1), cplx(0.2, 0.1)};
    EXPECT_THROW(a_tensor_at(parse("z1*zb1 + z2*zb2"), {}, 1.0, p), NotInFamilyError);
    EXPECT_THROW(a_tensor_at(parse("ln(1 + z1*zb1 + z2*zb2)"), {}, 1.0, p), NotInFamilyError);
    EXPECT_THROW(hpa_residual(parse("exp(z1*zb1 + z2*zb2)"), {}, 1.0, p), NotInFamilyError);
    const LocalGeometry flat = LocalGeometry::build(parse("z1*zb1 + z2*zb2"), {}, p, 4);
    EXPECT_EQ(killing_residual(flat), 0.0);
    EXPECT_GT(relative_residual(shape_residual(flat), potential_scale(flat)), 0.1);
    try {
        require_family_shape(flat);
        FAIL();
    } catch (const NotInFamilyError& e) {
        EXPECT_NE(std::string(e.what()).find("generalized-equidistant"), std::string::npos);
    }
}

TEST(Sinyukov, KillingResidualDetectsBrokenSymmetry) {
    const ChartPoint p{cplx(0.3, 0.1), cplx(0.2, 0.1)};
    EXPECT_LT(killing_residual(parse(kEquidistant), {}, p), 1e-14);
    EXPECT_GT(killing_residual(parse("exp(z1 + zb1 + z2*zb2) + (z1*zb1)^2"), {}, p), 1e-2);
}

// ---------------------------------------------------------------------------
// Geodesics and H-planar curves

TEST(Geodesic, FlatIsStraightLine) {
    const Vec2 z0{cplx(0.1, 0.2), cplx(-0.3, 0.0)}, v0{cplx(1.0, -0.5), cplx(0.25, 0.75)};
    const HPlanarCurve c = integrate_geodesic(parse("z1*zb1 + z2*zb2"), {}, z0, v0, 2.0, 50);
    ASSERT_FALSE(c.truncated);
    ASSERT_EQ(c.samples.size(), 51u);
    for (const CurveSample& s : c.samples) {
        for (int a = 0; a < 2; ++a) {
            EXPECT_NEAR(std::abs(s.z[a] - (z0[a] + s.t * v0[a])), 0.0, 1e-14);
            EXPECT_NEAR(std::abs(s.zdot[a] - v0[a]), 0.0, 1e-14);
        }
    }
}

TEST(Geodesic, EnergyConserved) {
    const PotentialExpr phi = parse(kEquidistant);
    const HPlanarCurve c = integrate_geodesic(phi, {}, {cplx(0.2, 0.0), cplx(0.1, 0.1)}, {cplx(0.5, 0.2), 0.3}, 1.0, 400);
    ASSERT_FALSE(c.truncated);
    EXPECT_LT(energy_drift(c, phi, {}), 1e-9);
}

TEST(Geodesic, FourthOrderConvergence) {
    const PotentialExpr phi = parse(kEquidistant);
    const Vec2 z0{cplx(0.2, 0.1), cplx(-0.1, 0.3)}, v0{cplx(1.0, 0.5), cplx(-0.5, 0.8)};
    const Vec2 ref = integrate_geodesic(phi, {}, z0, v0, 1.0, 2560).samples.back().z;
    auto err = [&](int n) {
        const Vec2 z = integrate_geodesic(phi, {}, z0, v0, 1.0, n).samples.back().z;
        return std::abs(z[0] - ref[0]) + std::abs(z[1] - ref[1]);
    };
    const double ratio = err(40) / err(80);
    EXPECT_GT(ratio, 13.0);
    EXPECT_LT(ratio, 19.0);
}

TEST(Geodesic, TruncatesAtDomainBoundary) {
    // g_{1 1bar} ~ x^(-1/2): the boundary x = 0 is reached in finite time
    const PotentialExpr phi = parse("(z1 + zb1 + z2*zb2)^(3/2)");
    const HPlanarCurve c = integrate_geodesic(phi, {}, {cplx(0.3, 0.0), 0.0}, {cplx(-1.0, 0.0), 0.0}, 5.0, 500);
    EXPECT_TRUE(c.truncated);
    EXPECT_FALSE(c.error.empty());
    EXPECT_LT(c.samples.size(), 501u);
    EXPECT_THROW(integrate_geodesic(phi, {}, {cplx(0.3, 0.0), 0.0}, {1.0, 0.0}, 1.0, 1), std::invalid_argument);
}

TEST(HPlanar, GeodesicsAreHPlanarForPartner) {
    for (const FamilyInstance& inst : all_families()) {
        const ChartPoint p = sample_admissible(inst, 1, 8).front();
        const HPlanarCurve c = integrate_geodesic(inst.phi, inst.params, {p.z1, p.z2}, {cplx(0.1, 0.05), cplx(0.05, -0.1)},
                                                  1.0, 100);
        ASSERT_FALSE(c.truncated) << family_name(inst.kind) << ": " << c.error;
        EXPECT_LT(hplanarity_residual(c, inst.phi, inst.params, 2.0), 1e-10) << family_name(inst.kind);
    }
}

TEST(HPlanar, UnrelatedConnectionIsNotHPlanar) {
    const PotentialExpr phi = parse(kEquidistant);
    const HPlanarCurve c = integrate_geodesic(phi, {}, {cplx(0.2, 0.0), cplx(0.1, 0.1)}, {cplx(0.5, 0.2), 0.3}, 1.0, 100);
    const double r = hplanarity_residual(c, levi_civita_connection(phi, {}),
                                         levi_civita_connection(parse("z1*zb1 + z2*zb2 + (z1*zb1)^2*z2*zb2"), {}));
    EXPECT_GT(r, 1e-3);
    // the base connection itself is trivially H-planar
    EXPECT_LT(hplanarity_residual(c, levi_civita_connection(phi, {}), levi_civita_connection(phi, {})), 1e-12);
}
