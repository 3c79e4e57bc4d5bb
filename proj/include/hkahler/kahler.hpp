#pragma once

// Pointwise Kahler tensor calculus in a complex chart of a complex surface.
//
// Index conventions (alpha, beta in {0, 1} stand for z^1, z^2):
//   g[a][b]     = g_{a bbar}      = d_a d_bbar Phi
//   ginv[a][b]  = g^{a bbar},       sum_b ginv[a][b] g[c][b] = delta_ac
//   gamma[a][b][c] = Gamma^a_{bc} = sum_m ginv[a][m] d_b g[c][m]
//   riemann(a,b,m,n) = R^a_{b m nbar} = -d_nbar Gamma^a_{bm}
//   ricci[a][b] = R_{a bbar} = d_a d_bbar ln det g

#include "hkahler/chart.hpp"
#include "hkahler/dsl.hpp"
#include "hkahler/jet.hpp"

#include <array>

namespace hkahler {

inline constexpr int kDim = 2;

using Mat2 = std::array<std::array<cplx, kDim>, kDim>;
using Vec2 = std::array<cplx, kDim>;
using JetMat2 = std::array<std::array<ComplexJet, kDim>, kDim>;
/// gamma[a] is the matrix (b, c) -> Gamma^a_{bc}.
using ChristoffelJets = std::array<JetMat2, kDim>;

/// |det g| below kDegeneracyFactor * (max |g entry|)^2 is treated as degenerate.
inline constexpr double kDegeneracyFactor = 1e-10;
/// |Im Phi| above kRealityTolerance * max(1, |Phi|) rejects the potential.
inline constexpr double kRealityTolerance = 1e-10;
/// Denominator floor for residuals expressed relative to a tensor scale.
inline constexpr double kAbsoluteFloor = 1e-14;

inline double relative_residual(double residual, double scale) {
    return residual / (scale > kAbsoluteFloor ? scale : kAbsoluteFloor);
}

Mat2 values(const JetMat2& m);
double max_abs(const Mat2& m);
/// Entry (a, b) of the result is sum_c x[a][c] y[c][b].
JetMat2 matmul(const JetMat2& x, const JetMat2& y);
/// Matrix inverse by adjugate / determinant.
JetMat2 inverse(const JetMat2& m, const ComplexJet& det);
ComplexJet determinant(const JetMat2& m);
JetMat2 derivative(const JetMat2& m, int var);

struct HermitianMetric {
    Mat2 g{};
    Mat2 ginv{};
    cplx det{};
    double hermiticity_residual = 0.0;
};

struct FundamentalForm {
    Mat2 omega{};  // Omega_{a bbar} = -i g_{a bbar}
};

struct ChristoffelSymbols {
    std::array<Mat2, kDim> gamma{};
    double symmetry_residual = 0.0;

    cplx operator()(int a, int b, int c) const { return gamma[a][b][c]; }
};

struct CurvatureData {
    std::array<cplx, 16> riemann{};
    Mat2 ricci{};              // log-det formula
    Mat2 ricci_contraction{};  // -R^a_{b a nbar}
    Mat2 ricci_mixed{};        // R^a_b = g^{a sbar} R_{b sbar}
    double scalar = 0.0;       // 2 g^{a bbar} R_{a bbar}
    double scalar_imag = 0.0;
    double ricci_discrepancy = 0.0;  // max |ricci - ricci_contraction|
    double riemann_symmetry_residual = 0.0;  // max |R^a_{bmn} - R^a_{mbn}|

    cplx& R(int a, int b, int m, int n) { return riemann[static_cast<std::size_t>(((a * 2 + b) * 2 + m) * 2 + n)]; }
    cplx R(int a, int b, int m, int n) const {
        return riemann[static_cast<std::size_t>(((a * 2 + b) * 2 + m) * 2 + n)];
    }
    double max_riemann() const;
};

/// Jets of the potential and its metric-level derivatives at one point.
/// Orders: phi N, g/ginv/det N-2, gamma N-3.
struct LocalGeometry {
    ChartPoint point;
    ComplexJet phi;
    JetMat2 g;
    JetMat2 ginv;
    ComplexJet det;
    ChristoffelJets gamma;

    int order() const { return phi.order(); }

    /// Checks reality and nondegeneracy. Requires order >= 3.
    static LocalGeometry from_potential_jet(const ChartPoint& p, ComplexJet phi);
    static LocalGeometry build(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p,
                               int order = kDefaultJetOrder);

    HermitianMetric metric() const;
    ChristoffelSymbols christoffel() const;
    /// Requires order >= 4.
    CurvatureData curvature() const;
    /// Christoffel symbols of the barred block: gamma_bar[a][b][c] = Gamma^{abar}_{bbar cbar}.
    ChristoffelJets gamma_bar() const;
};

HermitianMetric metric_at(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p);

FundamentalForm fundamental_form(const HermitianMetric& g);

/// max |d_a g_{b cbar} - d_b g_{a cbar}| (and the barred counterpart).
double closedness_residual(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p);
double closedness_residual(const LocalGeometry& geo);

ChristoffelSymbols christoffel_at(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p);

CurvatureData curvature_at(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p);

struct EinsteinDefect {
    cplx kappa{};
    double defect = 0.0;
};

EinsteinDefect einstein_defect(const CurvatureData& curv, const HermitianMetric& g);

/// Holomorphic sectional curvature 2 R(v, vbar, v, vbar) / g(v, vbar)^2 with
/// R_{b lbar m nbar} = g_{s lbar} R^s_{b m nbar}.
double hsc_at(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p, const Vec2& v);
double hsc_at(const LocalGeometry& geo, const CurvatureData& curv, const Vec2& v);

/// phi + f + conj(f). Throws std::invalid_argument if f references zb1 or zb2.
PotentialExpr gauge_transform(const PotentialExpr& phi, const PotentialExpr& f);

}  // namespace hkahler
