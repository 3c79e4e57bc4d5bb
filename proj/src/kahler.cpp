#include "hkahler/kahler.hpp"

#include "hkahler/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hkahler {

Mat2 values(const JetMat2& m) {
    Mat2 out{};
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) out[a][b] = m[a][b].value();
    }
    return out;
}

double max_abs(const Mat2& m) {
    double v = 0.0;
    for (const auto& row : m) {
        for (const auto& x : row) v = std::max(v, std::abs(x));
    }
    return v;
}

JetMat2 matmul(const JetMat2& x, const JetMat2& y) {
    JetMat2 out;
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) out[a][b] = x[a][0] * y[0][b] + x[a][1] * y[1][b];
    }
    return out;
}

ComplexJet determinant(const JetMat2& m) { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }

JetMat2 inverse(const JetMat2& m, const ComplexJet& det) {
    JetMat2 out;
    out[0][0] = m[1][1] / det;
    out[0][1] = -m[0][1] / det;
    out[1][0] = -m[1][0] / det;
    out[1][1] = m[0][0] / det;
    return out;
}

JetMat2 derivative(const JetMat2& m, int var) {
    JetMat2 out;
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) out[a][b] = derivative(m[a][b], var);
    }
    return out;
}

double CurvatureData::max_riemann() const {
    double v = 0.0;
    for (const auto& x : riemann) v = std::max(v, std::abs(x));
    return v;
}

LocalGeometry LocalGeometry::from_potential_jet(const ChartPoint& p, ComplexJet phi) {
    if (phi.order() < 3) throw std::invalid_argument("local geometry needs a potential jet of order >= 3");
    const cplx value = phi.value();
    if (std::abs(value.imag()) > kRealityTolerance * std::max(1.0, std::abs(value))) {
        std::ostringstream os;
        os << "potential is not real at the point (Im phi = " << value.imag() << ")";
        throw RealityError(os.str());
    }

    LocalGeometry geo;
    geo.point = p;
    geo.phi = std::move(phi);
    for (int a = 0; a < kDim; ++a) {
        const ComplexJet da = derivative(geo.phi, holo(a));
        for (int b = 0; b < kDim; ++b) geo.g[a][b] = derivative(da, antiholo(b));
    }
    geo.det = determinant(geo.g);
    const double scale = max_abs(values(geo.g));
    if (std::abs(geo.det.value()) < kDegeneracyFactor * scale * scale || scale == 0.0) {
        std::ostringstream os;
        os << "degenerate metric: |det g| = " << std::abs(geo.det.value()) << " at max |g| = " << scale;
        throw DegeneracyError(os.str());
    }
    const JetMat2 m = inverse(geo.g, geo.det);
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) geo.ginv[a][b] = m[b][a];
    }

    std::array<JetMat2, kDim> dg;  // dg[b] = d_b g
    for (int b = 0; b < kDim; ++b) dg[static_cast<std::size_t>(b)] = derivative(geo.g, holo(b));
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) {
            for (int c = 0; c < kDim; ++c) {
                geo.gamma[a][b][c] = geo.ginv[a][0] * dg[b][c][0] + geo.ginv[a][1] * dg[b][c][1];
            }
        }
    }
    return geo;
}

LocalGeometry LocalGeometry::build(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p,
                                   int order) {
    return from_potential_jet(p, evaluate(phi, params, p, order));
}

HermitianMetric LocalGeometry::metric() const {
    HermitianMetric out;
    out.g = values(g);
    out.ginv = values(ginv);
    out.det = det.value();
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) {
            out.hermiticity_residual =
                std::max(out.hermiticity_residual, std::abs(out.g[a][b] - std::conj(out.g[b][a])));
        }
    }
    return out;
}

ChristoffelSymbols LocalGeometry::christoffel() const {
    ChristoffelSymbols out;
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) {
            for (int c = 0; c < kDim; ++c) out.gamma[a][b][c] = gamma[a][b][c].value();
        }
    }
    for (int a = 0; a < kDim; ++a) {
        out.symmetry_residual =
            std::max(out.symmetry_residual, std::abs(out.gamma[a][0][1] - out.gamma[a][1][0]));
    }
    return out;
}

ChristoffelJets LocalGeometry::gamma_bar() const {
    ChristoffelJets out;
    for (int b = 0; b < kDim; ++b) {
        const JetMat2 dbg = derivative(g, antiholo(b));
        for (int a = 0; a < kDim; ++a) {
            for (int c = 0; c < kDim; ++c) {
                // Gamma^{abar}_{bbar cbar} = g^{m abar} d_bbar g_{m cbar}
                out[a][b][c] = ginv[0][a] * dbg[0][c] + ginv[1][a] * dbg[1][c];
            }
        }
    }
    return out;
}

CurvatureData LocalGeometry::curvature() const {
    if (order() < 4) throw std::invalid_argument("curvature needs a potential jet of order >= 4");
    CurvatureData out;
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) {
            for (int m = 0; m < kDim; ++m) {
                for (int n = 0; n < kDim; ++n) {
                    out.R(a, b, m, n) = -derivative(gamma[a][b][m], antiholo(n)).value();
                }
            }
        }
    }
    const ComplexJet logdet = log_up_to_constant(det);
    for (int a = 0; a < kDim; ++a) {
        const ComplexJet da = derivative(logdet, holo(a));
        for (int b = 0; b < kDim; ++b) out.ricci[a][b] = derivative(da, antiholo(b)).value();
    }
    for (int b = 0; b < kDim; ++b) {
        for (int n = 0; n < kDim; ++n) out.ricci_contraction[b][n] = -(out.R(0, b, 0, n) + out.R(1, b, 1, n));
    }
    const Mat2 gi = values(ginv);
    cplx trace{};
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) {
            out.ricci_mixed[a][b] = gi[a][0] * out.ricci[b][0] + gi[a][1] * out.ricci[b][1];
            trace += gi[a][b] * out.ricci[a][b];
            out.ricci_discrepancy =
                std::max(out.ricci_discrepancy, std::abs(out.ricci[a][b] - out.ricci_contraction[a][b]));
        }
    }
    out.scalar = 2.0 * trace.real();
    out.scalar_imag = 2.0 * trace.imag();
    for (int a = 0; a < kDim; ++a) {
        for (int n = 0; n < kDim; ++n) {
            out.riemann_symmetry_residual =
                std::max(out.riemann_symmetry_residual, std::abs(out.R(a, 0, 1, n) - out.R(a, 1, 0, n)));
        }
    }
    return out;
}

HermitianMetric metric_at(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p) {
    return LocalGeometry::build(phi, params, p, 3).metric();
}

FundamentalForm fundamental_form(const HermitianMetric& g) {
    FundamentalForm out;
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) out.omega[a][b] = cplx(0.0, -1.0) * g.g[a][b];
    }
    return out;
}

double closedness_residual(const LocalGeometry& geo) {
    double worst = 0.0;
    for (int c = 0; c < kDim; ++c) {
        // holomorphic: d_0 g_{1 cbar} vs d_1 g_{0 cbar}
        const cplx lhs = derivative(geo.g[1][c], holo(0)).value();
        const cplx rhs = derivative(geo.g[0][c], holo(1)).value();
        worst = std::max(worst, std::abs(lhs - rhs));
        // barred: d_0bar g_{c 1bar} vs d_1bar g_{c 0bar}
        const cplx lb = derivative(geo.g[c][1], antiholo(0)).value();
        const cplx rb = derivative(geo.g[c][0], antiholo(1)).value();
        worst = std::max(worst, std::abs(lb - rb));
    }
    return worst;
}

double closedness_residual(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p) {
    return closedness_residual(LocalGeometry::build(phi, params, p, 3));
}

ChristoffelSymbols christoffel_at(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p) {
    return LocalGeometry::build(phi, params, p, 3).christoffel();
}

CurvatureData curvature_at(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p) {
    return LocalGeometry::build(phi, params, p, 4).curvature();
}

EinsteinDefect einstein_defect(const CurvatureData& curv, const HermitianMetric&) {
    EinsteinDefect out;
    out.kappa = (curv.ricci_mixed[0][0] + curv.ricci_mixed[1][1]) / 2.0;
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) {
            const cplx expected = a == b ? out.kappa : cplx{};
            out.defect = std::max(out.defect, std::abs(curv.ricci_mixed[a][b] - expected));
        }
    }
    return out;
}

double hsc_at(const LocalGeometry& geo, const CurvatureData& curv, const Vec2& v) {
    const Mat2 g = values(geo.g);
    cplx norm{};
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) norm += g[a][b] * v[a] * std::conj(v[b]);
    }
    const double vv = std::norm(v[0]) + std::norm(v[1]);
    if (vv == 0.0 || std::abs(norm) < 1e-12 * vv * max_abs(g)) {
        throw std::invalid_argument("null direction: g(v, vbar) vanishes");
    }
    cplx r{};
    for (int b = 0; b < kDim; ++b) {
        for (int l = 0; l < kDim; ++l) {
            for (int m = 0; m < kDim; ++m) {
                for (int n = 0; n < kDim; ++n) {
                    const cplx lowered = g[0][l] * curv.R(0, b, m, n) + g[1][l] * curv.R(1, b, m, n);
                    r += lowered * v[b] * std::conj(v[l]) * v[m] * std::conj(v[n]);
                }
            }
        }
    }
    return (2.0 * r / (norm * norm)).real();
}

double hsc_at(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p, const Vec2& v) {
    const LocalGeometry geo = LocalGeometry::build(phi, params, p, 4);
    return hsc_at(geo, geo.curvature(), v);
}

PotentialExpr gauge_transform(const PotentialExpr& phi, const PotentialExpr& f) {
    if (references_variable(f, ZB1) || references_variable(f, ZB2)) {
        throw std::invalid_argument("gauge function must be holomorphic: it references a barred variable");
    }
    return phi + f + conj(f);
}

}  // namespace hkahler
