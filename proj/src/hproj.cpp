#include "hkahler/hproj.hpp"

#include "hkahler/errors.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hkahler {

namespace {

constexpr double kHermiticityTolerance = 1e-8;

double max_partial(const ComplexJet& j, int min_degree) {
    double v = 0.0;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const MultiIndex& m = j.index_at(i);
        if (m.degree() < min_degree) continue;
        v = std::max(v, std::abs(j.coeffs()[i]) * m.factorial());
    }
    return v;
}

double max_entry(const std::array<Mat2, kDim>& t) { return std::max(max_abs(t[0]), max_abs(t[1])); }

JetMat2 mixed_a(const LocalGeometry& geo, const JetMat2& a) {
    // a^x_y = g^{x sbar} a_{y sbar}
    JetMat2 out;
    for (int x = 0; x < kDim; ++x) {
        for (int y = 0; y < kDim; ++y) out[x][y] = geo.ginv[x][0] * a[y][0] + geo.ginv[x][1] * a[y][1];
    }
    return out;
}

ComplexJet trace_with_ginv(const LocalGeometry& geo, const JetMat2& a) {
    return geo.ginv[0][0] * a[0][0] + geo.ginv[0][1] * a[0][1] + geo.ginv[1][0] * a[1][0] +
           geo.ginv[1][1] * a[1][1];
}

Mat2 commutator(const Mat2& x, const Mat2& y) {
    Mat2 out{};
    for (int n = 0; n < kDim; ++n) {
        for (int c = 0; c < kDim; ++c) {
            for (int m = 0; m < kDim; ++m) out[n][c] += x[n][m] * y[m][c] - y[n][m] * x[m][c];
        }
    }
    return out;
}

std::array<Mat2, kDim> christoffel_of(const JetMat2& g, const JetMat2& ginv) {
    std::array<Mat2, kDim> out{};
    for (int b = 0; b < kDim; ++b) {
        const Mat2 dbg = values(derivative(g, holo(b)));
        const Mat2 gi = values(ginv);
        for (int a = 0; a < kDim; ++a) {
            for (int c = 0; c < kDim; ++c) out[a][b][c] = gi[a][0] * dbg[c][0] + gi[a][1] * dbg[c][1];
        }
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Family shape

double killing_residual(const LocalGeometry& geo) {
    double worst = 0.0;
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) {
            const cplx d = derivative(geo.g[a][b], Z1).value() - derivative(geo.g[a][b], ZB1).value();
            worst = std::max(worst, std::abs(d));
        }
    }
    return worst;
}

double killing_residual(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p) {
    const LocalGeometry geo = LocalGeometry::build(phi, params, p, 3);
    return relative_residual(killing_residual(geo), metric_derivative_scale(geo));
}

double shape_residual(const LocalGeometry& geo) {
    return max_partial(derivative(geo.phi, Z1) - derivative(geo.phi, ZB1), 0);
}

double potential_scale(const LocalGeometry& geo) { return max_partial(geo.phi, 1); }

double metric_derivative_scale(const LocalGeometry& geo) {
    double v = 0.0;
    for (int c = 0; c < kNumVars; ++c) v = std::max(v, max_abs(values(derivative(geo.g, c))));
    return v;
}

void require_family_shape(const LocalGeometry& geo) {
    const double shape = relative_residual(shape_residual(geo), potential_scale(geo));
    const double killing = relative_residual(killing_residual(geo), metric_derivative_scale(geo));
    if (shape > kFamilyShapeTolerance || killing > kFamilyShapeTolerance) {
        std::ostringstream os;
        os << "potential is not of generalized-equidistant shape (Killing residual = " << killing
           << ", shape residual = " << shape << ")";
        throw NotInFamilyError(os.str());
    }
}

// ---------------------------------------------------------------------------
// Sinyukov tensor

JetMat2 sinyukov_tensor_jets(const LocalGeometry& geo, double rho) {
    JetMat2 a;
    for (int x = 0; x < kDim; ++x) {
        const ComplexJet dx = derivative(geo.phi, holo(x));
        for (int y = 0; y < kDim; ++y) a[x][y] = dx * geo.g[0][y] + rho * geo.g[x][y];
    }
    return a;
}

ATensor a_tensor_from(const LocalGeometry& geo, const JetMat2& a, double rho) {
    ATensor out;
    out.a = values(a);
    out.a_mixed = values(mixed_a(geo, a));
    const cplx lambda = derivative(geo.phi, Z1).value() + 2.0 * rho;
    out.lambda_val = lambda.real();
    out.lambda_imag = std::abs(lambda.imag());
    const Mat2 g = values(geo.g);
    out.lambda_lower = {g[0][0], g[1][0]};
    for (int x = 0; x < kDim; ++x) {
        for (int y = 0; y < kDim; ++y) {
            out.hermiticity_residual = std::max(out.hermiticity_residual, std::abs(out.a[x][y] - std::conj(out.a[y][x])));
        }
    }
    out.trace_residual = std::abs(trace_with_ginv(geo, a).value() - lambda);
    return out;
}

ATensor a_tensor_at(const PotentialExpr& phi, const ParameterTable& params, double rho, const ChartPoint& p) {
    const LocalGeometry geo = LocalGeometry::build(phi, params, p, 3);
    require_family_shape(geo);
    ATensor out = a_tensor_from(geo, sinyukov_tensor_jets(geo, rho), rho);
    if (relative_residual(out.hermiticity_residual, max_abs(out.a)) > kHermiticityTolerance) {
        std::ostringstream os;
        os << "Sinyukov tensor is not Hermitian (residual " << out.hermiticity_residual
           << "); the potential is outside the family";
        throw NotInFamilyError(os.str());
    }
    return out;
}

double LambdaGradientResult::total() const {
    return std::max({gradient_residual, holomorphy_residual, normal_form_residual});
}

LambdaGradientResult lambda_gradient_check(const LocalGeometry& geo, const JetMat2& a) {
    LambdaGradientResult out;
    const ComplexJet trace = trace_with_ginv(geo, a);
    for (int c = 0; c < kDim; ++c) {
        const cplx lambda_c = geo.g[c][0].value();
        out.gradient_residual = std::max(out.gradient_residual, std::abs(lambda_c - derivative(trace, holo(c)).value()));
    }
    // lambda^x = g^{x bbar} lambda_bbar with lambda_bbar = g_{1 bbar}
    for (int x = 0; x < kDim; ++x) {
        const ComplexJet up = geo.ginv[x][0] * geo.g[0][0] + geo.ginv[x][1] * geo.g[0][1];
        out.normal_form_residual = std::max(out.normal_form_residual, std::abs(up.value() - (x == 0 ? 1.0 : 0.0)));
        for (int n = 0; n < kDim; ++n) {
            out.holomorphy_residual = std::max(out.holomorphy_residual, std::abs(derivative(up, antiholo(n)).value()));
        }
    }
    return out;
}

double lambda_gradient_check(const PotentialExpr& phi, const ParameterTable& params, double rho,
                             const ChartPoint& p) {
    const LocalGeometry geo = LocalGeometry::build(phi, params, p, 3);
    require_family_shape(geo);
    return relative_residual(lambda_gradient_check(geo, sinyukov_tensor_jets(geo, rho)).total(),
                             max_abs(values(geo.g)));
}

HpaResult hpa_residual(const LocalGeometry& geo, const JetMat2& a) {
    HpaResult out;
    const Mat2 g = values(geo.g);
    const std::array<Mat2, kDim> gam = geo.christoffel().gamma;
    const ChristoffelJets gbar_j = geo.gamma_bar();
    std::array<Mat2, kDim> gbar{};
    for (int x = 0; x < kDim; ++x) gbar[x] = values(gbar_j[x]);
    const Mat2 av = values(a);
    std::array<Mat2, kDim> da{}, dba{};
    for (int c = 0; c < kDim; ++c) {
        da[c] = values(derivative(a, holo(c)));
        dba[c] = values(derivative(a, antiholo(c)));
    }
    out.scale = std::max({max_entry(da), max_entry(dba), max_abs(g) * max_abs(g),
                          max_entry(gam) * max_abs(av), max_entry(gbar) * max_abs(av)});
    for (int x = 0; x < kDim; ++x) {
        for (int y = 0; y < kDim; ++y) {
            for (int c = 0; c < kDim; ++c) {
                // a_{x ybar, c} = d_c a_{x ybar} - Gamma^m_{c x} a_{m ybar};  expected lambda_x g_{c ybar}
                cplx cov = da[c][x][y];
                for (int m = 0; m < kDim; ++m) cov -= gam[m][c][x] * av[m][y];
                out.holomorphic = std::max(out.holomorphic, std::abs(cov - g[x][0] * g[c][y]));
                // a_{x ybar, cbar} = d_cbar a_{x ybar} - Gamma^{mbar}_{cbar ybar} a_{x mbar};
                // expected lambda_ybar g_{x cbar} with lambda_ybar = g_{1 ybar}
                cplx covb = dba[c][x][y];
                for (int m = 0; m < kDim; ++m) covb -= gbar[m][c][y] * av[x][m];
                out.antiholomorphic = std::max(out.antiholomorphic, std::abs(covb - g[0][y] * g[x][c]));
            }
        }
    }
    return out;
}

double hpa_residual(const PotentialExpr& phi, const ParameterTable& params, double rho, const ChartPoint& p) {
    const LocalGeometry geo = LocalGeometry::build(phi, params, p, 3);
    require_family_shape(geo);
    const HpaResult r = hpa_residual(geo, sinyukov_tensor_jets(geo, rho));
    return relative_residual(r.total(), r.scale);
}

// ---------------------------------------------------------------------------
// Partner metric

Vec2 PairJets::psi_grad() const {
    return {derivative(psi, Z1).value(), derivative(psi, Z2).value()};
}

PairJets sinyukov_gprime(const LocalGeometry& geo, const JetMat2& a) {
    const ComplexJet det_a = determinant(a);
    const double scale = max_abs(values(a));
    if (std::abs(det_a.value()) < kDegeneracyFactor * scale * scale || scale == 0.0) {
        std::ostringstream os;
        os << "degenerate Sinyukov tensor: |det a| = " << std::abs(det_a.value()) << " at max |a| = " << scale;
        throw DegeneracyError(os.str());
    }
    const ComplexJet ratio = geo.det / det_a;  // e^{2 psi}
    const cplx r0 = ratio.value();
    if (r0.real() <= 0.0 || std::abs(r0.imag()) > 1e-10 * std::abs(r0)) {
        std::ostringstream os;
        os << "e^{2 psi} = det g / det a = " << r0 << " is not positive real";
        throw Error(os.str());
    }
    PairJets out;
    out.point = geo.point;
    out.e2psi_imag = std::abs(r0.imag());
    out.psi = 0.5 * log(ratio);
    const JetMat2 a_inv = inverse(a, det_a);
    JetMat2 gp = matmul(matmul(geo.g, a_inv), geo.g);
    for (auto& row : gp) {
        for (auto& x : row) x = ratio * x;
    }
    out.gprime = gp;
    const JetMat2 m = inverse(gp, determinant(gp));
    for (int x = 0; x < kDim; ++x) {
        for (int y = 0; y < kDim; ++y) out.gprime_inv[x][y] = m[y][x];
    }
    return out;
}

HProjectivePair pair_values(const LocalGeometry& geo, const PairJets& pair) {
    HProjectivePair out;
    out.g = geo.metric();
    out.gprime.g = values(pair.gprime);
    out.gprime.ginv = values(pair.gprime_inv);
    out.gprime.det = determinant(pair.gprime).value();
    for (int x = 0; x < kDim; ++x) {
        for (int y = 0; y < kDim; ++y) {
            out.gprime.hermiticity_residual = std::max(out.gprime.hermiticity_residual,
                                                       std::abs(out.gprime.g[x][y] - std::conj(out.gprime.g[y][x])));
        }
    }
    out.psi_val = pair.psi.value().real();
    out.psi_grad = pair.psi_grad();
    out.affine = std::abs(out.psi_grad[0]) + std::abs(out.psi_grad[1]) < 1e-12;
    return out;
}

PairResidual pair_residual(const PairJets& pair, const LocalGeometry& geo) {
    if (!(pair.point == geo.point)) throw std::invalid_argument("pair and geometry were built at different points");
    PairResidual out;
    const Mat2 gp = values(pair.gprime);
    const Mat2 gpi = values(pair.gprime_inv);
    const std::array<Mat2, kDim> gam = geo.christoffel().gamma;
    const ChristoffelJets gbar_j = geo.gamma_bar();
    std::array<Mat2, kDim> gbar{};
    for (int x = 0; x < kDim; ++x) gbar[x] = values(gbar_j[x]);
    std::array<Mat2, kDim> dgp{}, dbgp{};
    Vec2 psi{}, psib{};
    for (int c = 0; c < kDim; ++c) {
        dgp[c] = values(derivative(pair.gprime, holo(c)));
        dbgp[c] = values(derivative(pair.gprime, antiholo(c)));
        psi[c] = derivative(pair.psi, holo(c)).value();
        psib[c] = derivative(pair.psi, antiholo(c)).value();
    }
    const std::array<Mat2, kDim> gam_p = christoffel_of(pair.gprime, pair.gprime_inv);
    const double psi_scale = std::max({std::abs(psi[0]), std::abs(psi[1]), std::abs(psib[0]), std::abs(psib[1])});
    out.scale = std::max({max_entry(dgp), max_entry(dbgp), max_abs(gp) * psi_scale, max_entry(gam) * max_abs(gp),
                          max_entry(gam), max_entry(gam_p), psi_scale});

    for (int x = 0; x < kDim; ++x) {
        for (int y = 0; y < kDim; ++y) {
            for (int c = 0; c < kDim; ++c) {
                cplx cov = dgp[c][x][y];
                for (int m = 0; m < kDim; ++m) cov -= gam[m][c][x] * gp[m][y];
                const cplx rhs = 2.0 * gp[x][y] * psi[c] + 2.0 * gp[c][y] * psi[x];
                out.hp2 = std::max(out.hp2, std::abs(cov - rhs));

                cplx covb = dbgp[c][x][y];
                for (int m = 0; m < kDim; ++m) covb -= gbar[m][c][y] * gp[x][m];
                const cplx rhsb = 2.0 * gp[x][y] * psib[c] + 2.0 * gp[x][c] * psib[y];
                out.hp2 = std::max(out.hp2, std::abs(covb - rhsb));
            }
        }
    }
    for (int x = 0; x < kDim; ++x) {
        for (int b = 0; b < kDim; ++b) {
            for (int c = 0; c < kDim; ++c) {
                const cplx expected = 2.0 * ((x == b ? psi[c] : 0.0) + (x == c ? psi[b] : 0.0));
                out.connection = std::max(out.connection, std::abs(gam_p[x][b][c] - gam[x][b][c] - expected));
                // Gamma'^x_{b cbar} = 1/2 g'^{x sbar} (d_cbar g'_{b sbar} - d_sbar g'_{b cbar})
                cplx mixed{};
                for (int s = 0; s < kDim; ++s) mixed += 0.5 * gpi[x][s] * (dbgp[c][b][s] - dbgp[s][b][c]);
                out.mixed_connection = std::max(out.mixed_connection, std::abs(mixed));
            }
        }
    }
    return out;
}

double pair_residual(const PotentialExpr& phi, const ParameterTable& params, double rho, const ChartPoint& p) {
    const LocalGeometry geo = LocalGeometry::build(phi, params, p, 3);
    require_family_shape(geo);
    const PairJets pair = sinyukov_gprime(geo, sinyukov_tensor_jets(geo, rho));
    const PairResidual r = pair_residual(pair, geo);
    return relative_residual(r.total(), r.scale);
}

// ---------------------------------------------------------------------------
// b-tensor and curvature commutation

BTensorResult b_tensor_checks(const LocalGeometry& geo, const CurvatureData& curv, const JetMat2& a) {
    BTensorResult out;
    const JetMat2 am = mixed_a(geo, a);
    for (int x = 0; x < kDim; ++x) {
        for (int y = 0; y < kDim; ++y) {
            out.b[x][y] = cplx(0.0, 1.0) * (derivative(am[x][y], Z1).value() - derivative(am[x][y], ZB1).value());
        }
    }
    out.b_trace = std::abs(out.b[0][0] + out.b[1][1]);
    out.zvez = max_abs(commutator(values(am), curv.ricci_mixed));
    out.zvez_b = max_abs(commutator(out.b, curv.ricci_mixed));
    return out;
}

BTensorResult b_tensor_checks(const PotentialExpr& phi, const ParameterTable& params, double rho,
                              const ChartPoint& p) {
    const LocalGeometry geo = LocalGeometry::build(phi, params, p, 4);
    require_family_shape(geo);
    return b_tensor_checks(geo, geo.curvature(), sinyukov_tensor_jets(geo, rho));
}

// ---------------------------------------------------------------------------
// Curves

ConnectionField levi_civita_connection(PotentialExpr phi, ParameterTable params) {
    return [phi = std::move(phi), params = std::move(params)](const ChartPoint& p) {
        return LocalGeometry::build(phi, params, p, 3).christoffel().gamma;
    };
}

ConnectionField sinyukov_connection(PotentialExpr phi, ParameterTable params, double rho) {
    return [phi = std::move(phi), params = std::move(params), rho](const ChartPoint& p) {
        const LocalGeometry geo = LocalGeometry::build(phi, params, p, 3);
        const PairJets pair = sinyukov_gprime(geo, sinyukov_tensor_jets(geo, rho));
        return christoffel_of(pair.gprime, pair.gprime_inv);
    };
}

ConnectionField flat_connection() {
    return [](const ChartPoint&) { return std::array<Mat2, kDim>{}; };
}

namespace {

struct State {
    Vec2 z;
    Vec2 v;
};

Vec2 quadratic(const std::array<Mat2, kDim>& gam, const Vec2& v) {
    Vec2 out{};
    for (int a = 0; a < kDim; ++a) {
        for (int b = 0; b < kDim; ++b) {
            for (int c = 0; c < kDim; ++c) out[a] += gam[a][b][c] * v[b] * v[c];
        }
    }
    return out;
}

State rhs(const ConnectionField& conn, const State& s) {
    const Vec2 acc = quadratic(conn(ChartPoint{s.z[0], s.z[1]}), s.v);
    return State{s.v, {-acc[0], -acc[1]}};
}

State axpy(const State& s, double h, const State& k) {
    return State{{s.z[0] + h * k.z[0], s.z[1] + h * k.z[1]}, {s.v[0] + h * k.v[0], s.v[1] + h * k.v[1]}};
}

bool finite(const State& s) {
    for (const auto& x : {s.z[0], s.z[1], s.v[0], s.v[1]}) {
        if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
    }
    return true;
}

}  // namespace

HPlanarCurve integrate_geodesic(const PotentialExpr& phi, const ParameterTable& params, const Vec2& z0,
                                const Vec2& v0, double t_end, int steps) {
    if (steps < 2) throw std::invalid_argument("geodesic integration needs at least 2 steps");
    const ConnectionField conn = levi_civita_connection(phi, params);
    HPlanarCurve curve;
    curve.step = t_end / steps;
    const double h = curve.step;
    State s{z0, v0};
    curve.samples.push_back({0.0, s.z, s.v});
    try {
        conn(ChartPoint{s.z[0], s.z[1]});
        for (int i = 0; i < steps; ++i) {
            const State k1 = rhs(conn, s);
            const State k2 = rhs(conn, axpy(s, h / 2, k1));
            const State k3 = rhs(conn, axpy(s, h / 2, k2));
            const State k4 = rhs(conn, axpy(s, h, k3));
            for (int a = 0; a < kDim; ++a) {
                s.z[a] += h / 6 * (k1.z[a] + 2.0 * k2.z[a] + 2.0 * k3.z[a] + k4.z[a]);
                s.v[a] += h / 6 * (k1.v[a] + 2.0 * k2.v[a] + 2.0 * k3.v[a] + k4.v[a]);
            }
            if (!finite(s)) throw Error("non-finite state");
            curve.samples.push_back({(i + 1) * h, s.z, s.v});
        }
    } catch (const Error& e) {
        curve.truncated = true;
        curve.error = e.what();
    }
    return curve;
}

double energy_drift(const HPlanarCurve& curve, const PotentialExpr& phi, const ParameterTable& params) {
    auto energy = [&](const CurveSample& s) {
        const Mat2 g = metric_at(phi, params, ChartPoint{s.z[0], s.z[1]}).g;
        cplx e{};
        for (int a = 0; a < kDim; ++a) {
            for (int b = 0; b < kDim; ++b) e += g[a][b] * s.zdot[a] * std::conj(s.zdot[b]);
        }
        return e.real();
    };
    if (curve.samples.empty()) throw std::invalid_argument("empty curve");
    const double e0 = energy(curve.samples.front());
    double worst = 0.0;
    for (const auto& s : curve.samples) worst = std::max(worst, std::abs(energy(s) - e0));
    return relative_residual(worst, std::abs(e0));
}

double hplanarity_residual(const HPlanarCurve& curve, const ConnectionField& base, const ConnectionField& primed) {
    double worst = 0.0;
    for (const auto& s : curve.samples) {
        const ChartPoint p{s.z[0], s.z[1]};
        const double speed = std::hypot(std::abs(s.zdot[0]), std::abs(s.zdot[1]));
        if (speed == 0.0) throw std::invalid_argument("zero-velocity curve sample");
        const Vec2 acc = quadratic(base(p), s.zdot);
        const Vec2 acc_p = quadratic(primed(p), s.zdot);
        const Vec2 xi{acc_p[0] - acc[0], acc_p[1] - acc[1]};
        const double cross = std::abs(xi[0] * s.zdot[1] - xi[1] * s.zdot[0]);
        const double norm = std::hypot(std::abs(xi[0]), std::abs(xi[1]));
        worst = std::max(worst, cross / (norm * speed + kParallelismFloor));
    }
    return worst;
}

double hplanarity_residual(const HPlanarCurve& curve, const PotentialExpr& phi, const ParameterTable& params,
                           double rho) {
    return hplanarity_residual(curve, levi_civita_connection(phi, params), sinyukov_connection(phi, params, rho));
}

}  // namespace hkahler
