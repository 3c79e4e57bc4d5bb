#include "hkahler/families.hpp"

#include "hkahler/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hkahler {

namespace {

constexpr double kInvariantFloor = 1e-12;

double param_or(const ParameterTable& params, const std::string& name, double fallback) {
    return params.contains(name) ? params.get(name) : fallback;
}

bool any_variable(const PotentialExpr& e) {
    for (int v = 0; v < kNumVars; ++v) {
        if (references_variable(e, v)) return true;
    }
    return false;
}

PotentialExpr parse_sub(const std::string& src, const char* what) {
    try {
        return parse(src);
    } catch (const ParseError& e) {
        throw FamilyError(std::string("cannot parse ") + what + ": " + e.what());
    }
}

void check_w(const PotentialExpr& W, const ParameterTable& params) {
    if (any_variable(W)) throw FamilyError("W must be an expression in the placeholder x only");
    ParameterTable bound = params;
    bound.set(kPlaceholder, 0.0);
    try {
        check_bound(W, bound);
    } catch (const BindError& e) {
        throw FamilyError(std::string("W: ") + e.what());
    }
    const PotentialExpr Wz = substitute(W, kPlaceholder, PotentialExpr::z1());
    bool evaluated = false;
    double d1 = 0.0, d2 = 0.0;
    for (double x : {-1.7, -0.6, 0.3, 0.8, 1.5, 2.6}) {
        try {
            const ComplexJet j = evaluate_formal(Wz, params, {cplx(x), 0.0, 0.0, 0.0}, 2);
            const double scale = std::max({1.0, std::abs(j.value()), std::abs(j.partial({{1, 0, 0, 0}}))});
            d1 = std::max(d1, std::abs(j.partial({{1, 0, 0, 0}})) / scale);
            d2 = std::max(d2, std::abs(j.partial({{2, 0, 0, 0}})) / scale);
            evaluated = true;
        } catch (const DomainError&) {
        }
    }
    if (!evaluated) throw FamilyError("W cannot be evaluated at any sample value of x");
    if (d1 <= kInvariantFloor) throw FamilyError("W must be non-constant");
    if (d2 <= kInvariantFloor) {
        throw FamilyError("W is affine in x: g_{1 1bar} = W'' vanishes and the metric is degenerate");
    }
}

void check_f(const PotentialExpr& F, const ParameterTable& params) {
    if (references_variable(F, Z1) || references_variable(F, ZB1)) {
        throw FamilyError("F must depend on z2 and zb2 only");
    }
    try {
        check_bound(F, params);
    } catch (const BindError& e) {
        throw FamilyError(std::string("F: ") + e.what());
    }
    bool evaluated = false;
    double imag = 0.0, d2 = 0.0;
    for (cplx z2 : {cplx(0.3, 0.1), cplx(-0.4, 0.5), cplx(0.6, -0.2), cplx(-0.1, -0.7), cplx(0.05, 0.02),
                    cplx(0.8, 0.3)}) {
        try {
            const ComplexJet j = evaluate(F, params, ChartPoint{0.0, z2}, 1);
            const double scale = std::max(1.0, std::abs(j.value()));
            imag = std::max(imag, std::abs(j.value().imag()) / scale);
            d2 = std::max(d2, std::abs(derivative(j, Z2).value()) / scale);
            evaluated = true;
        } catch (const DomainError&) {
        }
    }
    if (!evaluated) throw FamilyError("F cannot be evaluated at any sample point");
    if (imag > kRealityTolerance) throw FamilyError("F must be real-valued");
    if (d2 <= kInvariantFloor) throw FamilyError("F must depend on z2 (d_2 F vanishes)");
}

void require_nonzero(const ParameterTable& params, const std::string& name) {
    if (params.get(name) == 0.0) throw FamilyError(name + " must be nonzero");
}

PotentialExpr assemble(const PotentialExpr& W, const PotentialExpr& F) {
    return substitute(W, kPlaceholder, parse("z1 + zb1") + F);
}

double log_hessian_defect(const ComplexJet& h) {
    if (std::abs(h.value()) == 0.0) throw DomainError("h vanishes at a sample point");
    const ComplexJet L = log_up_to_constant(h);
    double worst = 0.0;
    for (int a = 0; a < kDim; ++a) {
        const ComplexJet da = derivative(L, holo(a));
        for (int b = 0; b < kDim; ++b) worst = std::max(worst, std::abs(derivative(da, antiholo(b)).value()));
    }
    return worst;
}

}  // namespace

std::optional<FamilyKind> parse_family_kind(std::string_view name) {
    std::string s(name);
    std::replace(s.begin(), s.end(), '-', '_');
    if (s == "flat") return FamilyKind::flat;
    if (s == "equidistant") return FamilyKind::equidistant;
    if (s == "generalized_equidistant") return FamilyKind::generalized_equidistant;
    if (s == "ricci_flat") return FamilyKind::ricci_flat;
    if (s == "constant_hsc") return FamilyKind::constant_hsc;
    return std::nullopt;
}

std::string family_name(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::flat: return "flat";
        case FamilyKind::equidistant: return "equidistant";
        case FamilyKind::generalized_equidistant: return "generalized_equidistant";
        case FamilyKind::ricci_flat: return "ricci_flat";
        case FamilyKind::constant_hsc: return "constant_hsc";
    }
    return "unknown";
}

FamilyInstance instantiate(const FamilySpec& spec) {
    if (spec.params.contains(kPlaceholder)) throw FamilyError("parameter name 'x' is reserved for the argument of W");
    FamilyInstance out;
    out.kind = spec.kind;
    out.params = spec.params;
    switch (spec.kind) {
        case FamilyKind::flat:
            if (spec.w_expr || spec.f_expr) throw FamilyError("the flat family takes no W or F");
            out.phi = parse("z1*zb1 + z2*zb2");
            return out;

        case FamilyKind::equidistant:
        case FamilyKind::generalized_equidistant: {
            PotentialExpr W = parse("exp(x)");
            if (spec.kind == FamilyKind::generalized_equidistant) {
                if (!spec.w_expr) throw FamilyError("generalized_equidistant needs W");
                W = parse_sub(*spec.w_expr, "W");
            } else if (spec.w_expr) {
                throw FamilyError("the equidistant family fixes W = exp(x)");
            }
            const PotentialExpr F = spec.f_expr ? parse_sub(*spec.f_expr, "F") : parse("z2*zb2");
            check_w(W, out.params);
            check_f(F, out.params);
            out.W = W;
            out.F = F;
            out.phi = assemble(W, F);
            return out;
        }

        case FamilyKind::ricci_flat: {
            if (spec.w_expr || spec.f_expr) throw FamilyError("the ricci_flat family takes parameters, not W or F");
            if (!out.params.contains("A")) out.params.set("A", 1.0);
            if (!out.params.contains("gamma")) out.params.set("gamma", 1.0);
            require_nonzero(out.params, "A");
            require_nonzero(out.params, "gamma");
            const bool general = out.params.contains("B") || out.params.contains("C") ||
                                 out.params.contains("tau") || out.params.contains("rho_shift");
            if (general) {
                for (const char* name : {"B", "C", "tau", "rho_shift"}) {
                    if (!out.params.contains(name)) out.params.set(name, 0.0);
                }
                out.W = parse("A*(x + B)^(3/2) + C");
                out.F = parse("gamma*z2*zb2 + tau*(z2 + zb2) + rho_shift");
                out.phi = assemble(*out.W, *out.F);
            } else {
                out.W = parse("A*(x)^(3/2)");
                out.F = parse("gamma*z2*zb2");
                out.phi = parse("A*(z1+zb1+gamma*z2*zb2)^(3/2)");
            }
            return out;
        }

        case FamilyKind::constant_hsc: {
            if (spec.w_expr || spec.f_expr) throw FamilyError("the constant_hsc family takes only eps");
            if (!out.params.contains("eps")) out.params.set("eps", 1.0);
            const double eps = out.params.get("eps");
            if (eps != 1.0 && eps != -1.0) throw FamilyError("eps must be +1 or -1");
            out.W = parse("ln(1 + exp(x))");
            out.F = parse("ln(1 + eps*z2*zb2)");
            out.phi = assemble(*out.W, *out.F);
            return out;
        }
    }
    throw FamilyError("unknown family kind");
}

FamilySpec spec_from_file(const std::string& kind, const ParameterTable& params,
                          const std::map<std::string, std::string>& exprs) {
    const auto k = parse_family_kind(kind);
    if (!k) throw FamilyError("unknown family kind '" + kind + "'");
    FamilySpec spec;
    spec.kind = *k;
    spec.params = params;
    for (const auto& [name, src] : exprs) {
        if (name == "W") {
            spec.w_expr = src;
        } else if (name == "F") {
            spec.f_expr = src;
        } else {
            throw FamilyError("unknown family expression '" + name + "'");
        }
    }
    return spec;
}

double family_argument(const FamilyInstance& inst, const ChartPoint& p) {
    if (!inst.F) throw std::invalid_argument("family " + family_name(inst.kind) + " has no argument x");
    return 2.0 * p.z1.real() + evaluate(*inst.F, inst.params, p, 0).value().real();
}

bool in_family_domain(const FamilyInstance& inst, const ChartPoint& p) {
    if (!p.finite()) return false;
    try {
        switch (inst.kind) {
            case FamilyKind::ricci_flat:
                if (family_argument(inst, p) + param_or(inst.params, "B", 0.0) <= 0.0) return false;
                break;
            case FamilyKind::constant_hsc: {
                const double eps = inst.params.get("eps");
                if (1.0 + eps * std::norm(p.z2) <= 0.0) return false;
                if (eps < 0.0 && (std::abs(p.z2) > 0.9 || std::abs(p.z1) > 1.0)) return false;
                break;
            }
            default:
                break;
        }
        const cplx v = evaluate(inst.phi, inst.params, p, 0).value();
        return std::isfinite(v.real()) && std::isfinite(v.imag());
    } catch (const DomainError&) {
        return false;
    }
}

std::vector<ChartPoint> sample_admissible(const FamilyInstance& inst, std::size_t n, std::uint64_t seed,
                                          const SampleBox& box) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto lerp = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    std::vector<ChartPoint> out;
    const std::size_t max_attempts = 1000 * (n + 1);
    for (std::size_t attempt = 0; attempt < max_attempts && out.size() < n; ++attempt) {
        const double r1 = lerp(box.re1_min, box.re1_max);
        const double i1 = lerp(box.im1_min, box.im1_max);
        const double r2 = lerp(box.re2_min, box.re2_max);
        const double i2 = lerp(box.im2_min, box.im2_max);
        const ChartPoint p{cplx(r1, i1), cplx(r2, i2)};
        if (in_family_domain(inst, p)) out.push_back(p);
    }
    if (out.size() < n) {
        std::ostringstream os;
        os << "only " << out.size() << " of " << n << " admissible points found for family " << family_name(inst.kind);
        throw FamilyError(os.str());
    }
    return out;
}

std::vector<Vec2> sample_directions(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<Vec2> out;
    out.reserve(n);
    while (out.size() < n) {
        Vec2 v{cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng))};
        const double norm = std::sqrt(std::norm(v[0]) + std::norm(v[1]));
        if (norm < 1e-6) continue;
        v[0] /= norm;
        v[1] /= norm;
        out.push_back(v);
    }
    return out;
}

double separability_defect(const PotentialExpr& h, const ParameterTable& params,
                           std::span<const ChartPoint> sample) {
    if (sample.empty()) throw std::invalid_argument("empty sample");
    double worst = 0.0;
    for (const auto& p : sample) worst = std::max(worst, log_hessian_defect(evaluate(h, params, p, 2)));
    return worst;
}

ComplexJet einstein_quantity(const PotentialExpr& phi, const ParameterTable& params, double a_const,
                             const ChartPoint& p, const std::optional<PotentialExpr>& F) {
    const LocalGeometry geo = LocalGeometry::from_potential_jet(p, evaluate(phi, params, p, 5));
    const ComplexJet d1 = derivative(geo.phi, Z1);
    const ComplexJet t = derivative(d1 * d1, Z1);
    ComplexJet f22;
    if (F) {
        f22 = derivative(derivative(evaluate(*F, params, p, 4), Z2), ZB2);
    } else {
        f22 = geo.det / (d1 * geo.g[0][0]);
    }
    return truncate(exp(a_const * geo.phi) * t * f22, 2);
}

double einstein_separability_defect(const PotentialExpr& phi, const ParameterTable& params, double a_const,
                                    std::span<const ChartPoint> sample, const std::optional<PotentialExpr>& F) {
    if (sample.empty()) throw std::invalid_argument("empty sample");
    double worst = 0.0;
    for (const auto& p : sample) {
        worst = std::max(worst, log_hessian_defect(einstein_quantity(phi, params, a_const, p, F)));
    }
    return worst;
}

double w_derivative_product(const PotentialExpr& W, const ParameterTable& params, double x) {
    const PotentialExpr Wz = substitute(W, kPlaceholder, PotentialExpr::z1());
    const ComplexJet j = evaluate_formal(Wz, params, {cplx(x), 0.0, 0.0, 0.0}, 2);
    return (j.partial({{1, 0, 0, 0}}) * j.partial({{2, 0, 0, 0}})).real();
}

double verify_w_equation(double A, double B, std::span<const double> xs) {
    if (A == 0.0) throw FamilyError("A must be nonzero");
    const PotentialExpr W = parse("A*(x + B)^(3/2)");
    const ParameterTable params{{"A", A}, {"B", B}};
    const double expected = 9.0 * A * A / 8.0;
    double worst = 0.0;
    for (double x : xs) {
        if (x + B <= 0.0) {
            std::ostringstream os;
            os << "x + B = " << x + B << " is outside the branch domain";
            throw DomainError(os.str());
        }
        worst = std::max(worst, std::abs(w_derivative_product(W, params, x) - expected));
    }
    return worst;
}

double w_product_spread(const PotentialExpr& W, const ParameterTable& params, std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("empty sample");
    double lo = INFINITY, hi = -INFINITY;
    for (double x : xs) {
        const double v = w_derivative_product(W, params, x);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi - lo;
}

RicciFlatReport verify_ricci_flat(double A, double gamma, std::span<const ChartPoint> sample) {
    if (A == 0.0) throw FamilyError("A must be nonzero");
    if (gamma == 0.0) throw FamilyError("gamma must be nonzero");
    const PotentialExpr phi = parse("A*(z1+zb1+gamma*z2*zb2)^(3/2)");
    const ParameterTable params{{"A", A}, {"gamma", gamma}};
    RicciFlatReport out;
    out.det_expected = 9.0 * A * A * gamma / 8.0;
    for (const auto& p : sample) {
        const double x = 2.0 * p.z1.real() + gamma * std::norm(p.z2);
        if (x <= 0.0) {
            std::ostringstream os;
            os << "x = " << x << " <= 0 at a Ricci-flat sample point";
            throw DomainError(os.str());
        }
        const LocalGeometry geo = LocalGeometry::build(phi, params, p, 4);
        const CurvatureData curv = geo.curvature();
        const double ricci = max_abs(curv.ricci);
        out.max_ricci = std::max(out.max_ricci, ricci);
        out.max_ricci_relative = std::max(out.max_ricci_relative, relative_residual(ricci, curv.max_riemann()));
        out.det_residual = std::max(out.det_residual, std::abs(geo.det.value() - out.det_expected) /
                                                          std::abs(out.det_expected));
        const Mat2 g = values(geo.g);
        const double c = 0.75 * A / std::sqrt(x);
        const double r2 = std::norm(p.z2);
        Mat2 closed{};
        closed[0][0] = c;
        closed[0][1] = c * gamma * p.z2;
        closed[1][0] = c * gamma * std::conj(p.z2);
        closed[1][1] = c * (gamma * gamma * r2 + 2.0 * gamma * x);
        Mat2 displayed = closed;
        displayed[1][1] = c * 2.0 * gamma * (2.0 * p.z1.real() + 1.5 * r2);
        double dm = 0.0, dd = 0.0;
        for (int a = 0; a < kDim; ++a) {
            for (int b = 0; b < kDim; ++b) {
                dm = std::max(dm, std::abs(g[a][b] - closed[a][b]));
                dd = std::max(dd, std::abs(g[a][b] - displayed[a][b]));
            }
        }
        out.metric_residual = std::max(out.metric_residual, dm / max_abs(g));
        out.displayed_residual = std::max(out.displayed_residual, dd / max_abs(g));
        ++out.samples;
    }
    return out;
}

HscSpread hsc_spread(const PotentialExpr& phi, const ParameterTable& params, std::span<const ChartPoint> points,
                     std::span<const Vec2> directions) {
    if (points.empty() || points.size() != directions.size()) {
        throw std::invalid_argument("hsc sampling needs equally many points and directions");
    }
    HscSpread out;
    out.min = INFINITY;
    out.max = -INFINITY;
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const LocalGeometry geo = LocalGeometry::build(phi, params, points[i], 4);
        const double h = hsc_at(geo, geo.curvature(), directions[i]);
        out.min = std::min(out.min, h);
        out.max = std::max(out.max, h);
        sum += h;
    }
    out.samples = points.size();
    out.value = sum / static_cast<double>(out.samples);
    out.spread = relative_residual(out.max - out.min, std::abs(out.value));
    return out;
}

HscSpread verify_constant_hsc(double eps, std::size_t n_samples, std::uint64_t seed) {
    FamilySpec spec;
    spec.kind = FamilyKind::constant_hsc;
    spec.params.set("eps", eps);
    const FamilyInstance inst = instantiate(spec);
    const auto points = sample_admissible(inst, n_samples, seed);
    const auto dirs = sample_directions(n_samples, seed + 1);
    return hsc_spread(inst.phi, inst.params, points, dirs);
}

}  // namespace hkahler
