#pragma once

// H-projective layer: the Sinyukov tensor a_{a bbar} of a generalized
// equidistant potential, the partner metric g', and pointwise residuals of
// the equations that make (g, g') an H-projective pair.
//
// Every covariant derivative here is taken with the Levi-Civita connection
// of the unprimed metric g.

#include "hkahler/kahler.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hkahler {

struct ATensor {
    Mat2 a{};          // a_{a bbar}
    Mat2 a_mixed{};    // a^a_b = g^{a sbar} a_{b sbar}
    double lambda_val = 0.0;      // d_1 Phi + 2 rho
    Vec2 lambda_lower{};          // lambda_a = g_{a 1bar}
    double hermiticity_residual = 0.0;
    double trace_residual = 0.0;  // |a_{a bbar} g^{a bbar} - lambda|
    double lambda_imag = 0.0;     // |Im (d_1 Phi + 2 rho)|
};

/// Sinyukov tensor as jets of order N-2: a_{a bbar} = d_a Phi d_1 d_bbar Phi + rho g_{a bbar}.
JetMat2 sinyukov_tensor_jets(const LocalGeometry& geo, double rho);

/// Value-level view of a-tensor jets.
ATensor a_tensor_from(const LocalGeometry& geo, const JetMat2& a, double rho);

/// max |(d_1 - d_1bar) g_{a bbar}|: the reduced Killing equation for J Lambda = i(d_1 - d_1bar).
double killing_residual(const LocalGeometry& geo);
double killing_residual(const PotentialExpr& phi, const ParameterTable& params, const ChartPoint& p);

/// max over the jet of (d_1 - d_1bar) Phi of |partial|. Zero iff Phi depends on z1 only through z1 + zb1
/// near the point, which is the reduced shape the Sinyukov formula assumes.
double shape_residual(const LocalGeometry& geo);

/// Largest |partial| of orders 1..N of Phi, used to scale shape_residual.
double potential_scale(const LocalGeometry& geo);
/// Largest |d_c g_{a bbar}|, used to scale killing_residual.
double metric_derivative_scale(const LocalGeometry& geo);

/// Relative residual threshold above which a potential is treated as outside the class.
inline constexpr double kFamilyShapeTolerance = 1e-8;

/// Throws NotInFamilyError when the shape or Killing residual exceeds the family tolerance.
void require_family_shape(const LocalGeometry& geo);

/// Builds the a-tensor; throws NotInFamilyError outside the family, DegeneracyError for degenerate g.
ATensor a_tensor_at(const PotentialExpr& phi, const ParameterTable& params, double rho, const ChartPoint& p);

struct LambdaGradientResult {
    double gradient_residual = 0.0;     // max |g_{c 1bar} - d_c (a_{a bbar} g^{a bbar})|
    double holomorphy_residual = 0.0;   // max |d_nbar lambda^a|
    double normal_form_residual = 0.0;  // max |lambda^a - delta^a_1|
    double total() const;
};

LambdaGradientResult lambda_gradient_check(const LocalGeometry& geo, const JetMat2& a);
double lambda_gradient_check(const PotentialExpr& phi, const ParameterTable& params, double rho,
                             const ChartPoint& p);

struct HpaResult {
    double holomorphic = 0.0;      // max |a_{a bbar, c} - lambda_a g_{c bbar}|
    double antiholomorphic = 0.0;  // max |a_{a bbar, cbar} - lambda_bbar g_{a cbar}|
    double scale = 0.0;
    double total() const { return std::max(holomorphic, antiholomorphic); }
};

HpaResult hpa_residual(const LocalGeometry& geo, const JetMat2& a);
double hpa_residual(const PotentialExpr& phi, const ParameterTable& params, double rho, const ChartPoint& p);

/// (g, g', psi) at one point, as jets so that derivatives of g' and psi are available.
struct PairJets {
    ChartPoint point;
    JetMat2 gprime;
    JetMat2 gprime_inv;  // g'^{a bbar} layout, as LocalGeometry::ginv
    ComplexJet psi;
    double e2psi_imag = 0.0;

    Vec2 psi_grad() const;
};

struct HProjectivePair {
    HermitianMetric g;
    HermitianMetric gprime;
    double psi_val = 0.0;
    Vec2 psi_grad{};
    bool affine = false;
};

/// Partner metric g' = e^{2 psi} G A^{-1} G with e^{2 psi} = det g / det a.
/// Throws DegeneracyError for a degenerate a and Error when e^{2 psi} is not positive real.
PairJets sinyukov_gprime(const LocalGeometry& geo, const JetMat2& a);

HProjectivePair pair_values(const LocalGeometry& geo, const PairJets& pair);

struct PairResidual {
    double hp2 = 0.0;              // holomorphic and barred forms of the g' covariant derivative equation
    double connection = 0.0;       // max |Gamma' - Gamma - 2(delta psi + delta psi)|
    double mixed_connection = 0.0; // max |Gamma'^a_{b cbar}|
    double scale = 0.0;
    double total() const { return std::max({hp2, connection, mixed_connection}); }
};

/// Throws std::invalid_argument when the pair was built at another point.
PairResidual pair_residual(const PairJets& pair, const LocalGeometry& geo);
double pair_residual(const PotentialExpr& phi, const ParameterTable& params, double rho, const ChartPoint& p);

struct BTensorResult {
    Mat2 b{};               // b^a_b = i (d_1 - d_1bar) a^a_b
    double b_trace = 0.0;   // |b^s_s|
    double zvez = 0.0;      // max |a^n_m R^m_c - a^m_c R^n_m|
    double zvez_b = 0.0;    // max |b^n_m R^m_c - b^m_c R^n_m|
};

BTensorResult b_tensor_checks(const LocalGeometry& geo, const CurvatureData& curv, const JetMat2& a);
BTensorResult b_tensor_checks(const PotentialExpr& phi, const ParameterTable& params, double rho,
                              const ChartPoint& p);

// ---------------------------------------------------------------------------
// Curves

struct CurveSample {
    double t = 0.0;
    Vec2 z{};
    Vec2 zdot{};
};

struct HPlanarCurve {
    std::vector<CurveSample> samples;
    double step = 0.0;
    bool truncated = false;
    std::string error;  // reason for truncation
};

/// Christoffel symbols of some connection as a function of the point.
using ConnectionField = std::function<std::array<Mat2, kDim>(const ChartPoint&)>;

/// Levi-Civita connection of the Kahler metric with potential phi.
ConnectionField levi_civita_connection(PotentialExpr phi, ParameterTable params);
/// Levi-Civita connection of the Sinyukov partner metric g' built from phi and rho.
ConnectionField sinyukov_connection(PotentialExpr phi, ParameterTable params, double rho);
ConnectionField flat_connection();

/// Classical RK4 on z'' + Gamma(z)(z', z') = 0 with `steps` fixed steps over [0, t_end].
HPlanarCurve integrate_geodesic(const PotentialExpr& phi, const ParameterTable& params, const Vec2& z0,
                                const Vec2& v0, double t_end, int steps);

/// max_t |E(t) - E(0)| / |E(0)| for E = g(zdot, conj zdot).
double energy_drift(const HPlanarCurve& curve, const PotentialExpr& phi, const ParameterTable& params);

inline constexpr double kParallelismFloor = 1e-14;

/// max over samples of |xi^1 zdot^2 - xi^2 zdot^1| / (|xi| |zdot| + floor), with
/// xi = z'' + Gamma'(zdot, zdot) and z'' taken from the geodesic equation of `base`.
double hplanarity_residual(const HPlanarCurve& curve, const ConnectionField& base, const ConnectionField& primed);
double hplanarity_residual(const HPlanarCurve& curve, const PotentialExpr& phi, const ParameterTable& params,
                           double rho);

}  // namespace hkahler
