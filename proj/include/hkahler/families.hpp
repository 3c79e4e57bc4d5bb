#pragma once

// Closed-form generalized equidistant potentials Phi = W(z1 + zb1 + F(z2, zb2))
// and targeted verifiers for the Ricci-flat, Einstein and constant-HSC cases.
//
// W is written as a univariate expression in the placeholder parameter `x`;
// F is an expression in z2 and zb2.

#include "hkahler/kahler.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hkahler {

enum class FamilyKind { flat, equidistant, generalized_equidistant, ricci_flat, constant_hsc };

/// Accepts both `ricci_flat` and `ricci-flat` spellings.
std::optional<FamilyKind> parse_family_kind(std::string_view name);
std::string family_name(FamilyKind kind);

/// Placeholder parameter name for the argument of W.
inline constexpr const char* kPlaceholder = "x";

struct FamilySpec {
    FamilyKind kind = FamilyKind::flat;
    /// A, B, C, gamma, tau, rho_shift, eps as applicable; unset ones take defaults.
    ParameterTable params;
    std::optional<std::string> w_expr;
    std::optional<std::string> f_expr;
};

struct FamilyInstance {
    FamilyKind kind = FamilyKind::flat;
    PotentialExpr phi = PotentialExpr::literal(0.0);
    ParameterTable params;  // never binds the placeholder
    std::optional<PotentialExpr> W;
    std::optional<PotentialExpr> F;
};

/// Assembles Phi = W(z1 + zb1 + F). Throws FamilyError on invariant violations:
/// W constant or affine (degenerate metric), F not real, d_2 F == 0, A == 0, gamma == 0, eps != +-1.
FamilyInstance instantiate(const FamilySpec& spec);

/// Builds a FamilySpec from a potential file's `family =`, `param` and `W =` / `F =` lines.
FamilySpec spec_from_file(const std::string& kind, const ParameterTable& params,
                          const std::map<std::string, std::string>& exprs);

/// Value of x = z1 + zb1 + F at p (real part). Requires an instance with F.
double family_argument(const FamilyInstance& inst, const ChartPoint& p);

/// Branch domain of the family: x + B > 0 for ricci_flat, |z2| <= 0.9 and |z1| <= 1 for
/// constant_hsc with eps = -1, and a finite potential everywhere.
bool in_family_domain(const FamilyInstance& inst, const ChartPoint& p);

/// Default sampling box: Re z1 in [0.1, 1], Im z1 in [-0.5, 0.5], Re z2, Im z2 in [-0.7, 0.7].
struct SampleBox {
    double re1_min = 0.1, re1_max = 1.0;
    double im1_min = -0.5, im1_max = 0.5;
    double re2_min = -0.7, re2_max = 0.7;
    double im2_min = -0.7, im2_max = 0.7;
};

/// Seeded uniform samples from the box that lie in the family domain.
/// Throws FamilyError if too few admissible points are found.
std::vector<ChartPoint> sample_admissible(const FamilyInstance& inst, std::size_t n, std::uint64_t seed,
                                          const SampleBox& box = {});

/// Seeded random complex directions with unit Euclidean norm.
std::vector<Vec2> sample_directions(std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Einstein separability criterion

/// max over samples and (a, b) of |d_a d_bbar ln h| for a synthetic h(z, zb).
/// Throws DomainError when h vanishes at a sample point.
double separability_defect(const PotentialExpr& h, const ParameterTable& params,
                           std::span<const ChartPoint> sample);

/// Jet of h = exp(a Phi) d_1((d_1 Phi)^2) d_2 d_2bar F at one point, of order 2.
/// Without F, d_2 d_2bar F is recovered as det g / (d_1 Phi d_1 d_1bar Phi).
ComplexJet einstein_quantity(const PotentialExpr& phi, const ParameterTable& params, double a_const,
                             const ChartPoint& p, const std::optional<PotentialExpr>& F = std::nullopt);

double einstein_separability_defect(const PotentialExpr& phi, const ParameterTable& params, double a_const,
                                    std::span<const ChartPoint> sample,
                                    const std::optional<PotentialExpr>& F = std::nullopt);

// ---------------------------------------------------------------------------
// Ricci-flat family

/// W'(x) W''(x) for W given in the placeholder x.
double w_derivative_product(const PotentialExpr& W, const ParameterTable& params, double x);

/// max |W' W'' - 9 A^2 / 8| for W = A (x + B)^(3/2). Throws DomainError for x + B <= 0.
double verify_w_equation(double A, double B, std::span<const double> xs);

/// max - min of W' W'' over the sample.
double w_product_spread(const PotentialExpr& W, const ParameterTable& params, std::span<const double> xs);

struct RicciFlatReport {
    double max_ricci = 0.0;           // max |R_{a bbar}|
    double max_ricci_relative = 0.0;  // relative to the largest |R^a_{bmn}|
    double det_expected = 0.0;        // 9 A^2 gamma / 8
    double det_residual = 0.0;        // max |det g - expected| / |expected|
    double metric_residual = 0.0;     // max |g - closed-form d d Phi| / max |g|
    double displayed_residual = 0.0;  // same against the displayed line element (informational)
    std::size_t samples = 0;
};

/// Throws DomainError for a sample with x <= 0, FamilyError for A == 0 or gamma == 0.
RicciFlatReport verify_ricci_flat(double A, double gamma, std::span<const ChartPoint> sample);

// ---------------------------------------------------------------------------
// Constant holomorphic sectional curvature

struct HscSpread {
    double value = 0.0;   // mean
    double spread = 0.0;  // (max - min) / max(|mean|, floor)
    double min = 0.0;
    double max = 0.0;
    std::size_t samples = 0;
};

/// HSC over paired (point, direction) samples.
HscSpread hsc_spread(const PotentialExpr& phi, const ParameterTable& params, std::span<const ChartPoint> points,
                     std::span<const Vec2> directions);

/// Seeded sampling of the constant-HSC potential for the given eps.
HscSpread verify_constant_hsc(double eps, std::size_t n_samples, std::uint64_t seed = 1);

}  // namespace hkahler
