#pragma once

// Batch front end: point grids, per-point verification records and the JSON report.

#include "hkahler/families.hpp"
#include "hkahler/hproj.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hkahler::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

enum ExitCode : int {
    kExitPass = 0,
    kExitFail = 1,
    kExitParse = 2,
    kExitDegenerate = 3,
    kExitNotInFamily = 4,
    kExitInvalidFamily = 5,
};

/// Box and per-axis counts over (Re z1, Im z1, Re z2, Im z2).
struct GridSpec {
    std::array<double, 4> lo{0.1, -0.5, -0.7, -0.7};
    std::array<double, 4> hi{1.0, 0.5, 0.7, 0.7};
    std::array<int, 4> counts{5, 5, 5, 5};
    std::string text = "5";
};

/// "N", "N1xN2xN3xN4", optionally followed by "@lo:hi,lo:hi,lo:hi,lo:hi".
/// Throws std::invalid_argument on malformed specs or empty grids.
GridSpec parse_grid(std::string_view text);
/// Row-major over (Re z1, Im z1, Re z2, Im z2); an axis with count 1 uses the midpoint.
std::vector<ChartPoint> grid_points(const GridSpec& grid);

/// "re1,im1,re2,im2".
ChartPoint parse_point(std::string_view text);

struct RunConfig {
    double tolerance = 1e-8;
    int order = kDefaultJetOrder;
    GridSpec grid;
    std::vector<ChartPoint> points;  // overrides the grid when nonempty
    std::uint64_t seed = 1;
    std::vector<double> rho{1.0};
    int jobs = 1;
    std::vector<std::string> expect;  // extra gating checks: einstein_defect, ricci_flat
    std::size_t samples = 30;         // family command sample count

    /// Throws std::invalid_argument when tolerance <= 0, order outside [4, 8], jobs < 1 or rho empty.
    void validate() const;
};

struct Potential {
    std::string source;
    PotentialExpr phi = PotentialExpr::literal(0.0);
    ParameterTable params;
    std::optional<FamilyInstance> family;
};

/// Parses a potential file; a `family =` line expands to its potential unless `phi =` is present.
/// Throws ParseError, BindError or FamilyError.
Potential load_potential(std::string_view text);

struct Report {
    nlohmann::ordered_json json;
    int exit_code = kExitPass;
    std::string message;  // diagnostic for standard error
};

Report analyze(const Potential& pot, const RunConfig& cfg);
Report hproject(const Potential& pot, const RunConfig& cfg);

struct CurveConfig {
    Vec2 z0{cplx(0.5, 0.0), cplx(0.2, 0.0)};
    Vec2 v0{cplx(1.0, 0.0), cplx(0.5, 0.0)};
    double t_end = 1.0;
    int steps = 1000;
    bool identity_pair = false;
};

Report curve(const Potential& pot, const RunConfig& cfg, const CurveConfig& curve);
Report family(const FamilySpec& spec, const RunConfig& cfg);
/// Lists the grid points and, for a family potential, whether each lies in its domain.
Report grid(const std::optional<Potential>& pot, const RunConfig& cfg);

/// Human-readable per-check summary.
std::string summary(const Report& report);

/// Entry point of the `hkahler` executable; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hkahler::cli
