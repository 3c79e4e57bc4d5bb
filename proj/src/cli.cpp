#include "hkahler/cli.hpp"

#include "hkahler/errors.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace hkahler::cli {

using json = nlohmann::ordered_json;

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        out.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double to_double(std::string_view s) {
    std::string t(s);
    t.erase(0, t.find_first_not_of(" \t"));
    t.erase(t.find_last_not_of(" \t") + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("not a number: '" + t + "'");
    }
    if (used != t.size() || !std::isfinite(v)) throw std::invalid_argument("not a number: '" + t + "'");
    return v;
}

int to_count(std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 1) {
        throw std::invalid_argument("grid count must be a positive integer: '" + std::string(s) + "'");
    }
    return v;
}

json point_json(const ChartPoint& p) { return json::array({p.z1.real(), p.z1.imag(), p.z2.real(), p.z2.imag()}); }

// ---------------------------------------------------------------------------
// Records

enum class Status { ok, skipped, error };

struct Record {
    std::size_t index = 0;
    ChartPoint point;
    std::optional<double> rho;
    Status status = Status::ok;
    std::string reason;
    std::vector<std::pair<std::string, double>> residuals;
    std::vector<std::pair<std::string, double>> info;
    bool not_in_family = false;

    void res(const std::string& name, double v) { residuals.emplace_back(name, v); }
    void note(const std::string& name, double v) { info.emplace_back(name, v); }
    void skip(const std::string& why) {
        status = Status::skipped;
        reason = why;
    }
    void fail(const std::string& why) {
        status = Status::error;
        reason = why;
    }
};

struct CheckDef {
    std::string name;
    bool gating = true;
};

struct GlobalCheck {
    std::string name;
    double value = 0.0;
    bool gating = true;
};

template <class Fn>
std::vector<Record> parallel_records(std::size_t n, int jobs, Fn fn) {
    std::vector<Record> out(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) out[i] = fn(i);
    };
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return out;
}

template <class Fn>
Record guarded(std::size_t index, const ChartPoint& p, std::optional<double> rho, Fn body) {
    Record r;
    r.index = index;
    r.point = p;
    r.rho = rho;
    try {
        body(r);
    } catch (const NotInFamilyError& e) {
        r.not_in_family = true;
        r.fail(e.what());
    } catch (const DegeneracyError& e) {
        r.skip(e.what());
    } catch (const DomainError& e) {
        r.skip(std::string("outside the domain: ") + e.what());
    } catch (const RealityError& e) {
        r.fail(e.what());
    } catch (const std::exception& e) {
        r.fail(e.what());
    }
    return r;
}

std::string status_name(Status s) {
    switch (s) {
        case Status::ok: return "ok";
        case Status::skipped: return "skipped";
        case Status::error: return "error";
    }
    return "error";
}

json config_json(const RunConfig& cfg) {
    json c;
    c["tolerance"] = cfg.tolerance;
    c["order"] = cfg.order;
    if (cfg.points.empty()) {
        c["grid"] = cfg.grid.text;
    } else {
        json pts = json::array();
        for (const auto& p : cfg.points) pts.push_back(point_json(p));
        c["points"] = pts;
    }
    c["seed"] = cfg.seed;
    c["rho"] = cfg.rho;
    c["expect"] = cfg.expect;
    return c;
}

Report finalize(json base, const std::vector<Record>& records, const std::vector<CheckDef>& checks,
                const std::vector<GlobalCheck>& globals, double tol) {
    Report rep;
    json pts = json::array();
    std::size_t evaluated = 0, skipped = 0, errors = 0;
    bool not_in_family = false;
    std::string first_error;
    for (const auto& r : records) {
        json j;
        j["index"] = r.index;
        j["point"] = point_json(r.point);
        if (r.rho) j["rho"] = *r.rho;
        j["status"] = status_name(r.status);
        if (!r.reason.empty()) j["reason"] = r.reason;
        json res = json::object();
        for (const auto& [k, v] : r.residuals) res[k] = v;
        j["residuals"] = res;
        if (!r.info.empty()) {
            json inf = json::object();
            for (const auto& [k, v] : r.info) inf[k] = v;
            j["info"] = inf;
        }
        pts.push_back(j);
        if (r.status == Status::skipped) {
            ++skipped;
        } else {
            ++evaluated;
            if (r.status == Status::error) {
                ++errors;
                if (first_error.empty()) first_error = r.reason;
            }
        }
        not_in_family = not_in_family || r.not_in_family;
    }

    bool pass = errors == 0;
    json agg_checks = json::object();
    for (const auto& c : checks) {
        double mx = 0.0;
        std::size_t n = 0;
        bool nan = false;
        for (const auto& r : records) {
            if (r.status == Status::skipped) continue;
            for (const auto& [k, v] : r.residuals) {
                if (k != c.name) continue;
                ++n;
                if (std::isnan(v)) nan = true;
                mx = std::max(mx, v);
            }
        }
        const bool ok = !nan && mx < tol;
        json cj;
        if (n == 0) {
            cj["max"] = nullptr;
        } else {
            cj["max"] = nan ? std::nan("") : mx;
        }
        cj["evaluated"] = n;
        cj["gating"] = c.gating;
        cj["pass"] = ok;
        agg_checks[c.name] = cj;
        if (c.gating && !ok) pass = false;
    }
    for (const auto& g : globals) {
        const bool ok = !std::isnan(g.value) && g.value < tol;
        json cj;
        cj["max"] = g.value;
        cj["gating"] = g.gating;
        cj["pass"] = ok;
        agg_checks[g.name] = cj;
        if (g.gating && !ok) pass = false;
    }

    std::string verdict;
    if (not_in_family) {
        verdict = "not_in_family";
        rep.exit_code = kExitNotInFamily;
        rep.message = first_error;
    } else if (evaluated == 0 && !records.empty()) {
        verdict = "degenerate";
        rep.exit_code = kExitDegenerate;
        rep.message = "every point was skipped";
    } else if (pass) {
        verdict = "pass";
        rep.exit_code = kExitPass;
    } else {
        verdict = "fail";
        rep.exit_code = kExitFail;
        rep.message = first_error;
    }

    base["points"] = pts;
    json agg;
    agg["checks"] = agg_checks;
    agg["points"] = records.size();
    agg["evaluated"] = evaluated;
    agg["skipped"] = skipped;
    agg["errors"] = errors;
    agg["verdict"] = verdict;
    base["aggregate"] = agg;
    rep.json = std::move(base);
    return rep;
}

json header(const std::string& command, const std::string& source, const std::string& potential,
            const RunConfig& cfg) {
    json j;
    j["schema"] = kSchemaVersion;
    j["tool_version"] = kToolVersion;
    j["command"] = command;
    j["potential_source"] = source;
    j["potential"] = potential;
    j["config"] = config_json(cfg);
    return j;
}

std::vector<ChartPoint> run_points(const RunConfig& cfg) {
    return cfg.points.empty() ? grid_points(cfg.grid) : cfg.points;
}

bool expects(const RunConfig& cfg, const std::string& name) {
    return std::find(cfg.expect.begin(), cfg.expect.end(), name) != cfg.expect.end();
}

int effective_order(const RunConfig& cfg) { return std::max(cfg.order, 4); }

// ---------------------------------------------------------------------------
// Per-point suites

const std::vector<std::string> kAnalyzeChecks = {"reality",          "hermitian",       "closedness",
                                                 "christoffel_symmetry", "ricci_crosscheck", "einstein_defect",
                                                 "ricci_flat"};

void analyze_point(Record& r, const PotentialExpr& phi, const ParameterTable& params, int order) {
    const ComplexJet jet = evaluate(phi, params, r.point, order);
    const cplx v = jet.value();
    const double reality = std::abs(v.imag()) / std::max(1.0, std::abs(v));
    r.res("reality", reality);
    if (reality > kRealityTolerance) {
        r.fail("potential is not real at the point");
        return;
    }
    const LocalGeometry geo = LocalGeometry::from_potential_jet(r.point, jet);
    const HermitianMetric g = geo.metric();
    const ChristoffelSymbols gam = geo.christoffel();
    const CurvatureData curv = geo.curvature();
    double gamma_scale = 0.0;
    for (const auto& m : gam.gamma) gamma_scale = std::max(gamma_scale, max_abs(m));
    const double curv_scale = std::max(max_abs(curv.ricci), curv.max_riemann());
    r.res("hermitian", relative_residual(g.hermiticity_residual, max_abs(g.g)));
    r.res("closedness", relative_residual(closedness_residual(geo), metric_derivative_scale(geo)));
    r.res("christoffel_symmetry", relative_residual(gam.symmetry_residual, gamma_scale));
    r.res("ricci_crosscheck", relative_residual(curv.ricci_discrepancy, curv_scale));
    const EinsteinDefect ed = einstein_defect(curv, g);
    r.res("einstein_defect", relative_residual(ed.defect, curv_scale));
    r.res("ricci_flat", relative_residual(max_abs(curv.ricci), curv_scale));
    r.note("kappa", ed.kappa.real());
    r.note("scalar", curv.scalar);
    r.note("det", g.det.real());
}

const std::vector<std::string> kHprojectChecks = {"killing", "shape",           "a_hermitian", "trace_identity",
                                                  "hpa",     "lambda_gradient", "psi_real",    "pair",
                                                  "b_trace", "zvez",            "zvez_b"};

void hproject_point(Record& r, const PotentialExpr& phi, const ParameterTable& params, double rho, int order) {
    const LocalGeometry geo = LocalGeometry::build(phi, params, r.point, order);
    const double killing = relative_residual(killing_residual(geo), metric_derivative_scale(geo));
    const double shape = relative_residual(shape_residual(geo), potential_scale(geo));
    r.res("killing", killing);
    r.res("shape", shape);
    if (killing > kFamilyShapeTolerance || shape > kFamilyShapeTolerance) require_family_shape(geo);

    const JetMat2 a = sinyukov_tensor_jets(geo, rho);
    const ATensor at = a_tensor_from(geo, a, rho);
    const double a_scale = max_abs(at.a);
    r.res("a_hermitian", relative_residual(at.hermiticity_residual, a_scale));
    r.res("trace_identity", relative_residual(at.trace_residual,
                                              std::max(std::abs(at.lambda_val), a_scale * max_abs(values(geo.ginv)))));
    r.note("lambda", at.lambda_val);
    r.note("lambda_imag", at.lambda_imag);
    const HpaResult hpa = hpa_residual(geo, a);
    r.res("hpa", relative_residual(hpa.total(), hpa.scale));
    r.res("lambda_gradient", relative_residual(lambda_gradient_check(geo, a).total(), max_abs(values(geo.g))));

    const PairJets pair = sinyukov_gprime(geo, a);
    const HProjectivePair pv = pair_values(geo, pair);
    r.res("psi_real", std::abs(pair.psi.value().imag()));
    r.note("psi", pv.psi_val);
    r.note("psi_grad", std::hypot(std::abs(pv.psi_grad[0]), std::abs(pv.psi_grad[1])));
    const PairResidual pr = pair_residual(pair, geo);
    r.res("pair", relative_residual(pr.total(), pr.scale));

    const CurvatureData curv = geo.curvature();
    const BTensorResult b = b_tensor_checks(geo, curv, a);
    double da_scale = 0.0;
    for (int c = 0; c < kNumVars; ++c) {
        const JetMat2 da = derivative(a, c);
        da_scale = std::max(da_scale, max_abs(values(da)) * max_abs(values(geo.ginv)));
    }
    const double b_scale = std::max(max_abs(b.b), da_scale);
    const double r_scale = std::max(max_abs(curv.ricci_mixed), curv.max_riemann());
    r.res("b_trace", relative_residual(b.b_trace, b_scale));
    r.res("zvez", relative_residual(b.zvez, max_abs(at.a_mixed) * r_scale));
    r.res("zvez_b", relative_residual(b.zvez_b, b_scale * r_scale));
}

std::vector<CheckDef> analyze_defs(bool einstein_gating, bool ricci_gating) {
    std::vector<CheckDef> defs;
    for (const auto& n : kAnalyzeChecks) {
        bool gating = true;
        if (n == "einstein_defect") gating = einstein_gating;
        if (n == "ricci_flat") gating = ricci_gating;
        defs.push_back({n, gating});
    }
    return defs;
}

std::vector<CheckDef> hproject_defs() {
    std::vector<CheckDef> defs;
    for (const auto& n : kHprojectChecks) defs.push_back({n, true});
    return defs;
}

bool expects_einstein(std::optional<FamilyKind> kind) {
    return kind == FamilyKind::flat || kind == FamilyKind::ricci_flat || kind == FamilyKind::constant_hsc;
}

bool expects_ricci_flat(std::optional<FamilyKind> kind) {
    return kind == FamilyKind::flat || kind == FamilyKind::ricci_flat;
}

std::vector<Record> hproject_records(const PotentialExpr& phi, const ParameterTable& params,
                                     const std::optional<FamilyInstance>& fam, const std::vector<ChartPoint>& pts,
                                     const RunConfig& cfg) {
    const std::size_t nr = cfg.rho.size();
    const int order = effective_order(cfg);
    return parallel_records(pts.size() * nr, cfg.jobs, [&](std::size_t k) {
        const std::size_t i = k / nr;
        const double rho = cfg.rho[k % nr];
        return guarded(i, pts[i], rho, [&](Record& r) {
            if (fam && !in_family_domain(*fam, r.point)) {
                r.skip("outside the family domain");
                return;
            }
            hproject_point(r, phi, params, rho, order);
        });
    });
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid and config

GridSpec parse_grid(std::string_view text) {
    GridSpec g;
    g.text = std::string(text);
    const std::size_t at = text.find('@');
    const std::string_view counts = text.substr(0, at);
    const auto parts = split(counts, 'x');
    if (parts.size() == 1) {
        g.counts.fill(to_count(parts[0]));
    } else if (parts.size() == 4) {
        for (std::size_t i = 0; i < 4; ++i) g.counts[i] = to_count(parts[i]);
    } else {
        throw std::invalid_argument("grid counts must be N or N1xN2xN3xN4");
    }
    if (at != std::string_view::npos) {
        const auto ranges = split(text.substr(at + 1), ',');
        if (ranges.size() != 4) throw std::invalid_argument("grid box needs four lo:hi ranges");
        for (std::size_t i = 0; i < 4; ++i) {
            const auto lh = split(ranges[i], ':');
            if (lh.size() != 2) throw std::invalid_argument("grid range must be lo:hi");
            g.lo[i] = to_double(lh[0]);
            g.hi[i] = to_double(lh[1]);
            if (g.hi[i] < g.lo[i]) throw std::invalid_argument("grid range has hi < lo");
        }
    }
    return g;
}

std::vector<ChartPoint> grid_points(const GridSpec& grid) {
    std::array<std::vector<double>, 4> axes;
    for (std::size_t i = 0; i < 4; ++i) {
        const int n = grid.counts[i];
        if (n < 1) throw std::invalid_argument("empty grid");
        for (int k = 0; k < n; ++k) {
            axes[i].push_back(n == 1 ? 0.5 * (grid.lo[i] + grid.hi[i])
                                     : grid.lo[i] + (grid.hi[i] - grid.lo[i]) * k / (n - 1));
        }
    }
    std::vector<ChartPoint> out;
    for (double a : axes[0]) {
        for (double b : axes[1]) {
            for (double c : axes[2]) {
                for (double d : axes[3]) out.push_back(ChartPoint{cplx(a, b), cplx(c, d)});
            }
        }
    }
    return out;
}

ChartPoint parse_point(std::string_view text) {
    const auto parts = split(text, ',');
    if (parts.size() != 4) throw std::invalid_argument("a point is re1,im1,re2,im2");
    return ChartPoint{cplx(to_double(parts[0]), to_double(parts[1])), cplx(to_double(parts[2]), to_double(parts[3]))};
}

void RunConfig::validate() const {
    if (!(tolerance > 0.0)) throw std::invalid_argument("--tol must be positive");
    if (order < 4 || order > kMaxJetOrder) throw std::invalid_argument("--order must lie in [4, 8]");
    if (jobs < 1) throw std::invalid_argument("--jobs must be at least 1");
    if (rho.empty()) throw std::invalid_argument("--rho needs at least one value");
    if (samples < 1) throw std::invalid_argument("--samples must be at least 1");
    for (const auto& e : expect) {
        if (e != "einstein_defect" && e != "ricci_flat") {
            throw std::invalid_argument("--expect takes einstein_defect or ricci_flat, not '" + e + "'");
        }
    }
}

namespace {

Potential from_file(const PotentialFile& file) {
    Potential pot;
    pot.source = file.source;
    pot.params = file.params;
    if (file.family) {
        pot.family = instantiate(spec_from_file(*file.family, file.params, file.family_exprs));
        pot.params = pot.family->params;
        pot.phi = pot.family->phi;
    }
    if (file.phi) pot.phi = *file.phi;
    check_bound(pot.phi, pot.params);
    return pot;
}

}  // namespace

Potential load_potential(std::string_view text) { return from_file(parse_potential_file(text)); }

// ---------------------------------------------------------------------------
// Commands

Report analyze(const Potential& pot, const RunConfig& cfg) {
    cfg.validate();
    const auto pts = run_points(cfg);
    const std::optional<FamilyKind> kind = pot.family ? std::optional(pot.family->kind) : std::nullopt;
    const int order = effective_order(cfg);
    const auto records = parallel_records(pts.size(), cfg.jobs, [&](std::size_t i) {
        return guarded(i, pts[i], std::nullopt, [&](Record& r) {
            if (pot.family && !in_family_domain(*pot.family, r.point)) {
                r.skip("outside the family domain");
                return;
            }
            analyze_point(r, pot.phi, pot.params, order);
        });
    });
    const auto defs = analyze_defs(expects_einstein(kind) || expects(cfg, "einstein_defect"),
                                   expects_ricci_flat(kind) || expects(cfg, "ricci_flat"));
    json base = header("analyze", pot.source, print(pot.phi), cfg);
    if (kind) base["family"] = family_name(*kind);
    return finalize(std::move(base), records, defs, {}, cfg.tolerance);
}

Report hproject(const Potential& pot, const RunConfig& cfg) {
    cfg.validate();
    const auto pts = run_points(cfg);
    const auto records = hproject_records(pot.phi, pot.params, pot.family, pts, cfg);
    json base = header("hproject", pot.source, print(pot.phi), cfg);
    if (pot.family) base["family"] = family_name(pot.family->kind);
    return finalize(std::move(base), records, hproject_defs(), {}, cfg.tolerance);
}

Report curve(const Potential& pot, const RunConfig& cfg, const CurveConfig& cc) {
    cfg.validate();
    if (!(cc.t_end > 0.0)) throw std::invalid_argument("--t-end must be positive");
    if (cc.steps < 2) throw std::invalid_argument("--steps must be at least 2");
    const double rho = cfg.rho.front();
    json base = header("curve", pot.source, print(pot.phi), cfg);
    json cj;
    cj["z0"] = point_json(ChartPoint{cc.z0[0], cc.z0[1]});
    cj["v0"] = point_json(ChartPoint{cc.v0[0], cc.v0[1]});
    cj["t_end"] = cc.t_end;
    cj["steps"] = cc.steps;
    cj["identity_pair"] = cc.identity_pair;

    if (!cc.identity_pair) {
        try {
            require_family_shape(LocalGeometry::build(pot.phi, pot.params, ChartPoint{cc.z0[0], cc.z0[1]}, 4));
        } catch (const NotInFamilyError& e) {
            base["curve"] = cj;
            Report rep = finalize(std::move(base), {}, {}, {}, cfg.tolerance);
            rep.json["aggregate"]["verdict"] = "not_in_family";
            rep.exit_code = kExitNotInFamily;
            rep.message = e.what();
            return rep;
        }
    }

    const HPlanarCurve c = integrate_geodesic(pot.phi, pot.params, cc.z0, cc.v0, cc.t_end, cc.steps);
    std::vector<GlobalCheck> globals;
    std::string failure;
    try {
        globals.push_back({"energy_drift", energy_drift(c, pot.phi, pot.params), true});
        const ConnectionField base_conn = levi_civita_connection(pot.phi, pot.params);
        const ConnectionField primed =
            cc.identity_pair ? base_conn : sinyukov_connection(pot.phi, pot.params, rho);
        globals.push_back({"hplanarity", hplanarity_residual(c, base_conn, primed), true});
    } catch (const std::exception& e) {
        failure = e.what();
    }
    cj["samples"] = c.samples.size();
    cj["truncated"] = c.truncated;
    if (c.truncated) cj["truncation_reason"] = c.error;
    if (!failure.empty()) cj["error"] = failure;
    json path = json::array();
    const std::size_t stride = std::max<std::size_t>(1, c.samples.size() / 10);
    for (std::size_t i = 0; i < c.samples.size(); i += stride) {
        const auto& s = c.samples[i];
        path.push_back({{"t", s.t},
                        {"z", point_json(ChartPoint{s.z[0], s.z[1]})},
                        {"zdot", point_json(ChartPoint{s.zdot[0], s.zdot[1]})}});
    }
    if (!c.samples.empty()) {
        const auto& s = c.samples.back();
        cj["end"] = {{"t", s.t},
                     {"z", point_json(ChartPoint{s.z[0], s.z[1]})},
                     {"zdot", point_json(ChartPoint{s.zdot[0], s.zdot[1]})}};
    }
    cj["path"] = path;
    base["curve"] = cj;
    Report rep = finalize(std::move(base), {}, {}, globals, cfg.tolerance);
    if (c.truncated || !failure.empty()) {
        rep.exit_code = kExitFail;
        rep.json["aggregate"]["verdict"] = "fail";
        rep.message = c.truncated ? "trajectory truncated: " + c.error : failure;
    }
    return rep;
}

Report family(const FamilySpec& spec, const RunConfig& cfg) {
    cfg.validate();
    FamilyInstance inst;
    try {
        inst = instantiate(spec);
    } catch (const FamilyError& e) {
        Report rep;
        rep.exit_code = kExitInvalidFamily;
        rep.message = e.what();
        rep.json = header("family", "", "", cfg);
        rep.json["family"] = family_name(spec.kind);
        rep.json["error"] = e.what();
        rep.json["aggregate"] = {{"verdict", "invalid_family"}};
        return rep;
    }

    const auto pts = cfg.points.empty() ? sample_admissible(inst, cfg.samples, cfg.seed) : cfg.points;
    json base = header("family", "", print(inst.phi), cfg);
    base["family"] = family_name(inst.kind);
    json params = json::object();
    for (const auto& [k, v] : inst.params.values()) params[k] = v;
    base["params"] = params;
    if (inst.W) base["W"] = print(*inst.W);
    if (inst.F) base["F"] = print(*inst.F);

    std::vector<Record> records;
    std::vector<CheckDef> defs;
    std::vector<GlobalCheck> globals;
    json details = json::object();

    if (inst.kind == FamilyKind::flat) {
        const int order = effective_order(cfg);
        records = parallel_records(pts.size(), cfg.jobs, [&](std::size_t i) {
            return guarded(i, pts[i], std::nullopt, [&](Record& r) { analyze_point(r, inst.phi, inst.params, order); });
        });
        defs = analyze_defs(true, true);
    } else {
        records = hproject_records(inst.phi, inst.params, inst, pts, cfg);
        defs = hproject_defs();
    }

    std::vector<ChartPoint> good;
    for (const auto& p : pts) {
        if (in_family_domain(inst, p)) good.push_back(p);
    }

    if (inst.kind == FamilyKind::ricci_flat) {
        const double A = inst.params.get("A");
        const double gamma = inst.params.get("gamma");
        FamilySpec normal;
        normal.kind = FamilyKind::ricci_flat;
        normal.params.set("A", A);
        normal.params.set("gamma", gamma);
        const FamilyInstance ninst = instantiate(normal);
        const auto npts = sample_admissible(ninst, cfg.samples, cfg.seed);
        const RicciFlatReport rf = verify_ricci_flat(A, gamma, npts);
        globals.push_back({"ricci_flat", rf.max_ricci_relative, true});
        globals.push_back({"det_constancy", rf.det_residual, true});
        globals.push_back({"metric_closed_form", rf.metric_residual, true});
        globals.push_back({"displayed_ds2", rf.displayed_residual, false});
        const double B = inst.params.contains("B") ? inst.params.get("B") : 0.0;
        const double x0 = std::max(0.0, -B);
        const std::vector<double> xs{x0 + 0.5, x0 + 1.0, x0 + 2.0};
        globals.push_back({"w_equation", verify_w_equation(A, B, xs) / (9.0 * A * A / 8.0), true});
        globals.push_back({"einstein_separability", einstein_separability_defect(inst.phi, inst.params, 0.0, good, inst.F),
                           true});
        details["det_expected"] = rf.det_expected;
        details["max_ricci_abs"] = rf.max_ricci;
        if (inst.params.contains("tau")) {
            // z1 -> z1 + (rho_shift + B - tau^2/gamma)/2, z2 -> z2 + tau/gamma
            const double tau = inst.params.get("tau");
            const cplx c1 = 0.5 * (inst.params.get("rho_shift") + B - tau * tau / gamma);
            const cplx c2 = tau / gamma;
            double worst = 0.0;
            for (const auto& p : good) {
                const ChartPoint q{p.z1 + c1, p.z2 + c2};
                const Mat2 g1 = metric_at(inst.phi, inst.params, p).g;
                const Mat2 g2 = metric_at(ninst.phi, ninst.params, q).g;
                double d = 0.0;
                for (int a = 0; a < kDim; ++a) {
                    for (int b = 0; b < kDim; ++b) d = std::max(d, std::abs(g1[a][b] - g2[a][b]));
                }
                worst = std::max(worst, relative_residual(d, max_abs(g1)));
            }
            globals.push_back({"shift_consistency", worst, true});
            details["shift"] = {c1.real(), c2.real()};
        }
    } else if (inst.kind == FamilyKind::constant_hsc) {
        const auto dirs = sample_directions(good.size(), cfg.seed + 1);
        const HscSpread h = hsc_spread(inst.phi, inst.params, good, dirs);
        globals.push_back({"hsc_spread", h.spread, true});
        details["hsc_value"] = h.value;
        details["hsc_min"] = h.min;
        details["hsc_max"] = h.max;
        double einstein = 0.0;
        for (const auto& p : good) {
            const LocalGeometry geo = LocalGeometry::build(inst.phi, inst.params, p, 4);
            const CurvatureData curv = geo.curvature();
            einstein = std::max(einstein, relative_residual(einstein_defect(curv, geo.metric()).defect,
                                                            std::max(max_abs(curv.ricci), curv.max_riemann())));
        }
        globals.push_back({"einstein_defect", einstein, true});
    } else if (inst.kind != FamilyKind::flat) {
        double einstein = 0.0;
        for (const auto& p : good) {
            const LocalGeometry geo = LocalGeometry::build(inst.phi, inst.params, p, 4);
            const CurvatureData curv = geo.curvature();
            einstein = std::max(einstein, relative_residual(einstein_defect(curv, geo.metric()).defect,
                                                            std::max(max_abs(curv.ricci), curv.max_riemann())));
        }
        globals.push_back({"einstein_defect", einstein, false});
    }
    if (!details.empty()) base["details"] = details;
    return finalize(std::move(base), records, defs, globals, cfg.tolerance);
}

Report grid(const std::optional<Potential>& pot, const RunConfig& cfg) {
    cfg.validate();
    const auto pts = run_points(cfg);
    json base;
    base["schema"] = kSchemaVersion;
    base["tool_version"] = kToolVersion;
    base["command"] = "grid";
    base["config"] = config_json(cfg);
    json list = json::array();
    std::size_t inside = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        json j;
        j["index"] = i;
        j["point"] = point_json(pts[i]);
        if (pot && pot->family) {
            const bool in = in_family_domain(*pot->family, pts[i]);
            j["in_domain"] = in;
            inside += in ? 1 : 0;
        }
        list.push_back(j);
    }
    base["points"] = list;
    base["count"] = pts.size();
    if (pot && pot->family) base["in_domain"] = inside;
    Report rep;
    rep.json = std::move(base);
    return rep;
}

std::string summary(const Report& report) {
    std::ostringstream os;
    const json& j = report.json;
    os << "hkahler " << j.value("command", std::string("?"));
    if (j.contains("aggregate")) {
        const json& agg = j["aggregate"];
        if (agg.contains("points")) {
            os << ": " << agg["evaluated"].get<std::size_t>() << " evaluated, " << agg["skipped"].get<std::size_t>()
               << " skipped, " << agg["errors"].get<std::size_t>() << " errors";
        }
        os << "\n";
        if (agg.contains("checks")) {
            for (const auto& [name, c] : agg["checks"].items()) {
                os << "  " << std::left << std::setw(22) << name << ' ';
                if (c["max"].is_number()) {
                    os << std::scientific << std::setprecision(3) << c["max"].get<double>();
                } else {
                    os << "      n/a";
                }
                if (!c["gating"].get<bool>()) {
                    os << "  info\n";
                } else {
                    os << "  " << (c["pass"].get<bool>() ? "pass" : "FAIL") << "\n";
                }
            }
        }
        os << "verdict: " << agg.value("verdict", std::string("?")) << "\n";
    } else {
        os << "\n";
    }
    if (!report.message.empty()) os << report.message << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Entry point

namespace {

struct Options {
    double tol = 1e-8;
    int order = kDefaultJetOrder;
    std::string grid;
    std::uint64_t seed = 1;
    std::vector<double> rho{1.0};
    int jobs = 1;
    std::string out;
    std::vector<std::string> points;
    std::vector<std::string> expect;
    std::vector<std::string> params;
    std::string phi;
    std::string file;
    std::size_t samples = 30;
    bool samples_set = false;
    // curve
    std::string z0 = "0.5,0,0.2,0";
    std::string v0 = "1,0,0.5,0";
    double t_end = 1.0;
    int steps = 1000;
    bool identity_pair = false;
    // family
    std::string kind;
    std::optional<double> A, B, C, gamma, tau, rho_shift, eps;
    std::optional<std::string> W, F;
};

void add_common(CLI::App* sub, Options& o, bool with_file) {
    sub->add_option("--tol", o.tol, "relative tolerance")->capture_default_str();
    sub->add_option("--order", o.order, "jet order (4..8)")->capture_default_str();
    sub->add_option("--grid", o.grid, "N, N1xN2xN3xN4, optionally @lo:hi,lo:hi,lo:hi,lo:hi");
    sub->add_option("--seed", o.seed, "random seed")->capture_default_str();
    sub->add_option("--rho", o.rho, "comma list of rho values")->delimiter(',');
    sub->add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
    sub->add_option("--out", o.out, "write the JSON report here instead of standard output");
    sub->add_option("--point", o.points, "explicit point re1,im1,re2,im2 (repeatable)");
    sub->add_option("--expect", o.expect, "extra gating checks: einstein_defect, ricci_flat")->delimiter(',');
    if (with_file) {
        sub->add_option("file", o.file, "potential file");
        sub->add_option("--phi", o.phi, "inline potential expression instead of a file");
        sub->add_option("--param", o.params, "name=value binding (repeatable)");
    }
}

RunConfig make_config(const Options& o) {
    RunConfig cfg;
    cfg.tolerance = o.tol;
    cfg.order = o.order;
    if (!o.grid.empty()) cfg.grid = parse_grid(o.grid);
    for (const auto& p : o.points) cfg.points.push_back(parse_point(p));
    cfg.seed = o.seed;
    cfg.rho = o.rho;
    cfg.jobs = o.jobs;
    cfg.expect = o.expect;
    cfg.samples = o.samples;
    cfg.validate();
    return cfg;
}

Potential make_potential(const Options& o) {
    std::string text;
    if (!o.phi.empty()) {
        if (!o.file.empty()) throw std::invalid_argument("give either a potential file or --phi, not both");
        text = "phi = " + o.phi + "\n";
    } else {
        if (o.file.empty()) throw std::invalid_argument("missing potential file (or --phi)");
        std::ifstream in(o.file, std::ios::binary);
        if (!in) throw std::invalid_argument("cannot read '" + o.file + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    PotentialFile file = parse_potential_file(text);
    for (const auto& b : o.params) {
        const auto eq = b.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--param expects name=value");
        file.params.set(b.substr(0, eq), to_double(std::string_view(b).substr(eq + 1)));
    }
    return from_file(file);
}

Vec2 parse_vec(const std::string& s) {
    const ChartPoint p = parse_point(s);
    return {p.z1, p.z2};
}

int emit(const Report& rep, const Options& o, std::ostream& out, std::ostream& err) {
    const std::string text = rep.json.dump(2) + "\n";
    if (o.out.empty()) {
        out << text;
    } else {
        std::ofstream f(o.out, std::ios::binary);
        if (!f) {
            err << "error: cannot write '" << o.out << "'\n";
            return kExitFail;
        }
        f << text;
    }
    err << summary(rep);
    return rep.exit_code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"hkahler: H-projective Kahler verification engine", "hkahler"};
    app.require_subcommand(1);
    Options o;
    CLI::App* an = app.add_subcommand("analyze", "Kahler identities and curvature over a grid");
    CLI::App* hp = app.add_subcommand("hproject", "H-projective pair checks over a grid");
    CLI::App* cu = app.add_subcommand("curve", "geodesic integration and H-planarity");
    CLI::App* fa = app.add_subcommand("family", "targeted verification of a closed-form family");
    CLI::App* gr = app.add_subcommand("grid", "list grid points");
    add_common(an, o, true);
    add_common(hp, o, true);
    add_common(cu, o, true);
    add_common(fa, o, false);
    add_common(gr, o, true);
    cu->add_option("--z0", o.z0, "start point re1,im1,re2,im2")->capture_default_str();
    cu->add_option("--v0", o.v0, "initial velocity re1,im1,re2,im2")->capture_default_str();
    cu->add_option("--t-end", o.t_end, "integration time")->capture_default_str();
    cu->add_option("--steps", o.steps, "RK4 steps")->capture_default_str();
    cu->add_flag("--identity-pair", o.identity_pair, "use g' = g (test mode)");
    fa->add_option("kind", o.kind, "flat, equidistant, generalized-equidistant, ricci-flat, constant-hsc")->required();
    fa->add_option("--A", o.A);
    fa->add_option("--B", o.B);
    fa->add_option("--C", o.C);
    fa->add_option("--gamma", o.gamma);
    fa->add_option("--tau", o.tau);
    fa->add_option("--rho-shift", o.rho_shift);
    fa->add_option("--eps", o.eps);
    fa->add_option("--W", o.W, "W as an expression in x");
    fa->add_option("--F", o.F, "F as an expression in z2, zb2");
    fa->add_option("--samples", o.samples, "number of random admissible points")->capture_default_str();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitPass : kExitParse;
    }

    try {
        const RunConfig cfg = make_config(o);
        if (*an || *hp || *cu) {
            const Potential pot = make_potential(o);
            if (*an) return emit(analyze(pot, cfg), o, out, err);
            if (*hp) return emit(hproject(pot, cfg), o, out, err);
            CurveConfig cc;
            cc.z0 = parse_vec(o.z0);
            cc.v0 = parse_vec(o.v0);
            cc.t_end = o.t_end;
            cc.steps = o.steps;
            cc.identity_pair = o.identity_pair;
            return emit(curve(pot, cfg, cc), o, out, err);
        }
        if (*fa) {
            const auto kind = parse_family_kind(o.kind);
            if (!kind) {
                err << "error: unknown family kind '" << o.kind << "'\n";
                return kExitInvalidFamily;
            }
            FamilySpec spec;
            spec.kind = *kind;
            const std::pair<const char*, const std::optional<double>*> named[] = {
                {"A", &o.A}, {"B", &o.B}, {"C", &o.C}, {"gamma", &o.gamma}, {"tau", &o.tau},
                {"rho_shift", &o.rho_shift}, {"eps", &o.eps}};
            for (const auto& [name, v] : named) {
                if (*v) spec.params.set(name, **v);
            }
            spec.w_expr = o.W;
            spec.f_expr = o.F;
            return emit(family(spec, cfg), o, out, err);
        }
        std::optional<Potential> pot;
        if (!o.file.empty() || !o.phi.empty()) pot = make_potential(o);
        return emit(grid(pot, cfg), o, out, err);
    } catch (const ParseError& e) {
        err << "error: " << (o.file.empty() ? std::string("--phi") : o.file) << ": " << e.what() << "\n";
        return kExitParse;
    } catch (const BindError& e) {
        err << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const FamilyError& e) {
        err << "error: invalid family: " << e.what() << "\n";
        return kExitInvalidFamily;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFail;
    }
}

}  // namespace hkahler::cli
