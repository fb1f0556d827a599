#include "potrec/experiments.hpp"

#include <fftw3.h>

#include <Eigen/Core>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "potrec/errors.hpp"
#include "potrec/forward_dn.hpp"
#include "potrec/kernels.hpp"
#include "potrec/scattering.hpp"
#include "potrec/spectral.hpp"

namespace potrec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

bool pow2(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

[[noreturn]] void bad(const std::string& field, const std::string& why) { throw ConfigError(field + ": " + why); }

template <class T>
T value_or(const json& j, const char* key, T def, const std::string& path) {
    if (!j.contains(key) || j.at(key).is_null()) return def;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        bad(path + key, "has the wrong type");
    }
}

Point point_from(const json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        bad(field, "expected [x1, x2]");
    return {j[0].get<double>(), j[1].get<double>()};
}

json point_json(Point p) { return json::array({p.x1, p.x2}); }

std::optional<double> opt(const json& j, const char* key, const std::string& path) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_number()) bad(path + key, "expected a number");
    return j.at(key).get<double>();
}

Orientation orientation_from(const std::string& s, const std::string& field) {
    if (s == "unrotated") return Orientation::unrotated;
    if (s == "rotated45") return Orientation::rotated45;
    bad(field, "expected unrotated or rotated45");
}

std::string to_string(Orientation o) { return o == Orientation::unrotated ? "unrotated" : "rotated45"; }

PotentialSpec potential_from(const json& j, const Square& omega, const std::string& path) {
    PotentialSpec s;
    s.omega = omega;
    if (!j.is_object()) bad(path, "expected an object");
    const std::string kind = value_or<std::string>(j, "kind", "smooth_bump", path + ".");
    try {
        s.kind = potential_kind_from(kind);
    } catch (const std::exception&) {
        bad(path + ".kind", "unknown potential kind '" + kind + "'");
    }
    const std::string p = path + ".";
    if (j.contains("bumps")) {
        if (!j["bumps"].is_array()) bad(p + "bumps", "expected a list");
        for (std::size_t i = 0; i < j["bumps"].size(); ++i) {
            const auto& b = j["bumps"][i];
            const std::string bp = p + "bumps[" + std::to_string(i) + "].";
            Bump bump;
            if (b.contains("center")) bump.center = point_from(b["center"], bp + "center");
            bump.radius = value_or(b, "radius", bump.radius, bp);
            bump.amplitude = value_or(b, "amplitude", bump.amplitude, bp);
            if (!(bump.radius > 0.0)) bad(bp + "radius", "must be positive");
            s.bumps.push_back(bump);
        }
    }
    if (j.contains("cones")) {
        if (!j["cones"].is_array()) bad(p + "cones", "expected a list");
        for (std::size_t i = 0; i < j["cones"].size(); ++i) {
            const auto& b = j["cones"][i];
            const std::string bp = p + "cones[" + std::to_string(i) + "].";
            ConeBump c;
            if (b.contains("center")) c.center = point_from(b["center"], bp + "center");
            c.slope_radius = value_or(b, "slope_radius", c.slope_radius, bp);
            c.width = value_or(b, "width", c.width, bp);
            c.amplitude = value_or(b, "amplitude", c.amplitude, bp);
            if (!(c.slope_radius > 0.0)) bad(bp + "slope_radius", "must be positive");
            if (!(c.width > 0.0)) bad(bp + "width", "must be positive");
            s.cones.push_back(c);
        }
    }
    if (j.contains("rough")) {
        const auto& r = j["rough"];
        const std::string rp = p + "rough.";
        s.rough.s = value_or(r, "s", s.rough.s, rp);
        s.rough.band = value_or(r, "band", s.rough.band, rp);
        s.rough.amplitude = value_or(r, "amplitude", s.rough.amplitude, rp);
        s.rough.seed = value_or<std::uint64_t>(r, "seed", s.rough.seed, rp);
        if (r.contains("center")) s.rough.center = point_from(r["center"], rp + "center");
        s.rough.radius = value_or(r, "radius", s.rough.radius, rp);
        if (!(s.rough.s > 0.0 && s.rough.s < 2.0)) bad(rp + "s", "must lie in (0, 2)");
    }
    if (j.contains("counterexample")) {
        const auto& c = j["counterexample"];
        const std::string cp = p + "counterexample.";
        s.counter.beta = value_or(c, "beta", s.counter.beta, cp);
        s.counter.epsilon = value_or(c, "epsilon", s.counter.epsilon, cp);
        s.counter.j_min = value_or(c, "j_min", s.counter.j_min, cp);
        s.counter.j_max = value_or(c, "j_max", s.counter.j_max, cp);
        s.counter.orientation =
            orientation_from(value_or<std::string>(c, "orientation", "unrotated", cp), cp + "orientation");
        s.counter.single_sign = value_or(c, "single_sign", 0, cp);
        s.counter.j_single = value_or(c, "j_single", 0, cp);
        if (!(s.counter.beta > 0.5 && s.counter.beta < 1.0)) bad(cp + "beta", "must lie in (1/2, 1)");
        if (s.counter.j_min < 2 || s.counter.j_max < s.counter.j_min) bad(cp + "j_max", "need 2 <= j_min <= j_max");
    }
    if (s.kind == PotentialKind::shifted) {
        s.kappa = value_or(j, "kappa", 0.0, p);
        if (!j.contains("base")) bad(p + "base", "shifted potential needs a base");
        s.base.push_back(potential_from(j["base"], omega, p + "base"));
    }
    if (s.kind == PotentialKind::smooth_bump && j.contains("bumps") == false) s.bumps.push_back(Bump{});
    if (s.kind == PotentialKind::cone && s.cones.empty()) s.cones.push_back(ConeBump{});
    return s;
}

json potential_json(const PotentialSpec& s) {
    json j;
    j["kind"] = to_string(s.kind);
    j["bumps"] = json::array();
    for (const auto& b : s.bumps)
        j["bumps"].push_back({{"center", point_json(b.center)}, {"radius", b.radius}, {"amplitude", b.amplitude}});
    j["cones"] = json::array();
    for (const auto& c : s.cones)
        j["cones"].push_back({{"center", point_json(c.center)},
                              {"slope_radius", c.slope_radius},
                              {"width", c.width},
                              {"amplitude", c.amplitude}});
    j["rough"] = {{"s", s.rough.s},           {"band", s.rough.band},
                  {"amplitude", s.rough.amplitude}, {"seed", s.rough.seed},
                  {"center", point_json(s.rough.center)}, {"radius", s.rough.radius}};
    j["counterexample"] = {{"beta", s.counter.beta},
                           {"epsilon", s.counter.epsilon},
                           {"j_min", s.counter.j_min},
                           {"j_max", s.counter.j_max},
                           {"orientation", to_string(s.counter.orientation)},
                           {"single_sign", s.counter.single_sign},
                           {"j_single", s.counter.j_single}};
    if (s.kind == PotentialKind::shifted) {
        j["kappa"] = s.kappa;
        if (!s.base.empty()) j["base"] = potential_json(s.base.front());
    }
    return j;
}

ExperimentKind kind_from(const std::string& s) {
    for (auto k : {ExperimentKind::recover_smooth, ExperimentKind::recover_rough, ExperimentKind::rate_study,
                   ExperimentKind::divergence_study, ExperimentKind::scattering_roundtrip,
                   ExperimentKind::boundary_recovery_check})
        if (to_string(k) == s) return k;
    bad("experiment", "unknown experiment '" + s + "'");
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string timestamp() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

// Tracks written files so a failed stage can remove them.
struct ArtifactSet {
    fs::path dir;
    std::vector<fs::path> files;
    fs::path add(const std::string& name) {
        files.push_back(dir / name);
        return files.back();
    }
    void remove_all() {
        std::error_code ec;
        for (const auto& f : files) fs::remove(f, ec);
    }
};

std::ofstream open_csv(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << std::setprecision(17);
    return os;
}

Grid cell_grid(const ExperimentConfig& c) { return Grid::centered(c.grid_n, c.grid_side, {}); }

std::vector<double> k_values(const ExperimentConfig& c, const Grid& g) {
    if (!c.k_schedule.empty()) return c.k_schedule;
    return dyadic_schedule(c.k_exp_lo, c.k_exp_hi, g);
}

std::vector<Point> recovery_points(const ExperimentConfig& c) {
    if (!c.points.empty()) return c.points;
    return {c.potential.omega.center};
}

void check(RunOutcome& out, bool ok, const std::string& what) {
    out.manifest["assertions"].push_back({{"check", what}, {"passed", ok}});
    if (!ok) {
        out.passed = false;
        out.failures.push_back(what);
    }
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

// --- pipelines ------------------------------------------------------------------------------

void run_recover(const ExperimentConfig& c, RunOutcome& out, ArtifactSet& art, json& times) {
    const Grid g = cell_grid(c);
    auto t0 = std::chrono::steady_clock::now();
    const GridField v = realize(c.potential, g);
    const BoundaryMesh mesh = BoundaryMesh::square(c.potential.omega, c.boundary_nodes);
    const DNMatrix dn_v = dn_matrix(v, mesh, c.interior_n);
    const DNMatrix dn_0 = dn_matrix(GridField(g), mesh, c.interior_n);
    times["forward_dn"] = elapsed(t0);
    write_dn_matrix(art.add("dn_v.prdn").string(), dn_v);
    write_dn_matrix(art.add("dn_0.prdn").string(), dn_0);

    t0 = std::chrono::steady_clock::now();
    RecoveryConfig rc;
    rc.cell_n = c.grid_n;
    rc.cell_side = c.grid_side;
    rc.tol_abs = c.tol_abs;
    rc.tol_rel = c.tol_rel;
    const std::vector<double> ks = k_values(c, g);
    if (ks.empty()) throw PreconditionError("no k in the schedule is resolved by the grid");
    std::vector<RecoveryResult> results;
    json pts = json::array();
    for (const Point x : recovery_points(c)) {
        RecoveryResult r = recover_point(dn_v, dn_0, x, ks, rc);
        r.reference = interpolate_at(v, {x}, 4)[0];
        const cplx last = r.values.back();
        const double abs_err = std::abs(last - *r.reference);
        const double ref = std::abs(*r.reference);
        json by_k = json::array();
        for (const cplx z : r.values) by_k.push_back({z.real(), z.imag()});
        pts.push_back({{"point", point_json(x)},
                       {"reference", {r.reference->real(), r.reference->imag()}},
                       {"values", by_k},
                       {"final", {last.real(), last.imag()}},
                       {"abs_error", abs_err},
                       {"rel_error", ref > 0 ? json(abs_err / ref) : json(nullptr)},
                       {"converged", r.converged}});
        if (ref > 0 && c.checks.max_rel_error)
            check(out, abs_err <= *c.checks.max_rel_error * ref,
                  "relative error at (" + fmt(x.x1) + ", " + fmt(x.x2) + ") " + fmt(abs_err / ref) + " <= " +
                      fmt(*c.checks.max_rel_error));
        if (ref == 0 && c.checks.max_abs_error)
            check(out, abs_err <= *c.checks.max_abs_error,
                  "absolute error at (" + fmt(x.x1) + ", " + fmt(x.x2) + ") " + fmt(abs_err) + " <= " +
                      fmt(*c.checks.max_abs_error));
        results.push_back(std::move(r));
    }
    times["recovery"] = elapsed(t0);
    write_recovery_csv(art.add("recovery.csv").string(), results);
    out.manifest["results"] = {{"k_schedule", ks}, {"points", pts}};
    out.manifest["artifacts"]["recovery_csv"] = "recovery.csv";
}

void run_rate(const ExperimentConfig& c, RunOutcome& out, ArtifactSet& art, json& times) {
    const Grid g = cell_grid(c);
    const auto t0 = std::chrono::steady_clock::now();
    const GridField v = realize(c.potential, g);
    std::vector<Point> pts = c.points;
    if (pts.empty()) pts.push_back(c.potential.omega.center);
    std::vector<cplx> ref = interpolate_at(v, pts, 4);
    const std::vector<double> ks = k_values(c, g);
    std::vector<double> errs;
    auto os = open_csv(art.add("rate.csv"));
    os << "k,error\n";
    for (const double k : ks) {
        const GridField u = nonelliptic_propagate(v, 1.0 / k, Coordinates::axis);
        const CVec at = interpolate_at(u, pts, 4);
        double e = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) e = std::max(e, std::abs(at[i] - ref[i]));
        errs.push_back(e);
        os << k << ',' << e << '\n';
    }
    times["rate"] = elapsed(t0);
    const RateFit f = fit_rate(ks, errs);
    out.manifest["results"] = {{"k_schedule", ks},
                               {"errors", errs},
                               {"fitted_exponent", f.slope},
                               {"ci95", {f.ci_low, f.ci_high}}};
    out.manifest["artifacts"]["rate_csv"] = "rate.csv";
    if (c.checks.rate_low && c.checks.rate_high)
        check(out, f.slope >= *c.checks.rate_low && f.slope <= *c.checks.rate_high,
              "fitted exponent " + fmt(f.slope) + " in [" + fmt(*c.checks.rate_low) + ", " +
                  fmt(*c.checks.rate_high) + "]");
}

void run_divergence(const ExperimentConfig& c, RunOutcome& out, ArtifactSet& art, json& times) {
    const auto t0 = std::chrono::steady_clock::now();
    const DivergenceReport rep = divergence_experiment(c.potential, c.divergence);
    times["divergence"] = elapsed(t0);
    {
        auto os = open_csv(art.add("divergence_scales.csv"));
        os << "j,single_min,single_max,tail_max,total_min,total_max\n";
        for (std::size_t i = 0; i < rep.j.size(); ++i)
            os << rep.j[i] << ',' << rep.single_min[i] << ',' << rep.single_max[i] << ',' << rep.tail_max[i] << ','
               << rep.total_min[i] << ',' << rep.total_max[i] << '\n';
    }
    {
        auto os = open_csv(art.add("divergence_map.csv"));
        os << "x1,x2,tail_error,divergent\n";
        for (std::size_t i = 0; i < rep.map.points.size(); ++i)
            os << rep.map.points[i].x1 << ',' << rep.map.points[i].x2 << ',' << rep.map.tail_error[i] << ','
               << (rep.map.mask[i] ? 1 : 0) << '\n';
    }
    const auto& cx = c.potential.counter;
    out.manifest["results"] = {{"growth_exponent", rep.growth.slope},
                               {"growth_ci95", {rep.growth.ci_low, rep.growth.ci_high}},
                               {"tail_exponent", rep.tail.slope},
                               {"tail_ci95", {rep.tail.ci_low, rep.tail.ci_high}},
                               {"mask_threshold", rep.map.threshold},
                               {"area_fraction", rep.map.area_fraction},
                               {"samples", {c.divergence.samples_x1, c.divergence.samples_x2}}};
    out.manifest["artifacts"]["scales_csv"] = "divergence_scales.csv";
    out.manifest["artifacts"]["map_csv"] = "divergence_map.csv";
    if (c.checks.growth_margin)
        check(out, rep.growth.slope >= (1.0 - cx.beta) - *c.checks.growth_margin,
              "single-mode growth exponent " + fmt(rep.growth.slope) + " >= " +
                  fmt((1.0 - cx.beta) - *c.checks.growth_margin));
    if (c.checks.tail_margin)
        check(out, rep.tail.slope <= cx.epsilon + *c.checks.tail_margin,
              "off-mode tail exponent " + fmt(rep.tail.slope) + " <= " + fmt(cx.epsilon + *c.checks.tail_margin));
    if (c.checks.min_area_fraction)
        check(out, rep.map.area_fraction >= *c.checks.min_area_fraction,
              "divergence-mask area fraction " + fmt(rep.map.area_fraction) + " >= " +
                  fmt(*c.checks.min_area_fraction));
}

void run_boundary(const ExperimentConfig& c, RunOutcome& out, ArtifactSet& art, json& times) {
    const Grid g = cell_grid(c);
    auto t0 = std::chrono::steady_clock::now();
    const GridField v = realize(c.potential, g);
    const BoundaryMesh mesh = BoundaryMesh::square(c.potential.omega, c.boundary_nodes);
    const DNMatrix diff = dn_matrix(v, mesh, c.interior_n) - dn_matrix(GridField(g), mesh, c.interior_n);
    times["forward_dn"] = elapsed(t0);
    t0 = std::chrono::steady_clock::now();
    const CellLayout cell(g, c.potential.omega);
    const InverseDerivatives inv(cell);
    auto os = open_csv(art.add("trace.csv"));
    os << "x1,x2,k,node,arc,re_recovered,im_recovered,re_oracle,im_oracle\n";
    json rows = json::array();
    const std::vector<double> ks = k_values(c, g);
    for (const Point x : recovery_points(c))
        for (const double k : ks) {
            const PhaseParams p{k, x};
            const TraceRecovery tr = recover_boundary_trace(diff, p, cell, inv);
            const BukhgeimSolution sol = solve_remainder(cell, inv, v, p, c.solver_tol);
            const CVec wb = interpolate_at(sol.w, mesh.nodes);
            const CVec e = phase_trace(p, mesh);
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < mesh.size(); ++i) {
                const cplx oracle = e[i] * (1.0 + wb[i]);
                num += mesh.weights[i] * std::norm(tr.trace.values[i] - oracle);
                den += mesh.weights[i] * std::norm(oracle);
                os << x.x1 << ',' << x.x2 << ',' << k << ',' << i << ',' << mesh.spacing() * i << ','
                   << tr.trace.values[i].real() << ',' << tr.trace.values[i].imag() << ',' << oracle.real() << ','
                   << oracle.imag() << '\n';
            }
            const double rel = std::sqrt(num / den);
            rows.push_back({{"point", point_json(x)},
                            {"k", k},
                            {"rel_l2_error", rel},
                            {"condition", tr.condition},
                            {"spectral_radius", tr.spectral_radius}});
            if (c.checks.max_trace_error)
                check(out, rel <= *c.checks.max_trace_error,
                      "trace error at k = " + fmt(k) + " " + fmt(rel) + " <= " + fmt(*c.checks.max_trace_error));
        }
    times["trace_recovery"] = elapsed(t0);
    out.manifest["results"] = {{"traces", rows}};
    out.manifest["artifacts"]["trace_csv"] = "trace.csv";
}

void run_scattering(const ExperimentConfig& c, RunOutcome& out, ArtifactSet& art, json& times) {
    const Grid g = cell_grid(c);
    const WaveNumber kappa(c.kappa);
    auto t0 = std::chrono::steady_clock::now();
    const GridField v = realize(c.potential, g);
    const AmplitudeTable amp = amplitude(v, kappa, c.angular_n, c.solver_tol);
    times["amplitude"] = elapsed(t0);
    write_amplitude_table(art.add("amplitude.prat").string(), amp);
    {
        auto os = open_csv(art.add("amplitude_coeffs.csv"));
        os << "n,m,re,im\n";
        for (int n = -amp.order; n <= amp.order; ++n)
            for (int m = -amp.order; m <= amp.order; ++m)
                os << n << ',' << m << ',' << amp.coeff(n, m).real() << ',' << amp.coeff(n, m).imag() << '\n';
    }
    t0 = std::chrono::steady_clock::now();
    const BoundaryMesh mesh = BoundaryMesh::square(c.potential.omega, c.boundary_nodes);
    const LsOperator op(v, kappa);
    const SingleLayer s0 = single_layer(LayerKernel::free, mesh, kappa);
    const SingleLayer sv = single_layer(LayerKernel::potential, mesh, kappa, &amp, op.support_radius());
    GridField shift(g);
    for (auto& z : shift.values()) z = -c.kappa * c.kappa;
    const DNMatrix dn_shift = dn_matrix(shift, mesh, c.interior_n);
    const NachmanResult nr = nachman_dn(sv, s0, dn_shift);
    times["nachman"] = elapsed(t0);
    t0 = std::chrono::steady_clock::now();
    const DNMatrix direct = dn_matrix(v + shift, mesh, c.interior_n);
    times["direct_dn"] = elapsed(t0);
    write_dn_matrix(art.add("nachman_dn.prdn").string(), nr.dn);
    write_dn_matrix(art.add("direct_dn.prdn").string(), direct);
    Eigen::BDCSVD<CMat> s1(nr.dn.entries - direct.entries), s2(direct.entries);
    const double rel = s1.singularValues()[0] / s2.singularValues()[0];
    out.manifest["results"] = {{"amplitude_order", amp.order},
                               {"support_radius", op.support_radius()},
                               {"cond_single_layer_v", nr.cond_v},
                               {"cond_single_layer_0", nr.cond_0},
                               {"inverse_residual", nr.inverse_residual},
                               {"dn_rel_error", rel}};
    out.manifest["artifacts"]["amplitude"] = "amplitude.prat";
    out.manifest["artifacts"]["coeffs_csv"] = "amplitude_coeffs.csv";
    out.manifest["artifacts"]["nachman_dn"] = "nachman_dn.prdn";
    out.manifest["artifacts"]["direct_dn"] = "direct_dn.prdn";
    if (c.checks.max_dn_error)
        check(out, rel <= *c.checks.max_dn_error,
              "Nachman DN vs direct DN " + fmt(rel) + " <= " + fmt(*c.checks.max_dn_error));
}

}  // namespace

std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::recover_smooth: return "recover_smooth";
        case ExperimentKind::recover_rough: return "recover_rough";
        case ExperimentKind::rate_study: return "rate_study";
        case ExperimentKind::divergence_study: return "divergence_study";
        case ExperimentKind::scattering_roundtrip: return "scattering_roundtrip";
        case ExperimentKind::boundary_recovery_check: return "boundary_recovery_check";
    }
    return "unknown";
}

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) bad("config", "expected a JSON object");
    ExperimentConfig c;
    if (!j.contains("experiment") || !j["experiment"].is_string()) bad("experiment", "required string");
    c.kind = kind_from(j["experiment"].get<std::string>());
    c.name = value_or<std::string>(j, "name", to_string(c.kind), "");
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        c.grid_n = value_or<std::size_t>(g, "n", c.grid_n, "grid.");
        c.grid_side = value_or(g, "side", c.grid_side, "grid.");
    }
    if (!pow2(c.grid_n) || c.grid_n < 8) bad("grid.n", "must be a power of two >= 8");
    if (!(c.grid_side > 0.0)) bad("grid.side", "must be positive");
    if (j.contains("mesh")) {
        const auto& m = j["mesh"];
        c.boundary_nodes = value_or<std::size_t>(m, "boundary_nodes", c.boundary_nodes, "mesh.");
        c.interior_n = value_or<std::size_t>(m, "interior_n", c.interior_n, "mesh.");
    }
    if (!pow2(c.boundary_nodes) || c.boundary_nodes < 4) bad("mesh.boundary_nodes", "must be a power of two >= 4");
    if (!pow2(c.interior_n)) bad("mesh.interior_n", "must be a power of two");
    Square omega;
    if (j.contains("omega")) {
        if (j["omega"].contains("center")) omega.center = point_from(j["omega"]["center"], "omega.center");
        omega.side = value_or(j["omega"], "side", omega.side, "omega.");
    }
    if (!(omega.side > 0.0)) bad("omega.side", "must be positive");
    if (std::abs(omega.center.x1) + omega.half() >= 0.5 * c.grid_side ||
        std::abs(omega.center.x2) + omega.half() >= 0.5 * c.grid_side)
        bad("omega", "square must lie strictly inside the grid cell");
    c.potential = potential_from(j.value("potential", json::object()), omega, "potential");
    if (j.contains("k")) {
        const auto& k = j["k"];
        if (k.contains("schedule")) {
            try {
                c.k_schedule = k["schedule"].get<std::vector<double>>();
            } catch (const json::exception&) {
                bad("k.schedule", "expected a list of numbers");
            }
            for (std::size_t i = 0; i < c.k_schedule.size(); ++i) {
                if (!(c.k_schedule[i] > 0.0)) bad("k.schedule", "entries must be positive");
                if (i > 0 && !(c.k_schedule[i] > c.k_schedule[i - 1])) bad("k.schedule", "must be strictly increasing");
            }
        }
        if (k.contains("dyadic")) {
            if (!k["dyadic"].is_array() || k["dyadic"].size() != 2) bad("k.dyadic", "expected [lo, hi] exponents");
            c.k_exp_lo = k["dyadic"][0].get<int>();
            c.k_exp_hi = k["dyadic"][1].get<int>();
            if (c.k_exp_lo < 0 || c.k_exp_hi < c.k_exp_lo) bad("k.dyadic", "need 0 <= lo <= hi");
        }
    }
    if (j.contains("points")) {
        if (!j["points"].is_array()) bad("points", "expected a list of [x1, x2]");
        for (std::size_t i = 0; i < j["points"].size(); ++i)
            c.points.push_back(point_from(j["points"][i], "points[" + std::to_string(i) + "]"));
    }
    const bool recovery = c.kind == ExperimentKind::recover_smooth || c.kind == ExperimentKind::recover_rough ||
                          c.kind == ExperimentKind::boundary_recovery_check;
    if (recovery)
        for (std::size_t i = 0; i < c.points.size(); ++i)
            if (!omega.contains(c.points[i])) bad("points[" + std::to_string(i) + "]", "must lie inside omega");
    c.kappa = value_or(j, "kappa", c.kappa, "");
    if (!(c.kappa > 0.0)) bad("kappa", "must be positive");
    c.angular_n = value_or<std::size_t>(j, "angular_n", c.angular_n, "");
    if (!pow2(c.angular_n) || c.angular_n < 4) bad("angular_n", "must be a power of two >= 4");
    if (j.contains("tolerances")) {
        const auto& t = j["tolerances"];
        c.tol_abs = value_or(t, "abs", c.tol_abs, "tolerances.");
        c.tol_rel = value_or(t, "rel", c.tol_rel, "tolerances.");
        c.solver_tol = value_or(t, "solver", c.solver_tol, "tolerances.");
        if (!(c.solver_tol > 0.0)) bad("tolerances.solver", "must be positive");
    }
    if (j.contains("divergence")) {
        const auto& d = j["divergence"];
        c.divergence.j_lo = value_or(d, "j_lo", c.divergence.j_lo, "divergence.");
        c.divergence.j_hi = value_or(d, "j_hi", c.divergence.j_hi, "divergence.");
        c.divergence.samples_x1 = value_or<std::size_t>(d, "samples_x1", c.divergence.samples_x1, "divergence.");
        c.divergence.samples_x2 = value_or<std::size_t>(d, "samples_x2", c.divergence.samples_x2, "divergence.");
        c.divergence.threshold_factor = value_or(d, "threshold_factor", c.divergence.threshold_factor, "divergence.");
        c.divergence.quad_nodes = value_or(d, "quad_nodes", c.divergence.quad_nodes, "divergence.");
        if (c.divergence.j_hi < c.divergence.j_lo) bad("divergence.j_hi", "must be >= j_lo");
    }
    if (c.kind == ExperimentKind::divergence_study && c.potential.kind != PotentialKind::counterexample)
        bad("potential.kind", "divergence_study needs the counterexample potential");
    if (j.contains("assert")) {
        const auto& a = j["assert"];
        c.checks.max_rel_error = opt(a, "max_rel_error", "assert.");
        c.checks.max_abs_error = opt(a, "max_abs_error", "assert.");
        if (a.contains("rate_bounds")) {
            if (!a["rate_bounds"].is_array() || a["rate_bounds"].size() != 2) bad("assert.rate_bounds", "expected [lo, hi]");
            c.checks.rate_low = a["rate_bounds"][0].get<double>();
            c.checks.rate_high = a["rate_bounds"][1].get<double>();
        }
        c.checks.growth_margin = opt(a, "growth_margin", "assert.");
        c.checks.tail_margin = opt(a, "tail_margin", "assert.");
        c.checks.min_area_fraction = opt(a, "min_area_fraction", "assert.");
        c.checks.max_trace_error = opt(a, "max_trace_error", "assert.");
        c.checks.max_dn_error = opt(a, "max_dn_error", "assert.");
    }
    c.seed = value_or<std::uint64_t>(j, "seed", c.seed, "");
    c.potential.rough.seed = j.contains("potential") && j["potential"].contains("rough") &&
                                     j["potential"]["rough"].contains("seed")
                                 ? c.potential.rough.seed
                                 : c.seed;
    c.output_dir = value_or<std::string>(j, "output_dir", "", "");
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = to_string(c.kind);
    j["name"] = c.name;
    j["grid"] = {{"n", c.grid_n}, {"side", c.grid_side}};
    j["mesh"] = {{"boundary_nodes", c.boundary_nodes}, {"interior_n", c.interior_n}};
    j["omega"] = {{"center", point_json(c.potential.omega.center)}, {"side", c.potential.omega.side}};
    j["potential"] = potential_json(c.potential);
    j["k"] = {{"schedule", c.k_schedule}, {"dyadic", {c.k_exp_lo, c.k_exp_hi}}};
    j["points"] = json::array();
    for (const auto& p : c.points) j["points"].push_back(point_json(p));
    j["kappa"] = c.kappa;
    j["angular_n"] = c.angular_n;
    j["tolerances"] = {{"abs", c.tol_abs}, {"rel", c.tol_rel}, {"solver", c.solver_tol}};
    j["divergence"] = {{"j_lo", c.divergence.j_lo},
                       {"j_hi", c.divergence.j_hi},
                       {"samples_x1", c.divergence.samples_x1},
                       {"samples_x2", c.divergence.samples_x2},
                       {"threshold_factor", c.divergence.threshold_factor},
                       {"quad_nodes", c.divergence.quad_nodes}};
    json a = json::object();
    auto put = [&](const char* k, const std::optional<double>& v) { a[k] = v ? json(*v) : json(nullptr); };
    put("max_rel_error", c.checks.max_rel_error);
    put("max_abs_error", c.checks.max_abs_error);
    if (c.checks.rate_low && c.checks.rate_high) a["rate_bounds"] = json({*c.checks.rate_low, *c.checks.rate_high});
    put("growth_margin", c.checks.growth_margin);
    put("tail_margin", c.checks.tail_margin);
    put("min_area_fraction", c.checks.min_area_fraction);
    put("max_trace_error", c.checks.max_trace_error);
    put("max_dn_error", c.checks.max_dn_error);
    j["assert"] = a;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    return j;
}

RunOutcome run_experiment(const ExperimentConfig& c, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    RunOutcome out;
    ArtifactSet art{out_dir, {}};
    out.manifest["config"] = to_json(c);
    out.manifest["versions"] = {{"potrec", kVersion},
                                {"fftw", std::string(fftw_version)},
                                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                              std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                              std::to_string(EIGEN_MINOR_VERSION)},
                                {"threads", kernels::max_threads()}};
    out.manifest["started_at"] = timestamp();
    out.manifest["assertions"] = json::array();
    out.manifest["artifacts"] = json::object();
    json times = json::object();
    const auto t0 = std::chrono::steady_clock::now();
    try {
        switch (c.kind) {
            case ExperimentKind::recover_smooth:
            case ExperimentKind::recover_rough: run_recover(c, out, art, times); break;
            case ExperimentKind::rate_study: run_rate(c, out, art, times); break;
            case ExperimentKind::divergence_study: run_divergence(c, out, art, times); break;
            case ExperimentKind::boundary_recovery_check: run_boundary(c, out, art, times); break;
            case ExperimentKind::scattering_roundtrip: run_scattering(c, out, art, times); break;
        }
    } catch (...) {
        art.remove_all();
        throw;
    }
    times["total"] = elapsed(t0);
    out.manifest["wall_seconds"] = times;
    out.manifest["passed"] = out.passed;
    out.manifest_path = out_dir / "manifest.json";
    std::ofstream os(out.manifest_path);
    os << out.manifest.dump(2) << '\n';
    return out;
}

// --- plot data ------------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream is(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

std::vector<fs::path> emit_plot_data(const fs::path& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is) throw ConfigError("manifest: cannot open " + manifest_path.string());
    json m;
    try {
        m = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
    const fs::path dir = manifest_path.parent_path();
    const json arts = m.value("artifacts", json::object());
    std::vector<std::string> missing;
    for (const auto& [key, name] : arts.items())
        if (!fs::exists(dir / name.get<std::string>())) missing.push_back(name.get<std::string>());
    if (!missing.empty()) {
        std::string list;
        for (const auto& f : missing) list += (list.empty() ? "" : ", ") + f;
        throw ConfigError("missing artifacts: " + list);
    }
    const std::string kind = m.at("config").at("experiment").get<std::string>();
    std::vector<fs::path> written;
    auto table = [&](const std::string& name) {
        written.push_back(dir / name);
        std::ofstream os(written.back());
        os << std::setprecision(17);
        return os;
    };
    if (kind == "rate_study") {
        auto os = table("plot_rate_loglog.tsv");
        os << "log_k\tlog_error\n";
        for (const auto& r : read_csv(dir / arts.at("rate_csv").get<std::string>()))
            os << std::log(std::stod(r[0])) << '\t' << std::log(std::stod(r[1])) << '\n';
    } else if (kind == "recover_smooth" || kind == "recover_rough") {
        auto os = table("plot_error_vs_k.tsv");
        os << "x1\tx2\tlog_k\tlog_error\n";
        for (const auto& r : read_csv(dir / arts.at("recovery_csv").get<std::string>()))
            if (r[5] != "nan" && std::stod(r[5]) > 0)
                os << r[0] << '\t' << r[1] << '\t' << std::log(std::stod(r[2])) << '\t' << std::log(std::stod(r[5]))
                   << '\n';
    } else if (kind == "divergence_study") {
        auto os = table("plot_divergence_mask.tsv");
        const auto rows = read_csv(dir / arts.at("map_csv").get<std::string>());
        const std::size_t nx = m["results"]["samples"][0].get<std::size_t>();
        const std::size_t ny = m["results"]["samples"][1].get<std::size_t>();
        os << "# rows over x1 samples, columns over x2 samples; 1 marks a divergent point\n";
        for (std::size_t a = 0; a < nx && a * ny < rows.size(); ++a) {
            for (std::size_t b = 0; b < ny; ++b) os << (b ? "\t" : "") << rows[a * ny + b][3];
            os << '\n';
        }
    } else if (kind == "boundary_recovery_check") {
        auto os = table("plot_trace_comparison.tsv");
        os << "k\tarc\tre_recovered\tim_recovered\tre_oracle\tim_oracle\n";
        for (const auto& r : read_csv(dir / arts.at("trace_csv").get<std::string>()))
            os << r[2] << '\t' << r[4] << '\t' << r[5] << '\t' << r[6] << '\t' << r[7] << '\t' << r[8] << '\n';
    } else if (kind == "scattering_roundtrip") {
        auto os = table("plot_amplitude_coeffs.tsv");
        os << "n\tm\tabs\n";
        for (const auto& r : read_csv(dir / arts.at("coeffs_csv").get<std::string>()))
            os << r[0] << '\t' << r[1] << '\t' << std::hypot(std::stod(r[2]), std::stod(r[3])) << '\n';
    }
    return written;
}

}  // namespace potrec
