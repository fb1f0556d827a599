#include "potrec/bukhgeim.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "potrec/errors.hpp"
#include "potrec/spectral.hpp"

namespace potrec {

void check_phase_resolution(const PhaseParams& p, const Grid& g) {
    const std::size_t need = required_points(p.k, g);
    if (g.n() < need)
        throw PreconditionError("grid of " + std::to_string(g.n()) + " points does not resolve k = " +
                                std::to_string(p.k) + "; need n >= " + std::to_string(need));
}

cplx phase_at(const PhaseParams& p, Point z) {
    const cplx d(z.x1 - p.x.x1, z.x2 - p.x.x2);
    return p.k / 8.0 * d * d;
}

GridField phase_field(const PhaseParams& p, const Grid& g) {
    check_phase_resolution(p, g);
    return GridField::sample(g, [&](double a, double b) { return phase_at(p, {a, b}); });
}

GridField phase_sum_field(const PhaseParams& p, const Grid& g) {
    check_phase_resolution(p, g);
    return GridField::sample(g, [&](double a, double b) -> cplx {
        const double u = a - p.x.x1, w = b - p.x.x2;
        return p.k / 4.0 * (u * u - w * w);
    });
}

namespace {
GridField modulation_field(const PhaseParams& p, const Grid& g, int sign) {
    return GridField::sample(g, [&](double a, double b) -> cplx {
        const double u = a - p.x.x1, w = b - p.x.x2;
        return std::polar(1.0, sign * p.k / 4.0 * (u * u - w * w));
    });
}
}  // namespace

GridField modulate(const GridField& f, const PhaseParams& p, int sign, const GridField& q_mask) {
    if (sign != 1 && sign != -1) throw DomainError("modulation sign must be +1 or -1");
    check_phase_resolution(p, f.grid());
    GridField out = modulation_field(p, f.grid(), sign);
    for (std::size_t i = 0; i < out.values().size(); ++i) out[i] *= q_mask[i] * f[i];
    return out;
}

CellLayout::CellLayout(const Grid& g, const Square& om, bool smooth_window)
    : grid(g), omega(om), window(g), corrector(g) {
    const Point c = g.center();
    const double cell_half = 0.5 * g.side();
    const double inner = om.half() + 0.1 * (cell_half - om.half());
    const double outer = cell_half - 0.1 * (cell_half - om.half());
    if (std::abs(om.center.x1 - c.x1) + om.half() >= cell_half ||
        std::abs(om.center.x2 - c.x2) + om.half() >= cell_half)
        throw DomainError("target square must lie strictly inside the periodic cell");
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t q = 0; q < g.n(); ++q) {
            if (!smooth_window) {
                window(r, q) = 1.0;
            } else {
                const double a = std::abs(g.x1(q) - om.center.x1), b = std::abs(g.x2(r) - om.center.x2);
                window(r, q) = profile::smoothstep((outer - a) / (outer - inner)) *
                               profile::smoothstep((outer - b) / (outer - inner));
            }
            // distance to the nearest periodic image of the cell corner
            const double da = std::min(g.x1(q) - g.origin().x1, g.origin().x1 + g.side() - g.x1(q));
            const double db = std::min(g.x2(r) - g.origin().x2, g.origin().x2 + g.side() - g.x2(r));
            const double rad = 0.6 * (cell_half - om.half());
            corrector(r, q) = profile::bump1(std::sqrt(da * da + db * db) / rad);
        }
    const cplx m = corrector.mean();
    corrector *= 1.0 / m;
}

InverseDerivatives::InverseDerivatives(const CellLayout& cell)
    : grid_(cell.grid), rho_(cell.corrector), v_dz_(cell.grid), v_dbar_(cell.grid) {
    auto inv = [](cplx (*sym)(double, double)) {
        return [sym](double a, double b) -> cplx { return (a == 0.0 && b == 0.0) ? cplx{} : 1.0 / sym(a, b); };
    };
    sym_dz_ = symbol_table(grid_, inv(dz_symbol));
    sym_dbar_ = symbol_table(grid_, inv(dbar_symbol));
    sym_dz_t_ = reversed_table(sym_dz_, grid_.n());
    sym_dbar_t_ = reversed_table(sym_dbar_, grid_.n());
    GridField rm1 = rho_;
    for (auto& z : rm1.values()) z -= 1.0;
    v_dz_ = fourier_multiplier(rm1, sym_dz_);
    v_dbar_ = fourier_multiplier(rm1, sym_dbar_);
}

GridField InverseDerivatives::apply(const GridField& f, Deriv d) const {
    const cplx m = f.mean();
    GridField g = f;
    for (std::size_t i = 0; i < g.values().size(); ++i) g[i] -= rho_[i] * m;
    const auto& v = d == Deriv::dz ? v_dz_ : v_dbar_;
    GridField out = fourier_multiplier(g, d == Deriv::dz ? sym_dz_ : sym_dbar_);
    const cplx shift = pointwise(v, f).mean();
    for (auto& z : out.values()) z += shift;
    return out;
}

GridField InverseDerivatives::apply_transpose(const GridField& f, Deriv d) const {
    GridField t = fourier_multiplier(f, d == Deriv::dz ? sym_dz_t_ : sym_dbar_t_);
    const cplx a = pointwise(rho_, t).mean();
    const cplx m = f.mean();
    const auto& v = d == Deriv::dz ? v_dz_ : v_dbar_;
    for (std::size_t i = 0; i < t.values().size(); ++i) t[i] += v[i] * m - a;
    return t;
}

SOperator::SOperator(const CellLayout& cell, const InverseDerivatives& inv, const GridField& v, const PhaseParams& p)
    : cell_(cell), inv_(inv), vmod_(cell.grid), emod_(cell.grid) {
    check_phase_resolution(p, cell.grid);
    emod_ = modulation_field(p, cell.grid, 1);
    vmod_ = pointwise(emod_, v);
}

GridField SOperator::apply(const GridField& f) const {
    GridField inner = inv_.apply(pointwise(vmod_, f), Deriv::dz);
    for (std::size_t i = 0; i < inner.values().size(); ++i) inner[i] *= std::conj(emod_[i]) * cell_.window[i];
    GridField out = inv_.apply(inner, Deriv::dbar);
    out *= 0.25;
    return out;
}

GridField s_operator(const GridField& f, const GridField& v, const PhaseParams& p, const GridField& q_mask) {
    GridField a = dz_inverse(modulate(pointwise(v, f), p, 1, q_mask));
    GridField b = dbar_inverse(modulate(a, p, -1, q_mask));
    b *= 0.25;
    return b;
}

BukhgeimSolution solve_remainder(const CellLayout& cell, const InverseDerivatives& inv, const GridField& v,
                                 const PhaseParams& p, double tol, int max_iter) {
    if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
    if (!cell.omega.contains(p.x)) throw DomainError("recovery point must lie inside the target square");
    const SOperator S(cell, inv, v, p);
    BukhgeimSolution sol{p, GridField(cell.grid), 0, 0.0, 0.0};
    GridField one_plus(cell.grid);
    double prev_step = -1.0;
    int above = 0;
    for (int it = 1; it <= max_iter; ++it) {
        one_plus = sol.w;
        for (auto& z : one_plus.values()) z += 1.0;
        GridField next = S.apply(one_plus);
        const double step = (next - sol.w).l2_norm();
        const double base = one_plus.l2_norm();
        if (prev_step > 0.0) {
            sol.contraction_ratio = step / prev_step;
            above = sol.contraction_ratio > 1.0 ? above + 1 : 0;
            if (above >= 3) throw NotContractive(sol.contraction_ratio);
        }
        sol.w = std::move(next);
        sol.iterations_used = it;
        // w_{m+1} - S[1 + w_{m+1}] = S[w_m - w_{m+1}] is at most the step times the ratio.
        sol.residual = step / base;
        if (step <= tol * base) break;
        prev_step = step;
    }
    one_plus = sol.w;
    for (auto& z : one_plus.values()) z += 1.0;
    sol.residual = (sol.w - S.apply(one_plus)).l2_norm() / one_plus.l2_norm();
    if (sol.residual > tol && sol.iterations_used >= max_iter) throw NoConvergence(sol.residual);
    return sol;
}

BukhgeimSolution solve_remainder(const GridField& v, const PhaseParams& p, const Square& omega, double tol,
                                 int max_iter) {
    const CellLayout cell(v.grid(), omega);
    const InverseDerivatives inv(cell);
    return solve_remainder(cell, inv, v, p, tol, max_iter);
}

GridField solution_field(const BukhgeimSolution& sol, const Grid& g) {
    GridField out(g);
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t q = 0; q < g.n(); ++q)
            out(r, q) = std::exp(cplx(0.0, 1.0) * phase_at(sol.params, {g.x1(q), g.x2(r)})) * (1.0 + sol.w(r, q));
    return out;
}

double pde_residual(const BukhgeimSolution& sol, const GridField& v, const Square& inner) {
    const Grid& g = sol.w.grid();
    const GridField wb = dbar(sol.w);
    const GridField wzb = dz(wb);
    double num = 0.0, den = 0.0;
    const cplx I(0.0, 1.0);
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t q = 0; q < g.n(); ++q) {
            const Point z{g.x1(q), g.x2(r)};
            if (!inner.contains(z)) continue;
            const cplx dpsi = sol.params.k / 4.0 * cplx(z.x1 - sol.params.x.x1, z.x2 - sol.params.x.x2);
            const cplx e = std::exp(I * phase_at(sol.params, z));
            const cplx res = e * (4.0 * I * dpsi * wb(r, q) + 4.0 * wzb(r, q) - v(r, q) * (1.0 + sol.w(r, q)));
            num += std::norm(res);
            den += std::norm(e * (1.0 + sol.w(r, q)));
        }
    return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

void write_solution_manifest(const std::string& json_path, const std::string& field_path,
                             const BukhgeimSolution& sol) {
    write_grid_field(field_path, sol.w, true);
    nlohmann::json j;
    j["params"] = {{"k", sol.params.k}, {"x", {sol.params.x.x1, sol.params.x.x2}}};
    j["w_field"] = std::filesystem::path(field_path).filename().string();
    j["iterations"] = sol.iterations_used;
    j["contraction_ratio"] = sol.contraction_ratio;
    j["residual"] = sol.residual;
    std::ofstream os(json_path);
    os << j.dump(2) << '\n';
}

BukhgeimSolution read_solution_manifest(const std::string& json_path) {
    std::ifstream is(json_path);
    if (!is) throw std::runtime_error("cannot open " + json_path);
    const auto j = nlohmann::json::parse(is);
    const auto dir = std::filesystem::path(json_path).parent_path();
    GridField w = read_grid_field((dir / j.at("w_field").get<std::string>()).string());
    BukhgeimSolution s{{j["params"]["k"].get<double>(), {j["params"]["x"][0].get<double>(), j["params"]["x"][1].get<double>()}},
                       std::move(w), j["iterations"].get<int>(), j["contraction_ratio"].get<double>(),
                       j["residual"].get<double>()};
    return s;
}

}  // namespace potrec
