#include "potrec/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "potrec/errors.hpp"
#include "potrec/quadrature.hpp"

namespace potrec {

bool Square::contains(Point p, double margin) const {
    return std::abs(p.x1 - center.x1) < half() - margin && std::abs(p.x2 - center.x2) < half() - margin;
}

GridField Square::indicator(const Grid& g) const {
    // Closed square; lattice points on the boundary count as inside.
    const double eps = 1e-9 * g.h();
    return GridField::sample(g, [&](double a, double b) -> cplx {
        return (std::abs(a - center.x1) <= half() + eps && std::abs(b - center.x2) <= half() + eps) ? 1.0 : 0.0;
    });
}

namespace profile {

double bump1(double t) {
    const double a = std::abs(t);
    if (a >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - t * t));
}

double smoothstep(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

namespace {
double phi_o_norm() {
    static const double c = 1.0 / integrate_gl([](double s) { return bump1(4.0 * s); }, -0.25, 0.25, 200);
    return c;
}
}  // namespace

double phi_o(double t) { return phi_o_norm() * bump1(4.0 * t); }

double phi(double t) {
    const double lo = std::max(-0.25, t - 0.25), hi = std::min(0.25, t + 0.25);
    if (hi <= lo) return 0.0;
    return integrate_gl([t](double s) { return phi_o(s) * phi_o(t - s); }, lo, hi, 96);
}

double phi_o_hat(double eta) {
    // phi_o is even, so its transform is the cosine transform.
    const int n = std::max(64, static_cast<int>(std::ceil(std::abs(eta) * 0.25)) + 64);
    return integrate_gl([eta](double s) { return phi_o(s) * std::cos(eta * s); }, -0.25, 0.25, std::min(n, 512));
}

double phi_hat(double eta) {
    const double a = phi_o_hat(eta);
    return a * a;
}

}  // namespace profile

std::size_t counterexample_required_n(const Counterexample& c, double side, double samples) {
    const double hmax = std::ldexp(1.0, -c.j_max) / samples;
    std::size_t n = 2;
    while (side / static_cast<double>(n) > hmax * (1.0 + 1e-12)) n *= 2;
    return n;
}

namespace {

GridField realize_bumps(const PotentialSpec& spec, const Grid& g) {
    GridField out(g);
    for (const auto& b : spec.bumps) {
        if (b.radius <= 0.0) throw DomainError("bump radius must be positive");
        const double reach = std::abs(b.center.x1 - spec.omega.center.x1) + b.radius;
        const double reach2 = std::abs(b.center.x2 - spec.omega.center.x2) + b.radius;
        if (b.amplitude != 0.0 && (reach >= spec.omega.half() || reach2 >= spec.omega.half()))
            throw DomainError("bump support must lie strictly inside the domain");
        for (std::size_t r = 0; r < g.n(); ++r)
            for (std::size_t c = 0; c < g.n(); ++c) {
                const double dx = g.x1(c) - b.center.x1, dy = g.x2(r) - b.center.x2;
                const double t = std::sqrt(dx * dx + dy * dy) / b.radius;
                if (t < 1.0) out(r, c) += b.amplitude * std::numbers::e * profile::bump1(t);
            }
    }
    return out;
}

GridField realize_cones(const PotentialSpec& spec, const Grid& g) {
    GridField out(g);
    for (const auto& b : spec.cones) {
        for (std::size_t r = 0; r < g.n(); ++r)
            for (std::size_t c = 0; c < g.n(); ++c) {
                const double dx = g.x1(c) - b.center.x1, dy = g.x2(r) - b.center.x2;
                const double rr = std::sqrt(dx * dx + dy * dy);
                out(r, c) += b.amplitude * (1.0 - rr / b.slope_radius) * std::exp(-rr * rr / (b.width * b.width));
            }
    }
    return out;
}

// Phase in [0, 2pi) from the top 53 bits of one mt19937_64 draw.
double draw_phase(std::mt19937_64& rng) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return 2.0 * std::numbers::pi * u;
}

GridField realize_rough(const PotentialSpec& spec, const Grid& g) {
    const auto& p = spec.rough;
    if (!(p.s > 0.0 && p.s < 2.0)) throw DomainError("riesz_rough needs 0 < s < 2");
    std::mt19937_64 rng(p.seed);
    const std::size_t n = g.n();
    // Random unit-modulus coefficients on the disc |xi| <= band, drawn in row-major bin order.
    CVec spec_g(g.size(), cplx{});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double a = g.freq(c), b = g.freq(r);
            const double rad = std::sqrt(a * a + b * b);
            const double ph = draw_phase(rng);
            if (rad <= p.band && rad > 0.0) spec_g[g.idx(r, c)] = std::polar(1.0, ph);
        }
    GridField field = riesz_potential(ifft2(std::move(spec_g), g), SobolevIndex(p.s));
    const double inner = 0.75 * p.radius;
    double peak = 0.0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double dx = g.x1(c) - p.center.x1, dy = g.x2(r) - p.center.x2;
            const double rr = std::sqrt(dx * dx + dy * dy);
            const double cut = profile::smoothstep((p.radius - rr) / (p.radius - inner));
            field(r, c) = field(r, c).real() * cut;
            peak = std::max(peak, std::abs(field(r, c)));
        }
    if (peak > 0.0) field *= p.amplitude / peak;
    return field;
}

GridField realize_counterexample(const PotentialSpec& spec, const Grid& g) {
    const auto& c = spec.counter;
    if (c.j_min < 2 || c.j_max < c.j_min) throw DomainError("counterexample needs 2 <= j_min <= j_max");
    if (!(c.beta > 0.5 && c.beta < 1.0)) throw DomainError("counterexample beta must lie in (1/2, 1)");
    const std::size_t need = counterexample_required_n(c, g.side());
    if (g.n() < need)
        throw PreconditionError("grid does not resolve scale 2^-" + std::to_string(c.j_max) + "; need n >= " +
                                std::to_string(need));
    GridField out(g);
    const bool rotated = c.orientation == Orientation::rotated45;
    const double s2 = std::numbers::sqrt2 / 2.0;
    auto value = [&](double y1, double y2) -> cplx {
        const double ph2 = profile::phi(y2);
        if (ph2 == 0.0) return 0.0;
        cplx acc{};
        for (int j = c.j_min; j <= c.j_max; ++j) {
            if (c.single_sign != 0 && j != c.j_single) continue;
            const double scale = std::ldexp(1.0, j);
            const double ph1 = profile::phi(scale * y1);
            if (ph1 == 0.0) continue;
            const double amp = std::pow(2.0, (1.0 - c.beta) * j);
            if (c.single_sign == 0)
                acc += 2.0 * amp * std::cos(scale * y2) * ph1 * ph2;
            else
                acc += amp * std::polar(1.0, c.single_sign * scale * y2) * ph1 * ph2;
        }
        return acc;
    };
    if (!rotated) {
        // Separable: cache the x2 profile per row.
        std::vector<double> row_phi(g.n());
        for (std::size_t r = 0; r < g.n(); ++r) row_phi[r] = profile::phi(g.x2(r));
        for (int j = c.j_min; j <= c.j_max; ++j) {
            if (c.single_sign != 0 && j != c.j_single) continue;
            const double scale = std::ldexp(1.0, j);
            const double amp = std::pow(2.0, (1.0 - c.beta) * j);
            std::vector<double> col_phi(g.n());
            for (std::size_t q = 0; q < g.n(); ++q) col_phi[q] = profile::phi(scale * g.x1(q));
            for (std::size_t r = 0; r < g.n(); ++r) {
                if (row_phi[r] == 0.0) continue;
                const cplx mode = c.single_sign == 0 ? cplx(2.0 * amp * std::cos(scale * g.x2(r)))
                                                     : amp * std::polar(1.0, c.single_sign * scale * g.x2(r));
                for (std::size_t q = 0; q < g.n(); ++q)
                    if (col_phi[q] != 0.0) out(r, q) += mode * col_phi[q] * row_phi[r];
            }
        }
        return out;
    }
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t q = 0; q < g.n(); ++q) {
            const double a = g.x1(q), b = g.x2(r);
            out(r, q) = value(s2 * (a + b), s2 * (a - b));
        }
    return out;
}

}  // namespace

GridField realize(const PotentialSpec& spec, const Grid& grid) {
    switch (spec.kind) {
        case PotentialKind::smooth_bump: return realize_bumps(spec, grid);
        case PotentialKind::cone: return realize_cones(spec, grid);
        case PotentialKind::riesz_rough: return realize_rough(spec, grid);
        case PotentialKind::counterexample: return realize_counterexample(spec, grid);
        case PotentialKind::shifted: {
            if (spec.base.size() != 1) throw DomainError("shifted potential needs exactly one base spec");
            const GridField v = realize(spec.base.front(), grid);
            return shift_by_energy(v, spec.kappa, spec.omega.indicator(grid));
        }
    }
    throw DomainError("unknown potential kind");
}

double sup_norm_bound(const PotentialSpec& spec) {
    switch (spec.kind) {
        case PotentialKind::smooth_bump: {
            double s = 0.0;
            for (const auto& b : spec.bumps) s += std::abs(b.amplitude);
            return s;
        }
        case PotentialKind::cone: {
            double s = 0.0;
            for (const auto& b : spec.cones) s += std::abs(b.amplitude);
            return s;
        }
        case PotentialKind::riesz_rough: return std::abs(spec.rough.amplitude);
        case PotentialKind::counterexample: {
            const auto& c = spec.counter;
            const double p0 = profile::phi(0.0);
            double s = 0.0;
            for (int j = c.j_min; j <= c.j_max; ++j) {
                if (c.single_sign != 0 && j != c.j_single) continue;
                s += (c.single_sign == 0 ? 2.0 : 1.0) * std::pow(2.0, (1.0 - c.beta) * j) * p0 * p0;
            }
            return s;
        }
        case PotentialKind::shifted:
            return (spec.base.empty() ? 0.0 : sup_norm_bound(spec.base.front())) + spec.kappa * spec.kappa;
    }
    return 0.0;
}

HsReport estimate_hs_membership(const PotentialSpec& spec, SobolevIndex s, const std::vector<Grid>& grids) {
    if (grids.size() < 3) throw DomainError("Sobolev membership estimate needs at least 3 grids");
    HsReport rep;
    for (const auto& g : grids) {
        PotentialSpec local = spec;
        if (spec.kind == PotentialKind::counterexample) {
            // Largest j_max (capped by the spec) resolved with 4 samples on this grid.
            int j = spec.counter.j_min;
            while (j < spec.counter.j_max) {
                Counterexample probe = spec.counter;
                probe.j_max = j + 1;
                if (counterexample_required_n(probe, g.side()) > g.n()) break;
                ++j;
            }
            local.counter.j_max = j;
        }
        rep.grid_sizes.push_back(g.n());
        rep.j_max_used.push_back(spec.kind == PotentialKind::counterexample ? local.counter.j_max : 0);
        rep.norms.push_back(sobolev_norm(realize(local, g), s, false));
    }
    const double first = rep.norms.front(), last = rep.norms.back();
    rep.growth_ratio = first > 0.0 ? last / first : (last > 0.0 ? INFINITY : 1.0);
    rep.bounded = rep.growth_ratio < 2.0;
    return rep;
}

GridField shift_by_energy(const GridField& v, double kappa, const GridField& omega_mask) {
    GridField out = v;
    const double k2 = kappa * kappa;
    for (std::size_t i = 0; i < out.values().size(); ++i) out[i] -= k2 * omega_mask[i];
    return out;
}

std::string to_string(PotentialKind k) {
    switch (k) {
        case PotentialKind::smooth_bump: return "smooth_bump";
        case PotentialKind::cone: return "cone";
        case PotentialKind::riesz_rough: return "riesz_rough";
        case PotentialKind::counterexample: return "counterexample";
        case PotentialKind::shifted: return "shifted";
    }
    return "?";
}

PotentialKind potential_kind_from(const std::string& s) {
    if (s == "smooth_bump") return PotentialKind::smooth_bump;
    if (s == "cone") return PotentialKind::cone;
    if (s == "riesz_rough") return PotentialKind::riesz_rough;
    if (s == "counterexample") return PotentialKind::counterexample;
    if (s == "shifted") return PotentialKind::shifted;
    throw ConfigError("unknown potential kind '" + s + "'");
}

}  // namespace potrec
