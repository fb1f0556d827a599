#include "potrec/reconstruct.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>

#include "potrec/errors.hpp"
#include "potrec/kernels.hpp"
#include "potrec/quadrature.hpp"
#include "potrec/spectral.hpp"

namespace potrec {

namespace {
constexpr double kPi = std::numbers::pi;

// Uniform table with 4-point Lagrange interpolation; zero outside [lo, hi].
struct ProfileTable {
    double lo, step;
    std::vector<double> vals;

    template <class F>
    ProfileTable(F&& f, double lo_, double hi_, std::size_t n) : lo(lo_), step((hi_ - lo_) / (n - 1)), vals(n) {
#pragma omp parallel for
        for (long i = 0; i < static_cast<long>(n); ++i) vals[i] = f(lo + step * i);
    }

    double operator()(double x) const {
        const double u = (x - lo) / step;
        if (u < 0.0 || u > static_cast<double>(vals.size() - 1)) return 0.0;
        long i = std::clamp(static_cast<long>(u) - 1, 0L, static_cast<long>(vals.size()) - 4);
        const double s = u - static_cast<double>(i);
        // nodes at 0,1,2,3
        const double w0 = -(s - 1) * (s - 2) * (s - 3) / 6.0, w1 = s * (s - 2) * (s - 3) / 2.0;
        const double w2 = -s * (s - 1) * (s - 3) / 2.0, w3 = s * (s - 1) * (s - 2) / 6.0;
        return w0 * vals[i] + w1 * vals[i + 1] + w2 * vals[i + 2] + w3 * vals[i + 3];
    }
};

constexpr double kEtaCap = 400.0;  // phi_hat is negligible beyond this

const ProfileTable& phi_table() {
    static const ProfileTable t([](double x) { return profile::phi(x); }, -0.5, 0.5, 16385);
    return t;
}

const ProfileTable& phi_hat_table() {
    static const ProfileTable t([](double x) { return profile::phi_hat(x); }, -kEtaCap, kEtaCap, 160001);
    return t;
}

constexpr std::size_t kMaxPaddedN = 8192;
constexpr double kTailLevel = 1e-7;

// Largest distance from x to a sample of v above roundoff.
double support_reach(const GridField& v, Point x) {
    const Grid& g = v.grid();
    const double floor = 1e-15 * v.max_abs();
    double reach = 0.0;
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t c = 0; c < g.n(); ++c)
            if (std::abs(v(r, c)) > floor) reach = std::max(reach, std::hypot(g.x1(c) - x.x1, g.x2(r) - x.x2));
    return reach;
}

// Smallest frequency radius beyond which every DFT coefficient of v is below kTailLevel of the largest.
double spectral_reach(const GridField& v) {
    const Grid& g = v.grid();
    const CVec s = fft2(v);
    double top = 0.0;
    for (const auto& z : s) top = std::max(top, std::abs(z));
    double reach = 0.0;
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t c = 0; c < g.n(); ++c)
            if (std::abs(s[g.idx(r, c)]) > kTailLevel * top) reach = std::max(reach, std::hypot(g.freq(c), g.freq(r)));
    return reach;
}

// Zero-extends v to a cell large enough that the periodic images of the propagator only see
// frequencies above the spectral reach of v: k (P - L) / 2 >= reach.
GridField padded_for_propagation(const GridField& v, double k) {
    const Grid& g = v.grid();
    const double need = g.side() + 2.0 * spectral_reach(v) / k;
    std::size_t factor = 1;
    while (g.side() * static_cast<double>(factor) < need) factor *= 2;
    if (factor == 1) return v;
    const std::size_t n = g.n() * factor;
    if (n > kMaxPaddedN)
        throw PreconditionError("multiplier route at k = " + std::to_string(k) + " needs a padded cell of " +
                                std::to_string(n) + " points");
    const Grid big(n, g.side() * static_cast<double>(factor), g.origin());
    GridField out(big);
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t c = 0; c < g.n(); ++c) out(r, c) = v(r, c);
    return out;
}

}  // namespace

cplx main_term(const GridField& v, const PhaseParams& p, MainTermMethod method) {
    if (method == MainTermMethod::quadrature) {
        // the chirp only has to be resolved where v is nonzero
        const double reach = support_reach(v, p.x);
        if (reach > 0.0 && v.grid().h() > max_spacing_for_phase(p.k, reach))
            throw PreconditionError("grid spacing " + std::to_string(v.grid().h()) + " does not resolve k = " +
                                    std::to_string(p.k) + " over the support of v");
        return p.k / (4.0 * kPi) * kernels::chirp_sum(v, p.k / 4.0, p.x);
    }
    const GridField u = nonelliptic_propagate(padded_for_propagation(v, p.k), 1.0 / p.k, Coordinates::axis);
    return interpolate_at(u, {p.x}, 4)[0];
}

cplx remainder_term(const GridField& v, const BukhgeimSolution& sol) {
    if (!v.grid().same_as(sol.w.grid())) throw DomainError("potential and remainder live on different grids");
    return sol.params.k / (4.0 * kPi) * kernels::chirp_sum(pointwise(v, sol.w), sol.params.k / 4.0, sol.params.x);
}

cplx recover_value(const DNMatrix& dn_diff, const PhaseParams& p, const CellLayout& cell, const InverseDerivatives& inv,
                   const RingSpec& ring, double max_condition, double* condition) {
    const TraceRecovery tr = recover_boundary_trace(dn_diff, p, cell, inv, ring, max_condition);
    if (condition) *condition = tr.condition;
    const BoundaryTrace conj{dn_diff.mesh, phase_trace(p, dn_diff.mesh, true)};
    return p.k / (4.0 * kPi) * alessandrini_pairing(dn_diff, tr.trace, conj);
}

bool spread_converged(const std::vector<cplx>& values, double tol_abs, double tol_rel) {
    if (values.size() < 3) return false;
    const std::size_t n = values.size();
    const cplx a = values[n - 3], b = values[n - 2], c = values[n - 1];
    const double spread = std::max({std::abs(a - b), std::abs(b - c), std::abs(a - c)});
    std::array<double, 3> mags{std::abs(a), std::abs(b), std::abs(c)};
    std::sort(mags.begin(), mags.end());
    return spread < std::max(tol_abs, tol_rel * mags[1]);
}

RecoveryResult recover_point(const DNMatrix& dn_v, const DNMatrix& dn_0, Point x, const std::vector<double>& ks,
                             const RecoveryConfig& cfg) {
    if (!dn_v.mesh.same_as(dn_0.mesh)) throw DomainError("DN matrices live on different meshes");
    if (!dn_v.mesh.omega.contains(x)) throw DomainError("recovery point must lie inside the target square");
    for (std::size_t i = 1; i < ks.size(); ++i)
        if (!(ks[i] > ks[i - 1])) throw DomainError("k sequence must be strictly increasing");
    const Grid g = Grid::centered(cfg.cell_n, cfg.cell_side, cfg.cell_center);
    const CellLayout cell(g, dn_v.mesh.omega, cfg.smooth_window);
    const InverseDerivatives inv(cell);
    const DNMatrix diff = dn_v - dn_0;
    RecoveryResult res;
    res.point = x;
    for (const double k : ks) {
        const std::string where = " at k = " + std::to_string(k);
        double cond = 1.0;
        cplx val;
        try {
            val = recover_value(diff, {k, x}, cell, inv, cfg.ring, cfg.max_condition, &cond);
        } catch (const IllConditioned& e) {
            throw IllConditioned(e.cond, where);
        } catch (const NotContractive& e) {
            throw NotContractive(e.observed_ratio, where);
        } catch (const NoConvergence& e) {
            throw NoConvergence(e.residual, where);
        }
        res.k_sequence.push_back(k);
        res.values.push_back(val);
        res.trace_condition.push_back(cond);
    }
    res.converged = spread_converged(res.values, cfg.tol_abs, cfg.tol_rel);
    return res;
}

std::vector<double> dyadic_schedule(int lo, int hi, const Grid& g) {
    std::vector<double> ks;
    for (int e = lo; e <= hi; ++e) {
        const double k = std::ldexp(1.0, e);
        if (required_points(k, g) > g.n()) break;
        ks.push_back(k);
    }
    return ks;
}

RateFit fit_rate(const std::vector<double>& k, const std::vector<double>& errors) {
    if (k.size() != errors.size()) throw DomainError("k and error sequences differ in length");
    std::vector<double> xs, ys;
    RateFit f;
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (!(errors[i] > 0.0) || !(k[i] > 0.0)) {
            ++f.dropped;
            std::cerr << "fit_rate: dropping nonpositive entry at k = " << k[i] << '\n';
            continue;
        }
        xs.push_back(std::log(k[i]));
        ys.push_back(std::log(errors[i]));
    }
    const std::size_t n = xs.size();
    if (n < 4) throw DomainError("rate fit needs at least 4 positive errors");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0)) throw DomainError("rate fit needs at least two distinct k");
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ys[i] - f.intercept - f.slope * xs[i];
        sse += r * r;
    }
    const double se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
    const boost::math::students_t dist(static_cast<double>(n - 2));
    const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
    f.ci_low = f.slope - q * se;
    f.ci_high = f.slope + q * se;
    f.used = n;
    return f;
}

// ---------------------------------------------------------------------------------------------

cplx propagated_mode(const Counterexample& c, int l, int sign, double t, Point y, int quad_nodes) {
    // The y2 profile is spread over frequencies eta; each frequency slides the y1 profile by 2t(sign 2^l + eta).
    const double scale = std::ldexp(1.0, l);
    const double amp = std::pow(2.0, (1.0 - c.beta) * l);
    const double centre = y.x1 - sign * 2.0 * scale * t;
    const double half_w = 0.5 / scale;
    // phi(scale (centre - 2 t eta)) is nonzero for |centre - 2 t eta| < half_w
    double lo = (centre - half_w) / (2.0 * t), hi = (centre + half_w) / (2.0 * t);
    lo = std::max(lo, -kEtaCap);
    hi = std::min(hi, kEtaCap);
    if (!(hi > lo)) return 0.0;
    const auto& rule = gauss_legendre(quad_nodes);
    const ProfileTable &ph = phi_table(), &phh = phi_hat_table();
    const double mid = 0.5 * (lo + hi), rad = 0.5 * (hi - lo);
    cplx acc{};
    for (std::size_t q = 0; q < rule.x.size(); ++q) {
        const double eta = mid + rad * rule.x[q];
        acc += rule.w[q] * ph(scale * (centre - 2.0 * t * eta)) * phh(eta) * std::polar(1.0, eta * y.x2);
    }
    return amp / (2.0 * kPi) * std::polar(1.0, sign * scale * y.x2) * acc * rad;
}

cplx counterexample_value(const Counterexample& c, Point y) {
    const double ph2 = profile::phi(y.x2);
    if (ph2 == 0.0) return 0.0;
    cplx acc{};
    for (int l = c.j_min; l <= c.j_max; ++l) {
        if (c.single_sign != 0 && l != c.j_single) continue;
        const double scale = std::ldexp(1.0, l);
        const double amp = std::pow(2.0, (1.0 - c.beta) * l) * profile::phi(scale * y.x1) * ph2;
        if (c.single_sign == 0)
            acc += 2.0 * amp * std::cos(scale * y.x2);
        else
            acc += amp * std::polar(1.0, c.single_sign * scale * y.x2);
    }
    return acc;
}

DivergenceReport divergence_experiment(const PotentialSpec& spec, const DivergenceConfig& cfg) {
    if (spec.kind != PotentialKind::counterexample) throw DomainError("divergence study needs a counterexample spec");
    const Counterexample& c = spec.counter;
    if (cfg.j_lo < c.j_min || cfg.j_hi > c.j_max || cfg.j_lo > cfg.j_hi)
        throw PreconditionError("j range must lie inside the realized scales [" + std::to_string(c.j_min) + ", " +
                                std::to_string(c.j_max) + "]");
    if (cfg.samples_x1 < 2 || cfg.samples_x2 < 2) throw DomainError("sample lattice needs at least 2x2 points");
    // The quadrature resolves each mode once the rule has several nodes per oscillation of exp(i eta y2).
    if (cfg.quad_nodes < 32) throw PreconditionError("too few quadrature nodes to resolve the finest scale");

    DivergenceReport rep;
    const std::size_t nx = cfg.samples_x1, ny = cfg.samples_x2, np = nx * ny;
    std::vector<Point> ys(np);
    for (std::size_t a = 0; a < nx; ++a)
        for (std::size_t b = 0; b < ny; ++b)
            ys[a * ny + b] = {1.0 / 16 + (3.0 / 16) * a / (nx - 1), -1.0 / 16 + (2.0 / 16) * b / (ny - 1)};

    const double sup = sup_norm_bound(spec);
    std::vector<double> tail_err(np, 0.0);
    std::vector<cplx> vref(np);
    for (std::size_t i = 0; i < np; ++i) vref[i] = counterexample_value(c, ys[i]);
    phi_table();
    phi_hat_table();

    for (int j = cfg.j_lo; j <= cfg.j_hi; ++j) {
        std::vector<double> single(np), tail(np), total(np);
        const long npl = static_cast<long>(np);
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < npl; ++i) {
            const Point y = ys[i];
            const double k = std::round(std::ldexp(1.0, j + 1) / y.x1);
            const double t = 1.0 / k;
            cplx a{}, rest{};
            for (int l = c.j_min; l <= c.j_max; ++l)
                for (int sg : {1, -1}) {
                    if (c.single_sign != 0 && (l != c.j_single || sg != c.single_sign)) continue;
                    const cplx m = propagated_mode(c, l, sg, t, y, cfg.quad_nodes);
                    if (l == j && sg == 1)
                        a = m;
                    else
                        rest += m;
                }
            single[i] = std::abs(a);
            tail[i] = std::abs(rest);
            total[i] = std::abs(a + rest);
            if (c.single_sign == 0) tail_err[i] = std::max(tail_err[i], std::abs(a + rest - vref[i]));
        }
        rep.j.push_back(j);
        rep.single_min.push_back(*std::min_element(single.begin(), single.end()));
        rep.single_max.push_back(*std::max_element(single.begin(), single.end()));
        rep.tail_max.push_back(*std::max_element(tail.begin(), tail.end()));
        rep.total_min.push_back(*std::min_element(total.begin(), total.end()));
        rep.total_max.push_back(*std::max_element(total.begin(), total.end()));
    }
    std::vector<double> scales;
    for (int j : rep.j) scales.push_back(std::ldexp(1.0, j));
    if (rep.j.size() >= 4) {
        rep.growth = fit_rate(scales, rep.single_min);
        rep.tail = fit_rate(scales, rep.tail_max);
    }

    ErrorMap& m = rep.map;
    m.threshold = cfg.threshold_factor * sup;
    const bool rotated = c.orientation == Orientation::rotated45;
    const double s2 = std::numbers::sqrt2 / 2.0;
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < np; ++i) {
        const Point y = ys[i];
        m.points.push_back(rotated ? Point{s2 * (y.x1 + y.x2), s2 * (y.x1 - y.x2)} : y);
        m.tail_error.push_back(tail_err[i]);
        const bool bad = tail_err[i] > m.threshold;
        m.mask.push_back(bad);
        flagged += bad;
    }
    m.area_fraction = static_cast<double>(flagged) / static_cast<double>(np);
    return rep;
}

void write_recovery_csv(const std::string& path, const std::vector<RecoveryResult>& results) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "x1,x2,k,re,im,abs_error\n" << std::setprecision(17);
    for (const auto& r : results)
        for (std::size_t i = 0; i < r.values.size(); ++i) {
            os << r.point.x1 << ',' << r.point.x2 << ',' << r.k_sequence[i] << ',' << r.values[i].real() << ','
               << r.values[i].imag() << ',';
            if (r.reference)
                os << std::abs(r.values[i] - *r.reference);
            else
                os << "nan";
            os << '\n';
        }
}

}  // namespace potrec
