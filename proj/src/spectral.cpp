#include "potrec/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "potrec/errors.hpp"
#include "potrec/kernels.hpp"

namespace potrec {

namespace {

struct PlanPair {
    fftw_plan fwd;
    fftw_plan bwd;
};

// FFTW planning is not thread-safe; execution with new-array calls is.
std::mutex g_plan_mutex;
std::map<std::size_t, PlanPair>& plan_cache() {
    static std::map<std::size_t, PlanPair> cache;
    return cache;
}

PlanPair plans_for(std::size_t n) {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto& cache = plan_cache();
    if (auto it = cache.find(n); it != cache.end()) return it->second;
    auto* buf = fftw_alloc_complex(n * n);
    const int ni = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    PlanPair p{fftw_plan_dft_2d(ni, ni, buf, buf, FFTW_FORWARD, flags),
               fftw_plan_dft_2d(ni, ni, buf, buf, FFTW_BACKWARD, flags)};
    fftw_free(buf);
    cache.emplace(n, p);
    return p;
}

}  // namespace

SobolevIndex::SobolevIndex(double value) : s(value) {
    if (!std::isfinite(value) || value <= -3.0 || value >= 3.0)
        throw DomainError("Sobolev index must lie in (-3, 3)");
}

void fft2_inplace(CVec& data, std::size_t n, bool forward) {
    const auto p = plans_for(n);
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(forward ? p.fwd : p.bwd, ptr, ptr);
}

CVec fft2(const GridField& f) {
    CVec out = f.values();
    fft2_inplace(out, f.grid().n(), true);
    return out;
}

GridField ifft2(CVec spectrum, const Grid& g) {
    fft2_inplace(spectrum, g.n(), false);
    const double s = 1.0 / static_cast<double>(g.size());
    for (auto& z : spectrum) z *= s;
    return GridField(g, std::move(spectrum));
}

CVec symbol_table(const Grid& g, const Symbol& sym) {
    const std::size_t n = g.n();
    CVec t(g.size());
    for (std::size_t r = 0; r < n; ++r) {
        const double xi2 = g.freq(r);
        for (std::size_t c = 0; c < n; ++c) {
            cplx v = sym(g.freq(c), xi2);
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) v = 0.0;
            t[g.idx(r, c)] = v;
        }
    }
    return t;
}

CVec reversed_table(const CVec& table, std::size_t n) {
    CVec out(table.size());
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) out[r * n + c] = table[((n - r) % n) * n + (n - c) % n];
    return out;
}

GridField fourier_multiplier(const GridField& f, const CVec& table) {
    CVec spec = fft2(f);
    kernels::mul_inplace(spec, table);
    return ifft2(std::move(spec), f.grid());
}

GridField fourier_multiplier(const GridField& f, const Symbol& sym) {
    return fourier_multiplier(f, symbol_table(f.grid(), sym));
}

cplx dbar_symbol(double xi1, double xi2) { return cplx(0.0, 0.5) * cplx(xi1, xi2); }
cplx dz_symbol(double xi1, double xi2) { return cplx(0.0, 0.5) * cplx(xi1, -xi2); }

namespace {
Symbol inverse_of(cplx (*sym)(double, double)) {
    return [sym](double a, double b) -> cplx {
        if (a == 0.0 && b == 0.0) return 0.0;
        return 1.0 / sym(a, b);
    };
}
}  // namespace

GridField dbar_inverse(const GridField& f) { return fourier_multiplier(f, inverse_of(dbar_symbol)); }
GridField dz_inverse(const GridField& f) { return fourier_multiplier(f, inverse_of(dz_symbol)); }
GridField dbar(const GridField& f) { return fourier_multiplier(f, Symbol(dbar_symbol)); }
GridField dz(const GridField& f) { return fourier_multiplier(f, Symbol(dz_symbol)); }

double sobolev_norm(const GridField& f, SobolevIndex s, bool homogeneous) {
    const auto& g = f.grid();
    const CVec spec = fft2(f);
    const std::size_t n = g.n();
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double b = g.freq(r);
        for (std::size_t c = 0; c < n; ++c) {
            const double a = g.freq(c);
            const double w = homogeneous ? a * a + b * b : 1.0 + a * a + b * b;
            if (homogeneous && w == 0.0) continue;
            acc += std::pow(w, s.s) * std::norm(spec[g.idx(r, c)]);
        }
    }
    const double h = g.h();
    return std::sqrt(acc * h * h / static_cast<double>(g.size()));
}

GridField riesz_potential(const GridField& g, SobolevIndex s) {
    if (!(s.s > 0.0 && s.s < 2.0)) throw DomainError("Riesz potential order must lie in (0, 2)");
    const double e = s.s;
    return fourier_multiplier(g, [e](double a, double b) -> cplx {
        const double r2 = a * a + b * b;
        return r2 == 0.0 ? 0.0 : std::pow(r2, -0.5 * e);
    });
}

CVec propagator_table(const Grid& g, double t, Coordinates c) {
    if (c == Coordinates::axis)
        return symbol_table(g, [t](double a, double b) { return std::polar(1.0, -t * (a * a - b * b)); });
    return symbol_table(g, [t](double a, double b) { return std::polar(1.0, -2.0 * t * a * b); });
}

GridField nonelliptic_propagate(const GridField& f, double t, Coordinates c) {
    return fourier_multiplier(f, propagator_table(f.grid(), t, c));
}

GridField gaussian_mollify(const GridField& f, double N) {
    if (!(N > 0.0)) throw DomainError("mollifier scale must be positive");
    const double q = 1.0 / (4.0 * N * N);
    return fourier_multiplier(f, [q](double a, double b) -> cplx { return std::exp(-q * (a * a + b * b)); });
}

double max_spacing_for_phase(double k, double diameter) {
    return 2.0 * std::numbers::pi / (4.0 * k * diameter);
}

std::size_t required_points(double k, const Grid& g) {
    const double hmax = max_spacing_for_phase(k, std::numbers::sqrt2 * g.side());
    std::size_t n = 2;
    while (g.side() / static_cast<double>(n) > hmax) n *= 2;
    return n;
}

}  // namespace potrec
