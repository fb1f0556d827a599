#include "potrec/kernels.hpp"

#include <atomic>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace potrec::kernels {

namespace {
std::atomic<Exec> g_exec{Exec::parallel};

// Reductions over std::complex are done on split real/imag parts.
cplx chirp_serial(const GridField& f, double scale, Point c) {
    const auto& g = f.grid();
    const std::size_t n = g.n();
    double re = 0.0, im = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double b = g.x2(r) - c.x2;
        for (std::size_t q = 0; q < n; ++q) {
            const double a = g.x1(q) - c.x1;
            const cplx t = std::polar(1.0, scale * (a * a - b * b)) * f(r, q);
            re += t.real();
            im += t.imag();
        }
    }
    return cplx(re, im) * g.h() * g.h();
}

cplx chirp_parallel(const GridField& f, double scale, Point c) {
    const auto& g = f.grid();
    const long n = static_cast<long>(g.n());
    double re = 0.0, im = 0.0;
#pragma omp parallel for reduction(+ : re, im) schedule(static)
    for (long r = 0; r < n; ++r) {
        const double b = g.x2(r) - c.x2;
        for (long q = 0; q < n; ++q) {
            const double a = g.x1(q) - c.x1;
            const cplx t = std::polar(1.0, scale * (a * a - b * b)) * f(r, q);
            re += t.real();
            im += t.imag();
        }
    }
    return cplx(re, im) * g.h() * g.h();
}
}  // namespace

void set_default_exec(Exec e) { g_exec = e; }
Exec default_exec() { return g_exec; }

void mul_inplace(CVec& a, const CVec& b, Exec e) {
    const long n = static_cast<long>(a.size());
    if (e == Exec::serial) {
        for (long i = 0; i < n; ++i) a[i] *= b[i];
        return;
    }
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) a[i] *= b[i];
}

cplx chirp_sum(const GridField& f, double scale, Point c, Exec e) {
    return e == Exec::serial ? chirp_serial(f, scale, c) : chirp_parallel(f, scale, c);
}

cplx dot_integral(const GridField& f, const GridField& g, Exec e) {
    const long n = static_cast<long>(f.values().size());
    double re = 0.0, im = 0.0;
    if (e == Exec::serial) {
        for (long i = 0; i < n; ++i) {
            const cplx t = f[i] * g[i];
            re += t.real();
            im += t.imag();
        }
    } else {
#pragma omp parallel for reduction(+ : re, im) schedule(static)
        for (long i = 0; i < n; ++i) {
            const cplx t = f[i] * g[i];
            re += t.real();
            im += t.imag();
        }
    }
    const double h = f.grid().h();
    return cplx(re, im) * h * h;
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

}  // namespace potrec::kernels
