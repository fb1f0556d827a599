#pragma once

#include <vector>

namespace potrec {

struct GaussRule {
    std::vector<double> x;  // nodes on [-1, 1]
    std::vector<double> w;
};

// Gauss-Legendre rule by Newton iteration on P_n. Cached per n.
const GaussRule& gauss_legendre(int n);

template <class F>
double integrate_gl(F&& f, double a, double b, int n = 64) {
    const auto& r = gauss_legendre(n);
    const double m = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * f(m + h * r.x[i]);
    return s * h;
}

// Lagrange weights for interpolation at x from the given nodes.
std::vector<double> lagrange_weights(const std::vector<double>& nodes, double x);

}  // namespace potrec
