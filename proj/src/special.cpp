#include "potrec/special.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "potrec/errors.hpp"

namespace potrec::special {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEuler = std::numbers::egamma;
constexpr double kAsymptoticFrom = 25.0;

void check_envelope(int n, double r) {
    if (std::abs(n) > kMaxOrder) throw DomainError("Bessel order " + std::to_string(n) + " outside |n| <= 60");
    if (!(r >= 0.0) || r > kMaxArg) throw DomainError("Bessel argument " + std::to_string(r) + " outside [0, 200]");
}

// Hankel's expansion: returns (P, Q) for order nu.
void hankel_pq(int nu, double r, double& P, double& Q) {
    const double mu = 4.0 * nu * nu;
    P = 1.0;
    Q = 0.0;
    double a = 1.0, last = INFINITY;
    for (int k = 1; k < 200; ++k) {
        a *= (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (k * 8.0 * r);
        const double mag = std::abs(a);
        if (mag > last) break;  // asymptotic series starts to diverge
        last = mag;
        // terms alternate between Q (odd k) and P (even k) with sign (-1)^{floor(k/2)}
        const double s = (k / 2) % 2 == 0 ? 1.0 : -1.0;
        if (k % 2 == 1)
            Q += s * a;
        else
            P += s * a;
        if (mag < 1e-17) break;
    }
}

void asymptotic_jy(int nu, double r, double& J, double& Y) {
    double P, Q;
    hankel_pq(nu, r, P, Q);
    const double chi = r - (0.5 * nu + 0.25) * kPi;
    const double amp = std::sqrt(2.0 / (kPi * r));
    J = amp * (P * std::cos(chi) - Q * std::sin(chi));
    Y = amp * (P * std::sin(chi) + Q * std::cos(chi));
}

std::vector<double> series_j(int nmax, double r) {
    std::vector<double> out(nmax + 1);
    const double h = 0.5 * r, h2 = h * h;
    for (int n = 0; n <= nmax; ++n) {
        double t = std::exp(n * std::log(h) - std::lgamma(n + 1.0));
        double s = t;
        for (int j = 1; j < 60; ++j) {
            t *= -h2 / (j * static_cast<double>(n + j));
            s += t;
            if (std::abs(t) < 1e-18 * std::abs(s)) break;
        }
        out[n] = s;
    }
    return out;
}

// Backward recurrence from far above max(nmax, r), normalized by J_0 + 2 sum J_{2k} = 1.
std::vector<double> miller_j(int nmax, double r) {
    int start = static_cast<int>(std::max<double>(nmax, r) + 10.0 * std::cbrt(r) + 30.0);
    start += start % 2;
    std::vector<double> out(nmax + 1, 0.0);
    double jp = 0.0, jc = 1e-30, norm = 0.0;
    for (int k = start; k >= 1; --k) {
        const double jm = (2.0 * k / r) * jc - jp;
        jp = jc;
        jc = jm;  // now J_{k-1}
        if (k - 1 <= nmax) out[k - 1] = jc;
        if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * jc;
        if (std::abs(jc) > 1e250) {
            jc *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
            for (int q = k - 1; q <= nmax; ++q) out[q] *= 1e-250;
        }
    }
    norm += jc;
    for (auto& v : out) v /= norm;
    return out;
}

std::vector<double> j_values(int nmax, double r) {
    if (r == 0.0) {
        std::vector<double> out(nmax + 1, 0.0);
        out[0] = 1.0;
        return out;
    }
    return r < 1.0 ? series_j(nmax, r) : miller_j(nmax, r);
}

// Neumann series for Y_0, Y_1 from the J_n at the same argument.
void neumann_y01(double r, double& Y0, double& Y1) {
    const int top = static_cast<int>(r + 10.0 * std::cbrt(r) + 40.0);
    const std::vector<double> J = j_values(top, r);
    const double lg = std::log(0.5 * r) + kEuler;
    double s0 = 0.0, s1 = 0.0;
    for (int k = 1; 2 * k + 1 <= top; ++k) {
        const double sg = k % 2 == 0 ? 1.0 : -1.0;
        s0 += sg * J[2 * k] / k;
        s1 += sg * (1.0 + 2.0 * k) * J[2 * k + 1] / (k * (k + 1.0));
    }
    Y0 = (2.0 / kPi) * lg * J[0] - (4.0 / kPi) * s0;
    Y1 = -2.0 / (kPi * r) * J[0] + (2.0 / kPi) * (lg - 1.0) * J[1] - (2.0 / kPi) * s1;
}

void y01(double r, double& Y0, double& Y1) {
    if (r >= kAsymptoticFrom) {
        double J;
        asymptotic_jy(0, r, J, Y0);
        asymptotic_jy(1, r, J, Y1);
    } else {
        neumann_y01(r, Y0, Y1);
    }
}

}  // namespace

std::vector<double> bessel_j_all(int nmax, double r) {
    check_envelope(nmax, r);
    return j_values(nmax, r);
}

std::vector<double> bessel_y_all(int nmax, double r) {
    check_envelope(nmax, r);
    if (!(r > 0.0)) throw DomainError("Y_n is singular at r = 0");
    std::vector<double> out(std::max(nmax, 1) + 1);
    y01(r, out[0], out[1]);
    for (int n = 1; n < nmax; ++n) out[n + 1] = (2.0 * n / r) * out[n] - out[n - 1];
    out.resize(nmax + 1);
    return out;
}

double bessel_j(int n, double r) {
    check_envelope(n, r);
    const int a = std::abs(n);
    const double v = j_values(a, r)[a];
    return (n < 0 && a % 2 == 1) ? -v : v;
}

double bessel_y(int n, double r) {
    const int a = std::abs(n);
    const double v = bessel_y_all(a, r)[a];
    return (n < 0 && a % 2 == 1) ? -v : v;
}

std::complex<double> hankel_h1(int n, double r) {
    if (!(r > 0.0)) throw DomainError("Hankel function is singular at r = 0");
    return {bessel_j(n, r), bessel_y(n, r)};
}

std::complex<double> hankel_h1_leading(int n, double r) {
    return std::polar(std::sqrt(2.0 / (kPi * r)), r - (0.5 * n + 0.25) * kPi);
}

double j0(double r) {
    r = std::abs(r);
    if (r >= kAsymptoticFrom) {
        double J, Y;
        asymptotic_jy(0, r, J, Y);
        return J;
    }
    return j_values(1, r)[0];
}

double j1(double r) {
    const double sg = r < 0 ? -1.0 : 1.0;
    r = std::abs(r);
    if (r >= kAsymptoticFrom) {
        double J, Y;
        asymptotic_jy(1, r, J, Y);
        return sg * J;
    }
    return sg * j_values(1, r)[1];
}

double y0(double r) {
    if (!(r > 0.0)) throw DomainError("Y_0 is singular at r = 0");
    double a, b;
    y01(r, a, b);
    return a;
}

double y1(double r) {
    if (!(r > 0.0)) throw DomainError("Y_1 is singular at r = 0");
    double a, b;
    y01(r, a, b);
    return b;
}

}  // namespace potrec::special
