#pragma once

#include <complex>
#include <vector>

namespace potrec::special {

// Documented envelope for the public routines.
constexpr int kMaxOrder = 60;
constexpr double kMaxArg = 200.0;

double bessel_j(int n, double r);
double bessel_y(int n, double r);
std::complex<double> hankel_h1(int n, double r);

// J_0..J_nmax at one argument (Miller's backward recurrence, or the power series for small r).
std::vector<double> bessel_j_all(int nmax, double r);
// Y_0..Y_nmax at one argument (upward recurrence).
std::vector<double> bessel_y_all(int nmax, double r);

// Leading term e^{-i(n pi/2 + pi/4)} (2/(pi r))^{1/2} e^{ir}.
std::complex<double> hankel_h1_leading(int n, double r);

// Orders 0 and 1 at any r >= 0 (asymptotic expansion for large r); used by the kernels.
double j0(double r);
double j1(double r);
double y0(double r);
double y1(double r);

}  // namespace potrec::special
