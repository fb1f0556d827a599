#pragma once

#include <functional>

#include "potrec/grid.hpp"

namespace potrec {

struct SobolevIndex {
    double s;
    explicit SobolevIndex(double value);
};

using Symbol = std::function<cplx(double xi1, double xi2)>;

// Unnormalized forward DFT and its normalized inverse (FFTW, row-major).
CVec fft2(const GridField& f);
GridField ifft2(CVec spectrum, const Grid& g);
void fft2_inplace(CVec& data, std::size_t n, bool forward);

// Symbol sampled on the frequency lattice. Non-finite values are replaced by 0.
CVec symbol_table(const Grid& g, const Symbol& sym);
// Table of the transposed operator: entry at bin j moves to bin -j.
CVec reversed_table(const CVec& table, std::size_t n);

GridField fourier_multiplier(const GridField& f, const Symbol& sym);
GridField fourier_multiplier(const GridField& f, const CVec& table);

cplx dbar_symbol(double xi1, double xi2);  // (i/2)(xi1 + i xi2)
cplx dz_symbol(double xi1, double xi2);    // (i/2)(xi1 - i xi2)

// Periodic inverse derivatives; the mean is mapped to 0.
GridField dbar_inverse(const GridField& f);
GridField dz_inverse(const GridField& f);
GridField dbar(const GridField& f);
GridField dz(const GridField& f);

// Discrete Plancherel sum with weight |xi|^2 or 1+|xi|^2, scaled so s = 0 gives the L^2 norm.
double sobolev_norm(const GridField& f, SobolevIndex s, bool homogeneous);

// (-Delta)^{-s/2} with zero mode sent to 0, 0 < s < 2.
GridField riesz_potential(const GridField& g, SobolevIndex s);

enum class Coordinates { axis, rotated };

// exp(-i t (xi1^2 - xi2^2)) (axis) or exp(-2 i t xi1 xi2) (rotated).
GridField nonelliptic_propagate(const GridField& f, double t, Coordinates c);
CVec propagator_table(const Grid& g, double t, Coordinates c);

// Convolution with N^2 exp(-N^2|x|^2)/pi, i.e. multiplier exp(-|xi|^2/(4N^2)).
GridField gaussian_mollify(const GridField& f, double N);

// Spacing needed to sample exp(i k (z-x)^2 / 4)-type phases at 4 points per period.
double max_spacing_for_phase(double k, double diameter);
std::size_t required_points(double k, const Grid& g);

}  // namespace potrec
