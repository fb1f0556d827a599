#pragma once

#include "potrec/grid.hpp"

// Hot loops in two flavours: a plain serial reference and an OpenMP version.
// Tests compare the two; the benchmark target times them.
namespace potrec::kernels {

enum class Exec { serial, parallel };

void set_default_exec(Exec e);
Exec default_exec();

// a[i] *= b[i]
void mul_inplace(CVec& a, const CVec& b, Exec e = default_exec());

// h^2 * sum_{grid} exp(i*scale*((x1-c1)^2 - (x2-c2)^2)) * f
cplx chirp_sum(const GridField& f, double scale, Point c, Exec e = default_exec());

// h^2 * sum f*g
cplx dot_integral(const GridField& f, const GridField& g, Exec e = default_exec());

int max_threads();
void set_threads(int n);

}  // namespace potrec::kernels
