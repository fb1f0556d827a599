#pragma once

#include <string>

#include "potrec/grid.hpp"
#include "potrec/potentials.hpp"

namespace potrec {

struct PhaseParams {
    double k = 1.0;
    Point x{};
};

// psi(z) = (k/8) (z - x)^2 as a complex field.
GridField phase_field(const PhaseParams& p, const Grid& g);
// psi + conj(psi) = (k/4)((z1-x1)^2 - (z2-x2)^2), real.
GridField phase_sum_field(const PhaseParams& p, const Grid& g);
cplx phase_at(const PhaseParams& p, Point z);

// exp(sign * i(psi + conj psi)) * mask * f
GridField modulate(const GridField& f, const PhaseParams& p, int sign, const GridField& q_mask);

// Periodic cell with the target square inside it, a smooth window that is 1 near the square
// and vanishes before the cell edge, and a unit-mean bump at the cell corner used to
// fix the constant left free by the periodic inverse derivatives.
struct CellLayout {
    Grid grid;
    Square omega;
    GridField window;
    GridField corrector;

    CellLayout(const Grid& g, const Square& om, bool smooth_window = true);
};

enum class Deriv { dz, dbar };

// Inverse derivatives that are exact on the target square: the mean of the input is moved
// onto the corrector bump before the periodic inversion, and the output constant is pinned
// so that the transpose is an inverse derivative too.
class InverseDerivatives {
public:
    explicit InverseDerivatives(const CellLayout& cell);

    GridField apply(const GridField& f, Deriv d) const;
    GridField apply_transpose(const GridField& f, Deriv d) const;
    const Grid& grid() const { return grid_; }

private:
    Grid grid_;
    GridField rho_;
    CVec sym_dz_, sym_dbar_, sym_dz_t_, sym_dbar_t_;
    GridField v_dz_, v_dbar_;
};

class SOperator {
public:
    SOperator(const CellLayout& cell, const InverseDerivatives& inv, const GridField& v, const PhaseParams& p);
    // (1/4) dbar^{-1}[ e^{-i(psi+psibar)} chi dz^{-1}[ e^{i(psi+psibar)} V F ] ]
    GridField apply(const GridField& f) const;
    const GridField& modulation() const { return emod_; }

private:
    const CellLayout& cell_;
    const InverseDerivatives& inv_;
    GridField vmod_;   // e^{i(psi+psibar)} V
    GridField emod_;   // e^{i(psi+psibar)}
};

// Plain periodic composition with q_mask (the literal operator with periodic inverses).
GridField s_operator(const GridField& f, const GridField& v, const PhaseParams& p, const GridField& q_mask);

struct BukhgeimSolution {
    PhaseParams params;
    GridField w;
    int iterations_used = 0;
    double contraction_ratio = 0.0;
    double residual = 0.0;  // ||w - S[1+w]|| / ||1+w||
};

BukhgeimSolution solve_remainder(const CellLayout& cell, const InverseDerivatives& inv, const GridField& v,
                                 const PhaseParams& p, double tol = 1e-12, int max_iter = 200);
BukhgeimSolution solve_remainder(const GridField& v, const PhaseParams& p, const Square& omega, double tol = 1e-12,
                                 int max_iter = 200);

// e^{i psi} (1 + w)
GridField solution_field(const BukhgeimSolution& sol, const Grid& g);

// ||4 dz dbar u - V u||_{L^2(inner)} / ||u||_{L^2(inner)}, evaluated through the conjugated form.
double pde_residual(const BukhgeimSolution& sol, const GridField& v, const Square& inner);

void write_solution_manifest(const std::string& json_path, const std::string& field_path,
                             const BukhgeimSolution& sol);
BukhgeimSolution read_solution_manifest(const std::string& json_path);

void check_phase_resolution(const PhaseParams& p, const Grid& g);

}  // namespace potrec
