#pragma once

#include <string>
#include <vector>

#include "potrec/bukhgeim.hpp"
#include "potrec/forward_dn.hpp"
#include "potrec/potentials.hpp"

namespace potrec {

enum class MainTermMethod { quadrature, multiplier };

// (k/4pi) int exp(i(k/4)((z1-x1)^2 - (z2-x2)^2)) v(z) dz, i.e. exp(i/k box) v evaluated at x.
// The multiplier route propagates on the grid and interpolates with a 4x4 Lagrange stencil.
cplx main_term(const GridField& v, const PhaseParams& p, MainTermMethod method = MainTermMethod::quadrature);

// (k/4pi) int exp(i(psi+psibar)) v w dz
cplx remainder_term(const GridField& v, const BukhgeimSolution& sol);

struct RecoveryConfig {
    std::size_t cell_n = 512;     // periodic cell used for the kernel computations
    double cell_side = 2.0;
    Point cell_center{};
    bool smooth_window = true;
    RingSpec ring{};
    double max_condition = 1e8;
    double tol_abs = 1e-3;
    double tol_rel = 1e-2;
};

struct RecoveryResult {
    Point point{};
    std::vector<double> k_sequence;
    std::vector<cplx> values;
    std::vector<double> trace_condition;
    std::optional<cplx> reference;
    bool converged = false;
};

// Value recovered from one DN difference at one (k, x).
cplx recover_value(const DNMatrix& dn_diff, const PhaseParams& p, const CellLayout& cell, const InverseDerivatives& inv,
                   const RingSpec& ring, double max_condition, double* condition = nullptr);

RecoveryResult recover_point(const DNMatrix& dn_v, const DNMatrix& dn_0, Point x, const std::vector<double>& k_sequence,
                             const RecoveryConfig& cfg);

// Last-three spread below max(tol_abs, tol_rel * |median|).
bool spread_converged(const std::vector<cplx>& values, double tol_abs, double tol_rel);

// Dyadic schedule 2^lo, ..., capped by the phase-resolution rule on the grid.
std::vector<double> dyadic_schedule(int lo, int hi, const Grid& g);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double ci_low = 0.0;  // 95% interval for the slope
    double ci_high = 0.0;
    std::size_t used = 0;
    std::size_t dropped = 0;  // nonpositive errors skipped
};

// Least squares of log(error) against log(k).
RateFit fit_rate(const std::vector<double>& k, const std::vector<double>& errors);

// Sharpness study for the counterexample, evaluated in the coordinates y where every mode
// is separable and the propagator at time t has symbol exp(-2 i t eta1 eta2).
struct DivergenceConfig {
    int j_lo = 4;
    int j_hi = 9;
    std::size_t samples_x1 = 12;  // sample lattice over [1/16, 1/4] x [-1/16, 1/16]
    std::size_t samples_x2 = 7;
    double threshold_factor = 3.0;  // mask threshold as a multiple of sup |V|
    int quad_nodes = 128;
};

struct ErrorMap {
    std::vector<Point> points;       // physical coordinates
    std::vector<double> tail_error;  // max over j of |main term - V(x)|
    std::vector<bool> mask;
    double threshold = 0.0;
    double area_fraction = 0.0;
};

struct DivergenceReport {
    std::vector<int> j;
    std::vector<double> single_min, single_max;  // |exp(i/k box) V_j^+| over the rectangle
    std::vector<double> tail_max;                // |all other modes| over the rectangle
    std::vector<double> total_min, total_max;
    RateFit growth;  // single_min against 2^j
    RateFit tail;    // tail_max against 2^j
    ErrorMap map;
};

// exp(i t box) applied to the signed mode at scale l, evaluated at y (separable coordinates).
cplx propagated_mode(const Counterexample& c, int l, int sign, double t, Point y, int quad_nodes = 128);
cplx counterexample_value(const Counterexample& c, Point y);

DivergenceReport divergence_experiment(const PotentialSpec& spec, const DivergenceConfig& cfg);

void write_recovery_csv(const std::string& path, const std::vector<RecoveryResult>& results);

}  // namespace potrec
