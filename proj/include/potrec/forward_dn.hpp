#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "potrec/bukhgeim.hpp"
#include "potrec/grid.hpp"
#include "potrec/kernels.hpp"
#include "potrec/potentials.hpp"

namespace potrec {

using CMat = Eigen::MatrixXcd;
using CVecE = Eigen::VectorXcd;

// M nodes traced counterclockwise from the lower-left corner, M/4 per side.
struct BoundaryMesh {
    Square omega;
    std::vector<Point> nodes;
    std::vector<double> weights;
    std::vector<Point> normals;  // outward; corners use the diagonal

    static BoundaryMesh square(const Square& om, std::size_t M);
    std::size_t size() const { return nodes.size(); }
    double spacing() const { return 4.0 * omega.side / static_cast<double>(nodes.size()); }
    double perimeter() const { return 4.0 * omega.side; }
    Point at_arc(double s) const;  // arc length from the first node
    bool same_as(const BoundaryMesh& o) const;
};

struct BoundaryTrace {
    BoundaryMesh mesh;
    CVec values;

    template <class F>
    static BoundaryTrace sample(const BoundaryMesh& m, F&& f) {
        BoundaryTrace t{m, CVec(m.size())};
        for (std::size_t i = 0; i < m.size(); ++i) t.values[i] = f(m.nodes[i]);
        return t;
    }
};

struct DNMatrix {
    BoundaryMesh mesh;
    CMat entries;
};

DNMatrix operator-(const DNMatrix& a, const DNMatrix& b);

// Five-point finite differences (equivalently P1 on right triangles with lumped mass) for
// Delta u = V u on the square, with the Dirichlet-to-Neumann form by Schur complement.
class FdDirichlet {
public:
    FdDirichlet(const GridField& v, const Square& omega, std::size_t interior_n);
    ~FdDirichlet();
    FdDirichlet(const FdDirichlet&) = delete;
    FdDirichlet& operator=(const FdDirichlet&) = delete;

    std::size_t m() const { return m_; }
    std::size_t boundary_count() const { return 4 * m_; }
    Point node(std::size_t row, std::size_t col) const;
    double condition_estimate() const { return cond_; }

    // Solution on the (m+1)^2 node lattice, row-major, given values at the 4m boundary nodes.
    CVec solve(const CVec& boundary_values) const;
    // Energy form restricted to boundary nodes (4m x 4m, symmetric).
    Eigen::MatrixXd schur(kernels::Exec e = kernels::default_exec()) const;
    // Hat interpolation from mesh nodes to the boundary nodes of this lattice.
    Eigen::MatrixXd mesh_to_boundary(const BoundaryMesh& mesh) const;
    double residual(const CVec& u) const;  // max |K_II u_I + K_IB u_B| / scale

    struct Impl;

private:
    std::size_t m_;
    Square omega_;
    double cond_ = 1.0;
    std::unique_ptr<Impl> impl_;
};

struct FdSolution {
    Square omega;
    std::size_t m;
    CVec values;  // (m+1)^2 row-major; row over x2
    double residual;
    cplx at(std::size_t row, std::size_t col) const { return values[row * (m + 1) + col]; }
};

FdSolution solve_dirichlet(const GridField& v, const BoundaryTrace& f, std::size_t interior_n);
DNMatrix dn_matrix(const GridField& v, const BoundaryMesh& mesh, std::size_t interior_n,
                   kernels::Exec e = kernels::default_exec());

// sum_i w_i (D u)_i v_i
cplx alessandrini_pairing(const DNMatrix& dn_diff, const BoundaryTrace& u, const BoundaryTrace& v);

// Exterior points used to trace the pairing back onto the boundary.
struct RingSpec {
    int offsets = 5;             // points per boundary node along the outward normal
    double spacing_cells = 8.0;  // lattice cells between consecutive offsets
    double blob_cells = 2.0;     // Gaussian width (lattice cells) replacing the point evaluation
};

// Precomputed pieces shared by all kernel evaluations for one (cell, k, x).
class KernelEvaluator {
public:
    KernelEvaluator(const CellLayout& cell, const InverseDerivatives& inv, const PhaseParams& p, double blob_cells);
    // conj-phase kernel e^{-i psi(z)} G_psi(z, eta) at mesh nodes; z must be a lattice point
    CVec conjugated_at_nodes(long zrow, long zcol, const BoundaryMesh& mesh) const;
    // same kernel for many lattice points at once (row k of the result is zs[k]); nodes must be lattice points
    CMat conjugated_at_nodes(const std::vector<std::pair<long, long>>& zs, const BoundaryMesh& mesh,
                             kernels::Exec e = kernels::Exec::parallel) const;
    // full kernel G_psi(z, eta) for arbitrary z outside the square
    CVec full_at_nodes(Point z, const BoundaryMesh& mesh) const;
    GridField conjugated_field(Point z) const;  // e^{-i psi(z)} G_psi(z, .) on the grid

private:
    GridField conj_from_transposed(GridField l2t) const;
    const CellLayout& cell_;
    const InverseDerivatives& inv_;
    PhaseParams p_;
    double blob_width_;
    GridField t0_;  // transposed dbar-inverse of the blob centred at lattice index (0,0)
    GridField vdbar_;  // transposed inverse applied to the constant 1
    cplx blob_mean_;
    GridField chirp_window_;  // window times e^{-i k/4 ((x1-x1*)^2 - (x2-x2*)^2)}, fixed per evaluator
};

CVec interpolate_at(const GridField& f, const std::vector<Point>& pts, int order = 6);

BoundaryTrace g_psi_kernel(Point z, const BoundaryMesh& mesh, const PhaseParams& p, const CellLayout& cell,
                           const InverseDerivatives& inv, double blob_cells = 2.0);

struct GammaResult {
    CMat conjugated;  // acts on u / e^{i psi} at the nodes
    double min_ring_distance = 0.0;
    bool ring_warning = false;
};

GammaResult gamma_psi_conjugated(const DNMatrix& dn_diff, const PhaseParams& p, const CellLayout& cell,
                                 const InverseDerivatives& inv, const RingSpec& ring = {},
                                 kernels::Exec e = kernels::default_exec());
CMat gamma_psi_matrix(const DNMatrix& dn_diff, const PhaseParams& p, const CellLayout& cell,
                      const InverseDerivatives& inv, const RingSpec& ring = {});

struct TraceRecovery {
    BoundaryTrace trace;
    double condition = 1.0;
    double solve_residual = 0.0;
    double spectral_radius = 0.0;
};

TraceRecovery recover_boundary_trace(const DNMatrix& dn_diff, const PhaseParams& p, const CellLayout& cell,
                                     const InverseDerivatives& inv, const RingSpec& ring = {},
                                     double max_condition = 1e8);

CVec phase_trace(const PhaseParams& p, const BoundaryMesh& mesh, bool conjugate_phase = false);

// Binary layout: "PRDN" | u32 version | u64 M | f64 side | f64 cx | f64 cy | M*M complex row-major.
void write_dn_matrix(const std::string& path, const DNMatrix& d);
DNMatrix read_dn_matrix(const std::string& path);

double condition_number(const CMat& a);
double spectral_radius(const CMat& a, int iterations = 200);

}  // namespace potrec
