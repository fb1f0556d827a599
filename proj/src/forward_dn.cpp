#include "potrec/forward_dn.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "potrec/binio.hpp"
#include "potrec/errors.hpp"
#include "potrec/quadrature.hpp"
#include "potrec/spectral.hpp"

namespace potrec {

using SpMat = Eigen::SparseMatrix<double>;

BoundaryMesh BoundaryMesh::square(const Square& om, std::size_t M) {
    if (M < 4 || M % 4 != 0) throw DomainError("boundary mesh size must be a positive multiple of 4");
    BoundaryMesh m;
    m.omega = om;
    const double w = 4.0 * om.side / static_cast<double>(M);
    for (std::size_t j = 0; j < M; ++j) {
        m.nodes.push_back(m.at_arc(w * static_cast<double>(j)));
        // Trapezoid on each side; corners collect a half weight from both sides.
        m.weights.push_back(w);
    }
    const double s = std::numbers::sqrt2 / 2.0;
    const std::size_t per = M / 4;
    for (std::size_t j = 0; j < M; ++j) {
        const std::size_t side = j / per;
        const bool corner = j % per == 0;
        Point n;
        switch (side) {
            case 0: n = corner ? Point{-s, -s} : Point{0.0, -1.0}; break;
            case 1: n = corner ? Point{s, -s} : Point{1.0, 0.0}; break;
            case 2: n = corner ? Point{s, s} : Point{0.0, 1.0}; break;
            default: n = corner ? Point{-s, s} : Point{-1.0, 0.0}; break;
        }
        m.normals.push_back(n);
    }
    return m;
}

Point BoundaryMesh::at_arc(double s) const {
    const double L = omega.side;
    s = std::fmod(s, 4.0 * L);
    if (s < 0) s += 4.0 * L;
    const double x0 = omega.center.x1 - omega.half(), y0 = omega.center.x2 - omega.half();
    if (s < L) return {x0 + s, y0};
    if (s < 2 * L) return {x0 + L, y0 + (s - L)};
    if (s < 3 * L) return {x0 + L - (s - 2 * L), y0 + L};
    return {x0, y0 + L - (s - 3 * L)};
}

bool BoundaryMesh::same_as(const BoundaryMesh& o) const {
    return nodes.size() == o.nodes.size() && omega.side == o.omega.side && omega.center.x1 == o.omega.center.x1 &&
           omega.center.x2 == o.omega.center.x2;
}

DNMatrix operator-(const DNMatrix& a, const DNMatrix& b) {
    if (!a.mesh.same_as(b.mesh)) throw DomainError("DN matrices live on different meshes");
    return {a.mesh, a.entries - b.entries};
}

// ---------------------------------------------------------------------------------------------

CVec interpolate_at(const GridField& f, const std::vector<Point>& pts, int order) {
    const Grid& g = f.grid();
    CVec out(pts.size());
    std::vector<double> nodes(order);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double u = (pts[i].x1 - g.origin().x1) / g.h();
        const double w = (pts[i].x2 - g.origin().x2) / g.h();
        const double ur = std::round(u), wr = std::round(w);
        const bool on_u = std::abs(u - ur) < 1e-9, on_w = std::abs(w - wr) < 1e-9;
        auto stencil = [&](double t, bool on, long& start, std::vector<double>& wts) {
            if (on) {
                start = static_cast<long>(t >= 0 ? t + 0.5 : t - 0.5);
                wts.assign(1, 1.0);
                return;
            }
            start = static_cast<long>(std::floor(t)) - order / 2 + 1;
            for (int q = 0; q < order; ++q) nodes[q] = static_cast<double>(start + q);
            wts = lagrange_weights(nodes, t);
        };
        long su, sw;
        std::vector<double> wu, ww;
        stencil(u, on_u, su, wu);
        stencil(w, on_w, sw, ww);
        cplx acc{};
        for (std::size_t a = 0; a < ww.size(); ++a) {
            const std::size_t r = g.wrap(sw + static_cast<long>(a));
            for (std::size_t b = 0; b < wu.size(); ++b) acc += ww[a] * wu[b] * f(r, g.wrap(su + static_cast<long>(b)));
        }
        out[i] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------------------------

struct FdDirichlet::Impl {
    std::size_t m;
    std::vector<long> local;         // node -> interior index (>=0) or -(boundary index)-1
    std::vector<std::size_t> bnode;  // boundary index -> node
    std::vector<std::size_t> inode;  // interior index -> node
    SpMat KII, KIB, KBB;
    Eigen::SimplicialLDLT<SpMat> ldlt;
};

FdDirichlet::~FdDirichlet() = default;

Point FdDirichlet::node(std::size_t row, std::size_t col) const {
    const double h = omega_.side / static_cast<double>(m_);
    return {omega_.center.x1 - omega_.half() + h * static_cast<double>(col),
            omega_.center.x2 - omega_.half() + h * static_cast<double>(row)};
}

FdDirichlet::FdDirichlet(const GridField& v, const Square& omega, std::size_t interior_n)
    : m_(interior_n), omega_(omega), impl_(std::make_unique<Impl>()) {
    if (interior_n < 2) throw DomainError("interior lattice needs at least 2 cells per side");
    auto& I = *impl_;
    const std::size_t m = m_, np = m + 1;
    I.m = m;
    I.local.assign(np * np, 0);
    // Boundary ordering: counterclockwise from the lower-left corner.
    for (std::size_t j = 0; j < m; ++j) I.bnode.push_back(0 * np + j);
    for (std::size_t i = 0; i < m; ++i) I.bnode.push_back(i * np + m);
    for (std::size_t j = m; j > 0; --j) I.bnode.push_back(m * np + j);
    for (std::size_t i = m; i > 0; --i) I.bnode.push_back(i * np + 0);
    std::vector<char> is_b(np * np, 0);
    for (std::size_t b = 0; b < I.bnode.size(); ++b) {
        is_b[I.bnode[b]] = 1;
        I.local[I.bnode[b]] = -static_cast<long>(b) - 1;
    }
    for (std::size_t q = 0; q < np * np; ++q)
        if (!is_b[q]) {
            I.local[q] = static_cast<long>(I.inode.size());
            I.inode.push_back(q);
        }

    // Potential at the nodes.
    std::vector<Point> pts(np * np);
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j < np; ++j) pts[i * np + j] = node(i, j);
    const CVec vn = interpolate_at(v, pts);
    double vmax = 0.0, imax = 0.0;
    for (const auto& z : vn) {
        vmax = std::max(vmax, std::abs(z.real()));
        imax = std::max(imax, std::abs(z.imag()));
    }
    if (imax > 1e-12 * std::max(1.0, vmax)) throw DomainError("finite-difference solver expects a real potential");

    const double h = omega.side / static_cast<double>(m);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(np * np * 9);
    auto edge = [&](std::size_t a, std::size_t b, double w) {
        trip.emplace_back(a, a, w);
        trip.emplace_back(b, b, w);
        trip.emplace_back(a, b, -w);
        trip.emplace_back(b, a, -w);
    };
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j < m; ++j) edge(i * np + j, i * np + j + 1, (i == 0 || i == m) ? 0.5 : 1.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < np; ++j) edge(i * np + j, (i + 1) * np + j, (j == 0 || j == m) ? 0.5 : 1.0);
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j < np; ++j) {
            double mw = 1.0;
            if (i == 0 || i == m) mw *= 0.5;
            if (j == 0 || j == m) mw *= 0.5;
            trip.emplace_back(i * np + j, i * np + j, h * h * mw * vn[i * np + j].real());
        }
    SpMat K(np * np, np * np);
    K.setFromTriplets(trip.begin(), trip.end());

    const std::size_t ni = I.inode.size(), nb = I.bnode.size();
    std::vector<Eigen::Triplet<double>> tii, tib, tbb;
    for (int col = 0; col < K.outerSize(); ++col)
        for (SpMat::InnerIterator it(K, col); it; ++it) {
            const long lr = I.local[it.row()], lc = I.local[it.col()];
            if (lr >= 0 && lc >= 0)
                tii.emplace_back(lr, lc, it.value());
            else if (lr >= 0 && lc < 0)
                tib.emplace_back(lr, -lc - 1, it.value());
            else if (lr < 0 && lc < 0)
                tbb.emplace_back(-lr - 1, -lc - 1, it.value());
        }
    I.KII.resize(ni, ni);
    I.KII.setFromTriplets(tii.begin(), tii.end());
    I.KIB.resize(ni, nb);
    I.KIB.setFromTriplets(tib.begin(), tib.end());
    I.KBB.resize(nb, nb);
    I.KBB.setFromTriplets(tbb.begin(), tbb.end());

    I.ldlt.compute(I.KII);
    if (I.ldlt.info() != Eigen::Success) throw NearSingular(INFINITY);
    const auto d = I.ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff(), dmin = d.cwiseAbs().minCoeff();
    cond_ = dmin > 0.0 ? dmax / dmin : INFINITY;
    if (!(dmin > 1e-10 * dmax)) throw NearSingular(cond_);
}

CVec FdDirichlet::solve(const CVec& bvals) const {
    const auto& I = *impl_;
    if (bvals.size() != I.bnode.size()) throw DomainError("boundary data size mismatch");
    const std::size_t np = m_ + 1;
    CVec out(np * np);
    for (int part = 0; part < 2; ++part) {
        Eigen::VectorXd ub(I.bnode.size());
        for (std::size_t b = 0; b < I.bnode.size(); ++b) ub[b] = part == 0 ? bvals[b].real() : bvals[b].imag();
        Eigen::VectorXd rhs = -(I.KIB * ub);
        Eigen::VectorXd ui = I.ldlt.solve(rhs);
        for (std::size_t q = 0; q < I.inode.size(); ++q)
            out[I.inode[q]] += part == 0 ? cplx(ui[q], 0.0) : cplx(0.0, ui[q]);
        for (std::size_t b = 0; b < I.bnode.size(); ++b)
            out[I.bnode[b]] += part == 0 ? cplx(ub[b], 0.0) : cplx(0.0, ub[b]);
    }
    return out;
}

double FdDirichlet::residual(const CVec& u) const {
    const auto& I = *impl_;
    double worst = 0.0, scale = 0.0;
    for (int part = 0; part < 2; ++part) {
        Eigen::VectorXd ui(I.inode.size()), ub(I.bnode.size());
        for (std::size_t q = 0; q < I.inode.size(); ++q) ui[q] = part == 0 ? u[I.inode[q]].real() : u[I.inode[q]].imag();
        for (std::size_t b = 0; b < I.bnode.size(); ++b) ub[b] = part == 0 ? u[I.bnode[b]].real() : u[I.bnode[b]].imag();
        const Eigen::VectorXd r = I.KII * ui + I.KIB * ub;
        worst = std::max(worst, r.cwiseAbs().maxCoeff());
        scale = std::max({scale, ui.cwiseAbs().maxCoeff(), ub.cwiseAbs().maxCoeff()});
    }
    return scale > 0.0 ? worst / scale : worst;
}

Eigen::MatrixXd FdDirichlet::schur(kernels::Exec e) const {
    const auto& I = *impl_;
    const long nb = static_cast<long>(I.bnode.size());
    Eigen::MatrixXd B = Eigen::MatrixXd(I.KBB);
    const SpMat KBI = I.KIB.transpose();
    constexpr long block = 32;
    const long nblocks = (nb + block - 1) / block;
    auto do_block = [&](long bi) {
        const long c0 = bi * block, cn = std::min(block, nb - c0);
        const Eigen::MatrixXd rhs = Eigen::MatrixXd(I.KIB.middleCols(c0, cn));
        const Eigen::MatrixXd X = I.ldlt.solve(rhs);
        B.middleCols(c0, cn) -= KBI * X;
    };
    if (e == kernels::Exec::serial) {
        for (long bi = 0; bi < nblocks; ++bi) do_block(bi);
    } else {
#pragma omp parallel for schedule(dynamic)
        for (long bi = 0; bi < nblocks; ++bi) do_block(bi);
    }
    return 0.5 * (B + B.transpose());
}

Eigen::MatrixXd FdDirichlet::mesh_to_boundary(const BoundaryMesh& mesh) const {
    const std::size_t nb = 4 * m_, M = mesh.size();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(nb, M);
    const double hf = omega_.side / static_cast<double>(m_), hm = mesh.spacing();
    for (std::size_t t = 0; t < nb; ++t) {
        const double u = hf * static_cast<double>(t) / hm;
        std::size_t j = static_cast<std::size_t>(std::floor(u + 1e-12));
        double th = u - static_cast<double>(j);
        if (th < 1e-12) th = 0.0;
        P(t, j % M) += 1.0 - th;
        if (th > 0.0) P(t, (j + 1) % M) += th;
    }
    return P;
}

FdSolution solve_dirichlet(const GridField& v, const BoundaryTrace& f, std::size_t interior_n) {
    const FdDirichlet fd(v, f.mesh.omega, interior_n);
    const Eigen::MatrixXd P = fd.mesh_to_boundary(f.mesh);
    CVecE fv(f.values.size());
    for (std::size_t i = 0; i < f.values.size(); ++i) fv[i] = f.values[i];
    const CVecE bv = P.cast<cplx>() * fv;
    CVec b(bv.data(), bv.data() + bv.size());
    FdSolution s{f.mesh.omega, interior_n, fd.solve(b), 0.0};
    s.residual = fd.residual(s.values);
    return s;
}

DNMatrix dn_matrix(const GridField& v, const BoundaryMesh& mesh, std::size_t interior_n, kernels::Exec e) {
    const FdDirichlet fd(v, mesh.omega, interior_n);
    const Eigen::MatrixXd P = fd.mesh_to_boundary(mesh);
    const Eigen::MatrixXd A = P.transpose() * fd.schur(e) * P;
    DNMatrix d{mesh, CMat(mesh.size(), mesh.size())};
    for (std::size_t i = 0; i < mesh.size(); ++i)
        for (std::size_t j = 0; j < mesh.size(); ++j) d.entries(i, j) = A(i, j) / mesh.weights[i];
    return d;
}

cplx alessandrini_pairing(const DNMatrix& dn_diff, const BoundaryTrace& u, const BoundaryTrace& v) {
    if (!dn_diff.mesh.same_as(u.mesh) || !dn_diff.mesh.same_as(v.mesh))
        throw DomainError("traces and DN matrix live on different meshes");
    const std::size_t M = u.values.size();
    CVecE uv(M);
    for (std::size_t i = 0; i < M; ++i) uv[i] = u.values[i];
    const CVecE du = dn_diff.entries * uv;
    cplx s{};
    for (std::size_t i = 0; i < M; ++i) s += dn_diff.mesh.weights[i] * du[i] * v.values[i];
    return s;
}

// ---------------------------------------------------------------------------------------------

namespace {

// Sum-normalized periodic Gaussian weights centred at z.
GridField blob_at(const Grid& g, Point z, double width) {
    GridField b(g);
    const double L = g.side();
    double total = 0.0;
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t q = 0; q < g.n(); ++q) {
            double da = std::remainder(g.x1(q) - z.x1, L), db = std::remainder(g.x2(r) - z.x2, L);
            const double val = std::exp(-(da * da + db * db) / (width * width));
            b(r, q) = val;
            total += val;
        }
    b *= 1.0 / total;
    return b;
}

cplx exp_i_conj_phase(const PhaseParams& p, Point z) {
    return std::exp(cplx(0.0, 1.0) * std::conj(phase_at(p, z)));
}

}  // namespace

CVec phase_trace(const PhaseParams& p, const BoundaryMesh& mesh, bool conjugate_phase) {
    CVec out(mesh.size());
    for (std::size_t i = 0; i < mesh.size(); ++i)
        out[i] = conjugate_phase ? exp_i_conj_phase(p, mesh.nodes[i])
                                 : std::exp(cplx(0.0, 1.0) * phase_at(p, mesh.nodes[i]));
    return out;
}

KernelEvaluator::KernelEvaluator(const CellLayout& cell, const InverseDerivatives& inv, const PhaseParams& p,
                                 double blob_cells)
    : cell_(cell),
      inv_(inv),
      p_(p),
      blob_width_(blob_cells * cell.grid.h()),
      t0_(cell.grid),
      vdbar_(cell.grid),
      chirp_window_(cell.grid) {
    const GridField b0 = blob_at(cell.grid, cell.grid.origin(), blob_width_);
    blob_mean_ = b0.mean();
    // Plain transposed multiplier; the corrector terms depend on z and are added per call.
    const auto sym = reversed_table(symbol_table(cell.grid, [](double a, double c) -> cplx {
                                        return (a == 0.0 && c == 0.0) ? cplx{} : 1.0 / dbar_symbol(a, c);
                                    }),
                                    cell.grid.n());
    t0_ = fourier_multiplier(b0, sym);
    GridField ones(cell.grid);
    for (auto& z : ones.values()) z = 1.0;
    vdbar_ = inv.apply_transpose(ones, Deriv::dbar);
    // the chirp separates into a row factor and a column factor
    const Grid& g = cell.grid;
    CVec col(g.n()), row(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) {
        const double u = g.x1(i) - p.x.x1, w = g.x2(i) - p.x.x2;
        col[i] = std::polar(1.0, -p.k / 4.0 * u * u);
        row[i] = std::polar(1.0, p.k / 4.0 * w * w);
    }
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t q = 0; q < g.n(); ++q) chirp_window_(r, q) = cell.window(r, q) * row[r] * col[q];
}

GridField KernelEvaluator::conj_from_transposed(GridField l2t) const {
    for (std::size_t i = 0; i < l2t.values().size(); ++i) l2t[i] *= chirp_window_[i];
    return inv_.apply_transpose(l2t, Deriv::dz);
}

CVec KernelEvaluator::conjugated_at_nodes(long zrow, long zcol, const BoundaryMesh& mesh) const {
    const Grid& g = cell_.grid;
    const std::size_t n = g.n();
    GridField t(g);
    const std::size_t dr = g.wrap(zrow), dc = g.wrap(zcol);
    for (std::size_t r = 0; r < n; ++r) {
        const cplx* src = &t0_((r + n - dr) % n, 0);
        cplx* dst = &t(r, 0);
        std::copy(src, src + (n - dc), dst + dc);
        std::copy(src + (n - dc), src + n, dst);
    }
    // corrected transpose: t - mean(rho t) + v_dbar mean(b)
    const GridField& rho = cell_.corrector;
    const cplx a = pointwise(rho, t).mean();
    for (std::size_t i = 0; i < t.values().size(); ++i) t[i] += vdbar_[i] * blob_mean_ - a;
    const GridField phi = conj_from_transposed(std::move(t));
    const CVec at = interpolate_at(phi, mesh.nodes);
    CVec out(mesh.size());
    const double h = g.h();
    for (std::size_t i = 0; i < mesh.size(); ++i) out[i] = at[i] * exp_i_conj_phase(p_, mesh.nodes[i]) / (4.0 * h * h);
    return out;
}

// Adjoint form of the single-point evaluation: with B = W * apply(e_node) the kernel at lattice point z is
// sum_j B(j) t_z(j), and the shifted-blob part of t_z makes that a circular correlation with t0 over all z.
CMat KernelEvaluator::conjugated_at_nodes(const std::vector<std::pair<long, long>>& zs, const BoundaryMesh& mesh,
                                          kernels::Exec e) const {
    const Grid& g = cell_.grid;
    const std::size_t n = g.n(), N = g.size(), M = mesh.size();
    std::vector<std::size_t> at(M);
    for (std::size_t i = 0; i < M; ++i) {
        const double u = (mesh.nodes[i].x1 - g.origin().x1) / g.h(), w = (mesh.nodes[i].x2 - g.origin().x2) / g.h();
        if (std::abs(u - std::round(u)) > 1e-7 || std::abs(w - std::round(w)) > 1e-7)
            throw DomainError("boundary mesh nodes must coincide with lattice points of the cell");
        at[i] = g.idx(g.wrap(std::lround(w)), g.wrap(std::lround(u)));
    }
    std::vector<std::size_t> zat(zs.size());
    for (std::size_t k = 0; k < zs.size(); ++k) zat[k] = g.idx(g.wrap(zs[k].first), g.wrap(zs[k].second));

    const CVec t0_rev = reversed_table(fft2(t0_), n);
    auto correlate = [&](const GridField& f) {
        CVec spec = fft2(f);
        kernels::mul_inplace(spec, t0_rev);
        return ifft2(std::move(spec), g);
    };
    const GridField rho_corr = correlate(cell_.corrector);  // N * mean(rho * shifted t0)
    const double h = g.h();

    CMat out(zs.size(), M);
    auto column = [&](long i) {
        GridField unit(g);
        unit[at[i]] = 1.0;
        GridField b = inv_.apply(unit, Deriv::dz);
        cplx sum_b{}, sum_bv{};
        for (std::size_t j = 0; j < N; ++j) {
            b[j] *= chirp_window_[j];
            sum_b += b[j];
            sum_bv += b[j] * vdbar_[j];
        }
        const GridField c = correlate(b);
        const cplx scale = exp_i_conj_phase(p_, mesh.nodes[i]) / (4.0 * h * h);
        for (std::size_t k = 0; k < zs.size(); ++k) {
            const cplx a = rho_corr[zat[k]] / static_cast<double>(N);
            out(static_cast<Eigen::Index>(k), i) = (c[zat[k]] + blob_mean_ * sum_bv - a * sum_b) * scale;
        }
    };
    const long Ml = static_cast<long>(M);
    if (e == kernels::Exec::serial) {
        for (long i = 0; i < Ml; ++i) column(i);
    } else {
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < Ml; ++i) column(i);
    }
    return out;
}

GridField KernelEvaluator::conjugated_field(Point z) const {
    const GridField b = blob_at(cell_.grid, z, blob_width_);
    GridField phi = conj_from_transposed(inv_.apply_transpose(b, Deriv::dbar));
    const Grid& g = cell_.grid;
    const double h = g.h();
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t q = 0; q < g.n(); ++q) phi(r, q) *= exp_i_conj_phase(p_, {g.x1(q), g.x2(r)}) / (4.0 * h * h);
    return phi;
}

CVec KernelEvaluator::full_at_nodes(Point z, const BoundaryMesh& mesh) const {
    const GridField b = blob_at(cell_.grid, z, blob_width_);
    const GridField phi = conj_from_transposed(inv_.apply_transpose(b, Deriv::dbar));
    const CVec at = interpolate_at(phi, mesh.nodes);
    const double h = cell_.grid.h();
    const cplx ez = std::exp(cplx(0.0, 1.0) * phase_at(p_, z));
    CVec out(mesh.size());
    for (std::size_t i = 0; i < mesh.size(); ++i)
        out[i] = ez * at[i] * exp_i_conj_phase(p_, mesh.nodes[i]) / (4.0 * h * h);
    return out;
}

BoundaryTrace g_psi_kernel(Point z, const BoundaryMesh& mesh, const PhaseParams& p, const CellLayout& cell,
                           const InverseDerivatives& inv, double blob_cells) {
    if (!(std::abs(z.x1 - mesh.omega.center.x1) > mesh.omega.half() ||
          std::abs(z.x2 - mesh.omega.center.x2) > mesh.omega.half()))
        throw DomainError("kernel point must lie outside the closed target square");
    const KernelEvaluator ev(cell, inv, p, blob_cells);
    return {mesh, ev.full_at_nodes(z, mesh)};
}

GammaResult gamma_psi_conjugated(const DNMatrix& dn_diff, const PhaseParams& p, const CellLayout& cell,
                                 const InverseDerivatives& inv, const RingSpec& ring, kernels::Exec e) {
    const BoundaryMesh& mesh = dn_diff.mesh;
    const Grid& g = cell.grid;
    const std::size_t M = mesh.size();
    if (ring.offsets < 1) throw DomainError("ring needs at least one offset");
    check_phase_resolution(p, g);
    std::vector<long> rows(M), cols(M);
    for (std::size_t i = 0; i < M; ++i) {
        const double u = (mesh.nodes[i].x1 - g.origin().x1) / g.h(), w = (mesh.nodes[i].x2 - g.origin().x2) / g.h();
        if (std::abs(u - std::round(u)) > 1e-7 || std::abs(w - std::round(w)) > 1e-7)
            throw DomainError("boundary mesh nodes must coincide with lattice points of the cell");
        cols[i] = std::lround(u);
        rows[i] = std::lround(w);
    }
    const long step = std::lround(ring.spacing_cells);
    if (step < 1) throw DomainError("ring spacing must be at least one lattice cell");
    std::vector<double> pnodes;
    for (int q = 1; q <= ring.offsets; ++q) pnodes.push_back(q);
    const std::vector<double> extrap = lagrange_weights(pnodes, 0.0);

    const CVec E = phase_trace(p, mesh);
    CMat Y = dn_diff.entries;
    for (std::size_t j = 0; j < M; ++j) Y.col(j) *= E[j];
    const KernelEvaluator ev(cell, inv, p, ring.blob_cells);

    GammaResult res;
    res.min_ring_distance = static_cast<double>(step) * g.h();
    res.ring_warning = static_cast<double>(step) < 3.0 * ring.blob_cells;

    // ring points stepped outward along the normal (diagonally at corners), offsets 1..q per node
    std::vector<std::pair<long, long>> zs;
    zs.reserve(M * ring.offsets);
    for (std::size_t i = 0; i < M; ++i) {
        const Point nrm = mesh.normals[i];
        const long sr = nrm.x2 > 0.1 ? 1 : (nrm.x2 < -0.1 ? -1 : 0);
        const long sc = nrm.x1 > 0.1 ? 1 : (nrm.x1 < -0.1 ? -1 : 0);
        for (int q = 1; q <= ring.offsets; ++q) zs.emplace_back(rows[i] + sr * q * step, cols[i] + sc * q * step);
    }
    const CMat gk = ev.conjugated_at_nodes(zs, mesh, e);
    CMat wg = CMat::Zero(M, M);
    for (std::size_t i = 0; i < M; ++i)
        for (int q = 1; q <= ring.offsets; ++q)
            wg.row(i) += extrap[q - 1] * gk.row(i * ring.offsets + q - 1);
    for (std::size_t t = 0; t < M; ++t) wg.col(t) *= mesh.weights[t];
    res.conjugated = wg * Y;
    return res;
}

CMat gamma_psi_matrix(const DNMatrix& dn_diff, const PhaseParams& p, const CellLayout& cell,
                      const InverseDerivatives& inv, const RingSpec& ring) {
    const CMat gt = gamma_psi_conjugated(dn_diff, p, cell, inv, ring).conjugated;
    const CVec E = phase_trace(p, dn_diff.mesh);
    CMat out = gt;
    for (std::size_t i = 0; i < E.size(); ++i)
        for (std::size_t j = 0; j < E.size(); ++j) out(i, j) = E[i] * gt(i, j) / E[j];
    return out;
}

double condition_number(const CMat& a) {
    Eigen::BDCSVD<CMat> svd(a);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return 1.0;
    const double smin = s[s.size() - 1];
    return smin > 0.0 ? s[0] / smin : INFINITY;
}

double spectral_radius(const CMat& a, int iterations) {
    CVecE x = CVecE::Ones(a.cols()) / std::sqrt(static_cast<double>(a.cols()));
    double lam = 0.0;
    for (int it = 0; it < iterations; ++it) {
        CVecE y = a * x;
        const double ny = y.norm();
        if (ny == 0.0) return 0.0;
        lam = ny;
        x = y / ny;
    }
    return lam;
}

TraceRecovery recover_boundary_trace(const DNMatrix& dn_diff, const PhaseParams& p, const CellLayout& cell,
                                     const InverseDerivatives& inv, const RingSpec& ring, double max_condition) {
    const std::size_t M = dn_diff.mesh.size();
    const CMat gt = gamma_psi_conjugated(dn_diff, p, cell, inv, ring).conjugated;
    const CMat A = CMat::Identity(M, M) - gt;
    TraceRecovery out{{dn_diff.mesh, CVec(M)}, 1.0, 0.0, 0.0};
    out.condition = condition_number(A);
    if (!(out.condition <= max_condition)) throw IllConditioned(out.condition);
    const CVecE rhs = CVecE::Ones(M);
    const CVecE f = A.partialPivLu().solve(rhs);
    out.solve_residual = (A * f - rhs).norm() / rhs.norm();
    out.spectral_radius = spectral_radius(gt);
    const CVec E = phase_trace(p, dn_diff.mesh);
    for (std::size_t i = 0; i < M; ++i) out.trace.values[i] = E[i] * f[i];
    return out;
}

// ---------------------------------------------------------------------------------------------

void write_dn_matrix(const std::string& path, const DNMatrix& d) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    binio::put_magic(os, "PRDN");
    binio::put<std::uint32_t>(os, 1);
    binio::put<std::uint64_t>(os, d.mesh.size());
    binio::put(os, d.mesh.omega.side);
    binio::put(os, d.mesh.omega.center.x1);
    binio::put(os, d.mesh.omega.center.x2);
    for (Eigen::Index i = 0; i < d.entries.rows(); ++i)
        for (Eigen::Index j = 0; j < d.entries.cols(); ++j) binio::put_complex(os, d.entries(i, j));
}

DNMatrix read_dn_matrix(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    if (!binio::check_magic(is, "PRDN")) throw std::runtime_error("not a DN matrix file: " + path);
    if (binio::get<std::uint32_t>(is) != 1) throw std::runtime_error("unsupported DN matrix version");
    const auto M = binio::get<std::uint64_t>(is);
    Square om;
    om.side = binio::get<double>(is);
    om.center.x1 = binio::get<double>(is);
    om.center.x2 = binio::get<double>(is);
    DNMatrix d{BoundaryMesh::square(om, M), CMat(M, M)};
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j) d.entries(i, j) = binio::get_complex(is);
    return d;
}

}  // namespace potrec
