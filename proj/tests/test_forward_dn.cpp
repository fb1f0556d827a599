#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "potrec/errors.hpp"
#include "potrec/forward_dn.hpp"

using namespace potrec;

namespace {

constexpr double kPi = std::numbers::pi;
const Square kOmega{{0.0, 0.0}, 1.0};

GridField constant_field(const Grid& g, double c) {
    GridField f(g);
    for (auto& z : f.values()) z = c;
    return f;
}

GridField bump(const Grid& g, double amplitude = 1.0, double radius = 0.4) {
    PotentialSpec s;
    s.bumps.push_back({{0.0, 0.0}, radius, amplitude});
    return realize(s, g);
}

BoundaryTrace random_real_trace(const BoundaryMesh& m, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    BoundaryTrace t{m, CVec(m.size())};
    for (auto& z : t.values) z = nd(rng);
    return t;
}

double op_norm(const CMat& a) { return Eigen::BDCSVD<CMat>(a).singularValues()(0); }

}  // namespace

TEST_CASE("boundary mesh layout") {
    const BoundaryMesh m = BoundaryMesh::square(kOmega, 16);
    CHECK(m.size() == 16);
    CHECK(m.nodes[0].x1 == -0.5);
    CHECK(m.nodes[0].x2 == -0.5);
    CHECK(m.nodes[4].x1 == 0.5);  // corners every M/4 nodes, counterclockwise
    CHECK(m.nodes[8].x2 == 0.5);
    double total = 0.0;
    for (double w : m.weights) total += w;
    CHECK(total == doctest::Approx(m.perimeter()).epsilon(1e-15));
    CHECK_THROWS_AS(BoundaryMesh::square(kOmega, 10), DomainError);
}

TEST_CASE("dirichlet solver reproduces harmonic data") {
    const Grid g = Grid::centered(128, 2.0);
    const BoundaryMesh mesh = BoundaryMesh::square(kOmega, 128);
    SUBCASE("constant") {
        const FdSolution s = solve_dirichlet(GridField(g), BoundaryTrace::sample(mesh, [](Point) { return cplx(1.0); }), 32);
        for (const auto& z : s.values) CHECK(std::abs(z - 1.0) <= 1e-12);
    }
    SUBCASE("linear") {
        // the five-point stencil is exact on affine functions
        const FdSolution s = solve_dirichlet(GridField(g), BoundaryTrace::sample(mesh, [](Point p) { return cplx(p.x1); }), 32);
        double err = 0.0;
        for (std::size_t i = 0; i <= s.m; ++i)
            for (std::size_t j = 0; j <= s.m; ++j) err = std::max(err, std::abs(s.at(i, j) - (-0.5 + j / 32.0)));
        CHECK(err <= 1e-10);
        CHECK(s.residual <= 1e-12);
    }
}

TEST_CASE("dirichlet solver against the discrete separable solution") {
    // u = sin(p pi (x1 + 1/2)) sinh(theta j) / sinh(theta m) solves the lattice equation for constant c when
    // 2 (cosh theta - 1) = h^2 c + 4 sin^2(p pi h / 2).
    const std::size_t m = 64;
    const double h = 1.0 / m, c = 3.0;
    const int p = 2;
    const double theta = std::acosh(1.0 + 0.5 * (h * h * c + 4.0 * std::pow(std::sin(p * kPi * h / 2.0), 2)));
    const Grid g = Grid::centered(128, 2.0);
    const BoundaryMesh mesh = BoundaryMesh::square(kOmega, 4 * m);  // mesh nodes sit on the lattice boundary
    const BoundaryTrace f = BoundaryTrace::sample(mesh, [&](Point q) {
        return q.x2 == 0.5 ? cplx(std::sin(p * kPi * (q.x1 + 0.5))) : cplx(0.0);
    });
    const FdSolution s = solve_dirichlet(constant_field(g, c), f, m);
    double err = 0.0;
    for (std::size_t i = 0; i <= m; ++i)
        for (std::size_t j = 0; j <= m; ++j) {
            const double exact = std::sin(p * kPi * (j * h)) * std::sinh(theta * i) / std::sinh(theta * m);
            err = std::max(err, std::abs(s.at(i, j) - exact));
        }
    CHECK(err <= 1e-6);
}

TEST_CASE("dirichlet solver rejects complex potentials") {
    const Grid g = Grid::centered(64, 2.0);
    GridField v = constant_field(g, 1.0);
    for (auto& z : v.values()) z += cplx(0.0, 0.5);
    CHECK_THROWS_AS(FdDirichlet(v, kOmega, 16), DomainError);
}

TEST_CASE("dirichlet-to-neumann matrix") {
    const Grid g = Grid::centered(128, 2.0);
    const BoundaryMesh mesh = BoundaryMesh::square(kOmega, 64);
    const DNMatrix d0 = dn_matrix(GridField(g), mesh, 64);
    SUBCASE("constants are in the kernel without a potential") {
        CVecE one = CVecE::Ones(64);
        CHECK((d0.entries * one).norm() <= 1e-8 * op_norm(d0.entries) * one.norm());
    }
    SUBCASE("symmetric in the weighted pairing") {
        const DNMatrix dv = dn_matrix(bump(g), mesh, 64);
        std::mt19937_64 rng(5);
        for (int t = 0; t < 10; ++t) {
            const BoundaryTrace f = random_real_trace(mesh, rng), q = random_real_trace(mesh, rng);
            const cplx a = alessandrini_pairing(dv, f, q), b = alessandrini_pairing(dv, q, f);
            CHECK(std::abs(a - b) <= 1e-6 * std::abs(a));
        }
    }
    SUBCASE("monotone in the potential") {
        const DNMatrix dc = dn_matrix(constant_field(g, 2.0), mesh, 64);
        std::mt19937_64 rng(6);
        for (int t = 0; t < 10; ++t) {
            const BoundaryTrace f = random_real_trace(mesh, rng);
            CHECK(alessandrini_pairing(dc - d0, f, f).real() > 0.0);
        }
    }
    SUBCASE("serial and parallel assembly agree") {
        const DNMatrix ds = dn_matrix(bump(g), mesh, 64, kernels::Exec::serial);
        const DNMatrix dp = dn_matrix(bump(g), mesh, 64, kernels::Exec::parallel);
        CHECK((ds.entries - dp.entries).norm() <= 1e-12 * ds.entries.norm());
    }
}

TEST_CASE("alessandrini pairing" * doctest::timeout(300)) {
    const Grid g = Grid::centered(256, 2.0);
    const BoundaryMesh mesh = BoundaryMesh::square(kOmega, 256);
    const std::size_t m = 256;
    const GridField v = bump(g, 2.0);
    const DNMatrix diff = dn_matrix(v, mesh, m) - dn_matrix(GridField(g), mesh, m);
    const BoundaryTrace f = BoundaryTrace::sample(mesh, [](Point p) { return cplx(1.0 + p.x1 * p.x2, 0.0) + p.x2; });
    const BoundaryTrace one = BoundaryTrace::sample(mesh, [](Point) { return cplx(1.0); });

    SUBCASE("zero difference pairs to zero") {
        const DNMatrix z = dn_matrix(GridField(g), mesh, 64);
        CHECK(std::abs(alessandrini_pairing(z - z, f, one)) == 0.0);
    }
    SUBCASE("pairing with the constant is the potential moment") {
        // <(L_v - L_0) f, 1> = integral of v u_f; trapezoid on the solver lattice
        const FdSolution s = solve_dirichlet(v, f, m);
        std::vector<Point> pts;
        for (std::size_t i = 0; i <= m; ++i)
            for (std::size_t j = 0; j <= m; ++j) pts.push_back({-0.5 + j / double(m), -0.5 + i / double(m)});
        const CVec vn = interpolate_at(v, pts);
        cplx integral{};
        for (std::size_t i = 0; i <= m; ++i)
            for (std::size_t j = 0; j <= m; ++j) {
                double w = 1.0;
                if (i == 0 || i == m) w *= 0.5;
                if (j == 0 || j == m) w *= 0.5;
                integral += w * vn[i * (m + 1) + j] * s.at(i, j);
            }
        integral /= double(m * m);
        const cplx pair = alessandrini_pairing(diff, f, one);
        CHECK(std::abs(pair - integral) <= 1e-3 * std::abs(integral));
    }
    SUBCASE("bilinear") {
        std::mt19937_64 rng(8);
        const BoundaryTrace a = random_real_trace(mesh, rng), b = random_real_trace(mesh, rng);
        BoundaryTrace mix{mesh, CVec(mesh.size())};
        const cplx s(0.3, -1.2);
        for (std::size_t i = 0; i < mesh.size(); ++i) mix.values[i] = a.values[i] + s * b.values[i];
        const cplx lhs = alessandrini_pairing(diff, mix, f);
        const cplx rhs = alessandrini_pairing(diff, a, f) + s * alessandrini_pairing(diff, b, f);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs));
    }
}

TEST_CASE("exterior kernel" * doctest::timeout(600)) {
    const Grid g = Grid::centered(512, 2.0);
    const CellLayout cell(g, kOmega);
    const InverseDerivatives inv(cell);
    const GridField v = bump(g);
    const GridField one = constant_field(g, 1.0);
    const long zr = 256, zc = 256 + 180;  // z = (0.703, 0)
    const Point z{g.x1(zc), g.x2(zr)};

    SUBCASE("harmonic in the target square") {
        // fourth-order Laplacian over a few cells inside the square, relative to one second derivative
        for (double k : {64.0, 128.0}) {
            const KernelEvaluator ev(cell, inv, {k, {0.05, 0.0}}, 2.0);
            const GridField F = ev.conjugated_field(z);
            double lap = 0.0, d11 = 0.0;
            for (std::size_t r = 2; r + 2 < g.n(); ++r)
                for (std::size_t c = 2; c + 2 < g.n(); ++c) {
                    if (!kOmega.contains({g.x1(c), g.x2(r)}, 4.0 * g.h())) continue;
                    const cplx a = (-F(r, c + 2) + 16.0 * F(r, c + 1) - 30.0 * F(r, c) + 16.0 * F(r, c - 1) - F(r, c - 2)) / 12.0;
                    const cplx b = (-F(r + 2, c) + 16.0 * F(r + 1, c) - 30.0 * F(r, c) + 16.0 * F(r - 1, c) - F(r - 2, c)) / 12.0;
                    lap = std::max(lap, std::abs(a + b));
                    d11 = std::max(d11, std::abs(a));
                }
            INFO("k = " << k);
            CHECK(lap <= 1e-4 * d11);
        }
    }
    SUBCASE("integrating against v e^{i psi} reproduces S applied to 1") {
        // The kernel is built from a Gaussian blob around z, so S is averaged with the same blob.
        for (double k : {1.0, 16.0, 64.0}) {
            const PhaseParams p{k, {0.05, 0.0}};
            const GridField F = KernelEvaluator(cell, inv, p, 2.0).conjugated_field(z);
            const GridField psi = phase_field(p, g);
            cplx lhs{};
            for (std::size_t i = 0; i < g.size(); ++i) lhs += F[i] * v[i] * std::exp(cplx(0.0, 1.0) * psi[i]);
            lhs *= g.h() * g.h();
            const GridField S = SOperator(cell, inv, v, p).apply(one);
            const double width = 2.0 * g.h();
            double total = 0.0;
            cplx avg{};
            for (std::size_t r = 0; r < g.n(); ++r)
                for (std::size_t c = 0; c < g.n(); ++c) {
                    const double d1 = g.x1(c) - z.x1, d2 = g.x2(r) - z.x2;
                    const double w = std::exp(-(d1 * d1 + d2 * d2) / (width * width));
                    total += w;
                    avg += w * S(r, c);
                }
            avg /= total;
            INFO("k = " << k);
            CHECK(std::abs(lhs - avg) <= 1e-6 * std::abs(avg));
        }
    }
    SUBCASE("finite for k up to 256") {
        const BoundaryMesh mesh = BoundaryMesh::square(kOmega, 128);
        for (double k : {16.0, 64.0, 256.0}) {
            const BoundaryTrace t = g_psi_kernel({0.9, 0.3}, mesh, {k, {0.0, 0.1}}, cell, inv);
            for (const auto& q : t.values) REQUIRE(std::isfinite(std::abs(q)));
        }
    }
    SUBCASE("batched evaluation matches one point at a time") {
        const BoundaryMesh mesh = BoundaryMesh::square(kOmega, 64);
        const KernelEvaluator ev(cell, inv, {32.0, {0.05, -0.1}}, 2.0);
        const std::vector<std::pair<long, long>> zs{{256, 436}, {60, 300}, {470, 20}, {-5, 520}};
        for (auto e : {kernels::Exec::serial, kernels::Exec::parallel}) {
            const CMat all = ev.conjugated_at_nodes(zs, mesh, e);
            for (std::size_t k = 0; k < zs.size(); ++k) {
                const CVec one = ev.conjugated_at_nodes(zs[k].first, zs[k].second, mesh);
                double err = 0.0, scale = 0.0;
                for (std::size_t i = 0; i < mesh.size(); ++i) {
                    err = std::max(err, std::abs(all(static_cast<Eigen::Index>(k), i) - one[i]));
                    scale = std::max(scale, std::abs(one[i]));
                }
                CHECK(err <= 1e-10 * scale);
            }
        }
    }
    SUBCASE("points inside the square are rejected") {
        const BoundaryMesh mesh = BoundaryMesh::square(kOmega, 16);
        CHECK_THROWS_AS(g_psi_kernel({0.2, 0.5}, mesh, {16.0, {}}, cell, inv), DomainError);
    }
}

TEST_CASE("boundary integral operator and trace recovery" * doctest::timeout(600)) {
    const Grid g = Grid::centered(256, 2.0);
    const CellLayout cell(g, kOmega);
    const InverseDerivatives inv(cell);
    const BoundaryMesh mesh = BoundaryMesh::square(kOmega, 128);
    const PhaseParams p{32.0, {0.0, 0.0}};
    const DNMatrix d0 = dn_matrix(GridField(g), mesh, 128);

    SUBCASE("zero difference") {
        const DNMatrix z = d0 - d0;
        CHECK(gamma_psi_matrix(z, p, cell, inv).norm() == 0.0);
        const TraceRecovery t = recover_boundary_trace(z, p, cell, inv);
        const CVec e = phase_trace(p, mesh);
        for (std::size_t i = 0; i < mesh.size(); ++i) CHECK(std::abs(t.trace.values[i] - e[i]) <= 1e-14);
    }
    SUBCASE("contraction for a smooth potential") {
        const DNMatrix diff = dn_matrix(bump(g, 1.0, 0.45), mesh, 128) - d0;
        const CMat gm = gamma_psi_matrix(diff, p, cell, inv);
        CHECK(spectral_radius(gm) < 1.0);
        const TraceRecovery t = recover_boundary_trace(diff, p, cell, inv);
        CHECK(t.solve_residual <= 1e-10);
        CHECK(t.spectral_radius < 1.0);
    }
}

TEST_CASE("DN matrix file round trip") {
    const Grid g = Grid::centered(64, 2.0);
    const DNMatrix d = dn_matrix(bump(g), BoundaryMesh::square(kOmega, 32), 32);
    const auto path = (std::filesystem::temp_directory_path() / "potrec_dn.prdn").string();
    write_dn_matrix(path, d);
    const DNMatrix back = read_dn_matrix(path);
    CHECK(back.mesh.same_as(d.mesh));
    CHECK((back.entries - d.entries).norm() == 0.0);
    std::filesystem::remove(path);
}
