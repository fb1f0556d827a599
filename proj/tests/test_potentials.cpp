#include <doctest.h>

#include <cmath>

#include "oracles/frozen.hpp"
#include "potrec/errors.hpp"
#include "potrec/potentials.hpp"

using namespace potrec;

namespace {

PotentialSpec counterexample_spec(int j_max) {
    PotentialSpec s;
    s.kind = PotentialKind::counterexample;
    s.counter.beta = 0.85;
    s.counter.epsilon = 0.1;
    s.counter.j_min = 2;
    s.counter.j_max = j_max;
    return s;
}

std::vector<Grid> membership_grids() {
    return {Grid::centered(128, 2.0), Grid::centered(512, 2.0), Grid::centered(2048, 2.0)};
}

}  // namespace

TEST_CASE("profile functions match the frozen quadrature") {
    for (const auto& o : oracle::kPhi) CHECK(profile::phi(o.t) == doctest::Approx(o.value).epsilon(1e-10));
    for (const auto& o : oracle::kPhiHat)
        CHECK(std::abs(profile::phi_hat(o.t) - o.value) <= 1e-10 * std::max(1.0, std::abs(o.value)));
    CHECK(profile::phi(0.51) == 0.0);
}

TEST_CASE("smooth bump with zero amplitude is the zero field") {
    PotentialSpec s;
    s.bumps.push_back({{0.0, 0.0}, 0.3, 0.0});
    CHECK(realize(s, Grid::centered(64, 2.0)).max_abs() == 0.0);
}

TEST_CASE("bump support outside the domain is rejected") {
    PotentialSpec s;
    s.bumps.push_back({{0.3, 0.0}, 0.3, 1.0});
    CHECK_THROWS_AS(realize(s, Grid::centered(64, 2.0)), DomainError);
}

TEST_CASE("single-term counterexample equals the closed form") {
    // h = 1/80 puts 4 x1 and x2 on the oracle abscissae.
    const Grid g(128, 1.6, {-0.8, -0.8});
    const GridField v = realize(counterexample_spec(2), g);
    const double amp = std::pow(2.0, (1.0 - 0.85) * 2 + 1);
    auto phi_at = [](double t) {
        for (const auto& o : oracle::kPhi)
            if (std::abs(o.t - std::abs(t)) < 1e-12) return o.value;
        FAIL("no oracle abscissa");
        return 0.0;
    };
    for (const auto [c1, c2] : {std::pair{1, 8}, {2, 24}, {0, 16}, {-2, -8}, {0, 0}}) {
        const double x1 = c1 * g.h(), x2 = c2 * g.h();
        const cplx got = v(static_cast<std::size_t>(64 + c2), static_cast<std::size_t>(64 + c1));
        const double expect = amp * std::cos(4.0 * x2) * phi_at(4.0 * x1) * phi_at(x2);
        CHECK(std::abs(got - expect) <= 1e-10 * std::max(1.0, std::abs(expect)));
    }
}

TEST_CASE("counterexample vanishes outside its support box") {
    const Grid g = Grid::centered(512, 2.0);
    const GridField v = realize(counterexample_spec(6), g);
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t c = 0; c < g.n(); ++c)
            if (std::abs(g.x1(c)) > 0.125 || std::abs(g.x2(r)) > 0.5) REQUIRE(v(r, c) == 0.0);
}

TEST_CASE("counterexample needs a resolving grid") {
    CHECK_THROWS_AS(realize(counterexample_spec(8), Grid::centered(128, 2.0)), PreconditionError);
    CHECK(counterexample_required_n(counterexample_spec(8).counter, 2.0) == 2048);
}

TEST_CASE("sobolev membership dichotomy") {
    SUBCASE("zero potential") {
        PotentialSpec s;
        s.bumps.push_back({{0.0, 0.0}, 0.3, 0.0});
        const HsReport r = estimate_hs_membership(s, SobolevIndex(0.3), membership_grids());
        for (double n : r.norms) CHECK(n == 0.0);
        CHECK(r.bounded);
    }
    SUBCASE("below and above the critical index") {
        const auto grids = membership_grids();
        const HsReport lo = estimate_hs_membership(counterexample_spec(8), SobolevIndex(0.3), grids);
        const HsReport hi = estimate_hs_membership(counterexample_spec(8), SobolevIndex(0.6), grids);
        CHECK(lo.j_max_used == std::vector<int>{4, 6, 8});
        CHECK(lo.bounded);
        CHECK(hi.growth_ratio >= 2.0);
    }
}

TEST_CASE("energy shift") {
    const Grid g = Grid::centered(64, 2.0);
    const Square omega{{0.0, 0.0}, 1.0};
    const GridField mask = omega.indicator(g);
    PotentialSpec s;
    s.bumps.push_back({{0.1, 0.0}, 0.3, 2.0});
    const GridField v = realize(s, g);
    CHECK((shift_by_energy(v, 0.0, mask) - v).max_abs() == 0.0);
    const GridField z = shift_by_energy(GridField(g), 1.5, mask);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(z[i] == -2.25 * mask[i]);
    // mean(out) = mean(v) - kappa^2 |Omega| / |Q| with |Omega| counted on the lattice
    double cells = 0.0;
    for (const auto& m : mask.values()) cells += m.real();
    const cplx expect = v.mean() - 2.25 * cells / static_cast<double>(g.size());
    CHECK(std::abs(shift_by_energy(v, 1.5, mask).mean() - expect) <= 1e-12);
}

TEST_CASE("rough potential is reproducible from its seed") {
    PotentialSpec s;
    s.kind = PotentialKind::riesz_rough;
    s.rough.band = 16.0;
    s.rough.seed = 42;
    const Grid g = Grid::centered(128, 2.0);
    const GridField a = realize(s, g), b = realize(s, g);
    CHECK((a - b).max_abs() == 0.0);
    CHECK(a.max_abs() == doctest::Approx(1.0).epsilon(1e-12));
    s.rough.seed = 43;
    CHECK((realize(s, g) - a).max_abs() > 0.0);
}

TEST_CASE("potential kind names round trip") {
    for (auto k : {PotentialKind::smooth_bump, PotentialKind::cone, PotentialKind::riesz_rough,
                   PotentialKind::counterexample, PotentialKind::shifted})
        CHECK(potential_kind_from(to_string(k)) == k);
}
