#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles/frozen.hpp"
#include "potrec/errors.hpp"
#include "potrec/special.hpp"

using namespace potrec;
using namespace potrec::special;

TEST_CASE("bessel values match the frozen high-precision table") {
    for (const auto& o : oracle::kBessel) {
        INFO("n = " << o.n << ", r = " << o.r);
        CHECK(std::abs(bessel_j(o.n, o.r) - o.j) <= 1e-12 * std::abs(o.j));
        CHECK(std::abs(bessel_y(o.n, o.r) - o.y) <= 1e-12 * std::abs(o.y));
    }
}

TEST_CASE("three-term recurrence") {
    for (double r : {0.7, 3.0, 25.0, 150.0}) {
        const auto J = bessel_j_all(40, r), Y = bessel_y_all(40, r);
        for (int n = 1; n < 40; ++n) {
            const double sj = std::max({std::abs(J[n - 1]), std::abs(J[n + 1]), std::abs(2.0 * n / r * J[n])});
            const double sy = std::max({std::abs(Y[n - 1]), std::abs(Y[n + 1]), std::abs(2.0 * n / r * Y[n])});
            CHECK(std::abs(J[n - 1] + J[n + 1] - 2.0 * n / r * J[n]) <= 1e-10 * sj);
            CHECK(std::abs(Y[n - 1] + Y[n + 1] - 2.0 * n / r * Y[n]) <= 1e-10 * sy);
        }
    }
}

TEST_CASE("wronskian") {
    // J_{n+1} Y_n - J_n Y_{n+1} = 2 / (pi r)
    for (double r : {0.5, 2.0, 10.0, 75.0, 200.0})
        for (int n : {0, 1, 4, 12, 30}) {
            const double w = bessel_j(n + 1, r) * bessel_y(n, r) - bessel_j(n, r) * bessel_y(n + 1, r);
            const double expect = 2.0 / (std::numbers::pi * r);
            INFO("n = " << n << ", r = " << r);
            CHECK(std::abs(w - expect) <= 1e-10 * expect);
        }
}

TEST_CASE("negative orders") {
    for (int n : {1, 2, 7})
        for (double r : {0.9, 13.0}) {
            const double s = n % 2 ? -1.0 : 1.0;
            CHECK(hankel_h1(-n, r) == s * hankel_h1(n, r));
            CHECK(bessel_j(-n, r) == s * bessel_j(n, r));
        }
}

TEST_CASE("order 0 and 1 kernels agree with the general routines") {
    for (double r : {1e-3, 0.4, 6.0, 31.0, 180.0}) {
        CHECK(special::j0(r) == doctest::Approx(bessel_j(0, r)).epsilon(1e-12));
        CHECK(special::j1(r) == doctest::Approx(bessel_j(1, r)).epsilon(1e-12));
        CHECK(special::y0(r) == doctest::Approx(bessel_y(0, r)).epsilon(1e-12));
        CHECK(special::y1(r) == doctest::Approx(bessel_y(1, r)).epsilon(1e-12));
    }
}

TEST_CASE("large-argument hankel behaviour") {
    const std::complex<double> h = hankel_h1(0, 100.0), lead = hankel_h1_leading(0, 100.0);
    CHECK(std::abs(h - lead) <= 0.02 * std::abs(h));
    // the deviation from the leading term is the first correction (4n^2 - 1) / (8r) to leading order
    for (int n : {0, 3, 10})
        for (double r : {100.0, 150.0}) {
            const std::complex<double> hn = hankel_h1(n, r);
            const double rel = std::abs(hn - hankel_h1_leading(n, r)) / std::abs(hn);
            const double first = std::abs(4.0 * n * n - 1.0) / (8.0 * r);
            INFO("n = " << n << ", r = " << r);
            CHECK(rel == doctest::Approx(first).epsilon(0.1));
        }
}

TEST_CASE("outside the documented envelope") {
    CHECK_THROWS_AS(bessel_j(61, 1.0), DomainError);
    CHECK_THROWS_AS(bessel_j(2, 250.0), DomainError);
    CHECK_THROWS_AS(bessel_y(0, 0.0), DomainError);
    CHECK_THROWS_AS(hankel_h1(1, 0.0), DomainError);
    CHECK(bessel_j(0, 0.0) == 1.0);
    CHECK(bessel_j(3, 0.0) == 0.0);
}
