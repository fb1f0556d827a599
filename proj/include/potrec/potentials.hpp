#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "potrec/grid.hpp"
#include "potrec/spectral.hpp"

namespace potrec {

// Axis-parallel square (the domain where the potential lives).
struct Square {
    Point center{};
    double side = 1.0;

    double half() const { return 0.5 * side; }
    bool contains(Point p, double margin = 0.0) const;
    GridField indicator(const Grid& g) const;
};

enum class PotentialKind { smooth_bump, cone, riesz_rough, counterexample, shifted };

// One radial compactly supported bump: amplitude * e * exp(-1/(1-(r/radius)^2)), peak = amplitude.
struct Bump {
    Point center{};
    double radius = 0.3;
    double amplitude = 1.0;
};

// amplitude * (1 - r/slope_radius) * exp(-r^2/width^2): Gaussian with a conical tip (H^{2-} at the tip).
struct ConeBump {
    Point center{};
    double slope_radius = 1.0;
    double width = 1.5;
    double amplitude = 1.0;
};

struct RieszRough {
    double s = 0.75;          // target regularity
    double band = 64.0;       // frequency cutoff of the random L^2 field
    double amplitude = 1.0;   // sup-norm after cutoff
    std::uint64_t seed = 1;   // std::mt19937_64
    Point center{};
    double radius = 0.4;      // smooth cutoff radius
};

enum class Orientation { unrotated, rotated45 };

struct Counterexample {
    double beta = 0.85;
    double epsilon = 0.1;
    int j_min = 2;
    int j_max = 8;
    Orientation orientation = Orientation::unrotated;
    // Restrict to one signed mode exp(+-i 2^j x2) (sign = +1/-1) at scale j_single; 0 keeps all.
    int single_sign = 0;
    int j_single = 0;
};

struct PotentialSpec {
    PotentialKind kind = PotentialKind::smooth_bump;
    Square omega{};
    std::vector<Bump> bumps;
    std::vector<ConeBump> cones;
    RieszRough rough{};
    Counterexample counter{};
    double kappa = 0.0;                        // shifted kind only
    std::vector<PotentialSpec> base;           // shifted kind: exactly one entry
};

// Sample the potential. Counterexample requires 4 samples per finest scale 2^{-j_max}.
GridField realize(const PotentialSpec& spec, const Grid& grid);
double sup_norm_bound(const PotentialSpec& spec);  // analytic bound of sup|V| where available

// Smallest power-of-two n on a grid of the given side that resolves the counterexample.
std::size_t counterexample_required_n(const Counterexample& c, double side, double samples = 4.0);

struct HsReport {
    std::vector<std::size_t> grid_sizes;
    std::vector<int> j_max_used;
    std::vector<double> norms;
    double growth_ratio = 1.0;  // last / first
    bool bounded = true;        // growth_ratio < 2
};

HsReport estimate_hs_membership(const PotentialSpec& spec, SobolevIndex s, const std::vector<Grid>& grids);

GridField shift_by_energy(const GridField& v, double kappa, const GridField& omega_mask);

// Profiles of the counterexample building block.
namespace profile {
double bump1(double t);        // exp(-1/(1-t^2)) on |t|<1
double phi_o(double t);        // unit-integral bump on [-1/4, 1/4]
double phi(double t);          // phi_o * phi_o, supported in [-1/2, 1/2]
double phi_hat(double eta);    // Fourier transform of phi, equals phi_o_hat^2 >= 0
double phi_o_hat(double eta);
double smoothstep(double t);   // C-infinity 0 -> 1 on [0,1]
}  // namespace profile

std::string to_string(PotentialKind k);
PotentialKind potential_kind_from(const std::string& s);

}  // namespace potrec
