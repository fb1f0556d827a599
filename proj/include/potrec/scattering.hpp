#pragma once

#include <string>
#include <vector>

#include "potrec/forward_dn.hpp"
#include "potrec/grid.hpp"

namespace potrec {

struct WaveNumber {
    double value;
    explicit WaveNumber(double k);
};

// (i/4) H_0^(1)(kappa |x - y|), the outgoing solution of (-Delta - kappa^2) G = delta.
cplx green0(Point x, Point y, WaveNumber kappa);

// u -> u + G_0 * (V u) on a periodic grid. The free Green's function is truncated at the
// support diameter, whose Fourier transform is known in closed form, so the periodic FFT
// convolution is exact for data supported in the disc around the origin.
class LsOperator {
public:
    LsOperator(const GridField& v, WaveNumber kappa);

    const Grid& grid() const { return v_.grid(); }
    const GridField& potential() const { return v_; }
    double kappa() const { return kappa_; }
    double support_radius() const { return rho_; }

    GridField convolve(const GridField& f) const;  // G_0 * f (f supported in the support disc)
    GridField apply(const GridField& u) const;     // u + G_0 * (V u)
    // GMRES on apply(u) = rhs; throws NoConvergence.
    GridField solve(const GridField& rhs, double tol, int max_iter = 300, double* residual = nullptr,
                    int* iterations = nullptr) const;
    // Outside the support: G_0 * (V u) at an arbitrary point by direct quadrature.
    cplx potential_integral(Point x, const GridField& u) const;

private:
    GridField v_;
    double kappa_;
    double rho_;
    CVec kernel_hat_;
};

struct LsSolution {
    GridField total;
    GridField scattered;
    double residual = 0.0;
    int iterations = 0;
};

LsSolution lippmann_schwinger(const GridField& v, Point direction, WaveNumber kappa, double tol = 1e-12);
LsSolution lippmann_schwinger(const LsOperator& op, Point direction, double tol = 1e-12);

struct AmplitudeTable {
    double kappa = 1.0;
    std::size_t angular_n = 0;
    int order = 0;       // N: coefficients kept for |n|, |m| <= N
    CMat samples;        // rows: sigma angle 2 pi a / angular_n, cols: omega angle
    CMat coeffs;         // (2N+1) x (2N+1), index n + N, m + N

    cplx coeff(int n, int m) const { return coeffs(n + order, m + order); }
};

// Coefficients of the double Fourier series in (phi_sigma, phi_omega); N limited by angular_n/2 - 1.
CMat amplitude_coefficients(const CMat& samples, int N);
CMat amplitude_samples_from(const CMat& coeffs, std::size_t angular_n);
// Largest ring index with a coefficient above ring_tol * max |a|.
int truncation_order(const CMat& full_coeffs, double ring_tol);

AmplitudeTable amplitude(const GridField& v, WaveNumber kappa, std::size_t angular_n, double tol = 1e-12,
                         double ring_tol = 1e-11);

struct AlphaBeta {
    int N = 0;
    CMat alpha;  // (2N+1)^2, index n + N, m + N
    CMat beta;
};

AlphaBeta alpha_beta_coefficients(const GridField& v, WaveNumber kappa, int N, double tol = 1e-12);

struct SeriesValue {
    cplx value;        // G_V(x, y) - G_0(x, y)
    double tail = 0.0; // magnitude of the outermost ring kept
};

// Requires |x| > |y| > R > rho.
SeriesValue green_v_series(const AmplitudeTable& amp, Point x, Point y, double rho, double R);
// Same sum for |x| >= |y| > rho; used for the single layer where both points lie on the boundary.
SeriesValue green_v_series_unordered(const AmplitudeTable& amp, Point x, Point y, double rho);

// G_V(x, y) for x, y outside the support by a point-source solve.
cplx green_v_direct(const LsOperator& op, Point x, Point y, double tol = 1e-12);

enum class LayerKernel { free, potential };

struct SingleLayer {
    BoundaryMesh mesh;
    CMat entries;
};

// Free kernel: G_0. Potential kernel: G_0 plus the amplitude series. Diagonal by the exact
// integral of the logarithmic part over the node's own panel.
SingleLayer single_layer(LayerKernel kernel, const BoundaryMesh& mesh, WaveNumber kappa,
                         const AmplitudeTable* amp = nullptr, double rho = 0.0);

struct NachmanResult {
    DNMatrix dn;
    double cond_v = 0.0;
    double cond_0 = 0.0;
    double inverse_residual = 0.0;  // max of ||S S^{-1} - I||_max over both inversions
};

NachmanResult nachman_dn(const SingleLayer& sl_v, const SingleLayer& sl_0, const DNMatrix& dn_minus_kappa2,
                         double max_condition = 1e12);

// Binary layout: "PRAT" | u32 version | f64 kappa | u64 angular_n | u64 N | samples | coeffs.
void write_amplitude_table(const std::string& path, const AmplitudeTable& t);
AmplitudeTable read_amplitude_table(const std::string& path);

}  // namespace potrec
