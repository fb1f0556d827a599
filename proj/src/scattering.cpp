#include "potrec/scattering.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "potrec/binio.hpp"
#include "potrec/errors.hpp"
#include "potrec/special.hpp"
#include "potrec/spectral.hpp"

namespace potrec {

namespace {

constexpr double kPi = std::numbers::pi;
const cplx kI(0.0, 1.0);

// Transform of (i/4) H_0(kappa r) restricted to r < D, at radial frequency rho.
cplx truncated_kernel_hat(double rho, double kappa, double D) {
    const cplx h0 = special::hankel_h1(0, kappa * D), h1 = special::hankel_h1(1, kappa * D);
    auto f = [&](double r) {
        return (1.0 + kI * (kPi * D / 2.0) * (r * h0 * special::j1(r * D) - kappa * h1 * special::j0(r * D))) /
               (r * r - kappa * kappa);
    };
    if (std::abs(rho - kappa) < 1e-5 * kappa) {
        const double d = 1e-4 * kappa;
        return 0.5 * (f(kappa - d) + f(kappa + d));
    }
    return f(rho);
}

using VecX = Eigen::VectorXcd;

// Restarted GMRES with modified Gram-Schmidt.
template <class Op>
VecX gmres(const Op& A, const VecX& b, double tol, int max_iter, int restart, double& rel_res, int& iters) {
    const double bn = b.norm();
    VecX x = VecX::Zero(b.size());
    iters = 0;
    rel_res = 0.0;
    if (bn == 0.0) return x;
    while (iters < max_iter) {
        VecX r = b - A(x);
        double beta = r.norm();
        rel_res = beta / bn;
        if (rel_res <= tol) return x;
        const int m = std::min(restart, max_iter - iters);
        std::vector<VecX> Q;
        Q.push_back(r / beta);
        Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
        std::vector<cplx> cs(m), sn(m);
        VecX g = VecX::Zero(m + 1);
        g[0] = beta;
        int used = 0;
        for (int j = 0; j < m; ++j) {
            VecX w = A(Q[j]);
            for (int i = 0; i <= j; ++i) {
                H(i, j) = Q[i].dot(w);
                w -= H(i, j) * Q[i];
            }
            H(j + 1, j) = w.norm();
            // apply previous rotations
            for (int i = 0; i < j; ++i) {
                const cplx t = std::conj(cs[i]) * H(i, j) + std::conj(sn[i]) * H(i + 1, j);
                H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
                H(i, j) = t;
            }
            const double a = std::abs(H(j, j)), c = std::abs(H(j + 1, j));
            const double nrm = std::hypot(a, c);
            cs[j] = nrm == 0.0 ? 1.0 : H(j, j) / nrm;
            sn[j] = nrm == 0.0 ? 0.0 : H(j + 1, j) / nrm;
            H(j, j) = nrm;
            H(j + 1, j) = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = std::conj(cs[j]) * g[j];
            ++used;
            ++iters;
            rel_res = std::abs(g[j + 1]) / bn;
            if (rel_res <= tol || c == 0.0) break;
            Q.push_back(w / c);
        }
        VecX y = VecX::Zero(used);
        for (int i = used - 1; i >= 0; --i) {
            cplx s = g[i];
            for (int k = i + 1; k < used; ++k) s -= H(i, k) * y[k];
            y[i] = s / H(i, i);
        }
        for (int i = 0; i < used; ++i) x += y[i] * Q[i];
        if (rel_res <= tol) {
            rel_res = (b - A(x)).norm() / bn;
            if (rel_res <= 10.0 * tol) return x;
        }
    }
    return x;
}

double polar_angle(Point p) { return std::atan2(p.x2, p.x1); }
double radius(Point p) { return std::hypot(p.x1, p.x2); }

// H_n(kappa r) e^{i n phi} for n = -N..N.
Eigen::VectorXcd hankel_row(int N, double kappa, Point p) {
    const double r = radius(p), phi = polar_angle(p);
    const auto J = special::bessel_j_all(N, kappa * r);
    const auto Y = special::bessel_y_all(N, kappa * r);
    Eigen::VectorXcd out(2 * N + 1);
    for (int n = -N; n <= N; ++n) {
        const int a = std::abs(n);
        const double sg = (n < 0 && a % 2 == 1) ? -1.0 : 1.0;
        out[n + N] = sg * cplx(J[a], Y[a]) * std::polar(1.0, n * phi);
    }
    return out;
}

// ((-1)^m / 16) i^{n+m} a_{n,m}, with coefficients below the noise floor removed.
CMat series_weights(const AmplitudeTable& amp) {
    const int N = amp.order;
    const double amax = amp.coeffs.cwiseAbs().maxCoeff();
    CMat c = CMat::Zero(2 * N + 1, 2 * N + 1);
    if (amax == 0.0) return c;
    for (int n = -N; n <= N; ++n)
        for (int m = -N; m <= N; ++m) {
            const cplx a = amp.coeff(n, m);
            if (std::abs(a) <= 1e-11 * amax) continue;
            const cplx ipow = std::pow(kI, ((n + m) % 4 + 4) % 4);
            c(n + N, m + N) = (m % 2 == 0 ? 1.0 : -1.0) / 16.0 * ipow * a;
        }
    return c;
}

}  // namespace

WaveNumber::WaveNumber(double k) : value(k) {
    if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("wave number must be positive");
}

cplx green0(Point x, Point y, WaveNumber kappa) {
    const double r = std::hypot(x.x1 - y.x1, x.x2 - y.x2);
    if (r == 0.0) throw DomainError("free Green's function is singular at x = y");
    const double kr = kappa.value * r;
    return 0.25 * kI * cplx(special::j0(kr), special::y0(kr));
}

LsOperator::LsOperator(const GridField& v, WaveNumber kappa) : v_(v), kappa_(kappa.value), rho_(0.0) {
    const Grid& g = v.grid();
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t q = 0; q < g.n(); ++q)
            if (v(r, q) != 0.0) rho_ = std::max(rho_, std::hypot(g.x1(q), g.x2(r)));
    for (auto& z : v_.values())
        if (z.imag() != 0.0) throw DomainError("scattering module expects a real potential");
    const double margin = g.h();
    rho_ += margin;
    const double L = g.side();
    if (!(L >= 4.0 * rho_))
        throw PreconditionError("periodic cell of side " + std::to_string(L) + " is too small for support radius " +
                                std::to_string(rho_) + "; need side >= 4 * radius");
    const Point o = g.origin();
    if (-o.x1 < rho_ || -o.x2 < rho_ || o.x1 + L < rho_ || o.x2 + L < rho_)
        throw PreconditionError("support disc around the origin must lie inside the grid");
    const double D = 0.5 * L;
    kernel_hat_ = symbol_table(g, [this, D](double a, double b) {
        return truncated_kernel_hat(std::hypot(a, b), kappa_, D);
    });
}

GridField LsOperator::convolve(const GridField& f) const { return fourier_multiplier(f, kernel_hat_); }

GridField LsOperator::apply(const GridField& u) const {
    GridField out = convolve(pointwise(v_, u));
    out += u;
    return out;
}

GridField LsOperator::solve(const GridField& rhs, double tol, int max_iter, double* residual, int* iterations) const {
    const Grid& g = grid();
    auto A = [&](const VecX& x) {
        GridField f(g, CVec(x.data(), x.data() + x.size()));
        const GridField y = apply(f);
        return VecX(Eigen::Map<const VecX>(y.values().data(), y.values().size()));
    };
    const VecX b = Eigen::Map<const VecX>(rhs.values().data(), rhs.values().size());
    double rr = 0.0;
    int it = 0;
    const VecX x = gmres(A, b, tol, max_iter, 60, rr, it);
    if (residual) *residual = rr;
    if (iterations) *iterations = it;
    if (rr > 10.0 * tol) throw NoConvergence(rr);
    return GridField(g, CVec(x.data(), x.data() + x.size()));
}

cplx LsOperator::potential_integral(Point x, const GridField& u) const {
    if (radius(x) < rho_) throw DomainError("evaluation point lies inside the support disc");
    const Grid& g = grid();
    cplx s{};
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t q = 0; q < g.n(); ++q) {
            const cplx vz = v_(r, q);
            if (vz == 0.0) continue;
            s += green0(x, {g.x1(q), g.x2(r)}, WaveNumber(kappa_)) * vz * u(r, q);
        }
    return s * g.h() * g.h();
}

LsSolution lippmann_schwinger(const LsOperator& op, Point dir, double tol) {
    const double nd = std::hypot(dir.x1, dir.x2);
    if (std::abs(nd - 1.0) > 1e-12) throw DomainError("incident direction must be a unit vector");
    const double k = op.kappa();
    const GridField inc =
        GridField::sample(op.grid(), [&](double a, double b) { return std::polar(1.0, k * (a * dir.x1 + b * dir.x2)); });
    LsSolution s{GridField(op.grid()), GridField(op.grid())};
    s.total = op.solve(inc, tol, 300, &s.residual, &s.iterations);
    s.scattered = s.total - inc;
    return s;
}

LsSolution lippmann_schwinger(const GridField& v, Point direction, WaveNumber kappa, double tol) {
    const LsOperator op(v, kappa);
    return lippmann_schwinger(op, direction, tol);
}

CMat amplitude_coefficients(const CMat& samples, int N) {
    const std::size_t na = static_cast<std::size_t>(samples.rows());
    if (samples.cols() != samples.rows()) throw DomainError("amplitude samples must be square");
    if (N < 0 || 2 * N + 1 > static_cast<int>(na)) throw DomainError("coefficient order exceeds angular sampling");
    CMat F(2 * N + 1, na);
    for (int n = -N; n <= N; ++n)
        for (std::size_t a = 0; a < na; ++a) F(n + N, a) = std::polar(1.0, -n * 2.0 * kPi * a / na);
    return F * samples * F.transpose() / static_cast<double>(na * na);
}

CMat amplitude_samples_from(const CMat& coeffs, std::size_t na) {
    const int N = static_cast<int>(coeffs.rows() - 1) / 2;
    CMat G(na, 2 * N + 1);
    for (std::size_t a = 0; a < na; ++a)
        for (int n = -N; n <= N; ++n) G(a, n + N) = std::polar(1.0, n * 2.0 * kPi * a / na);
    return G * coeffs * G.transpose();
}

int truncation_order(const CMat& full, double ring_tol) {
    const int Nf = static_cast<int>(full.rows() - 1) / 2;
    const double amax = full.cwiseAbs().maxCoeff();
    if (amax == 0.0) return 0;
    for (int N = Nf; N > 0; --N) {
        double ring = 0.0;
        for (int i = -N; i <= N; ++i) {
            ring = std::max({ring, std::abs(full(N + Nf, i + Nf)), std::abs(full(-N + Nf, i + Nf)),
                             std::abs(full(i + Nf, N + Nf)), std::abs(full(i + Nf, -N + Nf))});
        }
        if (ring > ring_tol * amax) return N;
    }
    return 0;
}

AmplitudeTable amplitude(const GridField& v, WaveNumber kappa, std::size_t na, double tol, double ring_tol) {
    if (na < 4) throw DomainError("need at least 4 angles per circle");
    const LsOperator op(v, kappa);
    const Grid& g = op.grid();
    std::vector<std::size_t> supp;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (v[i] != 0.0) supp.push_back(i);
    const double k = kappa.value, h2 = g.h() * g.h();
    CMat E(na, supp.size());  // e^{-i kappa sigma . z}
    for (std::size_t a = 0; a < na; ++a) {
        const double ph = 2.0 * kPi * a / na;
        for (std::size_t s = 0; s < supp.size(); ++s) {
            const std::size_t r = supp[s] / g.n(), q = supp[s] % g.n();
            E(a, s) = std::polar(1.0, -k * (std::cos(ph) * g.x1(q) + std::sin(ph) * g.x2(r)));
        }
    }
    AmplitudeTable t;
    t.kappa = k;
    t.angular_n = na;
    t.samples = CMat::Zero(na, na);
    const long nal = static_cast<long>(na);
#pragma omp parallel for schedule(dynamic)
    for (long b = 0; b < nal; ++b) {
        const double ph = 2.0 * kPi * b / na;
        const LsSolution sol = lippmann_schwinger(op, {std::cos(ph), std::sin(ph)}, tol);
        VecX vu(supp.size());
        for (std::size_t s = 0; s < supp.size(); ++s) vu[s] = v[supp[s]] * sol.total[supp[s]];
        t.samples.col(b) = h2 * (E * vu);
    }
    const int Nf = static_cast<int>(na / 2) - 1;
    const CMat full = amplitude_coefficients(t.samples, Nf);
    t.order = truncation_order(full, ring_tol);
    t.coeffs = full.block(Nf - t.order, Nf - t.order, 2 * t.order + 1, 2 * t.order + 1);
    return t;
}

AlphaBeta alpha_beta_coefficients(const GridField& v, WaveNumber kappa, int N, double tol) {
    if (N < 0 || N > 40) throw DomainError("coefficient order must lie in [0, 40]");
    const LsOperator op(v, kappa);
    const Grid& g = op.grid();
    const double h2 = g.h() * g.h();
    std::vector<std::size_t> supp;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (v[i] != 0.0) supp.push_back(i);
    // Jm(kappa |z|) e^{-i m phi_z} for m = -N..N at the support points
    CMat B(supp.size(), 2 * N + 1);
    for (std::size_t s = 0; s < supp.size(); ++s) {
        const std::size_t r = supp[s] / g.n(), q = supp[s] % g.n();
        const Point z{g.x1(q), g.x2(r)};
        const auto J = special::bessel_j_all(N, kappa.value * radius(z));
        const double phi = polar_angle(z);
        for (int m = -N; m <= N; ++m) {
            const int a = std::abs(m);
            const double sg = (m < 0 && a % 2 == 1) ? -1.0 : 1.0;
            B(s, m + N) = sg * J[a] * std::polar(1.0, -m * phi);
        }
    }
    VecX vs(supp.size());
    for (std::size_t s = 0; s < supp.size(); ++s) vs[s] = v[supp[s]];
    AlphaBeta ab;
    ab.N = N;
    ab.alpha = h2 * B.transpose() * vs.asDiagonal() * B;
    ab.beta = CMat::Zero(2 * N + 1, 2 * N + 1);
    for (int m = -N; m <= N; ++m) {
        GridField bm(g);
        for (std::size_t s = 0; s < supp.size(); ++s) bm[supp[s]] = vs[s] * B(s, m + N);
        const GridField u = op.solve(op.convolve(bm), tol);
        VecX vu(supp.size());
        for (std::size_t s = 0; s < supp.size(); ++s) vu[s] = vs[s] * u[supp[s]];
        ab.beta.col(m + N) = h2 * B.transpose() * vu;
    }
    return ab;
}

SeriesValue green_v_series_unordered(const AmplitudeTable& amp, Point x, Point y, double rho) {
    if (!(radius(x) > rho) || !(radius(y) > rho))
        throw DomainError("amplitude series needs both points outside the support disc");
    if (radius(x) < radius(y)) std::swap(x, y);
    const int N = amp.order;
    const CMat c = series_weights(amp);
    const VecX hx = hankel_row(N, amp.kappa, x), hy = hankel_row(N, amp.kappa, y);
    SeriesValue out{cplx{}, 0.0};
    for (int n = -N; n <= N; ++n)
        for (int m = -N; m <= N; ++m) {
            const cplx term = c(n + N, m + N) * hx[n + N] * hy[m + N];
            out.value += term;
            if (std::max(std::abs(n), std::abs(m)) == N) out.tail += std::abs(term);
        }
    return out;
}

SeriesValue green_v_series(const AmplitudeTable& amp, Point x, Point y, double rho, double R) {
    if (!(radius(x) > radius(y) && radius(y) > R && R > rho))
        throw DomainError("amplitude series is valid only for |x| > |y| > R > rho");
    return green_v_series_unordered(amp, x, y, rho);
}

cplx green_v_direct(const LsOperator& op, Point x, Point y, double tol) {
    const double rho = op.support_radius();
    if (radius(x) < rho || radius(y) < rho) throw DomainError("point-source solve needs points outside the support");
    const Grid& g = op.grid();
    GridField rhs(g);
    for (std::size_t r = 0; r < g.n(); ++r)
        for (std::size_t q = 0; q < g.n(); ++q)
            if (op.potential()(r, q) != 0.0) rhs(r, q) = green0({g.x1(q), g.x2(r)}, y, WaveNumber(op.kappa()));
    const GridField gv = op.solve(rhs, tol);
    return green0(x, y, WaveNumber(op.kappa())) - op.potential_integral(x, gv);
}

SingleLayer single_layer(LayerKernel kernel, const BoundaryMesh& mesh, WaveNumber kappa, const AmplitudeTable* amp,
                         double rho) {
    const std::size_t M = mesh.size();
    const double w = mesh.spacing(), k = kappa.value;
    SingleLayer sl{mesh, CMat(M, M)};
    // (i/4) H_0(kappa r) = -(1/2pi) log r + c0 + O(r^2 log r)
    const cplx c0 = 0.25 * kI - (std::log(0.5 * k) + std::numbers::egamma) / (2.0 * kPi);
    const cplx diag = c0 * w - w / (2.0 * kPi) * (std::log(0.5 * w) - 1.0);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j)
            sl.entries(i, j) = i == j ? diag : green0(mesh.nodes[i], mesh.nodes[j], kappa) * w;
    if (kernel == LayerKernel::free) return sl;
    if (!amp) throw DomainError("potential kernel needs an amplitude table");
    if (std::abs(amp->kappa - k) > 1e-12 * k) throw DomainError("amplitude table was computed at another wave number");
    for (const auto& p : mesh.nodes)
        if (!(radius(p) > rho)) throw DomainError("boundary node lies inside the support disc of the potential");
    const int N = amp->order;
    const CMat c = series_weights(*amp);
    CMat H(M, 2 * N + 1);
    for (std::size_t i = 0; i < M; ++i) H.row(i) = hankel_row(N, k, mesh.nodes[i]).transpose();
    const CMat D = H * c * H.transpose();
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j) {
            // the first slot holds the point farther from the origin
            const bool keep = radius(mesh.nodes[i]) >= radius(mesh.nodes[j]);
            sl.entries(i, j) += (keep ? D(i, j) : D(j, i)) * w;
        }
    return sl;
}

NachmanResult nachman_dn(const SingleLayer& sl_v, const SingleLayer& sl_0, const DNMatrix& dn, double max_condition) {
    if (!sl_v.mesh.same_as(sl_0.mesh) || !sl_v.mesh.same_as(dn.mesh))
        throw DomainError("single layers and DN matrix live on different meshes");
    NachmanResult res{dn, condition_number(sl_v.entries), condition_number(sl_0.entries), 0.0};
    if (!(res.cond_v <= max_condition)) throw IllConditioned(res.cond_v, " (potential single layer)");
    if (!(res.cond_0 <= max_condition)) throw IllConditioned(res.cond_0, " (free single layer)");
    const std::size_t M = dn.mesh.size();
    const CMat Iv = sl_v.entries.partialPivLu().inverse();
    const CMat I0 = sl_0.entries.partialPivLu().inverse();
    const CMat Id = CMat::Identity(M, M);
    res.inverse_residual = std::max((sl_v.entries * Iv - Id).cwiseAbs().maxCoeff(),
                                    (sl_0.entries * I0 - Id).cwiseAbs().maxCoeff());
    res.dn.entries = dn.entries + (Iv - I0);  // grouped so equal layers cancel exactly
    return res;
}

void write_amplitude_table(const std::string& path, const AmplitudeTable& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    binio::put_magic(os, "PRAT");
    binio::put<std::uint32_t>(os, 1);
    binio::put(os, t.kappa);
    binio::put<std::uint64_t>(os, t.angular_n);
    binio::put<std::uint64_t>(os, static_cast<std::uint64_t>(t.order));
    for (std::size_t a = 0; a < t.angular_n; ++a)
        for (std::size_t b = 0; b < t.angular_n; ++b) binio::put_complex(os, t.samples(a, b));
    for (Eigen::Index a = 0; a < t.coeffs.rows(); ++a)
        for (Eigen::Index b = 0; b < t.coeffs.cols(); ++b) binio::put_complex(os, t.coeffs(a, b));
}

AmplitudeTable read_amplitude_table(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    if (!binio::check_magic(is, "PRAT")) throw std::runtime_error("not an amplitude table: " + path);
    if (binio::get<std::uint32_t>(is) != 1) throw std::runtime_error("unsupported amplitude table version");
    AmplitudeTable t;
    t.kappa = binio::get<double>(is);
    t.angular_n = binio::get<std::uint64_t>(is);
    t.order = static_cast<int>(binio::get<std::uint64_t>(is));
    t.samples = CMat(t.angular_n, t.angular_n);
    for (std::size_t a = 0; a < t.angular_n; ++a)
        for (std::size_t b = 0; b < t.angular_n; ++b) t.samples(a, b) = binio::get_complex(is);
    const int w = 2 * t.order + 1;
    t.coeffs = CMat(w, w);
    for (int a = 0; a < w; ++a)
        for (int b = 0; b < w; ++b) t.coeffs(a, b) = binio::get_complex(is);
    return t;
}

}  // namespace potrec
