#include "potrec/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "potrec/binio.hpp"
#include "potrec/errors.hpp"

namespace potrec {

namespace {
bool is_pow2(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }
}  // namespace

Grid::Grid(std::size_t n, double side, Point origin) : n_(n), side_(side), origin_(origin) {
    if (!is_pow2(n)) throw DomainError("grid size must be a power of two, got " + std::to_string(n));
    if (!(side > 0.0) || !std::isfinite(side)) throw DomainError("grid side length must be positive");
}

Grid Grid::centered(std::size_t n, double side, Point c) {
    return Grid(n, side, {c.x1 - 0.5 * side, c.x2 - 0.5 * side});
}

int Grid::signed_bin(std::size_t i) const {
    const auto half = n_ / 2;
    return i < half ? static_cast<int>(i) : static_cast<int>(i) - static_cast<int>(n_);
}

double Grid::freq(std::size_t i) const { return 2.0 * std::numbers::pi / side_ * signed_bin(i); }

long Grid::nearest_col(double x) const { return std::lround((x - origin_.x1) / h()); }
long Grid::nearest_row(double y) const { return std::lround((y - origin_.x2) / h()); }

std::size_t Grid::wrap(long i) const {
    const long n = static_cast<long>(n_);
    long r = i % n;
    if (r < 0) r += n;
    return static_cast<std::size_t>(r);
}

bool Grid::same_as(const Grid& o) const {
    return n_ == o.n_ && side_ == o.side_ && origin_.x1 == o.origin_.x1 && origin_.x2 == o.origin_.x2;
}

GridField::GridField(const Grid& g, CVec values) : grid_(g), v_(std::move(values)) {
    if (v_.size() != g.size()) throw DomainError("field size does not match grid");
}

cplx GridField::mean() const {
    cplx s{};
    for (const auto& z : v_) s += z;
    return s / static_cast<double>(v_.size());
}

double GridField::l2_norm() const {
    double s = 0.0;
    for (const auto& z : v_) s += std::norm(z);
    return std::sqrt(s) * grid_.h();
}

double GridField::max_abs() const {
    double m = 0.0;
    for (const auto& z : v_) m = std::max(m, std::abs(z));
    return m;
}

cplx GridField::integral() const {
    cplx s{};
    for (const auto& z : v_) s += z;
    return s * grid_.h() * grid_.h();
}

GridField& GridField::operator+=(const GridField& o) {
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
}

GridField& GridField::operator-=(const GridField& o) {
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
}

GridField& GridField::operator*=(cplx s) {
    for (auto& z : v_) z *= s;
    return *this;
}

GridField operator+(GridField a, const GridField& b) { return a += b; }
GridField operator-(GridField a, const GridField& b) { return a -= b; }
GridField operator*(GridField a, cplx s) { return a *= s; }

GridField pointwise(const GridField& a, const GridField& b) {
    GridField out(a.grid());
    for (std::size_t i = 0; i < a.values().size(); ++i) out[i] = a[i] * b[i];
    return out;
}

void write_grid_field(const std::string& path, const GridField& f, bool binary) {
    const auto& g = f.grid();
    if (binary) {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + path);
        binio::put_magic(os, "PRGF");
        binio::put<std::uint32_t>(os, 1);
        binio::put<std::uint64_t>(os, g.n());
        binio::put(os, g.side());
        binio::put(os, g.origin().x1);
        binio::put(os, g.origin().x2);
        for (const auto& z : f.values()) binio::put_complex(os, z);
        return;
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.precision(17);
    os << "gridfield " << g.n() << ' ' << g.side() << ' ' << g.origin().x1 << ' ' << g.origin().x2 << '\n';
    for (const auto& z : f.values()) os << z.real() << ' ' << z.imag() << '\n';
}

GridField read_grid_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    if (binio::check_magic(is, "PRGF")) {
        const auto version = binio::get<std::uint32_t>(is);
        if (version != 1) throw std::runtime_error("unsupported grid field version");
        const auto n = binio::get<std::uint64_t>(is);
        const double side = binio::get<double>(is);
        const double ox = binio::get<double>(is);
        const double oy = binio::get<double>(is);
        Grid g(n, side, {ox, oy});
        GridField f(g);
        for (auto& z : f.values()) z = binio::get_complex(is);
        return f;
    }
    is.clear();
    is.seekg(0);
    std::string tag;
    std::size_t n;
    double side, ox, oy;
    is >> tag >> n >> side >> ox >> oy;
    if (tag != "gridfield" || !is) throw std::runtime_error("not a grid field file: " + path);
    Grid g(n, side, {ox, oy});
    GridField f(g);
    for (auto& z : f.values()) {
        double re, im;
        is >> re >> im;
        if (!is) throw std::runtime_error("truncated grid field file: " + path);
        z = {re, im};
    }
    return f;
}

}  // namespace potrec
