#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace potrec {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

struct Point {
    double x1 = 0.0;
    double x2 = 0.0;
};

// Uniform periodic lattice over the square [ox, ox+L) x [oy, oy+L).
class Grid {
public:
    Grid(std::size_t n, double side, Point origin);

    std::size_t n() const { return n_; }
    std::size_t size() const { return n_ * n_; }
    double side() const { return side_; }
    Point origin() const { return origin_; }
    double h() const { return side_ / static_cast<double>(n_); }
    Point center() const { return {origin_.x1 + 0.5 * side_, origin_.x2 + 0.5 * side_}; }

    // Row index runs over x2, column index over x1.
    double x1(std::size_t col) const { return origin_.x1 + h() * static_cast<double>(col); }
    double x2(std::size_t row) const { return origin_.x2 + h() * static_cast<double>(row); }
    std::size_t idx(std::size_t row, std::size_t col) const { return row * n_ + col; }

    // Angular frequency of FFT bin i (standard fftfreq ordering).
    double freq(std::size_t i) const;
    int signed_bin(std::size_t i) const;

    // Nearest lattice indices of a point (rows/cols may be outside [0,n) before wrapping).
    long nearest_col(double x1) const;
    long nearest_row(double x2) const;
    std::size_t wrap(long i) const;

    bool same_as(const Grid& o) const;

    // Grid centered at c with the given side.
    static Grid centered(std::size_t n, double side, Point c = {});

private:
    std::size_t n_;
    double side_;
    Point origin_;
};

class GridField {
public:
    explicit GridField(const Grid& g) : grid_(g), v_(g.size(), cplx{}) {}
    GridField(const Grid& g, CVec values);

    const Grid& grid() const { return grid_; }
    CVec& values() { return v_; }
    const CVec& values() const { return v_; }
    cplx& operator()(std::size_t row, std::size_t col) { return v_[grid_.idx(row, col)]; }
    const cplx& operator()(std::size_t row, std::size_t col) const { return v_[grid_.idx(row, col)]; }
    cplx& operator[](std::size_t i) { return v_[i]; }
    const cplx& operator[](std::size_t i) const { return v_[i]; }

    template <class F>
    static GridField sample(const Grid& g, F&& f) {
        GridField out(g);
        for (std::size_t r = 0; r < g.n(); ++r)
            for (std::size_t c = 0; c < g.n(); ++c) out(r, c) = f(g.x1(c), g.x2(r));
        return out;
    }

    cplx mean() const;
    double l2_norm() const;  // (h^2 sum |f|^2)^{1/2}
    double max_abs() const;
    cplx integral() const;   // h^2 sum f

    GridField& operator+=(const GridField& o);
    GridField& operator-=(const GridField& o);
    GridField& operator*=(cplx s);

private:
    Grid grid_;
    CVec v_;
};

GridField operator+(GridField a, const GridField& b);
GridField operator-(GridField a, const GridField& b);
GridField operator*(GridField a, cplx s);
GridField pointwise(const GridField& a, const GridField& b);

// Binary layout: "PRGF" | u32 version | u64 n | f64 side | f64 ox | f64 oy | n*n (f64 re, f64 im), little endian.
// Text layout: "gridfield <n> <side> <ox> <oy>" then one "re im" pair per line in row-major order.
void write_grid_field(const std::string& path, const GridField& f, bool binary = true);
GridField read_grid_field(const std::string& path);

}  // namespace potrec
