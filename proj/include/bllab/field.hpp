#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "fft.hpp"
#include "grid.hpp"

namespace bllab {

using cplx = std::complex<double>;

// Scalar field on a Grid, stored as Fourier coefficients in x per y-row
// (row i holds the Nx coefficients of f(., y_i)). Physical values are
// materialized on demand; all x-products go through 3/2 zero padding.
class Field {
public:
    Field() = default;
    explicit Field(const Grid& g) : g_(g), c_(size_t(g.ny) * g.nx) {}

    static Field from_phys(const Grid& g, const std::vector<double>& vals) {
        if ((int)vals.size() != g.nx * g.ny) throw GridError("from_phys: size mismatch");
        Field f(g);
        std::vector<cplx> row(g.nx);
        for (int i = 0; i < g.ny; ++i) {
            for (int j = 0; j < g.nx; ++j) row[j] = vals[size_t(i) * g.nx + j];
            fft::to_coeff(row.data(), g.nx);
            std::copy(row.begin(), row.end(), f.c_.begin() + size_t(i) * g.nx);
        }
        return f;
    }

    std::vector<double> to_phys() const {
        std::vector<double> vals(c_.size());
        std::vector<cplx> row(g_.nx);
        for (int i = 0; i < g_.ny; ++i) {
            std::copy(c_.begin() + size_t(i) * g_.nx, c_.begin() + size_t(i + 1) * g_.nx, row.begin());
            fft::to_values(row.data(), g_.nx);
            for (int j = 0; j < g_.nx; ++j) vals[size_t(i) * g_.nx + j] = row[j].real();
        }
        return vals;
    }

    const Grid& grid() const { return g_; }
    bool empty() const { return c_.empty(); }
    cplx& at(int i, int j) { return c_[size_t(i) * g_.nx + j]; }
    const cplx& at(int i, int j) const { return c_[size_t(i) * g_.nx + j]; }
    std::vector<cplx>& data() { return c_; }
    const std::vector<cplx>& data() const { return c_; }

    Field& operator+=(const Field& o) {
        check(o);
        for (size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        check(o);
        for (size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
        return *this;
    }
    Field& operator*=(double a) {
        for (auto& v : c_) v *= a;
        return *this;
    }
    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double a, Field f) { return f *= a; }

    // adds the constant value a to the field (x-mean mode of every row)
    Field& add_const(double a) {
        for (int i = 0; i < g_.ny; ++i) at(i, 0) += a;
        return *this;
    }

    void check(const Field& o) const {
        if (g_ != o.g_) throw GridError("field grid mismatch");
    }

private:
    Grid g_;
    std::vector<cplx> c_;
};

// ---- spectral / stencil operators -----------------------------------------

inline Field dx(const Field& f) {
    const Grid& g = f.grid();
    Field r(g);
    for (int i = 0; i < g.ny; ++i)
        for (int j = 0; j < g.nx; ++j) {
            if (j == g.nx / 2) continue; // Nyquist mode has no signed derivative
            r.at(i, j) = cplx(0, g.xi(j)) * f.at(i, j);
        }
    return r;
}

// second-order centered d/dy, one-sided at the walls
inline Field dy(const Field& f) {
    const Grid& g = f.grid();
    const double h = g.dy();
    Field r(g);
    for (int j = 0; j < g.nx; ++j) {
        r.at(0, j) = (-3.0 * f.at(0, j) + 4.0 * f.at(1, j) - f.at(2, j)) / (2 * h);
        for (int i = 1; i < g.ny - 1; ++i)
            r.at(i, j) = (f.at(i + 1, j) - f.at(i - 1, j)) / (2 * h);
        int n = g.ny - 1;
        r.at(n, j) = (3.0 * f.at(n, j) - 4.0 * f.at(n - 1, j) + f.at(n - 2, j)) / (2 * h);
    }
    return r;
}

inline Field dy2(const Field& f) {
    const Grid& g = f.grid();
    const double h2 = g.dy() * g.dy();
    Field r(g);
    for (int j = 0; j < g.nx; ++j) {
        r.at(0, j) = (2.0 * f.at(0, j) - 5.0 * f.at(1, j) + 4.0 * f.at(2, j) - f.at(3, j)) / h2;
        for (int i = 1; i < g.ny - 1; ++i)
            r.at(i, j) = (f.at(i + 1, j) - 2.0 * f.at(i, j) + f.at(i - 1, j)) / h2;
        int n = g.ny - 1;
        r.at(n, j) = (2.0 * f.at(n, j) - 5.0 * f.at(n - 1, j) + 4.0 * f.at(n - 2, j) - f.at(n - 3, j)) / h2;
    }
    return r;
}

// cumulative trapezoid integral from the wall: r(x, y_i) = int_0^{y_i} f dy
inline Field cumtrapz_y(const Field& f) {
    const Grid& g = f.grid();
    const double h = g.dy();
    Field r(g);
    for (int j = 0; j < g.nx; ++j) {
        cplx acc = 0;
        r.at(0, j) = 0;
        for (int i = 1; i < g.ny; ++i) {
            acc += 0.5 * h * (f.at(i - 1, j) + f.at(i, j));
            r.at(i, j) = acc;
        }
    }
    return r;
}

namespace detail {

// 3/2-rule dealiased product of two coefficient rows (Nyquist dropped)
inline void product_row(const cplx* a, const cplx* b, cplx* out, int nx) {
    const int m = 3 * nx / 2;
    std::vector<cplx> pa(m), pb(m);
    for (int j = 0; j < nx / 2; ++j) {
        pa[j] = a[j];
        pb[j] = b[j];
    }
    for (int j = nx / 2 + 1; j < nx; ++j) {
        pa[m - nx + j] = a[j];
        pb[m - nx + j] = b[j];
    }
    fft::to_values(pa.data(), m);
    fft::to_values(pb.data(), m);
    for (int k = 0; k < m; ++k) pa[k] *= pb[k];
    fft::to_coeff(pa.data(), m);
    for (int j = 0; j < nx / 2; ++j) out[j] = pa[j];
    out[nx / 2] = 0;
    for (int j = nx / 2 + 1; j < nx; ++j) out[j] = pa[m - nx + j];
}

} // namespace detail

inline Field multiply(const Field& a, const Field& b) {
    a.check(b);
    const Grid& g = a.grid();
    Field r(g);
    for (int i = 0; i < g.ny; ++i)
        detail::product_row(&a.at(i, 0), &b.at(i, 0), &r.at(i, 0), g.nx);
    return r;
}

inline double linf(const Field& f) {
    double m = 0;
    for (double v : f.to_phys()) m = std::max(m, std::fabs(v));
    return m;
}

inline double max_abs_coeff(const Field& f) {
    double m = 0;
    for (const auto& v : f.data()) m = std::max(m, std::abs(v));
    return m;
}

inline bool has_nan(const Field& f) {
    for (const auto& v : f.data())
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return true;
    return false;
}

} // namespace bllab
