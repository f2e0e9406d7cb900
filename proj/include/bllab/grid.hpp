#pragma once

#include <cmath>
#include <stdexcept>

namespace bllab {

struct GridError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Periodic in x (Nx modes over period Lx), wall-bounded in y on [0, Ymax]
// with Ny equispaced points including both ends.
struct Grid {
    int nx = 0;
    double lx = 0;
    int ny = 0;
    double ymax = 0;

    Grid() = default;
    Grid(int nx_, double lx_, int ny_, double ymax_)
        : nx(nx_), lx(lx_), ny(ny_), ymax(ymax_) {
        if (nx < 16 || (nx & (nx - 1)) != 0) throw GridError("Nx must be a power of two >= 16");
        if (ny < 33) throw GridError("Ny must be >= 33");
        if (lx <= 0 || ymax <= 0) throw GridError("Lx and Ymax must be positive");
    }

    double dx() const { return lx / nx; }
    double dy() const { return ymax / (ny - 1); }
    double x(int j) const { return lx * j / nx; }
    double y(int i) const { return dy() * i; }
    // signed mode number for FFT bin j
    int mode(int j) const { return j <= nx / 2 ? j : j - nx; }
    double xi(int j) const { return 2.0 * M_PI * mode(j) / lx; }
    double xi_max() const { return 2.0 * M_PI * (nx / 2) / lx; }
    // trapezoid quadrature weight for y-row i
    double wy(int i) const { return (i == 0 || i == ny - 1) ? dy() / 2 : dy(); }

    bool operator==(const Grid& o) const {
        return nx == o.nx && lx == o.lx && ny == o.ny && ymax == o.ymax;
    }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

} // namespace bllab
