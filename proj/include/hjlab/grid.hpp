#pragma once

// Space-time grids, sampled fields, finite differences, cube windows,
// averages and L^s norms. Everything downstream computes on these.
//
// Conventions:
//  - time levels include both endpoints: t_k = t_lo + k*dt, dt = (t_hi-t_lo)/(nt-1)
//  - spatial nodes are cell-centered: x_i = x_lo + (i+1/2)*dx, dx = extent/nx
//  - quadrature is midpoint rule over node cells; windows are clipped to the
//    domain and weighted by exact cell/window overlap, so averages are
//    continuous in the window size and exact on cell-wise-constant fields.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjlab {

using Vec = std::array<double, 2>;  // spatial point/vector; axes >= d unused

inline double vec_norm(const Vec& v, int d) {
    double s = 0;
    for (int a = 0; a < d; ++a) s += v[a] * v[a];
    return std::sqrt(s);
}

inline double vec_dot(const Vec& a, const Vec& b, int d) {
    double s = 0;
    for (int c = 0; c < d; ++c) s += a[c] * b[c];
    return s;
}

enum class Boundary { Periodic, Clamped };

struct GridSpec {
    int d = 1;       // spatial dimension, 1 or 2
    int nx = 2;      // nodes per spatial axis
    int nt = 2;      // time levels
    double t_lo = 0.0, t_hi = 1.0;
    Vec x_lo{0.0, 0.0};
    Vec x_hi{1.0, 1.0};
    Boundary boundary = Boundary::Clamped;

    void validate() const {
        if (d != 1 && d != 2) throw std::invalid_argument("GridSpec: d must be 1 or 2");
        if (nx < 2) throw std::invalid_argument("GridSpec: nx >= 2 required");
        if (nt < 2) throw std::invalid_argument("GridSpec: nt >= 2 required");
        if (!(t_lo < t_hi)) throw std::invalid_argument("GridSpec: t_lo < t_hi required");
        for (int a = 0; a < d; ++a)
            if (!(x_lo[a] < x_hi[a]))
                throw std::invalid_argument("GridSpec: x_lo < x_hi required on each axis");
    }

    double dt() const { return (t_hi - t_lo) / (nt - 1); }
    double dx(int axis = 0) const { return (x_hi[axis] - x_lo[axis]) / nx; }
    double extent(int axis = 0) const { return x_hi[axis] - x_lo[axis]; }
    double time(int k) const { return t_lo + k * dt(); }
    double node(int axis, int i) const { return x_lo[axis] + (i + 0.5) * dx(axis); }

    int npoints() const { return d == 1 ? nx : nx * nx; }
    long total_values() const { return static_cast<long>(nt) * npoints(); }

    int flat(int i1, int i2 = 0) const { return d == 1 ? i1 : i2 * nx + i1; }
    void unflat(int node, int& i1, int& i2) const {
        if (d == 1) { i1 = node; i2 = 0; }
        else { i2 = node / nx; i1 = node % nx; }
    }

    Vec point(int node) const {
        int i1, i2;
        unflat(node, i1, i2);
        Vec x{node_coord(0, i1), 0.0};
        if (d == 2) x[1] = node_coord(1, i2);
        return x;
    }
    double node_coord(int axis, int i) const { return node(axis, i); }

    // index of the nearest node along one axis, projected (Clamped) or wrapped
    // (Periodic)
    int locate(int axis, double x) const {
        double u = (x - x_lo[axis]) / dx(axis) - 0.5;
        long i = std::lround(u);
        if (boundary == Boundary::Periodic) {
            long m = i % nx;
            if (m < 0) m += nx;
            return static_cast<int>(m);
        }
        return static_cast<int>(std::clamp<long>(i, 0, nx - 1));
    }
    int locate_time(double t) const {
        long k = std::lround((t - t_lo) / dt());
        return static_cast<int>(std::clamp<long>(k, 0, nt - 1));
    }

    int nearest_node(const Vec& x) const {
        int i1 = locate(0, x[0]);
        int i2 = d == 2 ? locate(1, x[1]) : 0;
        return flat(i1, i2);
    }

    // time-cell of level k clipped to the domain (edge levels own half cells)
    void time_cell(int k, double& lo, double& hi) const {
        lo = std::max(t_lo, time(k) - 0.5 * dt());
        hi = std::min(t_hi, time(k) + 0.5 * dt());
    }
    // spatial cell of node index i along an axis (always full width)
    void space_cell(int axis, int i, double& lo, double& hi) const {
        lo = x_lo[axis] + i * dx(axis);
        hi = lo + dx(axis);
    }

    bool same_layout(const GridSpec& o) const {
        return d == o.d && nx == o.nx && nt == o.nt && t_lo == o.t_lo && t_hi == o.t_hi &&
               x_lo == o.x_lo && x_hi == o.x_hi && boundary == o.boundary;
    }
};

// Axis-aligned space-time window, stored as center + half-widths.
// Matches Q_{sigma,rho}(t,x): half_time = sigma/2, half_space = rho/2.
struct CubeWindow {
    double t_center = 0.0;
    Vec x_center{0.0, 0.0};
    double half_time = 0.0;
    Vec half_space{0.0, 0.0};

    CubeWindow() = default;
    CubeWindow(double t, Vec x, double ht, double hs) : t_center(t), x_center(x), half_time(ht) {
        half_space = {hs, hs};
        if (!(ht > 0) || !(hs > 0))
            throw std::invalid_argument("CubeWindow: half-widths must be positive");
    }
    CubeWindow(double t, Vec x, double ht, Vec hs)
        : t_center(t), x_center(x), half_time(ht), half_space(hs) {
        if (!(ht > 0) || !(hs[0] > 0))
            throw std::invalid_argument("CubeWindow: half-widths must be positive");
    }

    CubeWindow dilated(double c_time, double c_space) const {
        CubeWindow w = *this;
        w.half_time *= c_time;
        w.half_space[0] *= c_space;
        w.half_space[1] *= c_space;
        return w;
    }
};

inline CubeWindow domain_window(const GridSpec& g) {
    Vec c{0.5 * (g.x_lo[0] + g.x_hi[0]), 0.5 * (g.x_lo[1] + g.x_hi[1])};
    Vec hs{0.5 * g.extent(0), g.d == 2 ? 0.5 * g.extent(1) : 0.5 * g.extent(0)};
    return CubeWindow(0.5 * (g.t_lo + g.t_hi), c, 0.5 * (g.t_hi - g.t_lo), hs);
}

namespace detail {

inline double interval_overlap(double a_lo, double a_hi, double b_lo, double b_hi) {
    return std::max(0.0, std::min(a_hi, b_hi) - std::max(a_lo, b_lo));
}

// overlap of a cell with a window interval on a periodic axis of length L;
// the window is given in unwrapped coordinates, the cell lives in [lo, lo+L)
inline double periodic_overlap(double cell_lo, double cell_hi, double w_lo, double w_hi,
                               double L) {
    double total = 0;
    for (int img = -1; img <= 1; ++img) {
        total += interval_overlap(cell_lo + img * L, cell_hi + img * L, w_lo, w_hi);
    }
    return total;
}

}  // namespace detail

class VectorField;

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const GridSpec& g, double fill = 0.0)
        : grid_(g), v_(static_cast<size_t>(g.total_values()), fill) {
        grid_.validate();
    }

    static ScalarField from_function(const GridSpec& g,
                                     const std::function<double(double, const Vec&)>& f) {
        ScalarField out(g);
        for (int k = 0; k < g.nt; ++k) {
            double t = g.time(k);
            for (int n = 0; n < g.npoints(); ++n) out.at(k, n) = f(t, g.point(n));
        }
        out.check_finite();
        return out;
    }

    const GridSpec& grid() const { return grid_; }
    double& at(int k, int node) { return v_[static_cast<size_t>(k) * grid_.npoints() + node]; }
    double at(int k, int node) const {
        return v_[static_cast<size_t>(k) * grid_.npoints() + node];
    }
    double& at(int k, int i1, int i2) { return at(k, grid_.flat(i1, i2)); }
    double at(int k, int i1, int i2) const { return at(k, grid_.flat(i1, i2)); }

    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

    void check_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) throw std::domain_error("ScalarField: non-finite value");
    }

    // nearest-node sample, with Clamped projection / Periodic wrap
    double sample(double t, const Vec& x) const {
        return at(grid_.locate_time(t), grid_.nearest_node(x));
    }

    // multilinear interpolation in space at a fixed level, Clamped projection /
    // Periodic wrap outside
    double interp_space(int k, const Vec& x) const {
        const GridSpec& g = grid_;
        auto axis_pos = [&](int axis, double xx, int& i0, int& i1, double& w) {
            double u = (xx - g.x_lo[axis]) / g.dx(axis) - 0.5;
            double fl = std::floor(u);
            w = u - fl;
            long i = static_cast<long>(fl);
            if (g.boundary == Boundary::Periodic) {
                long a = i % g.nx;
                if (a < 0) a += g.nx;
                i0 = static_cast<int>(a);
                i1 = static_cast<int>((a + 1) % g.nx);
            } else {
                // outside the node range both anchors clamp to the same node
                i0 = static_cast<int>(std::clamp<long>(i, 0, g.nx - 1));
                i1 = static_cast<int>(std::clamp<long>(i + 1, 0, g.nx - 1));
                w = std::clamp(w, 0.0, 1.0);
            }
        };
        int a0, a1, b0 = 0, b1 = 0;
        double wa, wb = 0;
        axis_pos(0, x[0], a0, a1, wa);
        if (g.d == 2) axis_pos(1, x[1], b0, b1, wb);
        if (g.d == 1) return (1 - wa) * at(k, a0) + wa * at(k, a1);
        double v00 = at(k, a0, b0), v10 = at(k, a1, b0), v01 = at(k, a0, b1), v11 = at(k, a1, b1);
        return (1 - wb) * ((1 - wa) * v00 + wa * v10) + wb * ((1 - wa) * v01 + wa * v11);
    }

    // space-time multilinear interpolation
    double interp(double t, const Vec& x) const {
        const GridSpec& g = grid_;
        double u = (t - g.t_lo) / g.dt();
        double fl = std::floor(u);
        long k = static_cast<long>(fl);
        double w = u - fl;
        long k0 = std::clamp<long>(k, 0, g.nt - 1);
        long k1 = std::clamp<long>(k + 1, 0, g.nt - 1);
        if (k < 0) w = 0;
        if (k >= g.nt - 1) w = k == g.nt - 1 ? w : 1.0;
        double v0 = interp_space(static_cast<int>(k0), x);
        double v1 = interp_space(static_cast<int>(k1), x);
        return (1 - w) * v0 + w * v1;
    }

private:
    GridSpec grid_;
    std::vector<double> v_;
};

class VectorField {
public:
    VectorField() = default;
    explicit VectorField(const GridSpec& g, double fill = 0.0)
        : grid_(g), v_(static_cast<size_t>(g.total_values()) * g.d, fill) {
        grid_.validate();
    }

    const GridSpec& grid() const { return grid_; }
    double& at(int k, int node, int comp) {
        return v_[(static_cast<size_t>(k) * grid_.npoints() + node) * grid_.d + comp];
    }
    double at(int k, int node, int comp) const {
        return v_[(static_cast<size_t>(k) * grid_.npoints() + node) * grid_.d + comp];
    }
    Vec vec_at(int k, int node) const {
        Vec out{at(k, node, 0), 0.0};
        if (grid_.d == 2) out[1] = at(k, node, 1);
        return out;
    }

    // pointwise Euclidean magnitude as a ScalarField
    ScalarField magnitude() const {
        ScalarField out(grid_);
        for (int k = 0; k < grid_.nt; ++k)
            for (int n = 0; n < grid_.npoints(); ++n)
                out.at(k, n) = vec_norm(vec_at(k, n), grid_.d);
        return out;
    }

    void check_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) throw std::domain_error("VectorField: non-finite value");
    }

private:
    GridSpec grid_;
    std::vector<double> v_;
};

// Visit every (level, node) cell that meets the window; weight is the exact
// cell/window overlap measure (time length x spatial area), with the window
// clipped to the domain. Callers wanting whole-cell membership use their own
// loops.
template <class F>
void for_cells_in_window(const GridSpec& g, const CubeWindow& w, F&& visit) {
    double wt_lo = w.t_center - w.half_time;
    double wt_hi = w.t_center + w.half_time;
    int k_lo = std::max(0, static_cast<int>(std::floor((wt_lo - g.t_lo) / g.dt() - 0.5)));
    int k_hi = std::min(g.nt - 1, static_cast<int>(std::ceil((wt_hi - g.t_lo) / g.dt() + 0.5)));

    struct AxisRange {
        std::vector<std::pair<int, double>> cells;  // (index, overlap length)
    };
    auto axis_cells = [&](int axis, double c, double half) {
        AxisRange r;
        double lo = c - half, hi = c + half;
        double L = g.extent(axis);
        if (g.boundary == Boundary::Periodic && hi - lo >= L) {
            lo = c - 0.5 * L;
            hi = c + 0.5 * L;  // a periodic axis is covered at half the period
        }
        for (int i = 0; i < g.nx; ++i) {
            double clo, chi;
            g.space_cell(axis, i, clo, chi);
            double ov = g.boundary == Boundary::Periodic
                            ? detail::periodic_overlap(clo, chi, lo, hi, L)
                            : detail::interval_overlap(clo, chi, lo, hi);
            if (ov > 0) r.cells.emplace_back(i, ov);
        }
        return r;
    };

    AxisRange ax0 = axis_cells(0, w.x_center[0], w.half_space[0]);
    AxisRange ax1;
    if (g.d == 2) ax1 = axis_cells(1, w.x_center[1], w.half_space[1]);

    for (int k = k_lo; k <= k_hi; ++k) {
        double tc_lo, tc_hi;
        g.time_cell(k, tc_lo, tc_hi);
        double tw = detail::interval_overlap(tc_lo, tc_hi, wt_lo, wt_hi);
        if (tw <= 0) continue;
        if (g.d == 1) {
            for (auto& [i, ov] : ax0.cells) visit(k, g.flat(i), tw * ov);
        } else {
            for (auto& [j, ovj] : ax1.cells)
                for (auto& [i, ovi] : ax0.cells) visit(k, g.flat(i, j), tw * ovi * ovj);
        }
    }
}

inline double cube_average(const ScalarField& f, const CubeWindow& w) {
    double num = 0, den = 0;
    for_cells_in_window(f.grid(), w, [&](int k, int n, double wt) {
        num += wt * f.at(k, n);
        den += wt;
    });
    if (den <= 0) throw std::domain_error("cube_average: window does not meet the grid domain");
    return num / den;
}

// (integral of |f|^s over the region)^(1/s), midpoint rule
inline double lebesgue_norm(const ScalarField& f, double s, const CubeWindow& region) {
    if (!(s >= 1.0) || !std::isfinite(s))
        throw std::invalid_argument("lebesgue_norm: exponent must be finite and >= 1");
    double acc = 0, den = 0;
    for_cells_in_window(f.grid(), region, [&](int k, int n, double wt) {
        acc += wt * std::pow(std::abs(f.at(k, n)), s);
        den += wt;
    });
    if (den <= 0) throw std::domain_error("lebesgue_norm: region does not meet the grid domain");
    return std::pow(acc, 1.0 / s);
}

// spatial-slice average over a cube at one time level
inline double slice_average(const ScalarField& f, int k, const Vec& x_center, double half_space) {
    const GridSpec& g = f.grid();
    CubeWindow w(g.time(k), x_center, 0.5 * g.dt(), half_space);
    // restrict to the single level by zeroing other levels' weights
    double num = 0, den = 0;
    for_cells_in_window(g, w, [&](int kk, int n, double wt) {
        if (kk != k) return;
        num += wt * f.at(kk, n);
        den += wt;
    });
    if (den <= 0) throw std::domain_error("slice_average: empty slice window");
    return num / den;
}

// central differences in space (one-sided at Clamped boundaries, wrapped at
// Periodic), forward difference in time with backward at the last level
inline std::pair<ScalarField, VectorField> finite_diff(const ScalarField& u) {
    const GridSpec& g = u.grid();
    ScalarField ut(g);
    VectorField du(g);
    const double dt = g.dt();
    for (int k = 0; k < g.nt; ++k) {
        int ka = k < g.nt - 1 ? k : k - 1;
        for (int n = 0; n < g.npoints(); ++n)
            ut.at(k, n) = (u.at(ka + 1, n) - u.at(ka, n)) / dt;
    }
    auto diff_axis = [&](int k, int i1, int i2, int axis) {
        const double dx = g.dx(axis);
        int i = axis == 0 ? i1 : i2;
        int im = i - 1, ip = i + 1;
        double denom = 2 * dx;
        if (g.boundary == Boundary::Periodic) {
            im = (im + g.nx) % g.nx;
            ip = ip % g.nx;
        } else {
            if (im < 0) { im = 0; denom = dx; }
            if (ip > g.nx - 1) { ip = g.nx - 1; denom = dx; }
        }
        auto val = [&](int j) {
            return axis == 0 ? u.at(k, g.flat(j, i2)) : u.at(k, g.flat(i1, j));
        };
        return (val(ip) - val(im)) / denom;
    };
    for (int k = 0; k < g.nt; ++k)
        for (int n = 0; n < g.npoints(); ++n) {
            int i1, i2;
            g.unflat(n, i1, i2);
            du.at(k, n, 0) = diff_axis(k, i1, i2, 0);
            if (g.d == 2) du.at(k, n, 1) = diff_axis(k, i1, i2, 1);
        }
    return {std::move(ut), std::move(du)};
}

}  // namespace hjlab
