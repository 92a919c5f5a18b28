#pragma once

// Backward dynamic-programming (semi-Lagrangian, discrete Lax-Oleinik) solver
// for  -du/dt + H(t,x,Du) = f  with terminal data, plus comparison-curve upper
// bound calculators and a distributional subsolution residual checker.
//
// One DP step:
//   u(t_k, x) = min_y [ dt * L(t_k, x, (y-x)/dt) + dt * f(t_k, x) + u(t_{k+1}, y) ]
// Candidates y are grid nodes at base fidelity; the optional interpolation
// mode (1D) minimizes the same expression over a piecewise-linear u(t_{k+1}).
// Ties are broken by the lexicographically smallest node index.

#include <optional>

#include "grid.hpp"
#include "hamiltonian.hpp"

namespace hjlab {

struct HJProblem {
    HamiltonianModel model;
    ScalarField f;                  // right-hand side, bounded below
    std::vector<double> terminal;   // values per spatial node at t_hi
    GridSpec grid;

    void validate() const {
        grid.validate();
        if (!f.grid().same_layout(grid))
            throw std::invalid_argument("HJProblem: f is not laid out on the problem grid");
        if (static_cast<int>(terminal.size()) != grid.npoints())
            throw std::invalid_argument("HJProblem: terminal does not match the spatial layout");
        f.check_finite();
        for (double v : terminal)
            if (!std::isfinite(v)) throw std::domain_error("HJProblem: non-finite terminal");
        if (model.dim() != grid.d)
            throw std::invalid_argument("HJProblem: model dimension mismatch");
    }
};

inline std::vector<double> spatial_from_function(const GridSpec& g,
                                                 const std::function<double(const Vec&)>& f) {
    std::vector<double> out(g.npoints());
    for (int n = 0; n < g.npoints(); ++n) out[n] = f(g.point(n));
    return out;
}

struct SolveOptions {
    bool interpolate = false;   // 1D sub-cell linear interpolation of u(t_{k+1},.)
    int max_doublings = 30;
};

struct SolveReport {
    int levels = 0;
    std::vector<double> search_radius_used;  // per time step, backward order
    std::vector<double> max_cell_update;     // max |u_k - u_{k+1}| per step
    double f_lower_bound = 0.0;
};

namespace dp {

// One backward step for every node of a level. `unext` holds u(t_{k+1}, .) on
// the nodes. Returns false if some argmin landed on the search boundary while
// a larger radius was still available (caller doubles and retries).
struct LevelScratch {
    std::vector<double> out;
    std::vector<int> argmin;          // node index of minimizer
    std::vector<double> argpos1;      // continuous minimizer (interp mode), axis 0
};

inline double domain_diameter(const GridSpec& g) {
    double s = 0;
    for (int a = 0; a < g.d; ++a) s = std::max(s, g.extent(a));
    return s;
}

// Search-radius seed from the current Lipschitz estimate of the next level.
inline double radius_seed(const GridSpec& g, const HamiltonianModel& m,
                          const std::vector<double>& unext) {
    double lip = 0;
    auto upd = [&](double a, double b, double dx) { lip = std::max(lip, std::abs(a - b) / dx); };
    if (g.d == 1) {
        for (int i = 0; i + 1 < g.nx; ++i) upd(unext[i + 1], unext[i], g.dx(0));
        if (g.boundary == Boundary::Periodic) upd(unext[0], unext[g.nx - 1], g.dx(0));
    } else {
        for (int j = 0; j < g.nx; ++j)
            for (int i = 0; i < g.nx; ++i) {
                int n = g.flat(i, j);
                if (i + 1 < g.nx) upd(unext[g.flat(i + 1, j)], unext[n], g.dx(0));
                else if (g.boundary == Boundary::Periodic)
                    upd(unext[g.flat(0, j)], unext[n], g.dx(0));
                if (j + 1 < g.nx) upd(unext[g.flat(i, j + 1)], unext[n], g.dx(1));
                else if (g.boundary == Boundary::Periodic)
                    upd(unext[g.flat(i, 0)], unext[n], g.dx(1));
            }
    }
    const double dt = g.dt();
    double r = std::pow(std::max(m.q() * lip * dt, 1e-300), 1.0 / (m.q() - 1.0));
    if (m.kind() == HamiltonianModel::Kind::Power) {
        // displacement where the Lagrangian slope matches the field slope
        double vmax = m.power_velocity_for_slope(0.0, Vec{0, 0}, m.q() * std::max(lip, 1e-12));
        r = std::max(r, dt * vmax);
    }
    return std::max(r, 2.0 * g.dx(0));
}

// Node-candidate scan of one level. Returns true when every argmin is interior
// to its search window (or pinned at a domain edge).
inline bool level_step_nodes(const GridSpec& g, const HamiltonianModel& model,
                             const ScalarField& f, int k, const std::vector<double>& unext,
                             double radius, LevelScratch& s) {
    const double dt = g.dt();
    const double t = g.time(k);
    const bool periodic = g.boundary == Boundary::Periodic;
    int m1 = std::min<long>(static_cast<long>(std::ceil(radius / g.dx(0))),
                            periodic ? g.nx / 2 : g.nx - 1);
    int m2 = g.d == 2 ? std::min<long>(static_cast<long>(std::ceil(radius / g.dx(1))),
                                       periodic ? g.nx / 2 : g.nx - 1)
                      : 0;
    const bool pow_kind = model.kind() == HamiltonianModel::Kind::Power;

    // step cost for an offset depends on the departure point only through the
    // coefficient, so cache the offset kernel dt*|o*dx/dt|^q / q
    std::vector<double> k1(m1 + 1);
    for (int o = 0; o <= m1; ++o)
        k1[o] = dt * std::pow(o * g.dx(0) / dt, model.q()) / model.q();
    std::vector<double> k2(m2 + 1);
    for (int o = 0; o <= m2; ++o)
        k2[o] = dt * std::pow(o * g.dx(1) / dt, model.q()) / model.q();

    s.out.resize(g.npoints());
    s.argmin.resize(g.npoints());
    bool all_interior = true;

    for (int n = 0; n < g.npoints(); ++n) {
        int i1, i2;
        g.unflat(n, i1, i2);
        Vec x = g.point(n);
        double a = pow_kind ? model.coefficient(t, x) : 0.0;
        double best = std::numeric_limits<double>::infinity();
        int best_node = -1;
        int best_o1 = 0, best_o2 = 0;

        auto consider = [&](int o1, int o2) {
            int j1 = i1 + o1, j2 = i2 + o2;
            if (periodic) {
                j1 = (j1 % g.nx + g.nx) % g.nx;
                if (g.d == 2) j2 = (j2 % g.nx + g.nx) % g.nx;
            } else {
                if (j1 < 0 || j1 >= g.nx) return;
                if (g.d == 2 && (j2 < 0 || j2 >= g.nx)) return;
            }
            int jn = g.flat(j1, j2);
            double cost;
            if (pow_kind) {
                if (g.d == 1) cost = a * k1[std::abs(o1)];
                else {
                    double v1 = o1 * g.dx(0) / dt, v2 = o2 * g.dx(1) / dt;
                    cost = a * dt * std::pow(std::hypot(v1, v2), model.q()) / model.q();
                }
            } else {
                Vec v{o1 * g.dx(0) / dt, g.d == 2 ? o2 * g.dx(1) / dt : 0.0};
                cost = dt * model.legendre(t, x, v);
            }
            double val = cost + unext[jn];
            if (val < best || (val == best && jn < best_node)) {
                best = val;
                best_node = jn;
                best_o1 = o1;
                best_o2 = o2;
            }
        };

        if (g.d == 1) {
            for (int o = -m1; o <= m1; ++o) consider(o, 0);
        } else {
            for (int o2 = -m2; o2 <= m2; ++o2)
                for (int o1 = -m1; o1 <= m1; ++o1) consider(o1, o2);
        }

        s.out[n] = best + dt * f.at(k, n);
        s.argmin[n] = best_node;

        auto on_scan_edge = [&](int o, int i, int m) {
            if (std::abs(o) < m) return false;
            if (periodic) return m < g.nx / 2;           // can still widen
            int j = i + o;
            return j > 0 && j < g.nx - 1;                // interior but at scan edge
        };
        if (on_scan_edge(best_o1, i1, m1)) all_interior = false;
        if (g.d == 2 && on_scan_edge(best_o2, i2, m2)) all_interior = false;
    }
    return all_interior;
}

// Arrival-level data for the interpolated stepper: node values plus a few
// tracked off-node samples at the minima of the coefficient (positions where
// a(t,.) dips below its node samples inside a cell). Tracking these points
// gives the value function a degree of freedom on sub-cell cheap channels of
// a(t,x); without it the scheme cannot ride a channel narrower than a cell.
struct AugmentedLevel {
    std::vector<double> pos;  // sorted, ascending
    std::vector<double> val;
};

inline AugmentedLevel augment_from_nodes(const GridSpec& g, const std::vector<double>& nodes) {
    AugmentedLevel a;
    a.pos.resize(g.nx);
    a.val = nodes;
    for (int i = 0; i < g.nx; ++i) a.pos[i] = g.node(0, i);
    return a;
}

// positions (at time tl) where the coefficient dips below its node samples;
// scanned over two-cell windows so minima sitting close to a node are still
// tracked
inline std::vector<double> coefficient_dips(const GridSpec& g, const HamiltonianModel& model,
                                            double tl, int max_dips = 4) {
    std::vector<double> dips;
    if (model.kind() != HamiltonianModel::Kind::Power || g.boundary == Boundary::Periodic)
        return dips;
    const double dx = g.dx(0);
    std::vector<double> a(g.nx);
    for (int j = 0; j < g.nx; ++j) a[j] = model.coefficient(tl, Vec{g.node(0, j), 0});
    std::vector<std::pair<double, double>> found;  // (depth, position)
    for (int j = 0; j + 2 < g.nx; ++j) {
        double xl = g.node(0, j);
        auto ac = [&](double off) { return model.coefficient(tl, Vec{xl + off * 2 * dx, 0}); };
        // cheap reject: nothing inside the window undercuts its ends
        double probe = std::min({ac(0.25), ac(0.5), ac(0.75), a[j + 1]});
        double ends = std::min(a[j], a[j + 2]);
        if (probe >= ends * (1 - 1e-12)) continue;
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 50; ++it) {
            double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
            if (ac(m1) < ac(m2)) hi = m2;
            else lo = m1;
        }
        double off = 0.5 * (lo + hi);
        if (off <= 1e-9 || off >= 1 - 1e-9) continue;
        found.emplace_back(ends - ac(off), xl + off * 2 * dx);
    }
    std::sort(found.begin(), found.end(), [](auto& p, auto& q) { return p.first > q.first; });
    for (const auto& [depth, pos] : found) {
        if (static_cast<int>(dips.size()) >= max_dips) break;
        bool dup = false;
        for (double d : dips)
            if (std::abs(d - pos) < 0.25 * dx) dup = true;
        if (!dup) dips.push_back(pos);
    }
    std::sort(dips.begin(), dips.end());
    return dips;
}

// Interpolated-candidate scan (1D, Power kind). Minimizes over every segment
// of the piecewise-linear arrival interpolant in closed form; the arrival
// level may carry tracked off-node points. Computes the node row and the
// values at this level's own tracked positions.
inline bool level_step_interp(const GridSpec& g, const HamiltonianModel& model,
                              const ScalarField& f, int k, const AugmentedLevel& arrival,
                              double radius, LevelScratch& s,
                              const std::vector<double>& own_dips,
                              std::vector<double>& own_dip_vals) {
    if (g.d != 1 || model.kind() != HamiltonianModel::Kind::Power)
        throw std::invalid_argument("interpolated DP requires a 1D Power model");
    if (g.boundary == Boundary::Periodic && arrival.pos.size() != static_cast<size_t>(g.nx))
        throw std::invalid_argument("tracked points are not supported on periodic grids");
    const double dt = g.dt();
    const double t = g.time(k);
    const double dx = g.dx(0);
    const bool periodic = g.boundary == Boundary::Periodic;
    const int np = static_cast<int>(arrival.pos.size());
    double m_real = std::min(radius + dx, domain_diameter(g));
    s.out.resize(g.nx);
    s.argmin.resize(g.nx);
    s.argpos1.resize(g.nx);
    bool all_interior = true;

    // one evaluation point per departure position
    auto scan_from = [&](double x, double a, double& best_y) -> double {
        double best = std::numeric_limits<double>::infinity();
        best_y = x;
        bool edge = false;
        auto consider_y = [&](double y, double uy) {
            double val = dt * a * std::pow(std::abs((y - x) / dt), model.q()) / model.q() + uy;
            if (val < best || (val == best && y < best_y)) {
                best = val;
                best_y = y;
            }
        };
        if (!periodic) {
            int lo = static_cast<int>(std::lower_bound(arrival.pos.begin(), arrival.pos.end(),
                                                       x - m_real) -
                                      arrival.pos.begin());
            int hi = static_cast<int>(std::upper_bound(arrival.pos.begin(), arrival.pos.end(),
                                                       x + m_real) -
                                      arrival.pos.begin());
            lo = std::max(0, lo - 1);
            hi = std::min(np - 1, hi);
            for (int j = lo; j < hi; ++j) {
                double yl = arrival.pos[j], yr = arrival.pos[j + 1];
                double ul = arrival.val[j], ur = arrival.val[j + 1];
                consider_y(yl, ul);
                if (j + 1 == hi) consider_y(yr, ur);
                double beta = (ur - ul) / (yr - yl);
                if (beta != 0) {
                    double vmag = model.power_velocity_for_slope(t, Vec{x, 0}, std::abs(beta));
                    double ystar = x - ((beta > 0) ? 1.0 : -1.0) * vmag * dt;
                    if (ystar > yl && ystar < yr) consider_y(ystar, ul + beta * (ystar - yl));
                }
            }
            bool covers_left = arrival.pos[lo] <= g.x_lo[0] + 0.51 * dx || x - m_real <= g.x_lo[0];
            bool covers_right =
                arrival.pos[hi] >= g.x_hi[0] - 0.51 * dx || x + m_real >= g.x_hi[0];
            if ((std::abs(best_y - x) > m_real - dx) && !(covers_left && covers_right))
                edge = true;
        } else {
            // periodic: plain node cells with wrapped indexing
            int m = std::min<long>(static_cast<long>(std::ceil(m_real / dx)) + 1, g.nx / 2);
            for (int o = -m; o < m; ++o) {
                int jl = ((g.locate(0, x) + o) % g.nx + g.nx) % g.nx;
                int jr = (jl + 1) % g.nx;
                double yl = g.node(0, g.locate(0, x)) + o * dx;
                double yr = yl + dx;
                double ul = arrival.val[jl], ur = arrival.val[jr];
                consider_y(yl, ul);
                consider_y(yr, ur);
                double beta = (ur - ul) / dx;
                if (beta != 0) {
                    double vmag = model.power_velocity_for_slope(t, Vec{x, 0}, std::abs(beta));
                    double ystar = x - ((beta > 0) ? 1.0 : -1.0) * vmag * dt;
                    if (ystar > yl && ystar < yr) consider_y(ystar, ul + beta * (ystar - yl));
                }
            }
            if (std::abs(best_y - x) > m_real - dx && m < g.nx / 2) edge = true;
        }
        if (edge) all_interior = false;
        return best;
    };

    for (int i = 0; i < g.nx; ++i) {
        double x = g.node(0, i);
        double a = model.coefficient(t, Vec{x, 0});
        double by;
        double best = scan_from(x, a, by);
        s.out[i] = best + dt * f.at(k, i);
        s.argpos1[i] = by;
        s.argmin[i] = g.locate(0, by);
    }
    own_dip_vals.resize(own_dips.size());
    for (size_t d = 0; d < own_dips.size(); ++d) {
        double x = own_dips[d];
        double a = model.coefficient(t, Vec{x, 0});
        double by;
        // f sampled at the nearest node of the tracked point
        double fval = f.at(k, g.nearest_node(Vec{x, 0}));
        own_dip_vals[d] = scan_from(x, a, by) + dt * fval;
    }
    return all_interior;
}

// Final radius and argmin row for one node-mode backward step, shared by the
// solver and the characteristic extractor so paths reproduce the solve
// exactly.
inline double run_level(const GridSpec& g, const HamiltonianModel& model, const ScalarField& f,
                        int k, const std::vector<double>& unext, const SolveOptions& opts,
                        LevelScratch& s) {
    double radius = radius_seed(g, model, unext);
    double diam = domain_diameter(g);
    for (int it = 0; it <= opts.max_doublings; ++it) {
        bool ok;
        if (opts.interpolate) {
            AugmentedLevel arrival = augment_from_nodes(g, unext);
            std::vector<double> none_vals;
            ok = level_step_interp(g, model, f, k, arrival, radius, s, {}, none_vals);
        } else {
            ok = level_step_nodes(g, model, f, k, unext, radius, s);
        }
        if (ok || radius >= diam) return std::min(radius, diam);
        radius = std::min(2 * radius, diam);
    }
    return std::min(radius, diam);
}

}  // namespace dp

inline std::pair<ScalarField, SolveReport> solve_backward(const HJProblem& prob,
                                                          const SolveOptions& opts = {}) {
    prob.validate();
    if (prob.model.kind() == HamiltonianModel::Kind::Custom && !prob.model.envelope_certified())
        throw std::invalid_argument(
            "solve_backward: custom Hamiltonians must pass check_growth_envelope first");
    const GridSpec& g = prob.grid;
    ScalarField u(g);
    SolveReport rep;
    rep.f_lower_bound = *std::min_element(prob.f.values().begin(), prob.f.values().end());
    for (int n = 0; n < g.npoints(); ++n) u.at(g.nt - 1, n) = prob.terminal[n];

    dp::LevelScratch scratch;
    if (!opts.interpolate) {
        std::vector<double> unext = prob.terminal;
        for (int k = g.nt - 2; k >= 0; --k) {
            double radius = dp::run_level(g, prob.model, prob.f, k, unext, opts, scratch);
            rep.search_radius_used.push_back(radius);
            double upd = 0;
            for (int n = 0; n < g.npoints(); ++n) {
                if (!std::isfinite(scratch.out[n]))
                    throw std::domain_error("solve_backward: non-finite update");
                upd = std::max(upd, std::abs(scratch.out[n] - unext[n]));
                u.at(k, n) = scratch.out[n];
            }
            rep.max_cell_update.push_back(upd);
            unext = scratch.out;
            ++rep.levels;
        }
        return {std::move(u), std::move(rep)};
    }

    // interpolated mode: thread the augmented arrival level (nodes plus
    // tracked coefficient-dip samples) backward in time
    dp::AugmentedLevel arrival = dp::augment_from_nodes(g, prob.terminal);
    {
        std::vector<double> dips = dp::coefficient_dips(g, prob.model, g.time(g.nt - 1));
        dp::AugmentedLevel term = arrival;
        const double sep = 1e-7 * g.dx(0);
        for (double p : dips) {
            // terminal values at tracked points come from the terminal chord
            auto it = std::upper_bound(term.pos.begin(), term.pos.end(), p);
            size_t idx = it - term.pos.begin();
            if (idx == 0 || idx >= term.pos.size()) continue;
            if (p - term.pos[idx - 1] <= sep || term.pos[idx] - p <= sep) continue;
            double w = (p - term.pos[idx - 1]) / (term.pos[idx] - term.pos[idx - 1]);
            double v = (1 - w) * term.val[idx - 1] + w * term.val[idx];
            term.pos.insert(term.pos.begin() + idx, p);
            term.val.insert(term.val.begin() + idx, v);
        }
        arrival = std::move(term);
    }
    std::vector<double> node_row = prob.terminal;
    for (int k = g.nt - 2; k >= 0; --k) {
        std::vector<double> dips = dp::coefficient_dips(g, prob.model, g.time(k));
        std::vector<double> dip_vals;
        double radius = dp::radius_seed(g, prob.model, node_row);
        double diam = dp::domain_diameter(g);
        for (int it = 0; it <= opts.max_doublings; ++it) {
            bool ok = dp::level_step_interp(g, prob.model, prob.f, k, arrival, radius, scratch,
                                            dips, dip_vals);
            if (ok || radius >= diam) break;
            radius = std::min(2 * radius, diam);
        }
        rep.search_radius_used.push_back(std::min(radius, diam));
        double upd = 0;
        for (int n = 0; n < g.npoints(); ++n) {
            if (!std::isfinite(scratch.out[n]))
                throw std::domain_error("solve_backward: non-finite update");
            upd = std::max(upd, std::abs(scratch.out[n] - node_row[n]));
            u.at(k, n) = scratch.out[n];
        }
        rep.max_cell_update.push_back(upd);
        node_row = scratch.out;
        ++rep.levels;

        dp::AugmentedLevel next;
        next.pos.reserve(g.nx + dips.size());
        next.val.reserve(g.nx + dips.size());
        size_t di = 0;
        const double sep = 1e-7 * g.dx(0);  // avoid zero-length segments
        for (int n = 0; n < g.npoints(); ++n) {
            double xn = g.node(0, n);
            while (di < dips.size() && dips[di] < xn - sep) {
                next.pos.push_back(dips[di]);
                next.val.push_back(dip_vals[di]);
                ++di;
            }
            if (di < dips.size() && std::abs(dips[di] - xn) <= sep) ++di;  // merged into node
            next.pos.push_back(xn);
            next.val.push_back(node_row[n]);
        }
        while (di < dips.size()) {
            next.pos.push_back(dips[di]);
            next.val.push_back(dip_vals[di]);
            ++di;
        }
        arrival = std::move(next);
    }
    return {std::move(u), std::move(rep)};
}

// ---------------------------------------------------------------------------
// comparison-curve upper bounds

struct BendingCurveParams {
    double alpha_bar = 1.0;  // spatial scale multiplier
    double beta = 0.0;       // bending exponent in (1/p, (r1-1)/d)
    double r1 = 0.0;         // intermediate exponent in (1+d/p, r)
    double r = 0.0;          // data integrability exponent
    double p = 2.0;
    int d = 1;

    static BendingCurveParams make(double alpha_bar, double r1, double r, double p, int d) {
        BendingCurveParams b;
        b.alpha_bar = alpha_bar;
        b.r1 = r1;
        b.r = r;
        b.p = p;
        b.d = d;
        if (!(alpha_bar > 0)) throw std::invalid_argument("BendingCurveParams: alpha_bar > 0");
        if (!(r1 > 1.0 + d / p && r1 < r))
            throw std::invalid_argument("BendingCurveParams: r1 must lie in (1+d/p, r)");
        double lo = 1.0 / p, hi = (r1 - 1.0) / d;
        if (!(lo < hi)) throw std::invalid_argument("BendingCurveParams: empty beta interval");
        b.beta = 0.5 * (lo + hi);
        return b;
    }

    double delta(double h, double s_minus_t) const {
        return alpha_bar * h * std::pow(s_minus_t, -beta);
    }
    double holder_alpha() const { return (p * (r - 1.0) - d) / (p * (r + 1.0) - 1.0); }
};

enum class UpperBoundVariant { BendingCurve, HolderInTime };

// Right-hand side of the comparison-curve upper bounds. The caller compares
// the returned value against u(t,x).
inline double subsolution_upper_bound(const ScalarField& u, const ScalarField& f, double t,
                                      const Vec& x, double s, const Vec& y,
                                      const BendingCurveParams& params, double C, double h,
                                      UpperBoundVariant variant) {
    if (!(s > t)) throw std::invalid_argument("subsolution_upper_bound: s > t required");
    const double q = params.p / (params.p - 1.0);
    double usy = u.interp(s, y);
    if (variant == UpperBoundVariant::BendingCurve) {
        Vec mid{0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])};
        CubeWindow w(0.5 * (t + s), mid, 0.5 * (s - t), params.alpha_bar * h);
        ScalarField fr1 = f;  // |f|^{r1} averaged over the window
        for (double& v : fr1.values()) v = std::pow(std::abs(v), params.r1);
        double favg = std::pow(cube_average(fr1, w), 1.0 / params.r1);
        return usy + C * std::pow(params.alpha_bar * h, q) / std::pow(s - t, q - 1.0) +
               C * (s - t) * favg;
    }
    double dist = vec_norm(Vec{x[0] - y[0], x[1] - y[1]}, u.grid().d);
    double fnorm = lebesgue_norm(f, params.r, domain_window(f.grid()));
    return usy + C * std::pow(dist, q) / std::pow(s - t, q - 1.0) +
           C * (fnorm + 1.0) * std::pow(s - t, params.holder_alpha());
}

// Smallest C for which the bound holds on the sampled pairs (the bound grows
// linearly in C, so this is a closed-form max).
struct PointPair {
    double t;
    Vec x;
    double s;
    Vec y;
};

inline double smallest_upper_bound_constant(const ScalarField& u, const ScalarField& f,
                                            const std::vector<PointPair>& pairs,
                                            const BendingCurveParams& params, double h,
                                            UpperBoundVariant variant) {
    double cstar = 0.0;
    for (const auto& pr : pairs) {
        double at0 = subsolution_upper_bound(u, f, pr.t, pr.x, pr.s, pr.y, params, 0.0, h, variant);
        double at1 = subsolution_upper_bound(u, f, pr.t, pr.x, pr.s, pr.y, params, 1.0, h, variant);
        double slope = at1 - at0;  // the C-linear part
        double lhs = u.interp(pr.t, pr.x);
        if (slope > 0) cstar = std::max(cstar, (lhs - at0) / slope);
    }
    return cstar;
}

// ---------------------------------------------------------------------------
// distributional subsolution test
//
// Tests  -du/dt + (1/bar_C)|Du|^p <= f  against nonnegative tensor bumps:
// returns the max over a lattice of unit-mass bumps phi of
//   integral( u * dphi/dt + (1/bar_C)|Du|^p phi - f phi ).

namespace detail {
inline double bump(double z) {
    double w = 1.0 - z * z;
    return w > 0 ? w * w * w : 0.0;
}
inline double bump_deriv(double z) {
    double w = 1.0 - z * z;
    return w > 0 ? -6.0 * z * w * w : 0.0;
}
}  // namespace detail

inline double distributional_subsolution_residual(const ScalarField& u, const ScalarField& f,
                                                  const HamiltonianModel& model,
                                                  double mollifier_scale) {
    const GridSpec& g = u.grid();
    if (mollifier_scale < 2 * std::max(g.dx(0), g.dt()))
        throw std::invalid_argument("mollifier_scale must span at least 2 grid cells");
    auto [ut, du] = finite_diff(u);
    ScalarField dup = du.magnitude();
    for (double& v : dup.values()) v = std::pow(v, model.p());

    const double st = mollifier_scale, sx = mollifier_scale;
    double worst = -std::numeric_limits<double>::infinity();

    std::vector<double> tc, xc1, xc2{0.0};
    for (double c = g.t_lo + st; c <= g.t_hi - st + 1e-12; c += 0.5 * st) tc.push_back(c);
    for (double c = g.x_lo[0] + sx; c <= g.x_hi[0] - sx + 1e-12; c += 0.5 * sx) xc1.push_back(c);
    if (g.d == 2) {
        xc2.clear();
        for (double c = g.x_lo[1] + sx; c <= g.x_hi[1] - sx + 1e-12; c += 0.5 * sx)
            xc2.push_back(c);
    }
    if (tc.empty() || xc1.empty() || xc2.empty())
        throw std::invalid_argument("mollifier_scale leaves no admissible bump centers");

    const double inv_cb = 1.0 / model.bar_c();
    for (double c0 : tc)
        for (double c1 : xc1)
            for (double c2 : xc2) {
                CubeWindow w(c0, Vec{c1, c2}, st, sx);
                double acc = 0, mass = 0;
                for_cells_in_window(g, w, [&](int k, int n, double wt) {
                    Vec x = g.point(n);
                    double zt = (g.time(k) - c0) / st;
                    double b1 = detail::bump((x[0] - c1) / sx);
                    double b2 = g.d == 2 ? detail::bump((x[1] - c2) / sx) : 1.0;
                    double phi = detail::bump(zt) * b1 * b2;
                    double dphi_dt = detail::bump_deriv(zt) / st * b1 * b2;
                    acc += wt * (u.at(k, n) * dphi_dt +
                                 (inv_cb * dup.at(k, n) - f.at(k, n)) * phi);
                    mass += wt * phi;
                });
                if (mass > 0) worst = std::max(worst, acc / mass);
            }
    return worst;
}

}  // namespace hjlab
