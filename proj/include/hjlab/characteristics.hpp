#pragma once

// Discrete generalized characteristics: the DP argmin path walked forward in
// time from a start point, with its running energy xi = sum dt |gamma'|^q and
// the exit time tau relative to a stopping cube. Paths are reconstructed by
// re-running the per-node argmin of the solver (same tie-breaking), so the
// one-step identity  u(t_k,x) = dt L + dt f + u(t_{k+1}, y*)  holds exactly
// along every extracted path.

#include "hopf_lax.hpp"

namespace hjlab {

enum class ExitReason { HitSpatialBound, HitTimeCap, ReachedHorizon };

inline const char* exit_reason_name(ExitReason r) {
    switch (r) {
        case ExitReason::HitSpatialBound: return "hit_spatial_bound";
        case ExitReason::HitTimeCap: return "hit_time_cap";
        default: return "reached_horizon";
    }
}

// Stop condition from the intrinsic-window geometry: closed sup-norm cube of
// radius half_width around center, time cap relative to the start.
struct StopCube {
    Vec center{0, 0};
    double half_width = 0;  // c1*h/2
    double time_cap = 0;    // c2*sigma*h
};

struct CharacteristicPath {
    std::vector<double> times;
    std::vector<Vec> points;
    std::vector<Vec> velocities;   // (points[k+1]-points[k])/dt
    std::vector<double> cum_energy;  // cum_energy[j] = sum_{i<j} dt |v_i|^q
    std::vector<double> u_along;     // solved field along the path
    double energy_xi = 0;
    double exit_time_tau = 0;
    ExitReason exit_reason = ExitReason::ReachedHorizon;
    int d = 1;
    double dt = 0;
    double q = 2;

    int steps() const { return static_cast<int>(velocities.size()); }
};

// Follows the DP argmin forward from `start` until the stop cube (when given)
// or the horizon. Node fidelity: the start snaps to the nearest level/node.
inline CharacteristicPath extract_characteristic(const ScalarField& u, const HJProblem& prob,
                                                 double start_t, const Vec& start_x,
                                                 const std::optional<StopCube>& stop = {},
                                                 const SolveOptions& opts = {}) {
    prob.validate();
    const GridSpec& g = prob.grid;
    if (start_t < g.t_lo - 1e-12 || start_t > g.t_hi + 1e-12)
        throw std::domain_error("extract_characteristic: start time outside grid");
    for (int a = 0; a < g.d; ++a)
        if (start_x[a] < g.x_lo[a] - 1e-12 || start_x[a] > g.x_hi[a] + 1e-12)
            throw std::domain_error("extract_characteristic: start point outside grid");

    CharacteristicPath path;
    path.d = g.d;
    path.dt = g.dt();
    path.q = prob.model.q();

    int k = g.locate_time(start_t);
    int node = g.nearest_node(start_x);
    const double t0 = g.time(k);

    auto inside = [&](const Vec& x) {
        if (!stop) return true;
        for (int a = 0; a < g.d; ++a)
            if (std::abs(x[a] - stop->center[a]) > stop->half_width + 1e-14) return false;
        return true;
    };

    path.times.push_back(t0);
    path.points.push_back(g.point(node));
    path.cum_energy.push_back(0.0);
    path.u_along.push_back(u.at(k, node));

    dp::LevelScratch scratch;
    SolveOptions node_opts = opts;
    node_opts.interpolate = false;  // paths live on the node lattice

    double xi = 0;
    bool exited = false;
    while (k < g.nt - 1) {
        if (stop && g.time(k) - t0 >= stop->time_cap - 1e-14) {
            path.exit_reason = ExitReason::HitTimeCap;
            exited = true;
            break;
        }
        std::vector<double> unext(g.npoints());
        for (int n = 0; n < g.npoints(); ++n) unext[n] = u.at(k + 1, n);
        dp::run_level(g, prob.model, prob.f, k, unext, node_opts, scratch);
        int next = scratch.argmin[node];
        Vec xq = g.point(node), yq = g.point(next);
        Vec v{(yq[0] - xq[0]) / path.dt, g.d == 2 ? (yq[1] - xq[1]) / path.dt : 0.0};
        if (g.boundary == Boundary::Periodic) {
            for (int a = 0; a < g.d; ++a) {
                double L = g.extent(a);
                double dxa = yq[a] - xq[a];
                if (dxa > L / 2) dxa -= L;
                if (dxa < -L / 2) dxa += L;
                v[a] = dxa / path.dt;
            }
        }
        double speed = vec_norm(v, g.d);
        xi += path.dt * std::pow(speed, path.q);
        ++k;
        node = next;
        path.times.push_back(g.time(k));
        Vec posn = path.points.back();
        for (int a = 0; a < g.d; ++a) posn[a] += v[a] * path.dt;  // unwrapped position
        path.points.push_back(posn);
        path.velocities.push_back(v);
        path.cum_energy.push_back(xi);
        path.u_along.push_back(u.at(k, node));
        if (!inside(posn)) {
            path.exit_reason = ExitReason::HitSpatialBound;
            exited = true;
            break;
        }
    }
    if (!exited) {
        path.exit_reason = (stop && g.time(k) - t0 >= stop->time_cap - 1e-14)
                               ? ExitReason::HitTimeCap
                               : ExitReason::ReachedHorizon;
    }
    path.energy_xi = xi;
    path.exit_time_tau = path.times.back() - t0;
    return path;
}

// min over s along the path of
//   u(t,x) - u(s,gamma(s)) - (1/C) int_t^s |gamma'|^q + C (s-t)
struct SupersolutionReport {
    double margin = 0;
    bool pass = false;
    double constant = 0;
};

inline SupersolutionReport verify_supersolution_inequality(const CharacteristicPath& path,
                                                           double C, double tolerance) {
    if (C <= 0) throw std::invalid_argument("verify_supersolution_inequality: C > 0 required");
    SupersolutionReport r;
    r.constant = C;
    double margin = std::numeric_limits<double>::infinity();
    double u0 = path.u_along.front();
    double t0 = path.times.front();
    for (size_t j = 1; j < path.times.size(); ++j) {
        double m = u0 - path.u_along[j] - path.cum_energy[j] / C + C * (path.times[j] - t0);
        margin = std::min(margin, m);
    }
    r.margin = margin;
    r.pass = margin >= -tolerance;
    return r;
}

// The margin is increasing in C, so the smallest passing constant is found by
// bisection.
inline double smallest_supersolution_constant(const CharacteristicPath& path, double tolerance,
                                              double c_hi = 1e9) {
    auto ok = [&](double c) { return verify_supersolution_inequality(path, c, tolerance).pass; };
    if (!ok(c_hi)) return std::numeric_limits<double>::infinity();
    double lo = 1e-9;
    if (ok(lo)) return lo;
    double hi = c_hi;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (ok(mid) ? hi : lo) = mid;
    }
    return hi;
}

// Weak reverse inequality on |gamma'| over all dyadic sub-windows:
//   avg_t^{t+h} |g'|^q <= A (avg_t^{t+h} |g'|)^q + B h^{alpha-1}
struct WeakReverseReport {
    double a_min = 0;        // smallest A making it hold with the given B
    double worst_ratio = 0;  // max over windows of mean(|v|^q)/mean(|v|)^q
    int windows = 0;
    bool holds_with_a = false;
};

inline WeakReverseReport weak_reverse_inequality_check(const CharacteristicPath& path, double A,
                                                       double B, double alpha) {
    int n = path.steps();
    if (n < 4)
        throw std::invalid_argument("weak_reverse_inequality_check: path needs >= 4 steps");
    WeakReverseReport r;
    int d = path.d;
    for (int len = n; len >= 1; len = len / 2) {
        for (int start = 0; start + len <= n; start += len) {
            double sq = 0, s1 = 0;
            for (int j = start; j < start + len; ++j) {
                double sp = vec_norm(path.velocities[j], d);
                sq += std::pow(sp, path.q);
                s1 += sp;
            }
            double h = len * path.dt;
            double mean_q = sq / len;
            double mean_1 = s1 / len;
            ++r.windows;
            if (mean_1 > 0) {
                double denom = std::pow(mean_1, path.q);
                r.worst_ratio = std::max(r.worst_ratio, mean_q / denom);
                double needed = (mean_q - B * std::pow(h, alpha - 1.0)) / denom;
                r.a_min = std::max(r.a_min, needed);
            }
        }
        if (len == 1) break;
    }
    r.a_min = std::max(r.a_min, 0.0);
    r.holds_with_a = r.a_min <= A * (1 + 1e-12);
    return r;
}

// Discrete Hoelder along the path: |gamma(t+tau)-gamma(t)| <= xi^{1/q} tau^{1/p};
// the discrete sums satisfy this exactly, so it is asserted on every path.
inline bool endpoint_displacement_ok(const CharacteristicPath& path, double rel_tol = 1e-12) {
    if (path.steps() == 0) return true;
    Vec d0{path.points.back()[0] - path.points.front()[0],
           path.points.back()[1] - path.points.front()[1]};
    double disp = vec_norm(d0, path.d);
    double p = path.q / (path.q - 1.0);
    double bound = std::pow(path.energy_xi, 1.0 / path.q) *
                   std::pow(path.exit_time_tau, 1.0 / p);
    return disp <= bound * (1 + rel_tol) + 1e-300;
}

// Fit int_t^{t+h}|gamma'| ~ C h^{1-1/theta} over dyadic windows; returns the
// fitted theta (large when the path moves at constant speed).
inline double fit_path_theta(const CharacteristicPath& path) {
    int n = path.steps();
    std::vector<double> lx, ly;
    for (int len = n; len >= 1; len /= 2) {
        double worst = 0;
        for (int start = 0; start + len <= n; start += len) {
            double s1 = 0;
            for (int j = start; j < start + len; ++j)
                s1 += path.dt * vec_norm(path.velocities[j], path.d);
            worst = std::max(worst, s1);
        }
        if (worst > 0) {
            lx.push_back(std::log(len * path.dt));
            ly.push_back(std::log(worst));
        }
        if (len == 1) break;
    }
    if (lx.size() < 2) return std::numeric_limits<double>::infinity();
    double mx = 0, my = 0;
    for (size_t i = 0; i < lx.size(); ++i) { mx += lx[i]; my += ly[i]; }
    mx /= lx.size();
    my /= ly.size();
    double num = 0, den = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    double slope = den > 0 ? num / den : 1.0;
    if (slope >= 1.0) return std::numeric_limits<double>::infinity();
    return 1.0 / (1.0 - slope);
}

// max over steps of the increase of u(s,gamma(s)) + C s (should be <= tol for
// extracted paths when C covers the running cost's f-part)
inline double monotone_value_defect(const CharacteristicPath& path, double C) {
    double worst = -std::numeric_limits<double>::infinity();
    for (size_t j = 1; j < path.times.size(); ++j) {
        double inc = (path.u_along[j] + C * path.times[j]) -
                     (path.u_along[j - 1] + C * path.times[j - 1]);
        worst = std::max(worst, inc);
    }
    return worst;
}

}  // namespace hjlab
