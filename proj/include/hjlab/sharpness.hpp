#pragma once

// The closed-form sharpness family: a graph coefficient that is cheap on the
// curve x = t^gamma and expensive off it, with terminal data that is free only
// at x = 1. Optimal trajectories launched from (0, x0) run along a straight
// segment to the curve, joining it at theta = sigma * x0^{1/gamma}, then ride
// the curve. On the foliated region O = {0 < t < x^{1/gamma} < 1} the value,
// its time derivative and |Du| have closed forms; the Lipschitz inf-convolution
// smoothings (a_n, g_n) make the problem solvable by the DP scheme, and the
// divergence scan measures how the Sobolev norms of the solves grow with
// resolution.

#include "hopf_lax.hpp"
#include "regularity.hpp"

namespace hjlab {

struct InconsistencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SharpnessThresholds {
    double m_min = 0;
    double g_min = 0;
    double eps_star = 0;
};

inline SharpnessThresholds sharpness_thresholds(double gamma, double q) {
    if (!(q > 1)) throw std::domain_error("sharpness_thresholds: q > 1 required");
    if (!(gamma > 1.0 - 1.0 / q && gamma < 1.0))
        throw std::domain_error("sharpness_thresholds: gamma must lie in (1-1/q, 1)");
    SharpnessThresholds th;
    double denom = 1.0 - (1.0 - gamma) * q;  // positive on the admissible interval
    th.m_min = std::pow(gamma, q) / denom;
    th.g_min = std::pow(gamma, q) / (q * denom);
    th.eps_star = (gamma * (q + 1.0) + 1.0 - q) / (q * (1.0 - gamma));
    return th;
}

struct SharpnessParams {
    double gamma = 0.75;
    double q = 2.0;
    double p = 2.0;     // conjugate of q
    double M = 2.0;     // off-graph coefficient scale (a_off = M/G)
    double G = 1.0;     // overall scale (a_on = 1/G)
    int n = 1;          // smoothing index
    double sigma = 0;   // optimal-slope constant theta_bar = sigma x0^{1/gamma}
    double eps_star = 0;
    double m_min = 0, g_min = 0;

    double a_on() const { return 1.0 / G; }
    double a_off() const { return M / G; }
    double tail_exponent() const { return 1.0 - (1.0 - gamma) * q; }

    // remaining riding cost  G^{-1} int_theta^1 (gamma s^{gamma-1})^q / q ds
    double tail(double theta) const {
        double e = tail_exponent();
        return std::pow(gamma, q) / (G * q) * (1.0 - std::pow(theta, e)) / e;
    }

    // launch cost of the straight segment from (t,x) joining the graph at theta
    double segment_cost(double theta, double t, double x) const {
        double num = std::pow(std::abs(std::pow(theta, gamma) - x), q);
        return a_off() / q * num / std::pow(theta - t, q - 1.0);
    }

    double objective(double theta, double x0) const { return segment_cost(theta, 0.0, x0) + tail(theta); }

    double objective_deriv(double theta, double x0) const {
        double tg = std::pow(theta, gamma);
        double diff = tg - x0;
        double sgn = diff >= 0 ? 1.0 : -1.0;
        double term1 = q * gamma * std::pow(theta, gamma - 1.0) * sgn *
                       std::pow(std::abs(diff), q - 1.0) * std::pow(theta, 1.0 - q);
        double term2 = (1.0 - q) * std::pow(std::abs(diff), q) * std::pow(theta, -q);
        double dseg = a_off() / q * (term1 + term2);
        double dtail = -std::pow(gamma, q) / (G * q) * std::pow(theta, -(1.0 - gamma) * q);
        return dseg + dtail;
    }
};

namespace detail {

inline double golden_min(const std::function<double(double)>& f, double lo, double hi,
                         int iters = 200) {
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters; ++i) {
        if (fc < fd) { b = d; d = c; fd = fc; c = b - gr * (b - a); fc = f(c); }
        else { a = c; c = d; fc = fd; d = a + gr * (b - a); fd = f(d); }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

// Minimizes the launch objective at a reference x0 and returns
// sigma = theta_bar / x0^{1/gamma}, verifying scale invariance across a decade.
inline double slope_constant(SharpnessParams& params, double reference_x0 = 0.25,
                             double invariance_tol = 1e-6) {
    auto theta_bar = [&](double x0) {
        auto f = [&](double th) { return params.objective(th, x0); };
        double lo = 1e-9, hi = 1.0 - 1e-12;
        double th0 = detail::golden_min(f, lo, hi);
        // polish the stationary point by bisection on the derivative
        double bl = std::max(lo, th0 * 0.9), bh = std::min(hi, th0 * 1.1);
        double dl = params.objective_deriv(bl, x0), dh = params.objective_deriv(bh, x0);
        if (dl < 0 && dh > 0) {
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (bl + bh);
                (params.objective_deriv(mid, x0) < 0 ? bl : bh) = mid;
            }
            th0 = 0.5 * (bl + bh);
        }
        if (th0 <= 2e-9 || th0 >= 1.0 - 1e-9)
            throw InconsistencyError("slope_constant: boundary minimizer");
        // reject flat or non-unique optima
        double f0 = f(th0);
        if (!(f(th0 * 0.8) > f0 && f(std::min(1.0 - 1e-12, th0 * 1.25)) > f0))
            throw InconsistencyError("slope_constant: minimizer not locally unique");
        return th0;
    };
    double s1 = theta_bar(reference_x0) / std::pow(reference_x0, 1.0 / params.gamma);
    double s2 = theta_bar(reference_x0 / 10.0) /
                std::pow(reference_x0 / 10.0, 1.0 / params.gamma);
    if (std::abs(s1 - s2) > invariance_tol * std::abs(s1))
        throw InconsistencyError("slope_constant: sigma is not scale invariant");
    params.sigma = s1;
    return s1;
}

inline SharpnessParams make_sharpness_params(double gamma, double q, double M, double G,
                                             int n = 1) {
    SharpnessThresholds th = sharpness_thresholds(gamma, q);
    if (!(M > th.m_min)) throw std::domain_error("sharpness: M must exceed gamma^q/(1-(1-gamma)q)");
    if (!(G > th.g_min))
        throw std::domain_error("sharpness: G must exceed gamma^q/(q(1-(1-gamma)q))");
    if (n < 1) throw std::domain_error("sharpness: smoothing index n >= 1");
    SharpnessParams sp;
    sp.gamma = gamma;
    sp.q = q;
    sp.p = q / (q - 1.0);
    sp.M = M;
    sp.G = G;
    sp.n = n;
    sp.eps_star = th.eps_star;
    sp.m_min = th.m_min;
    sp.g_min = th.g_min;
    slope_constant(sp);
    return sp;
}

// ---------------------------------------------------------------------------
// foliation

struct FoliationPoint {
    double x0 = 0;        // launch ordinate
    double theta_bar = 0; // join time sigma * x0^{1/gamma}
    double slope = 0;     // (theta_bar^gamma - x0) / theta_bar, constant on the segment
};

inline bool in_foliation_region(const SharpnessParams& sp, double t, double x) {
    if (!(t > 0 && x > 0)) return false;
    double xg = std::pow(x, 1.0 / sp.gamma);
    return t < xg && xg < 1.0;
}

// Solves x = slope(x0) t + x0 for the unique launch ordinate of the segment
// through (t,x); requires (t,x) in O and a join time theta_bar <= 1.
inline FoliationPoint invert_foliation(double t, double x, const SharpnessParams& sp) {
    auto slope_of = [&](double x0) {
        return (std::pow(sp.sigma, sp.gamma) - 1.0) / sp.sigma *
               std::pow(x0, 1.0 - 1.0 / sp.gamma);
    };
    if (t == 0.0) {  // the segment launches at (0, x0), so x0 = x
        if (!(x > 0 && x < 1)) throw std::domain_error("invert_foliation: point outside O");
        return FoliationPoint{x, sp.sigma * std::pow(x, 1.0 / sp.gamma), slope_of(x)};
    }
    if (!in_foliation_region(sp, t, x))
        throw std::domain_error("invert_foliation: point outside O");
    auto line_at = [&](double x0) { return slope_of(x0) * t + x0; };
    double lo = std::pow(t / sp.sigma, sp.gamma);  // theta_bar(lo) = t
    double hi = x;                                  // line starts above x
    double flo = line_at(lo) - x, fhi = line_at(hi) - x;
    if (!(flo <= 0 && fhi >= 0))
        throw std::domain_error("invert_foliation: bracket failed (point outside the foliation)");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        ((line_at(mid) - x) < 0 ? lo : hi) = mid;
    }
    FoliationPoint fp;
    fp.x0 = 0.5 * (lo + hi);
    fp.theta_bar = sp.sigma * std::pow(fp.x0, 1.0 / sp.gamma);
    fp.slope = slope_of(fp.x0);
    double residual = std::abs(line_at(fp.x0) - x);
    if (residual > 1e-10)
        throw InconsistencyError("invert_foliation: residual above 1e-10");
    if (fp.theta_bar > 1.0 + 1e-12)
        throw std::domain_error("invert_foliation: join time beyond the horizon");
    return fp;
}

// points where the whole foliation machinery is valid (join before the horizon)
inline bool in_foliated_subregion(const SharpnessParams& sp, double t, double x,
                                  double margin = 0.0) {
    if (!in_foliation_region(sp, t, x)) return false;
    try {
        FoliationPoint fp = invert_foliation(t, x, sp);
        return fp.theta_bar <= 1.0 - margin && fp.theta_bar > t;
    } catch (const std::exception&) {
        return false;
    }
}

struct ClosedFormFields {
    double u = 0;
    double dt_u = 0;    // positive: the backward equation gives du/dt = H(Du) >= 0
    double abs_du = 0;  // via |Du| = (p M)^{1/p} |du/dt|^{1/p}
    FoliationPoint foliation;
};

// dt_u = C_slope * x0^{-q(1/gamma - 1)} with this explicit constant
inline double slope_formula_constant(const SharpnessParams& sp) {
    double sf = (std::pow(sp.sigma, sp.gamma) - 1.0) / sp.sigma;
    return sp.M * (sp.q - 1.0) / (sp.G * sp.q) * std::pow(sf, sp.q);
}

inline ClosedFormFields closed_form_fields(double t, double x, const SharpnessParams& sp) {
    ClosedFormFields out;
    out.foliation = invert_foliation(t, x, sp);
    const double th = out.foliation.theta_bar;
    double slope = (std::pow(th, sp.gamma) - x) / (th - t);
    out.u = sp.a_off() / sp.q * std::pow(std::abs(slope), sp.q) * (th - t) + sp.tail(th);
    out.dt_u = sp.a_off() * (sp.q - 1.0) / sp.q * std::pow(std::abs(slope), sp.q);
    out.abs_du = std::pow(sp.p * sp.M * out.dt_u, 1.0 / sp.p);
    return out;
}

// ---------------------------------------------------------------------------
// inf-convolution smoothings

struct SmoothedCoefficients {
    std::function<double(double, const Vec&)> a_n;  // Lipschitz-n, G^{-1} <= a_n <= a
    std::function<double(double)> g_n;              // min(1, n |x-1|)
};

inline SmoothedCoefficients smoothed_coefficients(const SharpnessParams& sp, int n,
                                                  int graph_samples_per_unit = 0) {
    if (n < 1) throw std::invalid_argument("smoothed_coefficients: n >= 1");
    int samples = graph_samples_per_unit > 0 ? graph_samples_per_unit : 4 * n;
    auto pts = std::make_shared<std::vector<Vec>>();
    pts->reserve(samples + 1);
    for (int i = 0; i <= samples; ++i) {
        double tt = static_cast<double>(i) / samples;
        pts->push_back(Vec{tt, std::pow(tt, sp.gamma)});
    }
    double a_on = sp.a_on(), a_off = sp.a_off();
    double nn = n;
    double gamma = sp.gamma;
    SmoothedCoefficients out;
    // coarse scan over the samples, then a ternary refinement of the graph
    // parameter around the best sample; a_n multiplies the distance by n, so
    // the sampled distance alone would be off by O(1) next to the graph
    out.a_n = [pts, a_on, a_off, nn, gamma](double t, const Vec& x) {
        double best = std::numeric_limits<double>::infinity();
        size_t best_i = 0;
        for (size_t i = 0; i < pts->size(); ++i) {
            double d0 = t - (*pts)[i][0], d1 = x[0] - (*pts)[i][1];
            double d2 = d0 * d0 + d1 * d1;
            if (d2 < best) { best = d2; best_i = i; }
        }
        auto dist2 = [&](double s) {
            double d0 = t - s, d1 = x[0] - std::pow(s, gamma);
            return d0 * d0 + d1 * d1;
        };
        double lo = (best_i > 0 ? (*pts)[best_i - 1][0] : 0.0);
        double hi = (best_i + 1 < pts->size() ? (*pts)[best_i + 1][0] : 1.0);
        for (int it = 0; it < 40; ++it) {
            double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
            if (dist2(m1) < dist2(m2)) hi = m2;
            else lo = m1;
        }
        best = std::min(best, dist2(0.5 * (lo + hi)));
        return std::min(a_off, a_on + nn * std::sqrt(best));
    };
    out.g_n = [nn](double x) { return std::min(1.0, nn * std::abs(x - 1.0)); };
    return out;
}

// ---------------------------------------------------------------------------
// divergence scan over resolutions

struct SharpnessScanOptions {
    double x_margin = 0.125;   // solve on (-margin, 1+margin) so x=1 is interior
    bool interpolate = true;
    ScanThresholds thresholds;
};

struct SharpnessScanLevel {
    int resolution = 0;
    std::vector<double> dt_norms;  // per epsilon, over (0,1)^2
    std::vector<double> du_norms;
};

struct SharpnessScanReport {
    std::vector<double> epsilons;
    std::vector<SharpnessScanLevel> levels;
    std::vector<ScanVerdict> dt_verdicts;   // classification of ||du/dt||_{1+eps}
    std::vector<ScanVerdict> du_verdicts;   // classification of ||Du||_{p(1+eps)}
    std::vector<ScanVerdict> verdicts;      // combined per epsilon
    double eps_star = 0;
    double critical_epsilon = std::numeric_limits<double>::quiet_NaN();
};

// Solve the smoothed problem at one resolution (n = nx tied), on a grid that
// pads the unit square in x so the free terminal point is interior.
inline std::pair<ScalarField, GridSpec> solve_sharpness_problem(
    const SharpnessParams& sp, int nx, const SharpnessScanOptions& opts = {}) {
    GridSpec g;
    g.d = 1;
    g.t_lo = 0.0;
    g.t_hi = 1.0;
    double dx = 1.0 / nx;
    int pad = static_cast<int>(std::lround(opts.x_margin * nx));
    // align cell centers with x = 0 and x = 1 so the terminal dip g_n(1) = 0
    // is attained on the grid
    g.nx = nx + 2 * pad + 1;
    g.x_lo = {-(pad + 0.5) * dx, 0.0};
    g.x_hi = {1.0 + (pad + 0.5) * dx, 0.0};
    g.nt = nx;
    g.boundary = Boundary::Clamped;
    g.validate();

    SmoothedCoefficients sc = smoothed_coefficients(sp, nx);
    // envelope constant for H = |xi|^p/(p a^{p-1}) with a in [1/G, M/G]
    double bar_c = std::max({1.0, std::pow(sp.G, sp.p - 1.0) / sp.p,
                             sp.p * std::pow(sp.M / sp.G, sp.p - 1.0)});
    HamiltonianModel model = HamiltonianModel::power(1, sp.p, bar_c, sc.a_n);
    HJProblem prob;
    prob.model = model;
    prob.grid = g;
    prob.f = ScalarField(g, 0.0);
    prob.terminal = spatial_from_function(g, [&](const Vec& x) { return sc.g_n(x[0]); });
    SolveOptions sopts;
    sopts.interpolate = opts.interpolate;
    auto [u, rep] = solve_backward(prob, sopts);
    (void)rep;
    return {std::move(u), g};
}

inline SharpnessScanReport divergence_scan(const SharpnessParams& sp,
                                           const std::vector<double>& epsilons,
                                           const std::vector<int>& resolutions,
                                           const SharpnessScanOptions& opts = {}) {
    if (resolutions.size() < 2)
        throw std::invalid_argument("divergence_scan: need at least 2 resolutions");
    for (size_t i = 1; i < resolutions.size(); ++i)
        if (resolutions[i] <= resolutions[i - 1])
            throw std::invalid_argument("divergence_scan: resolutions must increase");

    SharpnessScanReport rep;
    rep.epsilons = epsilons;
    rep.eps_star = sp.eps_star;
    CubeWindow unit_square(0.5, Vec{0.5, 0}, 0.5, 0.5);

    for (int nx : resolutions) {
        auto [u, g] = solve_sharpness_problem(sp, nx, opts);
        auto [ut, du] = finite_diff(u);
        ScalarField dum = du.magnitude();
        SharpnessScanLevel lev;
        lev.resolution = nx;
        for (double eps : epsilons) {
            lev.dt_norms.push_back(lebesgue_norm(ut, 1.0 + eps, unit_square));
            lev.du_norms.push_back(lebesgue_norm(dum, sp.p * (1.0 + eps), unit_square));
        }
        rep.levels.push_back(std::move(lev));
    }

    double best_bounded = -std::numeric_limits<double>::infinity();
    double best_diverging = std::numeric_limits<double>::infinity();
    for (size_t e = 0; e < epsilons.size(); ++e) {
        std::vector<double> sdt, sdu;
        for (const auto& lev : rep.levels) {
            sdt.push_back(lev.dt_norms[e]);
            sdu.push_back(lev.du_norms[e]);
        }
        ScanVerdict vdt = classify_norm_series(sdt, opts.thresholds);
        ScanVerdict vdu = classify_norm_series(sdu, opts.thresholds);
        rep.dt_verdicts.push_back(vdt);
        rep.du_verdicts.push_back(vdu);
        ScanVerdict v = combine_verdicts(vdt, vdu);
        rep.verdicts.push_back(v);
        if (v == ScanVerdict::Bounded) best_bounded = std::max(best_bounded, epsilons[e]);
        if (v == ScanVerdict::Diverging) best_diverging = std::min(best_diverging, epsilons[e]);
    }
    if (std::isfinite(best_bounded) && std::isfinite(best_diverging) &&
        best_bounded < best_diverging)
        rep.critical_epsilon = 0.5 * (best_bounded + best_diverging);
    return rep;
}

// exact x0-integral exponent of the closed-form |du/dt|^{1+eps} mass; the
// integral over O converges iff this exceeds -1
inline double x0_integral_exponent(const SharpnessParams& sp, double eps) {
    return -sp.q * (1.0 / sp.gamma - 1.0) * (1.0 + eps) + 1.0 / sp.gamma;
}

}  // namespace hjlab
