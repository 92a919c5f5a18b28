#pragma once

// First-order mean field games on the torus: the value field is obtained by
// minimizing the convex functional
//   F(w) = int_0^T int G*(x, -dw/dt + H(x, Dw)) - int m0 w(0,.)
// over discrete fields w with w(T,.) = u_T, and the density is recovered from
// the first-order optimality relation m = dG*(alpha). The certification suite
// checks the weak continuity equation, the pointwise equation on {m > 0}, the
// supersolution margin and the energy identity.
//
// The discrete objective uses one-sided time differences and central space
// differences; its gradient entries are exactly the discrete continuity
// operator applied to m = dG*(alpha), so a converged run conserves mass and
// satisfies the weak continuity equation to gradient tolerance.

#include <random>

#include "grid.hpp"
#include "hopf_lax.hpp"

namespace hjlab {

struct CouplingPrimitives {
    double c = 1.0;
    double r_prime = 2.0;
    double r = 2.0;  // conjugate of r_prime

    double G(double m) const {
        if (m < 0) return std::numeric_limits<double>::infinity();
        return c * std::pow(m, r_prime) / r_prime;
    }
    double G_star(double a) const {
        if (a <= 0) return 0.0;
        return std::pow(c, 1.0 - r) * std::pow(a, r) / r;
    }
    double dG_star(double a) const {
        if (a <= 0) return 0.0;
        return std::pow(a / c, r - 1.0);
    }
    double g(double m) const { return m <= 0 ? 0.0 : c * std::pow(m, r_prime - 1.0); }
};

inline CouplingPrimitives coupling_primitives(double c, double r_prime) {
    if (!(c > 0)) throw std::invalid_argument("coupling_primitives: c > 0 required");
    if (!(r_prime > 1)) throw std::invalid_argument("coupling_primitives: r' > 1 required");
    CouplingPrimitives cp;
    cp.c = c;
    cp.r_prime = r_prime;
    cp.r = r_prime / (r_prime - 1.0);
    return cp;
}

struct MFGProblem {
    GridSpec grid;  // Periodic; t_lo = 0, t_hi = T
    HamiltonianModel model;
    CouplingPrimitives coupling;
    std::vector<double> m0;   // nonnegative, unit mass
    std::vector<double> u_T;

    double T() const { return grid.t_hi - grid.t_lo; }
    double cell_volume() const { return std::pow(grid.dx(0), grid.d); }

    void validate() const {
        grid.validate();
        if (grid.boundary != Boundary::Periodic)
            throw std::invalid_argument("MFGProblem: periodic grid required");
        if (model.kind() != HamiltonianModel::Kind::Power)
            throw std::invalid_argument("MFGProblem: Power Hamiltonian required");
        if (model.coeff_time_dependent())
            throw std::invalid_argument("MFGProblem: time-dependent Hamiltonians are rejected");
        if (static_cast<int>(m0.size()) != grid.npoints() ||
            static_cast<int>(u_T.size()) != grid.npoints())
            throw std::invalid_argument("MFGProblem: data does not match the spatial layout");
        double mass = 0;
        for (double v : m0) {
            if (v < 0) throw std::invalid_argument("MFGProblem: m0 must be nonnegative");
            mass += v;
        }
        mass *= cell_volume();
        if (std::abs(mass - 1.0) > 1e-12)
            throw std::invalid_argument("MFGProblem: m0 must have unit mass (got " +
                                        std::to_string(mass) + ")");
        if (!(coupling.r > 1.0 + grid.d / model.p()))
            throw std::invalid_argument("MFGProblem: standing assumption r > 1 + d/p violated");
    }
};

struct MFGNonConvergence : std::runtime_error {
    std::vector<double> history;
    MFGNonConvergence(const std::string& what, std::vector<double> hist)
        : std::runtime_error(what), history(std::move(hist)) {}
};

struct MFGOptions {
    int max_iters = 200000;
    double tol = 1e-10;       // accuracy promise; the gradient stop is tighter
    int patience = 80;        // iterations without resolvable progress
    uint64_t seed = 0;
    double init_noise = 0.0;  // amplitude of the seeded random initialization
    int lbfgs_memory = 25;
};

// the gradient 2-norm is driven below tol by this factor so m-level residuals
// (mass drift, run-to-run agreement) land within the declared tolerance
inline constexpr double kMfgGradSafety = 0.25;

struct MFGReports {
    double continuity_residual = 0;
    double ae_residual = 0;
    double supersol_margin = 0;
    double energy_gap = 0;
    double mass_error = 0;
    double grad_norm = 0;
    int iterations = 0;
};

struct MFGSolution {
    ScalarField u;
    ScalarField m;      // density per time cell; the last level repeats the final cell
    ScalarField alpha;  // -du/dt + H(x,Du), clipped below at 0
    MFGReports reports;
    std::vector<double> objective_history;
};

namespace mfg_detail {

// alpha, m and D_pH per time cell (levels 0..nt-2) for the current w
struct CellState {
    std::vector<double> alpha;  // raw, unclipped
    std::vector<double> m;
    std::vector<double> dph;    // D_pH(x, Dw), d components per node
    std::vector<double> dw;     // Dw, d components per node
};

inline void eval_cells(const MFGProblem& pb, const std::vector<double>& w, CellState& st) {
    const GridSpec& g = pb.grid;
    const int np = g.npoints();
    const int cells = (g.nt - 1) * np;
    st.alpha.resize(cells);
    st.m.resize(cells);
    st.dph.assign(static_cast<size_t>(cells) * g.d, 0.0);
    st.dw.assign(static_cast<size_t>(cells) * g.d, 0.0);
    const double dt = g.dt();
    const double pp = pb.model.p();
    for (int k = 0; k + 1 < g.nt; ++k) {
        for (int n = 0; n < np; ++n) {
            int i1, i2;
            g.unflat(n, i1, i2);
            Vec grad{0, 0};
            for (int a = 0; a < g.d; ++a) {
                int i = a == 0 ? i1 : i2;
                int im = (i - 1 + g.nx) % g.nx, ip = (i + 1) % g.nx;
                int nm = a == 0 ? g.flat(im, i2) : g.flat(i1, im);
                int npp = a == 0 ? g.flat(ip, i2) : g.flat(i1, ip);
                grad[a] = (w[static_cast<size_t>(k) * np + npp] -
                           w[static_cast<size_t>(k) * np + nm]) /
                          (2 * g.dx(a));
            }
            Vec x = g.point(n);
            double acoef = pb.model.coefficient(0.0, x);
            double gn = vec_norm(grad, g.d);
            double h = std::pow(gn, pp) / (pp * std::pow(acoef, pp - 1.0)) + pb.model.offset();
            double al = -(w[static_cast<size_t>(k + 1) * np + n] -
                          w[static_cast<size_t>(k) * np + n]) /
                            dt +
                        h;
            int cell = k * np + n;
            st.alpha[cell] = al;
            st.m[cell] = pb.coupling.dG_star(al);
            double scale = gn > 0 ? std::pow(gn, pp - 2.0) / std::pow(acoef, pp - 1.0) : 0.0;
            for (int a = 0; a < g.d; ++a) {
                st.dw[static_cast<size_t>(cell) * g.d + a] = grad[a];
                st.dph[static_cast<size_t>(cell) * g.d + a] = scale * grad[a];
            }
        }
    }
}

// objective and gradient over the free unknowns w(k,.), k < nt-1
inline double objective_and_gradient(const MFGProblem& pb, const std::vector<double>& w,
                                     CellState& st, std::vector<double>* grad) {
    const GridSpec& g = pb.grid;
    const int np = g.npoints();
    const double dt = g.dt();
    const double vol = pb.cell_volume();
    eval_cells(pb, w, st);

    double obj = 0;
    for (int k = 0; k + 1 < g.nt; ++k)
        for (int n = 0; n < np; ++n) obj += dt * vol * pb.coupling.G_star(st.alpha[k * np + n]);
    for (int n = 0; n < np; ++n) obj -= vol * pb.m0[n] * w[n];

    if (grad) {
        grad->assign(static_cast<size_t>(g.nt - 1) * np, 0.0);
        auto gref = [&](int k, int n) -> double& {
            return (*grad)[static_cast<size_t>(k) * np + n];
        };
        for (int k = 0; k + 1 < g.nt; ++k) {
            for (int n = 0; n < np; ++n) {
                double mkn = st.m[k * np + n];
                // d alpha / d w(k,n) = +1/dt, d alpha / d w(k+1,n) = -1/dt
                gref(k, n) += vol * mkn;
                if (k + 1 < g.nt - 1) gref(k + 1, n) -= vol * mkn;
                // H part: alpha(k,j) depends on the neighbors of j at level k
                int i1, i2;
                g.unflat(n, i1, i2);
                for (int a = 0; a < g.d; ++a) {
                    double coeff = dt * vol * mkn *
                                   st.dph[(static_cast<size_t>(k) * np + n) * g.d + a] /
                                   (2 * g.dx(a));
                    int i = a == 0 ? i1 : i2;
                    int im = (i - 1 + g.nx) % g.nx, ip = (i + 1) % g.nx;
                    int nm = a == 0 ? g.flat(im, i2) : g.flat(i1, im);
                    int npl = a == 0 ? g.flat(ip, i2) : g.flat(i1, ip);
                    gref(k, npl) += coeff;
                    gref(k, nm) -= coeff;
                }
            }
        }
        for (int n = 0; n < np; ++n) gref(0, n) -= vol * pb.m0[n];
    }
    return obj;
}

inline double norm2(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace mfg_detail

// L-BFGS with Armijo backtracking on the convex objective; monotone by
// construction, so the recorded objective history is non-increasing.
inline MFGSolution solve_mfg_variational(const MFGProblem& pb, const MFGOptions& opts = {}) {
    pb.validate();
    const GridSpec& g = pb.grid;
    const int np = g.npoints();
    const int free_levels = g.nt - 1;
    const size_t dof = static_cast<size_t>(free_levels) * np;

    // full w includes the pinned terminal level
    std::vector<double> w(static_cast<size_t>(g.nt) * np);
    {
        std::mt19937_64 rng(opts.seed);
        std::normal_distribution<double> noise(0.0, 1.0);
        for (int k = 0; k < g.nt; ++k) {
            double ramp = (g.t_hi - g.time(k)) / pb.T();
            for (int n = 0; n < np; ++n) {
                double base = pb.u_T[n];
                double pert = opts.init_noise > 0 ? opts.init_noise * ramp * noise(rng) : 0.0;
                w[static_cast<size_t>(k) * np + n] = k == g.nt - 1 ? base : base + pert;
            }
        }
    }

    mfg_detail::CellState st;
    std::vector<double> grad, grad_new, x_try(w.size());
    auto eval = [&](const std::vector<double>& ww, std::vector<double>* gr) {
        return mfg_detail::objective_and_gradient(pb, ww, st, gr);
    };

    double fval = eval(w, &grad);
    std::vector<double> history{fval};

    // L-BFGS memory
    std::vector<std::vector<double>> s_hist, y_hist;
    std::vector<double> rho_hist;

    int stall = 0;
    int iter = 0;
    double gnorm = mfg_detail::norm2(grad);
    double best_gnorm = gnorm;
    const double grad_stop = kMfgGradSafety * opts.tol;
    for (; iter < opts.max_iters && gnorm > grad_stop; ++iter) {
        // two-loop recursion
        std::vector<double> dir = grad;
        std::vector<double> alpha_lb(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            double a = 0;
            for (size_t j = 0; j < dof; ++j) a += s_hist[i][j] * dir[j];
            a *= rho_hist[i];
            alpha_lb[i] = a;
            for (size_t j = 0; j < dof; ++j) dir[j] -= a * y_hist[i][j];
        }
        if (!s_hist.empty()) {
            double sy = 0, yy = 0;
            const auto& sl = s_hist.back();
            const auto& yl = y_hist.back();
            for (size_t j = 0; j < dof; ++j) {
                sy += sl[j] * yl[j];
                yy += yl[j] * yl[j];
            }
            if (yy > 0) {
                double scale = sy / yy;
                for (size_t j = 0; j < dof; ++j) dir[j] *= scale;
            }
        }
        for (size_t i = 0; i < s_hist.size(); ++i) {
            double b = 0;
            for (size_t j = 0; j < dof; ++j) b += y_hist[i][j] * dir[j];
            b *= rho_hist[i];
            for (size_t j = 0; j < dof; ++j) dir[j] += s_hist[i][j] * (alpha_lb[i] - b);
        }
        // dir approximates H^{-1} grad; descend along -dir
        double gd = 0;
        for (size_t j = 0; j < dof; ++j) gd += grad[j] * dir[j];
        if (gd <= 0) {  // safeguard: fall back to steepest descent
            dir = grad;
            gd = gnorm * gnorm;
        }

        double step = s_hist.empty() ? 1.0 / std::max(gnorm, 1e-12) : 1.0;
        double fnew = fval;
        bool accepted = false;
        // once the predicted decrease sinks below the objective's fp noise the
        // Armijo test cannot resolve descent; take the quasi-Newton step on
        // the strength of the gradient alone
        const double noise = 1e-13 * std::max(1.0, std::abs(fval));
        bool below_noise = 1e-4 * step * gd < noise;
        for (int ls = 0; ls < 60 && !below_noise; ++ls) {
            x_try = w;
            for (size_t j = 0; j < dof; ++j) x_try[j] -= step * dir[j];
            fnew = eval(x_try, nullptr);
            if (fnew <= fval - 1e-4 * step * gd) {
                accepted = true;
                break;
            }
            step *= 0.5;
            below_noise = 1e-4 * step * gd < noise;
        }
        if (!accepted && below_noise) {
            // damp by the stall count so repeated floor rejections make the
            // trial step shrink instead of repeating themselves
            double bstep = step * std::pow(0.5, std::min(stall, 40));
            x_try = w;
            for (size_t j = 0; j < dof; ++j) x_try[j] -= bstep * dir[j];
            fnew = eval(x_try, nullptr);
            // keep the history non-increasing up to the noise floor
            if (fnew <= fval + noise) accepted = true;
        }
        // progress bookkeeping: resolved objective decrease or a shrinking
        // gradient both count; a patience-long quiet window aborts
        bool progress = accepted && (fnew < fval || gnorm < best_gnorm * (1 - 1e-12));
        if (gnorm < best_gnorm) best_gnorm = gnorm;
        if (!accepted || !progress) {
            ++stall;
            if (stall > opts.patience)
                throw MFGNonConvergence(
                    "solve_mfg_variational: no resolvable progress before reaching tolerance",
                    history);
            if (!accepted) {
                // reset the quasi-Newton memory and retry from steepest descent
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                continue;
            }
        } else {
            stall = 0;
        }
        fnew = eval(x_try, &grad_new);

        std::vector<double> s(dof), y(dof);
        double sy = 0;
        for (size_t j = 0; j < dof; ++j) {
            s[j] = x_try[j] - w[j];
            y[j] = grad_new[j] - grad[j];
            sy += s[j] * y[j];
        }
        if (sy > 1e-16) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opts.lbfgs_memory) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
        }
        w.swap(x_try);
        grad.swap(grad_new);
        fval = fnew;
        gnorm = mfg_detail::norm2(grad);
        history.push_back(fval);
    }

    // assemble the solution fields
    MFGSolution sol;
    sol.objective_history = std::move(history);
    sol.u = ScalarField(g);
    for (int k = 0; k < g.nt; ++k)
        for (int n = 0; n < np; ++n) sol.u.at(k, n) = w[static_cast<size_t>(k) * np + n];
    mfg_detail::objective_and_gradient(pb, w, st, nullptr);
    sol.alpha = ScalarField(g);
    sol.m = ScalarField(g);
    for (int k = 0; k < g.nt; ++k)
        for (int n = 0; n < np; ++n) {
            int cell = std::min(k, g.nt - 2) * np + n;
            sol.alpha.at(k, n) = std::max(0.0, st.alpha[cell]);
            sol.m.at(k, n) = st.m[cell];
        }
    sol.reports.grad_norm = gnorm;
    sol.reports.iterations = iter;
    double supersol = std::numeric_limits<double>::infinity();
    for (double a : st.alpha) supersol = std::min(supersol, a);
    sol.reports.supersol_margin = supersol;
    double mass_err = 0;
    for (int k = 0; k + 1 < g.nt; ++k) {
        double mass = 0;
        for (int n = 0; n < np; ++n) mass += st.m[k * np + n];
        mass *= pb.cell_volume();
        mass_err = std::max(mass_err, std::abs(mass - 1.0));
    }
    sol.reports.mass_error = mass_err;
    return sol;
}

// m = dG*(alpha) pointwise from a given value field (first-order optimality)
inline ScalarField recover_density(const ScalarField& w, const MFGProblem& pb) {
    const GridSpec& g = w.grid();
    mfg_detail::CellState st;
    std::vector<double> wv = w.values();
    mfg_detail::eval_cells(pb, wv, st);
    ScalarField m(g);
    for (int k = 0; k < g.nt; ++k)
        for (int n = 0; n < g.npoints(); ++n)
            m.at(k, n) = st.m[std::min(k, g.nt - 2) * g.npoints() + n];
    return m;
}

// ---------------------------------------------------------------------------
// certification

struct MFGCertification {
    double continuity_residual = 0;  // weak continuity equation vs tensor bumps
    double ae_residual = 0;          // L1 of -du/dt + H - g(m) on {m > delta}
    double supersol_margin = 0;      // min of the unclipped alpha
    double energy_gap = 0;           // defect of the energy identity
    double mass_error = 0;
};

inline MFGCertification certify_solution(const MFGSolution& sol, const MFGProblem& pb,
                                         double mollifier_scale) {
    pb.validate();
    const GridSpec& g = pb.grid;
    const int np = g.npoints();
    const double dt = g.dt();
    const double vol = pb.cell_volume();

    mfg_detail::CellState st;
    std::vector<double> wv = sol.u.values();
    mfg_detail::eval_cells(pb, wv, st);

    MFGCertification cert;

    // (a) weak continuity residual against tensor bumps, using the discrete
    // derivatives of phi so the pairing is exact for converged runs
    {
        double st_scale = std::min(mollifier_scale, 0.45 * pb.T());
        double sx_scale = std::min(mollifier_scale, 0.45 * g.extent(0));
        std::vector<double> tcs, xcs;
        for (double c = g.t_lo; c <= g.t_hi + 1e-12; c += 0.5 * st_scale) tcs.push_back(c);
        for (double c = g.x_lo[0]; c < g.x_hi[0] - 1e-12; c += 0.5 * sx_scale) xcs.push_back(c);
        double worst = 0;
        auto min_image = [&](double dxv, double L) {
            while (dxv > 0.5 * L) dxv -= L;
            while (dxv < -0.5 * L) dxv += L;
            return dxv;
        };
        for (double tc : tcs)
            for (double xc : xcs) {
                auto phi = [&](int k, int n) {
                    Vec x = g.point(n);
                    double b = detail::bump((g.time(k) - tc) / st_scale);
                    b *= detail::bump(min_image(x[0] - xc, g.extent(0)) / sx_scale);
                    if (g.d == 2)
                        b *= detail::bump(min_image(x[1] - xc, g.extent(1)) / sx_scale);
                    return b;
                };
                double acc = 0, mass_phi = 0;
                for (int k = 0; k + 1 < g.nt; ++k)
                    for (int n = 0; n < np; ++n) {
                        double ph = phi(k, n);
                        mass_phi += dt * vol * ph;
                        double dphidt = (phi(k + 1, n) - ph) / dt;
                        double adv = 0;
                        int i1, i2;
                        g.unflat(n, i1, i2);
                        for (int a = 0; a < g.d; ++a) {
                            int i = a == 0 ? i1 : i2;
                            int im = (i - 1 + g.nx) % g.nx, ip = (i + 1) % g.nx;
                            int nm = a == 0 ? g.flat(im, i2) : g.flat(i1, im);
                            int npl = a == 0 ? g.flat(ip, i2) : g.flat(i1, ip);
                            double dphi = (phi(k, npl) - phi(k, nm)) / (2 * g.dx(a));
                            adv += st.dph[(static_cast<size_t>(k) * np + n) * g.d + a] * dphi;
                        }
                        double mkn = st.m[k * np + n];
                        acc += dt * vol * (mkn * dphidt - mkn * adv);
                    }
                for (int n = 0; n < np; ++n) {
                    acc += vol * pb.m0[n] * phi(0, n);
                    acc -= vol * st.m[(g.nt - 2) * np + n] * phi(g.nt - 1, n);
                }
                if (mass_phi > 1e-12) worst = std::max(worst, std::abs(acc) / mass_phi);
            }
        cert.continuity_residual = worst;
    }

    // (b) pointwise equation on {m > delta}
    {
        double mmax = 0;
        for (double v : st.m) mmax = std::max(mmax, v);
        double delta = 1e-6 * mmax;
        double acc = 0;
        for (int k = 0; k + 1 < g.nt; ++k)
            for (int n = 0; n < np; ++n) {
                double mkn = st.m[k * np + n];
                if (mkn <= delta) continue;
                double resid = st.alpha[k * np + n] - pb.coupling.g(mkn);
                acc += dt * vol * std::abs(resid);
            }
        cert.ae_residual = acc;
    }

    // (c) supersolution margin: min of the raw alpha
    {
        double mn = std::numeric_limits<double>::infinity();
        for (double a : st.alpha) mn = std::min(mn, a);
        cert.supersol_margin = mn;
    }

    // (d) energy identity gap, evaluated with level-centered quadrature that
    // is independent of the solver's internal one-sided stencils (otherwise
    // discrete optimality makes the identity hold to solver noise and the
    // gap would not measure discretization)
    {
        double lhs = 0;
        for (int k = 1; k + 1 < g.nt; ++k)
            for (int n = 0; n < np; ++n) {
                double dtu = (wv[static_cast<size_t>(k + 1) * np + n] -
                              wv[static_cast<size_t>(k - 1) * np + n]) /
                             (2 * dt);
                double dot = 0;
                for (int a = 0; a < g.d; ++a) {
                    double dwa = 0.5 * (st.dw[(static_cast<size_t>(k) * np + n) * g.d + a] +
                                        st.dw[(static_cast<size_t>(k - 1) * np + n) * g.d + a]);
                    double dpha =
                        0.5 * (st.dph[(static_cast<size_t>(k) * np + n) * g.d + a] +
                               st.dph[(static_cast<size_t>(k - 1) * np + n) * g.d + a]);
                    dot += dwa * dpha;
                }
                double mc = 0.5 * (st.m[k * np + n] + st.m[(k - 1) * np + n]);
                lhs += dt * vol * mc * (dtu - dot);
            }
        // trapezoid end corrections with one-sided differences
        for (int n = 0; n < np; ++n) {
            double dtu0 = (wv[static_cast<size_t>(1) * np + n] - wv[n]) / dt;
            double dot0 = 0, dotT = 0;
            for (int a = 0; a < g.d; ++a) {
                dot0 += st.dw[(static_cast<size_t>(0) * np + n) * g.d + a] *
                        st.dph[(static_cast<size_t>(0) * np + n) * g.d + a];
                dotT += st.dw[(static_cast<size_t>(g.nt - 2) * np + n) * g.d + a] *
                        st.dph[(static_cast<size_t>(g.nt - 2) * np + n) * g.d + a];
            }
            double dtuT = (wv[static_cast<size_t>(g.nt - 1) * np + n] -
                           wv[static_cast<size_t>(g.nt - 2) * np + n]) /
                          dt;
            lhs += 0.5 * dt * vol * st.m[0 * np + n] * (dtu0 - dot0);
            lhs += 0.5 * dt * vol * st.m[(g.nt - 2) * np + n] * (dtuT - dotT);
        }
        double rhs = 0;
        for (int n = 0; n < np; ++n)
            rhs += vol * (st.m[(g.nt - 2) * np + n] * pb.u_T[n] - pb.m0[n] * wv[n]);
        cert.energy_gap = std::abs(lhs - rhs);
    }

    // mass conservation across all time cells
    {
        double worst = 0;
        for (int k = 0; k + 1 < g.nt; ++k) {
            double mass = 0;
            for (int n = 0; n < np; ++n) mass += st.m[k * np + n];
            worst = std::max(worst, std::abs(mass * vol - 1.0));
        }
        cert.mass_error = worst;
    }
    return cert;
}

}  // namespace hjlab
