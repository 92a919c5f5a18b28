#include <catch_amalgamated.hpp>

#include <random>

#include "hjlab/regularity.hpp"

using namespace hjlab;

namespace {

GridSpec grid_1d(int nx, int nt, double t_hi = 1.0, double xlo = -0.5, double xhi = 0.5) {
    GridSpec g;
    g.d = 1;
    g.nx = nx;
    g.nt = nt;
    g.t_lo = 0.0;
    g.t_hi = t_hi;
    g.x_lo = {xlo, 0.0};
    g.x_hi = {xhi, 0.0};
    g.validate();
    return g;
}

HJProblem abs_problem(const GridSpec& g, double slope = 1.0) {
    HJProblem p;
    p.grid = g;
    p.model = HamiltonianModel::power_const(g.d, 2.0, 1.0, 1.0);
    p.f = ScalarField(g, 0.0);
    p.terminal = spatial_from_function(g, [&](const Vec& x) { return slope * std::abs(x[0]); });
    return p;
}

}  // namespace

TEST_CASE("maximal function basics") {
    std::vector<double> c(50, 2.0);
    auto mc = maximal_function_1d(c, 0.1);
    for (double v : mc) CHECK(v == Catch::Approx(2.0).margin(1e-14));

    // indicator of [0,1] sampled on (-4,4); at t=2 the best window reaches
    // back to 0 and averages to 1/4
    int n = 400;
    double dx = 8.0 / n;
    std::vector<double> g(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double x = -4 + (i + 0.5) * dx;
        if (x > 0 && x < 1) g[i] = 1.0;
    }
    auto mg = maximal_function_1d(g, dx);
    int at2 = static_cast<int>((2.0 + 4.0) / dx);
    CHECK(mg[at2] == Catch::Approx(0.25).margin(0.01));
    // Mg dominates g everywhere
    for (int i = 0; i < n; ++i) CHECK(mg[i] >= g[i] - 1e-14);

    // weak (1,1) with the constant 5: |{Mg >= 1/4}| <= 20, direct measure = 3
    double meas = superlevel_measure(mg, dx, 0.25);
    CHECK(meas == Catch::Approx(3.0).margin(0.1));
    CHECK(meas <= 5.0 * 1.0 / 0.25);

    CHECK_THROWS_AS(maximal_function_1d({1.0, -0.5}, 0.1), std::invalid_argument);
}

TEST_CASE("weak (1,1) bound on random piecewise-constant data") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        int n = 200;
        double dx = 1.0 / n;
        std::vector<double> g(n, 0.0);
        int pieces = 5 + static_cast<int>(unif(rng) * 5);
        for (int p = 0; p < pieces; ++p) {
            int a = static_cast<int>(unif(rng) * n), b = std::min(n, a + 1 + static_cast<int>(unif(rng) * 40));
            double val = 4.0 * unif(rng);
            for (int i = a; i < b; ++i) g[i] = val;
        }
        auto mg = maximal_function_1d(g, dx);
        double l1 = 0;
        for (double v : g) l1 += v * dx;
        for (double alpha : {0.1, 0.3, 1.0, 2.5}) {
            CHECK(superlevel_measure(mg, dx, alpha) <= 5.0 * l1 / alpha + 1e-12);
        }
    }
}

TEST_CASE("intrinsic scale config and window triples") {
    IntrinsicScaleConfig cfg;
    cfg.p = 2.0;
    cfg.r1 = 2.0;
    cfg.validate();
    CHECK(cfg.sigma(2.0) == Catch::Approx(0.5));
    IntrinsicScaleConfig bad = cfg;
    bad.c2 = 5.0;  // violates c2 >= 5 c1
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    IntrinsicScaleConfig raise = cfg;
    raise.kappa = 8.0;
    raise.ensure_sigma_admissible();
    CHECK(raise.sigma(raise.lambda0) <= 1.0);

    GridSpec g = grid_1d(64, 64);
    WindowTriple w = make_window_triple(g, cfg, 0.5, Vec{0.0, 0}, 0.02, 1.0);
    CHECK(w.Qpp.half_space[0] == Catch::Approx(cfg.c2 * 0.01));
    CHECK_THROWS_AS(make_window_triple(g, cfg, 0.5, Vec{0.0, 0}, 0.2, 1.0), std::domain_error);
}

TEST_CASE("good-time selection") {
    GridSpec g = grid_1d(64, 128);
    IntrinsicScaleConfig cfg;
    cfg.p = 2.0;
    cfg.r1 = 2.0;

    // constant fields: the earliest candidate level qualifies
    ScalarField dup(g, 1.0), f(g, 1.0);
    WindowTriple w = make_window_triple(g, cfg, 0.5, Vec{0.0, 0}, 0.02, 1.2);
    GoodTimeReport rep = select_good_time(dup, f, w, cfg, 10.0);
    REQUIRE(rep.found);
    // oracle: earliest discrete level strictly inside (t0 - sh, t0 - sh/2)
    double sh = w.sigma * w.h;
    int k_expect = -1;
    for (int k = 0; k < g.nt; ++k) {
        double t = g.time(k);
        if (t > 0.5 - sh && t < 0.5 - sh / 2) { k_expect = k; break; }
    }
    REQUIRE(k_expect >= 0);
    CHECK(rep.level == k_expect);

    // a tall f-spike late in Q'' forces the pick away from the spike
    ScalarField fs(g, 1.0);
    double spike_t = 0.5 + 0.3 * cfg.c2 * sh;
    int ks = g.locate_time(spike_t);
    for (int n = 0; n < g.npoints(); ++n) fs.at(ks, n) = 500.0;
    GoodTimeReport rep2 = select_good_time(dup, fs, w, cfg, 10.0);
    if (rep2.found) {
        // verify both bounds directly at the returned level (exhaustive oracle)
        double lamp = std::pow(w.lambda, cfg.p);
        double a = slice_average(dup, rep2.level, w.Qp.x_center, 0.5 * cfg.c1 * w.h);
        CHECK(a <= 10.0 * std::pow(cfg.c2, g.d + 1.0) * lamp + 1e-9);
    }
    // infeasible cap: failure carries the best constant
    GoodTimeReport rep3 = select_good_time(dup, fs, w, cfg, 1e-9);
    CHECK_FALSE(rep3.found);
    CHECK(std::isfinite(rep3.best_c));
    CHECK(rep3.best_c > 1e-9);
}

TEST_CASE("stopping radius") {
    GridSpec g = grid_1d(96, 96);
    IntrinsicScaleConfig cfg;
    cfg.p = 2.0;
    cfg.r1 = 2.0;
    double lambda = 1.0;

    // flat field exactly at lambda^p: every radius gives equality -> h_max
    ScalarField flat(g, 1.0);
    auto sr = stopping_radius(flat, 0.5, Vec{0.0, 0}, lambda, cfg, 0.02);
    REQUIRE_FALSE(sr.has_value());  // the point itself is not above lambda^p

    // single central peak above lambda^p on a low background; narrow enough
    // that the window average drops below lambda^p before h_max
    ScalarField peak = ScalarField::from_function(g, [](double t, const Vec& x) {
        double d2 = (t - 0.5) * (t - 0.5) + x[0] * x[0];
        return 0.25 + 2.0 * std::exp(-d2 / (2 * 0.01 * 0.01));
    });
    auto sr2 = stopping_radius(peak, 0.5, Vec{0.0, 0}, lambda, cfg, 0.04);
    REQUIRE(sr2.has_value());
    CHECK(sr2->h > 0);
    CHECK(sr2->h < 0.04);
    // oracle: the average at the found radius sits at lambda^p (the operation
    // snaps the anchor point to the grid, so the oracle does too)
    double t_snap = g.time(g.locate_time(0.5));
    Vec x_snap = g.point(g.nearest_node(Vec{0.0, 0}));
    CubeWindow w(t_snap, x_snap, 0.5 * cfg.sigma(lambda) * sr2->h, 0.5 * sr2->h);
    CHECK(cube_average(peak, w) == Catch::Approx(1.0).margin(1e-6));
    CHECK(sr2->dilation_certified);

    // background below lambda^p everywhere: none
    ScalarField low(g, 0.4);
    CHECK_FALSE(stopping_radius(low, 0.5, Vec{0.0, 0}, lambda, cfg, 0.02).has_value());
}

TEST_CASE("reverse-Hoelder check on affine and solved fields") {
    GridSpec g = grid_1d(96, 96, 0.25);
    IntrinsicScaleConfig cfg;
    cfg.p = 2.0;
    cfg.r1 = 2.0;

    // affine u: |Du| = 2 everywhere, f = 0; with lambda^p = avg the hypothesis
    // holds with equality and Jensen gives min_C_hat <= 1
    ScalarField ua = ScalarField::from_function(g, [](double, const Vec& x) { return 2 * x[0]; });
    ScalarField f0(g, 0.0);
    double lambda = 2.0;  // |Du|^p = 4 = lambda^2
    WindowTriple w = make_window_triple(g, cfg, 0.125, Vec{0.0, 0}, 0.004, lambda);
    ReverseHolderReport rep = reverse_holder_check(ua, f0, w, cfg);
    REQUIRE(rep.hypothesis_met);
    CHECK(rep.min_c_hat <= 1.0 + 1e-9);
    CHECK(rep.lhs == Catch::Approx(4.0).margin(1e-9));

    // failing hypothesis: lambda far above the field is reported, not judged
    WindowTriple whi = make_window_triple(g, cfg, 0.125, Vec{0.0, 0}, 0.004, 50.0);
    ReverseHolderReport rep2 = reverse_holder_check(ua, f0, whi, cfg);
    CHECK_FALSE(rep2.hypothesis_met);
    CHECK(rep2.min_c_hat == 0.0);

    // solved |x| problem: in the constant-gradient region |Du| = 2 the
    // hypothesis holds with equality at lambda = 2 and the constant is finite
    HJProblem p = abs_problem(g, 2.0);
    SolveOptions so;
    so.interpolate = true;
    auto [u, rp] = solve_backward(p, so);
    int found = 0;
    for (double x0 : {-0.25, 0.25}) {
        for (double h : {0.004, 0.008}) {
            WindowTriple tri = make_window_triple(g, cfg, 0.2, Vec{x0, 0}, h, 2.0);
            ReverseHolderReport r = reverse_holder_check(u, p.f, tri, cfg);
            if (r.hypothesis_met) {
                ++found;
                CHECK(std::isfinite(r.min_c_hat));
                CHECK(r.min_c_hat >= 0.0);
                CHECK(r.min_c_hat <= 1.0 + 1e-6);  // Jensen equality in flat gradients
            }
        }
    }
    CHECK(found > 0);
}

TEST_CASE("good-lambda level sets") {
    GridSpec g = grid_1d(64, 64);
    IntrinsicScaleConfig cfg;
    cfg.p = 2.0;
    cfg.r1 = 2.0;

    // bounded g: E(lambda) empty above the bound
    ScalarField gb(g, 0.9);
    ScalarField f0(g, 0.0);
    auto rep = good_lambda_check(gb, f0, {1.0, 2.0, 4.0}, cfg);
    for (const auto& st : rep.stats) {
        CHECK(st.measure == 0.0);
        CHECK(st.integral_gp == 0.0);
    }
    CHECK(rep.min_constant == 0.0);

    // eta = 1 keeps E(lambda) inside E(eta lambda): a finite constant exists
    IntrinsicScaleConfig cfg1 = cfg;
    cfg1.eta = 1.0;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.0, 4.0);
    ScalarField gr = ScalarField::from_function(g, [&](double, const Vec&) { return unif(rng); });
    auto rep2 = good_lambda_check(gr, f0, {1.0, 1.6, 2.6}, cfg1);
    CHECK(std::isfinite(rep2.min_constant));
    CHECK(rep2.min_constant > 0.0);
    // measure non-increasing in lambda
    for (size_t i = 1; i < rep2.stats.size(); ++i)
        CHECK(rep2.stats[i].measure <= rep2.stats[i - 1].measure + 1e-15);
    // the reported constant certifies every level
    for (const auto& st : rep2.stats)
        CHECK(st.integral_gp <= rep2.min_constant * st.integral_data + 1e-12);

    CHECK_THROWS_AS(good_lambda_check(gr, f0, {0.5}, cfg1), std::invalid_argument);
}

TEST_CASE("good-lambda constant is monotone in eta") {
    GridSpec g = grid_1d(48, 48);
    IntrinsicScaleConfig lo, hi;
    lo.p = hi.p = 2.0;
    lo.r1 = hi.r1 = 2.0;
    lo.eta = 0.3;
    hi.eta = 0.7;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.0, 5.0);
    ScalarField gr = ScalarField::from_function(g, [&](double, const Vec&) { return unif(rng); });
    ScalarField f0(g, 0.0);
    std::vector<double> lams{1.0, 1.7, 3.0};
    // larger eta shrinks E(eta lambda), so the required constant grows
    CHECK(good_lambda_check(gr, f0, lams, lo).min_constant <=
          good_lambda_check(gr, f0, lams, hi).min_constant + 1e-12);
}

TEST_CASE("sobolev exponent scan on the linear-in-time family") {
    std::vector<ScalarField> fields;
    for (int n : {16, 32, 64}) {
        GridSpec g = grid_1d(n, n);
        fields.push_back(ScalarField::from_function(g, [](double t, const Vec&) { return t; }));
    }
    CubeWindow region = domain_window(fields[0].grid());
    auto rep = sobolev_exponent_scan(fields, {0.0, 1.0, 3.0}, region, 2.0);
    for (auto v : rep.verdicts) CHECK(v == ScanVerdict::Bounded);
    // ||du/dt||_{1+eps} = measure^{1/(1+eps)} = 1 on the unit square
    for (const auto& row : rep.dt_norms)
        for (double v : row) CHECK(v == Catch::Approx(1.0).margin(1e-12));
    CHECK(std::isnan(rep.critical_epsilon));
}

TEST_CASE("sobolev exponent scan flags the time-step family") {
    std::vector<ScalarField> fields;
    for (int n : {32, 64, 128}) {
        GridSpec g = grid_1d(n, n);
        fields.push_back(ScalarField::from_function(
            g, [](double t, const Vec&) { return t > 0.5 ? 1.0 : 0.0; }));
    }
    CubeWindow region = domain_window(fields[0].grid());
    auto rep = sobolev_exponent_scan(fields, {0.0, 2.0, 3.0}, region, 2.0);
    CHECK(rep.verdicts[0] == ScanVerdict::Bounded);    // BV: ||du/dt||_1 stays 1
    CHECK(rep.verdicts[1] == ScanVerdict::Diverging);  // singular part inflates
    CHECK(rep.verdicts[2] == ScanVerdict::Diverging);
    CHECK(rep.dt_norms[0][0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(rep.critical_epsilon == Catch::Approx(1.0));  // midpoint of 0 and 2
}

TEST_CASE("time-derivative cube bound") {
    GridSpec g = grid_1d(64, 65);
    ScalarField f1(g, 1.0);

    // u constant: lhs = 0
    ScalarField uc(g, 3.0);
    CubeWindow w(0.5, Vec{0.0, 0}, 0.5 * 0.0625, 0.5 * 0.0625);
    auto rc = time_derivative_cube_bound(uc, f1, w, 2.0, 2.0, 2.0);
    CHECK(rc.lhs == Catch::Approx(0.0).margin(1e-14));
    CHECK(rc.min_c == 0.0);

    // u = -t: negative lhs, any C works
    ScalarField um = ScalarField::from_function(g, [](double t, const Vec&) { return -t; });
    auto rm = time_derivative_cube_bound(um, f1, w, 2.0, 2.0, 2.0);
    CHECK(rm.lhs < 0);
    CHECK(rm.min_c == 0.0);

    // u = t, f = 1: min C = h^{d+1} / (2 (cbar h)^{d+1}) exactly
    // h = 0.0625 = 4 dt aligns with the level spacing (dt = 1/64)
    ScalarField up = ScalarField::from_function(g, [](double t, const Vec&) { return t; });
    auto rp = time_derivative_cube_bound(up, f1, w, 2.0, 2.0, 2.0);
    CHECK(rp.min_c == Catch::Approx(1.0 / (2 * std::pow(2.0, 2.0))).margin(1e-10));

    CubeWindow big(0.5, Vec{0.0, 0}, 0.3, 0.3);  // the 2x dilation leaves the domain
    CHECK_THROWS_AS(time_derivative_cube_bound(up, f1, big, 2.0, 2.0, 2.0), std::domain_error);
}

TEST_CASE("blow-up differentiability check") {
    // affine field: fit error 0 at every rho
    auto affine = [](double t, const Vec& x) { return 0.3 * t - 1.2 * x[0]; };
    auto rep = blowup_differentiability_check(affine, 1, 0.5, Vec{0.0, 0},
                                              {0.125, 0.0625, 0.03125});
    for (const auto& st : rep.stages) CHECK(st.fit_error < 1e-12);
    CHECK(rep.differentiable_like);

    // scale-invariant kink: u_rho = |y| at every scale, never differentiable
    auto kink = [](double, const Vec& x) { return std::abs(x[0]); };
    auto rep2 = blowup_differentiability_check(kink, 1, 0.5, Vec{0.0, 0},
                                               {0.125, 0.0625, 0.03125});
    CHECK_FALSE(rep2.differentiable_like);
    for (const auto& st : rep2.stages) CHECK(st.fit_error > 0.1);

    // smooth field: errors decrease with rho
    auto smooth = [](double t, const Vec& x) { return std::sin(t) * std::cos(x[0]); };
    auto rep3 = blowup_differentiability_check(smooth, 1, 0.5, Vec{0.1, 0},
                                               {0.25, 0.125, 0.0625});
    CHECK(rep3.differentiable_like);
    for (size_t i = 1; i < rep3.stages.size(); ++i)
        CHECK(rep3.stages[i].fit_error < rep3.stages[i - 1].fit_error);

    // the field-backed variant guards its window
    GridSpec g = grid_1d(32, 32);
    ScalarField u(g, 0.0);
    CHECK_THROWS_AS(blowup_differentiability_check(u, 0.05, Vec{0.0, 0}, {0.25, 0.125}),
                    std::domain_error);
}

TEST_CASE("exit time is bounded below on hypothesis windows") {
    // on window triples that pass (3.2), characteristics launched from the
    // good time stay inside Q_{c1 h/2} for at least 3 sigma h; with the type
    // constraint kappa >= 1 this needs a large inner dilation: paths of speed
    // ~lambda give tau/(sigma h) = c1/(2 kappa), and node-path velocity
    // quantization can double the effective speed
    GridSpec g = grid_1d(128, 128, 0.25);
    IntrinsicScaleConfig cfg;
    cfg.p = 2.0;
    cfg.r1 = 2.0;
    cfg.c1 = 12.0;
    cfg.c2 = 60.0;
    HJProblem p = abs_problem(g, 2.0);
    SolveOptions so;
    so.interpolate = true;
    auto [u, rp] = solve_backward(p, so);
    auto [un, rn] = solve_backward(p);  // node-mode drives path extraction
    int checked = 0;
    for (double x0 : {-0.3, 0.3}) {
        WindowTriple w = make_window_triple(g, cfg, 0.2, Vec{x0, 0}, 0.003, 2.0);
        ReverseHolderReport r = reverse_holder_check(u, p.f, w, cfg);
        if (!r.hypothesis_met) continue;
        StopCube stop{w.Q.x_center, 0.5 * cfg.c1 * w.h, cfg.c2 * w.sigma * w.h};
        double t_good = w.Q.t_center - 0.75 * w.sigma * w.h;
        auto path = extract_characteristic(un, p, t_good, w.Q.x_center, stop);
        CHECK(path.exit_time_tau >= 3.0 * w.sigma * w.h - 1e-12);
        ++checked;
    }
    CHECK(checked > 0);
}

TEST_CASE("oscillation-control constants on an extracted characteristic") {
    GridSpec g = grid_1d(96, 97, 1.0);
    IntrinsicScaleConfig cfg;
    cfg.p = 2.0;
    cfg.r1 = 2.0;
    HJProblem p = abs_problem(g, 2.0);
    auto [u, rp] = solve_backward(p);
    auto [ut, du] = finite_diff(u);
    ScalarField dum = du.magnitude();

    WindowTriple w = make_window_triple(g, cfg, 0.3, Vec{0.1, 0}, 0.02, 1.2);
    StopCube stop{w.Q.x_center, 0.5 * cfg.c1 * w.h, cfg.c2 * w.sigma * w.h};
    GoodTimeReport gt{true, g.locate_time(0.3 - 0.75 * w.sigma * w.h), 0.0, 1.0};
    auto path = extract_characteristic(u, p, g.time(gt.level), w.Q.x_center, stop);

    if (path.exit_reason == ExitReason::HitSpatialBound && path.energy_xi > 0) {
        double c_space = space_oscillation_constant(path, dum, w, cfg);
        CHECK(std::isfinite(c_space));
        CHECK(c_space > 0);
    }
    double c_time = time_oscillation_constant(u, w, std::max(path.energy_xi, 1e-12));
    CHECK(std::isfinite(c_time));
    double c0 = neighborhood_smallness_constant(u, path, w.h);
    CHECK(c0 >= 0);
}
