// hjlab command line: solve / char / diagnose / sharpness / mfg / scan.
// Exit codes: 0 pass, 1 check failure (an inequality violated beyond
// tolerance), 2 usage or config error.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "hjlab/config.hpp"
#include "hjlab/csv.hpp"
#include "hjlab/mfg.hpp"
#include "hjlab/report.hpp"
#include "hjlab/sharpness.hpp"

namespace fs = std::filesystem;
using namespace hjlab;

namespace {

constexpr const char* kVersion = "hjlab 0.1.0";

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
}

std::set<std::string> with_grid_keys(std::set<std::string> extra) {
    for (const auto& k : grid_config_keys()) extra.insert(k);
    return extra;
}

const std::set<std::string> kHamiltonianKeys{
    "hamiltonian.kind", "hamiltonian.p", "hamiltonian.bar_c", "hamiltonian.a",
    "hamiltonian.offset", "hamiltonian.coefficient_file"};

HamiltonianModel model_from_config(const Config& cfg, const GridSpec& g) {
    std::string kind = cfg.get_string("hamiltonian.kind", "power");
    if (kind != "power") throw ConfigError("hamiltonian.kind: only 'power' is configurable");
    double p = cfg.get_double("hamiltonian.p", 2.0);
    double bar_c = cfg.get_double("hamiltonian.bar_c", 1.0);
    double offset = cfg.get_double("hamiltonian.offset", 0.0);
    if (cfg.has("hamiltonian.coefficient_file")) {
        auto field = std::make_shared<ScalarField>(
            read_scalar_csv(cfg.get_string("hamiltonian.coefficient_file"), g));
        auto coeff = [field](double t, const Vec& x) { return field->sample(t, x); };
        return HamiltonianModel::power(g.d, p, bar_c, coeff, offset, true);
    }
    double a = cfg.get_double("hamiltonian.a", 1.0);
    return HamiltonianModel::power_const(g.d, p, bar_c, a, offset);
}

HJProblem problem_from_config(const Config& cfg) {
    GridSpec g = grid_from_config(cfg);
    HJProblem prob;
    prob.grid = g;
    prob.model = model_from_config(cfg, g);
    prob.f = cfg.has("f_file") ? read_scalar_csv(cfg.get_string("f_file"), g)
                               : ScalarField(g, 0.0);
    if (cfg.has("terminal_file")) {
        prob.terminal = read_spatial_csv(cfg.get_string("terminal_file"), g);
    } else {
        std::string preset = cfg.get_string("terminal.preset", "zero");
        double b = cfg.get_double("terminal.slope", 1.0);
        if (preset == "zero")
            prob.terminal = spatial_from_function(g, [](const Vec&) { return 0.0; });
        else if (preset == "abs")
            prob.terminal = spatial_from_function(g, [&](const Vec& x) {
                return b * std::abs(x[0]);
            });
        else if (preset == "affine")
            prob.terminal = spatial_from_function(g, [&](const Vec& x) {
                return b * x[0] + (g.d == 2 ? b * x[1] : 0.0);
            });
        else
            throw ConfigError("terminal.preset must be zero|abs|affine");
    }
    return prob;
}

const std::set<std::string> kSolveKeys = [] {
    std::set<std::string> k = kHamiltonianKeys;
    k.insert({"f_file", "terminal_file", "terminal.preset", "terminal.slope",
              "solver.interpolate", "solver.seed"});
    return k;
}();

json solve_report_json(const SolveReport& rep) {
    return json{{"levels", rep.levels},
                {"search_radius_used", rep.search_radius_used},
                {"max_cell_update", rep.max_cell_update},
                {"f_lower_bound", rep.f_lower_bound}};
}

int cmd_solve(const std::string& config_path, const std::string& out,
              const std::vector<std::string>& overrides) {
    Config cfg = Config::parse_file(config_path);
    for (const auto& o : overrides) cfg.apply_override(o);
    cfg.require_known(with_grid_keys(kSolveKeys));
    HJProblem prob = problem_from_config(cfg);
    SolveOptions opts;
    opts.interpolate = cfg.get_int("solver.interpolate", 0) != 0;
    auto [u, rep] = solve_backward(prob, opts);
    write_scalar_csv(u, out);
    json j = solve_report_json(rep);
    j["out"] = out;
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_char(const std::string& config_path, const std::string& start,
             const std::string& out, const std::vector<std::string>& overrides) {
    Config cfg = Config::parse_file(config_path);
    for (const auto& o : overrides) cfg.apply_override(o);
    cfg.require_known(with_grid_keys(kSolveKeys));
    HJProblem prob = problem_from_config(cfg);
    auto [u, rep] = solve_backward(prob, SolveOptions{});
    auto parts = parse_list(start);
    if (parts.size() != static_cast<size_t>(prob.grid.d + 1))
        throw ConfigError("--start must be t,x1[,x2]");
    Vec x{parts[1], parts.size() > 2 ? parts[2] : 0.0};
    CharacteristicPath path = extract_characteristic(u, prob, parts[0], x);

    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot open " + out);
    os << (prob.grid.d == 1 ? "k,t,x1,speed_q,cum_energy\n" : "k,t,x1,x2,speed_q,cum_energy\n");
    for (size_t j = 0; j < path.times.size(); ++j) {
        double sq = j < path.velocities.size()
                        ? std::pow(vec_norm(path.velocities[j], path.d), path.q)
                        : 0.0;
        os << j << ',' << detail::fmt_double(path.times[j]) << ','
           << detail::fmt_double(path.points[j][0]);
        if (prob.grid.d == 2) os << ',' << detail::fmt_double(path.points[j][1]);
        os << ',' << detail::fmt_double(sq) << ',' << detail::fmt_double(path.cum_energy[j])
           << "\n";
    }
    std::cout << "char: " << path.times.size() << " nodes, xi="
              << detail::fmt_double(path.energy_xi)
              << ", exit=" << exit_reason_name(path.exit_reason) << "; path: " << out << "\n";
    return 0;
}

IntrinsicScaleConfig lab_config(const Config& cfg, double p_default = 2.0) {
    IntrinsicScaleConfig c;
    c.lambda0 = cfg.get_double("lab.lambda0", 1.0);
    c.kappa = cfg.get_double("lab.kappa", 1.0);
    c.c1 = cfg.get_double("lab.c1", 2.0);
    c.c2 = cfg.get_double("lab.c2", 10.0);
    c.eta = cfg.get_double("lab.eta", 0.5);
    c.r1 = cfg.get_double("lab.r1", 2.0);
    c.p = cfg.get_double("hamiltonian.p", p_default);
    c.validate();
    c.ensure_sigma_admissible();
    return c;
}

const std::set<std::string> kLabKeys{"lab.lambda0", "lab.kappa", "lab.c1", "lab.c2",
                                     "lab.eta",     "lab.r1",    "lab.c_bar", "lab.h_max",
                                     "lab.cap"};

int cmd_diagnose(const std::string& config_path, const std::string& check,
                 const std::string& out, const std::vector<std::string>& overrides) {
    Config cfg = Config::parse_file(config_path);
    for (const auto& o : overrides) cfg.apply_override(o);
    std::set<std::string> keys = kSolveKeys;
    keys.insert(kLabKeys.begin(), kLabKeys.end());
    keys.insert({"window.t", "window.x1", "window.x2", "window.h", "window.lambda",
                 "point.t", "point.x1", "point.x2", "goodlambda.lambdas", "blowup.rhos",
                 "blowup.theta", "scan.resolutions", "scan.epsilons", "u_file"});
    cfg.require_known(with_grid_keys(keys));

    GridSpec g = grid_from_config(cfg);
    json params;
    for (const auto& [k, v] : cfg.values()) params[k] = v;
    std::vector<WindowReportRow> rows;
    bool all_pass = true;
    int d = g.d;

    auto load_u = [&](const HJProblem& prob) -> ScalarField {
        if (cfg.has("u_file")) return read_scalar_csv(cfg.get_string("u_file"), g);
        auto [u, rep] = solve_backward(prob, SolveOptions{});
        return u;
    };

    if (check == "maximal") {
        HJProblem prob = problem_from_config(cfg);
        if (g.d != 1) throw ConfigError("maximal check is 1D");
        std::vector<double> prof(g.nx);
        for (int i = 0; i < g.nx; ++i) prof[i] = std::abs(prob.f.at(0, i));
        auto mg = maximal_function_1d(prof, g.dx(0));
        double l1 = 0;
        for (double v : prof) l1 += v * g.dx(0);
        for (double alpha : {0.25, 0.5, 1.0, 2.0}) {
            WindowReportRow r;
            r.lambda = alpha;
            r.lhs = superlevel_measure(mg, g.dx(0), alpha);
            r.rhs = 5.0 * l1 / alpha;
            r.min_constant = r.rhs > 0 ? r.lhs * alpha / std::max(l1, 1e-300) : 0.0;
            r.pass = r.lhs <= r.rhs + 1e-12;
            all_pass = all_pass && r.pass;
            rows.push_back(r);
        }
    } else if (check == "goodtime" || check == "revholder" || check == "stopradius" ||
               check == "goodlambda" || check == "dtcube") {
        HJProblem prob = problem_from_config(cfg);
        ScalarField u = load_u(prob);
        IntrinsicScaleConfig lab = lab_config(cfg);
        if (check == "goodlambda") {
            ScalarField dens = energy_density_field(u, prob.f, lab.p, lab.r1);
            std::vector<double> lambdas = parse_list(cfg.get_string("goodlambda.lambdas"));
            GoodLambdaReport rep = good_lambda_check(dens, prob.f, lambdas, lab);
            for (const auto& st : rep.stats) {
                WindowReportRow r;
                r.lambda = st.lambda;
                r.lhs = st.integral_gp;
                r.rhs = rep.min_constant * st.integral_data;
                r.min_constant = rep.min_constant;
                r.pass = st.integral_gp <= rep.min_constant * st.integral_data + 1e-12;
                all_pass = all_pass && r.pass;
                rows.push_back(r);
            }
        } else if (check == "dtcube") {
            CubeWindow w(cfg.get_double("window.t"),
                         Vec{cfg.get_double("window.x1"), cfg.get_double("window.x2", 0.0)},
                         0.5 * cfg.get_double("window.h"), 0.5 * cfg.get_double("window.h"));
            CubeBoundReport rep = time_derivative_cube_bound(
                u, prob.f, w, cfg.get_double("lab.c_bar", 2.0), lab.r1, lab.p);
            WindowReportRow r;
            r.center_t = w.t_center;
            r.center_x = w.x_center;
            r.h = cfg.get_double("window.h");
            r.lhs = rep.lhs;
            r.rhs = rep.rhs;
            r.min_constant = rep.min_c;
            r.pass = std::isfinite(rep.min_c);
            all_pass = r.pass;
            rows.push_back(r);
        } else {
            double h = cfg.get_double("window.h", 0.1);
            double lambda = cfg.get_double("window.lambda", lab.lambda0);
            double t0 = cfg.get_double("window.t", 0.5 * (g.t_lo + g.t_hi));
            Vec x0{cfg.get_double("window.x1", 0.0), cfg.get_double("window.x2", 0.0)};
            if (check == "stopradius") {
                ScalarField dens = energy_density_field(u, prob.f, lab.p, lab.r1);
                ScalarField dens_p = dens;
                for (double& v : dens_p.values()) v = std::pow(v, lab.p);
                auto sr = stopping_radius(dens_p, cfg.get_double("point.t"),
                                          Vec{cfg.get_double("point.x1"),
                                              cfg.get_double("point.x2", 0.0)},
                                          lambda, lab, cfg.get_double("lab.h_max", 0.1));
                WindowReportRow r;
                r.center_t = cfg.get_double("point.t");
                r.center_x = Vec{cfg.get_double("point.x1"), cfg.get_double("point.x2", 0.0)};
                r.lambda = lambda;
                if (sr) {
                    r.h = sr->h;
                    r.lhs = sr->dilated_average;
                    r.rhs = std::pow(lambda, lab.p);
                    r.pass = sr->dilation_certified;
                } else {
                    r.pass = false;
                }
                all_pass = all_pass && r.pass;
                rows.push_back(r);
            } else {
                WindowTriple tri = make_window_triple(g, lab, t0, x0, h, lambda);
                if (check == "goodtime") {
                    auto [ut, du] = finite_diff(u);
                    ScalarField dup = du.magnitude();
                    for (double& v : dup.values()) v = std::pow(v, lab.p);
                    GoodTimeReport rep =
                        select_good_time(dup, prob.f, tri, lab, cfg.get_double("lab.cap", 10.0));
                    WindowReportRow r;
                    r.center_t = t0;
                    r.center_x = x0;
                    r.h = h;
                    r.lambda = lambda;
                    r.lhs = rep.t;
                    r.rhs = cfg.get_double("lab.cap", 10.0);
                    r.min_constant = rep.best_c;
                    r.pass = rep.found;
                    all_pass = all_pass && r.pass;
                    rows.push_back(r);
                } else {  // revholder
                    ReverseHolderReport rep = reverse_holder_check(u, prob.f, tri, lab);
                    WindowReportRow r;
                    r.center_t = t0;
                    r.center_x = x0;
                    r.h = h;
                    r.lambda = lambda;
                    r.lhs = rep.lhs;
                    r.rhs = rep.rhs_mean_term + rep.rhs_data_term;
                    r.min_constant = rep.min_c_hat;
                    r.pass = !rep.hypothesis_met || std::isfinite(rep.min_c_hat);
                    params["hypothesis_met"] = rep.hypothesis_met;
                    all_pass = all_pass && r.pass;
                    rows.push_back(r);
                }
            }
        }
    } else if (check == "sobolev") {
        auto resolutions = parse_list(cfg.get_string("scan.resolutions"));
        auto epsilons = parse_list(cfg.get_string("scan.epsilons"));
        std::vector<ScalarField> fields;
        for (double res : resolutions) {
            Config scaled = cfg;
            scaled.apply_override("grid.nx=" + std::to_string(static_cast<int>(res)));
            scaled.apply_override("grid.nt=" + std::to_string(static_cast<int>(res)));
            HJProblem prob = problem_from_config(scaled);
            auto [u, rep] = solve_backward(prob, SolveOptions{});
            fields.push_back(std::move(u));
        }
        IntrinsicScaleConfig lab = lab_config(cfg);
        CubeWindow region = domain_window(g);
        ExponentScanReport rep = sobolev_exponent_scan(fields, epsilons, region, lab.p);
        params["critical_epsilon"] = rep.critical_epsilon;
        for (size_t e = 0; e < epsilons.size(); ++e) {
            WindowReportRow r;
            r.lambda = epsilons[e];
            r.lhs = rep.dt_norms.back()[e];
            r.rhs = rep.du_norms.back()[e];
            r.min_constant = rep.critical_epsilon;
            r.pass = rep.verdicts[e] != ScanVerdict::Inconclusive;
            all_pass = all_pass && r.pass;
            rows.push_back(r);
        }
    } else if (check == "blowup") {
        HJProblem prob = problem_from_config(cfg);
        ScalarField u = load_u(prob);
        auto rhos = parse_list(cfg.get_string("blowup.rhos", "0.125,0.0625,0.03125"));
        BlowupReport rep = blowup_differentiability_check(
            u, cfg.get_double("point.t"), Vec{cfg.get_double("point.x1"),
                                              cfg.get_double("point.x2", 0.0)},
            rhos, cfg.get_double("blowup.theta", 0.5));
        for (const auto& stg : rep.stages) {
            WindowReportRow r;
            r.h = stg.rho;
            r.lhs = stg.fit_error;
            r.rhs = stg.seminorm;
            r.pass = rep.differentiable_like;
            rows.push_back(r);
        }
        all_pass = rep.differentiable_like;
    } else {
        throw ConfigError("unknown --check '" + check + "'");
    }

    json rep = diagnose_report(check, params, rows, d);
    auto errs = validate_report_structure(rep);
    if (!errs.empty()) throw std::runtime_error("internal: report schema violation: " + errs[0]);
    write_json_file(rep, out);
    std::cout << "diagnose " << check << ": " << (all_pass ? "pass" : "FAIL")
              << "; report: " << out << "\n";
    return all_pass ? 0 : 1;
}

int cmd_sharpness(double gamma, double q, double M, double Gscale, const std::string& epsilons,
                  const std::string& resolutions, const std::string& out) {
    SharpnessParams sp = make_sharpness_params(gamma, q, M, Gscale);
    json params{{"gamma", gamma},       {"q", q},
                {"m", M},               {"g_scale", Gscale},
                {"m_min", sp.m_min},    {"g_min", sp.g_min},
                {"eps_star", sp.eps_star}, {"sigma", sp.sigma}};
    std::vector<WindowReportRow> rows;
    bool all_pass = true;
    if (!epsilons.empty() && !resolutions.empty()) {
        std::vector<int> res;
        for (double v : parse_list(resolutions)) res.push_back(static_cast<int>(v));
        auto eps = parse_list(epsilons);
        SharpnessScanReport rep = divergence_scan(sp, eps, res);
        params["critical_epsilon"] = rep.critical_epsilon;
        json verdicts = scan_verdicts_json(rep.epsilons, rep.verdicts);
        params["verdicts"] = verdicts;
        for (size_t e = 0; e < eps.size(); ++e) {
            WindowReportRow r;
            r.lambda = eps[e];
            r.lhs = rep.levels.back().dt_norms[e];
            r.rhs = rep.levels.back().du_norms[e];
            r.min_constant = x0_integral_exponent(sp, eps[e]);
            // the measured verdict should not contradict the exact integral
            bool exact_diverges = x0_integral_exponent(sp, eps[e]) <= -1.0;
            ScanVerdict v = rep.verdicts[e];
            r.pass = !(exact_diverges && v == ScanVerdict::Bounded) &&
                     !(!exact_diverges && v == ScanVerdict::Diverging);
            all_pass = all_pass && r.pass;
            rows.push_back(r);
        }
    }
    json rep = diagnose_report("sharpness", params, rows, 1);
    write_json_file(rep, out);
    std::cout << "sharpness: eps_star=" << detail::fmt_double(sp.eps_star)
              << " sigma=" << detail::fmt_double(sp.sigma) << (all_pass ? " pass" : " FAIL")
              << "; report: " << out << "\n";
    return all_pass ? 0 : 1;
}

const std::set<std::string> kMfgKeys{"mfg.T",      "mfg.c",           "mfg.r_prime",
                                     "mfg.m0_file", "mfg.uT_file",    "solver.max_iters",
                                     "solver.tol",  "solver.seed",    "solver.init_noise",
                                     "cert.scale",  "hamiltonian.p",  "hamiltonian.a",
                                     "hamiltonian.bar_c"};

int cmd_mfg(const std::string& config_path, const std::string& out_dir,
            const std::vector<std::string>& overrides) {
    Config cfg = Config::parse_file(config_path);
    for (const auto& o : overrides) cfg.apply_override(o);
    cfg.require_known(with_grid_keys(kMfgKeys));
    GridSpec g = grid_from_config(cfg);
    g.t_lo = 0.0;
    g.t_hi = cfg.get_double("mfg.T", g.t_hi);
    g.boundary = Boundary::Periodic;
    g.validate();

    MFGProblem pb;
    pb.grid = g;
    pb.model = HamiltonianModel::power_const(g.d, cfg.get_double("hamiltonian.p", 2.0),
                                             cfg.get_double("hamiltonian.bar_c", 1.0),
                                             cfg.get_double("hamiltonian.a", 1.0));
    pb.coupling = coupling_primitives(cfg.get_double("mfg.c", 1.0),
                                      cfg.get_double("mfg.r_prime", 2.0));
    pb.m0 = cfg.has("mfg.m0_file")
                ? read_spatial_csv(cfg.get_string("mfg.m0_file"), g)
                : spatial_from_function(g, [](const Vec&) { return 1.0; });
    pb.u_T = cfg.has("mfg.uT_file")
                 ? read_spatial_csv(cfg.get_string("mfg.uT_file"), g)
                 : spatial_from_function(g, [](const Vec&) { return 0.0; });

    MFGOptions opts;
    opts.max_iters = static_cast<int>(cfg.get_int("solver.max_iters", 20000));
    opts.tol = cfg.get_double("solver.tol", 1e-10);
    opts.seed = static_cast<uint64_t>(cfg.get_int("solver.seed", 0));
    opts.init_noise = cfg.get_double("solver.init_noise", 0.0);

    MFGSolution sol = solve_mfg_variational(pb, opts);
    MFGCertification cert = certify_solution(sol, pb, cfg.get_double("cert.scale", 0.25 * pb.T()));

    fs::create_directories(out_dir);
    write_scalar_csv(sol.u, out_dir + "/u.csv");
    write_scalar_csv(sol.m, out_dir + "/m.csv");
    json rep{{"check", "mfg"},
             {"params", json{{"T", pb.T()},
                             {"c", pb.coupling.c},
                             {"r_prime", pb.coupling.r_prime},
                             {"iterations", sol.reports.iterations},
                             {"grad_norm", sol.reports.grad_norm},
                             {"objective_final", sol.objective_history.back()}}},
             {"windows", json::array()}};
    json row{{"center", json::array({0.0, 0.0})},
             {"h", 0.0},
             {"lambda", 0.0},
             {"lhs", cert.continuity_residual},
             {"rhs", cert.energy_gap},
             {"min_constant", cert.mass_error},
             {"pass", cert.mass_error <= 1e-8}};
    rep["windows"].push_back(row);
    rep["params"]["continuity_residual"] = cert.continuity_residual;
    rep["params"]["ae_residual"] = cert.ae_residual;
    rep["params"]["supersol_margin"] = cert.supersol_margin;
    rep["params"]["energy_gap"] = cert.energy_gap;
    rep["params"]["mass_error"] = cert.mass_error;
    write_json_file(rep, out_dir + "/report.json");
    bool pass = cert.mass_error <= 1e-8;
    std::cout << "mfg: " << (pass ? "pass" : "FAIL") << " iters=" << sol.reports.iterations
              << " mass_err=" << detail::fmt_double(cert.mass_error)
              << "; report: " << out_dir + "/report.json" << "\n";
    return pass ? 0 : 1;
}

int cmd_scan(const std::string& config_path, const std::string& out,
             const std::vector<std::string>& overrides) {
    Config cfg = Config::parse_file(config_path);
    for (const auto& o : overrides) cfg.apply_override(o);
    std::set<std::string> keys = kSolveKeys;
    keys.insert({"scan.problem", "scan.resolutions", "scan.epsilons", "sharpness.gamma",
                 "sharpness.q", "sharpness.m", "sharpness.g"});
    cfg.require_known(with_grid_keys(keys));

    std::string problem = cfg.get_string("scan.problem", "abs");
    auto eps = parse_list(cfg.get_string("scan.epsilons", "1,2,3"));
    std::vector<int> res;
    for (double v : parse_list(cfg.get_string("scan.resolutions", "32,64,128")))
        res.push_back(static_cast<int>(v));

    json params;
    for (const auto& [k, v] : cfg.values()) params[k] = v;
    std::vector<WindowReportRow> rows;

    if (problem == "sharpness") {
        SharpnessParams sp = make_sharpness_params(
            cfg.get_double("sharpness.gamma", 0.75), cfg.get_double("sharpness.q", 2.0),
            cfg.get_double("sharpness.m", 2.0), cfg.get_double("sharpness.g", 1.0));
        SharpnessScanReport rep = divergence_scan(sp, eps, res);
        params["critical_epsilon"] = rep.critical_epsilon;
        params["eps_star"] = sp.eps_star;
        for (size_t e = 0; e < eps.size(); ++e) {
            WindowReportRow r;
            r.lambda = eps[e];
            r.lhs = rep.levels.back().dt_norms[e];
            r.rhs = rep.levels.back().du_norms[e];
            r.pass = rep.verdicts[e] != ScanVerdict::Inconclusive;
            rows.push_back(r);
        }
    } else {
        std::vector<ScalarField> fields;
        for (int r : res) {
            if (problem == "abs") {
                Config scaled = cfg;
                scaled.apply_override("grid.nx=" + std::to_string(r));
                scaled.apply_override("grid.nt=" + std::to_string(r));
                scaled.apply_override("terminal.preset=abs");
                HJProblem prob = problem_from_config(scaled);
                SolveOptions so;
                so.interpolate = true;
                auto [u, rep2] = solve_backward(prob, so);
                fields.push_back(std::move(u));
            } else if (problem == "step") {
                GridSpec g = grid_from_config(cfg);
                g.nx = r;
                g.nt = r;
                g.validate();
                fields.push_back(ScalarField::from_function(
                    g, [&](double t, const Vec&) { return t > 0.5 * (g.t_lo + g.t_hi) ? 1.0 : 0.0; }));
            } else {
                throw ConfigError("scan.problem must be abs|step|sharpness");
            }
        }
        GridSpec g0 = fields.front().grid();
        CubeWindow region = domain_window(g0);
        ExponentScanReport rep = sobolev_exponent_scan(fields, eps, region,
                                                       cfg.get_double("hamiltonian.p", 2.0));
        params["critical_epsilon"] = rep.critical_epsilon;
        params["verdicts"] = scan_verdicts_json(eps, rep.verdicts);
        for (size_t e = 0; e < eps.size(); ++e) {
            WindowReportRow r;
            r.lambda = eps[e];
            r.lhs = rep.dt_norms.back()[e];
            r.rhs = rep.du_norms.back()[e];
            r.pass = rep.verdicts[e] != ScanVerdict::Inconclusive;
            rows.push_back(r);
        }
    }
    json rep = diagnose_report("scan", params, rows, 1);
    write_json_file(rep, out);
    std::cout << "scan " << problem << ": done; report: " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hjlab: a Hamilton-Jacobi regularity laboratory"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(0, 1);

    std::string config_path, out = "out.csv", out_dir = "out", check, start;
    std::vector<std::string> overrides;
    double gamma = 0.75, qexp = 2.0, Mpar = 2.0, Gpar = 1.0;
    std::string eps_list, res_list;
    long seed = -1;

    auto* solve = app.add_subcommand("solve", "solve a backward HJ problem");
    solve->add_option("--config", config_path)->required();
    solve->add_option("--out", out);
    solve->add_option("--set", overrides, "key=value override");

    auto* chr = app.add_subcommand("char", "extract a generalized characteristic");
    chr->add_option("--config", config_path)->required();
    chr->add_option("--start", start)->required();
    chr->add_option("--out", out);
    chr->add_option("--set", overrides);

    auto* diag = app.add_subcommand("diagnose", "run a regularity diagnostic");
    diag->add_option("--config", config_path)->required();
    diag->add_option("--check", check)->required();
    diag->add_option("--out", out);
    diag->add_option("--set", overrides);

    auto* shp = app.add_subcommand("sharpness", "closed-form family and divergence scan");
    shp->add_option("--gamma", gamma);
    shp->add_option("--q", qexp);
    shp->add_option("--m", Mpar);
    shp->add_option("--g-scale", Gpar);
    shp->add_option("--epsilons", eps_list);
    shp->add_option("--resolutions", res_list);
    shp->add_option("--out", out);

    auto* mfg = app.add_subcommand("mfg", "variational mean field game solve");
    mfg->add_option("--config", config_path)->required();
    mfg->add_option("--out-dir", out_dir);
    mfg->add_option("--set", overrides);
    mfg->add_option("--seed", seed, "override solver.seed");

    auto* scan = app.add_subcommand("scan", "Sobolev exponent scan over resolutions");
    scan->add_option("--config", config_path)->required();
    scan->add_option("--out", out);
    scan->add_option("--set", overrides);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (seed >= 0) overrides.push_back("solver.seed=" + std::to_string(seed));
        if (solve->parsed()) return cmd_solve(config_path, out, overrides);
        if (chr->parsed()) return cmd_char(config_path, start, out, overrides);
        if (diag->parsed()) return cmd_diagnose(config_path, check, out, overrides);
        if (shp->parsed()) return cmd_sharpness(gamma, qexp, Mpar, Gpar, eps_list, res_list, out);
        if (mfg->parsed()) return cmd_mfg(config_path, out_dir, overrides);
        if (scan->parsed()) return cmd_scan(config_path, out, overrides);
        std::cout << app.help();
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
