// Command-line front door: runs named experiments over the built-in operator
// and measure fixtures and writes CSV/JSON reports.
//
// Exit codes: 0 all verdicts pass, 1 usage error, 2 a verdict failed.
// Seed precedence: XFEROPS_SEED env > --seed flag > config file > default.
// Report files are named <experiment>_s<seed>.<ext> so that fixed-seed runs
// are byte-identical across invocations.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <xferops/xferops.hpp>

namespace fs = std::filesystem;
using namespace xferops;

namespace {

struct GlobalConfig {
    int grid_level = 12;
    std::uint64_t seed = 42;
    std::string out_dir = ".";
    std::string format = "json"; // csv reports are always written; json gated
    bool timestamp_names = false;

    std::string tag() const {
        if (!timestamp_names) return "s" + std::to_string(seed);
        return std::to_string(static_cast<long long>(::time(nullptr)));
    }

    fs::path report_path(const std::string& experiment, const std::string& ext) const {
        return fs::path(out_dir) / (experiment + "_" + tag() + "." + ext);
    }
};

TransferOp make_op(const std::string& name, DyadicGrid grid) {
    // ex2m1/ex2m2 are accepted aliases for the two doubling-family fixtures
    if (name == "haar_doubling" || name == "ex2m1") return haar_doubling(grid);
    if (name == "filter_doubling" || name == "ex2m2") return filter_doubling(grid);
    if (name == "mean_integral") return mean_integral(grid);
    if (name.size() > 5 && name.substr(name.size() - 5) == ".json") {
        std::ifstream in(name);
        if (!in) throw DomainError("cannot open descriptor " + name);
        json j;
        in >> j;
        return op_from_json(j, grid);
    }
    throw DomainError("unknown operator '" + name + "'");
}

CellMeasure make_measure(const std::string& name, DyadicGrid grid) {
    if (name == "lebesgue") return CellMeasure::lebesgue(grid);
    if (name == "arcsine") return CellMeasure::arcsine(grid);
    if (name == "delta0") return CellMeasure::point_mass(grid, 0.0);
    if (name == "x2")
        return CellMeasure::from_cdf(grid, [](double x) { return x * x; });
    throw DomainError("unknown measure '" + name + "'");
}

PiecewiseAffineMap make_sigma(const std::string& name) {
    if (name == "doubling") return PiecewiseAffineMap::doubling();
    if (name == "reflection") return PiecewiseAffineMap::reflection();
    if (name == "identity") return PiecewiseAffineMap::identity();
    throw DomainError("unknown endomorphism '" + name + "'");
}

void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path().empty() ? "." : p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
}

void write_json(const GlobalConfig& cfg, const std::string& experiment, const json& j) {
    if (cfg.format == "json") write_file(cfg.report_path(experiment, "json"), j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

bool run_invariant(const GlobalConfig& cfg, const std::string& op_name,
                   const std::string& measure_name, int max_iter, double tol) {
    DyadicGrid g(cfg.grid_level);
    TransferOp R = make_op(op_name, g);
    IterateResult r = invariant_measure(R, make_measure(measure_name, g), max_iter, tol);

    std::ostringstream csv;
    write_csv(csv, r.measure);
    write_file(cfg.report_path("invariant", "csv"), csv.str());

    json j{{"experiment", "invariant"},
           {"op", R.describe()},
           {"measure", measure_name},
           {"converged", r.converged},
           {"iterations", r.iterations},
           {"last_increment", r.last_increment}};
    write_json(cfg, "invariant", j);
    std::cout << "invariant: " << (r.converged ? "pass" : "FAIL") << " (iters=" << r.iterations
              << ", increment=" << r.last_increment << ")\n";
    return r.converged;
}

bool run_classify(const GlobalConfig& cfg, const std::string& op_name,
                  const std::string& measure_name, const std::string& sigma_name) {
    DyadicGrid g(cfg.grid_level);
    TransferOp R = make_op(op_name, g);
    double tol = (R.kind() == "mean_integral") ? 10.0 / static_cast<double>(g.size()) : 1e-10;
    MeasureClassReport rep = classify(R, make_measure(measure_name, g), make_sigma(sigma_name), tol);

    bool consistent = true;
    if (rep.in_L1 && !(rep.in_L && rep.in_fix && rep.in_K1 == Tristate::yes)) consistent = false;
    if (rep.in_K1 != Tristate::undetermined && !rep.in_L) consistent = false;

    json j = rep.to_json();
    j["experiment"] = "classify";
    j["op"] = R.describe();
    j["measure"] = measure_name;
    j["consistent"] = consistent;
    write_json(cfg, "classify", j);

    auto b = [](bool v) { return v ? "yes" : "no"; };
    std::cout << "classify: " << (consistent ? "pass" : "FAIL") << " L=" << b(rep.in_L)
              << " L1=" << b(rep.in_L1) << " Fix=" << b(rep.in_fix) << " K1="
              << (rep.in_K1 == Tristate::undetermined ? "undetermined"
                                                      : b(rep.in_K1 == Tristate::yes))
              << "\n";
    return consistent;
}

bool run_paths(const GlobalConfig& cfg, const std::string& op_name,
               const std::string& measure_name, std::size_t n_paths, int n_steps) {
    DyadicGrid g(cfg.grid_level);
    TransferOp R = make_op(op_name, g);
    std::optional<PiecewiseAffineMap> sigma;
    if (R.branch_system() && R.branch_system()->endo) sigma = R.branch_system()->endo;
    PathSpec spec{R, GridFunction::constant(g, 1.0), make_measure(measure_name, g), sigma, n_steps};
    spec.validate();

    CounterRng rng(cfg.seed);
    PathBatch batch = sample_paths(spec, n_paths, n_steps, rng);

    std::ostringstream csv;
    csv << "path_id,step,state,weight\n";
    std::size_t dump_paths = std::min<std::size_t>(batch.n_paths, 200);
    for (std::size_t p = 0; p < dump_paths; ++p)
        for (int k = 0; k <= batch.n_steps; ++k)
            csv << p << ',' << k << ',' << fmt17(batch.state(p, k)) << ','
                << fmt17(batch.weights[p]) << '\n';
    write_file(cfg.report_path("paths", "csv"), csv.str());

    // moment checks on a small family of monomial tuples
    bool pass = true;
    json moments = json::array();
    for (int deg = 1; deg <= 3; ++deg) {
        std::vector<GridFunction> fs;
        for (int k = 0; k <= n_steps; ++k)
            fs.push_back(GridFunction::sample_real(
                g, [deg](double x) { return std::pow(x, deg); }));
        McMoment mc = mc_moment(batch, fs);
        double exact = moment_exact(spec, std::span<const GridFunction>(fs)).real();
        double z = mc.std_error > 0.0 ? (mc.mean - exact) / mc.std_error : 0.0;
        pass = pass && std::abs(z) <= 3.0;
        moments.push_back({{"lhs_mc", mc.mean}, {"rhs_exact", exact}, {"z_score", z}});
    }
    double sol_resid = sigma ? solenoid_residual(batch, *sigma) : -1.0;
    if (sigma) pass = pass && sol_resid <= 0x1p-52;

    json j{{"experiment", "paths"}, {"op", R.describe()},          {"measure", measure_name},
           {"n_paths", n_paths},    {"n_steps", n_steps},          {"moments", moments},
           {"seed", cfg.seed},      {"solenoid_residual", sol_resid}};
    write_json(cfg, "paths", j);
    std::cout << "paths: " << (pass ? "pass" : "FAIL") << " (solenoid residual " << sol_resid
              << ")\n";
    return pass;
}

bool run_mra(const GlobalConfig& cfg, const std::string& op_name, int n_levels) {
    DyadicGrid g(cfg.grid_level);
    TransferOp R = make_op(op_name, g);
    if (!R.branch_system() || !R.branch_system()->endo) {
        std::cout << "mra: FAIL (operator has no endomorphism)\n";
        return false;
    }
    PathSpec spec{R, GridFunction::constant(g, 1.0), CellMeasure::lebesgue(g),
                  R.branch_system()->endo, n_levels};
    CounterRng rng(cfg.seed);
    std::vector<cplx> v(g.size());
    for (auto& x : v) x = cplx(rng.uniform(-1.0, 1.0), 0.0);
    GridFunction f(g, std::move(v), Scalar::real);

    Decomposition dec = decompose(spec, f, n_levels);

    double f2 = pair_moment(spec, CylinderFn(n_levels, f), CylinderFn(n_levels, f)).real();
    std::ostringstream csv;
    csv << "level,energy,cum_energy\n";
    double cum = pair_moment(spec, CylinderFn(0, dec.base), CylinderFn(0, dec.base)).real();
    csv << "0," << fmt17(cum) << ',' << fmt17(cum) << '\n';
    for (int k = 1; k <= n_levels; ++k) {
        CylinderFn d(k, dec.details[static_cast<std::size_t>(k - 1)]);
        double e = pair_moment(spec, d, d).real();
        cum += e;
        csv << k << ',' << fmt17(e) << ',' << fmt17(cum) << '\n';
    }
    write_file(cfg.report_path("mra", "csv"), csv.str());

    // orthogonality matrix
    std::vector<CylinderFn> parts;
    parts.emplace_back(0, dec.base);
    for (int k = 1; k <= n_levels; ++k)
        parts.emplace_back(k, dec.details[static_cast<std::size_t>(k - 1)]);
    std::ostringstream omat;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        for (std::size_t j = 0; j < parts.size(); ++j) {
            if (j) omat << ',';
            omat << fmt17(std::abs(pair_moment(spec, parts[i], parts[j])));
        }
        omat << '\n';
    }
    write_file(cfg.report_path("mra_ortho", "csv"), omat.str());

    bool pass = dec.ortho_residual < 1e-9 * std::max(1.0, f2) && dec.recon_residual < 1e-9;
    json j{{"experiment", "mra"},
           {"op", R.describe()},
           {"levels", n_levels},
           {"ortho_residual", dec.ortho_residual},
           {"recon_residual", dec.recon_residual},
           {"parseval_residual", dec.parseval_residual},
           {"seed", cfg.seed}};
    write_json(cfg, "mra", j);
    std::cout << "mra: " << (pass ? "pass" : "FAIL") << " (ortho " << dec.ortho_residual
              << ", recon " << dec.recon_residual << ")\n";
    return pass;
}

bool run_cascade(const GlobalConfig& cfg, int K, int lattice) {
    WaveletFilter w = WaveletFilter::haar();
    std::vector<double> ts;
    for (double t = -8.0; t <= 8.0; t += 1.0 / 32.0) ts.push_back(t);
    auto phi = cascade_fourier(w, ts, K);

    std::ostringstream csv;
    csv << "t,abs_phi_hat,abs_sinc\n";
    double worst = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double t = ts[i];
        double sinc = t == 0.0 ? 1.0 : std::abs(std::sin(M_PI * t) / (M_PI * t));
        worst = std::max(worst, std::abs(std::abs(phi[i]) - sinc));
        csv << fmt17(t) << ',' << fmt17(std::abs(phi[i])) << ',' << fmt17(sinc) << '\n';
    }
    write_file(cfg.report_path("cascade", "csv"), csv.str());

    double worst_h = 0.0;
    for (int i = 0; i < 16; ++i) {
        double x = (i + 0.5) / 16.0;
        worst_h = std::max(worst_h, std::abs(h_phi(w, x, K, lattice) - 1.0));
    }
    bool pass = worst < 1e-6 && worst_h < 1e-4;
    json j{{"experiment", "cascade"}, {"K", K},           {"lattice", lattice},
           {"max_sinc_error", worst}, {"max_hphi_error", worst_h}};
    write_json(cfg, "cascade", j);
    std::cout << "cascade: " << (pass ? "pass" : "FAIL") << " (sinc " << worst << ", h_phi "
              << worst_h << ")\n";
    return pass;
}

bool run_ergodic(const GlobalConfig& cfg, const std::string& op_name,
                 const std::string& measure_name, int N) {
    DyadicGrid g(cfg.grid_level);
    TransferOp R = make_op(op_name, g);
    CellMeasure lam = make_measure(measure_name, g);
    GridFunction W = rn_derivative(R.adjoint_measure(lam), lam);
    ErgodicReport rep = ergodic_average(W, PiecewiseAffineMap::doubling(), N, lam);

    std::ostringstream csv;
    csv << "N,norm_AN,norm_product_term\n";
    for (int k = 1; k <= N; ++k)
        csv << k << ',' << fmt17(rep.norms[static_cast<std::size_t>(k - 1)]) << ','
            << fmt17(rep.product_term_norm[static_cast<std::size_t>(k - 1)]) << '\n';
    write_file(cfg.report_path("ergodic", "csv"), csv.str());

    bool pass = true;
    for (double n : rep.norms) pass = pass && n <= 1.0 + 1e-9;
    json j{{"experiment", "ergodic"},
           {"op", R.describe()},
           {"measure", measure_name},
           {"N", N},
           {"final_norm", rep.norms.back()}};
    write_json(cfg, "ergodic", j);
    std::cout << "ergodic: " << (pass ? "pass" : "FAIL") << " (final norm " << rep.norms.back()
              << ")\n";
    return pass;
}

bool run_ifs(const GlobalConfig& cfg, double u, std::size_t n_samples) {
    DyadicGrid g(cfg.grid_level);
    double M = static_cast<double>(g.size());
    AffineIFS ifs = AffineIFS::two_maps(u);
    EquilibriumResult eq = equilibrium_measure(ifs, g);
    CounterRng rng(cfg.seed);
    auto samples = chaos_game(ifs, n_samples, 100, rng);
    CellMeasure hist = histogram(samples, g);

    std::ostringstream csv;
    write_csv(csv, hist);
    write_file(cfg.report_path("ifs", "csv"), csv.str());

    auto oracle = equilibrium_moments_oracle(u, 4);
    json moments;
    bool pass = eq.converged;
    for (int k = 1; k <= 4; ++k) {
        GridFunction xk = GridFunction::sample_real(
            g, [k](double x) { return std::pow(x, k); });
        double got = integrate_real(xk, eq.measure);
        moments[std::to_string(k)] = got;
        double tol = (2.0 + 3.0 * (k - 1)) / M;
        pass = pass && std::abs(got - oracle[static_cast<std::size_t>(k)]) < tol;
    }
    auto stab = stability_check(ifs, PiecewiseAffineMap::two_branch_expander(u), g);
    pass = pass && stab.pass;

    json j{{"experiment", "ifs"},
           {"u", u},
           {"n_samples", n_samples},
           {"moments", moments},
           {"stability_residual", stab.max_residual},
           {"seed", cfg.seed},
           {"tv_hist_vs_equilibrium", total_variation(hist, eq.measure)}};
    write_json(cfg, "ifs", j);
    std::cout << "ifs: " << (pass ? "pass" : "FAIL") << " (u=" << u
              << ", stability residual " << stab.max_residual << ")\n";
    return pass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"transfer-operator experiments on the dyadic interval"};
    app.set_config("--config");
    app.fallthrough(); // global flags may follow the subcommand

    GlobalConfig cfg;
    app.add_option("--grid-level", cfg.grid_level, "dyadic grid level m, cells = 2^m")
        ->check(CLI::Range(4, 20))
        ->capture_default_str();
    app.add_option("--seed", cfg.seed, "rng seed (XFEROPS_SEED env overrides)")
        ->capture_default_str();
    app.add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
    app.add_option("--format", cfg.format, "json|csv (csv reports are always written)")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    app.add_flag("--timestamp-names", cfg.timestamp_names,
                 "use wall-clock tags in report names instead of the seed");

    std::string op_name = "ex2m1";
    std::string measure_name = "lebesgue";
    std::string sigma_name = "doubling";
    int max_iter = 200;
    double tol = 1e-10;
    std::size_t n_paths = 20000;
    int n_steps = 4;
    int n_levels = 3;
    int K = 30, lattice = 4096;
    int ergodic_N = 200;
    double u = 0.25;
    std::size_t n_samples = 200000;

    // experiment options live on the app so every subcommand (and `all`)
    // accepts them through fallthrough
    const std::string grp = "Experiment options";
    app.add_option("--op", op_name, "operator fixture or descriptor.json")->group(grp);
    app.add_option("--measure", measure_name, "lebesgue|arcsine|delta0|x2")->group(grp);
    app.add_option("--sigma", sigma_name, "doubling|reflection|identity")->group(grp);
    app.add_option("--max-iter", max_iter)->group(grp);
    app.add_option("--tol", tol)->group(grp);
    app.add_option("--n-paths", n_paths)->group(grp);
    app.add_option("--n-steps", n_steps)->group(grp);
    app.add_option("--n", n_levels, "decomposition depth")->group(grp);
    app.add_option("--K", K, "cascade truncation depth")->group(grp);
    app.add_option("--lattice", lattice, "lattice half-width for the unit-mass sum")->group(grp);
    app.add_option("--N", ergodic_N, "Cesaro horizon")->group(grp);
    app.add_option("--u", u, "contraction parameter of the two-map family")->group(grp);
    app.add_option("--n-samples", n_samples)->group(grp);

    auto* c_inv = app.add_subcommand("invariant", "iterate lambda <- lambda R to a fixed point");
    auto* c_cls = app.add_subcommand("classify", "membership in the four measure sets");
    auto* c_pth = app.add_subcommand("paths", "sample the path-space chain and check moments");
    auto* c_mra = app.add_subcommand("mra", "orthogonal multiresolution decomposition");
    auto* c_cas = app.add_subcommand("cascade", "scaling-function product and lattice mass");
    auto* c_erg = app.add_subcommand("ergodic", "Cesaro averages of the weight cocycle");
    auto* c_ifs = app.add_subcommand("ifs", "equilibrium measure and chaos game");
    auto* c_all = app.add_subcommand("all", "run every experiment with its defaults");

    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1; // usage errors exit 1, --help exits 0
    }
    cfg.seed = resolve_seed(cfg.seed);

    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 1;
    }

    try {
        bool ok = true;
        if (c_inv->parsed()) ok = run_invariant(cfg, op_name, measure_name, max_iter, tol);
        if (c_cls->parsed()) ok = run_classify(cfg, op_name, measure_name, sigma_name);
        if (c_pth->parsed()) ok = run_paths(cfg, op_name, measure_name, n_paths, n_steps);
        if (c_mra->parsed()) ok = run_mra(cfg, op_name, n_levels);
        if (c_cas->parsed()) ok = run_cascade(cfg, K, lattice);
        if (c_erg->parsed()) ok = run_ergodic(cfg, op_name, measure_name, ergodic_N);
        if (c_ifs->parsed()) ok = run_ifs(cfg, u, n_samples);
        if (c_all->parsed()) {
            ok = run_classify(cfg, "ex2m1", "lebesgue", "doubling");
            ok = run_classify(cfg, "ex2m2", "lebesgue", "doubling") && ok;
            ok = run_invariant(cfg, "mean_integral", "lebesgue", max_iter, 1e-12) && ok;
            ok = run_paths(cfg, "ex2m1", "lebesgue", n_paths, n_steps) && ok;
            ok = run_mra(cfg, "ex2m2", n_levels) && ok;
            ok = run_cascade(cfg, K, lattice) && ok;
            ok = run_ergodic(cfg, "ex2m2", "lebesgue", ergodic_N) && ok;
            ok = run_ifs(cfg, u, n_samples) && ok;
        }
        return ok ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
