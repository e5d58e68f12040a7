// canopy command-line interface.
//
// Subcommands: equilibrium, simulate, counterfactual, fit-beliefs, fit-gbm,
// fit-gamma, instrument, demo. Global options: --config (JSON; flags given on
// the command line override config values), --seed, --threads, --output-dir
// (also overridable through the CANOPY_OUTPUT_DIR environment variable),
// --verbose.
//
// Exit codes: 0 success, 2 input/validation error, 3 non-convergence.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <canopy/canopy.hpp>

namespace fs = std::filesystem;
using canopy::json;

namespace {

struct GlobalConfig {
    std::uint64_t seed = 42;
    int threads = 1;
    std::string output_dir = ".";
    bool verbose = false;
    json config;  // parsed --config payload, possibly empty
};

// Pull a value for `key` from the subcommand's config block unless the flag
// was given explicitly on the command line.
template <typename T>
void config_override(const json& block, const std::string& key, const CLI::Option* opt, T& value,
                     const std::string& ctx) {
    if (opt != nullptr && opt->count() > 0) return;  // explicit flag wins
    if (!block.is_object() || !block.contains(key)) return;
    try {
        value = block.at(key).get<T>();
    } catch (const json::exception&) {
        throw canopy::validation_error(ctx + "." + key, "wrong type in config");
    }
}

json config_block(const GlobalConfig& g, const std::string& sub) {
    if (g.config.is_object() && g.config.contains(sub)) return g.config.at(sub);
    return json(nullptr);
}

fs::path out_path(const GlobalConfig& g, const std::string& name) {
    fs::path dir(g.output_dir);
    if (!dir.empty() && !fs::exists(dir)) fs::create_directories(dir);
    return dir / name;
}

void require_file(const std::string& path, const std::string& flag) {
    if (!fs::exists(path))
        throw canopy::validation_error(flag, "file does not exist: " + path);
}

canopy::Panel load_panel(const std::string& path) {
    canopy::CsvTable t = canopy::read_csv(path);
    int cu = t.col("unit_id"), cy = t.col("year"), cx = t.col("tree_area_km2"),
        ca = t.col("atr_share");
    canopy::Panel p;
    p.rows.reserve(t.rows.size());
    for (size_t r = 0; r < t.rows.size(); ++r) {
        canopy::PanelRow row;
        row.unit_id = t.rows[r][cu];
        row.year = canopy::csv_int(t, r, cy);
        row.tree_area_km2 = canopy::csv_double(t, r, cx);
        row.atr_share = canopy::csv_double(t, r, ca);
        p.rows.push_back(std::move(row));
    }
    p.validate();
    return p;
}

void emit_solution_csv(const canopy::EquilibriumSolution& sol, const fs::path& path) {
    canopy::CsvWriter w(path.string());
    w.row({"a", "q_rate", "threshold"});
    for (size_t i = 0; i < sol.grid.size(); ++i)
        w.row({canopy::csv_num(sol.grid[i]), canopy::csv_num(sol.q_rate[i]),
               canopy::csv_num(sol.threshold)});
}

void emit_trajectory_csv(const canopy::Trajectory& tr, const fs::path& path) {
    canopy::CsvWriter w(path.string());
    w.row({"t", "x"});
    for (size_t i = 0; i < tr.times.size(); ++i)
        w.row({canopy::csv_num(tr.times[i]), canopy::csv_num(tr.values[i])});
}

void emit_density_csv(const std::vector<double>& xs, const std::vector<double>& ds,
                      const fs::path& path) {
    canopy::CsvWriter w(path.string());
    w.row({"x", "density"});
    for (size_t i = 0; i < xs.size(); ++i)
        w.row({canopy::csv_num(xs[i]), canopy::csv_num(ds[i])});
}

const char* verdict_name(const canopy::SustainabilityVerdict& v) {
    switch (v.kind) {
        case canopy::Sustainability::SustainableForAll: return "SustainableForAll";
        case canopy::Sustainability::UnsustainableForAll: return "UnsustainableForAll";
        default: return "SwitchesAt";
    }
}

// ---------------------------------------------------------------------------
// Bundled synthetic data (all generated in-process, deterministically)
// ---------------------------------------------------------------------------

canopy::ModelParams demo_params() {
    canopy::ModelParams p;
    p.mu = 0.0482;
    p.sigma = 0.258;
    p.rho = 0.0487;
    p.gamma = 2.272;
    p.g1_form = canopy::G1Form::Unit;
    p.g2_form = canopy::G2Form::PowA;
    p.g2_k2 = 1.0;
    return p;
}

canopy::BeliefPrior demo_prior() { return {0.553, 2.251}; }

// Synthetic adherence-share sample from the demo prior.
std::vector<double> synth_shares(int n, std::uint64_t seed) {
    canopy::Rng rng(canopy::derive_seed(seed, "shares"));
    canopy::BeliefPrior pr = demo_prior();
    std::vector<double> v(n);
    for (auto& x : v) x = rng.beta(pr.alpha, pr.beta);
    return v;
}

// Untouched-cover panel: pure GBM at (mu, sigma), no clearing. This is the
// series the drift/volatility fit is specified for.
canopy::Panel synth_gbm_panel(int n_units, int years, std::uint64_t seed) {
    canopy::ModelParams p = demo_params();
    canopy::Rng draw(canopy::derive_seed(seed, "gbm-units"));
    canopy::Panel panel;
    for (int u = 0; u < n_units; ++u) {
        double x0 = 20.0 + 180.0 * draw.uniform();
        canopy::Rng path(canopy::derive_seed(seed, "gbm-path", static_cast<std::uint64_t>(u)));
        double x = x0;
        char name[32];
        std::snprintf(name, sizeof(name), "u%04d", u);
        for (int t = 0; t < years; ++t) {
            panel.rows.push_back({name, 2000 + t, x, 0.0});
            x *= std::exp((p.mu - 0.5 * p.sigma * p.sigma) + p.sigma * path.normal());
        }
    }
    return panel;
}

// Cleared-cover panel at the equilibrium rates. Annual relative changes are
// drawn from the arithmetic model E[dX/X] = mu - q(a), matching the moment
// condition the curvature fit estimates; draws that would wipe out more than
// 98 percent of a unit's cover in one year are redrawn to keep levels positive.
canopy::Panel synth_model_panel(int n_units, int years, std::uint64_t seed,
                                const canopy::BeliefPrior& pr) {
    canopy::ModelParams p = demo_params();
    canopy::EquilibriumSolution sol = canopy::q_mfe_stationary(p, pr);
    canopy::Rng draw(canopy::derive_seed(seed, "panel-units"));
    canopy::Panel panel;
    for (int u = 0; u < n_units; ++u) {
        double a = draw.beta(pr.alpha, pr.beta);
        double x0 = 20.0 + 180.0 * draw.uniform();
        double rate = canopy::mfe_rate(a, p, sol.coupling_aggregate);
        canopy::Rng path(canopy::derive_seed(seed, "panel-path", static_cast<std::uint64_t>(u)));
        double x = x0;
        char name[32];
        std::snprintf(name, sizeof(name), "u%04d", u);
        for (int t = 0; t < years; ++t) {
            panel.rows.push_back({name, 2000 + t, x, a});
            double growth;
            do {
                growth = 1.0 + (p.mu - rate) + p.sigma * path.normal();
            } while (growth < 0.02);
            x *= growth;
        }
    }
    return panel;
}

void write_panel_csv(const canopy::Panel& p, const fs::path& path) {
    canopy::CsvWriter w(path.string());
    w.row({"unit_id", "year", "tree_area_km2", "atr_share"});
    for (const auto& r : p.rows)
        w.row({r.unit_id, std::to_string(r.year), canopy::csv_num(r.tree_area_km2),
               canopy::csv_num(r.atr_share)});
}

void write_shares_csv(const std::vector<double>& shares, const fs::path& path) {
    canopy::CsvWriter w(path.string());
    w.row({"unit_id", "atr_share"});
    for (size_t i = 0; i < shares.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "u%04zu", i);
        w.row({name, canopy::csv_num(shares[i])});
    }
}

}  // namespace

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
    CLI::App app{"canopy: deforestation under belief-driven preferences"};
    app.require_subcommand(1);

    GlobalConfig g;
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values");
    auto* opt_seed = app.add_option("--seed", g.seed, "root seed (default 42)");
    auto* opt_threads = app.add_option("--threads", g.threads, "bound on inner parallelism");
    auto* opt_outdir = app.add_option("--output-dir", g.output_dir, "directory for outputs");
    app.add_flag("--verbose", g.verbose, "chatty progress output");

    // --- equilibrium ---
    auto* eq = app.add_subcommand("equilibrium", "stationary mean-field equilibrium");
    std::string eq_params, eq_prior;
    int eq_grid = 101;
    double eq_T = 0.0;
    auto* eq_o1 = eq->add_option("--params", eq_params, "model parameter JSON");
    auto* eq_o2 = eq->add_option("--prior", eq_prior, "belief prior JSON");
    auto* eq_o3 = eq->add_option("--grid-points", eq_grid, "adherence grid size");
    auto* eq_o4 = eq->add_option("--horizon", eq_T, "solve the finite-horizon problem instead");

    // --- simulate ---
    auto* sim = app.add_subcommand("simulate", "simulate cover paths");
    std::string sim_params;
    double sim_x0 = 100.0, sim_rate = 0.0, sim_h = 50.0, sim_dt = 1.0, sim_cap = 0.0;
    double sim_dens_t = 0.0;
    int sim_n = 1;
    std::string sim_scheme = "exact";
    auto* sim_o1 = sim->add_option("--params", sim_params, "model parameter JSON");
    auto* sim_o2 = sim->add_option("--x0", sim_x0, "initial cover");
    auto* sim_o3 = sim->add_option("--rate", sim_rate, "clearing rate");
    auto* sim_o4 = sim->add_option("--horizon", sim_h, "years simulated");
    auto* sim_o5 = sim->add_option("--dt", sim_dt, "time step");
    auto* sim_o6 = sim->add_option("--cap", sim_cap, "reflecting cover cap (0 = none)");
    auto* sim_o7 = sim->add_option("--paths", sim_n, "number of paths");
    auto* sim_o8 = sim->add_option("--scheme", sim_scheme, "exact | euler");
    auto* sim_o9 =
        sim->add_option("--density-at", sim_dens_t, "also emit the transition density at time t");

    // --- counterfactual ---
    auto* cf = app.add_subcommand("counterfactual", "remove belief-driven restraint");
    std::string cf_params, cf_prior, cf_panel;
    int cf_t0 = 2000, cf_t1 = 2010;
    auto* cf_o1 = cf->add_option("--params", cf_params, "model parameter JSON");
    auto* cf_o2 = cf->add_option("--prior", cf_prior, "belief prior JSON");
    auto* cf_o3 = cf->add_option("--panel", cf_panel, "panel CSV");
    auto* cf_o4 = cf->add_option("--t0", cf_t0, "base year");
    auto* cf_o5 = cf->add_option("--t1", cf_t1, "comparison year");

    // --- fit-beliefs ---
    auto* fb = app.add_subcommand("fit-beliefs", "Beta MLE for adherence shares");
    std::string fb_input;
    auto* fb_o1 = fb->add_option("--input", fb_input, "CSV with an atr_share column");

    // --- fit-gbm ---
    auto* fg = app.add_subcommand("fit-gbm", "drift/volatility of cover growth");
    std::string fg_input;
    int fg_reps = 3000;
    auto* fg_o1 = fg->add_option("--input", fg_input, "panel CSV");
    auto* fg_o2 = fg->add_option("--bootstrap-reps", fg_reps, "cluster bootstrap replications");

    // --- fit-gamma ---
    auto* fc = app.add_subcommand("fit-gamma", "GMM for the curvature parameter");
    std::string fc_input, fc_prior;
    double fc_mu = 0.0, fc_sigma = 0.0, fc_rho = 0.0, fc_k = 1.0;
    std::string fc_moments = "mean";
    auto* fc_o1 = fc->add_option("--input", fc_input, "panel CSV");
    auto* fc_o2 = fc->add_option("--prior", fc_prior, "belief prior JSON");
    auto* fc_o3 = fc->add_option("--mu", fc_mu, "drift (from fit-gbm)");
    auto* fc_o4 = fc->add_option("--sigma", fc_sigma, "volatility (from fit-gbm)");
    auto* fc_o5 = fc->add_option("--rho", fc_rho, "discount rate");
    auto* fc_o6 = fc->add_option("--k", fc_k, "cover-utility exponent k in g2(a)=a^k");
    auto* fc_o7 = fc->add_option("--moments", fc_moments, "mean | mean-variance");

    // --- instrument ---
    auto* in = app.add_subcommand("instrument", "exposure z-index from units and transmitters");
    std::string in_units, in_tx, in_density, in_variant = "full";
    double in_lambda = 0.5, in_floor = -90.0;
    double in_ref_lat = 6.5244, in_ref_lon = 3.3792;  // movement origin: Lagos
    auto* in_o1 = in->add_option("--units", in_units, "units CSV");
    auto* in_o2 = in->add_option("--transmitters", in_tx, "transmitters CSV");
    auto* in_o3 = in->add_option("--density", in_density, "adherent density CSV");
    auto* in_o4 = in->add_option("--lambda", in_lambda, "linguistic decay exponent");
    auto* in_o5 = in->add_option("--floor-dbm", in_floor, "signal floor");
    auto* in_o6 = in->add_option("--variant", in_variant, "full | no-hd | no-rp");
    auto* in_o7 = in->add_option("--ref-lat", in_ref_lat, "origin latitude");
    auto* in_o8 = in->add_option("--ref-lon", in_ref_lon, "origin longitude");

    // --- demo ---
    auto* dm = app.add_subcommand("demo", "full pipeline on bundled synthetic data");
    std::string dm_write;
    auto* dm_o1 = dm->add_option("--write-data", dm_write, "also write the synthetic CSVs here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            return app.exit(e);  // --help
        }
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (!config_path.empty()) {
            require_file(config_path, "config");
            g.config = canopy::load_json(config_path);
            if (!g.config.is_object())
                throw canopy::validation_error("config", "top level must be a JSON object");
            config_override(g.config, "seed", opt_seed, g.seed, "config");
            config_override(g.config, "threads", opt_threads, g.threads, "config");
            config_override(g.config, "output_dir", opt_outdir, g.output_dir, "config");
        }
        if (const char* env = std::getenv("CANOPY_OUTPUT_DIR"); env != nullptr && *env != '\0')
            g.output_dir = env;
        if (g.threads < 1) throw canopy::validation_error("threads", "must be >= 1");

        if (eq->parsed()) {
            json blk = config_block(g, "equilibrium");
            config_override(blk, "params", eq_o1, eq_params, "equilibrium");
            config_override(blk, "prior", eq_o2, eq_prior, "equilibrium");
            config_override(blk, "grid_points", eq_o3, eq_grid, "equilibrium");
            config_override(blk, "horizon", eq_o4, eq_T, "equilibrium");
            if (eq_params.empty()) throw canopy::validation_error("params", "missing --params");
            if (eq_prior.empty()) throw canopy::validation_error("prior", "missing --prior");
            require_file(eq_params, "params");
            require_file(eq_prior, "prior");
            canopy::ModelParams p = canopy::params_from_json(canopy::load_json(eq_params));
            canopy::BeliefPrior pr = canopy::prior_from_json(canopy::load_json(eq_prior));
            if (eq_T > 0.0) {
                canopy::FiniteHorizonOptions opts;
                opts.grid_points = eq_grid;
                canopy::FiniteHorizonSolution sol = canopy::q_mfe_finite_horizon(p, pr, eq_T, opts);
                canopy::save_json(canopy::finite_horizon_to_json(sol),
                                  out_path(g, "finite_horizon.json").string());
                canopy::CsvWriter w(out_path(g, "median_rate_path.csv").string());
                w.row({"t", "median_rate"});
                for (size_t j = 0; j < sol.time_grid.size(); ++j)
                    w.row({canopy::csv_num(sol.time_grid[j]),
                           canopy::csv_num(sol.median_rate_path[j])});
                if (!sol.converged) {
                    std::cerr << "error: finite-horizon iteration did not converge; residual "
                              << sol.sup_norm_residual << "\n";
                    return 3;
                }
                std::cout << "finite horizon T=" << eq_T << " converged in " << sol.iterations
                          << " iterations; outputs in " << g.output_dir << "\n";
            } else {
                canopy::StationaryOptions opts;
                opts.grid_points = eq_grid;
                canopy::EquilibriumSolution sol = canopy::q_mfe_stationary(p, pr, opts);
                canopy::save_json(canopy::solution_to_json(sol),
                                  out_path(g, "equilibrium.json").string());
                emit_solution_csv(sol, out_path(g, "equilibrium.csv"));
                auto v = canopy::classify_sustainability(sol);
                std::cout << "q_tilde_star = " << canopy::csv_num(sol.q_tilde_star)
                          << ", threshold = " << canopy::csv_num(sol.threshold)
                          << ", verdict = " << verdict_name(v);
                if (v.a_star) std::cout << " (a* = " << canopy::csv_num(*v.a_star) << ")";
                std::cout << "\n";
                if (sol.negative_rate_warning)
                    std::cerr << "warning: clearing rate is negative on part of the grid\n";
            }
            return 0;
        }

        if (sim->parsed()) {
            json blk = config_block(g, "simulate");
            config_override(blk, "params", sim_o1, sim_params, "simulate");
            config_override(blk, "x0", sim_o2, sim_x0, "simulate");
            config_override(blk, "rate", sim_o3, sim_rate, "simulate");
            config_override(blk, "horizon", sim_o4, sim_h, "simulate");
            config_override(blk, "dt", sim_o5, sim_dt, "simulate");
            config_override(blk, "cap", sim_o6, sim_cap, "simulate");
            config_override(blk, "paths", sim_o7, sim_n, "simulate");
            config_override(blk, "scheme", sim_o8, sim_scheme, "simulate");
            config_override(blk, "density_at", sim_o9, sim_dens_t, "simulate");
            if (sim_params.empty()) throw canopy::validation_error("params", "missing --params");
            require_file(sim_params, "params");
            canopy::ModelParams p = canopy::params_from_json(canopy::load_json(sim_params));
            canopy::Scheme scheme;
            if (sim_scheme == "exact") {
                scheme = canopy::Scheme::Exact;
            } else if (sim_scheme == "euler") {
                scheme = canopy::Scheme::EulerMaruyama;
            } else {
                throw canopy::validation_error("scheme", "must be 'exact' or 'euler'");
            }
            if (sim_n < 1) throw canopy::validation_error("paths", "must be >= 1");
            for (int i = 0; i < sim_n; ++i) {
                std::uint64_t seed = canopy::derive_seed(g.seed, "simulate", i);
                canopy::Trajectory tr =
                    sim_cap > 0.0
                        ? canopy::simulate_reflected(sim_x0, sim_rate, p, sim_cap, sim_h, sim_dt,
                                                     seed)
                        : canopy::simulate_path(sim_x0, sim_rate, p, sim_h, sim_dt, seed, scheme);
                char name[48];
                std::snprintf(name, sizeof(name), "path_%04d.csv", i);
                emit_trajectory_csv(tr, out_path(g, name));
            }
            if (sim_dens_t > 0.0) {
                canopy::DensitySpec spec;
                spec.mu_star = p.mu - sim_rate;
                spec.sigma = p.sigma;
                spec.x0 = sim_x0;
                if (sim_cap > 0.0) spec.cap = sim_cap;
                double m = (spec.mu_star - 0.5 * p.sigma * p.sigma) * sim_dens_t;
                double sd = p.sigma * std::sqrt(sim_dens_t);
                double hi_x = sim_cap > 0.0 ? sim_cap : sim_x0 * std::exp(m + 5.0 * sd);
                double lo_x = sim_x0 * std::exp(m - 6.0 * sd);
                lo_x = std::min(lo_x, 0.5 * hi_x);
                const int nd = 800;
                std::vector<double> xs(nd), ds(nd);
                for (int i2 = 0; i2 < nd; ++i2) {
                    xs[i2] = lo_x + (hi_x - lo_x) * i2 / (nd - 1);
                    ds[i2] = sim_cap > 0.0 ? canopy::reflected_tpd(xs[i2], sim_dens_t, spec)
                                           : canopy::lognormal_tpd(xs[i2], sim_dens_t, spec);
                }
                emit_density_csv(xs, ds, out_path(g, "density.csv"));
            }
            std::cout << sim_n << " path(s) written to " << g.output_dir << "\n";
            return 0;
        }

        if (cf->parsed()) {
            json blk = config_block(g, "counterfactual");
            config_override(blk, "params", cf_o1, cf_params, "counterfactual");
            config_override(blk, "prior", cf_o2, cf_prior, "counterfactual");
            config_override(blk, "panel", cf_o3, cf_panel, "counterfactual");
            config_override(blk, "t0", cf_o4, cf_t0, "counterfactual");
            config_override(blk, "t1", cf_o5, cf_t1, "counterfactual");
            if (cf_params.empty()) throw canopy::validation_error("params", "missing --params");
            if (cf_prior.empty()) throw canopy::validation_error("prior", "missing --prior");
            if (cf_panel.empty()) throw canopy::validation_error("panel", "missing --panel");
            require_file(cf_params, "params");
            require_file(cf_prior, "prior");
            require_file(cf_panel, "panel");
            canopy::ModelParams p = canopy::params_from_json(canopy::load_json(cf_params));
            canopy::BeliefPrior pr = canopy::prior_from_json(canopy::load_json(cf_prior));
            canopy::Panel panel = load_panel(cf_panel);
            canopy::CounterfactualResult res =
                canopy::counterfactual_panel(panel, p, pr, cf_t0, cf_t1);
            canopy::save_json(canopy::counterfactual_to_json(res),
                              out_path(g, "counterfactual.json").string());
            canopy::CsvWriter w(out_path(g, "counterfactual.csv").string());
            w.row({"unit_id", "observed", "predicted", "counterfactual", "diff_km2", "diff_pct"});
            for (const auto& r : res.rows)
                w.row({r.unit_id, canopy::csv_num(r.observed), canopy::csv_num(r.predicted),
                       canopy::csv_num(r.counterfactual), canopy::csv_num(r.diff_km2),
                       canopy::csv_num(r.diff_pct)});
            for (const auto& u : res.skipped_units)
                std::cerr << "warning: unit " << u << " not observed at both years; skipped\n";
            std::cout << "mean diff " << canopy::csv_num(res.summary.mean_diff_km2) << " km2 ("
                      << canopy::csv_num(res.summary.pct_of_observed) << " pct), counterfactual "
                      << verdict_name(res.summary.verdict) << "\n";
            return 0;
        }

        if (fb->parsed()) {
            json blk = config_block(g, "fit-beliefs");
            config_override(blk, "input", fb_o1, fb_input, "fit-beliefs");
            if (fb_input.empty()) throw canopy::validation_error("input", "missing --input");
            require_file(fb_input, "input");
            canopy::CsvTable t = canopy::read_csv(fb_input);
            int c = t.col("atr_share");
            std::vector<double> shares(t.rows.size());
            for (size_t r = 0; r < t.rows.size(); ++r) shares[r] = canopy::csv_double(t, r, c);
            canopy::EstimationResult res = canopy::fit_beliefs(shares);
            canopy::save_json(canopy::estimation_to_json(res),
                              out_path(g, "fit_beliefs.json").string());
            for (const auto& wmsg : res.warnings) std::cerr << "warning: " << wmsg << "\n";
            if (!res.converged) {
                std::cerr << "error: Beta MLE did not converge\n";
                return 3;
            }
            std::cout << "alpha = " << canopy::csv_num(res.estimates.at("alpha")) << " (se "
                      << canopy::csv_num(res.std_errors.at("alpha")) << "), beta = "
                      << canopy::csv_num(res.estimates.at("beta")) << " (se "
                      << canopy::csv_num(res.std_errors.at("beta")) << "), n = " << res.n_obs
                      << "\n";
            return 0;
        }

        if (fg->parsed()) {
            json blk = config_block(g, "fit-gbm");
            config_override(blk, "input", fg_o1, fg_input, "fit-gbm");
            config_override(blk, "bootstrap_reps", fg_o2, fg_reps, "fit-gbm");
            if (fg_input.empty()) throw canopy::validation_error("input", "missing --input");
            require_file(fg_input, "input");
            canopy::Panel panel = load_panel(fg_input);
            canopy::GbmFitOptions opts;
            opts.bootstrap_reps = fg_reps;
            opts.seed = canopy::derive_seed(g.seed, "fit-gbm");
            opts.threads = g.threads;
            canopy::EstimationResult res = canopy::fit_gbm(panel, opts);
            canopy::save_json(canopy::estimation_to_json(res),
                              out_path(g, "fit_gbm.json").string());
            for (const auto& wmsg : res.warnings) std::cerr << "warning: " << wmsg << "\n";
            std::cout << "mu = " << canopy::csv_num(res.estimates.at("mu")) << " (se "
                      << canopy::csv_num(res.std_errors.at("mu")) << "), sigma = "
                      << canopy::csv_num(res.estimates.at("sigma")) << " (se "
                      << canopy::csv_num(res.std_errors.at("sigma")) << "), n = " << res.n_obs
                      << "\n";
            return 0;
        }

        if (fc->parsed()) {
            json blk = config_block(g, "fit-gamma");
            config_override(blk, "input", fc_o1, fc_input, "fit-gamma");
            config_override(blk, "prior", fc_o2, fc_prior, "fit-gamma");
            config_override(blk, "mu", fc_o3, fc_mu, "fit-gamma");
            config_override(blk, "sigma", fc_o4, fc_sigma, "fit-gamma");
            config_override(blk, "rho", fc_o5, fc_rho, "fit-gamma");
            config_override(blk, "k", fc_o6, fc_k, "fit-gamma");
            config_override(blk, "moments", fc_o7, fc_moments, "fit-gamma");
            if (fc_input.empty()) throw canopy::validation_error("input", "missing --input");
            if (fc_prior.empty()) throw canopy::validation_error("prior", "missing --prior");
            require_file(fc_input, "input");
            require_file(fc_prior, "prior");
            canopy::GmmMoments mom;
            if (fc_moments == "mean") {
                mom = canopy::GmmMoments::MeanOnly;
            } else if (fc_moments == "mean-variance") {
                mom = canopy::GmmMoments::MeanAndVariance;
            } else {
                throw canopy::validation_error("moments", "must be 'mean' or 'mean-variance'");
            }
            canopy::Panel panel = load_panel(fc_input);
            canopy::BeliefPrior pr = canopy::prior_from_json(canopy::load_json(fc_prior));
            canopy::GammaFitOptions opts;
            opts.seed = canopy::derive_seed(g.seed, "fit-gamma");
            canopy::EstimationResult res =
                canopy::fit_gamma(panel, fc_mu, fc_sigma, fc_rho, pr, fc_k, mom, opts);
            canopy::save_json(canopy::estimation_to_json(res),
                              out_path(g, "fit_gamma.json").string());
            for (const auto& wmsg : res.warnings) std::cerr << "warning: " << wmsg << "\n";
            if (!res.converged) {
                std::cerr << "error: GMM did not converge; criterion profile written\n";
                return 3;
            }
            std::cout << "gamma = " << canopy::csv_num(res.estimates.at("gamma")) << " (se "
                      << canopy::csv_num(res.std_errors.at("gamma")) << "), n = " << res.n_obs
                      << "\n";
            return 0;
        }

        if (in->parsed()) {
            json blk = config_block(g, "instrument");
            config_override(blk, "units", in_o1, in_units, "instrument");
            config_override(blk, "transmitters", in_o2, in_tx, "instrument");
            config_override(blk, "density", in_o3, in_density, "instrument");
            config_override(blk, "lambda", in_o4, in_lambda, "instrument");
            config_override(blk, "floor_dbm", in_o5, in_floor, "instrument");
            config_override(blk, "variant", in_o6, in_variant, "instrument");
            config_override(blk, "ref_lat", in_o7, in_ref_lat, "instrument");
            config_override(blk, "ref_lon", in_o8, in_ref_lon, "instrument");
            if (in_units.empty()) throw canopy::validation_error("units", "missing --units");
            if (in_tx.empty())
                throw canopy::validation_error("transmitters", "missing --transmitters");
            if (in_density.empty()) throw canopy::validation_error("density", "missing --density");
            require_file(in_units, "units");
            require_file(in_tx, "transmitters");
            require_file(in_density, "density");
            canopy::ZVariant variant;
            if (in_variant == "full") {
                variant = canopy::ZVariant::Full;
            } else if (in_variant == "no-hd") {
                variant = canopy::ZVariant::DropHd;
            } else if (in_variant == "no-rp") {
                variant = canopy::ZVariant::DropRp;
            } else {
                throw canopy::validation_error("variant", "must be full, no-hd, or no-rp");
            }

            canopy::CsvTable ut = canopy::read_csv(in_units);
            int uc_id = ut.col("unit_id"), uc_lat = ut.col("lat"), uc_lon = ut.col("lon"),
                uc_lang = ut.col("language_nodes");
            canopy::CsvTable tt = canopy::read_csv(in_tx);
            int tc_name = tt.col("name"), tc_lat = tt.col("lat"), tc_lon = tt.col("lon"),
                tc_f = tt.col("freq_mhz"), tc_e = tt.col("erp_dbm"), tc_y = tt.col("year_active");
            canopy::CsvTable dt = canopy::read_csv(in_density);
            int dc_y = dt.col("year"), dc_c = dt.col("pentecostal_count"),
                dc_a = dt.col("land_area_km2");

            std::vector<canopy::TransmitterSpec> txs;
            for (size_t r = 0; r < tt.rows.size(); ++r) {
                canopy::TransmitterSpec tx;
                tx.name = tt.rows[r][tc_name];
                tx.lat = canopy::csv_double(tt, r, tc_lat);
                tx.lon = canopy::csv_double(tt, r, tc_lon);
                tx.freq_mhz = canopy::csv_double(tt, r, tc_f);
                tx.erp_dbm = canopy::csv_double(tt, r, tc_e);
                tx.year_active = canopy::csv_int(tt, r, tc_y);
                tx.validate();
                txs.push_back(tx);
            }
            canopy::LanguageClassification broadcast = canopy::yoruba_classification();

            struct Unit {
                std::string id;
                double lat, lon, hd, ld;
            };
            std::vector<Unit> units;
            for (size_t r = 0; r < ut.rows.size(); ++r) {
                Unit u;
                u.id = ut.rows[r][uc_id];
                u.lat = canopy::csv_double(ut, r, uc_lat);
                u.lon = canopy::csv_double(ut, r, uc_lon);
                canopy::LanguageClassification lang;
                lang.language_name = u.id;
                std::stringstream ss(ut.rows[r][uc_lang]);
                std::string node;
                while (std::getline(ss, node, ';')) lang.nodes.push_back(node);
                if (lang.nodes.empty())
                    throw canopy::validation_error(
                        "language_nodes", in_units + ":" + std::to_string(ut.line_numbers[r]) +
                                              ": empty classification");
                u.hd = canopy::haversine_km(u.lat, u.lon, in_ref_lat, in_ref_lon);
                u.ld = canopy::linguistic_distance(lang, broadcast, in_lambda);
                units.push_back(u);
            }

            // best signal per unit-year across transmitters active that year
            std::vector<canopy::ExposureRow> rows;
            std::vector<double> signals;
            for (size_t r = 0; r < dt.rows.size(); ++r) {
                int year = canopy::csv_int(dt, r, dc_y);
                double count = canopy::csv_double(dt, r, dc_c);
                double area = canopy::csv_double(dt, r, dc_a);
                if (!(area > 0.0))
                    throw canopy::validation_error(
                        "land_area_km2",
                        in_density + ":" + std::to_string(dt.line_numbers[r]) + ": must be > 0");
                if (!(count > 0.0))
                    throw canopy::validation_error(
                        "pentecostal_count",
                        in_density + ":" + std::to_string(dt.line_numbers[r]) + ": must be > 0");
                for (const auto& u : units) {
                    double best = in_floor;
                    for (const auto& tx : txs) {
                        if (tx.year_active > year) continue;
                        best = std::max(best, canopy::free_space_signal_dbm(tx, u.lat, u.lon));
                    }
                    canopy::ExposureRow row;
                    row.unit_id = u.id;
                    row.year = year;
                    row.hd_km = u.hd;
                    row.ld = u.ld;
                    row.pent_density = count / area;
                    rows.push_back(row);
                    signals.push_back(best);
                }
            }
            std::vector<double> rp = canopy::normalize_exposure(signals, in_floor);
            for (size_t i = 0; i < rows.size(); ++i) rows[i].rp_c = rp[i];
            canopy::z_index(rows, variant);

            canopy::CsvWriter w(out_path(g, "exposure.csv").string());
            w.row({"unit_id", "year", "hd_km", "ld", "pent_density", "rp_c", "z"});
            for (const auto& r : rows)
                w.row({r.unit_id, std::to_string(r.year), canopy::csv_num(r.hd_km),
                       canopy::csv_num(r.ld), canopy::csv_num(r.pent_density),
                       canopy::csv_num(r.rp_c), canopy::csv_num(r.z)});
            std::cout << rows.size() << " exposure rows written to " << g.output_dir << "\n";
            return 0;
        }

        if (dm->parsed()) {
            json blk = config_block(g, "demo");
            config_override(blk, "write_data", dm_o1, dm_write, "demo");

            canopy::ModelParams p = demo_params();
            canopy::BeliefPrior pr = demo_prior();
            std::printf("model: mu=%.4f sigma=%.4f rho=%.4f gamma=%.3f, prior Beta(%.3f, %.3f)\n",
                        p.mu, p.sigma, p.rho, p.gamma, pr.alpha, pr.beta);

            canopy::EquilibriumSolution sol = canopy::q_mfe_stationary(p, pr);
            std::printf("\nequilibrium clearing rate (threshold %.6f):\n", sol.threshold);
            for (int i = 0; i <= 10; ++i) {
                double a = i / 10.0;
                std::printf("  a=%.1f  q=%.6f%s\n", a, sol.rate_at(a),
                            sol.rate_at(a) > sol.threshold ? "  [unsustainable]" : "");
            }
            std::printf("  belief-averaged rate q~* = %.6f\n", sol.q_tilde_star);
            auto v = canopy::classify_sustainability(sol);
            if (v.a_star)
                std::printf("  verdict: %s at a* = %.4f\n", verdict_name(v), *v.a_star);
            else
                std::printf("  verdict: %s\n", verdict_name(v));

            canopy::Panel panel = synth_model_panel(546, 11, g.seed, pr);
            canopy::Panel gbm_panel = synth_gbm_panel(546, 11, g.seed);
            std::vector<double> shares = synth_shares(546, g.seed);

            canopy::EstimationResult b = canopy::fit_beliefs(shares);
            std::printf("\nfit-beliefs on synthetic shares: alpha=%.3f (se %.3f), beta=%.3f (se %.3f)\n",
                        b.estimates.at("alpha"), b.std_errors.at("alpha"), b.estimates.at("beta"),
                        b.std_errors.at("beta"));

            canopy::GbmFitOptions gopts;
            gopts.seed = canopy::derive_seed(g.seed, "fit-gbm");
            gopts.threads = g.threads;
            canopy::EstimationResult gb = canopy::fit_gbm(gbm_panel, gopts);
            std::printf("fit-gbm on untouched synthetic cover: mu=%.4f (se %.4f), sigma=%.4f (se %.4f)\n",
                        gb.estimates.at("mu"), gb.std_errors.at("mu"), gb.estimates.at("sigma"),
                        gb.std_errors.at("sigma"));

            canopy::GammaFitOptions copts;
            copts.seed = canopy::derive_seed(g.seed, "fit-gamma");
            canopy::EstimationResult cg =
                canopy::fit_gamma(panel, p.mu, p.sigma, p.rho, pr, p.g2_k2,
                                  canopy::GmmMoments::MeanOnly, copts);
            std::printf("fit-gamma on synthetic panel: gamma=%.3f (se %.3f)\n",
                        cg.estimates.at("gamma"), cg.std_errors.at("gamma"));

            canopy::CounterfactualResult cf_res =
                canopy::counterfactual_panel(panel, p, pr, 2000, 2010);
            std::printf("\ncounterfactual (a=0 for everyone), %d units, 2000-2010:\n",
                        cf_res.summary.n_units);
            std::printf("  mean diff %.3f km2 (%.2f pct): belief-driven restraint preserved "
                        "%.3f km2 per unit\n",
                        cf_res.summary.mean_diff_km2, cf_res.summary.pct_of_observed,
                        -cf_res.summary.mean_diff_km2);
            std::printf("  counterfactual rate %.6f vs threshold %.6f: %s\n",
                        cf_res.summary.counterfactual_rate, cf_res.summary.threshold,
                        verdict_name(cf_res.summary.verdict));

            if (!dm_write.empty()) {
                fs::create_directories(dm_write);
                write_panel_csv(panel, fs::path(dm_write) / "synthetic_panel.csv");
                write_panel_csv(gbm_panel, fs::path(dm_write) / "synthetic_untouched.csv");
                write_shares_csv(shares, fs::path(dm_write) / "synthetic_beta.csv");
                canopy::save_json(canopy::params_to_json(p),
                                  (fs::path(dm_write) / "params_baseline.json").string());
                canopy::save_json(canopy::prior_to_json(pr),
                                  (fs::path(dm_write) / "prior_baseline.json").string());
                std::printf("\nsynthetic data written to %s\n", dm_write.c_str());
            }
            return 0;
        }

        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const canopy::convergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const canopy::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int main(int argc, char** argv) { return run(argc, argv); }
