#pragma once

// JSON (de)serialization for parameters, priors, and results. Parsing is
// strict: unknown keys are rejected and every error names the field, so a
// typo in a config file surfaces immediately instead of silently falling
// back to a default.

#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>

#include <json.hpp>

#include "canopy/dynamics.hpp"
#include "canopy/equilibrium.hpp"
#include "canopy/errors.hpp"
#include "canopy/estimation.hpp"
#include "canopy/instrument.hpp"
#include "canopy/params.hpp"
#include "canopy/prior.hpp"

namespace canopy {

using nlohmann::json;

namespace detail {

inline void check_keys(const json& j, const std::string& ctx,
                       std::initializer_list<const char*> required,
                       std::initializer_list<const char*> optional = {}) {
    if (!j.is_object()) throw validation_error(ctx, "expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : required)
            if (it.key() == k) known = true;
        for (const char* k : optional)
            if (it.key() == k) known = true;
        if (!known) throw validation_error(ctx + "." + it.key(), "unknown field");
    }
    for (const char* k : required)
        if (!j.contains(k)) throw validation_error(ctx + "." + k, "missing field");
}

inline double jnum(const json& j, const std::string& key, const std::string& ctx) {
    const json& v = j.at(key);
    if (!v.is_number()) throw validation_error(ctx + "." + key, "expected a number");
    return v.get<double>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ModelParams
// ---------------------------------------------------------------------------

inline json params_to_json(const ModelParams& p) {
    json g1, g2;
    if (p.g1_form == G1Form::Unit) {
        g1 = {{"form", "Unit"}};
    } else {
        g1 = {{"form", "OneMinusPowA"}, {"c", p.g1_c}, {"k1", p.g1_k1}};
    }
    if (p.g2_form == G2Form::Zero) {
        g2 = {{"form", "Zero"}};
    } else {
        g2 = {{"form", "PowA"}, {"k2", p.g2_k2}};
    }
    return {{"mu", p.mu},     {"sigma", p.sigma}, {"rho", p.rho},
            {"gamma", p.gamma}, {"g1_form", g1},  {"g2_form", g2}};
}

inline ModelParams params_from_json(const json& j, const std::string& ctx = "params") {
    detail::check_keys(j, ctx, {"mu", "sigma", "rho", "gamma"}, {"g1_form", "g2_form"});
    ModelParams p;
    p.mu = detail::jnum(j, "mu", ctx);
    p.sigma = detail::jnum(j, "sigma", ctx);
    p.rho = detail::jnum(j, "rho", ctx);
    p.gamma = detail::jnum(j, "gamma", ctx);
    if (j.contains("g1_form")) {
        const json& g = j.at("g1_form");
        detail::check_keys(g, ctx + ".g1_form", {"form"}, {"c", "k1"});
        std::string form = g.at("form").get<std::string>();
        if (form == "Unit") {
            p.g1_form = G1Form::Unit;
        } else if (form == "OneMinusPowA") {
            p.g1_form = G1Form::OneMinusPowA;
            p.g1_c = g.contains("c") ? detail::jnum(g, "c", ctx + ".g1_form") : 1.0;
            p.g1_k1 = g.contains("k1") ? detail::jnum(g, "k1", ctx + ".g1_form") : 1.0;
        } else {
            throw validation_error(ctx + ".g1_form.form", "unknown form '" + form + "'");
        }
    }
    if (j.contains("g2_form")) {
        const json& g = j.at("g2_form");
        detail::check_keys(g, ctx + ".g2_form", {"form"}, {"k2"});
        std::string form = g.at("form").get<std::string>();
        if (form == "Zero") {
            p.g2_form = G2Form::Zero;
        } else if (form == "PowA") {
            p.g2_form = G2Form::PowA;
            p.g2_k2 = g.contains("k2") ? detail::jnum(g, "k2", ctx + ".g2_form") : 1.0;
        } else {
            throw validation_error(ctx + ".g2_form.form", "unknown form '" + form + "'");
        }
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// BeliefPrior
// ---------------------------------------------------------------------------

inline json prior_to_json(const BeliefPrior& b) {
    return {{"alpha", b.alpha}, {"beta", b.beta}};
}

inline BeliefPrior prior_from_json(const json& j, const std::string& ctx = "prior") {
    detail::check_keys(j, ctx, {"alpha", "beta"});
    BeliefPrior b{detail::jnum(j, "alpha", ctx), detail::jnum(j, "beta", ctx)};
    b.validate();
    return b;
}

// ---------------------------------------------------------------------------
// Solutions and results
// ---------------------------------------------------------------------------

inline json solution_to_json(const EquilibriumSolution& s) {
    json j;
    j["q_tilde_star"] = s.q_tilde_star;
    j["coupling_aggregate"] = s.coupling_aggregate;
    j["threshold"] = s.threshold;
    j["crossing"] = s.crossing ? json(*s.crossing) : json(nullptr);
    j["negative_rate_warning"] = s.negative_rate_warning;
    j["converged"] = s.converged;
    j["iterations"] = s.iterations;
    j["residual"] = s.residual;
    j["grid"] = s.grid;
    j["q_rate"] = s.q_rate;
    return j;
}

inline EquilibriumSolution solution_from_json(const json& j, const std::string& ctx = "solution") {
    detail::check_keys(j, ctx,
                       {"q_tilde_star", "coupling_aggregate", "threshold", "crossing",
                        "negative_rate_warning", "converged", "iterations", "residual", "grid",
                        "q_rate"});
    EquilibriumSolution s;
    s.q_tilde_star = detail::jnum(j, "q_tilde_star", ctx);
    s.coupling_aggregate = detail::jnum(j, "coupling_aggregate", ctx);
    s.threshold = detail::jnum(j, "threshold", ctx);
    if (!j.at("crossing").is_null()) s.crossing = detail::jnum(j, "crossing", ctx);
    s.negative_rate_warning = j.at("negative_rate_warning").get<bool>();
    s.converged = j.at("converged").get<bool>();
    s.iterations = j.at("iterations").get<int>();
    s.residual = detail::jnum(j, "residual", ctx);
    s.grid = j.at("grid").get<std::vector<double>>();
    s.q_rate = j.at("q_rate").get<std::vector<double>>();
    return s;
}

inline json finite_horizon_to_json(const FiniteHorizonSolution& s) {
    json j;
    j["time_grid"] = s.time_grid;
    j["grid"] = s.grid;
    j["rate_path"] = s.rate_path;
    j["median_rate_path"] = s.median_rate_path;
    j["aggregate_path"] = s.aggregate_path;
    j["converged"] = s.converged;
    j["iterations"] = s.iterations;
    j["sup_norm_residual"] = s.sup_norm_residual;
    j["degenerate_limit_used"] = s.degenerate_limit_used;
    return j;
}

inline FiniteHorizonSolution finite_horizon_from_json(const json& j,
                                                      const std::string& ctx = "solution") {
    detail::check_keys(j, ctx,
                       {"time_grid", "grid", "rate_path", "median_rate_path", "aggregate_path",
                        "converged", "iterations", "sup_norm_residual", "degenerate_limit_used"});
    FiniteHorizonSolution s;
    s.time_grid = j.at("time_grid").get<std::vector<double>>();
    s.grid = j.at("grid").get<std::vector<double>>();
    s.rate_path = j.at("rate_path").get<std::vector<std::vector<double>>>();
    s.median_rate_path = j.at("median_rate_path").get<std::vector<double>>();
    s.aggregate_path = j.at("aggregate_path").get<std::vector<double>>();
    s.converged = j.at("converged").get<bool>();
    s.iterations = j.at("iterations").get<int>();
    s.sup_norm_residual = detail::jnum(j, "sup_norm_residual", ctx);
    s.degenerate_limit_used = j.at("degenerate_limit_used").get<bool>();
    return s;
}

inline json estimation_to_json(const EstimationResult& r) {
    json j;
    j["estimates"] = r.estimates;
    j["std_errors"] = r.std_errors;
    j["diagnostics"] = r.diagnostics;
    j["warnings"] = r.warnings;
    j["n_obs"] = r.n_obs;
    j["converged"] = r.converged;
    json prof = json::array();
    for (const auto& p : r.criterion_profile) prof.push_back({p[0], p[1]});
    j["criterion_profile"] = prof;
    return j;
}

inline EstimationResult estimation_from_json(const json& j, const std::string& ctx = "result") {
    detail::check_keys(j, ctx,
                       {"estimates", "std_errors", "diagnostics", "warnings", "n_obs", "converged",
                        "criterion_profile"});
    EstimationResult r;
    r.estimates = j.at("estimates").get<std::map<std::string, double>>();
    r.std_errors = j.at("std_errors").get<std::map<std::string, double>>();
    r.diagnostics = j.at("diagnostics").get<std::map<std::string, double>>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.n_obs = j.at("n_obs").get<int>();
    r.converged = j.at("converged").get<bool>();
    for (const auto& p : j.at("criterion_profile"))
        r.criterion_profile.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return r;
}

inline json iv_to_json(const IvResult& r) {
    return {{"beta_iv", r.beta_iv},
            {"se_iv", r.se_iv},
            {"beta_ols", r.beta_ols},
            {"se_ols", r.se_ols},
            {"first_stage_coef", r.first_stage_coef},
            {"first_stage_se", r.first_stage_se},
            {"first_stage_f", r.first_stage_f},
            {"n", r.n}};
}

inline json counterfactual_to_json(const CounterfactualResult& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"unit_id", row.unit_id},
                        {"observed", row.observed},
                        {"predicted", row.predicted},
                        {"counterfactual", row.counterfactual},
                        {"diff_km2", row.diff_km2},
                        {"diff_pct", row.diff_pct}});
    const char* verdict = r.summary.verdict.kind == Sustainability::SustainableForAll
                              ? "SustainableForAll"
                              : r.summary.verdict.kind == Sustainability::UnsustainableForAll
                                    ? "UnsustainableForAll"
                                    : "SwitchesAt";
    json j;
    j["rows"] = rows;
    j["skipped_units"] = r.skipped_units;
    j["summary"] = {{"mean_diff_km2", r.summary.mean_diff_km2},
                    {"pct_of_observed", r.summary.pct_of_observed},
                    {"counterfactual_rate", r.summary.counterfactual_rate},
                    {"threshold", r.summary.threshold},
                    {"verdict", verdict},
                    {"n_units", r.summary.n_units}};
    return j;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("path", "cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw validation_error("path", path + ": " + e.what());
    }
    return j;
}

inline void save_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw validation_error("path", "cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace canopy
