#pragma once

// Forest-cover dynamics under a fixed clearing rate: path simulation (free
// and reflected at a cover cap), transition densities, the stationary
// density at the cap, and the counterfactual panel exercise.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "canopy/equilibrium.hpp"
#include "canopy/errors.hpp"
#include "canopy/math.hpp"
#include "canopy/panel.hpp"
#include "canopy/params.hpp"
#include "canopy/prior.hpp"
#include "canopy/rng.hpp"

namespace canopy {

enum class Scheme { Exact, EulerMaruyama };

struct Trajectory {
    std::vector<double> times;
    std::vector<double> values;
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::Exact;
};

namespace detail {

inline int step_count(double horizon, double dt) {
    if (!(horizon > 0.0)) throw validation_error("horizon", "must be > 0");
    if (!(dt > 0.0) || dt > horizon) throw validation_error("dt", "must satisfy 0 < dt <= horizon");
    double n = horizon / dt;
    int ni = static_cast<int>(std::llround(n));
    if (std::abs(n - ni) > 1e-9 * std::max(1.0, n))
        throw validation_error("dt", "must divide horizon");
    return ni;
}

}  // namespace detail

// Simulate net cover X under dX = (mu - rate) X dt + sigma X dW.
inline Trajectory simulate_path(double x0, double rate, const ModelParams& params, double horizon,
                                double dt, std::uint64_t seed, Scheme scheme = Scheme::Exact) {
    if (!(x0 > 0.0)) throw validation_error("x0", "must be > 0");
    params.validate();
    int n = detail::step_count(horizon, dt);
    Rng rng(seed);
    Trajectory tr;
    tr.seed = seed;
    tr.scheme = scheme;
    tr.times.resize(n + 1);
    tr.values.resize(n + 1);
    tr.values[0] = x0;
    const double mu_net = params.mu - rate;
    const double sig = params.sigma;
    const double log_drift = (mu_net - 0.5 * sig * sig) * dt;
    const double sq = sig * std::sqrt(dt);
    double x = x0;
    for (int i = 1; i <= n; ++i) {
        double z = rng.normal();
        if (scheme == Scheme::Exact) {
            x *= std::exp(log_drift + sq * z);
        } else {
            x *= 1.0 + mu_net * dt + sq * z;
            if (!(x > 0.0))
                throw convergence_error("Euler-Maruyama step left the positive domain; reduce dt",
                                        dt);
        }
        tr.times[i] = i * dt;
        tr.values[i] = x;
    }
    return tr;
}

// Same process reflected at an upper cap (total land area). Reflection is
// applied in log space, which is exact for the log-normal transition.
inline Trajectory simulate_reflected(double x0, double rate, const ModelParams& params, double cap,
                                     double horizon, double dt, std::uint64_t seed) {
    if (!(cap > 0.0)) throw validation_error("cap", "must be > 0");
    if (!(x0 > 0.0 && x0 <= cap)) throw validation_error("x0", "must lie in (0, cap]");
    params.validate();
    int n = detail::step_count(horizon, dt);
    Rng rng(seed);
    Trajectory tr;
    tr.seed = seed;
    tr.scheme = Scheme::Exact;
    tr.times.resize(n + 1);
    tr.values.resize(n + 1);
    tr.values[0] = x0;
    const double sig = params.sigma;
    const double log_drift = (params.mu - rate - 0.5 * sig * sig) * dt;
    const double sq = sig * std::sqrt(dt);
    const double ls = std::log(cap);
    double y = std::log(x0);
    for (int i = 1; i <= n; ++i) {
        y += log_drift + sq * rng.normal();
        if (y > ls) y = 2.0 * ls - y;
        tr.times[i] = i * dt;
        tr.values[i] = std::exp(y);
    }
    return tr;
}

// Net-drift specification for the transition densities. mu_star is the
// arithmetic drift of cover after clearing, i.e. mu - rate.
struct DensitySpec {
    double mu_star = 0.0;
    double sigma = 0.0;
    double x0 = 0.0;
    std::optional<double> cap;

    void validate() const {
        if (!(sigma > 0.0)) throw validation_error("sigma", "must be > 0");
        if (!(x0 > 0.0)) throw validation_error("x0", "must be > 0");
        if (cap && !(*cap > x0)) throw validation_error("cap", "must exceed x0");
    }
};

// Transition density of the free process at time t.
inline double lognormal_tpd(double x, double t, const DensitySpec& spec) {
    spec.validate();
    if (spec.cap) throw validation_error("cap", "lognormal_tpd describes the uncapped process");
    if (!(t > 0.0)) throw validation_error("t", "must be > 0");
    if (!(x > 0.0)) return 0.0;
    const double m = spec.mu_star - 0.5 * spec.sigma * spec.sigma;
    const double sd = spec.sigma * std::sqrt(t);
    const double z = (std::log(x) - std::log(spec.x0) - m * t) / sd;
    return norm_pdf(z) / (x * sd);
}

// Transition density of the process reflected at the cap (method of images
// plus the drift correction term; integrates to one on (0, cap]).
inline double reflected_tpd(double x, double t, const DensitySpec& spec) {
    spec.validate();
    if (!spec.cap) throw validation_error("cap", "reflected_tpd requires a cap");
    if (!(t > 0.0)) throw validation_error("t", "must be > 0");
    const double S = *spec.cap;
    if (!(x > 0.0) || x > S) return 0.0;
    const double m = spec.mu_star - 0.5 * spec.sigma * spec.sigma;
    const double sd = spec.sigma * std::sqrt(t);
    const double lx = std::log(x), l0 = std::log(spec.x0), ls = std::log(S);
    const double c = 2.0 * m / (spec.sigma * spec.sigma);
    const double d1 = (lx - l0 - m * t) / sd;
    const double d2 = (2.0 * ls - lx - l0 - m * t) / sd;
    double p = norm_pdf(d1) / sd +
               std::exp(-c * (ls - lx)) * (norm_pdf(d2) / sd + c * norm_cdf(-d2));
    return p / x;
}

// Stationary density of log cover y = ln X under reflection at ln S.
// Exists only when net log growth is positive (sustainable regime), in which
// case mass piles up exponentially below the cap.
inline double stationary_density(double y, const ModelParams& params, double rate, double cap) {
    params.validate();
    if (!(cap > 0.0)) throw validation_error("cap", "must be > 0");
    if (!(params.sigma > 0.0)) throw validation_error("sigma", "must be > 0");
    const double m = params.threshold() - rate;
    if (!(m > 0.0))
        throw validation_error("rate", "no stationary density: net log growth "
                                       "mu - sigma^2/2 - rate must be positive");
    const double c = 2.0 * m / (params.sigma * params.sigma);
    const double ls = std::log(cap);
    if (y > ls) return 0.0;
    // normalize numerically over the effective support
    const QuadRule& gl = gauss_legendre_64();
    const double lo = ls - 60.0 / c;
    double z = 0.0;
    for (size_t i = 0; i < gl.x.size(); ++i) {
        double yy = 0.5 * (lo + ls) + 0.5 * (ls - lo) * gl.x[i];
        z += 0.5 * (ls - lo) * gl.w[i] * std::exp(c * (yy - ls));
    }
    return std::exp(c * (y - ls)) / z;
}

// Deterministic median-cover path at the stationary equilibrium rate.
inline Trajectory median_cover_path(double xbar0, const ModelParams& params,
                                    const EquilibriumSolution& sol, double horizon,
                                    double dt = 1.0) {
    if (!(xbar0 > 0.0)) throw validation_error("xbar0", "must be > 0");
    int n = detail::step_count(horizon, dt);
    Trajectory tr;
    tr.scheme = Scheme::Exact;
    tr.times.resize(n + 1);
    tr.values.resize(n + 1);
    const double g = params.threshold() - sol.q_tilde_star;
    for (int i = 0; i <= n; ++i) {
        tr.times[i] = i * dt;
        tr.values[i] = xbar0 * std::exp(g * tr.times[i]);
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Counterfactual: remove belief-driven restraint (set a = 0 for everyone)
// ---------------------------------------------------------------------------

struct CounterfactualRow {
    std::string unit_id;
    double observed = 0.0;        // cover at t1
    double predicted = 0.0;       // model median cover at t1, factual rate
    double counterfactual = 0.0;  // model median cover at t1, a = 0 rate
    double diff_km2 = 0.0;        // counterfactual - observed
    double diff_pct = 0.0;
};

struct CounterfactualSummary {
    double mean_diff_km2 = 0.0;
    double pct_of_observed = 0.0;      // 100 * sum(diff) / sum(observed)
    double counterfactual_rate = 0.0;  // clearing rate with a = 0
    double threshold = 0.0;
    SustainabilityVerdict verdict{Sustainability::UnsustainableForAll, std::nullopt};
    int n_units = 0;
};

struct CounterfactualResult {
    std::vector<CounterfactualRow> rows;
    CounterfactualSummary summary;
    std::vector<std::string> skipped_units;
    EquilibriumSolution equilibrium;
};

inline CounterfactualResult counterfactual_panel(const Panel& panel, const ModelParams& params,
                                                 const BeliefPrior& prior, int t0, int t1) {
    if (!(t1 > t0)) throw validation_error("t1", "must exceed t0");
    panel.validate();
    CounterfactualResult res;
    res.equilibrium = q_mfe_stationary(params, prior);
    const double G = res.equilibrium.coupling_aggregate;
    const double thr = params.threshold();
    const double q_cf = mfe_rate(0.0, params, G);  // a = 0: coupling drops out
    const double dt = static_cast<double>(t1 - t0);

    Panel p = panel;
    p.sort_canonical();
    std::string unit;
    const PanelRow *r0 = nullptr, *r1 = nullptr;
    auto flush = [&]() {
        if (unit.empty()) return;
        if (!r0 || !r1) {
            res.skipped_units.push_back(unit);
            return;
        }
        CounterfactualRow row;
        row.unit_id = unit;
        row.observed = r1->tree_area_km2;
        double rate_u = mfe_rate(r0->atr_share, params, G);
        row.predicted = r0->tree_area_km2 * std::exp((thr - rate_u) * dt);
        row.counterfactual = r0->tree_area_km2 * std::exp((thr - q_cf) * dt);
        row.diff_km2 = row.counterfactual - row.observed;
        row.diff_pct = 100.0 * row.diff_km2 / row.observed;
        res.rows.push_back(row);
    };
    for (const auto& r : p.rows) {
        if (r.unit_id != unit) {
            flush();
            unit = r.unit_id;
            r0 = r1 = nullptr;
        }
        if (r.year == t0) r0 = &r;
        if (r.year == t1) r1 = &r;
    }
    flush();
    if (res.rows.empty())
        throw validation_error("panel", "no unit observed at both " + std::to_string(t0) +
                                            " and " + std::to_string(t1));

    auto& s = res.summary;
    double tot_obs = 0.0;
    for (const auto& row : res.rows) {
        s.mean_diff_km2 += row.diff_km2;
        tot_obs += row.observed;
    }
    s.n_units = static_cast<int>(res.rows.size());
    s.pct_of_observed = 100.0 * s.mean_diff_km2 / tot_obs;
    s.mean_diff_km2 /= s.n_units;
    s.counterfactual_rate = q_cf;
    s.threshold = thr;
    s.verdict = q_cf > thr
                    ? SustainabilityVerdict{Sustainability::UnsustainableForAll, std::nullopt}
                    : SustainabilityVerdict{Sustainability::SustainableForAll, std::nullopt};
    return res;
}

}  // namespace canopy
