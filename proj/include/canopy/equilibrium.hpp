#pragma once

// Mean-field equilibrium of the clearing game. Each household clears its
// forest plot at a proportional rate q(a) that depends on its adherence a;
// preferences over aggregate cover couple households through the
// belief-averaged growth shortfall of median cover, written G below. With
// isoelastic preferences the best response is affine in G, so the stationary
// fixed point is available in closed form, and the finite-horizon problem
// reduces to a Bernoulli ODE per household plus a Picard iteration on the
// aggregate path.

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "canopy/errors.hpp"
#include "canopy/math.hpp"
#include "canopy/params.hpp"
#include "canopy/prior.hpp"

namespace canopy {

// Clearing rate divided by the policy scale eps_q, before aggregate coupling.
inline double unscaled_base_rate(double a, const ModelParams& p) {
    Elasticities e = elasticities(a, p);
    return p.rho - p.mu * e.nu_q - 0.5 * p.sigma * p.sigma * e.nu_q / e.eps_q;
}

// Optimal clearing rate when aggregate cover is ignored (g2 forced to zero).
inline double q_no_interaction(double a, const ModelParams& p) {
    Elasticities e = elasticities(a, p);
    return e.eps_q * unscaled_base_rate(a, p);
}

// Clearing rate given the aggregate term G.
inline double mfe_rate(double a, const ModelParams& p, double G) {
    Elasticities e = elasticities(a, p);
    return e.eps_q * (unscaled_base_rate(a, p) + e.nu_xbar * (G - p.threshold()));
}

enum class Sustainability { SustainableForAll, UnsustainableForAll, SwitchesAt };

struct SustainabilityVerdict {
    Sustainability kind;
    std::optional<double> a_star;  // interior switch point when kind == SwitchesAt
};

struct StationaryOptions {
    int grid_points = 101;
};

struct EquilibriumSolution {
    std::vector<double> grid;    // adherence grid on [0,1]
    std::vector<double> q_rate;  // equilibrium clearing rate on the grid
    double q_tilde_star = 0.0;   // belief-averaged equilibrium clearing rate
    double coupling_aggregate = 0.0;  // fixed point G of the aggregate recursion
    double threshold = 0.0;           // mu - sigma^2/2
    std::optional<double> crossing;   // a with q_rate(a) = threshold, if interior
    bool negative_rate_warning = false;  // rate went negative somewhere on the grid
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;

    double rate_at(double a) const { return lerp_table(grid, q_rate, a); }
};

inline EquilibriumSolution q_mfe_stationary(const ModelParams& params, const BeliefPrior& prior,
                                            StationaryOptions opts = {}) {
    params.validate();
    prior.validate();
    if (opts.grid_points < 2)
        throw validation_error("grid_points", "need at least 2 grid points");

    PriorQuadrature quad(prior);
    const double thr = params.threshold();
    double m_base = quad.average([&](double a) { return unscaled_base_rate(a, params); });
    double m_nux = quad.average([&](double a) { return elasticities(a, params).nu_xbar; });
    double denom = 1.0 - m_nux;
    if (!(std::abs(denom) > 1e-10))
        throw validation_error("prior", "aggregate coupling is ill-posed: E[nu_xbar] == 1");

    // Fixed point of G = E[q(.;G)/eps_q] with q affine in G.
    const double G = (m_base - thr * m_nux) / denom;

    EquilibriumSolution sol;
    sol.threshold = thr;
    sol.coupling_aggregate = G;
    sol.grid.resize(opts.grid_points);
    sol.q_rate.resize(opts.grid_points);
    const int n = opts.grid_points;
    for (int i = 0; i < n; ++i) {
        double a = static_cast<double>(i) / (n - 1);
        sol.grid[i] = a;
        sol.q_rate[i] = mfe_rate(a, params, G);
        if (sol.q_rate[i] < 0.0) sol.negative_rate_warning = true;
    }
    sol.q_tilde_star = quad.average([&](double a) { return mfe_rate(a, params, G); });

    // locate an interior sustainability crossing on the exact rate function
    auto excess = [&](double a) { return mfe_rate(a, params, G) - thr; };
    double prev = excess(sol.grid[0]);
    for (int i = 1; i < n; ++i) {
        double cur = excess(sol.grid[i]);
        if (prev == 0.0) {
            sol.crossing = sol.grid[i - 1];
            break;
        }
        if (prev * cur < 0.0) {
            sol.crossing = brent_root(excess, sol.grid[i - 1], sol.grid[i], 1e-10);
            break;
        }
        prev = cur;
    }
    if (!sol.crossing && prev == 0.0) sol.crossing = sol.grid[n - 1];

    sol.residual = std::abs((m_base + m_nux * (G - thr)) - G);
    sol.converged = true;
    sol.iterations = 1;
    return sol;
}

// Closed-form equilibrium rate when clearing utility is belief-free
// (g1 = Unit) and cover utility is g2(a) = a^k. This is the affine-in-G
// special case solved by hand; the general solver must reproduce it.
inline double q_pro(double a, const ModelParams& params, const BeliefPrior& prior) {
    params.validate();
    prior.validate();
    ModelParams::check_adherence(a);
    if (params.g1_form != G1Form::Unit)
        throw validation_error("g1_form", "closed form requires g1 = Unit");
    if (params.g2_form != G2Form::PowA)
        throw validation_error("g2_form", "closed form requires g2(a) = a^k");

    const double thr = params.threshold();
    const double q0 = q_no_interaction(0.0, params);
    const double g = params.gamma;
    const double mk = belief_moment(prior, [&](double x) { return std::pow(x, params.g2_k2); });
    const double G = (g * q0 - thr * (1.0 - g) * mk) / (1.0 - (1.0 - g) * mk);
    return q0 - (std::pow(a, params.g2_k2) * (1.0 - g) / g) * (thr - G);
}

// Equilibrium shift induced by a first-order stochastic dominance increase in
// the adherence distribution. prior_high must dominate prior_low.
struct FosdRow {
    double a;
    double delta_q;  // q_rate under prior_high minus q_rate under prior_low
};

inline std::vector<FosdRow> fosd_response(const ModelParams& params, const BeliefPrior& prior_low,
                                          const BeliefPrior& prior_high,
                                          const std::vector<double>& grid) {
    prior_low.validate();
    prior_high.validate();
    for (int i = 1; i < 200; ++i) {
        double a = i / 200.0;
        if (prior_high.cdf(a) > prior_low.cdf(a) + 1e-12)
            throw validation_error("prior_high", "does not first-order dominate prior_low");
    }
    EquilibriumSolution lo = q_mfe_stationary(params, prior_low);
    EquilibriumSolution hi = q_mfe_stationary(params, prior_high);
    std::vector<FosdRow> out;
    out.reserve(grid.size());
    for (double a : grid) {
        ModelParams::check_adherence(a);
        out.push_back({a, mfe_rate(a, params, hi.coupling_aggregate) -
                              mfe_rate(a, params, lo.coupling_aggregate)});
    }
    return out;
}

inline SustainabilityVerdict classify_sustainability(const EquilibriumSolution& sol) {
    if (sol.grid.size() < 2)
        throw validation_error("solution", "rate schedule is empty");
    bool any_above = false, any_below = false;
    for (double r : sol.q_rate) {
        if (r > sol.threshold) any_above = true;
        if (r < sol.threshold) any_below = true;
    }
    if (any_above && !any_below) return {Sustainability::UnsustainableForAll, std::nullopt};
    if (any_below && !any_above) return {Sustainability::SustainableForAll, std::nullopt};

    // bisect the interpolated schedule at the first sign change
    auto excess = [&](double a) { return sol.rate_at(a) - sol.threshold; };
    for (size_t i = 1; i < sol.grid.size(); ++i) {
        double f0 = sol.q_rate[i - 1] - sol.threshold;
        double f1 = sol.q_rate[i] - sol.threshold;
        if (f0 == 0.0) return {Sustainability::SwitchesAt, sol.grid[i - 1]};
        if (f0 * f1 < 0.0) {
            double lo = sol.grid[i - 1], hi = sol.grid[i];
            while (hi - lo > 1e-8) {
                double mid = 0.5 * (lo + hi);
                if (excess(mid) * f0 <= 0.0)
                    hi = mid;
                else
                    lo = mid;
            }
            return {Sustainability::SwitchesAt, 0.5 * (lo + hi)};
        }
    }
    return {Sustainability::SwitchesAt, sol.grid.back()};
}

// ---------------------------------------------------------------------------
// Finite horizon
// ---------------------------------------------------------------------------

struct FiniteHorizonOptions {
    double tol = 1e-10;
    int max_iter = 500;
    int time_points = 0;  // 0 -> ceil(2T)+1, at least 11
    int grid_points = 101;
    std::function<double(double)> bequest;  // terminal rate h(a); default h(a) = a
};

struct FiniteHorizonSolution {
    std::vector<double> time_grid;
    std::vector<double> grid;                    // adherence grid
    std::vector<std::vector<double>> rate_path;  // [adherence i][time j]
    std::vector<double> median_rate_path;        // belief-averaged rate over time
    std::vector<double> aggregate_path;          // converged aggregate R_t
    bool converged = false;
    int iterations = 0;
    double sup_norm_residual = 0.0;
    bool degenerate_limit_used = false;
};

namespace detail {

// Solution of the backward Bernoulli rate ODE with terminal value hq at tau=0,
// holding the aggregate (hence eC) frozen. eC < 0 corresponds to a positive
// stationary rate -eC; tau -> infinity recovers it.
inline double fh_rate_closed(double tau, double eC, double hq, bool& limit_branch) {
    if (std::abs(eC * tau) < 1e-12) {
        if (tau > 0.0) limit_branch = true;
        double den = 1.0 + hq * tau;
        return hq / den;
    }
    double den = std::exp(eC * tau) * (eC + hq) - hq;
    if (den == 0.0)
        throw convergence_error("finite-horizon rate escapes in finite time", tau);
    return hq * eC / den;
}

}  // namespace detail

inline FiniteHorizonSolution q_mfe_finite_horizon(const ModelParams& params,
                                                  const BeliefPrior& prior, double T,
                                                  FiniteHorizonOptions opts = {}) {
    params.validate();
    prior.validate();
    if (!(T > 0.0)) throw validation_error("T", "horizon must be > 0");
    if (opts.max_iter < 1) throw validation_error("max_iter", "must be >= 1");
    if (!(opts.tol > 0.0)) throw validation_error("tol", "must be > 0");
    if (opts.grid_points < 2)
        throw validation_error("grid_points", "need at least 2 grid points");
    int nt = opts.time_points > 0 ? opts.time_points
                                  : std::max(static_cast<int>(std::ceil(2.0 * T)) + 1, 11);
    if (nt < 2) throw validation_error("time_points", "need at least 2 time points");
    std::function<double(double)> bequest =
        opts.bequest ? opts.bequest : [](double a) { return a; };

    PriorQuadrature quad(prior);
    const auto& aq = quad.nodes();
    const auto& wq = quad.weights();
    const size_t nq = aq.size();
    const double thr = params.threshold();

    std::vector<double> eps(nq), nux(nq), base(nq), hq(nq);
    for (size_t i = 0; i < nq; ++i) {
        Elasticities e = elasticities(aq[i], params);
        eps[i] = e.eps_q;
        nux[i] = e.nu_xbar;
        base[i] = unscaled_base_rate(aq[i], params);
        hq[i] = bequest(aq[i]);
        // a negative terminal rate puts a pole into the Bernoulli solution
        if (!(hq[i] >= 0.0))
            throw validation_error("bequest", "terminal rate must be >= 0 on [0,1]");
    }

    FiniteHorizonSolution sol;
    sol.time_grid.resize(nt);
    for (int j = 0; j < nt; ++j) sol.time_grid[j] = T * j / (nt - 1);

    // Picard iteration on the unscaled aggregate path R_t = E[q(.,t)/eps_q],
    // starting from the no-coupling aggregate.
    double m_base = 0.0;
    for (size_t i = 0; i < nq; ++i) m_base += wq[i] * base[i];
    std::vector<double> R(nt, m_base), Rnew(nt);

    bool limit_branch = false;
    double delta = 0.0;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        delta = 0.0;
        for (int j = 0; j < nt; ++j) {
            double tau = T - sol.time_grid[j];
            double s = 0.0;
            for (size_t i = 0; i < nq; ++i) {
                double eC = -eps[i] * (base[i] + nux[i] * (R[j] - thr));
                s += wq[i] * detail::fh_rate_closed(tau, eC, hq[i], limit_branch) / eps[i];
            }
            Rnew[j] = s;
            delta = std::max(delta, std::abs(s - R[j]));
        }
        R.swap(Rnew);
        if (delta < opts.tol) {
            sol.converged = true;
            ++iter;
            break;
        }
    }
    sol.iterations = iter;
    sol.sup_norm_residual = delta;
    sol.aggregate_path = R;

    sol.grid.resize(opts.grid_points);
    for (int i = 0; i < opts.grid_points; ++i)
        sol.grid[i] = static_cast<double>(i) / (opts.grid_points - 1);
    sol.rate_path.assign(opts.grid_points, std::vector<double>(nt));
    for (int i = 0; i < opts.grid_points; ++i) {
        double a = sol.grid[i];
        Elasticities e = elasticities(a, params);
        double b = unscaled_base_rate(a, params);
        double h = bequest(a);
        if (!(h >= 0.0))
            throw validation_error("bequest", "terminal rate must be >= 0 on [0,1]");
        for (int j = 0; j < nt; ++j) {
            double tau = T - sol.time_grid[j];
            double eC = -e.eps_q * (b + e.nu_xbar * (R[j] - thr));
            sol.rate_path[i][j] = detail::fh_rate_closed(tau, eC, h, limit_branch);
        }
    }
    sol.median_rate_path.resize(nt);
    for (int j = 0; j < nt; ++j) {
        double tau = T - sol.time_grid[j];
        double s = 0.0;
        for (size_t i = 0; i < nq; ++i) {
            double eC = -eps[i] * (base[i] + nux[i] * (R[j] - thr));
            s += wq[i] * detail::fh_rate_closed(tau, eC, hq[i], limit_branch);
        }
        sol.median_rate_path[j] = s;
    }
    sol.degenerate_limit_used = limit_branch;
    return sol;
}

}  // namespace canopy
