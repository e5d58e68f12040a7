#pragma once

// Estimators for the model's three parameter blocks, plus a local-linear
// smoother for descriptive fits:
//   fit_beliefs  - Beta MLE for the adherence distribution,
//   fit_gbm      - drift/volatility of cover growth with cluster bootstrap,
//   fit_gamma    - GMM for the curvature parameter through the equilibrium map,
//   local_linear_fit - kernel regression with leave-one-out bandwidth choice.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "canopy/errors.hpp"
#include "canopy/math.hpp"
#include "canopy/panel.hpp"
#include "canopy/prior.hpp"
#include "canopy/rng.hpp"

namespace canopy {

struct EstimationResult {
    std::map<std::string, double> estimates;
    std::map<std::string, double> std_errors;
    std::map<std::string, double> diagnostics;
    std::vector<std::array<double, 2>> criterion_profile;  // filled on GMM trouble
    std::vector<std::string> warnings;
    int n_obs = 0;
    bool converged = false;
};

namespace detail {

inline void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    if (threads <= 1 || n < 2) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    int nt = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&, t]() {
            for (int i = t; i < n; i += nt) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Beta MLE
// ---------------------------------------------------------------------------

struct BeliefFitOptions {
    double tol = 1e-12;
    int max_iter = 200;
};

inline EstimationResult fit_beliefs(const std::vector<double>& shares,
                                    BeliefFitOptions opts = {}) {
    const size_t n = shares.size();
    if (n < 10) throw validation_error("shares", "need at least 10 observations");
    int clamped = 0;
    std::vector<double> a(n);
    for (size_t i = 0; i < n; ++i) {
        double v = shares[i];
        if (!(v >= 0.0 && v <= 1.0))
            throw validation_error("shares", "share outside [0,1] at index " + std::to_string(i));
        if (v < 1e-6) {
            v = 1e-6;
            ++clamped;
        } else if (v > 1.0 - 1e-6) {
            v = 1.0 - 1e-6;
            ++clamped;
        }
        a[i] = v;
    }
    const double m = mean(a);
    const double v = variance(a, 1);
    if (!(v > 0.0)) throw validation_error("shares", "zero variance");

    double L1 = 0.0, L2 = 0.0;
    for (double x : a) {
        L1 += std::log(x);
        L2 += std::log1p(-x);
    }
    L1 /= static_cast<double>(n);
    L2 /= static_cast<double>(n);

    auto loglik = [&](double al, double be) {
        return static_cast<double>(n) * ((al - 1.0) * L1 + (be - 1.0) * L2 - lbeta(al, be));
    };

    // method-of-moments start
    double scale = m * (1.0 - m) / v - 1.0;
    double al = std::max(m * scale, 1e-3);
    double be = std::max((1.0 - m) * scale, 1e-3);
    double ll0 = loglik(al, be);
    double ll = ll0;

    EstimationResult res;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        double s = al + be;
        double g1 = L1 - digamma(al) + digamma(s);
        double g2 = L2 - digamma(be) + digamma(s);
        if (std::max(std::abs(g1), std::abs(g2)) < opts.tol) {
            res.converged = true;
            break;
        }
        double ts = trigamma(s);
        double i11 = trigamma(al) - ts;
        double i22 = trigamma(be) - ts;
        double i12 = -ts;
        double det = i11 * i22 - i12 * i12;
        if (!(det > 0.0)) throw convergence_error("Beta information matrix not positive definite", det);
        double dal = (i22 * g1 - i12 * g2) / det;
        double dbe = (i11 * g2 - i12 * g1) / det;
        // damped Newton: halve until the likelihood does not decrease
        double step = 1.0;
        double al2 = al, be2 = be, ll2 = ll;
        for (int h = 0; h < 60; ++h) {
            al2 = al + step * dal;
            be2 = be + step * dbe;
            if (al2 > 0.0 && be2 > 0.0) {
                ll2 = loglik(al2, be2);
                if (ll2 >= ll - 1e-14 * std::abs(ll)) break;
            }
            step *= 0.5;
        }
        al = al2;
        be = be2;
        ll = ll2;
    }

    double s = al + be;
    double ts = trigamma(s);
    double i11 = static_cast<double>(n) * (trigamma(al) - ts);
    double i22 = static_cast<double>(n) * (trigamma(be) - ts);
    double i12 = static_cast<double>(n) * (-ts);
    double det = i11 * i22 - i12 * i12;
    if (!(det > 0.0)) throw convergence_error("Beta information matrix not positive definite", det);

    res.estimates["alpha"] = al;
    res.estimates["beta"] = be;
    res.std_errors["alpha"] = std::sqrt(i22 / det);
    res.std_errors["beta"] = std::sqrt(i11 / det);
    res.n_obs = static_cast<int>(n);
    res.diagnostics["log_likelihood"] = ll;
    res.diagnostics["log_likelihood_start"] = ll0;
    res.diagnostics["iterations"] = iter;
    res.diagnostics["clamped"] = clamped;
    if (clamped > 0)
        res.warnings.push_back(std::to_string(clamped) + " share(s) clamped away from {0,1}");
    return res;
}

// ---------------------------------------------------------------------------
// GBM drift/volatility with cluster bootstrap
// ---------------------------------------------------------------------------

struct GbmFitOptions {
    int bootstrap_reps = 3000;
    std::uint64_t seed = 42;
    int threads = 1;
};

namespace detail {

struct GbmPoint {
    double mu, sigma;
};

inline GbmPoint gbm_closed_form(const std::vector<double>& returns) {
    double rbar = mean(returns);
    double s2 = 0.0;
    for (double r : returns) s2 += (r - rbar) * (r - rbar);
    s2 /= static_cast<double>(returns.size());  // MLE, no dof correction
    double sig = std::sqrt(s2);
    return {rbar + 0.5 * s2, sig};
}

}  // namespace detail

inline EstimationResult fit_gbm(const Panel& panel, GbmFitOptions opts = {}) {
    panel.validate();
    if (opts.bootstrap_reps < 2) throw validation_error("bootstrap_reps", "must be >= 2");
    auto trans = consecutive_transitions(panel);
    if (trans.empty())
        throw validation_error("panel", "no consecutive-year observation pairs");

    // group log-returns by unit (clusters for the bootstrap)
    std::vector<std::vector<double>> clusters;
    std::vector<double> pooled;
    std::string cur;
    for (const auto& t : trans) {
        if (t.unit_id != cur) {
            clusters.emplace_back();
            cur = t.unit_id;
        }
        double r = t.log_return();
        clusters.back().push_back(r);
        pooled.push_back(r);
    }

    EstimationResult res;
    // units that contributed no transition (fewer than 2 usable years)
    {
        std::vector<std::string> with;
        for (const auto& t : trans)
            if (with.empty() || with.back() != t.unit_id) with.push_back(t.unit_id);
        std::vector<std::string> all;
        Panel p = panel;
        p.sort_canonical();
        for (const auto& r : p.rows)
            if (all.empty() || all.back() != r.unit_id) all.push_back(r.unit_id);
        for (const auto& u : all) {
            bool found = false;
            for (const auto& w : with)
                if (w == u) {
                    found = true;
                    break;
                }
            if (!found) res.warnings.push_back("unit " + u + " skipped: fewer than 2 consecutive years");
        }
        res.diagnostics["skipped_units"] = static_cast<double>(res.warnings.size());
    }

    if (variance(pooled, 1) <= 0.0)
        throw validation_error("panel", "degenerate panel: zero return variance");

    auto point = detail::gbm_closed_form(pooled);

    const int B = opts.bootstrap_reps;
    const size_t U = clusters.size();
    std::vector<double> bmu(B), bsig(B);
    detail::parallel_for(B, opts.threads, [&](int b) {
        Rng rng(derive_seed(opts.seed, "gbm-bootstrap", static_cast<std::uint64_t>(b)));
        std::vector<double> sample;
        sample.reserve(pooled.size());
        for (size_t u = 0; u < U; ++u) {
            const auto& c = clusters[rng.index(U)];
            sample.insert(sample.end(), c.begin(), c.end());
        }
        auto pt = detail::gbm_closed_form(sample);
        bmu[b] = pt.mu;
        bsig[b] = pt.sigma;
    });

    res.estimates["mu"] = point.mu;
    res.estimates["sigma"] = point.sigma;
    res.std_errors["mu"] = std::sqrt(variance(bmu, 1));
    res.std_errors["sigma"] = std::sqrt(variance(bsig, 1));
    res.n_obs = static_cast<int>(pooled.size());
    res.converged = true;
    double m = point.mu - 0.5 * point.sigma * point.sigma;
    double ll = 0.0;
    for (double r : pooled)
        ll += std::log(norm_pdf((r - m) / point.sigma) / point.sigma);
    res.diagnostics["log_likelihood"] = ll;
    res.diagnostics["n_units"] = static_cast<double>(U);
    res.diagnostics["bootstrap_reps"] = B;
    return res;
}

// ---------------------------------------------------------------------------
// GMM for the curvature parameter gamma
// ---------------------------------------------------------------------------

enum class GmmMoments { MeanOnly, MeanAndVariance };

struct GammaFitOptions {
    double bracket_lo = 1.0 + 1e-6;
    double bracket_hi = 50.0;
    int scan_points = 240;
    std::uint64_t seed = 42;
};

namespace detail {

// equilibrium clearing rate q(a; gamma) for g1 = Unit, g2(a) = a^k, with the
// aggregate solved in closed form given the prior moment mk = E[A^k]
struct GammaRateMap {
    double mu, sigma, rho, k, mk, thr;

    bool valid(double g) const {
        return g > 0.0 && g != 1.0 && std::abs(1.0 - (1.0 - g) * mk) > 1e-12;
    }

    double q0(double g) const {
        return (rho - mu * (1.0 - g) - 0.5 * sigma * sigma * (1.0 - g) * g) / g;
    }

    double coupling(double g) const {
        return (g * q0(g) - thr * (1.0 - g) * mk) / (1.0 - (1.0 - g) * mk);
    }

    // rate at adherence a, given precomputed a^k
    double rate(double ak, double g) const {
        return q0(g) - ak * (1.0 - g) / g * (thr - coupling(g));
    }
};

}  // namespace detail

inline EstimationResult fit_gamma(const Panel& panel, double mu, double sigma, double rho,
                                  const BeliefPrior& prior, double k, GmmMoments moments,
                                  GammaFitOptions opts = {}) {
    panel.validate();
    prior.validate();
    if (!(k > 0.0)) throw validation_error("k", "must be > 0");
    if (!(sigma >= 0.0)) throw validation_error("sigma", "must be >= 0");
    if (!(rho > 0.0)) throw validation_error("rho", "must be > 0");
    if (!(opts.bracket_hi > opts.bracket_lo) || !(opts.bracket_lo > 1.0))
        throw validation_error("bracket_lo", "need 1 < bracket_lo < bracket_hi");
    if (opts.scan_points < 8) throw validation_error("scan_points", "must be >= 8");

    auto trans = consecutive_transitions(panel);
    if (trans.size() < 10)
        throw validation_error("panel", "need at least 10 consecutive-year pairs");

    const size_t n = trans.size();
    std::vector<double> dx(n), ak(n);
    for (size_t i = 0; i < n; ++i) {
        dx[i] = trans[i].rel_change();
        ak[i] = std::pow(trans[i].a_from, k);
    }

    detail::GammaRateMap map;
    map.mu = mu;
    map.sigma = sigma;
    map.rho = rho;
    map.k = k;
    map.thr = mu - 0.5 * sigma * sigma;
    map.mk = PriorQuadrature(prior).average([&](double a) { return std::pow(a, k); });

    // annual transitions: dt = 1, model mean of dx is mu - q(a)
    auto gbar = [&](double g) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += dx[i] - (mu - map.rate(ak[i], g));
        return s / static_cast<double>(n);
    };
    auto gvar = [&](double g) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double e = dx[i] - (mu - map.rate(ak[i], g));
            double v = e * e - sigma * sigma;
            s += v;
        }
        return s / static_cast<double>(n);
    };

    std::vector<double> grid(opts.scan_points);
    for (int j = 0; j < opts.scan_points; ++j) {
        double t = static_cast<double>(j) / (opts.scan_points - 1);
        grid[j] = std::exp(std::log(opts.bracket_lo) + t * (std::log(opts.bracket_hi) -
                                                            std::log(opts.bracket_lo)));
    }

    EstimationResult res;
    res.n_obs = static_cast<int>(n);

    if (moments == GmmMoments::MeanOnly) {
        std::vector<double> gs(grid.size());
        for (size_t j = 0; j < grid.size(); ++j)
            gs[j] = map.valid(grid[j]) ? gbar(grid[j]) : std::nan("");
        double ghat = 0.0;
        bool found = false;
        for (size_t j = 0; j + 1 < grid.size(); ++j) {
            if (std::isnan(gs[j]) || std::isnan(gs[j + 1])) continue;
            if (gs[j] == 0.0) {
                ghat = grid[j];
                found = true;
                break;
            }
            if (gs[j] * gs[j + 1] < 0.0) {
                ghat = brent_root(gbar, grid[j], grid[j + 1], 1e-10);
                found = true;
                break;
            }
        }
        if (!found) {
            // no root in the bracket: report the profile instead of guessing
            size_t best = 0;
            for (size_t j = 1; j < grid.size(); ++j)
                if (!std::isnan(gs[j]) && std::abs(gs[j]) < std::abs(gs[best])) best = j;
            for (size_t j = 0; j < grid.size(); ++j)
                res.criterion_profile.push_back({grid[j], gs[j] * gs[j]});
            res.estimates["gamma"] = grid[best];
            res.converged = false;
            res.diagnostics["criterion"] = gs[best] * gs[best];
            res.warnings.push_back("moment condition has no root in the bracket");
            return res;
        }
        // delta-method standard error: Var(g_i) / (n * slope^2)
        double vg = 0.0;
        double gb = gbar(ghat);
        for (size_t i = 0; i < n; ++i) {
            double e = dx[i] - (mu - map.rate(ak[i], ghat)) - gb;
            vg += e * e;
        }
        vg /= static_cast<double>(n - 1);
        double h = 1e-5 * ghat;
        double slope = (gbar(ghat + h) - gbar(ghat - h)) / (2.0 * h);
        res.estimates["gamma"] = ghat;
        res.std_errors["gamma"] = std::sqrt(vg / static_cast<double>(n)) / std::abs(slope);
        res.converged = true;
        res.diagnostics["criterion"] = gb * gb;
        res.diagnostics["j_stat"] = 0.0;  // just identified
        res.diagnostics["moment_slope"] = slope;
        return res;
    }

    // two moments, two-step GMM
    auto crit = [&](double g, const std::array<double, 3>& winv) {
        // winv = (w11, w12, w22) of the inverse weight matrix W = Omega^{-1}
        double g1 = gbar(g), g2 = gvar(g);
        return winv[0] * g1 * g1 + 2.0 * winv[1] * g1 * g2 + winv[2] * g2 * g2;
    };
    auto minimize = [&](const std::array<double, 3>& winv, double& crit_out) {
        size_t best = 0;
        double cb = std::numeric_limits<double>::infinity();
        std::vector<double> cs(grid.size(), std::numeric_limits<double>::quiet_NaN());
        for (size_t j = 0; j < grid.size(); ++j) {
            if (!map.valid(grid[j])) continue;
            cs[j] = crit(grid[j], winv);
            if (cs[j] < cb) {
                cb = cs[j];
                best = j;
            }
        }
        double lo = grid[best > 0 ? best - 1 : 0];
        double hi = grid[std::min(best + 1, grid.size() - 1)];
        double g = golden_min([&](double x) { return crit(x, winv); }, lo, hi, 1e-10);
        crit_out = crit(g, winv);
        return g;
    };

    double c1 = 0.0;
    double g1hat = minimize({1.0, 0.0, 1.0}, c1);

    // efficient weight from first-step residual moments
    double o11 = 0.0, o12 = 0.0, o22 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double e = dx[i] - (mu - map.rate(ak[i], g1hat));
        double v = e * e - sigma * sigma;
        o11 += e * e;
        o12 += e * v;
        o22 += v * v;
    }
    o11 /= static_cast<double>(n);
    o12 /= static_cast<double>(n);
    o22 /= static_cast<double>(n);
    double det = o11 * o22 - o12 * o12;
    if (!(det > 0.0))
        throw convergence_error("GMM weight matrix is singular", det);
    std::array<double, 3> winv = {o22 / det, -o12 / det, o11 / det};

    double c2 = 0.0;
    double ghat = minimize(winv, c2);

    bool interior = ghat > opts.bracket_lo * (1.0 + 1e-6) && ghat < opts.bracket_hi * (1.0 - 1e-6);
    res.estimates["gamma"] = ghat;
    res.converged = interior;
    if (!interior) {
        for (size_t j = 0; j < grid.size(); ++j) {
            double c = map.valid(grid[j]) ? crit(grid[j], winv) : std::nan("");
            res.criterion_profile.push_back({grid[j], c});
        }
        res.warnings.push_back("criterion minimized at the bracket edge");
    }

    double h = 1e-5 * ghat;
    double d1 = (gbar(ghat + h) - gbar(ghat - h)) / (2.0 * h);
    double d2 = (gvar(ghat + h) - gvar(ghat - h)) / (2.0 * h);
    double denom = d1 * (winv[0] * d1 + winv[1] * d2) + d2 * (winv[1] * d1 + winv[2] * d2);
    if (denom > 0.0)
        res.std_errors["gamma"] = 1.0 / std::sqrt(static_cast<double>(n) * denom);
    double jstat = static_cast<double>(n) * c2;
    res.diagnostics["j_stat"] = jstat;
    res.diagnostics["j_pvalue"] = chi2_tail(jstat, 1);
    res.diagnostics["criterion"] = c2;
    res.diagnostics["first_step_gamma"] = g1hat;
    return res;
}

// ---------------------------------------------------------------------------
// Local-linear regression with LOO-CV bandwidth
// ---------------------------------------------------------------------------

struct LocalLinearOptions {
    std::vector<int> years;  // optional year tags; removes additive year means
    int eval_points = 50;
    int bootstrap_reps = 500;
    std::uint64_t seed = 42;
    std::vector<double> bandwidths;  // empty -> automatic grid
};

struct LocalLinearFit {
    std::vector<double> grid, fit, lo, hi;
    double bandwidth = 0.0;
    std::vector<std::array<double, 2>> cv_profile;
    int n_obs = 0;
};

namespace detail {

// local-linear estimate at x0; returns NaN when the weighted design is singular
inline double loclin_at(const std::vector<double>& x, const std::vector<double>& y, double x0,
                        double h, int skip = -1) {
    double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    for (size_t j = 0; j < x.size(); ++j) {
        if (static_cast<int>(j) == skip) continue;
        double u = (x[j] - x0) / h;
        if (std::abs(u) >= 1.0) continue;
        double w = 0.75 * (1.0 - u * u);
        double d = x[j] - x0;
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
        t0 += w * y[j];
        t1 += w * d * y[j];
    }
    double det = s0 * s2 - s1 * s1;
    if (!(det > 1e-12 * (s0 * s2 + 1e-300))) return std::nan("");
    return (s2 * t0 - s1 * t1) / det;
}

}  // namespace detail

inline LocalLinearFit local_linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                                       LocalLinearOptions opts = {}) {
    if (x.size() != y.size()) throw validation_error("y", "length mismatch with x");
    const size_t n = x.size();
    if (n < 30) throw validation_error("x", "need at least 30 observations");
    if (!opts.years.empty() && opts.years.size() != n)
        throw validation_error("years", "length mismatch with x");
    if (opts.eval_points < 2) throw validation_error("eval_points", "must be >= 2");

    // remove additive year means, keep the overall level
    std::vector<double> yd = y;
    if (!opts.years.empty()) {
        std::map<int, std::pair<double, int>> acc;
        for (size_t i = 0; i < n; ++i) {
            acc[opts.years[i]].first += y[i];
            acc[opts.years[i]].second += 1;
        }
        double grand = mean(y);
        for (size_t i = 0; i < n; ++i) {
            auto& a = acc[opts.years[i]];
            yd[i] = y[i] - a.first / a.second + grand;
        }
    }

    double sx = std::sqrt(variance(x, 1));
    if (!(sx > 0.0)) throw validation_error("x", "zero variance");
    std::vector<double> hs = opts.bandwidths;
    if (hs.empty()) {
        double h0 = 1.06 * sx * std::pow(static_cast<double>(n), -0.2);
        for (int j = 0; j < 15; ++j)
            hs.push_back(h0 * std::exp(std::log(0.25) + j * (std::log(4.0) - std::log(0.25)) / 14.0));
    }

    LocalLinearFit out;
    out.n_obs = static_cast<int>(n);
    double best_cv = std::numeric_limits<double>::infinity();
    for (double h : hs) {
        double err = 0.0;
        bool ok = true;
        for (size_t i = 0; i < n; ++i) {
            double f = detail::loclin_at(x, yd, x[i], h, static_cast<int>(i));
            if (std::isnan(f)) {
                ok = false;
                break;
            }
            err += (yd[i] - f) * (yd[i] - f);
        }
        double cv = ok ? err / static_cast<double>(n) : std::numeric_limits<double>::infinity();
        out.cv_profile.push_back({h, cv});
        if (cv < best_cv) {
            best_cv = cv;
            out.bandwidth = h;
        }
    }
    if (!std::isfinite(best_cv))
        throw convergence_error("no bandwidth gave a nonsingular leave-one-out fit", best_cv);

    double xmin = *std::min_element(x.begin(), x.end());
    double xmax = *std::max_element(x.begin(), x.end());
    out.grid.resize(opts.eval_points);
    out.fit.resize(opts.eval_points);
    for (int j = 0; j < opts.eval_points; ++j) {
        out.grid[j] = xmin + (xmax - xmin) * j / (opts.eval_points - 1);
        out.fit[j] = detail::loclin_at(x, yd, out.grid[j], out.bandwidth);
    }

    // pairs bootstrap for pointwise percentile bands
    const int B = opts.bootstrap_reps;
    std::vector<std::vector<double>> curves(B);
    for (int b = 0; b < B; ++b) {
        Rng rng(derive_seed(opts.seed, "loclin-bootstrap", static_cast<std::uint64_t>(b)));
        std::vector<double> xb(n), yb(n);
        for (size_t i = 0; i < n; ++i) {
            size_t j = rng.index(n);
            xb[i] = x[j];
            yb[i] = yd[j];
        }
        curves[b].resize(opts.eval_points);
        for (int j = 0; j < opts.eval_points; ++j)
            curves[b][j] = detail::loclin_at(xb, yb, out.grid[j], out.bandwidth);
    }
    out.lo.resize(opts.eval_points);
    out.hi.resize(opts.eval_points);
    for (int j = 0; j < opts.eval_points; ++j) {
        std::vector<double> col;
        col.reserve(B);
        for (int b = 0; b < B; ++b)
            if (std::isfinite(curves[b][j])) col.push_back(curves[b][j]);
        if (col.empty()) {
            out.lo[j] = out.hi[j] = std::nan("");
            continue;
        }
        std::sort(col.begin(), col.end());
        auto pick = [&](double q) {
            double pos = q * (col.size() - 1);
            size_t i0 = static_cast<size_t>(pos);
            size_t i1 = std::min(i0 + 1, col.size() - 1);
            return col[i0] + (pos - i0) * (col[i1] - col[i0]);
        };
        out.lo[j] = pick(0.025);
        out.hi[j] = pick(0.975);
    }
    return out;
}

}  // namespace canopy
