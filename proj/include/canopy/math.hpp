#pragma once

// Small numeric kernel: Gauss-Legendre rules, root/minimum bracketing,
// special functions. Everything here is dependency-free and pure.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace canopy {

inline constexpr double pi = 3.141592653589793238462643383279502884;

// ---------------------------------------------------------------------------
// Gauss-Legendre nodes/weights on [-1,1], computed once via Newton iteration.
// ---------------------------------------------------------------------------

struct QuadRule {
    std::vector<double> x;
    std::vector<double> w;
};

inline QuadRule gauss_legendre(int n) {
    QuadRule r;
    r.x.resize(n);
    r.w.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p0 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        r.w[n - 1 - i] = r.w[i];
    }
    return r;
}

inline const QuadRule& gauss_legendre_64() {
    static const QuadRule r = gauss_legendre(64);
    return r;
}

// ---------------------------------------------------------------------------
// Root finding and 1-d minimization
// ---------------------------------------------------------------------------

// Brent's method; f(a) and f(b) must bracket a root.
inline double brent_root(const std::function<double(double)>& f, double a, double b,
                         double tol = 1e-12, int max_iter = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0) throw std::invalid_argument("brent_root: interval does not bracket a root");
    double c = a, fc = fa, d = b - a, e = d;
    for (int it = 0; it < max_iter; ++it) {
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double eps = std::numeric_limits<double>::epsilon();
        double tol1 = 2.0 * eps * std::abs(b) + 0.5 * tol;
        double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            double s = fb / fa, p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                double r = fb / fc;
                double t = fa / fc;
                p = s * (2.0 * xm * t * (t - r) - (b - a) * (r - 1.0));
                q = (t - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
        fb = f(b);
        if ((fb > 0) == (fc > 0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    return b;
}

// Golden-section minimum of a unimodal f on [a,b].
inline double golden_min(const std::function<double(double)>& f, double a, double b,
                         double tol = 1e-10) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * pi);
}

inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline double digamma(double x) {
    double r = 0.0;
    while (x < 6.0) {
        r -= 1.0 / x;
        x += 1.0;
    }
    double ix = 1.0 / x, ix2 = ix * ix;
    // asymptotic series, Bernoulli coefficients
    r += std::log(x) - 0.5 * ix
         - ix2 * (1.0 / 12.0 - ix2 * (1.0 / 120.0 - ix2 * (1.0 / 252.0 - ix2 * (1.0 / 240.0 - ix2 / 132.0))));
    return r;
}

inline double trigamma(double x) {
    double r = 0.0;
    while (x < 6.0) {
        r += 1.0 / (x * x);
        x += 1.0;
    }
    double ix = 1.0 / x, ix2 = ix * ix;
    r += ix * (1.0 + 0.5 * ix + ix2 * (1.0 / 6.0 - ix2 * (1.0 / 30.0 - ix2 * (1.0 / 42.0 - ix2 / 30.0))));
    return r;
}

inline double lbeta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

namespace detail {

// continued fraction for the regularized incomplete beta (Lentz)
inline double betacf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double eps = std::numeric_limits<double>::epsilon();
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double ibeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double lf = a * std::log(x) + b * std::log1p(-x) - lbeta(a, b);
    double front = std::exp(lf);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::betacf(a, b, x) / a;
    return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - lbeta(b, a)) *
                     detail::betacf(b, a, 1.0 - x) / b;
}

// Upper tail of chi-square with integer dof, via the standard recurrence.
inline double chi2_tail(double x, int dof) {
    if (x <= 0.0) return 1.0;
    if (dof < 1) throw std::invalid_argument("chi2_tail: dof must be >= 1");
    double q, inc;
    int k;
    if (dof % 2 == 1) {
        q = std::erfc(std::sqrt(0.5 * x));
        inc = std::sqrt(2.0 * x / pi) * std::exp(-0.5 * x);
        k = 1;
    } else {
        q = std::exp(-0.5 * x);
        inc = 0.5 * x * q;
        k = 2;
    }
    // Q_{k+2}(x) = Q_k(x) + inc,  inc advancing by x/k each step
    while (k + 2 <= dof) {
        q += inc;
        k += 2;
        inc *= x / k;
    }
    return std::min(1.0, q);
}

// Kolmogorov distribution upper tail Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2).
inline double kolmogorov_tail(double lambda) {
    if (lambda < 1e-3) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        double t = std::exp(-2.0 * j * j * lambda * lambda);
        sum += sign * t;
        sign = -sign;
        if (t < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v, int ddof = 1) {
    double m = mean(v), s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - ddof);
}

// Piecewise-linear interpolation on a sorted grid; clamps outside the range.
inline double lerp_table(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (xs.size() != ys.size() || xs.empty())
        throw std::invalid_argument("lerp_table: grid size mismatch");
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    size_t i = static_cast<size_t>(it - xs.begin());
    double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return ys[i - 1] + t * (ys[i] - ys[i - 1]);
}

}  // namespace canopy
