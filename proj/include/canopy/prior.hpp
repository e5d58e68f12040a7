#pragma once

// Beta(alpha, beta) population distribution of adherence, plus a quadrature
// rule tuned to it. Beta densities are singular at the endpoints whenever a
// shape parameter is below one, so plain Gauss-Legendre on [0,1] loses most
// of its accuracy; instead each half is mapped through the substitution that
// flattens its endpoint (u = a^alpha on the left, v = (1-a)^beta on the
// right) and integrated on dyadically graded panels. Raw moments come out at
// machine precision for shape parameters in the range this model uses.

#include <cmath>
#include <vector>

#include "canopy/errors.hpp"
#include "canopy/math.hpp"

namespace canopy {

struct BeliefPrior {
    double alpha = 1.0;
    double beta = 1.0;

    void validate() const {
        if (!(alpha > 0.0)) throw validation_error("alpha", "must be > 0");
        if (!(beta > 0.0)) throw validation_error("beta", "must be > 0");
    }

    double mean() const { return alpha / (alpha + beta); }

    double var() const {
        double s = alpha + beta;
        return alpha * beta / (s * s * (s + 1.0));
    }

    // E[A^k] for integer k >= 0
    double raw_moment(int k) const {
        double m = 1.0;
        for (int j = 0; j < k; ++j) m *= (alpha + j) / (alpha + beta + j);
        return m;
    }

    double log_pdf(double a) const {
        double t1 = (alpha == 1.0) ? 0.0 : (alpha - 1.0) * std::log(a);
        double t2 = (beta == 1.0) ? 0.0 : (beta - 1.0) * std::log1p(-a);
        return t1 + t2 - lbeta(alpha, beta);
    }

    double pdf(double a) const { return std::exp(log_pdf(a)); }

    double cdf(double a) const { return ibeta(alpha, beta, a); }
};

class PriorQuadrature {
  public:
    explicit PriorQuadrature(const BeliefPrior& prior, int panels = 24, int order = 64) {
        prior.validate();
        const QuadRule gl = (order == 64) ? gauss_legendre_64() : gauss_legendre(order);
        const double al = prior.alpha, be = prior.beta;
        const double logB = lbeta(al, be);
        a_.reserve(static_cast<size_t>(2 * panels * order));
        w_.reserve(static_cast<size_t>(2 * panels * order));

        // left half (0, 1/2]: u = a^alpha; last panel closes the interval at 0
        double top = std::pow(0.5, al);
        double hi = top;
        for (int i = 0; i < panels; ++i) {
            double lo = (i + 1 == panels) ? 0.0 : 0.5 * hi;
            double mid = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
            for (int j = 0; j < order; ++j) {
                double u = mid + hw * gl.x[j];
                double a = std::pow(u, 1.0 / al);
                double w = hw * gl.w[j] *
                           std::exp((be - 1.0) * std::log1p(-a) - logB) / al;
                a_.push_back(a);
                w_.push_back(w);
            }
            hi = lo;
        }

        // right half [1/2, 1): v = (1-a)^beta
        top = std::pow(0.5, be);
        hi = top;
        for (int i = 0; i < panels; ++i) {
            double lo = (i + 1 == panels) ? 0.0 : 0.5 * hi;
            double mid = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
            for (int j = 0; j < order; ++j) {
                double v = mid + hw * gl.x[j];
                double a = 1.0 - std::pow(v, 1.0 / be);
                double w = hw * gl.w[j] *
                           std::exp((al - 1.0) * std::log(a) - logB) / be;
                a_.push_back(a);
                w_.push_back(w);
            }
            hi = lo;
        }

        norm_defect_ = 0.0;
        double s = 0.0;
        for (double w : w_) s += w;
        norm_defect_ = std::abs(s - 1.0);
        if (norm_defect_ > 1e-9)
            throw convergence_error("belief quadrature failed to normalize; defect " +
                                        std::to_string(norm_defect_),
                                    norm_defect_);
    }

    const std::vector<double>& nodes() const { return a_; }
    const std::vector<double>& weights() const { return w_; }
    double norm_defect() const { return norm_defect_; }

    template <class F>
    double average(F&& f) const {
        double s = 0.0;
        for (size_t i = 0; i < a_.size(); ++i) s += w_[i] * f(a_[i]);
        return s;
    }

  private:
    std::vector<double> a_, w_;
    double norm_defect_ = 0.0;
};

// Population average of f(A) under the prior.
template <class F>
double belief_moment(const BeliefPrior& prior, F&& f) {
    return PriorQuadrature(prior).average(std::forward<F>(f));
}

}  // namespace canopy
